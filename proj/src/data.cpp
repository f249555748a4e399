#include "afhn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "afhn/errors.hpp"

namespace afhn {

void LabeledFeatureSet::rebuild_index() {
    class_index.clear();
    for (std::size_t i = 0; i < labels.size(); ++i) class_index[labels[i]].push_back(i);
}

void LabeledFeatureSet::validate() const {
    if (labels.size() != features.rows())
        throw ValidationError("label count != feature rows");
    for (int l : labels)
        if (l < 0) throw ValidationError("negative class label");
    for (const auto& [cls, rows] : class_index)
        if (rows.empty()) throw ValidationError("empty class " + std::to_string(cls));
}

void SyntheticSpec::validate() const {
    if (n_classes < 1 || per_class < 1) throw ValidationError("counts must be >= 1");
    if (d < 1) throw ValidationError("d must be >= 1");
    if (intra_std < 0.0) throw ValidationError("intra_std must be >= 0");
    if (center_radius < 0.0) throw ValidationError("center_radius must be >= 0");
    if (raw_dim && *raw_dim < 1) throw ValidationError("raw_dim must be >= 1");
}

void ClassSplit::validate(std::size_t n_classes) const {
    std::set<int> all;
    for (const auto* side : {&train, &val, &test}) {
        for (int c : *side) {
            if (!all.insert(c).second)
                throw ValidationError("class " + std::to_string(c) + " appears in two split sides");
        }
    }
    if (all.size() != n_classes)
        throw ValidationError("split covers " + std::to_string(all.size()) + " of " +
                              std::to_string(n_classes) + " classes");
}

LabeledFeatureSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    const std::size_t dim = spec.raw_dim ? *spec.raw_dim : spec.d;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Tensor centers(spec.n_classes, dim);
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        double norm = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            centers.at(c, j) = gauss(rng);
            norm += centers.at(c, j) * centers.at(c, j);
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (std::size_t j = 0; j < dim; ++j)
            centers.at(c, j) *= spec.center_radius / norm;
    }

    LabeledFeatureSet set;
    set.features = Tensor(spec.n_classes * spec.per_class, dim);
    set.labels.reserve(spec.n_classes * spec.per_class);
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t s = 0; s < spec.per_class; ++s, ++row) {
            for (std::size_t j = 0; j < dim; ++j) {
                double v = centers.at(c, j) + spec.intra_std * gauss(rng);
                if (spec.nonneg && v < 0.0) v = 0.0;
                set.features.at(row, j) = v;
            }
            set.labels.push_back(static_cast<int>(c));
        }
    }
    set.rebuild_index();
    return set;
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

}  // namespace

void save_features_csv(const LabeledFeatureSet& set, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    std::string line = "label";
    for (std::size_t j = 0; j < set.dim(); ++j) line += ",f" + std::to_string(j);
    line += '\n';
    f << line;
    for (std::size_t i = 0; i < set.size(); ++i) {
        line = std::to_string(set.labels[i]);
        for (std::size_t j = 0; j < set.dim(); ++j) {
            line += ',';
            append_double(line, set.features.at(i, j));
        }
        line += '\n';
        f << line;
    }
    if (!f) throw ValidationError("write failed: " + path);
}

LabeledFeatureSet load_features_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw ParseError(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    if (cols.empty() || cols[0] != "label")
        throw ParseError(path + ":1: unknown header, expected `label,f0,...`");
    const std::size_t d = cols.size() - 1;
    for (std::size_t j = 0; j < d; ++j) {
        if (cols[j + 1] != "f" + std::to_string(j))
            throw ParseError(path + ":1: unknown header column `" + cols[j + 1] + "`");
    }
    if (d == 0) throw ParseError(path + ":1: header has no feature columns");

    std::vector<double> data;
    std::vector<int> labels;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        int label = 0;
        auto res = std::from_chars(p, end, label);
        if (res.ec != std::errc() || label < 0)
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad label");
        p = res.ptr;
        std::size_t count = 0;
        while (p < end) {
            if (*p != ',')
                throw ParseError(path + ":" + std::to_string(lineno) + ": expected `,`");
            ++p;
            double v = 0.0;
            auto r = std::from_chars(p, end, v);
            if (r.ec != std::errc())
                throw ParseError(path + ":" + std::to_string(lineno) + ": non-numeric cell " +
                                 std::to_string(count));
            p = r.ptr;
            data.push_back(v);
            ++count;
        }
        if (count != d)
            throw ParseError(path + ":" + std::to_string(lineno) + ": row has " +
                             std::to_string(count) + " values, expected " + std::to_string(d));
        labels.push_back(label);
    }
    LabeledFeatureSet set;
    set.features = Tensor::from(labels.size(), d, std::move(data));
    set.labels = std::move(labels);
    set.rebuild_index();
    set.validate();
    return set;
}

ClassSplit split_classes(const LabeledFeatureSet& set, double train_ratio, double val_ratio,
                         double test_ratio, std::uint64_t seed) {
    const double total = train_ratio + val_ratio + test_ratio;
    if (!(train_ratio > 0.0) || val_ratio < 0.0 || test_ratio < 0.0 ||
        std::abs(total - 1.0) > 1e-9)
        throw ValidationError("split ratios must be nonnegative and sum to 1");
    std::vector<int> classes;
    for (const auto& [c, rows] : set.class_index) classes.push_back(c);
    if (classes.size() < 2) throw ValidationError("not enough classes to split");
    std::mt19937_64 rng(seed);
    std::shuffle(classes.begin(), classes.end(), rng);
    const std::size_t n = classes.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * n));
    const auto n_val = static_cast<std::size_t>(std::llround(val_ratio * n));
    if (n_train == 0 || n_train + n_val >= n)
        throw ValidationError("split ratios leave an empty side for " + std::to_string(n) +
                              " classes");
    ClassSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            split.train.insert(classes[i]);
        else if (i < n_train + n_val)
            split.val.insert(classes[i]);
        else
            split.test.insert(classes[i]);
    }
    split.validate(n);
    return split;
}

ClassSplit split_classes_explicit(const LabeledFeatureSet& set, std::set<int> train,
                                  std::set<int> val, std::set<int> test) {
    ClassSplit split{std::move(train), std::move(val), std::move(test)};
    for (const auto* side : {&split.train, &split.val, &split.test})
        for (int c : *side)
            if (!set.class_index.count(c))
                throw ValidationError("split names unknown class " + std::to_string(c));
    split.validate(set.n_classes());
    return split;
}

LabeledFeatureSet subset_by_classes(const LabeledFeatureSet& set, const std::set<int>& classes) {
    std::vector<std::size_t> rows;
    for (int c : classes) {
        auto it = set.class_index.find(c);
        if (it == set.class_index.end())
            throw ValidationError("subset names unknown class " + std::to_string(c));
        rows.insert(rows.end(), it->second.begin(), it->second.end());
    }
    std::sort(rows.begin(), rows.end());
    LabeledFeatureSet out;
    out.features = Tensor(rows.size(), set.dim());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < set.dim(); ++j)
            out.features.at(i, j) = set.features.at(rows[i], j);
        out.labels.push_back(set.labels[rows[i]]);
    }
    out.rebuild_index();
    return out;
}

}  // namespace afhn
