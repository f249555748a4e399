#include "afhn/episode.hpp"

#include <algorithm>

#include "afhn/errors.hpp"

namespace afhn {

Episode sample_episode(const LabeledFeatureSet& set, const std::set<int>& side, std::size_t n_way,
                       std::size_t k_shot, std::size_t q_queries, std::mt19937_64& rng) {
    if (n_way < 2 || k_shot < 1 || q_queries < 1)
        throw SamplingError("need N >= 2, K >= 1, Q >= 1");
    if (side.size() < n_way)
        throw SamplingError("episode needs " + std::to_string(n_way) + " classes, split has " +
                            std::to_string(side.size()));
    std::vector<int> classes(side.begin(), side.end());
    std::shuffle(classes.begin(), classes.end(), rng);
    classes.resize(n_way);

    const std::size_t d = set.dim();
    Episode ep;
    ep.support = Tensor(n_way * k_shot, d);
    ep.query = Tensor(n_way * q_queries, d);
    ep.class_ids = classes;
    for (std::size_t local = 0; local < n_way; ++local) {
        const int cls = classes[local];
        auto it = set.class_index.find(cls);
        if (it == set.class_index.end())
            throw SamplingError("class " + std::to_string(cls) + " not in dataset");
        std::vector<std::size_t> rows = it->second;
        if (rows.size() < k_shot + q_queries)
            throw SamplingError("class " + std::to_string(cls) + " has " +
                                std::to_string(rows.size()) + " samples, needs " +
                                std::to_string(k_shot + q_queries));
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t i = 0; i < k_shot; ++i) {
            const std::size_t dst = local * k_shot + i;
            for (std::size_t j = 0; j < d; ++j)
                ep.support.at(dst, j) = set.features.at(rows[i], j);
            ep.support_labels.push_back(static_cast<int>(local));
        }
        for (std::size_t i = 0; i < q_queries; ++i) {
            const std::size_t dst = local * q_queries + i;
            for (std::size_t j = 0; j < d; ++j)
                ep.query.at(dst, j) = set.features.at(rows[k_shot + i], j);
            ep.query_labels.push_back(static_cast<int>(local));
        }
    }
    return ep;
}

PrototypeSet compute_prototypes(const Episode& ep) {
    const std::size_t n = ep.n_way();
    const std::size_t d = ep.support.cols();
    const std::size_t k = ep.support.rows() / n;
    PrototypeSet ps;
    ps.prototypes = Tensor(n, d);
    for (std::size_t r = 0; r < ep.support.rows(); ++r) {
        const auto local = static_cast<std::size_t>(ep.support_labels[r]);
        for (std::size_t j = 0; j < d; ++j)
            ps.prototypes.at(local, j) += ep.support.at(r, j) / static_cast<double>(k);
    }
    return ps;
}

}  // namespace afhn
