#include "afhn/models.hpp"

#include <cmath>
#include <fstream>

#include "afhn/errors.hpp"
#include "afhn/serialize.hpp"

namespace afhn {

void HyperParams::validate() const {
    if (lambda_gp < 0.0) throw ValidationError("lambda_gp must be >= 0");
    if (alpha_cr < 0.0) throw ValidationError("alpha_cr must be >= 0");
    if (beta_ar < 0.0) throw ValidationError("beta_ar must be >= 0");
    if (d_s == 0 || d_z == 0 || h == 0) throw ValidationError("dims must be positive");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
        throw ValidationError("leaky_slope must be in (0,1)");
    if (k_prime < 1) throw ValidationError("k_prime must be >= 1");
    if (!(epsilon_ar > 0.0)) throw ValidationError("epsilon_ar must be > 0");
}

namespace {

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor w(fan_in, fan_out);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
    return w;
}

}  // namespace

GeneratorParams init_generator(const HyperParams& hp, std::mt19937_64& rng) {
    GeneratorParams p;
    p.w1 = xavier_uniform(hp.d_s + hp.d_z, hp.h, rng);
    p.b1 = Tensor(1, hp.h);
    p.w2 = xavier_uniform(hp.h, hp.d_s, rng);
    p.b2 = Tensor(1, hp.d_s);
    return p;
}

DiscriminatorParams init_discriminator(const HyperParams& hp, std::mt19937_64& rng) {
    DiscriminatorParams p;
    p.w1 = xavier_uniform(hp.d_s + hp.d_s, hp.h, rng);
    p.b1 = Tensor(1, hp.h);
    p.w2 = xavier_uniform(hp.h, 1, rng);
    p.b2 = Tensor(1, 1);
    return p;
}

ExtractorParams init_extractor(std::size_t raw_dim, std::size_t d_s, std::size_t n_classes,
                               std::mt19937_64& rng) {
    ExtractorParams p;
    p.w1 = xavier_uniform(raw_dim, d_s, rng);
    p.b1 = Tensor(1, d_s);
    p.w_cls = xavier_uniform(d_s, n_classes, rng);
    p.b_cls = Tensor(1, n_classes);
    return p;
}

ModelBundle init_bundle(const HyperParams& hp, std::size_t raw_dim, std::size_t n_classes,
                        std::uint64_t seed) {
    hp.validate();
    ModelBundle b;
    b.hyper = hp;
    std::mt19937_64 rng(seed);
    if (raw_dim > 0 && n_classes > 0) {
        b.extractor = init_extractor(raw_dim, hp.d_s, n_classes, rng);
    } else {
        b.extractor.identity = true;
    }
    b.generator = init_generator(hp, rng);
    b.discriminator = init_discriminator(hp, rng);
    return b;
}

NodeId generator_forward(Graph& g, NodeId s, NodeId z, const ParamNodes& p, double leaky_slope) {
    const NodeId in = g.concat_cols(s, z);
    const NodeId h1 = g.leaky_relu(g.add(g.matmul(in, p.ids[0]), p.ids[1]), leaky_slope);
    return g.relu(g.add(g.matmul(h1, p.ids[2]), p.ids[3]));
}

NodeId discriminator_forward(Graph& g, NodeId f, NodeId cond, const ParamNodes& p,
                             double leaky_slope) {
    const NodeId in = g.concat_cols(f, cond);
    const NodeId h1 = g.leaky_relu(g.add(g.matmul(in, p.ids[0]), p.ids[1]), leaky_slope);
    return g.add(g.matmul(h1, p.ids[2]), p.ids[3]);
}

ExtractorOut extractor_forward(Graph& g, NodeId x, const ParamNodes& p) {
    const NodeId feat = g.relu(g.add_row_bcast(g.matmul(x, p.ids[0]), p.ids[1]));
    const NodeId logits = g.add_row_bcast(g.matmul(feat, p.ids[2]), p.ids[3]);
    return {feat, logits};
}

Tensor generator_apply_batch(const GeneratorParams& p, const Tensor& prototype,
                             const Tensor& z_batch, double leaky_slope) {
    const std::size_t n = z_batch.rows();
    const std::size_t ds = prototype.cols();
    Tensor in(n, ds + z_batch.cols());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < ds; ++c) in.at(r, c) = prototype[c];
        for (std::size_t c = 0; c < z_batch.cols(); ++c) in.at(r, ds + c) = z_batch.at(r, c);
    }
    Tensor h1 = matmul(in, p.w1);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < h1.cols(); ++c) {
            double v = h1.at(r, c) + p.b1[c];
            h1.at(r, c) = v > 0.0 ? v : leaky_slope * v;
        }
    Tensor out = matmul(h1, p.w2);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) {
            double v = out.at(r, c) + p.b2[c];
            out.at(r, c) = v > 0.0 ? v : 0.0;
        }
    return out;
}

Tensor extractor_apply(const ExtractorParams& p, const Tensor& x) {
    if (p.identity) return x;
    Tensor feat = matmul(x, p.w1);
    for (std::size_t r = 0; r < feat.rows(); ++r)
        for (std::size_t c = 0; c < feat.cols(); ++c) {
            double v = feat.at(r, c) + p.b1[c];
            feat.at(r, c) = v > 0.0 ? v : 0.0;
        }
    return feat;
}

namespace {

nlohmann::json params_to_json(const std::vector<const Tensor*>& ts,
                              const std::vector<const char*>& names) {
    nlohmann::json j;
    for (std::size_t i = 0; i < ts.size(); ++i) j[names[i]] = tensor_to_json(*ts[i]);
    return j;
}

void params_from_json(const nlohmann::json& j, const std::vector<Tensor*>& ts,
                      const std::vector<const char*>& names) {
    for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = tensor_from_json(j.at(names[i]));
}

const std::vector<const char*> kGdNames = {"w1", "b1", "w2", "b2"};
const std::vector<const char*> kFNames = {"w1", "b1", "w_cls", "b_cls"};

}  // namespace

std::string bundle_to_json(const ModelBundle& b) {
    nlohmann::json j;
    j["hyper"] = hyper_to_json(b.hyper);
    j["generator"] = params_to_json(b.generator.all(), kGdNames);
    j["discriminator"] = params_to_json(b.discriminator.all(), kGdNames);
    if (b.extractor.identity) {
        j["extractor"] = nullptr;
    } else {
        j["extractor"] = params_to_json(b.extractor.all(), kFNames);
    }
    return j.dump(2);
}

ModelBundle bundle_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("checkpoint parse error: ") + e.what());
    }
    ModelBundle b;
    b.hyper = hyper_from_json(j.at("hyper"));
    params_from_json(j.at("generator"), b.generator.all(), kGdNames);
    params_from_json(j.at("discriminator"), b.discriminator.all(), kGdNames);
    if (j.at("extractor").is_null()) {
        b.extractor.identity = true;
    } else {
        params_from_json(j.at("extractor"), b.extractor.all(), kFNames);
    }
    return b;
}

void save_bundle(const ModelBundle& b, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << bundle_to_json(b) << '\n';
    if (!f) throw ValidationError("write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return bundle_from_json(text);
}

}  // namespace afhn
