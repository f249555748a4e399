#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "afhn/graph.hpp"
#include "afhn/tensor.hpp"

namespace afhn {

struct HyperParams {
    double lambda_gp = 10.0;
    double alpha_cr = 1.0;
    double beta_ar = 1.0;
    std::size_t d_s = 64;
    std::size_t d_z = 64;
    std::size_t h = 128;
    double leaky_slope = 0.2;
    std::size_t k_prime = 300;
    double epsilon_ar = 1e-6;

    void validate() const;
};

// Two-layer conditional generator: concat(prototype, noise) -> hidden -> d_s.
struct GeneratorParams {
    Tensor w1, b1, w2, b2;
    std::vector<Tensor*> all() { return {&w1, &b1, &w2, &b2}; }
    std::vector<const Tensor*> all() const { return {&w1, &b1, &w2, &b2}; }
};

// Two-layer critic: concat(feature, prototype) -> hidden -> scalar, linear out.
struct DiscriminatorParams {
    Tensor w1, b1, w2, b2;
    std::vector<Tensor*> all() { return {&w1, &b1, &w2, &b2}; }
    std::vector<const Tensor*> all() const { return {&w1, &b1, &w2, &b2}; }
};

// One hidden layer raw -> d_s embedding plus a classification head.
struct ExtractorParams {
    Tensor w1, b1, w_cls, b_cls;
    bool identity = false;  // precomputed-embedding mode: features pass through
    std::vector<Tensor*> all() { return {&w1, &b1, &w_cls, &b_cls}; }
    std::vector<const Tensor*> all() const { return {&w1, &b1, &w_cls, &b_cls}; }
};

struct ModelBundle {
    HyperParams hyper;
    ExtractorParams extractor;
    GeneratorParams generator;
    DiscriminatorParams discriminator;
};

// Xavier-uniform weights, zero biases, fully determined by seed.
GeneratorParams init_generator(const HyperParams& hp, std::mt19937_64& rng);
DiscriminatorParams init_discriminator(const HyperParams& hp, std::mt19937_64& rng);
ExtractorParams init_extractor(std::size_t raw_dim, std::size_t d_s, std::size_t n_classes,
                               std::mt19937_64& rng);
ModelBundle init_bundle(const HyperParams& hp, std::size_t raw_dim, std::size_t n_classes,
                        std::uint64_t seed);

// Graph node handles for one network's parameters within a tape.
struct ParamNodes {
    std::vector<NodeId> ids;
};

template <typename P>
ParamNodes register_params(Graph& g, const P& p, bool requires_grad) {
    ParamNodes n;
    for (const Tensor* t : p.all()) n.ids.push_back(g.leaf(*t, requires_grad));
    return n;
}

// relu(leaky_relu(concat(s, z) W1 + b1) W2 + b2); s, z are 1 x d rows.
NodeId generator_forward(Graph& g, NodeId s, NodeId z, const ParamNodes& p, double leaky_slope);

// leaky_relu(concat(f, cond) W1 + b1) W2 + b2; scalar critic value, unbounded.
NodeId discriminator_forward(Graph& g, NodeId f, NodeId cond, const ParamNodes& p,
                             double leaky_slope);

// feature = relu(X W1 + b1); logits = feature W_cls + b_cls. X is a batch.
struct ExtractorOut {
    NodeId feature;
    NodeId logits;
};
ExtractorOut extractor_forward(Graph& g, NodeId x, const ParamNodes& p);

// Plain batched generator pass for test-time synthesis (no tape).
// z_batch is n x d_z; the prototype row is repeated. Returns n x d_s.
Tensor generator_apply_batch(const GeneratorParams& p, const Tensor& prototype,
                             const Tensor& z_batch, double leaky_slope);

// Plain batched embedding pass: X (n x raw) -> features (n x d_s).
Tensor extractor_apply(const ExtractorParams& p, const Tensor& x);

// Checkpoint document: all parameter tensors plus the hyperparameter block.
// JSON with shortest-round-trip doubles, so 64-bit values survive bit-exactly.
std::string bundle_to_json(const ModelBundle& b);
ModelBundle bundle_from_json(const std::string& text);

void save_bundle(const ModelBundle& b, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace afhn
