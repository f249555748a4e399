#pragma once

#include <random>
#include <set>
#include <vector>

#include "afhn/data.hpp"
#include "afhn/tensor.hpp"

namespace afhn {

// One K-shot N-way task. Labels are episode-local indices 0..N-1;
// class_ids maps a local index back to the global class.
struct Episode {
    Tensor support;                   // (N*K) x d
    std::vector<int> support_labels;  // local
    Tensor query;                     // (N*Q) x d
    std::vector<int> query_labels;    // local
    std::vector<int> class_ids;       // N global ids

    std::size_t n_way() const { return class_ids.size(); }
};

struct PrototypeSet {
    Tensor prototypes;  // N x d, row j = mean of class j's support features
};

// N classes without replacement from `side`; per class K+Q sample rows
// without replacement, first K to support, rest to query.
Episode sample_episode(const LabeledFeatureSet& set, const std::set<int>& side, std::size_t n_way,
                       std::size_t k_shot, std::size_t q_queries, std::mt19937_64& rng);

PrototypeSet compute_prototypes(const Episode& ep);

}  // namespace afhn
