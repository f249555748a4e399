#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "afhn/tensor.hpp"

namespace afhn {

struct LabeledFeatureSet {
    Tensor features;             // M x d
    std::vector<int> labels;     // M entries in [0, n_classes)
    std::map<int, std::vector<std::size_t>> class_index;

    std::size_t dim() const { return features.cols(); }
    std::size_t size() const { return labels.size(); }
    std::size_t n_classes() const { return class_index.size(); }

    void rebuild_index();
    void validate() const;
};

struct SyntheticSpec {
    std::size_t n_classes = 30;
    std::size_t per_class = 100;
    std::size_t d = 64;
    double center_radius = 8.0;
    double intra_std = 2.5;
    bool nonneg = true;
    std::optional<std::size_t> raw_dim;  // set: samples live in raw space for extractor training

    void validate() const;
};

struct ClassSplit {
    std::set<int> train, val, test;

    void validate(std::size_t n_classes) const;
};

// Class centers uniform on the radius-center_radius sphere; samples are
// center + N(0, intra_std^2 I), clamped at 0 when nonneg.
LabeledFeatureSet generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Header `label,f0,...,f{d-1}`, one sample per row, UTF-8, LF.
void save_features_csv(const LabeledFeatureSet& set, const std::string& path);
LabeledFeatureSet load_features_csv(const std::string& path);

ClassSplit split_classes(const LabeledFeatureSet& set, double train_ratio, double val_ratio,
                         double test_ratio, std::uint64_t seed);
ClassSplit split_classes_explicit(const LabeledFeatureSet& set, std::set<int> train,
                                  std::set<int> val, std::set<int> test);

// Rows of `set` whose labels fall in `classes`, index rebuilt.
LabeledFeatureSet subset_by_classes(const LabeledFeatureSet& set, const std::set<int>& classes);

}  // namespace afhn
