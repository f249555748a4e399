#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "afhn/data.hpp"
#include "afhn/models.hpp"
#include "afhn/train.hpp"

namespace afhn {

struct ClassifierConfig {
    double lr = 1e-2;
    std::size_t steps = 100;
};

struct EvalConfig {
    std::size_t episodes = 600;
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t q_queries = 15;
    std::size_t k_prime = 300;
    ClassifierConfig classifier;
    std::uint64_t seed = 0;
    bool include_real_support = true;  // off: literal fakes-only support
    bool oracle = false;               // debug: classifier returns true labels
    std::size_t threads = 1;

    void validate() const;
};

struct EvalReport {
    double mean_acc = 0.0;
    double ci95 = 0.0;
    double diversity = 0.0;
    std::vector<double> per_episode_acc;
};

// Episode-level linear softmax head, zero-initialized.
struct SoftmaxClassifier {
    Tensor w;  // d x N
    Tensor b;  // 1 x N
};

struct EnlargedSupport {
    Tensor features;
    std::vector<int> labels;  // local class ids
};

// K' fakes per class from fresh z ~ N(0,1), labeled with the conditioning
// class; real support rows are kept alongside unless include_real is off.
EnlargedSupport augment_support(const GeneratorParams& gen, const Tensor& prototypes,
                                std::size_t k_prime, double leaky_slope, const Tensor& real_support,
                                const std::vector<int>& real_labels, bool include_real,
                                std::mt19937_64& rng);

// Full-batch Adam on cross-entropy of W*s + b for a fixed step count.
SoftmaxClassifier train_softmax_classifier(const EnlargedSupport& support, std::size_t n_way,
                                           const ClassifierConfig& cfg);

double classifier_loss(const SoftmaxClassifier& clf, const Tensor& x, const std::vector<int>& y);
int classify(const SoftmaxClassifier& clf, const Tensor& x, std::size_t row);

// Episodic protocol: sample, prototype, augment, train classifier, score.
// Episodes are independent given per-episode rng streams; with threads > 1
// results are identical to the sequential run.
EvalReport evaluate(const ExtractorParams& extractor, const GeneratorParams& gen,
                    const LabeledFeatureSet& testset, const std::set<int>& test_classes,
                    const EvalConfig& cfg, const HyperParams& hp);

// Mean over classes of mean pairwise (1 - cos) among the class's fakes.
double diversity_score(const std::vector<Tensor>& fakes_per_class);

// Top-2 PCA coordinates via eigendecomposition of the covariance.
struct Projection {
    std::vector<double> pc1, pc2;
};
Projection project_2d(const Tensor& features);

void write_eval_report_json(const EvalReport& r, const EvalConfig& cfg, const std::string& path);
void write_eval_report_csv(const EvalReport& r, const std::string& path);

// Desk-scale analogue of the paper's ablation table.
enum class Variant { Baseline, CrOnly, Cwgan, CwganCr, CwganCrAr };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct AblationRow {
    Variant variant;
    EvalReport report;
};

// Trains each variant from the same seed and data, evaluates identically.
// Baseline performs no generator training and evaluates with K' = 0.
std::vector<AblationRow> ablation_run(const LabeledFeatureSet& features,
                                      const std::set<int>& train_classes,
                                      const std::set<int>& test_classes, const TrainConfig& tcfg,
                                      const EvalConfig& ecfg, const std::vector<Variant>& variants);

}  // namespace afhn
