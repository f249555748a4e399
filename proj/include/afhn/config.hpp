#pragma once

#include <optional>
#include <string>

#include "afhn/data.hpp"
#include "afhn/eval.hpp"
#include "afhn/train.hpp"

namespace afhn {

// One serializable source of truth per run. Unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "runs/default";
    // data source: synthetic spec, or a precomputed-embedding CSV
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::string> embeddings_csv;
    // split: ratios or explicit class lists
    double train_ratio = 0.6, val_ratio = 0.2, test_ratio = 0.2;
    std::optional<ClassSplit> explicit_split;
    TrainConfig train;
    EvalConfig eval;

    void validate() const;
};

RunConfig default_run_config();
void apply_preset(RunConfig& cfg, const std::string& preset);  // "desk" | "paper"

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace afhn
