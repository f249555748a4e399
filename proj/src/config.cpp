#include "afhn/config.hpp"

#include <fstream>
#include <json.hpp>

#include "afhn/errors.hpp"

namespace afhn {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ValidationError("unknown config key `" + it.key() + "` in " + where);
    }
}

template <typename T>
void read_if(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

SyntheticSpec parse_synthetic(const json& j) {
    reject_unknown(j, {"n_classes", "per_class", "d", "center_radius", "intra_std", "nonneg",
                       "raw_dim"},
                   "data.synthetic");
    SyntheticSpec s;
    read_if(j, "n_classes", s.n_classes);
    read_if(j, "per_class", s.per_class);
    read_if(j, "d", s.d);
    read_if(j, "center_radius", s.center_radius);
    read_if(j, "intra_std", s.intra_std);
    read_if(j, "nonneg", s.nonneg);
    if (j.contains("raw_dim")) s.raw_dim = j.at("raw_dim").get<std::size_t>();
    return s;
}

HyperParams parse_hyper(const json& j, HyperParams hp) {
    reject_unknown(j, {"lambda_gp", "alpha_cr", "beta_ar", "d_s", "d_z", "h", "leaky_slope",
                       "k_prime", "epsilon_ar"},
                   "hyper");
    read_if(j, "lambda_gp", hp.lambda_gp);
    read_if(j, "alpha_cr", hp.alpha_cr);
    read_if(j, "beta_ar", hp.beta_ar);
    read_if(j, "d_s", hp.d_s);
    read_if(j, "d_z", hp.d_z);
    read_if(j, "h", hp.h);
    read_if(j, "leaky_slope", hp.leaky_slope);
    read_if(j, "k_prime", hp.k_prime);
    read_if(j, "epsilon_ar", hp.epsilon_ar);
    return hp;
}

}  // namespace

void RunConfig::validate() const {
    if (synthetic && embeddings_csv)
        throw ValidationError("config: give either data.synthetic or data.csv, not both");
    if (!synthetic && !embeddings_csv)
        throw ValidationError("config: data source missing (data.synthetic or data.csv)");
    if (synthetic) synthetic->validate();
    if (!explicit_split) {
        if (!(train_ratio > 0.0) || val_ratio < 0.0 || !(test_ratio > 0.0))
            throw ValidationError("config: bad split ratios");
    }
    train.validate();
    eval.validate();
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.synthetic = SyntheticSpec{};  // reference benchmark spec
    return cfg;
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
    if (preset == "desk" || preset.empty()) {
        // defaults already are the desk scale
        return;
    }
    if (preset == "paper") {
        cfg.train.hyper.h = 1024;
        cfg.train.stage2.lr = 1e-5;
        cfg.train.stage2.epochs = 100;
        cfg.train.stage2.tasks_per_epoch = 600;
        cfg.train.stage1.epochs = 100;
        cfg.train.hyper.k_prime = 300;
        cfg.eval.k_prime = 300;
        cfg.eval.episodes = 600;
        return;
    }
    throw ValidationError("unknown preset `" + preset + "` (desk|paper)");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config parse error: ") + e.what());
    }
    try {
        reject_unknown(j, {"seed", "out", "data", "split", "hyper", "train", "eval"}, "top level");
        RunConfig cfg;
        read_if(j, "seed", cfg.seed);
        read_if(j, "out", cfg.out_dir);
        if (j.contains("data")) {
            const json& d = j.at("data");
            reject_unknown(d, {"synthetic", "csv"}, "data");
            if (d.contains("synthetic")) cfg.synthetic = parse_synthetic(d.at("synthetic"));
            if (d.contains("csv")) cfg.embeddings_csv = d.at("csv").get<std::string>();
        } else {
            cfg.synthetic = SyntheticSpec{};
        }
        if (j.contains("split")) {
            const json& s = j.at("split");
            reject_unknown(s, {"ratios", "train", "val", "test"}, "split");
            if (s.contains("ratios")) {
                auto r = s.at("ratios").get<std::vector<double>>();
                if (r.size() != 3) throw ValidationError("split.ratios needs 3 entries");
                cfg.train_ratio = r[0];
                cfg.val_ratio = r[1];
                cfg.test_ratio = r[2];
            }
            if (s.contains("train") || s.contains("val") || s.contains("test")) {
                ClassSplit split;
                if (s.contains("train"))
                    for (int c : s.at("train").get<std::vector<int>>()) split.train.insert(c);
                if (s.contains("val"))
                    for (int c : s.at("val").get<std::vector<int>>()) split.val.insert(c);
                if (s.contains("test"))
                    for (int c : s.at("test").get<std::vector<int>>()) split.test.insert(c);
                cfg.explicit_split = std::move(split);
            }
        }
        if (j.contains("hyper")) {
            cfg.train.hyper = parse_hyper(j.at("hyper"), cfg.train.hyper);
            cfg.eval.k_prime = cfg.train.hyper.k_prime;
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t, {"stage1", "stage2", "n_way", "k_shot", "q_queries"}, "train");
            if (t.contains("stage1")) {
                const json& s1 = t.at("stage1");
                reject_unknown(s1, {"lr", "halve_every", "epochs", "batch"}, "train.stage1");
                read_if(s1, "lr", cfg.train.stage1.lr);
                read_if(s1, "halve_every", cfg.train.stage1.halve_every);
                read_if(s1, "epochs", cfg.train.stage1.epochs);
                read_if(s1, "batch", cfg.train.stage1.batch);
            }
            if (t.contains("stage2")) {
                const json& s2 = t.at("stage2");
                reject_unknown(s2, {"lr", "halve_every", "epochs", "tasks_per_epoch",
                                    "d_steps_per_g"},
                               "train.stage2");
                read_if(s2, "lr", cfg.train.stage2.lr);
                read_if(s2, "halve_every", cfg.train.stage2.halve_every);
                read_if(s2, "epochs", cfg.train.stage2.epochs);
                read_if(s2, "tasks_per_epoch", cfg.train.stage2.tasks_per_epoch);
                read_if(s2, "d_steps_per_g", cfg.train.stage2.d_steps_per_g);
            }
            read_if(t, "n_way", cfg.train.n_way);
            read_if(t, "k_shot", cfg.train.k_shot);
            read_if(t, "q_queries", cfg.train.q_queries);
            cfg.eval.n_way = cfg.train.n_way;
            cfg.eval.k_shot = cfg.train.k_shot;
            cfg.eval.q_queries = cfg.train.q_queries;
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            reject_unknown(e,
                           {"episodes", "n_way", "k_shot", "q_queries", "k_prime", "lr", "steps",
                            "include_real_support"},
                           "eval");
            read_if(e, "episodes", cfg.eval.episodes);
            read_if(e, "n_way", cfg.eval.n_way);
            read_if(e, "k_shot", cfg.eval.k_shot);
            read_if(e, "q_queries", cfg.eval.q_queries);
            read_if(e, "k_prime", cfg.eval.k_prime);
            read_if(e, "lr", cfg.eval.classifier.lr);
            read_if(e, "steps", cfg.eval.classifier.steps);
            read_if(e, "include_real_support", cfg.eval.include_real_support);
        }
        cfg.train.seed = cfg.seed;
        cfg.eval.seed = cfg.seed;
        return cfg;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config type error: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    if (cfg.synthetic) {
        json s = {{"n_classes", cfg.synthetic->n_classes}, {"per_class", cfg.synthetic->per_class},
                  {"d", cfg.synthetic->d},                 {"center_radius", cfg.synthetic->center_radius},
                  {"intra_std", cfg.synthetic->intra_std}, {"nonneg", cfg.synthetic->nonneg}};
        if (cfg.synthetic->raw_dim) s["raw_dim"] = *cfg.synthetic->raw_dim;
        j["data"] = {{"synthetic", s}};
    } else if (cfg.embeddings_csv) {
        j["data"] = {{"csv", *cfg.embeddings_csv}};
    }
    if (cfg.explicit_split) {
        j["split"] = {{"train", std::vector<int>(cfg.explicit_split->train.begin(),
                                                 cfg.explicit_split->train.end())},
                      {"val", std::vector<int>(cfg.explicit_split->val.begin(),
                                               cfg.explicit_split->val.end())},
                      {"test", std::vector<int>(cfg.explicit_split->test.begin(),
                                                cfg.explicit_split->test.end())}};
    } else {
        j["split"] = {{"ratios", {cfg.train_ratio, cfg.val_ratio, cfg.test_ratio}}};
    }
    j["hyper"] = {{"lambda_gp", cfg.train.hyper.lambda_gp},
                  {"alpha_cr", cfg.train.hyper.alpha_cr},
                  {"beta_ar", cfg.train.hyper.beta_ar},
                  {"d_s", cfg.train.hyper.d_s},
                  {"d_z", cfg.train.hyper.d_z},
                  {"h", cfg.train.hyper.h},
                  {"leaky_slope", cfg.train.hyper.leaky_slope},
                  {"k_prime", cfg.train.hyper.k_prime},
                  {"epsilon_ar", cfg.train.hyper.epsilon_ar}};
    j["train"] = {{"stage1",
                   {{"lr", cfg.train.stage1.lr},
                    {"halve_every", cfg.train.stage1.halve_every},
                    {"epochs", cfg.train.stage1.epochs},
                    {"batch", cfg.train.stage1.batch}}},
                  {"stage2",
                   {{"lr", cfg.train.stage2.lr},
                    {"halve_every", cfg.train.stage2.halve_every},
                    {"epochs", cfg.train.stage2.epochs},
                    {"tasks_per_epoch", cfg.train.stage2.tasks_per_epoch},
                    {"d_steps_per_g", cfg.train.stage2.d_steps_per_g}}},
                  {"n_way", cfg.train.n_way},
                  {"k_shot", cfg.train.k_shot},
                  {"q_queries", cfg.train.q_queries}};
    j["eval"] = {{"episodes", cfg.eval.episodes},
                 {"n_way", cfg.eval.n_way},
                 {"k_shot", cfg.eval.k_shot},
                 {"q_queries", cfg.eval.q_queries},
                 {"k_prime", cfg.eval.k_prime},
                 {"lr", cfg.eval.classifier.lr},
                 {"steps", cfg.eval.classifier.steps},
                 {"include_real_support", cfg.eval.include_real_support}};
    return j.dump(2);
}

}  // namespace afhn
