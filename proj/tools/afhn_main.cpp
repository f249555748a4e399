#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "afhn/config.hpp"
#include "afhn/episode.hpp"
#include "afhn/errors.hpp"
#include "afhn/eval.hpp"
#include "afhn/train.hpp"

namespace {

using namespace afhn;

int log_level() {
    const char* env = std::getenv("AFHN_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[afhn] %s\n", msg.c_str());
}

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> k_prime;
    std::optional<std::size_t> episodes;
    std::size_t threads = 1;
};

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? default_run_config() : load_run_config(o.config_path);
    if (!o.preset.empty()) apply_preset(cfg, o.preset);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.train.seed = *o.seed;
        cfg.eval.seed = *o.seed;
    }
    if (o.out) cfg.out_dir = *o.out;
    if (o.k_prime) {
        cfg.train.hyper.k_prime = std::max<std::size_t>(*o.k_prime, 1);
        cfg.eval.k_prime = *o.k_prime;
    }
    if (o.episodes) cfg.eval.episodes = *o.episodes;
    cfg.eval.threads = o.threads;
    cfg.validate();
    return cfg;
}

struct ResolvedData {
    LabeledFeatureSet set;  // raw space when the synthetic spec has raw_dim
    ClassSplit split;
    bool raw_mode = false;
};

ResolvedData resolve_data(const RunConfig& cfg) {
    ResolvedData rd;
    if (cfg.synthetic) {
        rd.set = generate_synthetic(*cfg.synthetic, cfg.seed);
        rd.raw_mode = cfg.synthetic->raw_dim.has_value();
    } else {
        rd.set = load_features_csv(*cfg.embeddings_csv);
    }
    if (cfg.explicit_split) {
        rd.split = split_classes_explicit(rd.set, cfg.explicit_split->train,
                                          cfg.explicit_split->val, cfg.explicit_split->test);
    } else {
        rd.split =
            split_classes(rd.set, cfg.train_ratio, cfg.val_ratio, cfg.test_ratio, cfg.seed);
    }
    return rd;
}

void check_dims(const ModelBundle& b, const LabeledFeatureSet& set) {
    const std::size_t expect = b.extractor.identity ? b.hyper.d_s : b.extractor.w1.rows();
    if (set.dim() != expect)
        throw ValidationError("checkpoint expects dim " + std::to_string(expect) +
                              ", data has dim " + std::to_string(set.dim()));
}

int cmd_synth_data(const CommonOpts& o, const std::string& out_file) {
    RunConfig cfg = resolve_config(o);
    if (!cfg.synthetic) throw ValidationError("synth-data requires a synthetic spec");
    LabeledFeatureSet set = generate_synthetic(*cfg.synthetic, cfg.seed);
    save_features_csv(set, out_file);
    std::printf("wrote %zu rows, %zu classes, dim %zu -> %s\n", set.size(), set.n_classes(),
                set.dim(), out_file.c_str());
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& resume_dir) {
    RunConfig cfg = resolve_config(o);
    ResolvedData rd = resolve_data(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream f(cfg.out_dir + "/config.json", std::ios::binary);
        f << run_config_to_json(cfg) << '\n';
    }

    ExtractorParams extractor;
    extractor.identity = true;
    LabeledFeatureSet features;
    if (rd.raw_mode) {
        log_info("stage 1: training extractor");
        LabeledFeatureSet train_raw = subset_by_classes(rd.set, rd.split.train);
        ExtractorTrainResult er =
            train_extractor(train_raw, cfg.train.hyper.d_s, cfg.train.stage1, cfg.seed);
        extractor = er.params;
        log_info("stage 1 final loss " + std::to_string(er.epoch_loss.back()));
        features = rd.set;
        features.features = extractor_apply(extractor, rd.set.features);
    } else {
        features = rd.set;
        if (features.dim() != cfg.train.hyper.d_s)
            throw ValidationError("feature dim " + std::to_string(features.dim()) +
                                  " != hyper.d_s " + std::to_string(cfg.train.hyper.d_s));
    }

    std::string resume_ckpt;
    if (!resume_dir.empty()) {
        // continue from the newest epoch checkpoint in the directory
        std::size_t best = 0;
        for (const auto& e : std::filesystem::directory_iterator(resume_dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("checkpoint_epoch_", 0) == 0) {
                const std::size_t n = std::stoul(name.substr(17));
                if (n > best) {
                    best = n;
                    resume_ckpt = e.path().string();
                }
            }
        }
        if (resume_ckpt.empty())
            throw ValidationError("no checkpoint_epoch_*.json in " + resume_dir);
        log_info("resuming from " + resume_ckpt);
    }

    log_info("stage 2: adversarial training");
    GanTrainResult res =
        train_gan(features, rd.split.train, cfg.train, cfg.out_dir, resume_ckpt,
                  rd.raw_mode ? &extractor : nullptr);

    ModelBundle final_bundle;
    final_bundle.hyper = cfg.train.hyper;
    final_bundle.generator = res.generator;
    final_bundle.discriminator = res.discriminator;
    if (rd.raw_mode)
        final_bundle.extractor = extractor;
    else
        final_bundle.extractor.identity = true;
    save_bundle(final_bundle, cfg.out_dir + "/model_final.json");
    std::printf("trained %zu epochs, final checkpoint %s/model_final.json\n", res.epochs_done,
                cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& checkpoint, bool oracle, bool fakes_only) {
    RunConfig cfg = resolve_config(o);
    ModelBundle bundle = load_bundle(checkpoint);
    ResolvedData rd = resolve_data(cfg);
    check_dims(bundle, rd.set);
    EvalConfig ec = cfg.eval;
    ec.oracle = oracle;
    if (fakes_only) ec.include_real_support = false;
    EvalReport rep =
        evaluate(bundle.extractor, bundle.generator, rd.set, rd.split.test, ec, bundle.hyper);
    std::filesystem::create_directories(cfg.out_dir);
    write_eval_report_json(rep, ec, cfg.out_dir + "/eval_report.json");
    write_eval_report_csv(rep, cfg.out_dir + "/eval_episodes.csv");
    std::printf("%.4f ± %.4f\n", rep.mean_acc, rep.ci95);
    return 0;
}

int cmd_ablate(const CommonOpts& o, const std::vector<std::string>& variant_names) {
    RunConfig cfg = resolve_config(o);
    ResolvedData rd = resolve_data(cfg);
    if (rd.raw_mode)
        throw ValidationError("ablate expects feature-space data (no raw_dim)");
    if (rd.set.dim() != cfg.train.hyper.d_s)
        throw ValidationError("feature dim != hyper.d_s");
    std::vector<Variant> variants;
    if (variant_names.empty()) {
        variants = {Variant::Baseline, Variant::CrOnly, Variant::Cwgan, Variant::CwganCr,
                    Variant::CwganCrAr};
    } else {
        for (const std::string& n : variant_names) variants.push_back(variant_from_name(n));
    }
    std::vector<AblationRow> rows =
        ablation_run(rd.set, rd.split.train, rd.split.test, cfg.train, cfg.eval, variants);

    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream csv(cfg.out_dir + "/ablation.csv", std::ios::binary);
    csv << "variant,mean_acc,ci95,diversity\n";
    std::printf("%-14s %10s %10s %10s\n", "variant", "mean_acc", "ci95", "diversity");
    for (const AblationRow& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", variant_name(r.variant),
                      r.report.mean_acc, r.report.ci95, r.report.diversity);
        csv << buf;
        std::printf("%-14s %10.4f %10.4f %10.4f\n", variant_name(r.variant), r.report.mean_acc,
                    r.report.ci95, r.report.diversity);
    }
    return 0;
}

int cmd_project(const CommonOpts& o, const std::string& checkpoint, const std::vector<int>& classes,
                const std::string& out_file, std::size_t k_prime) {
    RunConfig cfg = resolve_config(o);
    ModelBundle bundle = load_bundle(checkpoint);
    ResolvedData rd = resolve_data(cfg);
    check_dims(bundle, rd.set);
    if (classes.empty()) throw ValidationError("project: no classes given");
    for (int c : classes)
        if (!rd.set.class_index.count(c))
            throw ValidationError("project: unknown class id " + std::to_string(c));

    Tensor all_features = extractor_apply(bundle.extractor, rd.set.features);
    const std::size_t d = all_features.cols();
    const std::size_t n = classes.size();
    Tensor rows(n * k_prime + n, d);
    std::vector<int> labels;
    std::vector<std::string> kinds;
    std::mt19937_64 rng = derive_rng(cfg.seed, 0x9807, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d_z = bundle.generator.w1.rows() - d;
    std::size_t row = 0;
    std::vector<Tensor> protos;
    for (int c : classes) {
        const auto& idx = rd.set.class_index.at(c);
        Tensor proto(1, d);
        for (std::size_t r : idx)
            for (std::size_t j = 0; j < d; ++j)
                proto[j] += all_features.at(r, j) / static_cast<double>(idx.size());
        protos.push_back(proto);
        Tensor z(k_prime, d_z);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = gauss(rng);
        Tensor fakes = generator_apply_batch(bundle.generator, proto, z,
                                             bundle.hyper.leaky_slope);
        for (std::size_t r = 0; r < k_prime; ++r, ++row) {
            for (std::size_t j = 0; j < d; ++j) rows.at(row, j) = fakes.at(r, j);
            labels.push_back(c);
            kinds.push_back("fake");
        }
    }
    for (std::size_t i = 0; i < n; ++i, ++row) {
        for (std::size_t j = 0; j < d; ++j) rows.at(row, j) = protos[i][j];
        labels.push_back(classes[i]);
        kinds.push_back("prototype");
    }
    Projection proj = project_2d(rows);
    std::ofstream f(out_file, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + out_file);
    f << "label,kind,pc1,pc2\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n", labels[i], kinds[i].c_str(),
                      proj.pc1[i], proj.pc2[i]);
        f << buf;
    }
    std::printf("wrote %zu coordinate rows -> %s\n", labels.size(), out_file.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial feature hallucination for few-shot classification"};
    app.require_subcommand(1);

    CommonOpts o;
    std::uint64_t seed_opt = 0;
    std::string out_opt, k_prime_opt, episodes_opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "JSON run config");
        sub->add_option("--preset", o.preset, "desk|paper");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& s) { o.seed = s; }, "override config seed");
        sub->add_option_function<std::string>(
            "--out", [&](const std::string& s) { o.out = s; }, "output directory");
        sub->add_option_function<std::size_t>(
            "--k-prime", [&](const std::size_t& k) { o.k_prime = k; },
            "synthesized features per class");
        sub->add_option_function<std::size_t>(
            "--episodes", [&](const std::size_t& e) { o.episodes = e; }, "evaluation episodes");
        sub->add_option("--threads", o.threads, "evaluation worker threads");
    };

    std::string synth_out = "features.csv";
    CLI::App* synth = app.add_subcommand("synth-data", "generate a synthetic feature CSV");
    add_common(synth);
    synth->add_option("outfile", synth_out, "output CSV path");

    std::string resume_dir;
    CLI::App* train = app.add_subcommand("train", "two-stage training run");
    add_common(train);
    train->add_option("--resume", resume_dir, "run directory to continue from");

    std::string ckpt;
    bool oracle = false, fakes_only = false;
    CLI::App* eval = app.add_subcommand("eval", "episodic evaluation of a checkpoint");
    add_common(eval);
    eval->add_option("checkpoint", ckpt, "model checkpoint JSON")->required();
    eval->add_flag("--oracle", oracle, "debug: oracle classifier (always correct)");
    eval->add_flag("--fakes-only", fakes_only, "exclude real support from the enlarged set");

    std::vector<std::string> variant_names;
    CLI::App* ablate = app.add_subcommand("ablate", "train + evaluate ablation variants");
    add_common(ablate);
    ablate->add_option("--variants", variant_names,
                       "subset of baseline,cr_only,cwgan,cwgan_cr,cwgan_cr_ar");

    std::string proj_ckpt, proj_out = "projection.csv";
    std::vector<int> proj_classes;
    std::size_t proj_k_prime = 50;
    CLI::App* project = app.add_subcommand("project", "PCA export of synthesized features");
    add_common(project);
    project->add_option("checkpoint", proj_ckpt, "model checkpoint JSON")->required();
    project->add_option("--classes", proj_classes, "class ids to synthesize for")->required();
    project->add_option("--outfile", proj_out, "output CSV path");
    project->add_option("--fakes-per-class", proj_k_prime, "fakes per class");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth_data(o, synth_out);
        if (train->parsed()) return cmd_train(o, resume_dir);
        if (eval->parsed()) return cmd_eval(o, ckpt, oracle, fakes_only);
        if (ablate->parsed()) return cmd_ablate(o, variant_names);
        if (project->parsed())
            return cmd_project(o, proj_ckpt, proj_classes, proj_out, proj_k_prime);
    } catch (const afhn::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
