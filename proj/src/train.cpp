#include "afhn/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "afhn/episode.hpp"
#include "afhn/errors.hpp"
#include "afhn/serialize.hpp"

namespace afhn {

void TrainConfig::validate() const {
    hyper.validate();
    if (stage1.epochs < 1 || stage1.batch < 1 || !(stage1.lr > 0.0) || stage1.halve_every < 1)
        throw ValidationError("stage1 config values must be positive");
    if (stage2.epochs < 1 || stage2.tasks_per_epoch < 1 || !(stage2.lr > 0.0) ||
        stage2.halve_every < 1 || stage2.d_steps_per_g < 1)
        throw ValidationError("stage2 config values must be positive");
    if (n_way < 2 || k_shot < 1 || q_queries < 1)
        throw ValidationError("need N >= 2, K >= 1, Q >= 1");
}

double lr_schedule(double base_lr, std::size_t epoch, std::size_t halve_every) {
    return base_lr * std::pow(0.5, static_cast<double>(epoch / halve_every));
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    // splitmix64 finalizer over the combined key
    std::uint64_t x = seed ^ (tag * 0x9e3779b97f4a7c15ULL) ^ (index * 0xbf58476d1ce4e5b9ULL);
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    x = x ^ (x >> 31);
    return std::mt19937_64(x);
}

namespace {

constexpr std::uint64_t kTagStage1 = 0x51;
constexpr std::uint64_t kTagStage2 = 0x52;

Tensor gauss_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = gauss(rng);
    return t;
}

std::vector<Tensor> collect_grads(const Graph& g, const ParamNodes& nodes) {
    std::vector<Tensor> grads;
    for (NodeId id : nodes.ids) {
        if (g.grad(id).empty()) {
            const Tensor& v = g.value(id);
            grads.emplace_back(v.rows(), v.cols());
        } else {
            grads.push_back(g.grad(id));
        }
    }
    return grads;
}

}  // namespace

ExtractorTrainResult train_extractor(const LabeledFeatureSet& trainset, std::size_t d_s,
                                     const Stage1Config& cfg, std::uint64_t seed) {
    if (trainset.size() == 0) throw ValidationError("train_extractor: empty training set");
    // dense head labels
    std::map<int, int> remap;
    for (const auto& [cls, rows] : trainset.class_index)
        remap.emplace(cls, static_cast<int>(remap.size()));
    const std::size_t n_classes = remap.size();
    if (n_classes < 2) throw ValidationError("train_extractor: need >= 2 classes");
    std::vector<int> dense_labels(trainset.size());
    for (std::size_t i = 0; i < trainset.size(); ++i)
        dense_labels[i] = remap.at(trainset.labels[i]);

    ExtractorTrainResult out;
    {
        std::mt19937_64 rng = derive_rng(seed, kTagStage1, 0);
        out.params = init_extractor(trainset.dim(), d_s, n_classes, rng);
    }
    AdamState opt;
    std::vector<std::size_t> order(trainset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng = derive_rng(seed, kTagStage1, epoch + 1);
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = lr_schedule(cfg.lr, epoch, cfg.halve_every);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t bsz = std::min(cfg.batch, order.size() - start);
            Tensor x(bsz, trainset.dim());
            std::vector<int> y(bsz);
            for (std::size_t i = 0; i < bsz; ++i) {
                const std::size_t row = order[start + i];
                for (std::size_t j = 0; j < trainset.dim(); ++j)
                    x.at(i, j) = trainset.features.at(row, j);
                y[i] = dense_labels[row];
            }
            Graph g;
            const ParamNodes p = register_params(g, out.params, true);
            const NodeId xn = g.constant(std::move(x));
            const ExtractorOut fwd = extractor_forward(g, xn, p);
            const NodeId loss = g.softmax_xent_rows(fwd.logits, std::move(y));
            const double lv = g.value(loss).item();
            if (!std::isfinite(lv))
                throw NumericalError("train_extractor: loss diverged at epoch " +
                                     std::to_string(epoch));
            g.backward(loss);
            adam_step(out.params.all(), collect_grads(g, p), opt, lr);
            loss_sum += lv;
            ++batches;
        }
        out.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    return out;
}

namespace {

struct TaskBatch {
    PrototypeSet protos;
    Tensor z1, z2;                      // N x d_z
    std::vector<Tensor> fakes1, fakes2;  // detached, one row per class
    Episode ep;
};

TaskBatch make_task(const LabeledFeatureSet& features, const std::set<int>& train_classes,
                    const TrainConfig& cfg, const GeneratorParams& gen, std::mt19937_64& rng,
                    bool detached_fakes) {
    TaskBatch t;
    t.ep = sample_episode(features, train_classes, cfg.n_way, cfg.k_shot, cfg.q_queries, rng);
    t.protos = compute_prototypes(t.ep);
    t.z1 = gauss_matrix(cfg.n_way, cfg.hyper.d_z, rng);
    t.z2 = gauss_matrix(cfg.n_way, cfg.hyper.d_z, rng);
    if (detached_fakes) {
        for (std::size_t j = 0; j < cfg.n_way; ++j) {
            t.fakes1.push_back(generator_apply_batch(gen, t.protos.prototypes.row_copy(j),
                                                     t.z1.row_copy(j), cfg.hyper.leaky_slope));
            t.fakes2.push_back(generator_apply_batch(gen, t.protos.prototypes.row_copy(j),
                                                     t.z2.row_copy(j), cfg.hyper.leaky_slope));
        }
    }
    return t;
}

void write_log_csv(const std::string& path, const std::vector<TrainLogRecord>& log) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << "step,d_loss,g_adv,l_cr,l_ar,total_g\n";
    char buf[256];
    for (const TrainLogRecord& r : log) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                      r.loss.d_loss, r.loss.g_adv, r.loss.l_cr, r.loss.l_ar, r.loss.total_g);
        f << buf;
    }
}

}  // namespace

GanTrainResult train_gan(const LabeledFeatureSet& features, const std::set<int>& train_classes,
                         const TrainConfig& cfg, const std::string& run_dir,
                         const std::string& resume_from, const ExtractorParams* extractor) {
    cfg.validate();
    for (int c : train_classes) {
        auto it = features.class_index.find(c);
        if (it == features.class_index.end() || it->second.size() < cfg.k_shot + cfg.q_queries)
            throw ValidationError("train class " + std::to_string(c) +
                                  " missing or too small for K+Q");
    }
    if (train_classes.size() < cfg.n_way)
        throw ValidationError("train split smaller than N");

    GanTrainResult res;
    std::size_t start_epoch = 0;
    if (!resume_from.empty()) {
        TrainCheckpoint ck = load_train_checkpoint(resume_from);
        res.generator = ck.bundle.generator;
        res.discriminator = ck.bundle.discriminator;
        res.g_state = ck.g_state;
        res.d_state = ck.d_state;
        start_epoch = ck.epoch;
    } else {
        std::mt19937_64 rng = derive_rng(cfg.seed, kTagStage2, 0);
        res.generator = init_generator(cfg.hyper, rng);
        res.discriminator = init_discriminator(cfg.hyper, rng);
    }

    if (!run_dir.empty()) std::filesystem::create_directories(run_dir);
    long step = static_cast<long>(res.d_state.step + res.g_state.step);

    for (std::size_t epoch = start_epoch; epoch < cfg.stage2.epochs; ++epoch) {
        std::mt19937_64 rng = derive_rng(cfg.seed, kTagStage2, epoch + 1);
        const double lr = lr_schedule(cfg.stage2.lr, epoch, cfg.stage2.halve_every);
        std::size_t d_since_g = 0;
        for (std::size_t task = 0; task < cfg.stage2.tasks_per_epoch; ++task) {
            bool do_g = !cfg.use_critic;
            if (cfg.use_critic) {
                // Fix G, update D on a freshly sampled task.
                TaskBatch t = make_task(features, train_classes, cfg, res.generator, rng, true);
                std::vector<Tensor> reals, conds;
                for (std::size_t j = 0; j < cfg.n_way; ++j) {
                    reals.push_back(t.protos.prototypes.row_copy(j));
                    conds.push_back(t.protos.prototypes.row_copy(j));
                }
                Graph g;
                const ParamNodes dp = register_params(g, res.discriminator, true);
                const NodeId loss =
                    critic_loss(g, dp, t.fakes1, t.fakes2, reals, conds, cfg.hyper.lambda_gp,
                                cfg.hyper.leaky_slope, rng);
                TrainLogRecord rec;
                rec.step = ++step;
                rec.phase = 'D';
                rec.loss.d_loss = g.value(loss).item();
                if (!std::isfinite(rec.loss.d_loss))
                    throw NumericalError("critic loss diverged at epoch " + std::to_string(epoch));
                g.backward(loss);
                adam_step(res.discriminator.all(), collect_grads(g, dp), res.d_state, lr);
                res.log.push_back(rec);
                if (++d_since_g == cfg.stage2.d_steps_per_g) {
                    d_since_g = 0;
                    do_g = true;
                }
            }
            if (do_g) {
                // Fix D, update G: re-sample and re-synthesize, update G only.
                TaskBatch t = make_task(features, train_classes, cfg, res.generator, rng, false);
                Graph g;
                const ParamNodes gp = register_params(g, res.generator, true);
                const ParamNodes dp = register_params(g, res.discriminator, false);
                std::vector<NodeId> fakes1, fakes2;
                std::vector<Tensor> conds;
                std::vector<Tensor> z1_rows, z2_rows;
                for (std::size_t j = 0; j < cfg.n_way; ++j) {
                    const Tensor proto = t.protos.prototypes.row_copy(j);
                    conds.push_back(proto);
                    z1_rows.push_back(t.z1.row_copy(j));
                    z2_rows.push_back(t.z2.row_copy(j));
                    const NodeId s = g.constant(proto);
                    fakes1.push_back(generator_forward(g, s, g.constant(z1_rows[j]), gp,
                                                       cfg.hyper.leaky_slope));
                    fakes2.push_back(generator_forward(g, s, g.constant(z2_rows[j]), gp,
                                                       cfg.hyper.leaky_slope));
                }
                TrainLogRecord rec;
                rec.step = ++step;
                rec.phase = 'G';
                NodeId adv;
                if (cfg.use_critic) {
                    adv = generator_adv_loss(g, dp, fakes1, fakes2, conds, cfg.hyper.leaky_slope);
                    rec.loss.g_adv = g.value(adv).item();
                } else {
                    adv = g.constant_scalar(0.0);
                }
                NodeId cr = adv, ar = adv;
                if (cfg.hyper.alpha_cr != 0.0) {
                    cr = classification_regularizer(g, fakes1, fakes2, t.ep.query,
                                                    t.ep.query_labels);
                    rec.loss.l_cr = g.value(cr).item();
                }
                if (cfg.hyper.beta_ar != 0.0) {
                    ar = anti_collapse(g, fakes1, fakes2, z1_rows, z2_rows, cfg.hyper.epsilon_ar);
                    rec.loss.l_ar = g.value(ar).item();
                }
                const NodeId total = total_generator_loss(g, adv, cr, ar, cfg.hyper.alpha_cr,
                                                          cfg.hyper.beta_ar, cfg.hyper.epsilon_ar);
                rec.loss.total_g = g.value(total).item();
                if (!rec.loss.all_finite())
                    throw NumericalError("generator loss diverged at epoch " +
                                         std::to_string(epoch));
                g.backward(total);
                adam_step(res.generator.all(), collect_grads(g, gp), res.g_state, lr);
                res.log.push_back(rec);
            }
        }
        res.epochs_done = epoch + 1;
        if (!run_dir.empty()) {
            ModelBundle b;
            b.hyper = cfg.hyper;
            b.generator = res.generator;
            b.discriminator = res.discriminator;
            if (extractor)
                b.extractor = *extractor;
            else
                b.extractor.identity = true;
            save_train_checkpoint(b, res.g_state, res.d_state, epoch + 1,
                                  run_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) +
                                      ".json");
            write_log_csv(run_dir + "/train_log.csv", res.log);
        }
    }
    return res;
}

void save_train_checkpoint(const ModelBundle& bundle, const AdamState& g_state,
                           const AdamState& d_state, std::size_t epoch, const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(bundle_to_json(bundle));
    j["adam_g"] = adam_to_json(g_state);
    j["adam_d"] = adam_to_json(d_state);
    j["epoch"] = epoch;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
    if (!f) throw ValidationError("write failed: " + path);
}

TrainCheckpoint load_train_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    TrainCheckpoint ck;
    ck.bundle = bundle_from_json(text);
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.contains("adam_g")) ck.g_state = adam_from_json(j.at("adam_g"));
    if (j.contains("adam_d")) ck.d_state = adam_from_json(j.at("adam_d"));
    if (j.contains("epoch")) ck.epoch = j.at("epoch").get<std::size_t>();
    return ck;
}

}  // namespace afhn
