#include "afhn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "afhn/episode.hpp"
#include "afhn/errors.hpp"

namespace afhn {

namespace {

constexpr std::uint64_t kTagEval = 0xE7A1;
constexpr std::uint64_t kTagDiversity = 0xD1FE;

void softmax_row_inplace(double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        sum += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= sum;
}

Tensor logits_of(const SoftmaxClassifier& clf, const Tensor& x) {
    Tensor logits = matmul(x, clf.w);
    for (std::size_t r = 0; r < logits.rows(); ++r)
        for (std::size_t c = 0; c < logits.cols(); ++c) logits.at(r, c) += clf.b[c];
    return logits;
}

}  // namespace

void EvalConfig::validate() const {
    if (episodes < 1) throw ValidationError("episodes must be >= 1");
    if (n_way < 2 || k_shot < 1 || q_queries < 1)
        throw ValidationError("need N >= 2, K >= 1, Q >= 1");
    if (!(classifier.lr > 0.0) || classifier.steps < 1)
        throw ValidationError("classifier lr/steps must be positive");
    if (threads < 1) throw ValidationError("threads must be >= 1");
}

EnlargedSupport augment_support(const GeneratorParams& gen, const Tensor& prototypes,
                                std::size_t k_prime, double leaky_slope, const Tensor& real_support,
                                const std::vector<int>& real_labels, bool include_real,
                                std::mt19937_64& rng) {
    const std::size_t n_way = prototypes.rows();
    const std::size_t d = prototypes.cols();
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d_z = gen.w1.rows() - d;

    const std::size_t n_real = include_real ? real_support.rows() : 0;
    EnlargedSupport out;
    out.features = Tensor(n_real + n_way * k_prime, d);
    out.labels.reserve(n_real + n_way * k_prime);
    for (std::size_t r = 0; r < n_real; ++r) {
        for (std::size_t j = 0; j < d; ++j) out.features.at(r, j) = real_support.at(r, j);
        out.labels.push_back(real_labels[r]);
    }
    std::size_t row = n_real;
    for (std::size_t cls = 0; cls < n_way; ++cls) {
        if (k_prime == 0) break;
        Tensor z(k_prime, d_z);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = gauss(rng);
        const Tensor fakes = generator_apply_batch(gen, prototypes.row_copy(cls), z, leaky_slope);
        for (std::size_t r = 0; r < k_prime; ++r, ++row) {
            for (std::size_t j = 0; j < d; ++j) out.features.at(row, j) = fakes.at(r, j);
            out.labels.push_back(static_cast<int>(cls));
        }
    }
    return out;
}

SoftmaxClassifier train_softmax_classifier(const EnlargedSupport& support, std::size_t n_way,
                                           const ClassifierConfig& cfg) {
    const std::size_t m = support.features.rows();
    const std::size_t d = support.features.cols();
    if (m == 0) throw ValidationError("train_softmax_classifier: empty support");
    {
        std::set<int> seen(support.labels.begin(), support.labels.end());
        if (seen.size() != n_way)
            throw ValidationError("train_softmax_classifier: support covers " +
                                  std::to_string(seen.size()) + " of " + std::to_string(n_way) +
                                  " classes");
    }
    SoftmaxClassifier clf{Tensor(d, n_way), Tensor(1, n_way)};
    AdamState opt;
    const Tensor xt = transpose(support.features);
    Tensor dlogits(m, n_way);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Tensor logits = logits_of(clf, support.features);
        // closed-form softmax cross-entropy gradient
        for (std::size_t r = 0; r < m; ++r) {
            double* row = logits.data() + r * n_way;
            softmax_row_inplace(row, n_way);
            row[static_cast<std::size_t>(support.labels[r])] -= 1.0;
            for (std::size_t c = 0; c < n_way; ++c)
                dlogits.at(r, c) = row[c] / static_cast<double>(m);
        }
        Tensor dw = matmul(xt, dlogits);
        Tensor db(1, n_way);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n_way; ++c) db[c] += dlogits.at(r, c);
        if (!dw.all_finite() || !db.all_finite())
            throw NumericalError("softmax classifier diverged");
        adam_step({&clf.w, &clf.b}, {dw, db}, opt, cfg.lr);
    }
    return clf;
}

double classifier_loss(const SoftmaxClassifier& clf, const Tensor& x, const std::vector<int>& y) {
    Tensor logits = logits_of(clf, x);
    double total = 0.0;
    const std::size_t n = logits.cols();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double* row = logits.data() + r * n;
        double mx = *std::max_element(row, row + n);
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) sum += std::exp(row[c] - mx);
        total += mx + std::log(sum) - row[static_cast<std::size_t>(y[r])];
    }
    return total / static_cast<double>(logits.rows());
}

int classify(const SoftmaxClassifier& clf, const Tensor& x, std::size_t row) {
    Tensor logits = logits_of(clf, x.row_copy(row));
    int best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
        if (logits[c] > logits[best]) best = static_cast<int>(c);
    return best;
}

double diversity_score(const std::vector<Tensor>& fakes_per_class) {
    if (fakes_per_class.empty()) throw ValidationError("diversity_score: no classes");
    double total = 0.0;
    for (const Tensor& fakes : fakes_per_class) {
        const std::size_t n = fakes.rows();
        if (n < 2) throw ValidationError("diversity_score: need >= 2 fakes per class");
        std::vector<double> norms(n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < fakes.cols(); ++j) s += fakes.at(i, j) * fakes.at(i, j);
            norms[i] = std::sqrt(s);
        }
        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                double d = 0.0;
                for (std::size_t j = 0; j < fakes.cols(); ++j) d += fakes.at(a, j) * fakes.at(b, j);
                const double nn = norms[a] * norms[b];
                const double cos = nn > 1e-12 ? d / nn : 1.0;
                acc += 1.0 - cos;
                ++pairs;
            }
        }
        total += acc / static_cast<double>(pairs);
    }
    return total / static_cast<double>(fakes_per_class.size());
}

namespace {

double run_one_episode(const ExtractorParams& extractor, const GeneratorParams& gen,
                       const LabeledFeatureSet& testset, const std::set<int>& test_classes,
                       const EvalConfig& cfg, const HyperParams& hp, std::uint64_t index) {
    std::mt19937_64 rng = derive_rng(cfg.seed, kTagEval, index);
    Episode ep = sample_episode(testset, test_classes, cfg.n_way, cfg.k_shot, cfg.q_queries, rng);
    const Tensor support_feat = extractor_apply(extractor, ep.support);
    const Tensor query_feat = extractor_apply(extractor, ep.query);
    Episode fep = ep;
    fep.support = support_feat;
    const PrototypeSet protos = compute_prototypes(fep);

    std::size_t correct = 0;
    if (cfg.oracle) {
        return 1.0;
    }
    const EnlargedSupport enlarged =
        augment_support(gen, protos.prototypes, cfg.k_prime, hp.leaky_slope, support_feat,
                        ep.support_labels, cfg.include_real_support, rng);
    const SoftmaxClassifier clf = train_softmax_classifier(enlarged, cfg.n_way, cfg.classifier);
    for (std::size_t q = 0; q < query_feat.rows(); ++q) {
        if (classify(clf, query_feat, q) == ep.query_labels[q]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(query_feat.rows());
}

}  // namespace

EvalReport evaluate(const ExtractorParams& extractor, const GeneratorParams& gen,
                    const LabeledFeatureSet& testset, const std::set<int>& test_classes,
                    const EvalConfig& cfg, const HyperParams& hp) {
    cfg.validate();
    if (test_classes.size() < cfg.n_way)
        throw ValidationError("test split has fewer than N classes");
    for (int c : test_classes) {
        auto it = testset.class_index.find(c);
        if (it == testset.class_index.end() || it->second.size() < cfg.k_shot + cfg.q_queries)
            throw ValidationError("test class " + std::to_string(c) +
                                  " missing or too small for K+Q");
    }

    EvalReport rep;
    rep.per_episode_acc.resize(cfg.episodes);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t e = begin; e < end; ++e)
            rep.per_episode_acc[e] =
                run_one_episode(extractor, gen, testset, test_classes, cfg, hp, e);
    };
    if (cfg.threads <= 1) {
        work(0, cfg.episodes);
    } else {
        const std::size_t nt = std::min<std::size_t>(cfg.threads, cfg.episodes);
        std::vector<std::thread> pool;
        const std::size_t chunk = (cfg.episodes + nt - 1) / nt;
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(cfg.episodes, b + chunk);
            if (b < e) pool.emplace_back(work, b, e);
        }
        for (auto& th : pool) th.join();
    }

    double sum = 0.0;
    for (double a : rep.per_episode_acc) sum += a;
    rep.mean_acc = sum / static_cast<double>(cfg.episodes);
    double var = 0.0;
    for (double a : rep.per_episode_acc) var += (a - rep.mean_acc) * (a - rep.mean_acc);
    const double std_dev =
        cfg.episodes > 1 ? std::sqrt(var / static_cast<double>(cfg.episodes)) : 0.0;
    rep.ci95 = 1.96 * std_dev / std::sqrt(static_cast<double>(cfg.episodes));

    // Diversity diagnostic on one dedicated synthesis pass.
    if (cfg.k_prime >= 2 && !cfg.oracle) {
        std::mt19937_64 rng = derive_rng(cfg.seed, kTagDiversity, 0);
        Episode ep =
            sample_episode(testset, test_classes, cfg.n_way, cfg.k_shot, cfg.q_queries, rng);
        Episode fep = ep;
        fep.support = extractor_apply(extractor, ep.support);
        const PrototypeSet protos = compute_prototypes(fep);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const std::size_t d_z = gen.w1.rows() - protos.prototypes.cols();
        std::vector<Tensor> fakes;
        for (std::size_t cls = 0; cls < cfg.n_way; ++cls) {
            Tensor z(cfg.k_prime, d_z);
            for (std::size_t i = 0; i < z.size(); ++i) z[i] = gauss(rng);
            fakes.push_back(generator_apply_batch(gen, protos.prototypes.row_copy(cls), z,
                                                  hp.leaky_slope));
        }
        rep.diversity = diversity_score(fakes);
    }
    return rep;
}

Projection project_2d(const Tensor& features) {
    const std::size_t m = features.rows();
    const std::size_t d = features.cols();
    if (m < 2 || d < 2) throw ValidationError("project_2d: need >= 2 samples and d >= 2");
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += features.at(r, c) / static_cast<double>(m);
    Tensor centered(m, d);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) centered.at(r, c) = features.at(r, c) - mean[c];
    Tensor cov = matmul(transpose(centered), centered);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov.at(i, i);
    if (trace <= 1e-12) throw ValidationError("project_2d: all samples identical");
    for (std::size_t i = 0; i < cov.size(); ++i) cov[i] /= static_cast<double>(m - 1);

    // Cyclic Jacobi eigendecomposition; V accumulates the rotations.
    Tensor v(d, d);
    for (std::size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += cov.at(p, q) * cov.at(p, q);
        if (off < 1e-22) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = cov.at(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (cov.at(q, q) - cov.at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = cov.at(k, p), akq = cov.at(k, q);
                    cov.at(k, p) = c * akp - s * akq;
                    cov.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = cov.at(p, k), aqk = cov.at(q, k);
                    cov.at(p, k) = c * apk - s * aqk;
                    cov.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::size_t i1 = 0, i2 = 1;
    for (std::size_t i = 0; i < d; ++i)
        if (cov.at(i, i) > cov.at(i1, i1)) i1 = i;
    i2 = (i1 == 0) ? 1 : 0;
    for (std::size_t i = 0; i < d; ++i)
        if (i != i1 && cov.at(i, i) > cov.at(i2, i2)) i2 = i;

    Projection proj;
    proj.pc1.resize(m);
    proj.pc2.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
        double a = 0.0, b = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            a += centered.at(r, c) * v.at(c, i1);
            b += centered.at(r, c) * v.at(c, i2);
        }
        proj.pc1[r] = a;
        proj.pc2[r] = b;
    }
    return proj;
}

void write_eval_report_json(const EvalReport& r, const EvalConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["mean_acc"] = r.mean_acc;
    j["ci95"] = r.ci95;
    j["diversity"] = r.diversity;
    j["config"] = {{"episodes", cfg.episodes}, {"n_way", cfg.n_way},
                   {"k_shot", cfg.k_shot},     {"q_queries", cfg.q_queries},
                   {"k_prime", cfg.k_prime},   {"seed", cfg.seed},
                   {"classifier_lr", cfg.classifier.lr},
                   {"classifier_steps", cfg.classifier.steps},
                   {"include_real_support", cfg.include_real_support}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << j.dump(2) << '\n';
}

void write_eval_report_csv(const EvalReport& r, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open for writing: " + path);
    f << "episode,accuracy\n";
    char buf[64];
    for (std::size_t i = 0; i < r.per_episode_acc.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, r.per_episode_acc[i]);
        f << buf;
    }
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::CrOnly: return "cr_only";
        case Variant::Cwgan: return "cwgan";
        case Variant::CwganCr: return "cwgan_cr";
        case Variant::CwganCrAr: return "cwgan_cr_ar";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::Baseline, Variant::CrOnly, Variant::Cwgan, Variant::CwganCr,
                      Variant::CwganCrAr})
        if (name == variant_name(v)) return v;
    throw ValidationError("unknown ablation variant: " + name);
}

std::vector<AblationRow> ablation_run(const LabeledFeatureSet& features,
                                      const std::set<int>& train_classes,
                                      const std::set<int>& test_classes, const TrainConfig& tcfg,
                                      const EvalConfig& ecfg,
                                      const std::vector<Variant>& variants) {
    ExtractorParams identity;
    identity.identity = true;
    std::vector<AblationRow> rows;
    for (Variant v : variants) {
        TrainConfig tc = tcfg;
        EvalConfig ec = ecfg;
        switch (v) {
            case Variant::Baseline:
                ec.k_prime = 0;
                break;
            case Variant::CrOnly:
                tc.use_critic = false;
                tc.hyper.beta_ar = 0.0;
                break;
            case Variant::Cwgan:
                tc.hyper.alpha_cr = 0.0;
                tc.hyper.beta_ar = 0.0;
                break;
            case Variant::CwganCr:
                tc.hyper.beta_ar = 0.0;
                break;
            case Variant::CwganCrAr:
                break;
        }
        AblationRow row;
        row.variant = v;
        if (v == Variant::Baseline) {
            std::mt19937_64 rng = derive_rng(tc.seed, 0x5EED, 0);
            const GeneratorParams untrained = init_generator(tc.hyper, rng);
            row.report = evaluate(identity, untrained, features, test_classes, ec, tc.hyper);
        } else {
            GanTrainResult trained = train_gan(features, train_classes, tc);
            row.report = evaluate(identity, trained.generator, features, test_classes, ec,
                                  tc.hyper);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace afhn
