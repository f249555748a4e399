#include <doctest.h>

#include <cmath>
#include <random>

#include "afhn/eval.hpp"

using namespace afhn;

namespace {

LabeledFeatureSet small_benchmark(std::size_t d = 8, std::uint64_t seed = 55) {
    SyntheticSpec spec;
    spec.n_classes = 8;
    spec.per_class = 25;
    spec.d = d;
    return generate_synthetic(spec, seed);
}

std::set<int> classes_of(const LabeledFeatureSet& s) {
    std::set<int> out;
    for (const auto& [cls, rows] : s.class_index) out.insert(cls);
    return out;
}

GeneratorParams small_gen(std::size_t d, std::uint64_t seed) {
    HyperParams hp;
    hp.d_s = d;
    hp.d_z = d;
    hp.h = 2 * d;
    std::mt19937_64 rng(seed);
    return init_generator(hp, rng);
}

ExtractorParams identity_extractor() {
    ExtractorParams p;
    p.identity = true;
    return p;
}

}  // namespace

TEST_CASE("augment_support counts and labels") {
    const std::size_t d = 8;
    GeneratorParams gen = small_gen(d, 1);
    Tensor protos(5, d, 0.5);
    Tensor real(5, d, 1.0);
    const std::vector<int> labels = {0, 1, 2, 3, 4};
    std::mt19937_64 rng(2);

    EnlargedSupport big = augment_support(gen, protos, 300, 0.2, real, labels, true, rng);
    CHECK(big.features.rows() == 1505);
    CHECK(big.labels.size() == 1505);

    EnlargedSupport none = augment_support(gen, protos, 0, 0.2, real, labels, true, rng);
    CHECK(none.features == real);
    CHECK(none.labels == labels);

    EnlargedSupport fakes_only = augment_support(gen, protos, 10, 0.2, real, labels, false, rng);
    CHECK(fakes_only.features.rows() == 50);
    for (std::size_t cls = 0; cls < 5; ++cls)
        for (std::size_t i = 0; i < 10; ++i)
            CHECK(fakes_only.labels[cls * 10 + i] == static_cast<int>(cls));
}

TEST_CASE("softmax classifier fits a one-hot separable set") {
    const std::size_t n = 4;
    EnlargedSupport sup;
    sup.features = Tensor(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sup.features.at(i, i) = 1.0;
        sup.labels.push_back(static_cast<int>(i));
    }
    ClassifierConfig cfg;
    SoftmaxClassifier clf = train_softmax_classifier(sup, n, cfg);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(classify(clf, sup.features, i) == static_cast<int>(i));

    const double init_loss =
        classifier_loss(SoftmaxClassifier{Tensor(n, n), Tensor(1, n)}, sup.features, sup.labels);
    CHECK(classifier_loss(clf, sup.features, sup.labels) < init_loss);
}

TEST_CASE("classifier rejects support that misses classes") {
    EnlargedSupport sup;
    sup.features = Tensor(3, 4, 1.0);
    sup.labels = {0, 0, 0};
    ClassifierConfig cfg;
    CHECK_THROWS_AS(train_softmax_classifier(sup, 5, cfg), ValidationError);
}

TEST_CASE("oracle mode reports perfect accuracy") {
    LabeledFeatureSet set = small_benchmark();
    EvalConfig cfg;
    cfg.episodes = 10;
    cfg.q_queries = 5;
    cfg.oracle = true;
    EvalReport rep = evaluate(identity_extractor(), small_gen(8, 3), set, classes_of(set), cfg,
                              HyperParams{});
    CHECK(rep.mean_acc == 1.0);
    CHECK(rep.ci95 == 0.0);
}

TEST_CASE("uninformative features score at chance level") {
    SyntheticSpec spec;
    spec.n_classes = 8;
    spec.per_class = 25;
    spec.d = 8;
    spec.center_radius = 0.0;  // every class center at the origin: pure noise
    spec.nonneg = false;
    LabeledFeatureSet set = generate_synthetic(spec, 5);
    EvalConfig cfg;
    cfg.episodes = 600;
    cfg.q_queries = 5;
    cfg.k_prime = 0;
    cfg.seed = 6;
    EvalReport rep = evaluate(identity_extractor(), small_gen(8, 7), set, classes_of(set), cfg,
                              HyperParams{});
    double var = 0.0;
    for (double a : rep.per_episode_acc) var += (a - rep.mean_acc) * (a - rep.mean_acc);
    const double stderr_ = std::sqrt(var / 600.0) / std::sqrt(600.0);
    CHECK(std::abs(rep.mean_acc - 0.20) < 3.0 * stderr_);
}

TEST_CASE("ci95 is self-consistent with the per-episode accuracies") {
    LabeledFeatureSet set = small_benchmark();
    EvalConfig cfg;
    cfg.episodes = 40;
    cfg.q_queries = 5;
    cfg.k_prime = 5;
    cfg.classifier.steps = 20;
    EvalReport rep = evaluate(identity_extractor(), small_gen(8, 9), set, classes_of(set), cfg,
                              HyperParams{});
    double mean = 0.0;
    for (double a : rep.per_episode_acc) mean += a;
    mean /= 40.0;
    double var = 0.0;
    for (double a : rep.per_episode_acc) var += (a - mean) * (a - mean);
    const double ci = 1.96 * std::sqrt(var / 40.0) / std::sqrt(40.0);
    CHECK(std::abs(rep.ci95 - ci) < 1e-12);
    CHECK(std::abs(rep.mean_acc - mean) < 1e-12);
}

TEST_CASE("threaded evaluation matches sequential bit for bit") {
    LabeledFeatureSet set = small_benchmark();
    EvalConfig cfg;
    cfg.episodes = 24;
    cfg.q_queries = 5;
    cfg.k_prime = 5;
    cfg.classifier.steps = 20;
    cfg.seed = 13;
    GeneratorParams gen = small_gen(8, 11);
    EvalReport seq = evaluate(identity_extractor(), gen, set, classes_of(set), cfg, HyperParams{});
    cfg.threads = 4;
    EvalReport par = evaluate(identity_extractor(), gen, set, classes_of(set), cfg, HyperParams{});
    CHECK(seq.per_episode_acc == par.per_episode_acc);
    CHECK(seq.mean_acc == par.mean_acc);
    CHECK(seq.diversity == par.diversity);
}

TEST_CASE("diversity score fixed points") {
    Tensor identical(3, 2);
    for (std::size_t r = 0; r < 3; ++r) {
        identical.at(r, 0) = 3.0;
        identical.at(r, 1) = 4.0;
    }
    CHECK(diversity_score({identical}) == doctest::Approx(0.0).epsilon(1e-12));

    Tensor ortho = Tensor::from(2, 2, {1, 0, 0, 1});
    CHECK(diversity_score({ortho}) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor antipodal = Tensor::from(2, 2, {1, 0, -1, 0});
    CHECK(diversity_score({antipodal}) == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(diversity_score({Tensor(1, 2)}), ValidationError);
}

TEST_CASE("project_2d recovers axis-aligned 2-D data up to sign") {
    Tensor data = Tensor::from(4, 2, {3, 0, -3, 0, 0, 1, 0, -1});
    Projection p = project_2d(data);
    // mean is zero and the covariance is diagonal, so the principal axes are
    // the coordinate axes and the projection is the input up to sign
    const double s1 = p.pc1[0] >= 0.0 ? 1.0 : -1.0;
    const double s2 = p.pc2[2] >= 0.0 ? 1.0 : -1.0;
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(std::abs(s1 * p.pc1[r] - data.at(r, 0)) < 1e-9);
        CHECK(std::abs(s2 * p.pc2[r] - data.at(r, 1)) < 1e-9);
    }
    double v1 = 0.0, v2 = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
        v1 += p.pc1[r] * p.pc1[r];
        v2 += p.pc2[r] * p.pc2[r];
    }
    CHECK(v1 >= v2);
    CHECK_THROWS_AS(project_2d(Tensor(5, 3, 2.0)), ValidationError);
}

TEST_CASE("project_2d beats random 2-D projections at reconstruction") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss;
    Tensor data(30, 6);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = gauss(rng);
    // stretch two directions so the spectrum is anisotropic
    for (std::size_t r = 0; r < 30; ++r) {
        data.at(r, 0) *= 4.0;
        data.at(r, 1) *= 2.0;
    }
    Projection p = project_2d(data);
    double pca_captured = 0.0;
    for (std::size_t r = 0; r < 30; ++r)
        pca_captured += p.pc1[r] * p.pc1[r] + p.pc2[r] * p.pc2[r];

    // captured variance is total minus reconstruction error, so PCA must
    // capture at least as much as any random orthonormal pair
    Tensor centered = data;
    std::vector<double> mean(6, 0.0);
    for (std::size_t r = 0; r < 30; ++r)
        for (std::size_t c = 0; c < 6; ++c) mean[c] += data.at(r, c) / 30.0;
    for (std::size_t r = 0; r < 30; ++r)
        for (std::size_t c = 0; c < 6; ++c) centered.at(r, c) -= mean[c];

    for (int trial = 0; trial < 100; ++trial) {
        Tensor u(6, 1), w(6, 1);
        for (std::size_t i = 0; i < 6; ++i) {
            u[i] = gauss(rng);
            w[i] = gauss(rng);
        }
        const double nu = l2_norm(u);
        for (std::size_t i = 0; i < 6; ++i) u[i] /= nu;
        const double uw = dot(u, w);
        for (std::size_t i = 0; i < 6; ++i) w[i] -= uw * u[i];
        const double nw = l2_norm(w);
        for (std::size_t i = 0; i < 6; ++i) w[i] /= nw;
        double captured = 0.0;
        for (std::size_t r = 0; r < 30; ++r) {
            double a = 0.0, b = 0.0;
            for (std::size_t c = 0; c < 6; ++c) {
                a += centered.at(r, c) * u[c];
                b += centered.at(r, c) * w[c];
            }
            captured += a * a + b * b;
        }
        CHECK(pca_captured >= captured - 1e-9);
    }
}

TEST_CASE("variant names round trip and bad names are rejected") {
    for (Variant v : {Variant::Baseline, Variant::CrOnly, Variant::Cwgan, Variant::CwganCr,
                      Variant::CwganCrAr})
        CHECK(variant_from_name(variant_name(v)) == v);
    CHECK_THROWS_AS(variant_from_name("wgan"), ValidationError);
}

TEST_CASE("ablation run produces one row per variant with tiny configs") {
    LabeledFeatureSet set = small_benchmark();
    TrainConfig tc;
    tc.hyper.d_s = 8;
    tc.hyper.d_z = 8;
    tc.hyper.h = 8;
    tc.stage2.epochs = 1;
    tc.stage2.tasks_per_epoch = 10;
    tc.n_way = 4;
    tc.q_queries = 5;
    tc.seed = 3;
    EvalConfig ec;
    ec.episodes = 5;
    ec.n_way = 4;
    ec.q_queries = 5;
    ec.k_prime = 5;
    ec.classifier.steps = 20;
    ec.seed = 3;
    std::vector<AblationRow> rows = ablation_run(
        set, classes_of(set), classes_of(set), tc, ec,
        {Variant::Baseline, Variant::Cwgan, Variant::CwganCrAr});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].variant == Variant::Baseline);
    for (const AblationRow& r : rows) {
        CHECK(r.report.per_episode_acc.size() == 5);
        CHECK(r.report.mean_acc >= 0.0);
        CHECK(r.report.mean_acc <= 1.0);
    }
    // baseline performed no augmentation, so its diversity pass was skipped
    CHECK(rows[0].report.diversity == 0.0);
}
