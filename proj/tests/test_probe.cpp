#include "repsim/probe.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace repsim;

namespace {

std::mt19937_64& rng() {
    static std::mt19937_64 r(90210);
    return r;
}

Eigen::MatrixXd randn(Eigen::Index m, Eigen::Index p) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd d(m, p);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < p; ++j) d(i, j) = g(rng());
    return d;
}

// Two Gaussian blobs separated by 10 sigma along the first coordinate.
std::pair<RepMatrix, LabelMatrix> separable_blobs(Eigen::Index m) {
    Eigen::MatrixXd x = randn(m, 5);
    std::vector<int> y(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        y[static_cast<size_t>(i)] = i % 2;
        x(i, 0) += (i % 2 == 0) ? 0.0 : 10.0;
    }
    return {RepMatrix(std::move(x), {}), LabelMatrix::from_indices(y, 2)};
}

}  // namespace

TEST_CASE("fit_probe on separable blobs") {
    auto [x, y] = separable_blobs(400);
    ProbeResult res = probe_layer(x, y, ProbeConfig{});
    CHECK(res.test_accuracy >= 0.99);
    CHECK(res.train_accuracy >= 0.99);
}

TEST_CASE("uninformative features land at chance level") {
    const Eigen::Index m = 2000;
    RepMatrix x(randn(m, 8), {});
    std::vector<int> idx(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) idx[static_cast<size_t>(i)] = i % 4;
    auto labels = LabelMatrix::from_indices(idx, 4);
    ProbeResult res = probe_layer(x, labels, ProbeConfig{});
    CHECK(res.test_accuracy >= 0.25 - 0.05);
    CHECK(res.test_accuracy <= 0.25 + 0.05);
}

TEST_CASE("one predictive coordinate converges to perfect train accuracy") {
    const Eigen::Index m = 200;
    Eigen::MatrixXd x = randn(m, 3) * 0.01;
    std::vector<int> y(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        y[static_cast<size_t>(i)] = i % 2;
        x(i, 1) = (i % 2 == 0) ? -1.0 : 1.0;
    }
    RepMatrix rep(std::move(x), {});
    auto labels = LabelMatrix::from_indices(y, 2);
    ProbeConfig cfg;
    cfg.max_iterations = 2000;
    ProbeModel model = fit_probe(rep, labels, cfg);
    CHECK(model.converged);
    CHECK(probe_accuracy(model, rep.data, labels) == 1.0);
}

TEST_CASE("convexity: zero and perturbed starts reach the same loss") {
    auto [x, y] = separable_blobs(120);
    ProbeConfig cfg;
    cfg.max_iterations = 3000;
    cfg.gradient_tolerance = 1e-9;
    ProbeModel from_zero = fit_probe(x, y, cfg);
    std::normal_distribution<double> g(0.0, 0.01);
    Eigen::MatrixXd w0(x.p() + 1, y.class_count);
    for (Eigen::Index i = 0; i < w0.rows(); ++i)
        for (Eigen::Index j = 0; j < w0.cols(); ++j) w0(i, j) = g(rng());
    ProbeModel from_rand = fit_probe_from(x, y, cfg, w0);
    CHECK(std::abs(from_zero.final_loss - from_rand.final_loss) <= 1e-6);
}

TEST_CASE("orthogonal feature transform leaves accuracy unchanged at l2 = 0") {
    auto [x, y] = separable_blobs(200);
    ProbeConfig cfg;
    cfg.l2_penalty = 0.0;
    cfg.gradient_tolerance = 1e-8;
    cfg.max_iterations = 5000;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(randn(x.p(), x.p()));
    Eigen::MatrixXd q = qr.householderQ();
    RepMatrix xq(x.data * q, {});
    ProbeResult base = probe_layer(x, y, cfg);
    ProbeResult rot = probe_layer(xq, y, cfg);
    CHECK(base.test_accuracy == rot.test_accuracy);
    CHECK(base.train_accuracy == rot.train_accuracy);
}

TEST_CASE("train_test_split is deterministic and disjoint") {
    Split a = train_test_split(100, 0.8, 42);
    Split b = train_test_split(100, 0.8, 42);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == 80);
    CHECK(a.test.size() == 20);
    std::set<Eigen::Index> all(a.train.begin(), a.train.end());
    all.insert(a.test.begin(), a.test.end());
    CHECK(all.size() == 100);
    Split c = train_test_split(100, 0.8, 43);
    CHECK(a.train != c.train);
}

TEST_CASE("probe_curve reuses one split and is deterministic per layer") {
    auto [x, y] = separable_blobs(150);
    std::vector<RepMatrix> reps;
    reps.push_back(RepMatrix(x.data, {}));
    reps.push_back(RepMatrix(randn(150, 4), {}));
    reps.push_back(RepMatrix(x.data, {}));  // duplicate of layer 0
    auto results = probe_curve(reps, y, ProbeConfig{});
    REQUIRE(results.size() == 3);
    CHECK(results[0].train_accuracy == results[2].train_accuracy);
    CHECK(results[0].test_accuracy == results[2].test_accuracy);
    // labels-as-features sanity: perfect separability
    std::vector<RepMatrix> label_layer;
    label_layer.push_back(RepMatrix(y.data, {}));
    auto lr = probe_curve(label_layer, y, ProbeConfig{});
    CHECK(lr[0].test_accuracy == 1.0);
}

TEST_CASE("precondition errors") {
    auto [x, y] = separable_blobs(50);
    RepMatrix short_x(randn(49, 5), {});
    CHECK_THROWS_AS(probe_layer(short_x, y, ProbeConfig{}), AlignmentError);
    CHECK_THROWS_AS(train_test_split(10, 1.5, 0), PreconditionError);
}
