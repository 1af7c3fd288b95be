// End-to-end acceptance suite: one verdict line per criterion.
// Exit code 0 iff every criterion passes.

#include "repsim/analysis.hpp"
#include "repsim/ingest.hpp"
#include "repsim/probe.hpp"
#include "repsim/repcore.hpp"
#include "repsim/replicate.hpp"
#include "repsim/similarity.hpp"
#include "repsim/toytrain.hpp"

#include <Eigen/QR>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace repsim;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

RepMatrix rep(Eigen::MatrixXd m) { return RepMatrix(std::move(m), LayerTag{}); }

// Literal Tr(K H L H) / (m-1)^2 with H materialized.
double hsic_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::Index m = x.rows();
    const Eigen::MatrixXd h =
        Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / double(m));
    const Eigen::MatrixXd k = x * x.transpose();
    const Eigen::MatrixXd l = y * y.transpose();
    const double denom = double(m - 1) * double(m - 1);
    return (k * h * l * h).trace() / denom;
}

// Centered cross-covariance Frobenius form, computed directly from features.
double feature_path_oracle(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd yc = y.rowwise() - y.colwise().mean();
    const double cross = (yc.transpose() * xc).squaredNorm();
    const double nx = (xc.transpose() * xc).norm();
    const double ny = (yc.transpose() * yc).norm();
    return cross / (nx * ny);
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index p) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(randn(rng, p, p));
    return qr.householderQ();
}

struct Verdict {
    int number;
    std::string name;
    bool pass;
    double elapsed;
    std::string detail;
};

bool criterion1(Verdict& v) {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<Eigen::Index> md(3, 50), pd(1, 20);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index m = md(rng);
        Eigen::MatrixXd x = randn(rng, m, pd(rng));
        Eigen::MatrixXd y = randn(rng, m, pd(rng));
        const double got =
            hsic(center_gram(gram(rep(x))), center_gram(gram(rep(y)))).value;
        const double want = hsic_oracle(x, y);
        const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
        worst = std::max(worst, rel);
    }
    v.detail = "max relative error " + std::to_string(worst);
    return worst <= 1e-10;
}

bool criterion2(Verdict& v) {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<Eigen::Index> md(5, 40), pd(2, 16);
    double w_self = 0, w_sym = 0, w_scale = 0, w_orth = 0, w_perm = 0, w_const = 0;
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index m = md(rng);
        const Eigen::Index p = pd(rng);
        Eigen::MatrixXd x = randn(rng, m, p);
        Eigen::MatrixXd y = randn(rng, m, pd(rng));
        const GramMatrix kx = gram(rep(x)), ky = gram(rep(y));
        const double base = cka(kx, ky);

        w_self = std::max(w_self, std::abs(cka(kx, kx) - 1.0));
        w_sym = std::max(w_sym, std::abs(cka(ky, kx) - base));
        w_scale = std::max(
            w_scale, std::abs(cka(gram(rep(3.7 * x)), gram(rep(-0.4 * y))) - base));

        Eigen::MatrixXd q = random_orthogonal(rng, p);
        w_orth = std::max(w_orth, std::abs(cka(gram(rep(x * q)), ky) - base));

        std::vector<int> perm(static_cast<size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) perm[static_cast<size_t>(i)] = int(i);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::MatrixXd xp(m, p), yp(m, y.cols());
        for (Eigen::Index i = 0; i < m; ++i) {
            xp.row(i) = x.row(perm[static_cast<size_t>(i)]);
            yp.row(i) = y.row(perm[static_cast<size_t>(i)]);
        }
        w_perm = std::max(w_perm, std::abs(cka(gram(rep(xp)), gram(rep(yp))) - base));

        Eigen::MatrixXd xc(m, p + 1);
        xc.leftCols(p) = x;
        xc.col(p).setConstant(4.2);
        w_const = std::max(w_const, std::abs(cka(gram(rep(xc)), ky) - base));
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "self %.2e sym %.2e scale %.2e orth %.2e perm %.2e const %.2e",
                  w_self, w_sym, w_scale, w_orth, w_perm, w_const);
    v.detail = buf;
    return w_self <= 1e-9 && w_sym <= 1e-12 && w_scale <= 1e-9 && w_orth <= 1e-9 &&
           w_perm <= 1e-12 && w_const <= 1e-9;
}

bool criterion3(Verdict& v) {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        // Alternate the wide (p > m) and tall (p < m) regimes.
        const Eigen::Index m = (t % 2 == 0) ? 12 : 60;
        std::uniform_int_distribution<Eigen::Index> pd((t % 2 == 0) ? m + 1 : 2,
                                                       (t % 2 == 0) ? 40 : m - 1);
        Eigen::MatrixXd x = randn(rng, m, pd(rng));
        Eigen::MatrixXd y = randn(rng, m, pd(rng));
        const double gram_path = cka(gram(rep(x)), gram(rep(y)));
        const double feat_path = feature_path_oracle(x, y);
        const double dispatched = cka_features(rep(x), rep(y));
        const double rel =
            std::max(std::abs(gram_path - feat_path), std::abs(gram_path - dispatched)) /
            std::max(std::abs(gram_path), 1e-300);
        worst = std::max(worst, rel);
    }
    v.detail = "max relative disagreement " + std::to_string(worst);
    return worst <= 1e-8;
}

bool criterion4(Verdict& v) {
    std::mt19937_64 rng(404);
    double w_uniform = 0.0;
    for (int n : {2, 4, 64}) {
        Eigen::MatrixXd emb = Eigen::VectorXd::Ones(2 * n) * randn(rng, 1, 6);
        w_uniform = std::max(
            w_uniform, std::abs(info_nce_loss(emb, 0.5) - std::log(2.0 * n - 1.0)));
    }

    double w_grad = 0.0;
    const double step = 1e-5;
    for (int t = 0; t < 100; ++t) {
        Eigen::MatrixXd emb = randn(rng, 6, 5);
        const double tau = 0.2 + 0.05 * (t % 10);
        Eigen::MatrixXd an = info_nce_gradient(emb, tau);
        Eigen::MatrixXd fd(emb.rows(), emb.cols());
        for (Eigen::Index i = 0; i < emb.rows(); ++i)
            for (Eigen::Index j = 0; j < emb.cols(); ++j) {
                Eigen::MatrixXd ep = emb, em = emb;
                ep(i, j) += step;
                em(i, j) -= step;
                fd(i, j) = (info_nce_loss(ep, tau) - info_nce_loss(em, tau)) / (2 * step);
            }
        const double rel = (an - fd).cwiseAbs().maxCoeff() /
                           std::max(fd.cwiseAbs().maxCoeff(), 1e-300);
        w_grad = std::max(w_grad, rel);
    }

    double w_scale = 0.0;
    for (int t = 0; t < 20; ++t) {
        Eigen::MatrixXd emb = randn(rng, 8, 7);
        w_scale = std::max(w_scale,
                           std::abs(info_nce_loss(3.9 * emb, 0.5) - info_nce_loss(emb, 0.5)));
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "uniform %.2e, fd %.2e, scale %.2e", w_uniform, w_grad,
                  w_scale);
    v.detail = buf;
    return w_uniform <= 1e-12 && w_grad <= 1e-4 && w_scale <= 1e-12;
}

double net_fd_error(ToyResNet& net, const std::function<double()>& loss,
                    const Eigen::VectorXd& analytic) {
    const double step = 1e-5;
    Eigen::VectorXd p0 = net_parameters(net);
    Eigen::VectorXd fd(p0.size());
    for (Eigen::Index k = 0; k < p0.size(); ++k) {
        Eigen::VectorXd pp = p0, pm = p0;
        pp(k) += step;
        pm(k) -= step;
        set_net_parameters(net, pp);
        const double lp = loss();
        set_net_parameters(net, pm);
        const double lm = loss();
        fd(k) = (lp - lm) / (2 * step);
    }
    set_net_parameters(net, p0);
    return (analytic - fd).cwiseAbs().maxCoeff() /
           std::max(fd.cwiseAbs().maxCoeff(), 1e-300);
}

bool criterion5(Verdict& v) {
    std::mt19937_64 rng(505);

    ToyResNet sup = make_toy_resnet(4, 8, 2, 3, 0, Objective::supervised, 51);
    Eigen::MatrixXd xs = randn(rng, 4, 6);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 6);
    for (int j = 0; j < 6; ++j) y(j % 3, j) = 1.0;
    Eigen::VectorXd gs;
    supervised_loss(sup, xs, y, &gs);
    const double es = net_fd_error(sup, [&] { return supervised_loss(sup, xs, y); }, gs);

    ToyResNet con = make_toy_resnet(4, 8, 2, 3, 5, Objective::contrastive, 52);
    Eigen::MatrixXd xc = randn(rng, 4, 8);
    Eigen::VectorXd gc;
    contrastive_loss(con, xc, 0.5, &gc);
    const double ec = net_fd_error(con, [&] { return contrastive_loss(con, xc, 0.5); }, gc);

    char buf[96];
    std::snprintf(buf, sizeof buf, "supervised %.2e, contrastive %.2e", es, ec);
    v.detail = buf;
    return es <= 1e-4 && ec <= 1e-4;
}

bool criterion6(Verdict& v) {
    std::mt19937_64 rng(606);

    // Separable blobs: 4 well-spread classes in 8 dimensions.
    const Eigen::Index m = 400;
    Eigen::MatrixXd centers = 10.0 * randn(rng, 4, 8);
    Eigen::MatrixXd x(m, 8);
    std::vector<int> idx(static_cast<size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        const int c = int(i % 4);
        idx[static_cast<size_t>(i)] = c;
        x.row(i) = centers.row(c) + randn(rng, 1, 8);
    }
    auto labels = LabelMatrix::from_indices(idx, 4);
    ProbeResult sep = probe_layer(RepMatrix(x, {}), labels, ProbeConfig{});

    // Uninformative: label-independent noise must land near chance.
    const Eigen::Index mu = 2000;
    std::vector<int> idu(static_cast<size_t>(mu));
    for (Eigen::Index i = 0; i < mu; ++i) idu[static_cast<size_t>(i)] = int(i % 4);
    ProbeResult noise = probe_layer(RepMatrix(randn(rng, mu, 8), {}),
                                    LabelMatrix::from_indices(idu, 4), ProbeConfig{});

    // Full 11-layer curve at m = 800, p = 64, timed.
    const Eigen::Index mc = 800;
    std::vector<int> idc(static_cast<size_t>(mc));
    for (Eigen::Index i = 0; i < mc; ++i) idc[static_cast<size_t>(i)] = int(i % 4);
    auto curve_labels = LabelMatrix::from_indices(idc, 4);
    std::vector<RepMatrix> layers;
    for (int l = 0; l < 11; ++l) layers.push_back(RepMatrix(randn(rng, mc, 64), {}));
    const auto t0 = Clock::now();
    auto curve = probe_curve(layers, curve_labels, ProbeConfig{});
    const double curve_s = seconds_since(t0);

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "separable %.3f, uninformative %.3f, 11-layer curve %.1fs",
                  sep.test_accuracy, noise.test_accuracy, curve_s);
    v.detail = buf;
    return sep.test_accuracy >= 0.99 && std::abs(noise.test_accuracy - 0.25) <= 0.05 &&
           curve.size() == 11 && curve_s < 60.0;
}

bool criterion7(Verdict& v, std::vector<std::string>& check_lines) {
    const fs::path out = fs::temp_directory_path() / "repsim_acceptance_replicate";
    fs::remove_all(out);
    const auto t0 = Clock::now();
    ReplicationReport report = run_replication(ToyRunConfig{}, out);
    const double elapsed = seconds_since(t0);
    for (const auto& c : report.checks) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "    %-4s %-36s value %.4f  (%s)",
                      c.pass ? "ok" : "FAIL", c.name.c_str(), c.value, c.detail.c_str());
        check_lines.push_back(buf);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu checks, %.0fs total", report.checks.size(), elapsed);
    v.detail = buf;
    return report.all_pass && elapsed < 900.0;
}

bool criterion8(Verdict& v) {
    std::mt19937_64 rng(808);
    const Eigen::Index m = 2000;
    const Eigen::Index widths[] = {512, 1024, 2048, 4096};
    std::vector<RepMatrix> reps;
    reps.reserve(32);
    for (int i = 0; i < 32; ++i) reps.push_back(rep(randn(rng, m, widths[i % 4])));

    reset_gram_eval_count();
    const auto t0 = Clock::now();
    CkaMatrix grid = pairwise_cka(reps);
    const double elapsed = seconds_since(t0);
    const std::int64_t grams = gram_eval_count();

    const bool finite = grid.values.allFinite();

    char buf[96];
    std::snprintf(buf, sizeof buf, "%.1fs, %lld gram evaluations", elapsed,
                  static_cast<long long>(grams));
    v.detail = buf;
    return elapsed < 60.0 && grams == 32 && finite && grid.values.rows() == 32;
}

bool criterion9(Verdict& v) {
    std::mt19937_64 rng(909);
    std::uniform_int_distribution<Eigen::Index> rd(1, 12), cd(1, 12);
    std::normal_distribution<double> g;
    const fs::path dir = fs::temp_directory_path() / "repsim_acceptance_npy";
    fs::create_directories(dir);
    const fs::path p = dir / "rt.npy";

    int failures = 0;
    for (int t = 0; t < 1000; ++t) {
        const bool f4 = (t % 3 == 0);
        Eigen::MatrixXd m(rd(rng), (t % 5 == 0) ? 1 : cd(rng));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double val = g(rng);
                m(i, j) = f4 ? double(float(val)) : val;
            }
        write_array(m, p, f4 ? "<f4" : "<f8");
        NpyArray back = read_array(p);
        bool same = back.data.rows() == m.rows() && back.data.cols() == m.cols();
        for (Eigen::Index i = 0; same && i < m.rows(); ++i)
            for (Eigen::Index j = 0; same && j < m.cols(); ++j) {
                std::uint64_t a, b;
                const double da = m(i, j), db = back.data(i, j);
                std::memcpy(&a, &da, 8);
                std::memcpy(&b, &db, 8);
                same = (a == b);
            }
        if (!same) ++failures;
    }

    // Reference bytes produced by numpy.save for [[1, 2], [3, 4]] as <f8.
    static const unsigned char reference[] = {
        147, 78,  85,  77, 80, 89, 1,  0,  118, 0,  123, 39, 100, 101, 115, 99,  114, 39,  58, 32,
        39,  60,  102, 56, 39, 44, 32, 39, 102, 111, 114, 116, 114, 97, 110, 95,  111, 114, 100, 101,
        114, 39,  58,  32, 70, 97, 108, 115, 101, 44, 32,  39, 115, 104, 97,  112, 101, 39,  58, 32,
        40,  50,  44,  32, 50, 41, 44, 32, 125, 32, 32,  32, 32,  32,  32,  32,  32,  32,  32, 32,
        32,  32,  32,  32, 32, 32, 32, 32, 32,  32, 32,  32, 32,  32,  32,  32,  32,  32,  32, 32,
        32,  32,  32,  32, 32, 32, 32, 32, 32,  32, 32,  32, 32,  32,  32,  32,  32,  32,  32, 32,
        32,  32,  32,  32, 32, 32, 32, 10, 0,   0,  0,   0,  0,   0,   240, 63,  0,   0,   0,  0,
        0,   0,   0,   64, 0,  0,  0,  0,  0,   0,  8,   64, 0,   0,   0,   0,   0,   0,   16, 64};
    const fs::path ref = dir / "reference.npy";
    std::ofstream(ref, std::ios::binary)
        .write(reinterpret_cast<const char*>(reference), sizeof reference);
    NpyArray arr = read_array(ref);
    Eigen::MatrixXd want(2, 2);
    want << 1, 2, 3, 4;
    const bool ref_ok = arr.data == want && arr.dtype == "<f8";

    char buf[96];
    std::snprintf(buf, sizeof buf, "%d/1000 round-trip failures, reference %s", failures,
                  ref_ok ? "ok" : "FAIL");
    v.detail = buf;
    return failures == 0 && ref_ok;
}

}  // namespace

int main() {
    std::vector<std::string> replication_lines;
    bool all = true;

    auto run = [&](int number, const char* name, double limit, auto&& fn) {
        Verdict v{number, name, false, 0.0, ""};
        const auto t0 = Clock::now();
        try {
            v.pass = fn(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail = std::string("exception: ") + e.what();
        }
        v.elapsed = seconds_since(t0);
        if (limit > 0 && v.elapsed >= limit) v.pass = false;
        all = all && v.pass;
        std::printf("[%s] %d. %s (%.1fs) %s\n", v.pass ? "PASS" : "FAIL", v.number,
                    v.name.c_str(),
                    v.elapsed, v.detail.c_str());
        if (number == 7)
            for (const auto& line : replication_lines) std::printf("%s\n", line.c_str());
        std::fflush(stdout);
    };

    run(1, "HSIC matches the materialized-H oracle", 5.0, criterion1);
    run(2, "CKA invariance suite", 10.0, criterion2);
    run(3, "Gram-path and feature-path CKA agree", 0.0, criterion3);
    run(4, "InfoNCE analytic checks", 0.0, criterion4);
    run(5, "Full-network gradient check", 0.0, criterion5);
    run(6, "Probe sanity and timing", 0.0, criterion6);
    run(7, "Toy replication directional checks", 900.0,
        [&](Verdict& v) { return criterion7(v, replication_lines); });
    run(8, "Pairwise CKA performance with Gram reuse", 0.0, criterion8);
    run(9, "NPY format round-trip", 0.0, criterion9);

    std::printf("%s\n", all ? "ACCEPTANCE: all criteria passed"
                            : "ACCEPTANCE: FAILURES PRESENT");
    return all ? 0 : 1;
}
