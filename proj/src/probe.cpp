#include "repsim/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace repsim {

namespace {

struct Objective {
    const Eigen::MatrixXd& xb;  // m x (p+1), bias column appended
    const Eigen::MatrixXd& y;   // m x c one-hot
    double l2;

    double loss(const Eigen::MatrixXd& w) const {
        const Eigen::MatrixXd z = xb * w;
        double total = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double zmax = z.row(i).maxCoeff();
            const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
            total += lse - z.row(i).dot(y.row(i));
        }
        return total / static_cast<double>(z.rows()) + 0.5 * l2 * w.squaredNorm();
    }

    Eigen::MatrixXd gradient(const Eigen::MatrixXd& w) const {
        Eigen::MatrixXd z = xb * w;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double zmax = z.row(i).maxCoeff();
            Eigen::ArrayXd e = (z.row(i).array() - zmax).exp();
            z.row(i) = (e / e.sum()).matrix();
        }
        return xb.transpose() * (z - y) / static_cast<double>(xb.rows()) + l2 * w;
    }
};

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd xb(x.rows(), x.cols() + 1);
    xb.leftCols(x.cols()) = x;
    xb.col(x.cols()).setOnes();
    return xb;
}

ProbeModel minimize(const Objective& obj, Eigen::MatrixXd w, const ProbeConfig& cfg) {
    ProbeModel model;
    double f = obj.loss(w);
    double step = 1.0;
    int iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        const Eigen::MatrixXd g = obj.gradient(w);
        const double gnorm2 = g.squaredNorm();
        if (std::sqrt(gnorm2) <= cfg.gradient_tolerance) {
            model.converged = true;
            break;
        }
        // Armijo backtracking with a warm-started step.
        step *= 2.0;
        double f_new = 0.0;
        Eigen::MatrixXd w_new;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            w_new = w - step * g;
            f_new = obj.loss(w_new);
            if (f_new <= f - 0.5 * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflow: no descent direction left
        w = std::move(w_new);
        f = f_new;
    }
    model.weights = std::move(w);
    model.iterations = iter;
    model.final_loss = f;
    return model;
}

}  // namespace

ProbeModel fit_probe_from(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg,
                          const Eigen::MatrixXd& w0) {
    if (labels.class_count < 2) throw PreconditionError("fit_probe: c >= 2 required");
    if (x.m() != labels.m()) throw AlignmentError(labels.m(), x.m(), x.tag.describe());
    const Eigen::MatrixXd xb = with_bias(x.data);
    if (w0.rows() != xb.cols() || w0.cols() != labels.class_count)
        throw PreconditionError("fit_probe: initial weights have wrong shape");
    Objective obj{xb, labels.data, cfg.l2_penalty};
    return minimize(obj, w0, cfg);
}

ProbeModel fit_probe(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg) {
    return fit_probe_from(x, labels, cfg,
                          Eigen::MatrixXd::Zero(x.p() + 1, labels.class_count));
}

double probe_accuracy(const ProbeModel& model, const Eigen::MatrixXd& x,
                      const LabelMatrix& labels) {
    const Eigen::MatrixXd z = with_bias(x) * model.weights;
    const auto truth = labels.indices();
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        int best = 0;
        for (int j = 1; j < z.cols(); ++j)
            if (z(i, j) > z(i, best)) best = j;
        if (best == truth[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(z.rows());
}

Split train_test_split(Eigen::Index m, double train_fraction, std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw PreconditionError("train_fraction must lie in (0, 1)");
    std::vector<Eigen::Index> idx(static_cast<size_t>(m));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<size_t>(std::llround(train_fraction * static_cast<double>(m)));
    n_train = std::clamp<size_t>(n_train, 1, static_cast<size_t>(m) - 1);
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

}  // namespace

ProbeResult probe_layer(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg) {
    if (x.m() != labels.m()) throw AlignmentError(labels.m(), x.m(), x.tag.describe());
    const Split split = train_test_split(x.m(), cfg.train_fraction, cfg.split_seed);
    const LabelMatrix train_y(take_rows(labels.data, split.train), labels.class_count);
    const LabelMatrix test_y(take_rows(labels.data, split.test), labels.class_count);
    const RepMatrix train_x(take_rows(x.data, split.train), x.tag);
    ProbeModel model = fit_probe(train_x, train_y, cfg);

    ProbeResult res;
    res.tag = x.tag;
    res.converged = model.converged;
    res.train_accuracy = probe_accuracy(model, train_x.data, train_y);
    res.test_accuracy = probe_accuracy(model, take_rows(x.data, split.test), test_y);
    return res;
}

std::vector<ProbeResult> probe_curve(const std::vector<RepMatrix>& reps,
                                     const LabelMatrix& labels, const ProbeConfig& cfg) {
    validate_alignment(reps);
    std::vector<ProbeResult> out;
    out.reserve(reps.size());
    for (const auto& r : reps) out.push_back(probe_layer(r, labels, cfg));
    return out;
}

}  // namespace repsim
