#pragma once

#include "repsim/repcore.hpp"

#include <cstdint>

namespace repsim {

struct ProbeConfig {
    double l2_penalty = 1e-4;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
};

struct ProbeModel {
    Eigen::MatrixXd weights;  // (p+1) x c, last row is the bias
    bool converged = false;
    int iterations = 0;
    double final_loss = 0.0;
};

struct ProbeResult {
    LayerTag tag;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    bool converged = false;
};

// Multinomial logistic regression: softmax cross-entropy + (l2/2)||W||_F^2,
// full-batch gradient descent with backtracking line search from zero
// initialization. Fits on all rows given (no split).
ProbeModel fit_probe(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg);

// Same objective, arbitrary initialization (used by the convexity property test).
ProbeModel fit_probe_from(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg,
                          const Eigen::MatrixXd& w0);

// Fraction of rows whose argmax logit matches the label; equal logits break
// toward the lowest class index.
double probe_accuracy(const ProbeModel& model, const Eigen::MatrixXd& x,
                      const LabelMatrix& labels);

// Deterministic train/test row split from split_seed.
struct Split {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};
Split train_test_split(Eigen::Index m, double train_fraction, std::uint64_t seed);

// Split, fit on the train rows, report accuracy on both sides.
ProbeResult probe_layer(const RepMatrix& x, const LabelMatrix& labels, const ProbeConfig& cfg);

// One result per layer; the same split (fixed by split_seed) is reused.
std::vector<ProbeResult> probe_curve(const std::vector<RepMatrix>& reps,
                                     const LabelMatrix& labels, const ProbeConfig& cfg);

}  // namespace repsim
