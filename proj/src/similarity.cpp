#include "repsim/similarity.hpp"

#include <atomic>
#include <cmath>
#include <limits>

namespace repsim {

namespace {

std::atomic<std::int64_t> g_gram_evals{0};

constexpr double kBoundarySlack = 1e-9;

double clamp_to_unit(double v) {
    if (v > 1.0 && v <= 1.0 + kBoundarySlack) return 1.0;
    if (v < 0.0 && v >= -kBoundarySlack) return 0.0;
    return v;
}

// vec(K') . vec(L') for two centered Grams, fixed summation order.
double centered_dot(const Eigen::MatrixXd& kc, const Eigen::MatrixXd& lc) {
    return (kc.array() * lc.array()).sum();
}

}  // namespace

std::int64_t gram_eval_count() { return g_gram_evals.load(); }
void reset_gram_eval_count() { g_gram_evals.store(0); }

GramMatrix gram(const RepMatrix& x) {
    const Eigen::Index m = x.m();
    Eigen::MatrixXd k(m, m);
    const Eigen::Index block = 256;
    for (Eigen::Index i0 = 0; i0 < m; i0 += block) {
        const Eigen::Index b = std::min(block, m - i0);
        k.middleRows(i0, b).noalias() = x.data.middleRows(i0, b) * x.data.transpose();
    }
    // Exact symmetry: average the off-diagonal halves.
    k = 0.5 * (k + k.transpose()).eval();
    ++g_gram_evals;
    return GramMatrix{std::move(k), false};
}

GramMatrix center_gram(const GramMatrix& k) {
    const Eigen::Index m = k.m();
    Eigen::VectorXd row_means = k.data.rowwise().mean();
    const double grand_mean = row_means.mean();
    Eigen::MatrixXd kc = k.data;
    kc.colwise() -= row_means;
    kc.rowwise() -= row_means.transpose();
    kc.array() += grand_mean;
    return GramMatrix{std::move(kc), true};
}

double degeneracy_epsilon(Eigen::Index m) {
    return 1e-12 * static_cast<double>(m) * static_cast<double>(m);
}

HsicValue hsic(const GramMatrix& k, const GramMatrix& l, HsicNorm norm) {
    if (k.m() != l.m()) throw AlignmentError(k.m(), l.m(), "hsic argument");
    const Eigen::Index m = k.m();
    if (m < 3) throw PreconditionError("hsic requires m >= 3");
    const GramMatrix kc = k.centered ? k : center_gram(k);
    const GramMatrix lc = l.centered ? l : center_gram(l);
    const double trace = centered_dot(kc.data, lc.data);
    const double dm = static_cast<double>(m);
    const double denom = norm == HsicNorm::sample ? (dm - 1.0) * (dm - 1.0) : dm * dm - 1.0;
    return HsicValue{trace / denom, m};
}

double cka(const GramMatrix& k, const GramMatrix& l) {
    if (k.m() != l.m()) throw AlignmentError(k.m(), l.m(), "cka argument");
    const GramMatrix kc = k.centered ? k : center_gram(k);
    const GramMatrix lc = l.centered ? l : center_gram(l);
    const double mm = static_cast<double>(k.m()) - 1.0;
    const double denom2 = mm * mm;
    const double self_k = centered_dot(kc.data, kc.data) / denom2;
    const double self_l = centered_dot(lc.data, lc.data) / denom2;
    const double eps = degeneracy_epsilon(k.m());
    if (self_k <= eps || self_l <= eps)
        throw DegenerateRepresentation("constant representation: self-HSIC below threshold");
    const double cross = centered_dot(kc.data, lc.data) / denom2;
    return clamp_to_unit(cross / std::sqrt(self_k * self_l));
}

double cka_features(const RepMatrix& x, const RepMatrix& y) {
    if (x.m() != y.m()) throw AlignmentError(x.m(), y.m(), y.tag.describe());
    const Eigen::Index m = x.m();
    const double gram_work = static_cast<double>(m) * static_cast<double>(m);
    const double feat_work = static_cast<double>(x.p()) * static_cast<double>(y.p());
    if (feat_work >= gram_work) return cka(gram(x), gram(y));

    Eigen::MatrixXd xc = x.data.rowwise() - x.data.colwise().mean();
    Eigen::MatrixXd yc = y.data.rowwise() - y.data.colwise().mean();
    const double self_x = (xc.transpose() * xc).squaredNorm();
    const double self_y = (yc.transpose() * yc).squaredNorm();
    const double scaled_eps =
        degeneracy_epsilon(m) * static_cast<double>((m - 1) * (m - 1));
    if (self_x <= scaled_eps || self_y <= scaled_eps)
        throw DegenerateRepresentation("constant representation: self-HSIC below threshold");
    const double cross = (yc.transpose() * xc).squaredNorm();
    return clamp_to_unit(cross / std::sqrt(self_x * self_y));
}

namespace {

struct CenteredEntry {
    Eigen::MatrixXd kc;
    double self_hsic = 0.0;   // (m-1)^-2 scaled
    bool degenerate = false;
};

CenteredEntry prepare(const RepMatrix& x) {
    GramMatrix kc = center_gram(gram(x));
    const double mm = static_cast<double>(x.m()) - 1.0;
    CenteredEntry e;
    e.self_hsic = centered_dot(kc.data, kc.data) / (mm * mm);
    e.degenerate = e.self_hsic <= degeneracy_epsilon(x.m());
    e.kc = std::move(kc.data);
    return e;
}

CkaMatrix pairwise_impl(const std::vector<RepMatrix>& rows, const std::vector<RepMatrix>& cols,
                        bool shared) {
    if (rows.empty() || cols.empty()) throw PreconditionError("pairwise_cka: empty layer list");
    const Eigen::Index m = rows.front().m();
    for (const auto& r : rows)
        if (r.m() != m) throw AlignmentError(m, r.m(), r.tag.describe());
    for (const auto& c : cols)
        if (c.m() != m) throw AlignmentError(m, c.m(), c.tag.describe());

    std::vector<CenteredEntry> row_entries;
    row_entries.reserve(rows.size());
    for (const auto& r : rows) row_entries.push_back(prepare(r));

    std::vector<CenteredEntry> col_storage;
    const std::vector<CenteredEntry>* col_entries = &row_entries;
    if (!shared) {
        col_storage.reserve(cols.size());
        for (const auto& c : cols) col_storage.push_back(prepare(c));
        col_entries = &col_storage;
    }

    const double mm = static_cast<double>(m) - 1.0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CkaMatrix out;
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        for (size_t j = 0; j < cols.size(); ++j) {
            if (shared && j < i) {
                out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
                continue;
            }
            const CenteredEntry& a = row_entries[i];
            const CenteredEntry& b = (*col_entries)[j];
            double v;
            if (a.degenerate || b.degenerate) {
                v = nan;
            } else {
                const double cross = centered_dot(a.kc, b.kc) / (mm * mm);
                v = clamp_to_unit(cross / std::sqrt(a.self_hsic * b.self_hsic));
            }
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    for (const auto& r : rows) out.row_tags.push_back(r.tag);
    for (const auto& c : cols) out.col_tags.push_back(c.tag);
    return out;
}

}  // namespace

CkaMatrix pairwise_cka(const std::vector<RepMatrix>& rows, const std::vector<RepMatrix>& cols) {
    return pairwise_impl(rows, cols, &rows == &cols);
}

CkaMatrix pairwise_cka(const std::vector<RepMatrix>& reps) {
    return pairwise_impl(reps, reps, true);
}

std::vector<DiagMaxPoint> diag_max_curve(const CkaMatrix& m) {
    if (m.values.rows() != m.values.cols())
        throw PreconditionError("diag_max_curve: grid is not square");
    std::vector<DiagMaxPoint> out;
    out.reserve(static_cast<size_t>(m.values.rows()));
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        DiagMaxPoint pt;
        pt.layer_index = static_cast<int>(i) + 1;
        pt.diag = m.values(i, i);
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index best_j = 0;
        for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
            const double v = m.values(i, j);
            if (std::isfinite(v) && v > best) {
                best = v;
                best_j = j;
            }
        }
        pt.max = best;
        pt.argmax_index = static_cast<int>(best_j) + 1;
        out.push_back(pt);
    }
    return out;
}

}  // namespace repsim
