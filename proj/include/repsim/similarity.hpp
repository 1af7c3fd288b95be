#pragma once

#include "repsim/repcore.hpp"

#include <cstdint>

namespace repsim {

// Exported HSIC normalization. The CKA ratio is invariant to this choice;
// it only affects the scalar HSIC values themselves.
enum class HsicNorm {
    sample,  // Tr(KHLH) / (m-1)^2
    squared, // Tr(KHLH) / (m^2-1)
};

struct HsicValue {
    double value = 0.0;
    Eigen::Index m = 0;
};

// K = X X^T. Computed in row blocks; peak memory beyond K is O(m * block).
GramMatrix gram(const RepMatrix& x);

// K' = H K H via row/column/grand-mean subtraction (H is never materialized).
// Idempotent.
GramMatrix center_gram(const GramMatrix& k);

HsicValue hsic(const GramMatrix& k, const GramMatrix& l, HsicNorm norm = HsicNorm::sample);

// Self-HSIC threshold below which a representation counts as degenerate.
double degeneracy_epsilon(Eigen::Index m);

// CKA(K, L) = HSIC(K,L) / sqrt(HSIC(K,K) HSIC(L,L)), clamped to [0,1] only
// within 1e-9 of the boundary. Throws DegenerateRepresentation when either
// self-HSIC falls under degeneracy_epsilon(m).
double cka(const GramMatrix& k, const GramMatrix& l);

// Same value as cka(gram(X), gram(Y)); uses the centered cross-covariance
// Frobenius form when p1*p2 work is cheaper than m^2 work.
double cka_features(const RepMatrix& x, const RepMatrix& y);

// values[i][j] = CKA(rows[i], cols[j]). Each Gram is computed and centered
// exactly once. Degenerate layers yield NaN cells instead of aborting.
// Pass the same vector for rows and cols to share work across the axes.
CkaMatrix pairwise_cka(const std::vector<RepMatrix>& rows, const std::vector<RepMatrix>& cols);
CkaMatrix pairwise_cka(const std::vector<RepMatrix>& reps);

struct DiagMaxPoint {
    int layer_index = 0;   // 1-based row position in the grid
    double diag = 0.0;
    double max = 0.0;
    int argmax_index = 0;  // 1-based, smallest index attaining the max
};

// Per row of a square grid: the diagonal value, the row maximum, and the
// lowest column index attaining it.
std::vector<DiagMaxPoint> diag_max_curve(const CkaMatrix& m);

// Instrumentation: number of gram() evaluations since the last reset.
std::int64_t gram_eval_count();
void reset_gram_eval_count();

}  // namespace repsim
