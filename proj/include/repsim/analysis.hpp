#pragma once

#include "repsim/repcore.hpp"
#include "repsim/similarity.hpp"

namespace repsim {

enum class ParityFilter { all, odd, even };

// Pairwise CKA over the filtered layer lists of two runs (two seeds of one
// method, or two methods). Tags are preserved for block-group annotation.
CkaMatrix internal_structure(const std::vector<RepMatrix>& run_a,
                             const std::vector<RepMatrix>& run_b, ParityFilter filter);

struct CurvePoint {
    LayerTag tag;
    double value = 0.0;   // NaN when undefined
    bool defined = true;
};

struct InvarianceCurve {
    std::vector<CurvePoint> points;
};

struct ClassSimCurve {
    std::vector<CurvePoint> points;
};

// Per-layer CKA between two independently augmented passes of the same
// ordered sample set. Layers are paired by (layer_index, parity) tag.
InvarianceCurve augmentation_invariance(const std::vector<RepMatrix>& view1,
                                        const std::vector<RepMatrix>& view2);

// All-pairs variant: full L x L grid between the two views.
CkaMatrix augmentation_invariance_grid(const std::vector<RepMatrix>& view1,
                                       const std::vector<RepMatrix>& view2);

// Per-layer CKA against the one-hot class representation.
ClassSimCurve class_structure_cka(const std::vector<RepMatrix>& reps, const LabelMatrix& labels);

struct StallPoint {
    int layer_index = 0;  // 1-based
    int argmax_lag = 0;   // row index - argmax column index
    bool group_entry = false;
};

// Per row of a square cross-method grid, the lag between the diagonal and the
// most similar column. Positive lag at a block-group entry layer is the
// "stalling" signature.
std::vector<StallPoint> stall_profile(const CkaMatrix& cross_method, const BlockGroupSpec& bg);

}  // namespace repsim
