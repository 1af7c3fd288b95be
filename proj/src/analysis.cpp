#include "repsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace repsim {

namespace {

std::vector<RepMatrix> filter_parity(const std::vector<RepMatrix>& run, ParityFilter filter) {
    if (filter == ParityFilter::all) return run;
    const Parity want = filter == ParityFilter::odd ? Parity::odd : Parity::even;
    std::vector<RepMatrix> out;
    for (const auto& r : run)
        if (r.tag.parity == want) out.push_back(r);
    return out;
}

double safe_cka(const RepMatrix& a, const RepMatrix& b, bool& defined) {
    try {
        defined = true;
        return cka_features(a, b);
    } catch (const DegenerateRepresentation&) {
        defined = false;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void check_tags(const std::vector<RepMatrix>& v1, const std::vector<RepMatrix>& v2) {
    if (v1.size() != v2.size())
        throw TagMismatch("views have different layer counts: " + std::to_string(v1.size()) +
                          " vs " + std::to_string(v2.size()));
    for (size_t i = 0; i < v1.size(); ++i) {
        if (!v1[i].tag.same_position(v2[i].tag))
            throw TagMismatch("layer tags differ at position " + std::to_string(i) + ": " +
                              v1[i].tag.describe() + " vs " + v2[i].tag.describe());
    }
}

}  // namespace

CkaMatrix internal_structure(const std::vector<RepMatrix>& run_a,
                             const std::vector<RepMatrix>& run_b, ParityFilter filter) {
    if (&run_a == &run_b) {
        auto filtered = filter_parity(run_a, filter);
        return pairwise_cka(filtered);
    }
    auto rows = filter_parity(run_a, filter);
    auto cols = filter_parity(run_b, filter);
    return pairwise_cka(rows, cols);
}

InvarianceCurve augmentation_invariance(const std::vector<RepMatrix>& view1,
                                        const std::vector<RepMatrix>& view2) {
    check_tags(view1, view2);
    InvarianceCurve curve;
    curve.points.reserve(view1.size());
    for (size_t i = 0; i < view1.size(); ++i) {
        if (view1[i].m() != view2[i].m())
            throw AlignmentError(view1[i].m(), view2[i].m(), view2[i].tag.describe());
        CurvePoint pt;
        pt.tag = view1[i].tag;
        pt.value = safe_cka(view1[i], view2[i], pt.defined);
        curve.points.push_back(pt);
    }
    return curve;
}

CkaMatrix augmentation_invariance_grid(const std::vector<RepMatrix>& view1,
                                       const std::vector<RepMatrix>& view2) {
    check_tags(view1, view2);
    return pairwise_cka(view1, view2);
}

ClassSimCurve class_structure_cka(const std::vector<RepMatrix>& reps, const LabelMatrix& labels) {
    LayerTag class_tag;
    class_tag.model_id = "labels";
    class_tag.parity = Parity::cls;
    const RepMatrix class_rep(labels.data, class_tag);
    ClassSimCurve curve;
    curve.points.reserve(reps.size());
    for (const auto& r : reps) {
        if (r.m() != class_rep.m())
            throw AlignmentError(class_rep.m(), r.m(), r.tag.describe());
        CurvePoint pt;
        pt.tag = r.tag;
        pt.value = safe_cka(r, class_rep, pt.defined);
        curve.points.push_back(pt);
    }
    return curve;
}

std::vector<StallPoint> stall_profile(const CkaMatrix& cross_method, const BlockGroupSpec& bg) {
    if (cross_method.values.rows() != cross_method.values.cols())
        throw PreconditionError("stall_profile: grid is not square");
    for (const auto& t : cross_method.row_tags)
        if (!t.block_group)
            throw PreconditionError("stall_profile: missing block-group tag at " + t.describe());

    const auto entries = bg.entry_layers();
    auto curve = diag_max_curve(cross_method);
    std::vector<StallPoint> out;
    out.reserve(curve.size());
    for (const auto& pt : curve) {
        StallPoint sp;
        sp.layer_index = pt.layer_index;
        sp.argmax_lag = pt.layer_index - pt.argmax_index;
        sp.group_entry =
            std::find(entries.begin(), entries.end(), pt.layer_index) != entries.end();
        out.push_back(sp);
    }
    return out;
}

}  // namespace repsim
