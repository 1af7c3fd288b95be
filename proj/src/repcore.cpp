#include "repsim/repcore.hpp"

#include <numeric>
#include <set>

namespace repsim {

std::string to_string(Method m) {
    return m == Method::supervised ? "supervised" : "contrastive";
}

std::string to_string(Parity p) {
    switch (p) {
        case Parity::odd: return "odd";
        case Parity::even: return "even";
        case Parity::head: return "head";
        case Parity::input: return "input";
        case Parity::cls: return "class";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "supervised") return Method::supervised;
    if (s == "contrastive") return Method::contrastive;
    throw ManifestError("unknown method: " + s);
}

Parity parity_from_string(const std::string& s) {
    if (s == "odd") return Parity::odd;
    if (s == "even") return Parity::even;
    if (s == "head") return Parity::head;
    if (s == "input") return Parity::input;
    if (s == "class") return Parity::cls;
    throw ManifestError("unknown parity: " + s);
}

std::string LayerTag::describe() const {
    std::string s = model_id + "/" + to_string(method) + "/seed" + std::to_string(seed) + "/" +
                    to_string(parity) + std::to_string(layer_index);
    if (block_group) s += "/bg" + std::to_string(*block_group);
    return s;
}

RepMatrix::RepMatrix(Eigen::MatrixXd d, LayerTag t) : data(std::move(d)), tag(std::move(t)) {
    if (data.rows() < 3)
        throw PreconditionError("RepMatrix requires m >= 3, got m=" + std::to_string(data.rows()) +
                                " at " + tag.describe());
    if (!data.allFinite())
        throw PreconditionError("RepMatrix has non-finite entries at " + tag.describe());
}

LabelMatrix::LabelMatrix(Eigen::MatrixXd d, int c) : data(std::move(d)), class_count(c) {
    if (c < 2) throw PreconditionError("LabelMatrix requires c >= 2");
    if (data.cols() != c) throw PreconditionError("LabelMatrix column count != class_count");
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        int ones = 0;
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            double v = data(i, j);
            if (v == 1.0)
                ++ones;
            else if (v != 0.0)
                throw PreconditionError("LabelMatrix entries must be 0 or 1");
        }
        if (ones != 1) throw PreconditionError("LabelMatrix row must have exactly one 1");
    }
}

LabelMatrix LabelMatrix::from_indices(const std::vector<int>& idx, int c) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), c);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= c)
            throw PreconditionError("class index out of range: " + std::to_string(idx[i]));
        d(static_cast<Eigen::Index>(i), idx[i]) = 1.0;
    }
    return LabelMatrix(std::move(d), c);
}

std::vector<int> LabelMatrix::indices() const {
    std::vector<int> out(static_cast<size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        Eigen::Index j;
        data.row(i).maxCoeff(&j);
        out[static_cast<size_t>(i)] = static_cast<int>(j);
    }
    return out;
}

int BlockGroupSpec::total_blocks() const {
    int n = 0;
    for (const auto& [name, count] : groups) n += count;
    return n;
}

int BlockGroupSpec::group_of(int layer_index) const {
    int hi = 0;
    for (size_t g = 0; g < groups.size(); ++g) {
        hi += groups[g].second;
        if (layer_index <= hi) return static_cast<int>(g) + 1;
    }
    throw PreconditionError("layer index " + std::to_string(layer_index) +
                            " beyond block-group table");
}

std::vector<int> BlockGroupSpec::entry_layers() const {
    std::vector<int> out;
    int idx = 1;
    for (const auto& [name, count] : groups) {
        out.push_back(idx);
        idx += count;
    }
    return out;
}

BlockGroupSpec BlockGroupSpec::resnet50() {
    return BlockGroupSpec{{{"BG1", 3}, {"BG2", 4}, {"BG3", 6}, {"BG4", 3}}};
}

void validate_alignment(std::span<const RepMatrix> reps) {
    if (reps.empty()) throw PreconditionError("validate_alignment: empty representation list");
    const Eigen::Index m = reps.front().m();
    for (const auto& r : reps) {
        if (r.m() != m) throw AlignmentError(m, r.m(), r.tag.describe());
    }
}

RepMatrix flatten_sample_block(const std::vector<double>& tensor, Eigen::Index m,
                               const std::vector<Eigen::Index>& dims, LayerTag tag) {
    Eigen::Index p = 1;
    for (Eigen::Index d : dims) {
        if (d <= 0) throw ShapeError("flatten_sample_block: non-positive axis length");
        p *= d;
    }
    if (static_cast<Eigen::Index>(tensor.size()) != m * p)
        throw ShapeError("flatten_sample_block: element count does not match shape");
    Eigen::MatrixXd out(m, p);
    // C-order input: sample-major, then row-major over remaining axes.
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < p; ++j) out(i, j) = tensor[static_cast<size_t>(i * p + j)];
    return RepMatrix(std::move(out), std::move(tag));
}

RepMatrix standardize_features(const RepMatrix& x) {
    Eigen::MatrixXd d = x.data;
    const double m = static_cast<double>(d.rows());
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
        const double mu = d.col(j).mean();
        d.col(j).array() -= mu;
        const double sd = std::sqrt(d.col(j).squaredNorm() / m);
        if (sd > 0) d.col(j) /= sd;
    }
    return RepMatrix(std::move(d), x.tag);
}

}  // namespace repsim
