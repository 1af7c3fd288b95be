#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace repsim {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreconditionError : Error {
    using Error::Error;
};

struct AlignmentError : Error {
    AlignmentError(Eigen::Index expected, Eigen::Index found, const std::string& tag)
        : Error("row-count mismatch: expected m=" + std::to_string(expected) + ", found m=" +
                std::to_string(found) + " at " + tag),
          expected_m(expected),
          found_m(found),
          offending_tag(tag) {}
    Eigen::Index expected_m;
    Eigen::Index found_m;
    std::string offending_tag;
};

struct DegenerateRepresentation : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct ManifestError : Error {
    using Error::Error;
};

struct TagMismatch : Error {
    using Error::Error;
};

struct ZeroVector : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Layer metadata
// ---------------------------------------------------------------------------

enum class Method { supervised, contrastive };

// "cls" is the one-hot class representation; "input" the raw sample matrix.
enum class Parity { odd, even, head, input, cls };

std::string to_string(Method m);
std::string to_string(Parity p);
Method method_from_string(const std::string& s);
Parity parity_from_string(const std::string& s);

struct LayerTag {
    std::string model_id;
    Method method = Method::supervised;
    unsigned seed = 0;
    int layer_index = 1;  // 1-based
    Parity parity = Parity::even;
    std::optional<int> block_group;

    // (model_id, layer_index, parity) identifies a representation within a run.
    bool same_position(const LayerTag& o) const {
        return layer_index == o.layer_index && parity == o.parity;
    }
    std::string describe() const;
};

// ---------------------------------------------------------------------------
// Core matrices
// ---------------------------------------------------------------------------

// m x p matrix of flattened per-sample activations, rows aligned to a fixed
// shared evaluation set. Always 64-bit internally.
struct RepMatrix {
    Eigen::MatrixXd data;
    LayerTag tag;

    RepMatrix() = default;
    RepMatrix(Eigen::MatrixXd d, LayerTag t);

    Eigen::Index m() const { return data.rows(); }
    Eigen::Index p() const { return data.cols(); }
};

struct GramMatrix {
    Eigen::MatrixXd data;  // m x m, symmetric
    bool centered = false;

    Eigen::Index m() const { return data.rows(); }
};

// L1 x L2 grid of CKA values. Undefined entries (degenerate layers) are NaN.
struct CkaMatrix {
    Eigen::MatrixXd values;
    std::vector<LayerTag> row_tags;
    std::vector<LayerTag> col_tags;

    bool defined(Eigen::Index i, Eigen::Index j) const {
        return std::isfinite(values(i, j));
    }
};

// m x c one-hot indicator matrix.
struct LabelMatrix {
    Eigen::MatrixXd data;
    int class_count = 0;

    LabelMatrix() = default;
    LabelMatrix(Eigen::MatrixXd d, int c);
    static LabelMatrix from_indices(const std::vector<int>& idx, int c);

    Eigen::Index m() const { return data.rows(); }
    std::vector<int> indices() const;
};

// Block groups: contiguous runs of residual blocks sharing one width.
struct BlockGroupSpec {
    std::vector<std::pair<std::string, int>> groups;  // (name, block count)

    int total_blocks() const;
    // Block-group id (1-based) for a 1-based block/layer index.
    int group_of(int layer_index) const;
    // 1-based layer indices at which a new group starts.
    std::vector<int> entry_layers() const;

    static BlockGroupSpec resnet50();  // 3+4+6+3
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Succeeds iff every matrix shares the same row count.
void validate_alignment(std::span<const RepMatrix> reps);

// Flattens a per-sample multi-axis block (sample axis first) into m x p,
// row-major over the non-sample axes. `tensor` holds the values in C order,
// `dims` the non-sample axis lengths.
RepMatrix flatten_sample_block(const std::vector<double>& tensor, Eigen::Index m,
                               const std::vector<Eigen::Index>& dims, LayerTag tag = {});

// Optional per-feature standardization (off by default everywhere).
RepMatrix standardize_features(const RepMatrix& x);

}  // namespace repsim
