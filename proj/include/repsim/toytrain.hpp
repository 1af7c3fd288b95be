#pragma once

#include "repsim/ingest.hpp"
#include "repsim/repcore.hpp"

#include <cstdint>
#include <filesystem>
#include <random>

namespace repsim {

// ---------------------------------------------------------------------------
// Toy data
// ---------------------------------------------------------------------------

struct ToyDatasetSpec {
    int class_count = 4;
    int input_dim = 32;
    int samples_per_class = 250;
    double cluster_spread = 1.0;
    double mean_scale = 0.7;
    std::uint64_t seed = 0;
};

struct Blobs {
    Eigen::MatrixXd train_x;  // rows are samples
    Eigen::MatrixXd eval_x;
    LabelMatrix train_labels;
    LabelMatrix eval_labels;
};

// Isotropic Gaussian clusters around per-class means drawn once from the
// seed. Train and eval partitions are disjoint draws, samples_per_class each.
Blobs make_blobs(const ToyDatasetSpec& spec);

// ---------------------------------------------------------------------------
// Augmentations
// ---------------------------------------------------------------------------

enum class AugFamily { weak, strong, identity };

struct AugmentationSpec {
    double noise_sigma = 0.0;
    double mask_probability = 0.0;
    double scale_lo = 1.0;
    double scale_hi = 1.0;
    AugFamily family = AugFamily::identity;

    void validate() const;
    static AugmentationSpec identity();
    static AugmentationSpec weak();    // low additive noise only
    static AugmentationSpec strong();  // scale + mask + noise
};

// Applies, in order: multiplicative scale (uniform over [lo, hi]),
// coordinate-wise zero masking, additive Gaussian noise.
Eigen::VectorXd augment(const Eigen::VectorXd& x, const AugmentationSpec& spec,
                        std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// InfoNCE
// ---------------------------------------------------------------------------

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// embeddings: 2N x q, rows ordered as N positive pairs (2k, 2k+1).
double info_nce_loss(const Eigen::MatrixXd& embeddings, double temperature);
Eigen::MatrixXd info_nce_gradient(const Eigen::MatrixXd& embeddings, double temperature);

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

enum class Objective { supervised, contrastive };

Objective objective_from_string(const std::string& s);
std::string to_string(Objective o);

struct ResidualBlock {
    Eigen::MatrixXd w1, w2;  // w x w
    Eigen::VectorXd b1, b2;
};

// Activations flow with samples as columns. Per block i:
//   a    = ReLU(W1 h + b1)
//   odd  = W2 a + b2              (residual tap, before the addition)
//   even = ReLU(h + odd)          (post-residual tap)
// Supervised head: logits = Wh h_B + bh. NCE head: 3-layer MLP with ReLU
// after the first two layers.
struct ToyResNet {
    int input_dim = 0;
    int width = 0;
    int class_count = 0;
    int projection_dim = 0;
    Objective objective = Objective::supervised;

    Eigen::MatrixXd w_embed;  // w x d
    Eigen::VectorXd b_embed;
    std::vector<ResidualBlock> blocks;
    Eigen::MatrixXd w_head;   // c x w (supervised)
    Eigen::VectorXd b_head;
    Eigen::MatrixXd w_nce1, w_nce2, w_nce3;  // w x w, w x w, q x w
    Eigen::VectorXd b_nce1, b_nce2, b_nce3;

    int num_blocks() const { return static_cast<int>(blocks.size()); }
};

ToyResNet make_toy_resnet(int input_dim, int width, int num_blocks, int class_count,
                          int projection_dim, Objective objective, std::uint64_t seed);

// Flat parameter access (finite-difference checks, SGD updates).
Eigen::VectorXd net_parameters(const ToyResNet& net);
void set_net_parameters(ToyResNet& net, const Eigen::VectorXd& params);

struct ForwardCache {
    Eigen::MatrixXd h0;                 // embed output, w x n
    std::vector<Eigen::MatrixXd> a;     // branch hidden
    std::vector<Eigen::MatrixXd> odd;   // residual taps
    std::vector<Eigen::MatrixXd> even;  // post-residual taps
    Eigen::MatrixXd logits;             // c x n (supervised)
    Eigen::MatrixXd z1, z2, z3;         // NCE head taps
};

ForwardCache forward(const ToyResNet& net, const Eigen::MatrixXd& x /* d x n */);

// Mean softmax cross-entropy over columns; grads (if non-null) receives
// d(loss)/d(params) in net_parameters order.
double supervised_loss(const ToyResNet& net, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& onehot /* c x n */,
                       Eigen::VectorXd* grads = nullptr);

// InfoNCE through the NCE head; x columns ordered as N positive pairs.
double contrastive_loss(const ToyResNet& net, const Eigen::MatrixXd& x, double temperature,
                        Eigen::VectorXd* grads = nullptr);

// ---------------------------------------------------------------------------
// Training and extraction
// ---------------------------------------------------------------------------

struct TrainConfig {
    double temperature = 0.5;
    int batch_size = 128;  // N positive pairs for contrastive
    int projection_dim = 16;
    int epochs = 200;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
};

struct TrainLog {
    std::vector<double> epoch_loss;
};

// Plain SGD with a constant rate and a seeded batch shuffle. Supervised runs
// use weak augmentations and the linear head; contrastive runs use strong
// two-view batches and InfoNCE on the NCE head.
TrainLog train(Objective objective, ToyResNet& net, const Eigen::MatrixXd& train_x /* m x d */,
               const LabelMatrix& labels, const TrainConfig& cfg, const AugmentationSpec& aug);

struct Extraction {
    std::vector<RepMatrix> reps;
    RunManifest manifest;
};

// One augmented forward pass over `samples` (rows); dumps every tap as NPY
// under out_dir and writes <model_id>_manifest.json next to them.
Extraction extract_representations(const ToyResNet& net, const Eigen::MatrixXd& samples,
                                   const AugmentationSpec& aug, std::uint64_t rng_seed,
                                   const std::filesystem::path& out_dir,
                                   const std::string& model_id, unsigned seed,
                                   const BlockGroupSpec& bg, const std::string& dataset_id);

// Default block-group layout for a B-block toy net: two equal groups.
BlockGroupSpec toy_block_groups(int num_blocks);

}  // namespace repsim
