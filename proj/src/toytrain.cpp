#include "repsim/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace repsim {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

Blobs make_blobs(const ToyDatasetSpec& spec) {
    if (spec.class_count < 2) throw PreconditionError("make_blobs: class_count >= 2 required");
    if (spec.input_dim < 1 || spec.samples_per_class < 1)
        throw PreconditionError("make_blobs: bad dimensions");
    if (spec.cluster_spread <= 0) throw PreconditionError("make_blobs: cluster_spread > 0 required");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::MatrixXd means(spec.class_count, spec.input_dim);
    for (Eigen::Index i = 0; i < means.rows(); ++i)
        for (Eigen::Index j = 0; j < means.cols(); ++j) means(i, j) = spec.mean_scale * gauss(rng);
    for (Eigen::Index i = 0; i < means.rows(); ++i)
        for (Eigen::Index k = i + 1; k < means.rows(); ++k)
            if ((means.row(i) - means.row(k)).norm() == 0.0)
                throw PreconditionError("make_blobs: coincident class means");

    const Eigen::Index m = static_cast<Eigen::Index>(spec.class_count) * spec.samples_per_class;
    auto draw_partition = [&](Eigen::MatrixXd& x, std::vector<int>& idx) {
        x.resize(m, spec.input_dim);
        idx.resize(static_cast<size_t>(m));
        Eigen::Index row = 0;
        for (int k = 0; k < spec.class_count; ++k) {
            for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
                for (Eigen::Index j = 0; j < spec.input_dim; ++j)
                    x(row, j) = means(k, j) + spec.cluster_spread * gauss(rng);
                idx[static_cast<size_t>(row)] = k;
            }
        }
    };

    Blobs b;
    std::vector<int> train_idx, eval_idx;
    draw_partition(b.train_x, train_idx);
    draw_partition(b.eval_x, eval_idx);
    b.train_labels = LabelMatrix::from_indices(train_idx, spec.class_count);
    b.eval_labels = LabelMatrix::from_indices(eval_idx, spec.class_count);
    return b;
}

// ---------------------------------------------------------------------------
// Augmentations
// ---------------------------------------------------------------------------

void AugmentationSpec::validate() const {
    if (noise_sigma < 0) throw PreconditionError("augmentation: noise_sigma >= 0 required");
    if (mask_probability < 0 || mask_probability >= 1)
        throw PreconditionError("augmentation: mask_probability must lie in [0, 1)");
    if (scale_lo <= 0 || scale_lo > scale_hi)
        throw PreconditionError("augmentation: scale_range requires 0 < lo <= hi");
    if (family == AugFamily::identity &&
        (noise_sigma != 0 || mask_probability != 0 || scale_lo != 1 || scale_hi != 1))
        throw PreconditionError("augmentation: identity family must be a no-op");
}

AugmentationSpec AugmentationSpec::identity() { return AugmentationSpec{}; }

AugmentationSpec AugmentationSpec::weak() {
    return AugmentationSpec{0.5, 0.0, 1.0, 1.0, AugFamily::weak};
}

AugmentationSpec AugmentationSpec::strong() {
    return AugmentationSpec{0.7, 0.25, 0.1, 1.9, AugFamily::strong};
}

Eigen::VectorXd augment(const Eigen::VectorXd& x, const AugmentationSpec& spec,
                        std::mt19937_64& rng) {
    spec.validate();
    Eigen::VectorXd out = x;
    if (spec.scale_lo < spec.scale_hi) {
        std::uniform_real_distribution<double> u(spec.scale_lo, spec.scale_hi);
        out *= u(rng);
    } else if (spec.scale_lo != 1.0) {
        out *= spec.scale_lo;
    }
    if (spec.mask_probability > 0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (Eigen::Index i = 0; i < out.size(); ++i)
            if (u(rng) < spec.mask_probability) out(i) = 0.0;
    }
    if (spec.noise_sigma > 0) {
        std::normal_distribution<double> gauss(0.0, spec.noise_sigma);
        for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += gauss(rng);
    }
    return out;
}

// ---------------------------------------------------------------------------
// InfoNCE
// ---------------------------------------------------------------------------

double cosine_similarity(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine_similarity: zero-norm vector");
    return u.dot(v) / (nu * nv);
}

namespace {

// Row-normalized copy; throws on zero rows.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& v) {
    Eigen::MatrixXd u = v;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double n = u.row(i).norm();
        if (n == 0.0) throw ZeroVector("info_nce: zero-norm embedding at row " + std::to_string(i));
        u.row(i) /= n;
    }
    return u;
}

void check_pairs(const Eigen::MatrixXd& emb) {
    if (emb.rows() < 4 || emb.rows() % 2 != 0)
        throw PreconditionError("info_nce: need 2N rows with N >= 2");
}

}  // namespace

double info_nce_loss(const Eigen::MatrixXd& embeddings, double temperature) {
    check_pairs(embeddings);
    if (temperature <= 0) throw PreconditionError("info_nce: temperature > 0 required");
    const Eigen::Index n2 = embeddings.rows();
    const Eigen::MatrixXd u = normalize_rows(embeddings);
    const Eigen::MatrixXd s = u * u.transpose();

    double total = 0.0;
    for (Eigen::Index i = 0; i < n2; ++i) {
        const Eigen::Index partner = i ^ 1;
        double zmax = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n2; ++k)
            if (k != i) zmax = std::max(zmax, s(i, k) / temperature);
        double denom = 0.0;
        for (Eigen::Index k = 0; k < n2; ++k)
            if (k != i) denom += std::exp(s(i, k) / temperature - zmax);
        total += -(s(i, partner) / temperature - zmax) + std::log(denom);
    }
    return total / static_cast<double>(n2);
}

Eigen::MatrixXd info_nce_gradient(const Eigen::MatrixXd& embeddings, double temperature) {
    check_pairs(embeddings);
    if (temperature <= 0) throw PreconditionError("info_nce: temperature > 0 required");
    const Eigen::Index n2 = embeddings.rows();
    const Eigen::MatrixXd u = normalize_rows(embeddings);
    const Eigen::MatrixXd s = u * u.transpose();

    // g(i,k) = dL/ds_ik treating anchor i's occurrence separately from
    // anchor k's; the similarity matrix is symmetric so both accumulate.
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n2, n2);
    const double scale = 1.0 / (temperature * static_cast<double>(n2));
    for (Eigen::Index i = 0; i < n2; ++i) {
        const Eigen::Index partner = i ^ 1;
        double zmax = -std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n2; ++k)
            if (k != i) zmax = std::max(zmax, s(i, k) / temperature);
        double denom = 0.0;
        for (Eigen::Index k = 0; k < n2; ++k)
            if (k != i) denom += std::exp(s(i, k) / temperature - zmax);
        for (Eigen::Index k = 0; k < n2; ++k) {
            if (k == i) continue;
            const double p = std::exp(s(i, k) / temperature - zmax) / denom;
            g(i, k) = scale * (p - (k == partner ? 1.0 : 0.0));
        }
    }

    const Eigen::MatrixXd du = (g + g.transpose()) * u;  // dL/d(normalized rows)
    Eigen::MatrixXd grad(n2, embeddings.cols());
    for (Eigen::Index i = 0; i < n2; ++i) {
        const double n = embeddings.row(i).norm();
        const Eigen::VectorXd ui = u.row(i);
        const Eigen::VectorXd di = du.row(i);
        grad.row(i) = ((di - ui * ui.dot(di)) / n).transpose();
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

Objective objective_from_string(const std::string& s) {
    if (s == "supervised") return Objective::supervised;
    if (s == "contrastive") return Objective::contrastive;
    throw PreconditionError("unknown objective: " + s);
}

std::string to_string(Objective o) {
    return o == Objective::supervised ? "supervised" : "contrastive";
}

namespace {

Eigen::MatrixXd kaiming(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(2.0 / static_cast<double>(cols)));
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = gauss(rng);
    return w;
}

}  // namespace

ToyResNet make_toy_resnet(int input_dim, int width, int num_blocks, int class_count,
                          int projection_dim, Objective objective, std::uint64_t seed) {
    if (input_dim < 1 || width < 1 || num_blocks < 1)
        throw PreconditionError("make_toy_resnet: bad dimensions");
    std::mt19937_64 rng(seed);
    ToyResNet net;
    net.input_dim = input_dim;
    net.width = width;
    net.class_count = class_count;
    net.projection_dim = projection_dim;
    net.objective = objective;
    net.w_embed = kaiming(width, input_dim, rng);
    net.b_embed = Eigen::VectorXd::Zero(width);
    for (int b = 0; b < num_blocks; ++b) {
        ResidualBlock blk;
        blk.w1 = kaiming(width, width, rng);
        blk.b1 = Eigen::VectorXd::Zero(width);
        blk.w2 = kaiming(width, width, rng);
        blk.b2 = Eigen::VectorXd::Zero(width);
        net.blocks.push_back(std::move(blk));
    }
    if (objective == Objective::supervised) {
        net.w_head = kaiming(class_count, width, rng);
        net.b_head = Eigen::VectorXd::Zero(class_count);
    } else {
        net.w_nce1 = kaiming(width, width, rng);
        net.b_nce1 = Eigen::VectorXd::Zero(width);
        net.w_nce2 = kaiming(width, width, rng);
        net.b_nce2 = Eigen::VectorXd::Zero(width);
        net.w_nce3 = kaiming(projection_dim, width, rng);
        net.b_nce3 = Eigen::VectorXd::Zero(projection_dim);
    }
    return net;
}

namespace {

// Flat parameter layout: embed, blocks (w1 b1 w2 b2), then the active head.
template <typename Fn>
void visit_params(ToyResNet& net, Fn&& fn) {
    fn(net.w_embed);
    fn(net.b_embed);
    for (auto& blk : net.blocks) {
        fn(blk.w1);
        fn(blk.b1);
        fn(blk.w2);
        fn(blk.b2);
    }
    if (net.objective == Objective::supervised) {
        fn(net.w_head);
        fn(net.b_head);
    } else {
        fn(net.w_nce1);
        fn(net.b_nce1);
        fn(net.w_nce2);
        fn(net.b_nce2);
        fn(net.w_nce3);
        fn(net.b_nce3);
    }
}

Eigen::Index param_count(const ToyResNet& net) {
    Eigen::Index n = 0;
    visit_params(const_cast<ToyResNet&>(net), [&](auto& m) { n += m.size(); });
    return n;
}

struct FlatWriter {
    Eigen::VectorXd& out;
    Eigen::Index pos = 0;
    template <typename M>
    void write(const M& m) {
        out.segment(pos, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        pos += m.size();
    }
};

}  // namespace

Eigen::VectorXd net_parameters(const ToyResNet& net) {
    Eigen::VectorXd out(param_count(net));
    FlatWriter w{out};
    visit_params(const_cast<ToyResNet&>(net), [&](auto& m) { w.write(m); });
    return out;
}

void set_net_parameters(ToyResNet& net, const Eigen::VectorXd& params) {
    if (params.size() != param_count(net))
        throw PreconditionError("set_net_parameters: size mismatch");
    Eigen::Index pos = 0;
    visit_params(net, [&](auto& m) {
        m = Eigen::Map<const std::remove_reference_t<decltype(m)>>(params.data() + pos, m.rows(),
                                                                   m.cols());
        pos += m.size();
    });
}

ForwardCache forward(const ToyResNet& net, const Eigen::MatrixXd& x) {
    if (x.rows() != net.input_dim) throw PreconditionError("forward: input dimension mismatch");
    ForwardCache c;
    c.h0 = (net.w_embed * x).colwise() + net.b_embed;
    Eigen::MatrixXd h = c.h0;
    for (const auto& blk : net.blocks) {
        Eigen::MatrixXd a = ((blk.w1 * h).colwise() + blk.b1).cwiseMax(0.0);
        Eigen::MatrixXd odd = (blk.w2 * a).colwise() + blk.b2;
        Eigen::MatrixXd even = (h + odd).cwiseMax(0.0);
        c.a.push_back(std::move(a));
        c.odd.push_back(std::move(odd));
        c.even.push_back(std::move(even));
        h = c.even.back();
    }
    if (net.objective == Objective::supervised) {
        c.logits = (net.w_head * h).colwise() + net.b_head;
    } else {
        c.z1 = ((net.w_nce1 * h).colwise() + net.b_nce1).cwiseMax(0.0);
        c.z2 = ((net.w_nce2 * c.z1).colwise() + net.b_nce2).cwiseMax(0.0);
        c.z3 = (net.w_nce3 * c.z2).colwise() + net.b_nce3;
    }
    return c;
}

namespace {

// Backprop from d(loss)/d(backbone output) down to the flat gradient vector.
// Head gradients are filled by the caller before invoking this.
struct BackpropState {
    const ToyResNet& net;
    const ForwardCache& cache;
    const Eigen::MatrixXd& x;
    ToyResNet grads;  // same shapes, holds d(loss)/d(param)

    explicit BackpropState(const ToyResNet& n, const ForwardCache& c, const Eigen::MatrixXd& xin)
        : net(n), cache(c), x(xin), grads(n) {
        visit_params(grads, [](auto& m) { m.setZero(); });
    }

    void backbone(Eigen::MatrixXd dh) {
        for (int i = net.num_blocks() - 1; i >= 0; --i) {
            const auto& blk = net.blocks[static_cast<size_t>(i)];
            const Eigen::MatrixXd& prev =
                i == 0 ? cache.h0 : cache.even[static_cast<size_t>(i - 1)];
            const Eigen::MatrixXd d_pre =
                ((cache.even[static_cast<size_t>(i)].array() > 0.0).cast<double>() * dh.array())
                    .matrix();
            // d_pre flows into both the branch and the identity path.
            auto& g = grads.blocks[static_cast<size_t>(i)];
            const auto& a = cache.a[static_cast<size_t>(i)];
            g.w2 += d_pre * a.transpose();
            g.b2 += d_pre.rowwise().sum();
            const Eigen::MatrixXd d_a =
                ((blk.w2.transpose() * d_pre).array() * (a.array() > 0.0).cast<double>()).matrix();
            g.w1 += d_a * prev.transpose();
            g.b1 += d_a.rowwise().sum();
            dh = d_pre + blk.w1.transpose() * d_a;
        }
        grads.w_embed += dh * x.transpose();
        grads.b_embed += dh.rowwise().sum();
    }

    Eigen::VectorXd flat() { return net_parameters(grads); }
};

}  // namespace

double supervised_loss(const ToyResNet& net, const Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& onehot, Eigen::VectorXd* grads) {
    if (net.objective != Objective::supervised)
        throw PreconditionError("supervised_loss: net has no supervised head");
    if (onehot.cols() != x.cols() || onehot.rows() != net.class_count)
        throw PreconditionError("supervised_loss: label shape mismatch");
    const Eigen::Index n = x.cols();
    ForwardCache cache = forward(net, x);

    Eigen::MatrixXd p = cache.logits;
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double zmax = p.col(j).maxCoeff();
        Eigen::ArrayXd e = (p.col(j).array() - zmax).exp();
        const double lse = zmax + std::log(e.sum());
        loss += lse - p.col(j).dot(onehot.col(j));
        p.col(j) = (e / e.sum()).matrix();
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) throw DivergenceError("supervised loss is non-finite");
    if (!grads) return loss;

    const Eigen::MatrixXd dlogits = (p - onehot) / static_cast<double>(n);
    BackpropState bp(net, cache, x);
    const Eigen::MatrixXd& hB = cache.even.back();
    bp.grads.w_head = dlogits * hB.transpose();
    bp.grads.b_head = dlogits.rowwise().sum();
    bp.backbone(net.w_head.transpose() * dlogits);
    *grads = bp.flat();
    return loss;
}

double contrastive_loss(const ToyResNet& net, const Eigen::MatrixXd& x, double temperature,
                        Eigen::VectorXd* grads) {
    if (net.objective != Objective::contrastive)
        throw PreconditionError("contrastive_loss: net has no NCE head");
    ForwardCache cache = forward(net, x);
    const double loss = info_nce_loss(cache.z3.transpose(), temperature);
    if (!std::isfinite(loss)) throw DivergenceError("contrastive loss is non-finite");
    if (!grads) return loss;

    const Eigen::MatrixXd dz3 = info_nce_gradient(cache.z3.transpose(), temperature).transpose();
    BackpropState bp(net, cache, x);
    bp.grads.w_nce3 = dz3 * cache.z2.transpose();
    bp.grads.b_nce3 = dz3.rowwise().sum();
    const Eigen::MatrixXd dz2 =
        ((net.w_nce3.transpose() * dz3).array() * (cache.z2.array() > 0.0).cast<double>()).matrix();
    bp.grads.w_nce2 = dz2 * cache.z1.transpose();
    bp.grads.b_nce2 = dz2.rowwise().sum();
    const Eigen::MatrixXd dz1 =
        ((net.w_nce2.transpose() * dz2).array() * (cache.z1.array() > 0.0).cast<double>()).matrix();
    bp.grads.w_nce1 = dz1 * cache.even.back().transpose();
    bp.grads.b_nce1 = dz1.rowwise().sum();
    bp.backbone(net.w_nce1.transpose() * dz1);
    *grads = bp.flat();
    return loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainLog train(Objective objective, ToyResNet& net, const Eigen::MatrixXd& train_x,
               const LabelMatrix& labels, const TrainConfig& cfg, const AugmentationSpec& aug) {
    if (net.objective != objective)
        throw PreconditionError("train: net head does not match objective");
    if (train_x.rows() != labels.m() && objective == Objective::supervised)
        throw AlignmentError(labels.m(), train_x.rows(), "training features");
    aug.validate();

    const Eigen::Index m = train_x.rows();
    const Eigen::MatrixXd onehot_t = labels.data.transpose();  // c x m
    std::mt19937_64 rng(cfg.seed);
    std::vector<Eigen::Index> order(static_cast<size_t>(m));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    TrainLog log;
    Eigen::VectorXd grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        Eigen::Index seen = 0;
        for (Eigen::Index start = 0; start < m; start += cfg.batch_size) {
            const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, m - start);
            if (objective == Objective::contrastive && bs < 2) break;  // InfoNCE needs N >= 2
            double loss;
            if (objective == Objective::supervised) {
                Eigen::MatrixXd xb(net.input_dim, bs);
                Eigen::MatrixXd yb(net.class_count, bs);
                for (Eigen::Index j = 0; j < bs; ++j) {
                    const Eigen::Index idx = order[static_cast<size_t>(start + j)];
                    xb.col(j) = augment(train_x.row(idx).transpose(), aug, rng);
                    yb.col(j) = onehot_t.col(idx);
                }
                loss = supervised_loss(net, xb, yb, &grads);
            } else {
                Eigen::MatrixXd xb(net.input_dim, 2 * bs);
                for (Eigen::Index j = 0; j < bs; ++j) {
                    const Eigen::Index idx = order[static_cast<size_t>(start + j)];
                    xb.col(2 * j) = augment(train_x.row(idx).transpose(), aug, rng);
                    xb.col(2 * j + 1) = augment(train_x.row(idx).transpose(), aug, rng);
                }
                loss = contrastive_loss(net, xb, cfg.temperature, &grads);
            }
            if (!std::isfinite(loss)) throw DivergenceError("training loss is non-finite");
            set_net_parameters(net, net_parameters(net) - cfg.learning_rate * grads);
            epoch_loss += loss * static_cast<double>(bs);
            seen += bs;
        }
        log.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
    }
    return log;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

BlockGroupSpec toy_block_groups(int num_blocks) {
    const int first = (num_blocks + 1) / 2;
    BlockGroupSpec bg;
    bg.groups.push_back({"G1", first});
    if (num_blocks - first > 0) bg.groups.push_back({"G2", num_blocks - first});
    return bg;
}

Extraction extract_representations(const ToyResNet& net, const Eigen::MatrixXd& samples,
                                   const AugmentationSpec& aug, std::uint64_t rng_seed,
                                   const fs::path& out_dir, const std::string& model_id,
                                   unsigned seed, const BlockGroupSpec& bg,
                                   const std::string& dataset_id) {
    aug.validate();
    const Eigen::Index m = samples.rows();
    std::mt19937_64 rng(rng_seed);
    Eigen::MatrixXd xa(net.input_dim, m);
    for (Eigen::Index i = 0; i < m; ++i)
        xa.col(i) = augment(samples.row(i).transpose(), aug, rng);
    const ForwardCache cache = forward(net, xa);

    fs::create_directories(out_dir);
    const Method method =
        net.objective == Objective::supervised ? Method::supervised : Method::contrastive;

    Extraction out;
    out.manifest.dataset_id = dataset_id;
    out.manifest.sample_count = m;

    auto emit = [&](const Eigen::MatrixXd& act /* w x m */, Parity parity, int layer_index,
                    std::optional<int> block_group) {
        LayerTag tag;
        tag.model_id = model_id;
        tag.method = method;
        tag.seed = seed;
        tag.layer_index = layer_index;
        tag.parity = parity;
        tag.block_group = block_group;
        const std::string file =
            model_id + "_" + to_string(parity) + std::to_string(layer_index) + ".npy";
        Eigen::MatrixXd rows = act.transpose();
        write_array(rows, out_dir / file);
        ManifestEntry e;
        e.model_id = model_id;
        e.method = method;
        e.seed = seed;
        e.layer_index = layer_index;
        e.parity = parity;
        e.block_group = block_group;
        e.path = file;
        e.m = rows.rows();
        e.p = rows.cols();
        e.dtype = "<f8";
        out.manifest.entries.push_back(e);
        out.reps.emplace_back(std::move(rows), tag);
    };

    for (int i = 0; i < net.num_blocks(); ++i) {
        emit(cache.odd[static_cast<size_t>(i)], Parity::odd, i + 1, bg.group_of(i + 1));
        emit(cache.even[static_cast<size_t>(i)], Parity::even, i + 1, bg.group_of(i + 1));
    }
    if (net.objective == Objective::supervised) {
        emit(cache.logits, Parity::head, 1, std::nullopt);
    } else {
        emit(cache.z1, Parity::head, 1, std::nullopt);
        emit(cache.z2, Parity::head, 2, std::nullopt);
        emit(cache.z3, Parity::head, 3, std::nullopt);
    }
    write_manifest(out.manifest, out_dir / (model_id + "_manifest.json"));
    return out;
}

}  // namespace repsim
