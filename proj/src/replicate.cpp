#include "repsim/replicate.hpp"

#include "repsim/analysis.hpp"
#include "repsim/probe.hpp"
#include "repsim/reportio.hpp"

#include <json.hpp>

#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace repsim {

namespace fs = std::filesystem;
using nlohmann::json;

ToyRunConfig load_toy_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw FormatError(std::string("config is not valid JSON: ") + ex.what());
    }
    ToyRunConfig cfg;
    auto get = [&](const json& node, const char* key, auto& field) {
        if (node.contains(key)) field = node.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        get(d, "class_count", cfg.dataset.class_count);
        get(d, "input_dim", cfg.dataset.input_dim);
        get(d, "samples_per_class", cfg.dataset.samples_per_class);
        get(d, "cluster_spread", cfg.dataset.cluster_spread);
        get(d, "mean_scale", cfg.dataset.mean_scale);
        get(d, "seed", cfg.dataset.seed);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        get(t, "temperature", cfg.train.temperature);
        get(t, "batch_size", cfg.train.batch_size);
        get(t, "projection_dim", cfg.train.projection_dim);
        get(t, "epochs", cfg.train.epochs);
        get(t, "learning_rate", cfg.train.learning_rate);
        get(t, "seed", cfg.train.seed);
    }
    get(j, "width", cfg.width);
    get(j, "num_blocks", cfg.num_blocks);
    get(j, "lr_supervised", cfg.lr_supervised);
    get(j, "lr_contrastive", cfg.lr_contrastive);
    return cfg;
}

namespace {

struct TrainedModel {
    ToyResNet net;
    std::string model_id;
    Objective objective;
    unsigned seed;
};

TrainedModel train_model(const ToyRunConfig& cfg, const Blobs& blobs, Objective objective,
                         unsigned seed) {
    TrainedModel tm{make_toy_resnet(cfg.dataset.input_dim, cfg.width, cfg.num_blocks,
                                    cfg.dataset.class_count, cfg.train.projection_dim, objective,
                                    seed),
                    (objective == Objective::supervised ? "sup" : "con") + std::string("_seed") +
                        std::to_string(seed),
                    objective, seed};
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.learning_rate =
        objective == Objective::supervised ? cfg.lr_supervised : cfg.lr_contrastive;
    const AugmentationSpec aug = objective == Objective::supervised ? AugmentationSpec::weak()
                                                                    : AugmentationSpec::strong();
    train(objective, tm.net, blobs.train_x, blobs.train_labels, tc, aug);
    return tm;
}

double diag_mean(const CkaMatrix& m) {
    double s = 0.0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < std::min(m.values.rows(), m.values.cols()); ++i) {
        if (std::isfinite(m.values(i, i))) {
            s += m.values(i, i);
            ++n;
        }
    }
    return n > 0 ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

const CurvePoint* find_point(const std::vector<CurvePoint>& pts, Parity parity, bool last) {
    const CurvePoint* found = nullptr;
    for (const auto& p : pts) {
        if (p.tag.parity != parity) continue;
        if (!found || (last ? p.tag.layer_index > found->tag.layer_index
                            : p.tag.layer_index < found->tag.layer_index))
            found = &p;
    }
    return found;
}

}  // namespace

fs::path run_toy_experiment(const ToyRunConfig& cfg, Objective objective, unsigned seed,
                            const fs::path& out_dir) {
    const Blobs blobs = make_blobs(cfg.dataset);
    TrainedModel tm = train_model(cfg, blobs, objective, seed);
    const BlockGroupSpec bg = toy_block_groups(cfg.num_blocks);
    const AugmentationSpec family = objective == Objective::supervised
                                        ? AugmentationSpec::weak()
                                        : AugmentationSpec::strong();
    Extraction ex = extract_representations(tm.net, blobs.eval_x, family, 9000 + seed, out_dir,
                                            tm.model_id, seed, bg, "toy_blobs");
    write_array(blobs.eval_labels.data, out_dir / (tm.model_id + "_labels.npy"));
    return out_dir / (tm.model_id + "_manifest.json");
}

ReplicationReport run_replication(const ToyRunConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const Blobs blobs = make_blobs(cfg.dataset);
    const BlockGroupSpec bg = toy_block_groups(cfg.num_blocks);
    const std::vector<unsigned> seeds{0, 1};
    const std::vector<Objective> objectives{Objective::supervised, Objective::contrastive};

    // Train and extract: identity-augmented reps for structure/class
    // analyses, two strong-augmented views for the invariance curves, and one
    // view from each objective's own evaluation family for the probes.
    std::map<std::pair<int, unsigned>, std::vector<RepMatrix>> clean, aug1, aug2, probe_view;
    for (Objective o : objectives) {
        for (unsigned s : seeds) {
            TrainedModel tm = train_model(cfg, blobs, o, s);
            const int oi = static_cast<int>(o);
            const AugmentationSpec family = o == Objective::supervised
                                                ? AugmentationSpec::weak()
                                                : AugmentationSpec::strong();
            probe_view[{oi, s}] = extract_representations(tm.net, blobs.eval_x, family, 7300 + s,
                                                          out_dir / "probe_view", tm.model_id, s,
                                                          bg, "toy_blobs")
                                      .reps;
            clean[{oi, s}] = extract_representations(tm.net, blobs.eval_x,
                                                     AugmentationSpec::identity(), 9000 + s,
                                                     out_dir, tm.model_id, s, bg, "toy_blobs")
                                 .reps;
            aug1[{oi, s}] = extract_representations(tm.net, blobs.eval_x,
                                                    AugmentationSpec::strong(), 7100 + s,
                                                    out_dir / "view1", tm.model_id, s, bg,
                                                    "toy_blobs")
                                .reps;
            aug2[{oi, s}] = extract_representations(tm.net, blobs.eval_x,
                                                    AugmentationSpec::strong(), 7200 + s,
                                                    out_dir / "view2", tm.model_id, s, bg,
                                                    "toy_blobs")
                                .reps;
        }
    }
    const int sup = static_cast<int>(Objective::supervised);
    const int con = static_cast<int>(Objective::contrastive);

    ReplicationReport report;
    auto add_check = [&](const std::string& name, double value, bool pass,
                         const std::string& detail) {
        report.checks.push_back({name, detail, value, pass});
        if (!pass) report.all_pass = false;
    };

    // (a) cross-seed stability, even-layer diagonal mean per method
    for (Objective o : objectives) {
        const int oi = static_cast<int>(o);
        CkaMatrix grid =
            internal_structure(clean[{oi, 0}], clean[{oi, 1}], ParityFilter::even);
        write_cka_csv(grid, out_dir / ("cross_seed_even_" + to_string(o) + ".csv"));
        write_heatmap_svg(grid, out_dir / ("cross_seed_even_" + to_string(o) + ".svg"));
        const double dm = diag_mean(grid);
        add_check("cross_seed_stability_" + to_string(o), dm, dm >= 0.8,
                  "even-layer diagonal mean CKA across seeds (threshold 0.8)");
    }

    // (b) cross-method even vs odd diagonal means, pooled over seed pairings
    double even_diag = 0.0, odd_diag = 0.0;
    for (unsigned s : seeds) {
        CkaMatrix even_grid =
            internal_structure(clean[{con, s}], clean[{sup, s}], ParityFilter::even);
        CkaMatrix odd_grid =
            internal_structure(clean[{con, s}], clean[{sup, s}], ParityFilter::odd);
        even_diag += diag_mean(even_grid) / static_cast<double>(seeds.size());
        odd_diag += diag_mean(odd_grid) / static_cast<double>(seeds.size());
        const std::string sfx = "_seed" + std::to_string(s);
        write_cka_csv(even_grid, out_dir / ("cross_method_even" + sfx + ".csv"));
        write_heatmap_svg(even_grid, out_dir / ("cross_method_even" + sfx + ".svg"));
        write_cka_csv(odd_grid, out_dir / ("cross_method_odd" + sfx + ".csv"));
        write_heatmap_svg(odd_grid, out_dir / ("cross_method_odd" + sfx + ".svg"));
        write_diagmax_csv(diag_max_curve(even_grid), out_dir / ("diagmax" + sfx + ".csv"));
        const auto stalls = stall_profile(even_grid, bg);
        std::ostringstream st;
        st << "layer_index,argmax_lag,group_entry\n";
        for (const auto& sp : stalls)
            st << sp.layer_index << "," << sp.argmax_lag << ","
               << (sp.group_entry ? "true" : "false") << "\n";
        write_text_atomic(out_dir / ("stall_profile" + sfx + ".csv"), st.str());
    }
    add_check("cross_method_even_vs_odd", even_diag - odd_diag, even_diag > odd_diag,
              "even diag mean " + format_value(even_diag) + " vs odd diag mean " +
                  format_value(odd_diag));

    // (c) augmentation invariance: head rise for contrastive, none for supervised
    double con_rise = 0.0, sup_rise = 0.0;
    for (Objective o : objectives) {
        const int oi = static_cast<int>(o);
        double rise = 0.0;
        for (unsigned s : seeds) {
            InvarianceCurve curve = augmentation_invariance(aug1[{oi, s}], aug2[{oi, s}]);
            write_curve_csv(curve.points, out_dir / ("invariance_" + to_string(o) + "_seed" +
                                                     std::to_string(s) + ".csv"));
            const CurvePoint* first_even = find_point(curve.points, Parity::even, false);
            const CurvePoint* last_head = find_point(curve.points, Parity::head, true);
            if (!first_even || !last_head)
                throw PreconditionError("replication: missing even/head invariance points");
            rise += (last_head->value - first_even->value) / static_cast<double>(seeds.size());
        }
        (o == Objective::contrastive ? con_rise : sup_rise) = rise;
    }
    add_check("invariance_rise_contrastive", con_rise, con_rise >= 0.1,
              "head minus first-even invariance CKA (threshold +0.1)");
    add_check("invariance_no_rise_supervised", sup_rise, sup_rise < 0.1,
              "head minus first-even invariance CKA under strong augmentations (< 0.1)");

    // (d) class-structure CKA at the final even layer: supervised > contrastive
    double sup_class = 0.0, con_class = 0.0;
    for (Objective o : objectives) {
        const int oi = static_cast<int>(o);
        for (unsigned s : seeds) {
            ClassSimCurve curve = class_structure_cka(clean[{oi, s}], blobs.eval_labels);
            write_curve_csv(curve.points, out_dir / ("class_sim_" + to_string(o) + "_seed" +
                                                     std::to_string(s) + ".csv"));
            const CurvePoint* last_even = find_point(curve.points, Parity::even, true);
            if (!last_even) throw PreconditionError("replication: missing final even layer");
            (o == Objective::supervised ? sup_class : con_class) +=
                last_even->value / static_cast<double>(seeds.size());
        }
    }
    add_check("class_structure_final_even", sup_class - con_class, sup_class > con_class,
              "supervised " + format_value(sup_class) + " vs contrastive " +
                  format_value(con_class));

    // (e) probe accuracy ordering: final even >= first even, per method
    ProbeConfig pc;
    for (Objective o : objectives) {
        const int oi = static_cast<int>(o);
        double first_acc = 0.0, last_acc = 0.0;
        for (unsigned s : seeds) {
            std::vector<RepMatrix> evens;
            for (const auto& r : probe_view[{oi, s}])
                if (r.tag.parity == Parity::even) evens.push_back(r);
            const auto results = probe_curve(evens, blobs.eval_labels, pc);
            write_probe_csv(results, out_dir / ("probe_" + to_string(o) + "_seed" +
                                                std::to_string(s) + ".csv"));
            first_acc += results.front().test_accuracy / static_cast<double>(seeds.size());
            last_acc += results.back().test_accuracy / static_cast<double>(seeds.size());
        }
        add_check("probe_endpoint_order_" + to_string(o), last_acc - first_acc,
                  last_acc >= first_acc,
                  "final even test acc " + format_value(last_acc) + " vs first even " +
                      format_value(first_acc));
    }

    std::ostringstream rep;
    rep << "toy replication report\n";
    for (const auto& c : report.checks)
        rep << (c.pass ? "PASS" : "FAIL") << "  " << c.name << "  value=" << format_value(c.value)
            << "  (" << c.detail << ")\n";
    rep << (report.all_pass ? "ALL CHECKS PASSED\n" : "SOME CHECKS FAILED\n");
    write_text_atomic(out_dir / "report.txt", rep.str());
    return report;
}

}  // namespace repsim
