#include "repsim/analysis.hpp"
#include "repsim/ingest.hpp"
#include "repsim/probe.hpp"
#include "repsim/replicate.hpp"
#include "repsim/reportio.hpp"
#include "repsim/similarity.hpp"
#include "repsim/toytrain.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace repsim;

ParityFilter parse_parity(const std::string& s) {
    if (s == "all") return ParityFilter::all;
    if (s == "odd") return ParityFilter::odd;
    if (s == "even") return ParityFilter::even;
    throw PreconditionError("--parity must be all, odd, or even");
}

LabelMatrix load_labels(const std::string& path) {
    NpyArray arr = read_array(path);
    return LabelMatrix(arr.data, static_cast<int>(arr.data.cols()));
}

int run(int argc, char** argv) {
    CLI::App app{"representation-similarity toolkit: linear-kernel CKA/HSIC analysis "
                 "plus a toy residual-network experiment driver"};
    app.require_subcommand(1);

    // cka
    std::string cka_a, cka_b, cka_parity = "all", cka_csv, cka_svg;
    auto* cmd_cka = app.add_subcommand("cka", "pairwise layer-by-layer CKA grid");
    cmd_cka->add_option("manifest_a", cka_a)->required();
    cmd_cka->add_option("manifest_b", cka_b)->required();
    cmd_cka->add_option("--parity", cka_parity, "all|odd|even");
    cmd_cka->add_option("--out-csv", cka_csv)->required();
    cmd_cka->add_option("--out-svg", cka_svg);

    // diagmax
    std::string dm_a, dm_b, dm_csv;
    auto* cmd_diagmax = app.add_subcommand("diagmax", "diag vs max similarity curve");
    cmd_diagmax->add_option("manifest_a", dm_a)->required();
    cmd_diagmax->add_option("manifest_b", dm_b)->required();
    cmd_diagmax->add_option("--out-csv", dm_csv)->required();

    // invariance
    std::string inv_a, inv_b, inv_csv, inv_svg;
    bool inv_all_pairs = false;
    auto* cmd_inv = app.add_subcommand("invariance", "augmentation-invariance curve or grid");
    cmd_inv->add_option("manifest_view1", inv_a)->required();
    cmd_inv->add_option("manifest_view2", inv_b)->required();
    cmd_inv->add_flag("--all-pairs", inv_all_pairs, "full L x L grid instead of the diagonal");
    cmd_inv->add_option("--out-csv", inv_csv)->required();
    cmd_inv->add_option("--out-svg", inv_svg);

    // classsim
    std::string cs_manifest, cs_labels, cs_csv;
    auto* cmd_classsim = app.add_subcommand("classsim", "CKA against the class representation");
    cmd_classsim->add_option("manifest", cs_manifest)->required();
    cmd_classsim->add_option("labels_file", cs_labels, "one-hot label matrix (NPY)")->required();
    cmd_classsim->add_option("--out-csv", cs_csv)->required();

    // probe
    std::string pr_manifest, pr_labels, pr_csv;
    ProbeConfig pr_cfg;
    auto* cmd_probe = app.add_subcommand("probe", "per-layer linear probe accuracies");
    cmd_probe->add_option("manifest", pr_manifest)->required();
    cmd_probe->add_option("labels_file", pr_labels)->required();
    cmd_probe->add_option("--l2", pr_cfg.l2_penalty);
    cmd_probe->add_option("--split-seed", pr_cfg.split_seed);
    cmd_probe->add_option("--out-csv", pr_csv)->required();

    // toy
    std::string toy_config, toy_objective = "supervised", toy_dir = "toy_out";
    unsigned toy_seed = 0;
    auto* cmd_toy = app.add_subcommand("toy", "train a toy model and dump representations");
    cmd_toy->add_option("config_file", toy_config, "JSON run config")->required();
    cmd_toy->add_option("--objective", toy_objective, "supervised|contrastive");
    cmd_toy->add_option("--seed", toy_seed);
    cmd_toy->add_option("--out-dir", toy_dir);

    // replicate
    std::string rep_dir = "replication", rep_config;
    auto* cmd_rep = app.add_subcommand("replicate", "full 2-seed x 2-objective toy replication");
    cmd_rep->add_option("--out-dir", rep_dir);
    cmd_rep->add_option("--config", rep_config, "optional JSON run config");

    CLI11_PARSE(app, argc, argv);

    if (cmd_cka->parsed()) {
        auto run_a = load_run(cka_a);
        auto run_b = load_run(cka_b);
        CkaMatrix grid = internal_structure(run_a, run_b, parse_parity(cka_parity));
        write_cka_csv(grid, cka_csv);
        if (!cka_svg.empty()) write_heatmap_svg(grid, cka_svg);
    } else if (cmd_diagmax->parsed()) {
        auto run_a = load_run(dm_a);
        auto run_b = load_run(dm_b);
        CkaMatrix grid = internal_structure(run_a, run_b, ParityFilter::even);
        write_diagmax_csv(diag_max_curve(grid), dm_csv);
    } else if (cmd_inv->parsed()) {
        auto v1 = load_run(inv_a);
        auto v2 = load_run(inv_b);
        if (inv_all_pairs) {
            CkaMatrix grid = augmentation_invariance_grid(v1, v2);
            write_cka_csv(grid, inv_csv);
            if (!inv_svg.empty()) write_heatmap_svg(grid, inv_svg);
        } else {
            InvarianceCurve curve = augmentation_invariance(v1, v2);
            write_curve_csv(curve.points, inv_csv);
        }
    } else if (cmd_classsim->parsed()) {
        auto reps = load_run(cs_manifest);
        ClassSimCurve curve = class_structure_cka(reps, load_labels(cs_labels));
        write_curve_csv(curve.points, cs_csv);
    } else if (cmd_probe->parsed()) {
        auto reps = load_run(pr_manifest);
        auto results = probe_curve(reps, load_labels(pr_labels), pr_cfg);
        write_probe_csv(results, pr_csv);
    } else if (cmd_toy->parsed()) {
        ToyRunConfig cfg = load_toy_config(toy_config);
        auto manifest = run_toy_experiment(cfg, objective_from_string(toy_objective), toy_seed,
                                           toy_dir);
        std::cout << "wrote " << manifest.string() << "\n";
    } else if (cmd_rep->parsed()) {
        ToyRunConfig cfg = rep_config.empty() ? ToyRunConfig{} : load_toy_config(rep_config);
        ReplicationReport report = run_replication(cfg, rep_dir);
        for (const auto& c : report.checks)
            std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name
                      << "  value=" << format_value(c.value) << "\n";
        std::cout << "report: " << (std::filesystem::path(rep_dir) / "report.txt").string()
                  << "\n";
        if (!report.all_pass) return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const repsim::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
