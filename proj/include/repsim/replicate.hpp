#pragma once

#include "repsim/toytrain.hpp"

#include <filesystem>

namespace repsim {

// Full toy-run configuration; readable from a JSON config file whose field
// names match the member names below.
struct ToyRunConfig {
    ToyDatasetSpec dataset;
    TrainConfig train;
    int width = 64;
    int num_blocks = 4;
    double lr_supervised = 0.05;
    double lr_contrastive = 0.02;
};

ToyRunConfig load_toy_config(const std::filesystem::path& path);

// Trains one model and dumps its identity-augmentation representations plus
// the manifest under out_dir. Returns the manifest path.
std::filesystem::path run_toy_experiment(const ToyRunConfig& cfg, Objective objective,
                                         unsigned seed, const std::filesystem::path& out_dir);

struct CheckResult {
    std::string name;
    std::string detail;
    double value = 0.0;
    bool pass = false;
};

struct ReplicationReport {
    std::vector<CheckResult> checks;
    bool all_pass = true;
};

// 2 seeds x 2 objectives: trains, extracts, produces every grid/curve as
// CSV + SVG under out_dir, and evaluates the directional checks. Writes
// report.txt with one verdict line per check.
ReplicationReport run_replication(const ToyRunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace repsim
