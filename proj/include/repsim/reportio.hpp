#pragma once

#include "repsim/analysis.hpp"
#include "repsim/probe.hpp"
#include "repsim/repcore.hpp"
#include "repsim/similarity.hpp"

#include <filesystem>
#include <string>

namespace repsim {

// Formats with 12 significant digits; NaN cells print as "nan".
std::string format_value(double v);

// All writers go through write-to-temp-then-rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

// CSV with row/col tags in the header and first column.
void write_cka_csv(const CkaMatrix& m, const std::filesystem::path& path);

// Columns: layer_index, parity, block_group, value.
void write_curve_csv(const std::vector<CurvePoint>& points, const std::filesystem::path& path);

// Columns: layer_index, diag, max, argmax.
void write_diagmax_csv(const std::vector<DiagMaxPoint>& points,
                       const std::filesystem::path& path);

// Columns: layer_index, parity, block_group, train_acc, test_acc, converged.
void write_probe_csv(const std::vector<ProbeResult>& results, const std::filesystem::path& path);

struct HeatmapStyle {
    double scale_min = 0.0;
    double scale_max = 1.0;
    int cell_size = 14;
    bool block_group_lines = true;
};

// Deterministic SVG heatmap, one rect per cell; undefined cells are hatched
// grey. Block-group boundaries from the tags draw as white lines.
std::string render_heatmap_svg(const CkaMatrix& m, const HeatmapStyle& style = {});
void write_heatmap_svg(const CkaMatrix& m, const std::filesystem::path& path,
                       const HeatmapStyle& style = {});

}  // namespace repsim
