#include "repsim/reportio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace repsim {

namespace fs = std::filesystem;

std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string bg_field(const LayerTag& t) {
    return t.block_group ? std::to_string(*t.block_group) : "";
}

}  // namespace

void write_cka_csv(const CkaMatrix& m, const fs::path& path) {
    std::ostringstream out;
    out << "layer";
    for (const auto& t : m.col_tags) out << "," << t.describe();
    out << "\n";
    for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
        out << m.row_tags[static_cast<size_t>(i)].describe();
        for (Eigen::Index j = 0; j < m.values.cols(); ++j)
            out << "," << format_value(m.values(i, j));
        out << "\n";
    }
    write_text_atomic(path, out.str());
}

void write_curve_csv(const std::vector<CurvePoint>& points, const fs::path& path) {
    std::ostringstream out;
    out << "layer_index,parity,block_group,value\n";
    for (const auto& p : points)
        out << p.tag.layer_index << "," << to_string(p.tag.parity) << "," << bg_field(p.tag) << ","
            << format_value(p.value) << "\n";
    write_text_atomic(path, out.str());
}

void write_diagmax_csv(const std::vector<DiagMaxPoint>& points, const fs::path& path) {
    std::ostringstream out;
    out << "layer_index,diag,max,argmax\n";
    for (const auto& p : points)
        out << p.layer_index << "," << format_value(p.diag) << "," << format_value(p.max) << ","
            << p.argmax_index << "\n";
    write_text_atomic(path, out.str());
}

void write_probe_csv(const std::vector<ProbeResult>& results, const fs::path& path) {
    std::ostringstream out;
    out << "layer_index,parity,block_group,train_acc,test_acc,converged\n";
    for (const auto& r : results)
        out << r.tag.layer_index << "," << to_string(r.tag.parity) << "," << bg_field(r.tag) << ","
            << format_value(r.train_accuracy) << "," << format_value(r.test_accuracy) << ","
            << (r.converged ? "true" : "false") << "\n";
    write_text_atomic(path, out.str());
}

namespace {

// viridis-like three-stop ramp, enough for a diffable heatmap
std::string color_of(double v, double lo, double hi) {
    double t = (v - lo) / (hi - lo);
    t = std::clamp(t, 0.0, 1.0);
    auto lerp = [](int a, int b, double s) { return static_cast<int>(a + (b - a) * s + 0.5); };
    int r, g, b;
    if (t < 0.5) {
        const double s = t * 2.0;
        r = lerp(68, 33, s);
        g = lerp(1, 144, s);
        b = lerp(84, 140, s);
    } else {
        const double s = (t - 0.5) * 2.0;
        r = lerp(33, 253, s);
        g = lerp(144, 231, s);
        b = lerp(140, 37, s);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

std::vector<int> group_boundaries(const std::vector<LayerTag>& tags) {
    std::vector<int> out;
    for (size_t i = 1; i < tags.size(); ++i) {
        if (tags[i].block_group && tags[i - 1].block_group &&
            *tags[i].block_group != *tags[i - 1].block_group)
            out.push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace

std::string render_heatmap_svg(const CkaMatrix& m, const HeatmapStyle& style) {
    const int cs = style.cell_size;
    const int margin = 4;
    const auto rows = static_cast<int>(m.values.rows());
    const auto cols = static_cast<int>(m.values.cols());
    const int width = cols * cs + 2 * margin;
    const int height = rows * cs + 2 * margin;

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const double v = m.values(i, j);
            const int x = margin + j * cs;
            const int y = margin + i * cs;
            if (std::isnan(v)) {
                out << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cs
                    << "\" height=\"" << cs << "\" fill=\"#bbbbbb\"/>\n";
                out << "  <line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + cs
                    << "\" y2=\"" << y + cs << "\" stroke=\"#777777\" stroke-width=\"1\"/>\n";
            } else {
                out << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cs
                    << "\" height=\"" << cs << "\" fill=\""
                    << color_of(v, style.scale_min, style.scale_max) << "\">\n";
                out << "    <title>" << m.row_tags[static_cast<size_t>(i)].describe() << " vs "
                    << m.col_tags[static_cast<size_t>(j)].describe() << ": " << format_value(v)
                    << "</title>\n  </rect>\n";
            }
        }
    }
    if (style.block_group_lines) {
        for (int b : group_boundaries(m.row_tags)) {
            const int y = margin + b * cs;
            out << "  <line x1=\"" << margin << "\" y1=\"" << y << "\" x2=\"" << margin + cols * cs
                << "\" y2=\"" << y << "\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n";
        }
        for (int b : group_boundaries(m.col_tags)) {
            const int x = margin + b * cs;
            out << "  <line x1=\"" << x << "\" y1=\"" << margin << "\" x2=\"" << x << "\" y2=\""
                << margin + rows * cs << "\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

void write_heatmap_svg(const CkaMatrix& m, const fs::path& path, const HeatmapStyle& style) {
    write_text_atomic(path, render_heatmap_svg(m, style));
}

}  // namespace repsim
