#pragma once

#include "repsim/repcore.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace repsim {

struct NpyArray {
    Eigen::MatrixXd data;   // 1-D files load as m x 1
    std::string dtype;      // "<f4" or "<f8" as stored on disk
    bool one_dimensional = false;
};

// NPY v1.0 only: little-endian header length, descr in {<f4, <f8},
// fortran_order false, 1-D or 2-D shape. Data is widened to 64-bit.
NpyArray read_array(const std::filesystem::path& path);

// NPY v1.0, C-order little-endian payload, header space-padded so that the
// total header length is a multiple of 64 and ends in '\n'. Writes to a
// temporary file and renames into place.
void write_array(const Eigen::MatrixXd& matrix, const std::filesystem::path& path,
                 const std::string& dtype = "<f8");

struct ManifestEntry {
    std::string model_id;
    Method method = Method::supervised;
    unsigned seed = 0;
    int layer_index = 1;
    Parity parity = Parity::even;
    std::optional<int> block_group;
    std::string path;  // relative to the manifest's directory
    Eigen::Index m = 0;
    Eigen::Index p = 0;
    std::string dtype = "<f8";

    LayerTag tag() const;
};

struct RunManifest {
    std::vector<ManifestEntry> entries;
    std::string dataset_id;
    Eigen::Index sample_count = 0;
};

RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

// Loads every entry, attaches tags, checks alignment and declared shapes,
// and orders by (parity, layer_index).
std::vector<RepMatrix> load_run(const std::filesystem::path& manifest_path);

}  // namespace repsim
