#include "repsim/ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace repsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

std::string find_header_value(const std::string& header, const std::string& key) {
    const std::string quoted = "'" + key + "'";
    const size_t kpos = header.find(quoted);
    if (kpos == std::string::npos) throw FormatError("NPY header missing key " + key);
    size_t pos = header.find(':', kpos + quoted.size());
    if (pos == std::string::npos) throw FormatError("NPY header malformed at key " + key);
    ++pos;
    while (pos < header.size() && header[pos] == ' ') ++pos;
    size_t end;
    if (header[pos] == '\'') {
        end = header.find('\'', pos + 1);
        if (end == std::string::npos) throw FormatError("NPY header unterminated string");
        return header.substr(pos + 1, end - pos - 1);
    }
    if (header[pos] == '(') {
        end = header.find(')', pos);
        if (end == std::string::npos) throw FormatError("NPY header unterminated tuple");
        return header.substr(pos, end - pos + 1);
    }
    end = header.find_first_of(",}", pos);
    return header.substr(pos, end - pos);
}

std::vector<Eigen::Index> parse_shape(const std::string& tuple) {
    std::vector<Eigen::Index> dims;
    std::string inner = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::erase(item, ' ');
        if (item.empty()) continue;
        dims.push_back(static_cast<Eigen::Index>(std::stoll(item)));
    }
    return dims;
}

void atomic_write_bytes(const fs::path& path, const std::string& bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

NpyArray read_array(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());

    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        throw FormatError("not an NPY file: " + path.string());
    unsigned char ver[2];
    in.read(reinterpret_cast<char*>(ver), 2);
    if (!in || ver[0] != 1 || ver[1] != 0)
        throw FormatError("unsupported NPY version " + std::to_string(ver[0]) + "." +
                          std::to_string(ver[1]));
    unsigned char len_bytes[2];
    in.read(reinterpret_cast<char*>(len_bytes), 2);
    if (!in) throw FormatError("truncated NPY header");
    const uint16_t header_len = static_cast<uint16_t>(len_bytes[0] | (len_bytes[1] << 8));

    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw FormatError("truncated NPY header");

    const std::string descr = find_header_value(header, "descr");
    if (descr != "<f4" && descr != "<f8")
        throw FormatError("unsupported NPY descr '" + descr + "'");
    std::string forder = find_header_value(header, "fortran_order");
    if (forder.find("True") != std::string::npos)
        throw FormatError("fortran_order arrays are not supported");

    const auto dims = parse_shape(find_header_value(header, "shape"));
    if (dims.size() > 2) throw ShapeError("NPY arrays with >2 axes are not supported");
    const Eigen::Index rows = dims.empty() ? 1 : dims[0];
    const Eigen::Index cols = dims.size() == 2 ? dims[1] : 1;
    const Eigen::Index count = rows * cols;

    NpyArray out;
    out.dtype = descr;
    out.one_dimensional = dims.size() < 2;
    out.data.resize(rows, cols);
    if (descr == "<f8") {
        std::vector<double> buf(static_cast<size_t>(count));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(double)));
        if (!in) throw FormatError("truncated NPY payload: " + path.string());
        out.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(buf.data(), rows, cols);
    } else {
        std::vector<float> buf(static_cast<size_t>(count));
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw FormatError("truncated NPY payload: " + path.string());
        out.data = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(buf.data(), rows, cols)
                       .cast<double>();
    }
    return out;
}

void write_array(const Eigen::MatrixXd& matrix, const fs::path& path, const std::string& dtype) {
    if (matrix.size() == 0) throw PreconditionError("write_array: empty matrix");
    if (!matrix.allFinite()) throw PreconditionError("write_array: non-finite entries");
    if (dtype != "<f4" && dtype != "<f8")
        throw PreconditionError("write_array: dtype must be <f4 or <f8");

    std::ostringstream dict;
    dict << "{'descr': '" << dtype << "', 'fortran_order': False, 'shape': (" << matrix.rows()
         << ", " << matrix.cols() << "), }";
    std::string header = dict.str();
    // 10 preamble bytes + header + padding + '\n', total % 64 == 0.
    const size_t unpadded = 10 + header.size() + 1;
    const size_t padded = (unpadded + 63) / 64 * 64;
    header.append(padded - unpadded, ' ');
    header.push_back('\n');
    if (header.size() > 65535) throw FormatError("NPY header too long for v1.0");

    std::string bytes;
    bytes.append(kMagic, 6);
    bytes.push_back('\x01');
    bytes.push_back('\x00');
    const uint16_t hlen = static_cast<uint16_t>(header.size());
    bytes.push_back(static_cast<char>(hlen & 0xff));
    bytes.push_back(static_cast<char>(hlen >> 8));
    bytes += header;

    if (dtype == "<f8") {
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = matrix;
        bytes.append(reinterpret_cast<const char*>(rm.data()),
                     static_cast<size_t>(rm.size()) * sizeof(double));
    } else {
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
            matrix.cast<float>();
        bytes.append(reinterpret_cast<const char*>(rm.data()),
                     static_cast<size_t>(rm.size()) * sizeof(float));
    }
    atomic_write_bytes(path, bytes);
}

LayerTag ManifestEntry::tag() const {
    LayerTag t;
    t.model_id = model_id;
    t.method = method;
    t.seed = seed;
    t.layer_index = layer_index;
    t.parity = parity;
    t.block_group = block_group;
    return t;
}

namespace {

json entry_to_json(const ManifestEntry& e) {
    json j{{"model_id", e.model_id}, {"method", to_string(e.method)},   {"seed", e.seed},
           {"layer_index", e.layer_index}, {"parity", to_string(e.parity)}, {"path", e.path},
           {"m", e.m},               {"p", e.p},                       {"dtype", e.dtype}};
    if (e.block_group)
        j["block_group"] = *e.block_group;
    else
        j["block_group"] = nullptr;
    return j;
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    try {
        e.model_id = j.at("model_id").get<std::string>();
        e.method = method_from_string(j.at("method").get<std::string>());
        e.seed = j.at("seed").get<unsigned>();
        e.layer_index = j.at("layer_index").get<int>();
        e.parity = parity_from_string(j.at("parity").get<std::string>());
        if (j.contains("block_group") && !j.at("block_group").is_null())
            e.block_group = j.at("block_group").get<int>();
        e.path = j.at("path").get<std::string>();
        e.m = j.at("m").get<Eigen::Index>();
        e.p = j.at("p").get<Eigen::Index>();
        e.dtype = j.at("dtype").get<std::string>();
    } catch (const json::exception& ex) {
        throw ManifestError(std::string("manifest entry missing or malformed field: ") + ex.what());
    }
    return e;
}

}  // namespace

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& ex) {
        throw ManifestError(std::string("manifest is not valid JSON: ") + ex.what());
    }
    RunManifest m;
    try {
        m.dataset_id = j.at("dataset_id").get<std::string>();
        m.sample_count = j.at("sample_count").get<Eigen::Index>();
        for (const auto& je : j.at("entries")) m.entries.push_back(entry_from_json(je));
    } catch (const json::exception& ex) {
        throw ManifestError(std::string("manifest missing field: ") + ex.what());
    }
    std::set<std::tuple<std::string, int, std::string>> seen;
    for (const auto& e : m.entries) {
        auto key = std::make_tuple(e.model_id, e.layer_index, to_string(e.parity));
        if (!seen.insert(key).second)
            throw ManifestError("duplicate manifest key " + e.tag().describe());
    }
    return m;
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
    json j;
    j["dataset_id"] = manifest.dataset_id;
    j["sample_count"] = manifest.sample_count;
    j["entries"] = json::array();
    for (const auto& e : manifest.entries) j["entries"].push_back(entry_to_json(e));
    atomic_write_bytes(path, j.dump(2) + "\n");
}

std::vector<RepMatrix> load_run(const fs::path& manifest_path) {
    const RunManifest manifest = read_manifest(manifest_path);
    const fs::path base = manifest_path.parent_path();

    std::vector<RepMatrix> reps;
    reps.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        NpyArray arr = read_array(base / e.path);
        if (arr.data.rows() != manifest.sample_count)
            throw AlignmentError(manifest.sample_count, arr.data.rows(), e.tag().describe());
        if (arr.data.rows() != e.m || arr.data.cols() != e.p)
            throw ManifestError("stored shape (" + std::to_string(arr.data.rows()) + ", " +
                                std::to_string(arr.data.cols()) + ") does not match manifest (" +
                                std::to_string(e.m) + ", " + std::to_string(e.p) + ") for " +
                                e.path);
        reps.emplace_back(std::move(arr.data), e.tag());
    }
    validate_alignment(reps);
    std::stable_sort(reps.begin(), reps.end(), [](const RepMatrix& a, const RepMatrix& b) {
        if (a.tag.parity != b.tag.parity)
            return static_cast<int>(a.tag.parity) < static_cast<int>(b.tag.parity);
        return a.tag.layer_index < b.tag.layer_index;
    });
    return reps;
}

}  // namespace repsim
