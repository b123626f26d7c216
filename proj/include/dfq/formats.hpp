#pragma once

#include "dfq/codec.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dfq {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kQtnsVersion = 1;
inline constexpr std::uint8_t kQdfqVersion = 1;

// QTNS: "QTNS", version byte, u32 LE header length, JSON header
// {name, dtype, shape}, then raw little-endian samples. dtype "f32" is
// native; "f64" payloads are narrowed to f32 on load.
struct LoadedTensor {
    Tensor tensor;
    bool narrowed_from_f64 = false;
};

Bytes serialize_qtns(const Tensor &tensor);
LoadedTensor parse_qtns(std::span<const std::uint8_t> bytes);

// QDFQ: "QDFQ", version byte, u32 LE header length, JSON header {name,
// shape, bits, codebook (17 significant digit strings), code_bytes}, then the
// packed codes.
Bytes serialize_qdfq(const QuantizedTensor &q);
QuantizedTensor parse_qdfq(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path &path);
// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path &path, const std::string &text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

struct ManifestEntry {
    std::string name;
    std::vector<std::size_t> shape;
    std::string file; // relative to the manifest's directory
    std::string sha256;
};

struct Manifest {
    std::string model_name;
    std::vector<ManifestEntry> tensors;
    std::filesystem::path base_dir;
};

Manifest parse_manifest(const std::string &json_text, const std::filesystem::path &base_dir);
Manifest read_manifest(const std::filesystem::path &path);
std::string serialize_manifest(const Manifest &manifest);

// Reads the entry's file, checks its hash and that the header agrees with
// the manifest. FormatError on any mismatch, IoError if unreadable.
LoadedTensor load_manifest_tensor(const Manifest &manifest, const ManifestEntry &entry);

// One row of a quantizer table document.
struct TableEntry {
    std::string method = "optimal";
    DistributionKind model_kind = DistributionKind::Gaussian;
    int bits = 1;
    std::vector<double> levels;
    std::vector<double> interior_boundaries;
    double tol = 0.0;
    std::size_t iterations = 0;
    double distortion = 0.0;
    bool converged = true;
    double clip = 0.0; // baselines only
};

// Numbers are written with 17 significant digits.
std::string serialize_table(const std::vector<TableEntry> &entries);
std::vector<TableEntry> parse_table(const std::string &json_text);

std::string format_significant(double value, int digits);

} // namespace dfq
