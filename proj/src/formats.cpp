#include "dfq/formats.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

namespace dfq {

using nlohmann::json;

namespace {

constexpr char kQtnsMagic[4] = {'Q', 'T', 'N', 'S'};
constexpr char kQdfqMagic[4] = {'Q', 'D', 'F', 'Q'};

void put_u32(Bytes &out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(std::span<const std::uint8_t> bytes, std::size_t at, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
        v |= static_cast<std::uint64_t>(bytes[at + i]) << (8 * i);
    return v;
}

// Magic, version and JSON header shared by both container formats.
// Returns the header and the offset of the payload.
std::pair<json, std::size_t> read_envelope(std::span<const std::uint8_t> bytes, const char (&magic)[4],
                                           std::uint8_t version) {
    const std::string tag(magic, 4);
    if (bytes.size() < 9 || std::memcmp(bytes.data(), magic, 4) != 0)
        throw Error(ErrorCode::FormatError, "missing " + tag + " magic");
    if (bytes[4] != version)
        throw Error(ErrorCode::FormatError, tag + " version " + std::to_string(bytes[4]) + " not supported");
    const std::size_t header_len = get_le(bytes, 5, 4);
    if (bytes.size() < 9 + header_len)
        throw Error(ErrorCode::FormatError, tag + " header truncated");
    const std::string text(reinterpret_cast<const char *>(bytes.data() + 9), header_len);
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, tag + " header is not JSON: " + e.what());
    }
    return {std::move(header), 9 + header_len};
}

Bytes write_envelope(const char (&magic)[4], std::uint8_t version, const std::string &header) {
    Bytes out(magic, magic + 4);
    out.push_back(version);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    return out;
}

std::vector<std::size_t> read_shape(const json &j, const std::string &what) {
    if (!j.is_array())
        throw Error(ErrorCode::FormatError, what + " shape must be an array");
    std::vector<std::size_t> shape;
    for (const auto &d : j) {
        if (!d.is_number_unsigned())
            throw Error(ErrorCode::FormatError, what + " shape entries must be non-negative integers");
        shape.push_back(d.get<std::size_t>());
    }
    return shape;
}

std::size_t product(const std::vector<std::size_t> &shape) {
    std::size_t n = 1;
    for (std::size_t d : shape)
        n *= d;
    return n;
}

template <class T>
T field(const json &j, const char *key, const std::string &what) {
    if (!j.contains(key))
        throw Error(ErrorCode::FormatError, what + " is missing '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, what + " field '" + key + "': " + e.what());
    }
}

std::string numbers(const std::vector<double> &values) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            out += ", ";
        out += format_significant(values[i], 17);
    }
    return out + "]";
}

} // namespace

std::string format_significant(double value, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, value);
    return buf;
}

Bytes serialize_qtns(const Tensor &tensor) {
    tensor.validate();
    json header = {{"name", tensor.name}, {"dtype", "f32"}, {"shape", tensor.shape}};
    Bytes out = write_envelope(kQtnsMagic, kQtnsVersion, header.dump());
    out.reserve(out.size() + 4 * tensor.values.size());
    for (float v : tensor.values)
        put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

LoadedTensor parse_qtns(std::span<const std::uint8_t> bytes) {
    auto [header, offset] = read_envelope(bytes, kQtnsMagic, kQtnsVersion);
    LoadedTensor loaded;
    Tensor &t = loaded.tensor;
    t.name = field<std::string>(header, "name", "QTNS header");
    t.shape = read_shape(header.value("shape", json()), "QTNS");
    const std::string dtype = field<std::string>(header, "dtype", "QTNS header");
    const std::size_t n = product(t.shape);
    int width = 0;
    if (dtype == "f32")
        width = 4;
    else if (dtype == "f64")
        width = 8;
    else
        throw Error(ErrorCode::FormatError, "QTNS dtype '" + dtype + "' not supported");
    if (bytes.size() - offset != n * width)
        throw Error(ErrorCode::FormatError, "QTNS payload of " + std::to_string(bytes.size() - offset) +
                                                " bytes does not match shape");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = offset + i * width;
        if (width == 4)
            t.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, at, 4)));
        else
            t.values[i] = static_cast<float>(std::bit_cast<double>(get_le(bytes, at, 8)));
    }
    loaded.narrowed_from_f64 = width == 8;
    t.validate();
    return loaded;
}

Bytes serialize_qdfq(const QuantizedTensor &q) {
    q.validate();
    json codebook = json::array();
    for (double c : q.codebook)
        codebook.push_back(format_significant(c, 17));
    const Bytes packed = pack_codes(q.codes, q.bits);
    json header = {{"name", q.name},
                   {"shape", q.shape},
                   {"bits", q.bits},
                   {"codebook", codebook},
                   {"code_bytes", packed.size()}};
    Bytes out = write_envelope(kQdfqMagic, kQdfqVersion, header.dump());
    out.insert(out.end(), packed.begin(), packed.end());
    return out;
}

QuantizedTensor parse_qdfq(std::span<const std::uint8_t> bytes) {
    auto [header, offset] = read_envelope(bytes, kQdfqMagic, kQdfqVersion);
    QuantizedTensor q;
    q.name = field<std::string>(header, "name", "QDFQ header");
    q.shape = read_shape(header.value("shape", json()), "QDFQ");
    q.bits = field<int>(header, "bits", "QDFQ header");
    require_bit_width(q.bits);
    for (const auto &entry : field<std::vector<std::string>>(header, "codebook", "QDFQ header")) {
        try {
            std::size_t used = 0;
            q.codebook.push_back(std::stod(entry, &used));
            if (used != entry.size())
                throw std::invalid_argument(entry);
        } catch (const std::exception &) {
            throw Error(ErrorCode::FormatError, "QDFQ codebook entry '" + entry + "' is not a number");
        }
    }
    const std::size_t code_bytes = field<std::size_t>(header, "code_bytes", "QDFQ header");
    if (bytes.size() - offset != code_bytes)
        throw Error(ErrorCode::FormatError, "QDFQ payload length disagrees with header");
    const std::size_t n = product(q.shape);
    if (code_bytes != packed_size(n, q.bits))
        throw Error(ErrorCode::FormatError, "QDFQ code_bytes does not match shape and bits");
    q.codes = unpack_codes(bytes.subspan(offset), q.bits, n);
    q.validate();
    return q;
}

Bytes read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw Error(ErrorCode::IoError, "failed reading '" + path.string() + "'");
    return data;
}

void write_file_atomic(const std::filesystem::path &path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::IoError, "cannot create '" + tmp.string() + "'");
        out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out)
            throw Error(ErrorCode::IoError, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot move output into '" + path.string() + "'");
    }
}

void write_file_atomic(const std::filesystem::path &path, const std::string &text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::IoError, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

Manifest parse_manifest(const std::string &json_text, const std::filesystem::path &base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, std::string("manifest is not JSON: ") + e.what());
    }
    Manifest m;
    m.base_dir = base_dir;
    m.model_name = doc.value("model_name", std::string());
    std::set<std::string> seen;
    for (const auto &t : doc.value("tensors", json::array())) {
        ManifestEntry e;
        e.name = field<std::string>(t, "name", "manifest tensor");
        e.shape = read_shape(t.value("shape", json()), "manifest tensor '" + e.name + "'");
        e.file = field<std::string>(t, "file", "manifest tensor '" + e.name + "'");
        e.sha256 = field<std::string>(t, "sha256", "manifest tensor '" + e.name + "'");
        if (!seen.insert(e.name).second)
            throw Error(ErrorCode::FormatError, "duplicate tensor name '" + e.name + "' in manifest");
        m.tensors.push_back(std::move(e));
    }
    return m;
}

Manifest read_manifest(const std::filesystem::path &path) {
    const Bytes bytes = read_file(path);
    return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

std::string serialize_manifest(const Manifest &manifest) {
    json tensors = json::array();
    for (const auto &e : manifest.tensors)
        tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"file", e.file}, {"sha256", e.sha256}});
    json doc = {{"model_name", manifest.model_name}, {"tensors", tensors}};
    return doc.dump(2) + "\n";
}

LoadedTensor load_manifest_tensor(const Manifest &manifest, const ManifestEntry &entry) {
    const Bytes bytes = read_file(manifest.base_dir / entry.file);
    const std::string digest = sha256_hex(bytes);
    if (digest != entry.sha256)
        throw Error(ErrorCode::FormatError, "sha256 mismatch for '" + entry.file + "'");
    LoadedTensor loaded = parse_qtns(bytes);
    if (loaded.tensor.name != entry.name || loaded.tensor.shape != entry.shape)
        throw Error(ErrorCode::FormatError, "'" + entry.file + "' header disagrees with manifest");
    return loaded;
}

std::string serialize_table(const std::vector<TableEntry> &entries) {
    std::ostringstream out;
    out << "{\n  \"specs\": [";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const TableEntry &e = entries[i];
        out << (i ? ",\n" : "\n") << "    {\n"
            << "      \"method\": " << json(e.method).dump() << ",\n"
            << "      \"model_kind\": \"" << to_string(e.model_kind) << "\",\n"
            << "      \"bits\": " << e.bits << ",\n"
            << "      \"levels\": " << numbers(e.levels) << ",\n"
            << "      \"interior_boundaries\": " << numbers(e.interior_boundaries) << ",\n"
            << "      \"tol\": " << format_significant(e.tol, 17) << ",\n"
            << "      \"iterations\": " << e.iterations << ",\n"
            << "      \"distortion\": " << format_significant(e.distortion, 17) << ",\n"
            << "      \"converged\": " << (e.converged ? "true" : "false");
        if (e.method != "optimal")
            out << ",\n      \"clip\": " << format_significant(e.clip, 17);
        out << "\n    }";
    }
    out << (entries.empty() ? "]\n}\n" : "\n  ]\n}\n");
    return out.str();
}

std::vector<TableEntry> parse_table(const std::string &json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::FormatError, std::string("table is not JSON: ") + e.what());
    }
    std::vector<TableEntry> entries;
    for (const auto &s : doc.value("specs", json::array())) {
        TableEntry e;
        e.method = s.value("method", std::string("optimal"));
        e.model_kind = parse_distribution_kind(field<std::string>(s, "model_kind", "table spec"));
        e.bits = field<int>(s, "bits", "table spec");
        e.levels = field<std::vector<double>>(s, "levels", "table spec");
        e.interior_boundaries = field<std::vector<double>>(s, "interior_boundaries", "table spec");
        e.tol = field<double>(s, "tol", "table spec");
        e.iterations = field<std::size_t>(s, "iterations", "table spec");
        e.distortion = field<double>(s, "distortion", "table spec");
        e.converged = s.value("converged", true);
        e.clip = s.value("clip", 0.0);
        entries.push_back(std::move(e));
    }
    return entries;
}

} // namespace dfq
