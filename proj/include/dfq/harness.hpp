#pragma once

#include "dfq/baselines.hpp"
#include "dfq/formats.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dfq {

enum class Method { Optimal, Uniform, APoT };

std::string_view to_string(Method method) noexcept;
Method parse_method(std::string_view text);

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitLayerFailures = 1;
inline constexpr int kExitInvalidArgument = 2;
inline constexpr int kExitIo = 3;

int exit_code_for(const Error &error) noexcept;

// "6", "4..8" or "4-8". InvalidBitWidth outside [1, 16].
std::vector<int> parse_bit_range(std::string_view text);

struct HarnessOptions {
    double tol = 1e-9;
    std::size_t max_iter = 1'000'000;
    unsigned jobs = 1;
    std::ostream *log = nullptr; // warnings; silent when null
};

// Runs body(0..count-1) on up to `jobs` threads.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)> &body);

// Standardized quantizer for one (method, family, bits) cell. Optimal specs
// that hit max_iter are returned unconverged; `converged` says which.
struct StandardQuantizer {
    Method method = Method::Optimal;
    DistributionKind kind = DistributionKind::Gaussian;
    int bits = 1;
    QuantizerSpec spec;
    bool converged = true;
    std::size_t iterations = 0;
    double clip = 0.0;
    bool uneven_split = false;
};

StandardQuantizer build_standard_quantizer(Method method, DistributionKind kind, int bits,
                                           const HarnessOptions &options);

// Same cell rescaled onto a fitted model.
QuantizerSpec place_quantizer(const StandardQuantizer &q, const DistributionModel &model);

struct LayerFit {
    std::string name;
    std::size_t count = 0;
    std::optional<FitReport> fit;
    std::string error;
    ErrorCode error_code = ErrorCode::InvalidArgument;
};

struct ComparisonRow {
    std::string layer;
    int bits = 0;
    Method method = Method::Optimal;
    std::optional<DistributionKind> fitted_kind;
    double ks_gaussian = 0.0;
    double ks_laplace = 0.0;
    std::optional<double> analytic_mse;
    std::optional<double> empirical_mse;
    std::string error;
};

// RFC 4180 with CRLF line ends; numbers to 9 significant digits. Failed
// cells leave the numeric fields empty.
std::string comparison_csv(const std::vector<ComparisonRow> &rows);
std::string comparison_json(const std::vector<ComparisonRow> &rows);

int cmd_tables(const std::vector<int> &bits, const std::filesystem::path &out, const HarnessOptions &options);
int cmd_fit(const std::filesystem::path &manifest, const std::filesystem::path &out,
            const HarnessOptions &options);
int cmd_quantize(const std::filesystem::path &manifest, int bits, Method method, const std::filesystem::path &out_dir,
                 const HarnessOptions &options);
// Writes `out_csv` and a JSON twin with the extension replaced by ".json".
int cmd_compare(const std::filesystem::path &manifest, const std::vector<int> &bits,
                const std::filesystem::path &out_csv, const HarnessOptions &options);

// Synthetic manifest: layer i is drawn from Gaussian or Laplace ("mixed"
// alternates, starting with Gaussian) with its own location and scale.
struct SynthOptions {
    std::size_t layers = 3;
    std::size_t size = 65536;
    std::string kind = "mixed";
    std::uint64_t seed = 42;
    std::string model_name = "synthetic";
};

// Location and scale used for synthetic layer i.
DistributionModel synth_layer_model(DistributionKind kind, std::size_t index);

int cmd_synth(const std::filesystem::path &out_dir, const SynthOptions &synth, const HarnessOptions &options);

// File stem for a tensor name: anything outside [A-Za-z0-9._-] becomes '_'.
std::string sanitize_name(std::string_view name);

} // namespace dfq
