#pragma once

#include "dfq/distributions.hpp"
#include "dfq/error.hpp"

#include <cstddef>
#include <vector>

namespace dfq {

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 16;

void require_bit_width(int bits, int lo = kMinBits, int hi = kMaxBits);

// A K = 2^bits level scalar quantizer in standardized coordinates.
// Interval i is [boundaries[i], boundaries[i + 1]) and maps to levels[i].
// The outer boundaries are infinite for Lloyd-Max quantizers; finite outer
// boundaries describe a clipping range whose tails saturate to the
// outermost levels.
struct QuantizerSpec {
    int bits = 1;
    DistributionKind model_kind = DistributionKind::Gaussian;
    std::vector<double> levels;
    std::vector<double> boundaries;
    double location_offset = 0.0;
    double scale_factor = 1.0;

    std::size_t level_count() const noexcept { return levels.size(); }
    std::vector<double> interior_boundaries() const;
    // Levels mapped back to the original weight domain.
    std::vector<double> codebook() const;
    // Throws InvalidArgument when sizes, ordering or level placement are off.
    void validate() const;
};

struct DistortionReport {
    double clipping_error = 0.0;
    double quantization_error = 0.0;
    double total = 0.0;
    std::vector<double> per_interval;
    double scale_factor = 1.0;

    // Distortion in squared original units.
    double original_total() const noexcept { return total * scale_factor * scale_factor; }
};

struct Residuals {
    double level = 0.0;
    double boundary = 0.0;
};

enum class InitScheme {
    Symmetric, // y_i = 2(i - (K+1)/2)/K
    Literal,   // y_i = 2i/K
};

struct OptimizeOptions {
    double tol = 1e-9;
    std::size_t max_iter = 1'000'000;
    InitScheme init = InitScheme::Symmetric;
    // Extended-precision distortion after every iteration.
    bool record_distortion = true;
    // Full level/boundary copies per iteration. Memory grows as K * iterations.
    bool record_snapshots = false;
};

struct IterationSnapshot {
    std::vector<double> levels;
    std::vector<double> boundaries;
};

// distortion[0] is the initial spec; distortion[t] follows iteration t.
// Values are long double so that the tiny decrements of late iterations
// remain representable.
struct IterationTrace {
    std::vector<long double> distortion;
    std::vector<IterationSnapshot> snapshots;
    std::size_t iteration_count = 0;
    bool converged = false;
    double final_residual = 0.0;
};

struct OptimizeResult {
    QuantizerSpec spec;
    IterationTrace trace;
};

class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string &message, OptimizeResult partial)
        : Error(ErrorCode::NoConvergence, message), partial_(std::move(partial)) {}

    const OptimizeResult &partial() const noexcept { return partial_; }

private:
    OptimizeResult partial_;
};

QuantizerSpec init_spec(int bits, DistributionKind kind, InitScheme init = InitScheme::Symmetric);

// The model argument of the functions below is expressed in original
// coordinates; it is moved into the spec's standardized frame first.

// Conditional mean step: every level becomes E[X | interval].
QuantizerSpec update_levels(const QuantizerSpec &spec, const DistributionModel &model);
// Midpoint step: interior boundaries become midpoints of adjacent levels.
QuantizerSpec update_boundaries(const QuantizerSpec &spec);

// Lloyd-Max fixed-point iteration. Stops once the largest level change of
// an iteration drops below options.tol. Throws NoConvergenceError (holding
// the last spec and the trace) when max_iter runs out or an interval loses
// all its mass.
OptimizeResult optimize(const DistributionModel &model, int bits, const OptimizeOptions &options = {});

DistortionReport distortion(const QuantizerSpec &spec, const DistributionModel &model);
long double precise_distortion(const QuantizerSpec &spec, const DistributionModel &model);
Residuals residuals(const QuantizerSpec &spec, const DistributionModel &model);

// Mean squared error of clipping alone: mass below alpha moved to alpha and
// mass above beta moved to beta.
double clipping_error(const DistributionModel &model, double alpha, double beta);

} // namespace dfq
