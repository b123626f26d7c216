#include "dfq/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dfq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Below this interval probability the iteration is considered collapsed.
constexpr double kCollapseMass = 1e-12;

// Contribution of one interval, integrated in the frame of `frame` (a
// possibly non-standard model expressed in spec coordinates).
template <class Real>
Real interval_error(const DistributionModel &frame, double a, double b, double level) {
    const Real loc = frame.location();
    const Real s = frame.scale();
    const Real za = (Real(a) - loc) / s;
    const Real zb = (Real(b) - loc) / s;
    const auto m = standard_interval_moments<Real>(frame.kind(), za, zb);
    if (!(m.mass >= Real(kMassFloor)))
        return 0;
    const Real offset = m.mean - (Real(level) - loc) / s;
    return s * s * m.mass * (m.variance + offset * offset);
}

void set_midpoints(QuantizerSpec &spec) {
    const std::size_t k = spec.levels.size();
    spec.boundaries.assign(k + 1, 0.0);
    spec.boundaries.front() = -kInf;
    spec.boundaries.back() = kInf;
    for (std::size_t i = 1; i < k; ++i)
        spec.boundaries[i] = (spec.levels[i - 1] + spec.levels[i]) / 2;
}

DistributionModel spec_frame(const QuantizerSpec &spec, const DistributionModel &model) {
    return model.in_frame(spec.location_offset, spec.scale_factor);
}

// One conditional-mean sweep in place. Returns the largest level change and
// the smallest interval mass seen.
std::pair<double, double> conditional_mean_sweep(QuantizerSpec &spec, const DistributionModel &frame) {
    double max_change = 0.0;
    double min_mass = kInf;
    const double loc = frame.location();
    const double s = frame.scale();
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
        const auto m = standard_interval_moments<double>(frame.kind(), (spec.boundaries[i] - loc) / s,
                                                         (spec.boundaries[i + 1] - loc) / s, false);
        min_mass = std::min(min_mass, m.mass);
        if (!(m.mass >= kMassFloor))
            throw Error(ErrorCode::ZeroMassInterval, "interval " + std::to_string(i) + " has no mass");
        const double updated = loc + s * m.mean;
        max_change = std::max(max_change, std::fabs(updated - spec.levels[i]));
        spec.levels[i] = updated;
    }
    return {max_change, min_mass};
}

} // namespace

void require_bit_width(int bits, int lo, int hi) {
    if (bits < lo || bits > hi)
        throw Error(ErrorCode::InvalidBitWidth, "bit width " + std::to_string(bits) + " outside [" +
                                                    std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

std::vector<double> QuantizerSpec::interior_boundaries() const {
    if (boundaries.size() < 2)
        return {};
    return {boundaries.begin() + 1, boundaries.end() - 1};
}

std::vector<double> QuantizerSpec::codebook() const {
    std::vector<double> out(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i)
        out[i] = location_offset + scale_factor * levels[i];
    return out;
}

void QuantizerSpec::validate() const {
    if (!(scale_factor > 0.0) || !std::isfinite(scale_factor) || !std::isfinite(location_offset))
        throw Error(ErrorCode::InvalidArgument, "spec scale must be finite and positive");
    if (levels.empty() || boundaries.size() != levels.size() + 1)
        throw Error(ErrorCode::InvalidArgument, "spec needs K levels and K + 1 boundaries");
    if (bits >= kMinBits && bits <= kMaxBits && levels.size() != (std::size_t{1} << bits))
        throw Error(ErrorCode::InvalidArgument, "level count does not match bit width");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!std::isfinite(levels[i]))
            throw Error(ErrorCode::InvalidArgument, "non-finite level");
        if (!(boundaries[i] < levels[i] && levels[i] < boundaries[i + 1]) &&
            !(i == 0 && boundaries[0] == levels[0]) &&
            !(i + 1 == levels.size() && boundaries[i + 1] == levels[i]))
            throw Error(ErrorCode::InvalidArgument,
                        "level " + std::to_string(i) + " lies outside its interval");
    }
}

QuantizerSpec init_spec(int bits, DistributionKind kind, InitScheme init) {
    require_bit_width(bits);
    QuantizerSpec spec;
    spec.bits = bits;
    spec.model_kind = kind;
    const std::size_t k = std::size_t{1} << bits;
    const double kd = static_cast<double>(k);
    spec.levels.resize(k);
    for (std::size_t i = 1; i <= k; ++i) {
        const double id = static_cast<double>(i);
        spec.levels[i - 1] = init == InitScheme::Symmetric ? 2.0 * (id - (kd + 1.0) / 2.0) / kd : 2.0 * id / kd;
    }
    set_midpoints(spec);
    return spec;
}

QuantizerSpec update_levels(const QuantizerSpec &spec, const DistributionModel &model) {
    QuantizerSpec next = spec;
    conditional_mean_sweep(next, spec_frame(spec, model));
    return next;
}

QuantizerSpec update_boundaries(const QuantizerSpec &spec) {
    for (std::size_t i = 1; i < spec.levels.size(); ++i)
        if (!(spec.levels[i - 1] < spec.levels[i]))
            throw Error(ErrorCode::InvalidArgument, "levels must be strictly increasing");
    QuantizerSpec next = spec;
    set_midpoints(next);
    return next;
}

OptimizeResult optimize(const DistributionModel &model, int bits, const OptimizeOptions &options) {
    require_bit_width(bits);
    if (!(options.tol > 0.0) || options.max_iter < 1)
        throw Error(ErrorCode::InvalidArgument, "optimize needs tol > 0 and max_iter >= 1");

    OptimizeResult result;
    QuantizerSpec &spec = result.spec;
    IterationTrace &trace = result.trace;
    spec = init_spec(bits, model.kind(), options.init);
    spec.location_offset = model.location();
    spec.scale_factor = model.scale();
    const DistributionModel frame = DistributionModel::standard(model.kind());

    auto record = [&] {
        if (options.record_distortion)
            trace.distortion.push_back(precise_distortion(spec, model));
        if (options.record_snapshots)
            trace.snapshots.push_back({spec.levels, spec.boundaries});
    };
    record();

    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        const auto [change, min_mass] = conditional_mean_sweep(spec, frame);
        set_midpoints(spec);
        trace.iteration_count = iter;
        trace.final_residual = change;
        record();
        if (min_mass < kCollapseMass)
            throw NoConvergenceError("interval mass collapsed to " + std::to_string(min_mass),
                                     std::move(result));
        if (change < options.tol) {
            trace.converged = true;
            return result;
        }
    }
    throw NoConvergenceError("no convergence after " + std::to_string(options.max_iter) + " iterations",
                             std::move(result));
}

DistortionReport distortion(const QuantizerSpec &spec, const DistributionModel &model) {
    spec.validate();
    const DistributionModel frame = spec_frame(spec, model);
    DistortionReport report;
    report.scale_factor = spec.scale_factor;
    const std::size_t k = spec.levels.size();
    report.per_interval.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        report.per_interval[i] = interval_error<double>(frame, spec.boundaries[i], spec.boundaries[i + 1],
                                                        spec.levels[i]);
        report.quantization_error += report.per_interval[i];
    }
    // Tails beyond finite outer boundaries saturate onto the outermost levels.
    if (std::isfinite(spec.boundaries.front()))
        report.clipping_error += interval_error<double>(frame, -kInf, spec.boundaries.front(), spec.levels.front());
    if (std::isfinite(spec.boundaries.back()))
        report.clipping_error += interval_error<double>(frame, spec.boundaries.back(), kInf, spec.levels.back());
    report.total = report.clipping_error + report.quantization_error;
    return report;
}

long double precise_distortion(const QuantizerSpec &spec, const DistributionModel &model) {
    const DistributionModel frame = spec_frame(spec, model);
    const std::size_t k = spec.levels.size();
    long double total = 0;
    for (std::size_t i = 0; i < k; ++i)
        total += interval_error<long double>(frame, spec.boundaries[i], spec.boundaries[i + 1], spec.levels[i]);
    if (std::isfinite(spec.boundaries.front()))
        total += interval_error<long double>(frame, -kInf, spec.boundaries.front(), spec.levels.front());
    if (std::isfinite(spec.boundaries.back()))
        total += interval_error<long double>(frame, spec.boundaries.back(), kInf, spec.levels.back());
    return total;
}

Residuals residuals(const QuantizerSpec &spec, const DistributionModel &model) {
    const DistributionModel frame = spec_frame(spec, model);
    Residuals r;
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
        const double target = truncated_mean(frame, spec.boundaries[i], spec.boundaries[i + 1]);
        r.level = std::max(r.level, std::fabs(spec.levels[i] - target));
    }
    for (std::size_t i = 1; i < spec.levels.size(); ++i) {
        const double mid = (spec.levels[i - 1] + spec.levels[i]) / 2;
        r.boundary = std::max(r.boundary, std::fabs(spec.boundaries[i] - mid));
    }
    return r;
}

double clipping_error(const DistributionModel &model, double alpha, double beta) {
    if (!(alpha < beta))
        throw Error(ErrorCode::InvalidArgument, "clipping range needs alpha < beta");
    double total = 0.0;
    if (std::isfinite(alpha))
        total += truncated_second_moment(model, -kInf, alpha, alpha);
    if (std::isfinite(beta))
        total += truncated_second_moment(model, beta, kInf, beta);
    return total;
}

} // namespace dfq
