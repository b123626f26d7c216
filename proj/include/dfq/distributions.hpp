#pragma once

#include <span>
#include <string_view>

namespace dfq {

enum class DistributionKind { Gaussian, Laplace };

std::string_view to_string(DistributionKind kind) noexcept;
DistributionKind parse_distribution_kind(std::string_view text);

// Interval probabilities below this are treated as empty.
inline constexpr double kMassFloor = 1e-300;

// Gaussian (location = mean, scale = standard deviation) or Laplace
// (location = median, scale = diversity b). Immutable.
class DistributionModel {
public:
    DistributionModel(DistributionKind kind, double location, double scale);

    static DistributionModel standard(DistributionKind kind) { return {kind, 0.0, 1.0}; }

    DistributionKind kind() const noexcept { return kind_; }
    double location() const noexcept { return location_; }
    double scale() const noexcept { return scale_; }
    bool is_standard() const noexcept { return location_ == 0.0 && scale_ == 1.0; }

    double standardize(double x) const noexcept { return (x - location_) / scale_; }
    double restore(double z) const noexcept { return location_ + scale_ * z; }

    // Same family re-expressed in a frame where `offset` maps to 0 and
    // `factor` to 1.
    DistributionModel in_frame(double offset, double factor) const;

    friend bool operator==(const DistributionModel &, const DistributionModel &) = default;

private:
    DistributionKind kind_;
    double location_;
    double scale_;
};

double pdf(const DistributionModel &model, double x) noexcept;
double cdf(const DistributionModel &model, double x) noexcept;

// P(a < X < b), evaluated without subtracting two CDFs near 1.
double interval_mass(const DistributionModel &model, double a, double b);

// Probability, conditional mean and conditional variance of a standard
// model restricted to (a, b). Either bound may be infinite. The variance is
// left at zero unless requested. Instantiated for double and long double.
template <class Real>
struct IntervalMoments {
    Real mass;
    Real mean;
    Real variance;
};

template <class Real>
IntervalMoments<Real> standard_interval_moments(DistributionKind kind, Real a, Real b,
                                                bool with_variance = true);

// E[X | a < X < b]. Throws ZeroMassInterval when the interval carries
// less than kMassFloor probability.
double truncated_mean(const DistributionModel &model, double a, double b);

// Integral of (x - y)^2 f(x) over (a, b), not normalised by the mass.
double truncated_second_moment(const DistributionModel &model, double a, double b, double y);

// Maximum-likelihood fits. Both throw DegenerateData for fewer than two
// samples or identical samples.
DistributionModel fit_gaussian_mle(std::span<const double> samples);
DistributionModel fit_laplace_mle(std::span<const double> samples);

// Two-sided one-sample Kolmogorov-Smirnov distance between the empirical
// CDF of `samples` and `model`.
double ks_statistic(std::span<const double> samples, const DistributionModel &model);

struct FitReport {
    DistributionModel gaussian;
    DistributionModel laplace;
    double ks_gaussian;
    double ks_laplace;
    DistributionKind selected;

    const DistributionModel &selected_model() const noexcept {
        return selected == DistributionKind::Gaussian ? gaussian : laplace;
    }
};

// Fits both families and keeps the one with the smaller K-S distance.
// Equal distances select Gaussian.
FitReport select_distribution(std::span<const double> samples);

} // namespace dfq
