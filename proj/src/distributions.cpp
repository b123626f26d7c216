#include "dfq/distributions.hpp"

#include "dfq/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace dfq {

std::string_view to_string(DistributionKind kind) noexcept {
    return kind == DistributionKind::Gaussian ? "gaussian" : "laplace";
}

DistributionKind parse_distribution_kind(std::string_view text) {
    if (text == "gaussian" || text == "Gaussian" || text == "normal")
        return DistributionKind::Gaussian;
    if (text == "laplace" || text == "Laplace")
        return DistributionKind::Laplace;
    throw Error(ErrorCode::InvalidArgument, "unknown distribution '" + std::string(text) + "'");
}

DistributionModel::DistributionModel(DistributionKind kind, double location, double scale)
    : kind_(kind), location_(location), scale_(scale) {
    if (!std::isfinite(location) || !std::isfinite(scale) || !(scale > 0.0))
        throw Error(ErrorCode::InvalidArgument, "distribution needs finite location and scale > 0");
}

DistributionModel DistributionModel::in_frame(double offset, double factor) const {
    return {kind_, (location_ - offset) / factor, scale_ / factor};
}

namespace {

template <class Real>
constexpr Real kInvSqrt2Pi = Real(0.398942280401432677939946059934381868L);

template <class Real>
constexpr Real kSqrtHalf = Real(0.707106781186547524400844362104849039L);

// Gauss-Legendre rule of the given order on [-1, 1], built by Newton
// iteration on the Legendre recurrence.
template <int Order>
struct GaussLegendre {
    std::array<long double, Order> nodes{};
    std::array<long double, Order> weights{};

    GaussLegendre() {
        for (int i = 0; i < Order; ++i) {
            long double x = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (Order + 0.5L));
            long double dp = 0;
            for (int iter = 0; iter < 100; ++iter) {
                long double p0 = 1, p1 = x;
                for (int k = 2; k <= Order; ++k) {
                    long double pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = pk;
                }
                dp = Order * (x * p1 - p0) / (x * x - 1);
                long double dx = p1 / dp;
                x -= dx;
                if (std::fabs(dx) < 1e-19L)
                    break;
            }
            nodes[i] = x;
            weights[i] = 2 / ((1 - x * x) * dp * dp);
        }
    }
};

template <int Order>
const GaussLegendre<Order> &gauss_legendre() {
    static const GaussLegendre<Order> rule;
    return rule;
}

template <class Real>
Real std_normal_density(Real x) {
    if (std::isinf(x))
        return 0;
    return kInvSqrt2Pi<Real> * std::exp(-x * x / 2);
}

// phi(a) - phi(b) without cancellation when a and b are close.
template <class Real>
Real density_drop(Real a, Real b) {
    if (std::isinf(a) || std::isinf(b))
        return std_normal_density(a) - std_normal_density(b);
    if (std::fabs(a) <= std::fabs(b))
        return -std_normal_density(a) * std::expm1(-(b - a) * (b + a) / 2);
    return std_normal_density(b) * std::expm1(-(a - b) * (a + b) / 2);
}

template <class Real>
Real gaussian_mass(Real a, Real b) {
    // erfc differences in the tails, erf differences near the centre where
    // erf keeps full relative precision.
    const Real s = kSqrtHalf<Real>;
    if (a * s >= Real(0.5))
        return (std::erfc(a * s) - std::erfc(b * s)) / 2;
    if (b * s <= Real(-0.5))
        return (std::erfc(-b * s) - std::erfc(-a * s)) / 2;
    return (std::erf(b * s) - std::erf(a * s)) / 2;
}

// Mass and central moments of a narrow interval by Gauss-Legendre
// quadrature about its midpoint. There the closed-form variance would cancel
// to roundoff, and the quadrature is exact to working precision.
template <class Real, class Rule>
IntervalMoments<Real> gaussian_narrow_moments(Real a, Real b, const Rule &rule) {
    const Real half = (b - a) / 2;
    const Real mid = (a + b) / 2;
    Real s0 = 0, s1 = 0, s2 = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const Real t = half * static_cast<Real>(rule.nodes[i]);
        const Real w = static_cast<Real>(rule.weights[i]) * std::exp(-t * mid - t * t / 2);
        s0 += w;
        s1 += w * t;
        s2 += w * t * t;
    }
    const Real shift = s1 / s0;
    return {half * std_normal_density(mid) * s0, mid + shift, std::max(Real(0), s2 / s0 - shift * shift)};
}

template <class Real>
IntervalMoments<Real> gaussian_moments(Real a, Real b, bool with_variance) {
    if (with_variance && !std::isinf(a) && !std::isinf(b)) {
        // Across the interval the density varies like exp(-mid * t); that
        // spread decides whether and at which order quadrature is used.
        const Real spread = (b - a) * (std::max(std::fabs(a), std::fabs(b)) + 1);
        if (spread <= Real(0.2))
            return gaussian_narrow_moments(a, b, gauss_legendre<6>());
        if (spread <= 2)
            return gaussian_narrow_moments(a, b, gauss_legendre<10>());
    }

    IntervalMoments<Real> m{};
    m.mass = gaussian_mass(a, b);
    if (!(m.mass > 0))
        return {0, std::isinf(a) ? b : (std::isinf(b) ? a : (a + b) / 2), 0};

    // Conditional mean sqrt(2/pi) (e^{-a^2/2} - e^{-b^2/2}) / (erf(b/sqrt2) - erf(a/sqrt2)),
    // with both differences taken in their stable forms.
    m.mean = density_drop(a, b) / m.mass;
    if (!with_variance)
        return m;

    const Real a_term = std::isinf(a) ? Real(0) : a * std_normal_density(a);
    const Real b_term = std::isinf(b) ? Real(0) : b * std_normal_density(b);
    m.variance = std::max(Real(0), 1 + (a_term - b_term) / m.mass - m.mean * m.mean);
    return m;
}

// sinh(u) - u for small u, by its Taylor series.
template <class Real>
Real sinh_minus_identity(Real u) {
    const Real u2 = u * u;
    Real term = u * u2 / 6;
    Real sum = term;
    for (int k = 2; k < 30; ++k) {
        term *= u2 / Real((2 * k) * (2 * k + 1));
        sum += term;
        if (term < sum * std::numeric_limits<Real>::epsilon())
            break;
    }
    return sum;
}

// Standard Laplace restricted to (a, b) with 0 <= a < b: an exponential
// with unit rate shifted by a and truncated at width d = b - a.
template <class Real>
IntervalMoments<Real> laplace_positive_piece(Real a, Real b, bool with_variance) {
    IntervalMoments<Real> m{};
    const Real d = b - a;
    const bool unbounded = std::isinf(d);
    m.mass = std::exp(-a) / 2 * (unbounded ? Real(1) : -std::expm1(-d));

    // Same quantity as ((a + 1) e^{-a} - (b + 1) e^{-b}) / (e^{-a} - e^{-b}),
    // rearranged around a so that unbounded and narrow intervals stay exact.
    m.mean = a + 1 - (unbounded ? Real(0) : d / std::expm1(d));

    if (!with_variance) {
        m.variance = 0;
    } else if (unbounded) {
        m.variance = 1;
    } else {
        const Real u = d / 2;
        if (u < Real(0.5)) {
            const Real sh = std::sinh(u);
            const Real one_minus_r = sinh_minus_identity(u) / sh;
            const Real r = u / sh;
            m.variance = one_minus_r * (1 + r);
        } else {
            const Real r = u / std::sinh(u);
            m.variance = 1 - r * r;
        }
    }
    return m;
}

template <class Real>
IntervalMoments<Real> laplace_moments(Real a, Real b, bool with_variance) {
    if (a >= 0)
        return laplace_positive_piece(a, b, with_variance);
    if (b <= 0) {
        auto m = laplace_positive_piece(-b, -a, with_variance);
        m.mean = -m.mean;
        return m;
    }
    // Straddles the peak: combine the two sign-pure halves.
    auto left = laplace_positive_piece(Real(0), -a, with_variance);
    left.mean = -left.mean;
    const auto right = laplace_positive_piece(Real(0), b, with_variance);
    IntervalMoments<Real> m{};
    m.mass = left.mass + right.mass;
    const Real wl = left.mass / m.mass;
    const Real wr = right.mass / m.mass;
    m.mean = wl * left.mean + wr * right.mean;
    const Real gap = right.mean - left.mean;
    m.variance = wl * left.variance + wr * right.variance + wl * wr * gap * gap;
    return m;
}

void require_ordered(double a, double b) {
    if (std::isnan(a) || std::isnan(b) || !(a < b))
        throw Error(ErrorCode::InvalidArgument, "interval bounds must satisfy a < b");
}

void require_fit_input(std::span<const double> samples) {
    if (samples.size() < 2)
        throw Error(ErrorCode::DegenerateData, "need at least two samples");
    const double first = samples.front();
    if (std::all_of(samples.begin(), samples.end(), [first](double v) { return v == first; }))
        throw Error(ErrorCode::DegenerateData, "all samples are identical");
}

} // namespace

template <class Real>
IntervalMoments<Real> standard_interval_moments(DistributionKind kind, Real a, Real b,
                                                bool with_variance) {
    return kind == DistributionKind::Gaussian ? gaussian_moments(a, b, with_variance)
                                              : laplace_moments(a, b, with_variance);
}

template IntervalMoments<double> standard_interval_moments(DistributionKind, double, double, bool);
template IntervalMoments<long double> standard_interval_moments(DistributionKind, long double,
                                                                long double, bool);

double pdf(const DistributionModel &model, double x) noexcept {
    const double z = model.standardize(x);
    if (model.kind() == DistributionKind::Gaussian)
        return std_normal_density(z) / model.scale();
    return std::exp(-std::fabs(z)) / (2 * model.scale());
}

double cdf(const DistributionModel &model, double x) noexcept {
    const double z = model.standardize(x);
    if (model.kind() == DistributionKind::Gaussian)
        return std::erfc(-z * kSqrtHalf<double>) / 2;
    return z < 0 ? std::exp(z) / 2 : 1 - std::exp(-z) / 2;
}

double interval_mass(const DistributionModel &model, double a, double b) {
    require_ordered(a, b);
    return standard_interval_moments(model.kind(), model.standardize(a), model.standardize(b), false)
        .mass;
}

double truncated_mean(const DistributionModel &model, double a, double b) {
    require_ordered(a, b);
    const auto m =
        standard_interval_moments(model.kind(), model.standardize(a), model.standardize(b), false);
    if (!(m.mass >= kMassFloor))
        throw Error(ErrorCode::ZeroMassInterval,
                    "interval (" + std::to_string(a) + ", " + std::to_string(b) + ") has no mass");
    return model.restore(m.mean);
}

double truncated_second_moment(const DistributionModel &model, double a, double b, double y) {
    require_ordered(a, b);
    const auto m =
        standard_interval_moments(model.kind(), model.standardize(a), model.standardize(b));
    if (!(m.mass >= kMassFloor))
        return 0.0;
    const double offset = m.mean - model.standardize(y);
    return model.scale() * model.scale() * m.mass * (m.variance + offset * offset);
}

DistributionModel fit_gaussian_mle(std::span<const double> samples) {
    require_fit_input(samples);
    const double n = static_cast<double>(samples.size());
    double sum = 0;
    for (double v : samples)
        sum += v;
    const double mean = sum / n;
    double ss = 0;
    for (double v : samples)
        ss += (v - mean) * (v - mean);
    const double sigma = std::sqrt(ss / n);
    if (!(sigma > 0))
        throw Error(ErrorCode::DegenerateData, "zero spread");
    return {DistributionKind::Gaussian, mean, sigma};
}

DistributionModel fit_laplace_mle(std::span<const double> samples) {
    require_fit_input(samples);
    std::vector<double> sorted(samples.begin(), samples.end());
    const std::size_t n = sorted.size();
    const std::size_t mid = n / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    double median = sorted[mid];
    if (n % 2 == 0) {
        const double lower = *std::max_element(sorted.begin(), sorted.begin() + mid);
        median = lower + (median - lower) / 2;
    }
    double dev = 0;
    for (double v : samples)
        dev += std::fabs(v - median);
    const double b = dev / static_cast<double>(n);
    if (!(b > 0))
        throw Error(ErrorCode::DegenerateData, "zero spread");
    return {DistributionKind::Laplace, median, b};
}

double ks_statistic(std::span<const double> samples, const DistributionModel &model) {
    if (samples.empty())
        throw Error(ErrorCode::InvalidArgument, "K-S statistic needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(model, sorted[i]);
        const double above = static_cast<double>(i + 1) / n - f;
        const double below = f - static_cast<double>(i) / n;
        d = std::max({d, std::fabs(above), std::fabs(below)});
    }
    return std::clamp(d, 0.0, 1.0);
}

FitReport select_distribution(std::span<const double> samples) {
    const DistributionModel gaussian = fit_gaussian_mle(samples);
    const DistributionModel laplace = fit_laplace_mle(samples);
    const double ks_g = ks_statistic(samples, gaussian);
    const double ks_l = ks_statistic(samples, laplace);
    return {gaussian, laplace, ks_g, ks_l,
            ks_l < ks_g ? DistributionKind::Laplace : DistributionKind::Gaussian};
}

} // namespace dfq
