#include "dfq/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dfq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double standard_distortion(const BaselineSpec &spec) {
    return distortion(spec.to_quantizer_spec(), DistributionModel::standard(spec.model_kind)).total;
}

} // namespace

std::string_view to_string(BaselineMethod method) noexcept {
    return method == BaselineMethod::Uniform ? "uniform" : "apot";
}

QuantizerSpec BaselineSpec::to_quantizer_spec(double offset, double scale) const {
    QuantizerSpec q;
    q.bits = bits;
    q.model_kind = model_kind;
    q.levels = levels;
    q.boundaries = boundaries;
    q.location_offset = offset;
    q.scale_factor = scale;
    return q;
}

double golden_section_minimize(const std::function<double(double)> &f, double lo, double hi, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    // The bracket ends are never evaluated; the upper end is admissible.
    const double best = fc <= fd ? c : d;
    if (hi - best <= tol && f(hi) < std::min(fc, fd))
        return hi;
    return best;
}

std::vector<double> uniform_levels(int bits, double clip) {
    const std::size_t k = std::size_t{1} << bits;
    const double width = 2.0 * clip / static_cast<double>(k);
    std::vector<double> levels(k);
    for (std::size_t i = 0; i < k; ++i)
        levels[i] = -clip + (static_cast<double>(i) + 0.5) * width;
    return levels;
}

BaselineSpec uniform_spec_for_clip(DistributionKind kind, int bits, double clip) {
    require_bit_width(bits);
    if (!(clip > 0.0) || !std::isfinite(clip))
        throw Error(ErrorCode::InvalidArgument, "uniform clip must be positive");
    BaselineSpec spec;
    spec.method = BaselineMethod::Uniform;
    spec.bits = bits;
    spec.model_kind = kind;
    spec.clip = clip;
    spec.levels = uniform_levels(bits, clip);
    const std::size_t k = spec.levels.size();
    const double width = 2.0 * clip / static_cast<double>(k);
    spec.boundaries.resize(k + 1);
    for (std::size_t i = 0; i <= k; ++i)
        spec.boundaries[i] = -clip + static_cast<double>(i) * width;
    spec.boundaries.back() = clip;
    return spec;
}

BaselineSpec uniform_spec(const DistributionModel &model, int bits) {
    require_bit_width(bits);
    const DistributionKind kind = model.kind();
    const double clip = golden_section_minimize(
        [&](double c) { return standard_distortion(uniform_spec_for_clip(kind, bits, c)); }, 0.0,
        kClipSearchUpper, kClipSearchTol);
    return uniform_spec_for_clip(kind, bits, clip);
}

ApotTerms apot_terms(int bits) {
    require_bit_width(bits, 1, 8);
    ApotTerms terms;
    terms.first_bits = (bits + 1) / 2;
    terms.second_bits = bits / 2;
    // Interleaved exponents: the first term owns even powers, the second odd
    // ones, so every pair sums to a distinct value.
    const auto build = [](int term_bits, int first_exponent) {
        std::vector<double> set{0.0};
        const int powers = (1 << term_bits) - 1;
        for (int j = 0; j < powers; ++j)
            set.push_back(std::ldexp(1.0, -(first_exponent + 2 * j)));
        return set;
    };
    terms.first = build(terms.first_bits, 0);
    terms.second = build(terms.second_bits, 1);
    return terms;
}

std::vector<double> apot_sums(const ApotTerms &terms) {
    std::vector<double> sums;
    sums.reserve(terms.first.size() * terms.second.size());
    for (double p : terms.first)
        for (double q : terms.second)
            sums.push_back(p + q);
    std::sort(sums.begin(), sums.end());
    sums.erase(std::unique(sums.begin(), sums.end()), sums.end());
    return sums;
}

std::vector<double> apot_magnitudes(int bits) {
    const std::vector<double> sums = apot_sums(apot_terms(bits));
    std::vector<double> kept;
    for (std::size_t i = 1; i < sums.size(); i += 2)
        kept.push_back(sums[i]);
    return kept;
}

BaselineSpec apot_spec_for_gamma(DistributionKind kind, int bits, double gamma) {
    require_bit_width(bits, 2, 8);
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw Error(ErrorCode::InvalidArgument, "APoT gamma must be positive");
    const std::vector<double> mags = apot_magnitudes(bits);
    const double top = mags.back();
    BaselineSpec spec;
    spec.method = BaselineMethod::APoT;
    spec.bits = bits;
    spec.model_kind = kind;
    spec.clip = gamma;
    spec.uneven_split = bits % 2 != 0;
    spec.levels.reserve(2 * mags.size());
    for (auto it = mags.rbegin(); it != mags.rend(); ++it)
        spec.levels.push_back(-gamma * (*it / top));
    for (double m : mags)
        spec.levels.push_back(gamma * (m / top));
    const std::size_t k = spec.levels.size();
    spec.boundaries.assign(k + 1, 0.0);
    spec.boundaries.front() = -kInf;
    spec.boundaries.back() = kInf;
    for (std::size_t i = 1; i < k; ++i)
        spec.boundaries[i] = (spec.levels[i - 1] + spec.levels[i]) / 2;
    return spec;
}

BaselineSpec apot_spec(const DistributionModel &model, int bits) {
    require_bit_width(bits, 2, 8);
    const DistributionKind kind = model.kind();
    const double gamma = golden_section_minimize(
        [&](double g) { return standard_distortion(apot_spec_for_gamma(kind, bits, g)); }, 0.0,
        kClipSearchUpper, kClipSearchTol);
    return apot_spec_for_gamma(kind, bits, gamma);
}

} // namespace dfq
