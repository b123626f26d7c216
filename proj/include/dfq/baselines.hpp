#pragma once

#include "dfq/quantizer.hpp"

#include <functional>
#include <string_view>
#include <vector>

namespace dfq {

enum class BaselineMethod { Uniform, APoT };

std::string_view to_string(BaselineMethod method) noexcept;

// Comparison quantizer in standardized coordinates.
//   Uniform: K equal intervals on [-clip, clip], levels at interval
//            midpoints, tails saturating onto the outer levels.
//   APoT:    levels are +-gamma * s / s_max for two-term power-of-two sums s,
//            boundaries at midpoints, unbounded outer intervals.
struct BaselineSpec {
    BaselineMethod method = BaselineMethod::Uniform;
    int bits = 1;
    std::vector<double> levels;
    std::vector<double> boundaries;
    double clip = 0.0;  // uniform range half-width, or APoT gamma
    DistributionKind model_kind = DistributionKind::Gaussian;
    bool uneven_split = false; // APoT with odd bit width

    // Attach an offset/scale so the spec can drive the codec and distortion.
    QuantizerSpec to_quantizer_spec(double offset = 0.0, double scale = 1.0) const;
};

// Minimizes f over (lo, hi] by golden-section search; returns the argmin.
double golden_section_minimize(const std::function<double(double)> &f, double lo, double hi, double tol);

inline constexpr double kClipSearchUpper = 20.0;
inline constexpr double kClipSearchTol = 1e-6;

std::vector<double> uniform_levels(int bits, double clip);
BaselineSpec uniform_spec_for_clip(DistributionKind kind, int bits, double clip);
// Clip chosen to minimize the analytic distortion against the standard
// model of `model`'s family.
BaselineSpec uniform_spec(const DistributionModel &model, int bits);

struct ApotTerms {
    int first_bits = 0;
    int second_bits = 0;
    std::vector<double> first;  // {0, 1, 2^-2, 2^-4, ...}
    std::vector<double> second; // {0, 2^-1, 2^-3, ...}
};

// Bit split and component sets for an M-bit APoT codebook: the first term
// gets ceil(M/2) bits, the second floor(M/2).
ApotTerms apot_terms(int bits);
// The 2^M distinct sums of one element from each term, ascending.
std::vector<double> apot_sums(const ApotTerms &terms);
// Positive magnitudes kept for the codebook: the odd-ranked sums, i.e.
// every other sum starting from the smallest nonzero one. Unscaled.
std::vector<double> apot_magnitudes(int bits);
BaselineSpec apot_spec_for_gamma(DistributionKind kind, int bits, double gamma);
// Requires 2 <= bits <= 8.
BaselineSpec apot_spec(const DistributionModel &model, int bits);

} // namespace dfq
