#pragma once

#include "dfq/distributions.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace dfq {

// Seed for an independent stream, e.g. one per synthetic layer.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

// n draws from `model` with a 64-bit Mersenne Twister. Gaussian draws use
// std::normal_distribution, Laplace draws invert the CDF.
std::vector<double> draw_samples(const DistributionModel &model, std::size_t n, std::uint64_t seed);

} // namespace dfq
