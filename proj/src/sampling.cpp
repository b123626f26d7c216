#include "dfq/sampling.hpp"

#include <cmath>
#include <random>

namespace dfq {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    // splitmix64 finalizer over the pair
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<double> draw_samples(const DistributionModel &model, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> out(n);
    if (model.kind() == DistributionKind::Gaussian) {
        std::normal_distribution<double> normal(model.location(), model.scale());
        for (double &x : out)
            x = normal(rng);
        return out;
    }
    std::uniform_real_distribution<double> uniform(-0.5, 0.5);
    for (double &x : out) {
        double u = uniform(rng);
        while (u == -0.5)
            u = uniform(rng);
        const double mag = -std::log1p(-2.0 * std::fabs(u));
        x = model.location() + model.scale() * std::copysign(mag, u);
    }
    return out;
}

} // namespace dfq
