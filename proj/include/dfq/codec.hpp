#pragma once

#include "dfq/quantizer.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dfq {

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> values;

    std::size_t shape_product() const noexcept;
    // ShapeMismatch if the shape does not describe the values,
    // NonFiniteValue on NaN or infinity.
    void validate() const;
};

using Code = std::uint16_t;

struct QuantizedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    int bits = 1;
    std::vector<Code> codes;
    // Reconstruction values in the original weight domain, strictly increasing.
    std::vector<double> codebook;

    void validate() const;
};

// Interval lookup in standardized coordinates. A value equal to a boundary
// goes to the interval on its right.
QuantizedTensor encode(const Tensor &tensor, const QuantizerSpec &spec);
Tensor decode(const QuantizedTensor &q);

double empirical_mse(const Tensor &original, const Tensor &reconstructed);

// Little-endian bit stream, `bits` per code, zero-padded to a whole byte.
std::vector<std::uint8_t> pack_codes(std::span<const Code> codes, int bits);
std::vector<Code> unpack_codes(std::span<const std::uint8_t> bytes, int bits, std::size_t count);
std::size_t packed_size(std::size_t count, int bits) noexcept;

} // namespace dfq
