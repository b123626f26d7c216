#include "dfq/codec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dfq {

std::size_t Tensor::shape_product() const noexcept {
    std::size_t n = 1;
    for (std::size_t d : shape)
        n *= d;
    return n;
}

void Tensor::validate() const {
    if (shape_product() != values.size())
        throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' has " + std::to_string(values.size()) +
                                                  " values for shape product " + std::to_string(shape_product()));
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw Error(ErrorCode::NonFiniteValue,
                        "tensor '" + name + "' element " + std::to_string(i) + " is not finite");
}

void QuantizedTensor::validate() const {
    require_bit_width(bits);
    if (codebook.size() != (std::size_t{1} << bits))
        throw Error(ErrorCode::FormatError, "codebook size does not match bit width");
    for (std::size_t i = 1; i < codebook.size(); ++i)
        if (!(codebook[i - 1] < codebook[i]))
            throw Error(ErrorCode::FormatError, "codebook is not strictly increasing");
    std::size_t n = 1;
    for (std::size_t d : shape)
        n *= d;
    if (n != codes.size())
        throw Error(ErrorCode::ShapeMismatch, "code count does not match shape");
    for (Code c : codes)
        if (c >= codebook.size())
            throw Error(ErrorCode::CodeOutOfRange, "code " + std::to_string(c) + " outside codebook");
}

QuantizedTensor encode(const Tensor &tensor, const QuantizerSpec &spec) {
    tensor.validate();
    spec.validate();
    QuantizedTensor q;
    q.name = tensor.name;
    q.shape = tensor.shape;
    q.bits = spec.bits;
    q.codebook = spec.codebook();
    for (std::size_t i = 1; i < q.codebook.size(); ++i)
        if (!(q.codebook[i - 1] < q.codebook[i]))
            throw Error(ErrorCode::InvalidArgument, "spec codebook collapses in the original domain");

    const std::vector<double> edges = spec.interior_boundaries();
    q.codes.resize(tensor.values.size());
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
        const double z = (static_cast<double>(tensor.values[i]) - spec.location_offset) / spec.scale_factor;
        q.codes[i] = static_cast<Code>(std::upper_bound(edges.begin(), edges.end(), z) - edges.begin());
    }
    return q;
}

Tensor decode(const QuantizedTensor &q) {
    Tensor t;
    t.name = q.name;
    t.shape = q.shape;
    t.values.resize(q.codes.size());
    for (std::size_t i = 0; i < q.codes.size(); ++i) {
        if (q.codes[i] >= q.codebook.size())
            throw Error(ErrorCode::CodeOutOfRange, "code " + std::to_string(q.codes[i]) + " at element " +
                                                       std::to_string(i) + " outside codebook");
        t.values[i] = static_cast<float>(q.codebook[q.codes[i]]);
    }
    return t;
}

double empirical_mse(const Tensor &original, const Tensor &reconstructed) {
    if (original.shape != reconstructed.shape || original.values.size() != reconstructed.values.size())
        throw Error(ErrorCode::ShapeMismatch, "tensors differ in shape");
    if (original.values.empty())
        return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < original.values.size(); ++i) {
        const double d = static_cast<double>(original.values[i]) - static_cast<double>(reconstructed.values[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(original.values.size());
}

std::size_t packed_size(std::size_t count, int bits) noexcept {
    return (count * static_cast<std::size_t>(bits) + 7) / 8;
}

std::vector<std::uint8_t> pack_codes(std::span<const Code> codes, int bits) {
    require_bit_width(bits);
    const std::uint32_t limit = std::uint32_t{1} << bits;
    std::vector<std::uint8_t> out(packed_size(codes.size(), bits), 0);
    std::size_t bit = 0;
    for (Code c : codes) {
        if (c >= limit)
            throw Error(ErrorCode::CodeOutOfRange, "code " + std::to_string(c) + " needs more than " +
                                                       std::to_string(bits) + " bits");
        for (int k = 0; k < bits; ++k, ++bit)
            if ((c >> k) & 1u)
                out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
    return out;
}

std::vector<Code> unpack_codes(std::span<const std::uint8_t> bytes, int bits, std::size_t count) {
    require_bit_width(bits);
    if (bytes.size() < packed_size(count, bits))
        throw Error(ErrorCode::FormatError, "packed stream too short for " + std::to_string(count) + " codes");
    std::vector<Code> out(count, 0);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t c = 0;
        for (int k = 0; k < bits; ++k, ++bit)
            c |= static_cast<std::uint32_t>((bytes[bit / 8] >> (bit % 8)) & 1u) << k;
        out[i] = static_cast<Code>(c);
    }
    return out;
}

} // namespace dfq
