#pragma once
// Byte-oriented range coder (carry-propagating, 32-bit range) with adaptive
// frequency models.

#include <cstdint>
#include <span>
#include <vector>

namespace hoa {

class RangeEncoder {
public:
    /// Codes [cum, cum + freq) out of `total` (total <= 2^16).
    void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
    /// Equiprobable bits, MSB first; bits <= 32.
    void encode_direct(std::uint32_t value, int bits);
    /// Flushes the coder; further calls are invalid.
    [[nodiscard]] std::vector<unsigned char> finish();

private:
    void shift_low();
    void normalize();

    std::uint64_t low_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFU;
    unsigned char cache_ = 0;
    std::uint64_t cache_size_ = 1;
    std::vector<unsigned char> out_;
};

class RangeDecoder {
public:
    /// Throws StreamError when the data is too short to hold a flushed stream.
    explicit RangeDecoder(std::span<const unsigned char> data);
    /// Returns the cumulative count inside [0, total); follow with consume().
    [[nodiscard]] std::uint32_t peek(std::uint32_t total);
    void consume(std::uint32_t cum, std::uint32_t freq);
    [[nodiscard]] std::uint32_t decode_direct(int bits);
    /// Bytes read so far (including look-ahead).
    [[nodiscard]] std::size_t position() const noexcept { return pos_; }

private:
    unsigned char next_byte();
    void normalize();

    std::span<const unsigned char> data_;
    std::size_t pos_ = 0;
    std::uint32_t code_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFU;
    std::uint32_t step_ = 1;
};

/// Adaptive multi-symbol model. Frequencies start from a prior and grow by a
/// fixed increment; counts are halved when the total exceeds the limit.
class AdaptiveModel {
public:
    AdaptiveModel() = default;
    explicit AdaptiveModel(std::span<const std::uint16_t> prior);

    void encode(RangeEncoder& enc, int symbol);
    [[nodiscard]] int decode(RangeDecoder& dec);
    [[nodiscard]] int size() const noexcept { return static_cast<int>(freq_.size()); }
    /// Ideal code length of `symbol` in bits under the current counts.
    [[nodiscard]] double cost(int symbol) const;

private:
    void update(int symbol);

    std::vector<std::uint32_t> freq_;
    std::uint32_t total_ = 0;
};

} // namespace hoa
