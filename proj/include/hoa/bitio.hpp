#pragma once

#include "hoa/error.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hoa {

/// MSB-first bit packer.
class BitWriter {
public:
    void write(std::uint64_t value, int bits) {
        for (int i = bits - 1; i >= 0; --i) put_bit(static_cast<unsigned>((value >> i) & 1U));
    }
    void write_bool(bool b) { put_bit(b ? 1U : 0U); }
    void align() {
        while (bits_ % 8 != 0) put_bit(0);
    }
    void write_bytes(std::span<const unsigned char> bytes) {
        align();
        bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
        bits_ += bytes.size() * 8;
    }
    /// LEB128, byte-aligned.
    void write_varint(std::uint64_t v) {
        align();
        do {
            unsigned char b = v & 0x7F;
            v >>= 7;
            if (v != 0) b |= 0x80;
            write(b, 8);
        } while (v != 0);
    }

    [[nodiscard]] std::size_t bit_count() const noexcept { return bits_; }
    [[nodiscard]] const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }
    [[nodiscard]] std::vector<unsigned char> take() { return std::move(bytes_); }

private:
    void put_bit(unsigned b) {
        if (bits_ % 8 == 0) bytes_.push_back(0);
        if (b) bytes_.back() = static_cast<unsigned char>(bytes_.back() | (0x80U >> (bits_ % 8)));
        ++bits_;
    }

    std::vector<unsigned char> bytes_;
    std::size_t bits_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const unsigned char> data) : data_(data) {}

    std::uint64_t read(int bits) {
        std::uint64_t v = 0;
        for (int i = 0; i < bits; ++i) v = (v << 1) | get_bit();
        return v;
    }
    bool read_bool() { return get_bit() != 0; }
    void align() { pos_ = (pos_ + 7) / 8 * 8; }
    std::span<const unsigned char> read_bytes(std::size_t n) {
        align();
        if (pos_ / 8 + n > data_.size()) throw StreamError("bitstream truncated");
        auto out = data_.subspan(pos_ / 8, n);
        pos_ += n * 8;
        return out;
    }
    std::uint64_t read_varint() {
        align();
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            const auto b = read(8);
            v |= (b & 0x7F) << shift;
            if ((b & 0x80) == 0) return v;
        }
        throw StreamError("varint too long");
    }

    [[nodiscard]] std::size_t bit_position() const noexcept { return pos_; }
    [[nodiscard]] std::size_t bits_left() const noexcept { return data_.size() * 8 - pos_; }

private:
    unsigned get_bit() {
        if (pos_ >= data_.size() * 8) throw StreamError("bitstream truncated");
        const unsigned b = (data_[pos_ / 8] >> (7 - pos_ % 8)) & 1U;
        ++pos_;
        return b;
    }

    std::span<const unsigned char> data_;
    std::size_t pos_ = 0;
};

/// Bits needed to index `count` alternatives (0 for count <= 1).
[[nodiscard]] constexpr int index_bits(std::uint64_t count) noexcept {
    int b = 0;
    while ((std::uint64_t{1} << b) < count) ++b;
    return b;
}

} // namespace hoa
