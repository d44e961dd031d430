#include "hoa/range_coder.hpp"

#include "hoa/error.hpp"

#include <cmath>

namespace hoa {

namespace {
constexpr std::uint32_t kTop = 1U << 24;
constexpr std::uint32_t kIncrement = 24;
constexpr std::uint32_t kLimit = 1U << 16;
} // namespace

void RangeEncoder::shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000U || (low_ >> 32) != 0) {
        const auto carry = static_cast<unsigned char>(low_ >> 32);
        unsigned char temp = cache_;
        do {
            out_.push_back(static_cast<unsigned char>(temp + carry));
            temp = 0xFF;
        } while (--cache_size_ != 0);
        cache_ = static_cast<unsigned char>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFU) << 8;
}

void RangeEncoder::normalize() {
    while (range_ < kTop) {
        range_ <<= 8;
        shift_low();
    }
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
    const std::uint32_t r = range_ / total;
    low_ += static_cast<std::uint64_t>(r) * cum;
    range_ = r * freq;
    normalize();
}

void RangeEncoder::encode_direct(std::uint32_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) {
        range_ >>= 1;
        if ((value >> i) & 1U) low_ += range_;
        normalize();
    }
}

std::vector<unsigned char> RangeEncoder::finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    // The first byte is always zero (initial cache); drop it.
    out_.erase(out_.begin());
    return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const unsigned char> data) : data_(data) {
    if (data_.size() < 4) throw StreamError("range-coded payload too short");
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

unsigned char RangeDecoder::next_byte() {
    if (pos_ >= data_.size()) throw StreamError("range-coded payload truncated");
    return data_[pos_++];
}

void RangeDecoder::normalize() {
    while (range_ < kTop) {
        range_ <<= 8;
        code_ = (code_ << 8) | next_byte();
    }
}

std::uint32_t RangeDecoder::peek(std::uint32_t total) {
    step_ = range_ / total;
    const std::uint32_t v = code_ / step_;
    if (v >= total) throw StreamError("range-coded payload is corrupt");
    return v;
}

void RangeDecoder::consume(std::uint32_t cum, std::uint32_t freq) {
    code_ -= step_ * cum;
    range_ = step_ * freq;
    normalize();
}

std::uint32_t RangeDecoder::decode_direct(int bits) {
    std::uint32_t v = 0;
    for (int i = 0; i < bits; ++i) {
        range_ >>= 1;
        std::uint32_t b = 0;
        if (code_ >= range_) {
            code_ -= range_;
            b = 1;
        }
        v = (v << 1) | b;
        normalize();
    }
    return v;
}

AdaptiveModel::AdaptiveModel(std::span<const std::uint16_t> prior) {
    freq_.reserve(prior.size());
    for (const std::uint16_t p : prior) {
        freq_.push_back(p == 0 ? 1U : p);
        total_ += freq_.back();
    }
    while (total_ > kLimit) {
        total_ = 0;
        for (auto& f : freq_) {
            f = (f + 1) / 2;
            total_ += f;
        }
    }
}

void AdaptiveModel::update(int symbol) {
    freq_[static_cast<std::size_t>(symbol)] += kIncrement;
    total_ += kIncrement;
    if (total_ > kLimit) {
        total_ = 0;
        for (auto& f : freq_) {
            f = (f + 1) / 2;
            total_ += f;
        }
    }
}

void AdaptiveModel::encode(RangeEncoder& enc, int symbol) {
    std::uint32_t cum = 0;
    for (int s = 0; s < symbol; ++s) cum += freq_[static_cast<std::size_t>(s)];
    enc.encode(cum, freq_[static_cast<std::size_t>(symbol)], total_);
    update(symbol);
}

int AdaptiveModel::decode(RangeDecoder& dec) {
    const std::uint32_t target = dec.peek(total_);
    std::uint32_t cum = 0;
    int s = 0;
    while (cum + freq_[static_cast<std::size_t>(s)] <= target) cum += freq_[static_cast<std::size_t>(s++)];
    dec.consume(cum, freq_[static_cast<std::size_t>(s)]);
    update(s);
    return s;
}

double AdaptiveModel::cost(int symbol) const {
    return std::log2(static_cast<double>(total_) / freq_[static_cast<std::size_t>(symbol)]);
}

} // namespace hoa
