#include "hoa/bitstream.hpp"

#include "hoa/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <iterator>

namespace hoa {

namespace {

constexpr unsigned char kMagic[4] = {'H', 'O', 'A', 'C'};

class ByteSink {
public:
    explicit ByteSink(std::vector<unsigned char>& out) : out_(out) {}
    void put(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }

private:
    std::vector<unsigned char>& out_;
};

class ByteSource {
public:
    explicit ByteSource(std::span<const unsigned char> in) : in_(in) {}
    std::uint64_t get(int bytes) {
        if (pos_ + static_cast<std::size_t>(bytes) > in_.size()) throw FormatError("stream header truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }

private:
    std::span<const unsigned char> in_;
    std::size_t pos_ = 0;
};

} // namespace

std::uint32_t crc32_of(std::span<const unsigned char> bytes) {
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

void write_header(std::vector<unsigned char>& out, const StreamHeader& h) {
    std::vector<unsigned char> buf(std::begin(kMagic), std::end(kMagic));
    ByteSink s(buf);
    s.put(kStreamVersion, 1);
    s.put(static_cast<std::uint8_t>(h.codec), 1);
    s.put((h.bypass ? 1U : 0U) | (h.noise ? 2U : 0U) | (h.hanning ? 4U : 0U), 1);
    s.put(static_cast<std::uint64_t>(h.order), 1);
    s.put(static_cast<std::uint64_t>(h.hop), 2);
    s.put(h.sample_rate, 4);
    s.put(h.num_samples, 8);
    s.put(static_cast<std::uint64_t>(h.rank), 1);
    s.put(static_cast<std::uint64_t>(h.bg_order), 1);
    s.put(h.band_lengths.size(), 1);
    for (const int l : h.band_lengths) s.put(static_cast<std::uint64_t>(l), 2);
    s.put(h.seed, 8);
    s.put(static_cast<std::uint64_t>(h.coeff_size), 2);
    s.put(static_cast<std::uint64_t>(h.residual_size), 2);
    s.put(static_cast<std::uint64_t>(h.intra_size), 2);
    s.put(h.quantizer_hash, 4);
    s.put(h.table_hash, 4);
    s.put(h.group_hash, 4);
    s.put(crc32_of(buf), 4);
    out.insert(out.end(), buf.begin(), buf.end());
}

StreamHeader read_header(std::span<const unsigned char> bytes, std::size_t& header_size) {
    if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
        throw FormatError("not an HOA codec stream (bad magic)");
    ByteSource s(bytes.subspan(4));
    StreamHeader h;
    if (s.get(1) != kStreamVersion) throw FormatError("unsupported stream version");
    const auto codec = s.get(1);
    if (codec > 1) throw FormatError("unknown codec id");
    h.codec = static_cast<CodecId>(codec);
    const auto flags = s.get(1);
    h.bypass = (flags & 1U) != 0;
    h.noise = (flags & 2U) != 0;
    h.hanning = (flags & 4U) != 0;
    h.order = static_cast<int>(s.get(1));
    h.hop = static_cast<int>(s.get(2));
    h.sample_rate = static_cast<std::uint32_t>(s.get(4));
    h.num_samples = s.get(8);
    h.rank = static_cast<int>(s.get(1));
    h.bg_order = static_cast<int>(s.get(1));
    const auto bands = s.get(1);
    for (std::uint64_t i = 0; i < bands; ++i) h.band_lengths.push_back(static_cast<int>(s.get(2)));
    h.seed = s.get(8);
    h.coeff_size = static_cast<int>(s.get(2));
    h.residual_size = static_cast<int>(s.get(2));
    h.intra_size = static_cast<int>(s.get(2));
    h.quantizer_hash = static_cast<std::uint32_t>(s.get(4));
    h.table_hash = static_cast<std::uint32_t>(s.get(4));
    h.group_hash = static_cast<std::uint32_t>(s.get(4));
    const std::size_t body = 4 + s.pos();
    const auto crc = static_cast<std::uint32_t>(s.get(4));
    if (crc != crc32_of(bytes.first(body))) throw FormatError("stream header CRC mismatch");
    header_size = body + 4;

    int total = 0;
    for (const int l : h.band_lengths) total += l;
    if (h.hop <= 0 || h.hop % 2 != 0 || h.order > 14 || h.rank < 1 || h.rank > h.channels() || h.bg_order > h.order ||
        h.band_lengths.empty() || total != h.hop)
        throw FormatError("stream header holds inconsistent parameters");
    return h;
}

void append_frame(std::vector<unsigned char>& out, std::span<const unsigned char> payload) {
    std::uint64_t v = payload.size();
    do {
        unsigned char b = v & 0x7F;
        v >>= 7;
        if (v != 0) b |= 0x80;
        out.push_back(b);
    } while (v != 0);
    const std::uint32_t crc = crc32_of(payload);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(crc >> (8 * i)));
    out.insert(out.end(), payload.begin(), payload.end());
}

FrameReader::Frame FrameReader::next() {
    Frame f;
    if (pos_ >= bytes_.size()) return f;
    const std::size_t start = pos_;
    std::uint64_t len = 0;
    for (int shift = 0;; shift += 7) {
        if (pos_ >= bytes_.size() || shift > 56) {
            f.status = Status::kTruncated;
            return f;
        }
        const unsigned char b = bytes_[pos_++];
        len |= static_cast<std::uint64_t>(b & 0x7F) << shift;
        if ((b & 0x80) == 0) break;
    }
    if (pos_ + 4 > bytes_.size() || len > bytes_.size() - pos_ - 4) {
        f.status = Status::kTruncated;
        pos_ = bytes_.size();
        return f;
    }
    std::uint32_t crc = 0;
    for (int i = 0; i < 4; ++i) crc |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    f.payload = bytes_.subspan(pos_, static_cast<std::size_t>(len));
    pos_ += static_cast<std::size_t>(len);
    f.framing_bytes = pos_ - start - f.payload.size();
    f.status = crc32_of(f.payload) == crc ? Status::kOk : Status::kCrcMismatch;
    return f;
}

} // namespace hoa
