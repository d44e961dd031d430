#pragma once
// Container layout: global header followed by length-prefixed, CRC-protected
// frame payloads. See docs/bitstream.md.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace hoa {

inline constexpr std::uint8_t kStreamVersion = 1;

enum class CodecId : std::uint8_t { kBaseline = 0, kProposed = 1 };

struct StreamHeader {
    CodecId codec = CodecId::kProposed;
    bool bypass = false;
    bool noise = true;
    bool hanning = false; // baseline interpolation window
    int order = 3;
    int hop = 1024;
    std::uint32_t sample_rate = 48000;
    std::uint64_t num_samples = 0;
    int rank = 4;
    int bg_order = 1;
    std::vector<int> band_lengths; // mode-1 layout; mode 0 is one band
    std::uint64_t seed = 0;
    int coeff_size = 0; // codebook sizes, 0 in bypass streams
    int residual_size = 0;
    int intra_size = 0;
    std::uint32_t quantizer_hash = 0;
    std::uint32_t table_hash = 0;
    std::uint32_t group_hash = 0;

    [[nodiscard]] int channels() const noexcept { return (order + 1) * (order + 1); }
    [[nodiscard]] int background_channels() const noexcept { return (bg_order + 1) * (bg_order + 1); }
};

[[nodiscard]] std::uint32_t crc32_of(std::span<const unsigned char> bytes);

/// Appends the serialized header (with its CRC) to `out`.
void write_header(std::vector<unsigned char>& out, const StreamHeader& h);
/// Parses the header at the start of `bytes`; returns it and its size.
/// Throws FormatError on bad magic, version, CRC or field values.
[[nodiscard]] StreamHeader read_header(std::span<const unsigned char> bytes, std::size_t& header_size);

/// Appends varint(length) + CRC32 + payload.
void append_frame(std::vector<unsigned char>& out, std::span<const unsigned char> payload);

/// Iterates frames after the header.
class FrameReader {
public:
    FrameReader(std::span<const unsigned char> bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

    enum class Status { kOk, kEnd, kTruncated, kCrcMismatch };
    struct Frame {
        Status status = Status::kEnd;
        std::span<const unsigned char> payload;
        std::size_t framing_bytes = 0; // varint + CRC
    };
    /// kCrcMismatch still advances past the frame; kTruncated stops.
    Frame next();

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_;
};

} // namespace hoa
