#include "hoa/hoa_io.hpp"

#include "hoa/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace hoa {

int order_for_channels(int channels) noexcept {
    if (channels <= 0) return -1;
    const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(channels))));
    return root * root == channels ? root - 1 : -1;
}

HoaSignal::HoaSignal(std::uint32_t sample_rate, int order, Eigen::MatrixXd samples, Normalization norm)
    : sample_rate_(sample_rate), order_(order), samples_(std::move(samples)), norm_(norm) {
    if (sample_rate_ == 0) throw ParameterError("sample rate must be positive");
    if (order_ < 0) throw ParameterError("ambisonics order must be non-negative");
    if (samples_.cols() != channels_for_order(order_))
        throw ShapeError("order " + std::to_string(order_) + " needs " +
                         std::to_string(channels_for_order(order_)) + " channels, got " +
                         std::to_string(samples_.cols()));
}

HoaSignal HoaSignal::from_channels(std::uint32_t sample_rate, Eigen::MatrixXd samples) {
    const int order = order_for_channels(static_cast<int>(samples.cols()));
    if (order < 0)
        throw ShapeError(std::to_string(samples.cols()) + " channels is not (N+1)^2 for any order N");
    return HoaSignal(sample_rate, order, std::move(samples));
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    std::uint16_t block_align = 0;
};

} // namespace

HoaSignal read_hoa_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    if (data.size() < 12 || std::memcmp(bytes, "RIFF", 4) != 0 || std::memcmp(bytes + 8, "WAVE", 4) != 0)
        throw FormatError(path.string() + ": not a RIFF/WAVE file");

    FmtChunk fmt;
    bool have_fmt = false;
    const unsigned char* pcm = nullptr;
    std::size_t pcm_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const unsigned char* chunk = bytes + pos;
        const std::uint32_t size = get_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = data.size() - body;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || size > avail) throw FormatError(path.string() + ": bad fmt chunk");
            fmt.format = get_u16(bytes + body);
            fmt.channels = get_u16(bytes + body + 2);
            fmt.sample_rate = get_u32(bytes + body + 4);
            fmt.block_align = get_u16(bytes + body + 12);
            fmt.bits = get_u16(bytes + body + 14);
            if (fmt.format == kFormatExtensible) {
                if (size < 40) throw FormatError(path.string() + ": truncated WAVE_FORMAT_EXTENSIBLE");
                // Sub-format GUID starts with the plain format tag.
                fmt.format = get_u16(bytes + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            pcm = bytes + body;
            // Streaming writers sometimes leave the size at 0 or 0xFFFFFFFF.
            pcm_size = (size == 0 || size > avail) ? avail : size;
            break;
        }
        pos = body + size + (size & 1U);
    }
    if (!have_fmt || pcm == nullptr) throw FormatError(path.string() + ": missing fmt or data chunk");
    if (fmt.channels == 0 || fmt.sample_rate == 0) throw FormatError(path.string() + ": zero channels or rate");

    const bool is_float = fmt.format == kFormatFloat;
    if (!(fmt.format == kFormatPcm || is_float)) throw FormatError(path.string() + ": unsupported sample format");
    if (is_float ? fmt.bits != 32 : !(fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32))
        throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(fmt.bits));
    const std::size_t width = fmt.bits / 8;
    if (fmt.block_align != width * fmt.channels) throw FormatError(path.string() + ": inconsistent block align");

    const int order = order_for_channels(fmt.channels);
    if (order < 0)
        throw ShapeError(path.string() + ": " + std::to_string(fmt.channels) +
                         " channels is not (N+1)^2 for any order N");

    const std::size_t frames = pcm_size / fmt.block_align;
    Eigen::MatrixXd samples(static_cast<Eigen::Index>(frames), fmt.channels);
    for (std::size_t n = 0; n < frames; ++n) {
        for (int c = 0; c < fmt.channels; ++c) {
            const unsigned char* p = pcm + n * fmt.block_align + c * width;
            double v = 0.0;
            if (is_float) {
                v = std::bit_cast<float>(get_u32(p));
            } else if (fmt.bits == 16) {
                v = static_cast<std::int16_t>(get_u16(p)) / 32768.0;
            } else if (fmt.bits == 24) {
                std::int32_t s = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(get_u32(p)) / 2147483648.0;
            }
            samples(static_cast<Eigen::Index>(n), c) = v;
        }
    }
    return HoaSignal(fmt.sample_rate, order, std::move(samples));
}

void write_hoa_wav(const HoaSignal& signal, const std::filesystem::path& path, SampleFormat format) {
    const int channels = signal.channel_count();
    const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : format == SampleFormat::kPcm24 ? 24 : 32;
    const std::uint16_t width = bits / 8;
    const std::uint64_t data_bytes = static_cast<std::uint64_t>(signal.length()) * channels * width;
    if (data_bytes > 0xFFFFFFF0ULL) throw IoError("signal too long for a RIFF/WAVE file");

    std::string out;
    out.reserve(static_cast<std::size_t>(data_bytes) + 80);
    // WAVE_FORMAT_EXTENSIBLE is the conventional header for >2 channels.
    out += "RIFF";
    put_u32(out, static_cast<std::uint32_t>(4 + 8 + 40 + 8 + data_bytes));
    out += "WAVEfmt ";
    put_u32(out, 40);
    put_u16(out, kFormatExtensible);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, signal.sample_rate());
    put_u32(out, signal.sample_rate() * channels * width);
    put_u16(out, static_cast<std::uint16_t>(channels * width));
    put_u16(out, bits);
    put_u16(out, 22);
    put_u16(out, bits);
    put_u32(out, 0); // channel mask: none (ambisonic)
    static constexpr std::array<unsigned char, 14> kGuidTail{0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
                                                             0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    put_u16(out, format == SampleFormat::kFloat32 ? kFormatFloat : kFormatPcm);
    out.append(reinterpret_cast<const char*>(kGuidTail.data()), kGuidTail.size());
    out += "data";
    put_u32(out, static_cast<std::uint32_t>(data_bytes));

    const auto& s = signal.samples();
    for (Eigen::Index n = 0; n < s.rows(); ++n) {
        for (int c = 0; c < channels; ++c) {
            const double v = s(n, c);
            switch (format) {
            case SampleFormat::kFloat32:
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
                break;
            case SampleFormat::kPcm16: {
                const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
                put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
                break;
            }
            case SampleFormat::kPcm24: {
                const double q = std::clamp(std::nearbyint(v * 8388608.0), -8388608.0, 8388607.0);
                const auto u = static_cast<std::uint32_t>(static_cast<std::int32_t>(q));
                out.push_back(static_cast<char>(u & 0xFF));
                out.push_back(static_cast<char>((u >> 8) & 0xFF));
                out.push_back(static_cast<char>((u >> 16) & 0xFF));
                break;
            }
            case SampleFormat::kPcm32: {
                const double q = std::clamp(std::nearbyint(v * 2147483648.0), -2147483648.0, 2147483647.0);
                put_u32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(q)));
                break;
            }
            }
        }
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("short write to " + path.string());
}

std::size_t frame_count_for(Eigen::Index length, int hop) {
    if (hop <= 0) throw ParameterError("frame hop must be positive");
    if (length <= 0) return 0;
    const auto n = static_cast<std::size_t>(length);
    const auto h = static_cast<std::size_t>(hop);
    return (n + h - 1) / h + 1;
}

FrameSegmenter::FrameSegmenter(const Eigen::MatrixXd& samples, int hop)
    : samples_(&samples), hop_(hop), count_(frame_count_for(samples.rows(), hop)) {}

void FrameSegmenter::frame_into(std::size_t f, Eigen::MatrixXd& out) const {
    const Eigen::Index len = 2 * static_cast<Eigen::Index>(hop_);
    const Eigen::Index m = samples_->cols();
    out.setZero(len, m);
    // Padded index p maps to original index p - L.
    const Eigen::Index start = static_cast<Eigen::Index>(f) * hop_ - hop_;
    const Eigen::Index lo = std::max<Eigen::Index>(start, 0);
    const Eigen::Index hi = std::min<Eigen::Index>(start + len, samples_->rows());
    if (hi > lo) out.middleRows(lo - start, hi - lo) = samples_->middleRows(lo, hi - lo);
}

TimeFrame FrameSegmenter::frame(std::size_t f) const {
    TimeFrame tf;
    tf.index = f;
    frame_into(f, tf.samples);
    return tf;
}

std::vector<TimeFrame> segment_frames(const HoaSignal& signal, int hop) {
    const FrameSegmenter seg(signal.samples(), hop);
    std::vector<TimeFrame> frames;
    frames.reserve(seg.frame_count());
    for (std::size_t f = 0; f < seg.frame_count(); ++f) frames.push_back(seg.frame(f));
    return frames;
}

} // namespace hoa
