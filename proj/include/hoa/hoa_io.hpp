#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hoa {

/// Channel normalization metadata. The codec never rescales channels; this is
/// carried along so tools can report what the file claims.
enum class Normalization { kSn3d, kN3d };

/// Multichannel time-domain HOA audio in ACN channel order.
/// Samples are stored column-per-channel (rows = time).
class HoaSignal {
public:
    HoaSignal() = default;
    /// Throws ShapeError when samples.cols() is not (order+1)^2.
    HoaSignal(std::uint32_t sample_rate, int order, Eigen::MatrixXd samples,
              Normalization norm = Normalization::kSn3d);

    /// Builds a signal from a channel count, deriving the order.
    static HoaSignal from_channels(std::uint32_t sample_rate, Eigen::MatrixXd samples);

    [[nodiscard]] std::uint32_t sample_rate() const noexcept { return sample_rate_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int channel_count() const noexcept { return static_cast<int>(samples_.cols()); }
    [[nodiscard]] Eigen::Index length() const noexcept { return samples_.rows(); }
    [[nodiscard]] Normalization normalization() const noexcept { return norm_; }
    [[nodiscard]] const Eigen::MatrixXd& samples() const noexcept { return samples_; }
    [[nodiscard]] Eigen::MatrixXd& samples() noexcept { return samples_; }

private:
    std::uint32_t sample_rate_ = 48000;
    int order_ = 0;
    Eigen::MatrixXd samples_ = Eigen::MatrixXd::Zero(0, 1);
    Normalization norm_ = Normalization::kSn3d;
};

[[nodiscard]] constexpr int channels_for_order(int order) noexcept { return (order + 1) * (order + 1); }
/// Returns the order N with (N+1)^2 == channels, or -1.
[[nodiscard]] int order_for_channels(int channels) noexcept;

enum class SampleFormat { kPcm16, kPcm24, kPcm32, kFloat32 };

/// Reads RIFF/WAVE (PCM 16/24/32, IEEE float32, WAVE_FORMAT_EXTENSIBLE).
/// Integer samples are scaled to [-1, 1). Throws FormatError or ShapeError.
[[nodiscard]] HoaSignal read_hoa_wav(const std::filesystem::path& path);
/// Float output is bit-exact for float-representable samples; integer output
/// clips to [-1, 1) and rounds to the nearest step. Throws IoError.
void write_hoa_wav(const HoaSignal& signal, const std::filesystem::path& path,
                   SampleFormat format = SampleFormat::kFloat32);

/// One 2L-sample analysis frame. Frame f starts at offset f*L of the signal
/// after L samples of zero padding were prepended.
struct TimeFrame {
    std::size_t index = 0;
    Eigen::MatrixXd samples; // 2L x M
};

/// Lazily cut 50%-overlapped frames. The signal is padded with L zeros at the
/// head and with zeros at the tail up to a whole number of hops plus L, so
/// every original sample lies in exactly two frames.
class FrameSegmenter {
public:
    FrameSegmenter(const Eigen::MatrixXd& samples, int hop);

    [[nodiscard]] std::size_t frame_count() const noexcept { return count_; }
    [[nodiscard]] int hop() const noexcept { return hop_; }
    /// Frame f as a 2L x M matrix.
    [[nodiscard]] TimeFrame frame(std::size_t f) const;
    /// Writes frame f into `out` (resized as needed).
    void frame_into(std::size_t f, Eigen::MatrixXd& out) const;

private:
    const Eigen::MatrixXd* samples_;
    int hop_;
    std::size_t count_;
};

/// Number of frames produced for `length` samples with hop L.
[[nodiscard]] std::size_t frame_count_for(Eigen::Index length, int hop);

/// Eager variant of FrameSegmenter. Throws ParameterError for L <= 0.
[[nodiscard]] std::vector<TimeFrame> segment_frames(const HoaSignal& signal, int hop);

} // namespace hoa
