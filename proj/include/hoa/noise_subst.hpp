#pragma once
// Noise substitution for ambient channels removed by order reduction.

#include "hoa/bitio.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hoa {

/// Contiguous MDCT-bin groups covering [0, L).
class FrequencyGroups {
public:
    /// AAC scalefactor-band offsets for 48 kHz long windows (49 groups, L = 1024).
    static FrequencyGroups aac48k_long();
    /// The AAC table rescaled to another hop. Throws ParameterError when
    /// rescaling would produce empty groups.
    static FrequencyGroups for_hop(int hop);
    /// Offsets start at 0, strictly increase and end at L. Throws ParameterError.
    static FrequencyGroups from_offsets(std::vector<int> offsets);
    /// JSON file {"offsets": [...]}.
    static FrequencyGroups load(const std::filesystem::path& path);

    [[nodiscard]] int count() const noexcept { return static_cast<int>(offsets_.size()) - 1; }
    [[nodiscard]] int begin(int j) const { return offsets_.at(static_cast<std::size_t>(j)); }
    [[nodiscard]] int end(int j) const { return offsets_.at(static_cast<std::size_t>(j) + 1); }
    [[nodiscard]] int width(int j) const { return end(j) - begin(j); }
    [[nodiscard]] int bins() const noexcept { return offsets_.back(); }
    [[nodiscard]] const std::vector<int>& offsets() const noexcept { return offsets_; }

private:
    std::vector<int> offsets_;
};

/// Geometric over arithmetic mean of floored powers; 1 for an empty or all-zero group.
[[nodiscard]] double spectral_flatness(std::span<const double> power);

// Real MDCT powers of white noise give per-channel flatness around 0.3, so the
// cutoff sits well below that.
inline constexpr double kDefaultFlatnessThreshold = 0.18;
inline constexpr int kEnergyLevels = 64;
inline constexpr double kEnergyTopDb = 30.0;
inline constexpr double kEnergyRangeDb = 96.0;

/// 6-bit log quantizer of a per-bin power, levels spaced 96/63 dB apart with
/// the top level at +30 dB. Returns -1 below the lowest level.
[[nodiscard]] int quantize_energy(double power);
[[nodiscard]] double dequantize_energy(int index);

struct NoiseGroupInfo {
    std::vector<bool> active;
    std::vector<int> energy_index;
    std::vector<double> flatness; // encoder-side diagnostics, not transmitted

    [[nodiscard]] bool empty() const noexcept { return active.empty(); }
    [[nodiscard]] int active_count() const noexcept;
};

/// Per group: mean over channels of the per-channel flatness; active when
/// above `threshold` and the mean power reaches the lowest energy level.
/// `discarded` is L x K; K = 0 yields an empty info.
[[nodiscard]] NoiseGroupInfo analyze_discarded(const Eigen::MatrixXd& discarded, const FrequencyGroups& groups,
                                               double threshold = kDefaultFlatnessThreshold);

/// L x channels spectra. Active groups hold Gaussian noise rescaled so the
/// mean power over the group's bins equals the dequantized energy in every
/// channel; other bins are zero.
[[nodiscard]] Eigen::MatrixXd synthesize_noise(const NoiseGroupInfo& info, const FrequencyGroups& groups,
                                               int channel_count, std::uint64_t stream_seed, std::uint64_t frame);

/// Group-count-bit mask followed by 6 bits per active group.
void write_noise_info(BitWriter& out, const NoiseGroupInfo& info);
[[nodiscard]] NoiseGroupInfo read_noise_info(BitReader& in, int group_count);

/// Seed for one (stream, frame, channel) noise generator.
[[nodiscard]] std::uint64_t noise_seed(std::uint64_t stream_seed, std::uint64_t frame, std::uint64_t channel) noexcept;

} // namespace hoa
