#pragma once
// End-to-end encoder/decoder for both codecs and stream measurement.

#include "hoa/baseline_td.hpp"
#include "hoa/bitstream.hpp"
#include "hoa/core_codec.hpp"
#include "hoa/freq_svd.hpp"
#include "hoa/hoa_io.hpp"
#include "hoa/noise_subst.hpp"
#include "hoa/sideinfo.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hoa {

enum class Codec { kBaseline, kProposed };
/// How the proposed encoder picks the band-split mode.
enum class ModePolicy { kRd, kFixed0, kFixed1, kAlternate };

struct EncoderConfig {
    Codec codec = Codec::kProposed;
    int hop = 1024;
    int rank = 4;
    int bg_order = 1;
    int bands = 4; // uniform mode-1 layout
    double mnmr = 1.0;
    double flatness_threshold = kDefaultFlatnessThreshold;
    double lambda = 0.01; // distortion units per bit
    ModePolicy policy = ModePolicy::kRd;
    int alternate_period = 20; // frames per mode under kAlternate
    bool noise = true;
    bool bypass = false; // raw float64 bases and spectra
    InterpolationWindow::Kind interpolation = InterpolationWindow::Kind::kTriangular;
    MaskingModel masking{};
    std::uint64_t seed = 0x5eed;

    /// Throws ParameterError/ConfigError for inconsistent values.
    void validate(int channels) const;
};

/// Codebooks and entropy tables shared by encoder and decoder.
struct CodecResources {
    std::optional<QuantizerSet> quantizers; // required unless bypass
    EntropyTables tables = EntropyTables::defaults();
};

/// Loads quantizers (and entropy tables when present) from a directory.
[[nodiscard]] CodecResources load_resources(const std::filesystem::path& dir);
inline constexpr const char* kEntropyTableFile = "entropy.tab";

/// Argmin of D + lambda R; ties go to the lower mode.
struct ModeCandidate {
    double distortion = 0.0;
    double bits = 0.0;
};
[[nodiscard]] int select_mode(std::span<const ModeCandidate> candidates, double lambda);

struct FrameStats {
    std::size_t index = 0;
    bool silent = false;
    int mode = 0;
    std::size_t payload_bits = 0;
    std::size_t side_info_bits = 0;
    std::size_t noise_bits = 0;
    std::size_t core_bits = 0;
    int noise_groups = 0;
    bool evaluated[2] = {false, false};
    ModeCandidate candidate[2];
    double max_nmr = 0.0;   // over coded bands of all core channels
    int flagged_bands = 0;  // target unreachable
};

struct EncodeOptions {
    bool record_bases = false; // reconstructed bases per frame
    bool record_core = false;  // core-channel spectra before quantization
    bool record_coded = false; // quantized core channels (entropy-table training)
};

struct EncodeResult {
    std::vector<unsigned char> stream;
    std::vector<FrameStats> frames;
    double max_nmr = 0.0;
    int flagged_bands = 0;
    std::vector<std::vector<Eigen::MatrixXd>> bases; // per frame, per band
    std::vector<Eigen::MatrixXd> core;               // per frame, L x channels
    std::vector<CodedChannel> coded;
};

/// Throws ConfigError when codebooks are missing or do not match the input.
[[nodiscard]] EncodeResult encode(const HoaSignal& signal, const EncoderConfig& cfg, const CodecResources& res,
                                  const EncodeOptions& opt = {});

struct DecodeOptions {
    bool foreground_only = false; // skip background and noise
    bool record_bases = false;
    bool record_core = false;  // dequantized core spectra
    bool record_noise = false; // synthesized noise spectra (discarded channels)
};

struct DecodeResult {
    HoaSignal signal;
    StreamHeader header;
    bool error = false; // truncation or CRC failure
    std::string message;
    std::size_t frames = 0;
    std::size_t concealed = 0;
    std::vector<int> modes;
    std::vector<std::vector<Eigen::MatrixXd>> bases;
    std::vector<Eigen::MatrixXd> core;
    std::vector<Eigen::MatrixXd> noise;
    std::vector<NoiseGroupInfo> noise_info;
};

/// Throws FormatError for an unreadable header and ConfigError for missing
/// or mismatched codebooks. Frame errors are reported through `error`.
[[nodiscard]] DecodeResult decode(std::span<const unsigned char> stream, const CodecResources& res,
                                  const DecodeOptions& opt = {});

struct StreamMeasurement {
    StreamHeader header;
    std::size_t total_bits = 0;
    std::size_t header_bits = 0;
    std::size_t framing_bits = 0;
    std::size_t flag_bits = 0; // silent + mode flags
    std::size_t side_info_bits = 0;
    std::size_t noise_bits = 0;
    std::size_t core_bits = 0;
    std::size_t padding_bits = 0;
    std::size_t corrupt_bits = 0; // payloads failing their CRC or parse
    std::size_t frames = 0;
    std::size_t silent_frames = 0;
    std::size_t mode_count[2] = {0, 0};
    std::size_t bad_frames = 0;
    double seconds = 0.0;
    [[nodiscard]] double kbps() const noexcept { return seconds > 0.0 ? total_bits / seconds / 1000.0 : 0.0; }
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Exact per-category accounting; the categories sum to total_bits.
[[nodiscard]] StreamMeasurement measure_stream(std::span<const unsigned char> stream);

[[nodiscard]] const char* codec_name(Codec c) noexcept;
[[nodiscard]] Codec parse_codec(const std::string& s);
[[nodiscard]] ModePolicy parse_policy(const std::string& s);
/// Applies keys of a JSON object to the config (unknown keys are errors).
void apply_config_json(EncoderConfig& cfg, const nlohmann::json& j);

} // namespace hoa
