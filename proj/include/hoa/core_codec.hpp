#pragma once
// AAC-like transform coder for the component channels: a two-slope spreading
// masking model, scalefactor search under a noise-to-mask limit and
// context-adaptive range coding of the integer spectra.

#include "hoa/noise_subst.hpp"
#include "hoa/range_coder.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hoa {

struct MaskingModel {
    double spread_up_db = 15.0;   // attenuation per band toward higher bands
    double spread_down_db = 30.0; // attenuation per band toward lower bands
    double offset_db = 18.0;      // signal-to-mask margin
    double floor_per_bin = 1e-7;  // absolute threshold, MDCT power units
};

/// Allowed noise power per band (sum over the band's bins), strictly positive.
struct MaskingCurve {
    std::vector<double> band_mask;
};

[[nodiscard]] MaskingCurve masking_threshold(std::span<const double> spectrum, const FrequencyGroups& groups,
                                             const MaskingModel& model = {});

inline constexpr int kMinScalefactor = -80;
inline constexpr int kMaxScalefactor = 80;
inline constexpr double kRoundingOffset = 0.4054;

/// Quantizer step 2^(sf/4), i.e. 1.5 dB per scalefactor step.
[[nodiscard]] double scalefactor_step(int sf);
/// |q|^(4/3) * 2^(sf/4) with the sign of q.
[[nodiscard]] double dequantize_value(std::int32_t q, int sf);

struct CodedChannel {
    std::vector<int> scalefactors;   // per band; 0 for all-zero bands
    std::vector<std::int32_t> quant; // L indices
    std::vector<double> nmr;         // achieved noise-to-mask ratio per band
    std::vector<bool> flagged;       // target unreachable at the finest step
};

/// Per band the coarsest scalefactor whose noise/mask stays <= target.
/// Bands whose energy is already below target * mask are zeroed.
/// Throws ParameterError for target <= 0.
[[nodiscard]] CodedChannel quantize_mnmr(std::span<const double> spectrum, const MaskingCurve& mask,
                                         const FrequencyGroups& groups, double target);

[[nodiscard]] std::vector<double> dequantize_channel(const CodedChannel& c, const FrequencyGroups& groups);

/// Per band sum (original - decoded)^2 / mask.
[[nodiscard]] std::vector<double> measure_nmr(std::span<const double> original, std::span<const double> decoded,
                                              const MaskingCurve& mask, const FrequencyGroups& groups);

/// Priors for the adaptive entropy models.
struct EntropyTables {
    static constexpr int kClasses = 7;       // 0 = zero band, 1..6 by largest magnitude
    static constexpr int kMagnitudes = 17;   // 0..15 plus escape
    static constexpr int kSfSymbols = 33;    // deltas -16..15 plus escape
    std::uint16_t band_class[kClasses][kClasses]{}; // [previous class][class]
    std::uint16_t magnitude[kClasses - 1][kMagnitudes]{};
    std::uint16_t sf_delta[kSfSymbols]{};

    /// Parametric priors (geometric magnitude laws per class).
    static EntropyTables defaults();
    /// Counts symbols of the given channels and scales them to priors.
    static EntropyTables train(std::span<const CodedChannel> channels, const FrequencyGroups& groups);
    [[nodiscard]] std::vector<unsigned char> serialize() const;
    static EntropyTables parse(std::span<const unsigned char> bytes);
    void save(const std::filesystem::path& path) const;
    static EntropyTables load(const std::filesystem::path& path);
    [[nodiscard]] std::uint32_t hash() const;
};

/// Band class from the largest magnitude in the band.
[[nodiscard]] int band_class(std::span<const std::int32_t> q);

/// Codes any number of channels into one range-coded payload. Models are
/// shared by the channels and start from the priors.
class CoreEntropyEncoder {
public:
    CoreEntropyEncoder(const EntropyTables& tables, const FrequencyGroups& groups);
    void encode(const CodedChannel& c);
    [[nodiscard]] std::vector<unsigned char> finish();

private:
    RangeEncoder rc_;
    const FrequencyGroups* groups_;
    std::vector<AdaptiveModel> class_models_;
    std::vector<AdaptiveModel> magnitude_models_;
    AdaptiveModel sf_model_;
};

class CoreEntropyDecoder {
public:
    CoreEntropyDecoder(std::span<const unsigned char> data, const EntropyTables& tables, const FrequencyGroups& groups);
    /// Throws StreamError on corrupt data.
    [[nodiscard]] CodedChannel decode();

private:
    RangeDecoder rc_;
    const FrequencyGroups* groups_;
    std::vector<AdaptiveModel> class_models_;
    std::vector<AdaptiveModel> magnitude_models_;
    AdaptiveModel sf_model_;
};

[[nodiscard]] std::vector<unsigned char> entropy_encode(const CodedChannel& c, const EntropyTables& tables,
                                                        const FrequencyGroups& groups);
[[nodiscard]] CodedChannel entropy_decode(std::span<const unsigned char> bytes, const EntropyTables& tables,
                                          const FrequencyGroups& groups);

/// Reference cost: 8-bit scalefactor per band plus, per coefficient, a sign
/// bit and enough bits for the channel's largest magnitude.
[[nodiscard]] std::size_t fixed_width_bits(const CodedChannel& c, const FrequencyGroups& groups);

} // namespace hoa
