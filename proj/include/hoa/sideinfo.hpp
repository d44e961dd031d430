#pragma once
// Predictive coding of truncated bases across frames.

#include "hoa/baseline_td.hpp"
#include "hoa/bitio.hpp"
#include "hoa/hoa_io.hpp"
#include "hoa/numlin.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace hoa {

/// Codebooks for prediction coefficients (scalar), prediction residuals and
/// unpredicted (intra) columns, both M-dimensional.
struct QuantizerSet {
    Codebook coeff;
    Codebook residual;
    Codebook intra;

    [[nodiscard]] int channels() const noexcept { return residual.dimension(); }
    /// CRC32 over the three serialized codebooks; stored in stream headers.
    [[nodiscard]] std::uint32_t hash() const;
};

inline constexpr const char* kCoeffCodebookFile = "coeff.cb";
inline constexpr const char* kResidualCodebookFile = "residual.cb";
inline constexpr const char* kIntraCodebookFile = "intra.cb";

/// Throws ConfigError naming the training command when files are missing.
[[nodiscard]] QuantizerSet load_quantizers(const std::filesystem::path& dir);
void save_quantizers(const QuantizerSet& q, const std::filesystem::path& dir);

/// Per-column prediction v_cur ~ rho v_prev + residual.
struct ColumnPrediction {
    double rho = 0.0;
    Eigen::VectorXd residual;
    bool intra = false; // zero-norm column: no prediction possible
};

/// rho_i = <p_i, c_i> / (|p_i| |c_i|), residual_i = c_i - rho_i p_i.
/// Inputs must already be matched and sign-aligned.
[[nodiscard]] std::vector<ColumnPrediction> predict_basis(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur);

struct ColumnCode {
    bool intra = true;
    int coeff_index = 0;
    int residual_index = 0;
    int intra_index = 0;
};

/// Side information of one band of one frame.
struct BandSideInfo {
    int predictor = 0;            // previous-frame matrix used for prediction
    std::vector<int> permutation; // slot i <- SVD column permutation[i]
    std::vector<bool> flips;      // slot i negated
    std::vector<bool> active;     // slot kept after the degeneracy check
    std::vector<ColumnCode> columns;
    Eigen::MatrixXd raw;          // unquantized basis (bypass streams only)
};

/// Decoder-visible prediction state: the reconstructed bases of the last
/// coded frame, one per band of its layout.
struct BasisState {
    std::vector<Eigen::MatrixXd> bases;
    int mode = -1;

    [[nodiscard]] bool has_previous() const noexcept { return !bases.empty(); }
};

/// Encodes and reconstructs bases. Encoder and decoder both call
/// reconstruct(), so their states stay bit-identical.
class BasisCoder {
public:
    /// Quantized coder.
    BasisCoder(QuantizerSet quantizers, int rank);
    /// Bypass coder: bases are transmitted as raw float64.
    static BasisCoder bypass(int channels, int rank);

    [[nodiscard]] bool is_bypass() const noexcept { return bypass_; }
    [[nodiscard]] int rank() const noexcept { return rank_; }
    [[nodiscard]] int channels() const noexcept { return channels_; }
    [[nodiscard]] const QuantizerSet* quantizers() const noexcept { return bypass_ ? nullptr : &q_; }

    struct BandResult {
        BandSideInfo info;
        Eigen::MatrixXd reconstructed; // M x r, unit-norm columns
    };

    /// Codes `band_count` target bases (SVD order, canonical signs) against
    /// `state`. Does not modify the state.
    [[nodiscard]] std::vector<BandResult> encode(const std::vector<Eigen::MatrixXd>& targets, const BasisState& state) const;

    /// Reconstruction shared by encoder and decoder. Throws StreamError for
    /// out-of-range indices.
    [[nodiscard]] Eigen::MatrixXd reconstruct(const BandSideInfo& info, const BasisState& state) const;

    void write(BitWriter& out, const BandSideInfo& info, const BasisState& state, int band_count) const;
    /// `band` is the band's index within the frame's layout.
    [[nodiscard]] BandSideInfo read(BitReader& in, const BasisState& state, int band_count, int band) const;

    /// Replaces the state by the frame's reconstructed bases.
    static void commit(BasisState& state, std::vector<Eigen::MatrixXd> bases, int mode);

private:
    BasisCoder(int channels, int rank, bool bypass);
    [[nodiscard]] int predictor_choice_count(const BasisState& state, int band_count) const noexcept;
    [[nodiscard]] Eigen::VectorXd reconstruct_column(const ColumnCode& code, bool flip, const Eigen::VectorXd* prev) const;

    QuantizerSet q_;
    int channels_ = 0;
    int rank_ = 0;
    bool bypass_ = false;
};

/// Lehmer rank of a permutation of [0, n) and its inverse.
[[nodiscard]] std::uint64_t permutation_rank(const std::vector<int>& perm);
[[nodiscard]] std::vector<int> permutation_unrank(std::uint64_t rank, int n);
[[nodiscard]] std::uint64_t factorial(int n);

struct TrainingConfig {
    int hop = 1024;
    int rank = 4;
    int coeff_size = 16;
    int residual_size = 256;
    int intra_size = 256;
    int max_frames = 10000;
    int band_count = 4; // harvest single-band and banded bases
    std::uint64_t seed = 0x5eed;
    int max_iterations = 60;
};

struct TrainingReport {
    std::size_t frames = 0;
    std::size_t coeff_vectors = 0;
    std::size_t residual_vectors = 0;
    std::size_t intra_vectors = 0;
    bool degenerate = false;
};

/// Harvests (rho, residual) pairs and intra columns from both codecs' basis
/// analysis over the corpus (open loop, unquantized matching) and trains one
/// GLA codebook per quantizer. Throws TrainingError when the corpus yields
/// fewer vectors than a codebook's size.
[[nodiscard]] QuantizerSet train_quantizers(const std::vector<HoaSignal>& corpus, const TrainingConfig& config,
                                            TrainingReport* report = nullptr);

} // namespace hoa
