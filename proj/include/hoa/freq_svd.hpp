#pragma once
// Band-split SVD of MDCT frames.

#include "hoa/baseline_td.hpp"
#include "hoa/sideinfo.hpp"

#include <Eigen/Dense>

#include <vector>

namespace hoa {

/// Contiguous partition of the L MDCT bins, low to high frequency.
struct BandLayout {
    std::vector<int> lengths;

    /// n bands of L/n bins. Throws ParameterError when n does not divide L.
    static BandLayout uniform(int hop, int n);
    [[nodiscard]] int band_count() const noexcept { return static_cast<int>(lengths.size()); }
    [[nodiscard]] int total() const noexcept;
    [[nodiscard]] int offset(int band) const;
    /// Throws ShapeError unless the lengths are positive and sum to `hop`.
    void validate(int hop) const;
};

/// Per-band quantized bases and foreground spectra.
struct BandDecomposition {
    std::vector<Eigen::MatrixXd> bases;      // M x r_i
    std::vector<Eigen::MatrixXd> foreground; // l_i x r_i
    std::vector<std::vector<bool>> active;
};

/// Row blocks of S, one per band.
[[nodiscard]] std::vector<Eigen::MatrixXd> band_split(const Eigen::MatrixXd& spectrum, const BandLayout& layout);
/// Inverse of band_split.
[[nodiscard]] Eigen::MatrixXd band_concat(const std::vector<Eigen::MatrixXd>& bands);

/// Top-r_i right singular vectors of every band (canonical signs). r_i may be 0.
[[nodiscard]] std::vector<Eigen::MatrixXd> band_bases(const std::vector<Eigen::MatrixXd>& bands,
                                                      const std::vector<int>& ranks);

/// Foreground extraction against given bases; inactive columns get zero
/// components.
[[nodiscard]] BandDecomposition decompose_with_bases(const std::vector<Eigen::MatrixXd>& bands,
                                                     std::vector<Eigen::MatrixXd> bases,
                                                     std::vector<std::vector<bool>> active);

/// Unquantized decomposition: per-band SVD, truncation, projection.
[[nodiscard]] BandDecomposition band_decompose(const std::vector<Eigen::MatrixXd>& bands, const std::vector<int>& ranks);

/// Quantized decomposition through `coder` (uniform rank). The per-band side
/// info is returned in `side_info`; `state` is not modified.
[[nodiscard]] BandDecomposition band_decompose(const std::vector<Eigen::MatrixXd>& bands, const BasisCoder& coder,
                                               const BasisState& state, std::vector<BandSideInfo>& side_info);

/// Stacked Y_i V_i^T, L x M.
[[nodiscard]] Eigen::MatrixXd foreground_spectrum(const BandDecomposition& dec);
/// S - foreground_spectrum(dec).
[[nodiscard]] Eigen::MatrixXd compute_residual(const Eigen::MatrixXd& spectrum, const BandDecomposition& dec);

struct CompactionGain {
    double energy_global = 0.0; // top-r squared singular values of S
    double energy_banded = 0.0; // summed over bands of S_i
};

[[nodiscard]] CompactionGain compaction_gain(const Eigen::MatrixXd& spectrum, int rank, const BandLayout& layout);

} // namespace hoa
