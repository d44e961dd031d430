#pragma once

#include "hoa/hoa_io.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace hoa {

/// 2L-sample MDCT window satisfying the Princen-Bradley condition.
struct AnalysisWindow {
    std::vector<double> values;

    /// w(l) = sin(pi/(2L) * (l + 1/2)).
    static AnalysisWindow sine(int half_length);
    /// All ones; only meaningful for overlap_add tests.
    static AnalysisWindow rectangular(int half_length);

    [[nodiscard]] int half_length() const noexcept { return static_cast<int>(values.size() / 2); }
};

/// L x M MDCT coefficients of one frame.
struct SpectralFrame {
    std::size_t index = 0;
    Eigen::MatrixXd coeffs;
};

/// Fast MDCT of a fixed size through a DCT-IV. Instances are cheap to copy;
/// the underlying FFTW plan is shared and executed re-entrantly.
class Mdct {
public:
    explicit Mdct(int half_length);

    [[nodiscard]] int half_length() const noexcept { return half_; }

    /// out[k] = sum_l w(l) x(l) cos(pi/L (l + 1/2 + L/2)(k + 1/2)), per column.
    void forward(const Eigen::MatrixXd& block, const AnalysisWindow& window, Eigen::MatrixXd& out) const;
    /// IMDCT (1/L scaling) followed by the synthesis window; consecutive
    /// outputs overlap-add to the original signal.
    void inverse(const Eigen::MatrixXd& coeffs, const AnalysisWindow& window, Eigen::MatrixXd& out) const;

    /// Single-channel versions; `in`/`out` lengths 2L/L (forward) or L/2L (inverse).
    void forward_channel(std::span<const double> in, const AnalysisWindow& window, std::span<double> out) const;
    void inverse_channel(std::span<const double> in, const AnalysisWindow& window, std::span<double> out) const;

private:
    int half_;
    void* plan_; // fftw_plan, owned by a process-wide cache
};

/// Throws ShapeError when the frame is not 2L rows for the window.
[[nodiscard]] SpectralFrame mdct_forward(const TimeFrame& frame, const AnalysisWindow& window);
[[nodiscard]] Eigen::MatrixXd mdct_inverse(const SpectralFrame& spec, const AnalysisWindow& window);

/// Sums 2L-row blocks placed at offsets f*L of the padded signal and strips
/// the L-sample head padding. Output length is (F-1)*L for F blocks.
[[nodiscard]] Eigen::MatrixXd overlap_add(std::span<const Eigen::MatrixXd> blocks, int hop);

/// Whole-signal helpers built on FrameSegmenter + Mdct.
[[nodiscard]] std::vector<SpectralFrame> analyze_signal(const HoaSignal& signal, int hop);
/// Inverse of analyze_signal; the result is truncated to `length` samples.
[[nodiscard]] Eigen::MatrixXd synthesize_signal(std::span<const SpectralFrame> frames, int hop, Eigen::Index length);

} // namespace hoa
