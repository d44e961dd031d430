#pragma once
// Time-domain reference codec path: blockwise SVD of 2L-sample frames,
// basis matching across frames and per-sample basis interpolation.

#include "hoa/hoa_io.hpp"
#include "hoa/numlin.hpp"

#include <Eigen/Dense>

#include <vector>

namespace hoa {

/// M x r basis whose columns map r components to the ambisonics channels.
struct TruncatedBasis {
    Eigen::MatrixXd vectors;
    std::size_t frame = 0;

    [[nodiscard]] int channels() const noexcept { return static_cast<int>(vectors.rows()); }
    [[nodiscard]] int rank() const noexcept { return static_cast<int>(vectors.cols()); }
};

/// Blend weights w(l), l in [0, L), rising to exactly 1 at l = L-1.
struct InterpolationWindow {
    enum class Kind { kTriangular, kHanning };
    Kind kind = Kind::kTriangular;
    std::vector<double> values;

    /// w(l) = (l+1)/L, or 0.5 (1 - cos(pi (l+1)/L)) for Hanning.
    static InterpolationWindow make(Kind kind, int hop);
};

/// Result of splitting the L-sample advance of one frame (the trailing half
/// of the 2L analysis frame) into foreground and ambient parts.
struct FrameDecomposition {
    Eigen::MatrixXd foreground; // L x r
    Eigen::MatrixXd ambient;    // L x M, == X - X~ on the advance
    TruncatedBasis basis;
    std::vector<bool> active; // columns kept after the degeneracy check
};

/// Condition-number cap on V^T V above which a basis is treated as degenerate.
inline constexpr double kMaxGramCondition = 1e8;

/// X Vq (Vq^T Vq)^-1, the least-squares component signals for the basis Vq.
/// Throws DegenerateBasisError when cond(Vq^T Vq) exceeds the cap.
[[nodiscard]] Eigen::MatrixXd extract_foreground(const Eigen::MatrixXd& x, const Eigen::MatrixXd& basis);

/// Greedy left-to-right column selection keeping cond(Gram) under the cap.
[[nodiscard]] std::vector<bool> usable_columns(const Eigen::MatrixXd& basis);
/// M x r projector Vq_a (Vq_a^T Vq_a)^-1 over the active columns, zero
/// columns elsewhere. Component signals are X * projector.
[[nodiscard]] Eigen::MatrixXd foreground_projector(const Eigen::MatrixXd& basis, const std::vector<bool>& active);

struct BasisMatch {
    Assignment assignment;   // slot i of prev <- column permutation[i] of cur
    std::vector<bool> flips; // slot i negated
    Eigen::MatrixXd aligned; // cur reordered and sign-corrected into prev's slots
};

/// Hungarian matching on 1 - |rho| between prev and cur columns, then sign
/// correction so that dot(prev_i, aligned_i) >= 0. Throws ShapeError when
/// the shapes differ.
[[nodiscard]] BasisMatch match_bases(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur);

/// Per-sample bases (1 - w(l)) prev + w(l) cur for l in [0, L).
[[nodiscard]] std::vector<Eigen::MatrixXd> interpolate_basis(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur,
                                                             const InterpolationWindow& w);

/// Rows of `components` mapped back through the interpolated bases:
/// out(l, :) = components(l, :) * ((1 - w(l)) prev + w(l) cur)^T.
[[nodiscard]] Eigen::MatrixXd interpolated_backprojection(const Eigen::MatrixXd& components, const Eigen::MatrixXd& prev,
                                                          const Eigen::MatrixXd& cur, const InterpolationWindow& w);

/// First (t+1)^2 ACN channels. Throws ParameterError when t exceeds the
/// order implied by the column count.
[[nodiscard]] Eigen::MatrixXd order_reduce(const Eigen::MatrixXd& ambient, int t);

class BasisCoder;
struct BasisState;
struct BandSideInfo;

/// Output of one baseline encoder step.
struct BaselineFrameResult {
    FrameDecomposition decomposition;
    std::vector<BandSideInfo> side_info; // one band
    Eigen::MatrixXd background;          // L x (t+1)^2
};

/// One frame of the time-domain codec: SVD, truncation to r, basis coding
/// (quantization, matching, sign correction) through `coder`, component
/// extraction with the frame-end basis, interpolated back-projection and the
/// order-reduced ambient. `state` holds the previous reconstructed basis and
/// is advanced. The first frame interpolates from its own basis.
[[nodiscard]] BaselineFrameResult encode_frame_baseline(const TimeFrame& frame, int rank, int bg_order,
                                                        const InterpolationWindow& window, const BasisCoder& coder,
                                                        BasisState& state);

} // namespace hoa
