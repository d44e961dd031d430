#include "hoa/transform.hpp"

#include "hoa/error.hpp"
#include "hoa/simd.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

namespace hoa {

AnalysisWindow AnalysisWindow::sine(int half_length) {
    if (half_length <= 0) throw ParameterError("window half length must be positive");
    AnalysisWindow w;
    const int n = 2 * half_length;
    w.values.resize(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l)
        w.values[static_cast<std::size_t>(l)] = std::sin(std::numbers::pi / n * (l + 0.5));
    return w;
}

AnalysisWindow AnalysisWindow::rectangular(int half_length) {
    if (half_length <= 0) throw ParameterError("window half length must be positive");
    AnalysisWindow w;
    w.values.assign(static_cast<std::size_t>(2 * half_length), 1.0);
    return w;
}

namespace {

// The FFTW planner is not thread-safe; execution of an existing plan on new
// arrays is.
fftw_plan dct4_plan(int n) {
    static std::mutex mutex;
    static std::map<int, fftw_plan> plans;
    const std::lock_guard lock(mutex);
    auto it = plans.find(n);
    if (it != plans.end()) return it->second;
    std::vector<double> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
    fftw_plan p = fftw_plan_r2r_1d(n, in.data(), out.data(), FFTW_REDFT11, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (p == nullptr) throw NumericError("FFTW failed to plan a DCT-IV of size " + std::to_string(n));
    plans.emplace(n, p);
    return p;
}

} // namespace

Mdct::Mdct(int half_length) : half_(half_length) {
    if (half_length <= 0 || half_length % 2 != 0) throw ParameterError("MDCT half length must be positive and even");
    plan_ = dct4_plan(half_length);
}

void Mdct::forward_channel(std::span<const double> in, const AnalysisWindow& window, std::span<double> out) const {
    const int L = half_;
    const int h = L / 2;
    std::vector<double> z(static_cast<std::size_t>(2 * L));
    simd::multiply(in, window.values, z);
    std::vector<double> u(static_cast<std::size_t>(L));
    // Fold the four quarters [a b c d] into (-c_r - d, a - b_r).
    for (int n = 0; n < h; ++n) {
        u[static_cast<std::size_t>(n)] = -z[static_cast<std::size_t>(3 * h - 1 - n)] - z[static_cast<std::size_t>(3 * h + n)];
        u[static_cast<std::size_t>(n + h)] = z[static_cast<std::size_t>(n)] - z[static_cast<std::size_t>(L - 1 - n)];
    }
    fftw_execute_r2r(static_cast<fftw_plan>(plan_), u.data(), out.data());
    // REDFT11 carries a factor 2.
    for (double& v : out) v *= 0.5;
}

void Mdct::inverse_channel(std::span<const double> in, const AnalysisWindow& window, std::span<double> out) const {
    const int L = half_;
    const int h = L / 2;
    std::vector<double> src(in.begin(), in.end());
    std::vector<double> u(static_cast<std::size_t>(L));
    fftw_execute_r2r(static_cast<fftw_plan>(plan_), src.data(), u.data());
    // DCT-IV^-1(X) = REDFT11(X) / L.
    const double s = 1.0 / L;
    for (int n = 0; n < h; ++n) {
        const double u1 = u[static_cast<std::size_t>(n)] * s;
        const double u2 = u[static_cast<std::size_t>(n + h)] * s;
        out[static_cast<std::size_t>(n)] = u2;
        out[static_cast<std::size_t>(L - 1 - n)] = -u2;
        out[static_cast<std::size_t>(3 * h - 1 - n)] = -u1;
        out[static_cast<std::size_t>(3 * h + n)] = -u1;
    }
    simd::multiply(std::span<const double>(out.data(), out.size()), window.values, out);
}

void Mdct::forward(const Eigen::MatrixXd& block, const AnalysisWindow& window, Eigen::MatrixXd& out) const {
    const Eigen::Index n2 = 2 * static_cast<Eigen::Index>(half_);
    if (block.rows() != n2 || static_cast<Eigen::Index>(window.values.size()) != n2)
        throw ShapeError("MDCT input must have 2L = " + std::to_string(n2) + " rows and a matching window");
    out.resize(half_, block.cols());
    for (Eigen::Index c = 0; c < block.cols(); ++c)
        forward_channel(std::span<const double>(block.col(c).data(), static_cast<std::size_t>(n2)), window,
                        std::span<double>(out.col(c).data(), static_cast<std::size_t>(half_)));
}

void Mdct::inverse(const Eigen::MatrixXd& coeffs, const AnalysisWindow& window, Eigen::MatrixXd& out) const {
    const Eigen::Index n2 = 2 * static_cast<Eigen::Index>(half_);
    if (coeffs.rows() != half_ || static_cast<Eigen::Index>(window.values.size()) != n2)
        throw ShapeError("IMDCT input must have L = " + std::to_string(half_) + " rows and a matching window");
    out.resize(n2, coeffs.cols());
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c)
        inverse_channel(std::span<const double>(coeffs.col(c).data(), static_cast<std::size_t>(half_)), window,
                        std::span<double>(out.col(c).data(), static_cast<std::size_t>(n2)));
}

SpectralFrame mdct_forward(const TimeFrame& frame, const AnalysisWindow& window) {
    const int L = window.half_length();
    if (frame.samples.rows() != 2 * static_cast<Eigen::Index>(L))
        throw ShapeError("frame has " + std::to_string(frame.samples.rows()) + " rows, window expects " +
                         std::to_string(2 * L));
    SpectralFrame sf;
    sf.index = frame.index;
    Mdct(L).forward(frame.samples, window, sf.coeffs);
    return sf;
}

Eigen::MatrixXd mdct_inverse(const SpectralFrame& spec, const AnalysisWindow& window) {
    Eigen::MatrixXd out;
    Mdct(window.half_length()).inverse(spec.coeffs, window, out);
    return out;
}

Eigen::MatrixXd overlap_add(std::span<const Eigen::MatrixXd> blocks, int hop) {
    if (hop <= 0) throw ParameterError("hop must be positive");
    if (blocks.empty()) return Eigen::MatrixXd(0, 0);
    const Eigen::Index L = hop;
    const Eigen::Index cols = blocks.front().cols();
    const auto count = static_cast<Eigen::Index>(blocks.size());
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero((count + 1) * L, cols);
    for (Eigen::Index f = 0; f < count; ++f) {
        const auto& b = blocks[static_cast<std::size_t>(f)];
        if (b.rows() != 2 * L || b.cols() != cols) throw ShapeError("overlap_add: inconsistent block shapes");
        padded.middleRows(f * L, 2 * L) += b;
    }
    // Strip the head pad and the final half block, which has no partner.
    return padded.middleRows(L, (count - 1) * L);
}

std::vector<SpectralFrame> analyze_signal(const HoaSignal& signal, int hop) {
    const FrameSegmenter seg(signal.samples(), hop);
    const Mdct mdct(hop);
    const AnalysisWindow window = AnalysisWindow::sine(hop);
    std::vector<SpectralFrame> frames(seg.frame_count());
    Eigen::MatrixXd block;
    for (std::size_t f = 0; f < seg.frame_count(); ++f) {
        seg.frame_into(f, block);
        frames[f].index = f;
        mdct.forward(block, window, frames[f].coeffs);
    }
    return frames;
}

Eigen::MatrixXd synthesize_signal(std::span<const SpectralFrame> frames, int hop, Eigen::Index length) {
    const Mdct mdct(hop);
    const AnalysisWindow window = AnalysisWindow::sine(hop);
    std::vector<Eigen::MatrixXd> blocks(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) mdct.inverse(frames[f].coeffs, window, blocks[f]);
    Eigen::MatrixXd out = overlap_add(blocks, hop);
    if (out.rows() < length) {
        Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(length, out.cols());
        grown.topRows(out.rows()) = out;
        return grown;
    }
    return out.topRows(length);
}

} // namespace hoa
