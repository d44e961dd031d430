#include "hoa/baseline_td.hpp"

#include "hoa/error.hpp"
#include "hoa/sideinfo.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace hoa {

InterpolationWindow InterpolationWindow::make(Kind kind, int hop) {
    if (hop <= 0) throw ParameterError("interpolation window needs a positive hop");
    InterpolationWindow w;
    w.kind = kind;
    w.values.resize(static_cast<std::size_t>(hop));
    for (int l = 0; l < hop; ++l) {
        const double x = static_cast<double>(l + 1) / hop;
        w.values[static_cast<std::size_t>(l)] =
            kind == Kind::kTriangular ? x : 0.5 * (1.0 - std::cos(std::numbers::pi * x));
    }
    w.values.back() = 1.0;
    return w;
}

namespace {

double gram_condition(const Eigen::MatrixXd& g) {
    if (g.rows() == 0) return 1.0;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

} // namespace

Eigen::MatrixXd extract_foreground(const Eigen::MatrixXd& x, const Eigen::MatrixXd& basis) {
    if (x.cols() != basis.rows()) throw ShapeError("extract_foreground: channel count mismatch");
    const Eigen::MatrixXd g = basis.transpose() * basis;
    if (gram_condition(g) > kMaxGramCondition) {
        const std::vector<bool> ok = usable_columns(basis);
        int bad = 0;
        while (bad < static_cast<int>(ok.size()) && ok[static_cast<std::size_t>(bad)]) ++bad;
        throw DegenerateBasisError("extract_foreground: basis Gram matrix is ill-conditioned", bad);
    }
    // X V (V^T V)^-1 = ((V^T V)^-1 V^T X^T)^T with a symmetric Gram matrix.
    return g.ldlt().solve(basis.transpose() * x.transpose()).transpose();
}

std::vector<bool> usable_columns(const Eigen::MatrixXd& basis) {
    std::vector<bool> keep(static_cast<std::size_t>(basis.cols()), false);
    std::vector<Eigen::Index> chosen;
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        if (!(basis.col(j).squaredNorm() > 0.0)) continue;
        chosen.push_back(j);
        Eigen::MatrixXd sub(basis.rows(), static_cast<Eigen::Index>(chosen.size()));
        for (std::size_t c = 0; c < chosen.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = basis.col(chosen[c]);
        if (gram_condition(sub.transpose() * sub) > kMaxGramCondition) {
            chosen.pop_back();
            continue;
        }
        keep[static_cast<std::size_t>(j)] = true;
    }
    return keep;
}

Eigen::MatrixXd foreground_projector(const Eigen::MatrixXd& basis, const std::vector<bool>& active) {
    if (active.size() != static_cast<std::size_t>(basis.cols())) throw ShapeError("active mask size mismatch");
    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < active.size(); ++j)
        if (active[j]) idx.push_back(static_cast<Eigen::Index>(j));
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(basis.rows(), basis.cols());
    if (idx.empty()) return p;
    Eigen::MatrixXd sub(basis.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = basis.col(idx[c]);
    const Eigen::MatrixXd g = sub.transpose() * sub;
    const Eigen::MatrixXd ps = sub * g.ldlt().solve(Eigen::MatrixXd::Identity(g.rows(), g.cols()));
    for (std::size_t c = 0; c < idx.size(); ++c) p.col(idx[c]) = ps.col(static_cast<Eigen::Index>(c));
    return p;
}

BasisMatch match_bases(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur) {
    if (prev.rows() != cur.rows() || prev.cols() != cur.cols()) throw ShapeError("match_bases: shape mismatch");
    const Eigen::Index r = cur.cols();
    Eigen::MatrixXd cost(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const double ni = prev.col(i).norm();
        for (Eigen::Index j = 0; j < r; ++j) {
            const double nj = cur.col(j).norm();
            const double rho = (ni > 0.0 && nj > 0.0) ? prev.col(i).dot(cur.col(j)) / (ni * nj) : 0.0;
            cost(i, j) = 1.0 - std::abs(rho);
        }
    }
    BasisMatch m;
    m.assignment = hungarian(cost);
    m.flips.assign(static_cast<std::size_t>(r), false);
    m.aligned.resize(cur.rows(), r);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto j = m.assignment.permutation[static_cast<std::size_t>(i)];
        const bool flip = prev.col(i).dot(cur.col(j)) < 0.0;
        m.flips[static_cast<std::size_t>(i)] = flip;
        m.aligned.col(i) = flip ? Eigen::VectorXd(-cur.col(j)) : Eigen::VectorXd(cur.col(j));
    }
    return m;
}

std::vector<Eigen::MatrixXd> interpolate_basis(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur,
                                               const InterpolationWindow& w) {
    if (prev.rows() != cur.rows() || prev.cols() != cur.cols()) throw ShapeError("interpolate_basis: shape mismatch");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(w.values.size());
    for (const double wl : w.values) out.emplace_back((1.0 - wl) * prev + wl * cur);
    return out;
}

Eigen::MatrixXd interpolated_backprojection(const Eigen::MatrixXd& components, const Eigen::MatrixXd& prev,
                                            const Eigen::MatrixXd& cur, const InterpolationWindow& w) {
    if (components.rows() != static_cast<Eigen::Index>(w.values.size()) || components.cols() != cur.cols() ||
        prev.rows() != cur.rows() || prev.cols() != cur.cols())
        throw ShapeError("interpolated_backprojection: shape mismatch");
    const Eigen::MatrixXd a = components * prev.transpose();
    const Eigen::MatrixXd b = components * cur.transpose();
    Eigen::MatrixXd out(components.rows(), cur.rows());
    for (Eigen::Index l = 0; l < components.rows(); ++l) {
        const double wl = w.values[static_cast<std::size_t>(l)];
        out.row(l) = (1.0 - wl) * a.row(l) + wl * b.row(l);
    }
    return out;
}

Eigen::MatrixXd order_reduce(const Eigen::MatrixXd& ambient, int t) {
    const int n = order_for_channels(static_cast<int>(ambient.cols()));
    if (n < 0) throw ShapeError("order_reduce: channel count is not (N+1)^2");
    if (t < 0 || t > n) throw ParameterError("order_reduce: reduced order must lie in [0, N]");
    return ambient.leftCols(channels_for_order(t));
}

BaselineFrameResult encode_frame_baseline(const TimeFrame& frame, int rank, int bg_order,
                                          const InterpolationWindow& window, const BasisCoder& coder,
                                          BasisState& state) {
    const auto hop = static_cast<Eigen::Index>(window.values.size());
    if (frame.samples.rows() != 2 * hop) throw ShapeError("encode_frame_baseline: frame is not 2L rows");
    if (frame.samples.cols() != coder.channels() || rank != coder.rank())
        throw ConfigError("encode_frame_baseline: coder does not match the frame shape");

    const SvdResult dec = svd(frame.samples);
    std::vector<BasisCoder::BandResult> coded = coder.encode({dec.right.leftCols(rank)}, state);
    BaselineFrameResult out;
    FrameDecomposition& d = out.decomposition;
    d.basis.vectors = coded.front().reconstructed;
    d.basis.frame = frame.index;
    d.active = coded.front().info.active;
    const Eigen::MatrixXd prev = state.has_previous() ? state.bases.front() : d.basis.vectors;

    const Eigen::MatrixXd advance = frame.samples.bottomRows(hop);
    d.foreground = advance * foreground_projector(d.basis.vectors, d.active);
    d.ambient = advance - interpolated_backprojection(d.foreground, prev, d.basis.vectors, window);
    out.background = order_reduce(d.ambient, bg_order);
    out.side_info.push_back(std::move(coded.front().info));
    BasisCoder::commit(state, {d.basis.vectors}, 0);
    return out;
}

} // namespace hoa
