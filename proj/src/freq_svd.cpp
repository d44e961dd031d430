#include "hoa/freq_svd.hpp"

#include "hoa/error.hpp"

#include <numeric>

namespace hoa {

BandLayout BandLayout::uniform(int hop, int n) {
    if (n <= 0 || hop <= 0 || hop % n != 0) throw ParameterError("band count must divide the hop");
    return BandLayout{std::vector<int>(static_cast<std::size_t>(n), hop / n)};
}

int BandLayout::total() const noexcept { return std::accumulate(lengths.begin(), lengths.end(), 0); }

int BandLayout::offset(int band) const {
    if (band < 0 || band > band_count()) throw ParameterError("band index out of range");
    return std::accumulate(lengths.begin(), lengths.begin() + band, 0);
}

void BandLayout::validate(int hop) const {
    if (lengths.empty()) throw ShapeError("band layout is empty");
    for (const int l : lengths)
        if (l <= 0) throw ShapeError("band lengths must be positive");
    if (total() != hop) throw ShapeError("band lengths must sum to L");
}

std::vector<Eigen::MatrixXd> band_split(const Eigen::MatrixXd& spectrum, const BandLayout& layout) {
    layout.validate(static_cast<int>(spectrum.rows()));
    std::vector<Eigen::MatrixXd> out;
    Eigen::Index row = 0;
    for (const int l : layout.lengths) {
        out.emplace_back(spectrum.middleRows(row, l));
        row += l;
    }
    return out;
}

Eigen::MatrixXd band_concat(const std::vector<Eigen::MatrixXd>& bands) {
    Eigen::Index rows = 0;
    for (const auto& b : bands) rows += b.rows();
    Eigen::MatrixXd out(rows, bands.empty() ? 0 : bands.front().cols());
    rows = 0;
    for (const auto& b : bands) {
        out.middleRows(rows, b.rows()) = b;
        rows += b.rows();
    }
    return out;
}

std::vector<Eigen::MatrixXd> band_bases(const std::vector<Eigen::MatrixXd>& bands, const std::vector<int>& ranks) {
    if (ranks.size() != bands.size()) throw ShapeError("one rank per band required");
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        const int r = ranks[b];
        if (r < 0 || r > bands[b].cols() || r > bands[b].rows())
            throw ParameterError("band rank must not exceed the band length or channel count");
        if (r == 0) {
            out.emplace_back(bands[b].cols(), 0);
            continue;
        }
        out.emplace_back(svd(bands[b]).right.leftCols(r));
    }
    return out;
}

BandDecomposition decompose_with_bases(const std::vector<Eigen::MatrixXd>& bands, std::vector<Eigen::MatrixXd> bases,
                                       std::vector<std::vector<bool>> active) {
    if (bases.size() != bands.size() || active.size() != bands.size()) throw ShapeError("one basis per band required");
    BandDecomposition d;
    for (std::size_t b = 0; b < bands.size(); ++b) {
        if (bases[b].rows() != bands[b].cols()) throw ShapeError("basis channel count mismatch");
        d.foreground.emplace_back(bands[b] * foreground_projector(bases[b], active[b]));
    }
    d.bases = std::move(bases);
    d.active = std::move(active);
    return d;
}

BandDecomposition band_decompose(const std::vector<Eigen::MatrixXd>& bands, const std::vector<int>& ranks) {
    std::vector<Eigen::MatrixXd> bases = band_bases(bands, ranks);
    std::vector<std::vector<bool>> active;
    for (const auto& v : bases) active.emplace_back(static_cast<std::size_t>(v.cols()), true);
    return decompose_with_bases(bands, std::move(bases), std::move(active));
}

BandDecomposition band_decompose(const std::vector<Eigen::MatrixXd>& bands, const BasisCoder& coder,
                                 const BasisState& state, std::vector<BandSideInfo>& side_info) {
    const std::vector<Eigen::MatrixXd> targets =
        band_bases(bands, std::vector<int>(bands.size(), coder.rank()));
    std::vector<BasisCoder::BandResult> coded = coder.encode(targets, state);
    std::vector<Eigen::MatrixXd> bases;
    std::vector<std::vector<bool>> active;
    side_info.clear();
    for (auto& c : coded) {
        bases.push_back(std::move(c.reconstructed));
        active.push_back(c.info.active);
        side_info.push_back(std::move(c.info));
    }
    return decompose_with_bases(bands, std::move(bases), std::move(active));
}

Eigen::MatrixXd foreground_spectrum(const BandDecomposition& dec) {
    std::vector<Eigen::MatrixXd> parts;
    for (std::size_t b = 0; b < dec.bases.size(); ++b) parts.emplace_back(dec.foreground[b] * dec.bases[b].transpose());
    return band_concat(parts);
}

Eigen::MatrixXd compute_residual(const Eigen::MatrixXd& spectrum, const BandDecomposition& dec) {
    const Eigen::MatrixXd fg = foreground_spectrum(dec);
    if (fg.rows() != spectrum.rows() || fg.cols() != spectrum.cols()) throw ShapeError("compute_residual: shape mismatch");
    return spectrum - fg;
}

CompactionGain compaction_gain(const Eigen::MatrixXd& spectrum, int rank, const BandLayout& layout) {
    if (rank < 0 || rank > spectrum.cols()) throw ParameterError("compaction_gain: rank must lie in [0, M]");
    auto top = [rank](const Eigen::MatrixXd& a) {
        const Eigen::VectorXd s = svd(a).singular_values;
        const Eigen::Index k = std::min<Eigen::Index>(rank, s.size());
        return s.head(k).squaredNorm();
    };
    CompactionGain g;
    g.energy_global = top(spectrum);
    for (const auto& b : band_split(spectrum, layout)) g.energy_banded += top(b);
    return g;
}

} // namespace hoa
