#include "hoa/sideinfo.hpp"

#include "hoa/error.hpp"
#include "hoa/transform.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace hoa {

std::uint32_t QuantizerSet::hash() const {
    uLong crc = crc32(0L, Z_NULL, 0);
    for (const Codebook* cb : {&coeff, &residual, &intra}) {
        const auto bytes = serialize_codebook(*cb);
        crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    }
    return static_cast<std::uint32_t>(crc);
}

QuantizerSet load_quantizers(const std::filesystem::path& dir) {
    for (const char* name : {kCoeffCodebookFile, kResidualCodebookFile, kIntraCodebookFile}) {
        if (!std::filesystem::exists(dir / name))
            throw ConfigError("missing codebook " + (dir / name).string() +
                              "; create it with `hoacodec train-quantizers --corpus <dir> --out " + dir.string() + "`");
    }
    QuantizerSet q{read_codebook(dir / kCoeffCodebookFile), read_codebook(dir / kResidualCodebookFile),
                   read_codebook(dir / kIntraCodebookFile)};
    if (q.coeff.dimension() != 1) throw ConfigError("coefficient codebook must be scalar");
    if (q.residual.dimension() != q.intra.dimension())
        throw ConfigError("residual and intra codebooks disagree on the channel count");
    return q;
}

void save_quantizers(const QuantizerSet& q, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_codebook(q.coeff, dir / kCoeffCodebookFile);
    write_codebook(q.residual, dir / kResidualCodebookFile);
    write_codebook(q.intra, dir / kIntraCodebookFile);
}

std::vector<ColumnPrediction> predict_basis(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& cur) {
    if (prev.rows() != cur.rows() || prev.cols() != cur.cols()) throw ShapeError("predict_basis: shape mismatch");
    std::vector<ColumnPrediction> out(static_cast<std::size_t>(cur.cols()));
    for (Eigen::Index i = 0; i < cur.cols(); ++i) {
        auto& p = out[static_cast<std::size_t>(i)];
        const double np = prev.col(i).norm();
        const double nc = cur.col(i).norm();
        if (np == 0.0 || nc == 0.0) {
            p.intra = true;
            p.residual = cur.col(i);
            continue;
        }
        p.rho = prev.col(i).dot(cur.col(i)) / (np * nc);
        p.residual = cur.col(i) - p.rho * prev.col(i);
    }
    return out;
}

std::uint64_t factorial(int n) {
    std::uint64_t f = 1;
    for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
    return f;
}

std::uint64_t permutation_rank(const std::vector<int>& perm) {
    const int n = static_cast<int>(perm.size());
    std::uint64_t rank = 0;
    for (int i = 0; i < n; ++i) {
        int smaller = 0;
        for (int j = i + 1; j < n; ++j)
            if (perm[static_cast<std::size_t>(j)] < perm[static_cast<std::size_t>(i)]) ++smaller;
        rank += static_cast<std::uint64_t>(smaller) * factorial(n - 1 - i);
    }
    return rank;
}

std::vector<int> permutation_unrank(std::uint64_t rank, int n) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<int> perm;
    perm.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::uint64_t f = factorial(n - 1 - i);
        const auto k = static_cast<std::size_t>(rank / f);
        rank %= f;
        perm.push_back(pool[k]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return perm;
}

BasisCoder::BasisCoder(int channels, int rank, bool bypass) : channels_(channels), rank_(rank), bypass_(bypass) {
    if (rank_ < 1 || rank_ > channels_) throw ParameterError("basis rank must be in [1, M]");
    if (rank_ > 20) throw ParameterError("basis rank above 20 is not supported by the permutation code");
}

BasisCoder::BasisCoder(QuantizerSet quantizers, int rank)
    : BasisCoder(quantizers.channels(), rank, false) {
    q_ = std::move(quantizers);
    if (q_.coeff.dimension() != 1) throw ConfigError("coefficient codebook must be scalar");
    if (q_.intra.dimension() != channels_) throw ConfigError("intra codebook dimension mismatch");
}

BasisCoder BasisCoder::bypass(int channels, int rank) { return BasisCoder(channels, rank, true); }

int BasisCoder::predictor_choice_count(const BasisState& state, int band_count) const noexcept {
    const int prev = static_cast<int>(state.bases.size());
    if (prev <= 1 || prev == band_count) return 1;
    return prev;
}

namespace {

// Plain loops: reconstruction must not depend on the runtime-selected ISA.
void normalize_column(Eigen::VectorXd& v, Eigen::Index fallback_axis) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i] * v[i];
    const double n = std::sqrt(s);
    if (!(n > 1e-150)) {
        v.setZero();
        v[fallback_axis % v.size()] = 1.0;
        return;
    }
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] /= n;
}

} // namespace

Eigen::VectorXd BasisCoder::reconstruct_column(const ColumnCode& code, bool flip, const Eigen::VectorXd* prev) const {
    Eigen::VectorXd v(channels_);
    if (code.intra || prev == nullptr) {
        if (code.intra_index < 0 || code.intra_index >= q_.intra.size()) throw StreamError("intra index out of range");
        for (int i = 0; i < channels_; ++i) v[i] = q_.intra.centroids(code.intra_index, i);
        normalize_column(v, 0);
        if (flip) v = -v;
        return v;
    }
    if (code.coeff_index < 0 || code.coeff_index >= q_.coeff.size()) throw StreamError("coefficient index out of range");
    if (code.residual_index < 0 || code.residual_index >= q_.residual.size())
        throw StreamError("residual index out of range");
    const double rho = q_.coeff.centroids(code.coeff_index, 0);
    for (int i = 0; i < channels_; ++i) v[i] = rho * (*prev)[i] + q_.residual.centroids(code.residual_index, i);
    normalize_column(v, 0);
    return v;
}

Eigen::MatrixXd BasisCoder::reconstruct(const BandSideInfo& info, const BasisState& state) const {
    if (bypass_) {
        if (info.raw.rows() != channels_ || info.raw.cols() != rank_) throw StreamError("raw basis has the wrong shape");
        return info.raw;
    }
    if (static_cast<int>(info.columns.size()) != rank_) throw StreamError("side info column count mismatch");
    const Eigen::MatrixXd* prev = nullptr;
    if (state.has_previous()) {
        if (info.predictor < 0 || info.predictor >= static_cast<int>(state.bases.size()))
            throw StreamError("predictor index out of range");
        prev = &state.bases[static_cast<std::size_t>(info.predictor)];
    }
    Eigen::MatrixXd out(channels_, rank_);
    for (int i = 0; i < rank_; ++i) {
        const bool flip = !info.flips.empty() && info.flips[static_cast<std::size_t>(i)];
        Eigen::VectorXd p;
        if (prev != nullptr) p = prev->col(i);
        out.col(i) = reconstruct_column(info.columns[static_cast<std::size_t>(i)], flip, prev ? &p : nullptr);
    }
    return out;
}

std::vector<BasisCoder::BandResult> BasisCoder::encode(const std::vector<Eigen::MatrixXd>& targets,
                                                       const BasisState& state) const {
    const int band_count = static_cast<int>(targets.size());
    std::vector<BandResult> out(targets.size());
    for (int b = 0; b < band_count; ++b) {
        const Eigen::MatrixXd& target = targets[static_cast<std::size_t>(b)];
        if (target.rows() != channels_ || target.cols() != rank_) throw ShapeError("target basis has the wrong shape");
        BandSideInfo& info = out[static_cast<std::size_t>(b)].info;
        info.permutation.resize(static_cast<std::size_t>(rank_));
        std::iota(info.permutation.begin(), info.permutation.end(), 0);
        info.flips.assign(static_cast<std::size_t>(rank_), false);
        info.columns.assign(static_cast<std::size_t>(rank_), ColumnCode{});

        Eigen::MatrixXd aligned = target;
        const Eigen::MatrixXd* prev = nullptr;
        if (state.has_previous()) {
            const int choices = predictor_choice_count(state, band_count);
            if (choices == 1) {
                info.predictor = state.bases.size() == 1 ? 0 : b;
            } else {
                double best = std::numeric_limits<double>::infinity();
                for (int p = 0; p < choices; ++p) {
                    const double c = match_bases(state.bases[static_cast<std::size_t>(p)], target).assignment.total_cost;
                    if (c < best) {
                        best = c;
                        info.predictor = p;
                    }
                }
            }
            prev = &state.bases[static_cast<std::size_t>(info.predictor)];
            BasisMatch m = match_bases(*prev, target);
            info.permutation = m.assignment.permutation;
            info.flips = m.flips;
            aligned = std::move(m.aligned);
        }

        if (bypass_) {
            info.raw = aligned;
        } else {
            for (int i = 0; i < rank_; ++i) {
                ColumnCode& code = info.columns[static_cast<std::size_t>(i)];
                const bool flip = info.flips[static_cast<std::size_t>(i)];
                const Eigen::VectorXd w = aligned.col(i);
                // Intra codewords describe the canonical-sign SVD column.
                const Eigen::VectorXd canonical = flip ? Eigen::VectorXd(-w) : w;
                ColumnCode intra_code;
                intra_code.intra = true;
                intra_code.intra_index = quantize_nearest({canonical.data(), static_cast<std::size_t>(channels_)}, q_.intra).index;
                const Eigen::VectorXd intra_rec = reconstruct_column(intra_code, flip, nullptr);
                code = intra_code;
                if (prev == nullptr) continue;

                const Eigen::VectorXd p = prev->col(i);
                const double np = p.norm();
                const double nw = w.norm();
                if (np == 0.0 || nw == 0.0) continue;
                const double rho = p.dot(w) / (np * nw);
                ColumnCode pred;
                pred.intra = false;
                pred.coeff_index = quantize_nearest({&rho, 1}, q_.coeff).index;
                const double rho_q = q_.coeff.centroids(pred.coeff_index, 0);
                const Eigen::VectorXd resid = w - rho_q * p;
                pred.residual_index = quantize_nearest({resid.data(), static_cast<std::size_t>(channels_)}, q_.residual).index;
                const Eigen::VectorXd pred_rec = reconstruct_column(pred, flip, &p);
                if (pred_rec.dot(w) >= intra_rec.dot(w)) code = pred;
            }
        }
        Eigen::MatrixXd rec = reconstruct(info, state);
        info.active = usable_columns(rec);
        out[static_cast<std::size_t>(b)].reconstructed = std::move(rec);
    }
    return out;
}

void BasisCoder::write(BitWriter& out, const BandSideInfo& info, const BasisState& state, int band_count) const {
    const std::size_t r = static_cast<std::size_t>(rank_);
    if (state.has_previous()) {
        out.write(static_cast<std::uint64_t>(info.predictor), index_bits(static_cast<std::uint64_t>(predictor_choice_count(state, band_count))));
        out.write(permutation_rank(info.permutation), index_bits(factorial(rank_)));
        for (std::size_t i = 0; i < r; ++i) out.write_bool(info.flips[i]);
        if (!bypass_)
            for (std::size_t i = 0; i < r; ++i) out.write_bool(info.columns[i].intra);
    }
    const bool all_active = std::all_of(info.active.begin(), info.active.end(), [](bool a) { return a; });
    out.write_bool(all_active);
    if (!all_active)
        for (std::size_t i = 0; i < r; ++i) out.write_bool(info.active[i]);
    if (bypass_) {
        for (int i = 0; i < rank_; ++i)
            for (int m = 0; m < channels_; ++m) out.write(std::bit_cast<std::uint64_t>(info.raw(m, i)), 64);
        return;
    }
    for (std::size_t i = 0; i < r; ++i) {
        const ColumnCode& c = info.columns[i];
        if (c.intra || !state.has_previous()) {
            out.write(static_cast<std::uint64_t>(c.intra_index), index_bits(static_cast<std::uint64_t>(q_.intra.size())));
        } else {
            out.write(static_cast<std::uint64_t>(c.coeff_index), index_bits(static_cast<std::uint64_t>(q_.coeff.size())));
            out.write(static_cast<std::uint64_t>(c.residual_index), index_bits(static_cast<std::uint64_t>(q_.residual.size())));
        }
    }
}

BandSideInfo BasisCoder::read(BitReader& in, const BasisState& state, int band_count, int band) const {
    const std::size_t r = static_cast<std::size_t>(rank_);
    BandSideInfo info;
    info.permutation.resize(r);
    std::iota(info.permutation.begin(), info.permutation.end(), 0);
    info.flips.assign(r, false);
    info.columns.assign(r, ColumnCode{});
    if (state.has_previous()) {
        const int choices = predictor_choice_count(state, band_count);
        info.predictor = static_cast<int>(in.read(index_bits(static_cast<std::uint64_t>(choices))));
        if (choices == 1) info.predictor = state.bases.size() == 1 ? 0 : band;
        if (info.predictor >= static_cast<int>(state.bases.size())) throw StreamError("predictor index out of range");
        const std::uint64_t prank = in.read(index_bits(factorial(rank_)));
        if (prank >= factorial(rank_)) throw StreamError("permutation index out of range");
        info.permutation = permutation_unrank(prank, rank_);
        for (std::size_t i = 0; i < r; ++i) info.flips[i] = in.read_bool();
        if (!bypass_)
            for (std::size_t i = 0; i < r; ++i) info.columns[i].intra = in.read_bool();
    }
    info.active.assign(r, true);
    if (!in.read_bool())
        for (std::size_t i = 0; i < r; ++i) info.active[i] = in.read_bool();
    if (bypass_) {
        info.raw.resize(channels_, rank_);
        for (int i = 0; i < rank_; ++i)
            for (int m = 0; m < channels_; ++m) info.raw(m, i) = std::bit_cast<double>(in.read(64));
        if (!info.raw.allFinite()) throw StreamError("non-finite raw basis");
        return info;
    }
    for (std::size_t i = 0; i < r; ++i) {
        ColumnCode& c = info.columns[i];
        if (c.intra || !state.has_previous()) {
            c.intra = true;
            c.intra_index = static_cast<int>(in.read(index_bits(static_cast<std::uint64_t>(q_.intra.size()))));
            if (c.intra_index >= q_.intra.size()) throw StreamError("intra index out of range");
        } else {
            c.coeff_index = static_cast<int>(in.read(index_bits(static_cast<std::uint64_t>(q_.coeff.size()))));
            c.residual_index = static_cast<int>(in.read(index_bits(static_cast<std::uint64_t>(q_.residual.size()))));
            if (c.coeff_index >= q_.coeff.size() || c.residual_index >= q_.residual.size())
                throw StreamError("prediction index out of range");
        }
    }
    return info;
}

void BasisCoder::commit(BasisState& state, std::vector<Eigen::MatrixXd> bases, int mode) {
    state.bases = std::move(bases);
    state.mode = mode;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Harvest {
    std::vector<double> rho;
    std::vector<Eigen::VectorXd> residual;
    std::vector<Eigen::VectorXd> intra;

    void add_pair(const Eigen::MatrixXd* prev, const Eigen::MatrixXd& cur) {
        for (Eigen::Index i = 0; i < cur.cols(); ++i) intra.push_back(cur.col(i));
        if (prev == nullptr) return;
        const BasisMatch m = match_bases(*prev, cur);
        for (const ColumnPrediction& p : predict_basis(*prev, m.aligned)) {
            if (p.intra) continue;
            rho.push_back(p.rho);
            residual.push_back(p.residual);
        }
    }
};

RowMatrix to_rows(const std::vector<Eigen::VectorXd>& v, std::size_t cap) {
    const std::size_t n = std::min(v.size(), cap);
    const double stride = static_cast<double>(v.size()) / static_cast<double>(std::max<std::size_t>(n, 1));
    RowMatrix m(static_cast<Eigen::Index>(n), v.empty() ? 0 : v.front().size());
    for (std::size_t i = 0; i < n; ++i)
        m.row(static_cast<Eigen::Index>(i)) = v[static_cast<std::size_t>(static_cast<double>(i) * stride)].transpose();
    return m;
}

constexpr std::size_t kMaxTrainingVectors = 40000;

} // namespace

QuantizerSet train_quantizers(const std::vector<HoaSignal>& corpus, const TrainingConfig& config,
                              TrainingReport* report) {
    if (corpus.empty()) throw TrainingError("train_quantizers: empty corpus");
    const int channels = corpus.front().channel_count();
    if (config.rank < 1 || config.rank > channels) throw ParameterError("training rank must be in [1, M]");
    if (config.band_count < 1 || config.hop % config.band_count != 0)
        throw ParameterError("band count must divide the hop");

    Harvest h;
    std::size_t frames = 0;
    const Mdct mdct(config.hop);
    const AnalysisWindow window = AnalysisWindow::sine(config.hop);
    const Eigen::Index band_len = config.hop / config.band_count;
    for (const HoaSignal& sig : corpus) {
        if (sig.channel_count() != channels) throw TrainingError("corpus mixes channel counts");
        const FrameSegmenter seg(sig.samples(), config.hop);
        std::optional<Eigen::MatrixXd> prev_td, prev_single;
        std::vector<Eigen::MatrixXd> prev_bands;
        Eigen::MatrixXd block, spec;
        for (std::size_t f = 0; f < seg.frame_count() && frames < static_cast<std::size_t>(config.max_frames); ++f) {
            seg.frame_into(f, block);
            if (block.squaredNorm() == 0.0) continue;
            ++frames;
            const Eigen::MatrixXd td = svd(block).right.leftCols(config.rank);
            h.add_pair(prev_td ? &*prev_td : nullptr, td);
            prev_td = td;

            mdct.forward(block, window, spec);
            const Eigen::MatrixXd single = svd(spec).right.leftCols(config.rank);
            h.add_pair(prev_single ? &*prev_single : nullptr, single);
            prev_single = single;
            if (config.band_count > 1) {
                std::vector<Eigen::MatrixXd> bands;
                for (int b = 0; b < config.band_count; ++b) {
                    bands.push_back(svd(spec.middleRows(b * band_len, band_len)).right.leftCols(config.rank));
                    h.add_pair(prev_bands.empty() ? nullptr : &prev_bands[static_cast<std::size_t>(b)], bands.back());
                }
                prev_bands = std::move(bands);
            }
        }
    }

    if (h.rho.size() < static_cast<std::size_t>(config.coeff_size) ||
        h.residual.size() < static_cast<std::size_t>(config.residual_size) ||
        h.intra.size() < static_cast<std::size_t>(config.intra_size))
        throw TrainingError("train_quantizers: corpus yields " + std::to_string(h.residual.size()) +
                            " prediction vectors and " + std::to_string(h.intra.size()) +
                            " intra vectors, fewer than the requested codebook sizes");

    GlaOptions opt;
    opt.max_iterations = config.max_iterations;
    opt.tolerance = 1e-5;
    QuantizerSet q;
    TrainingReport rep;
    rep.frames = frames;
    {
        const std::size_t n = std::min(h.rho.size(), kMaxTrainingVectors);
        const double stride = static_cast<double>(h.rho.size()) / static_cast<double>(n);
        RowMatrix m(static_cast<Eigen::Index>(n), 1);
        for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), 0) = h.rho[static_cast<std::size_t>(static_cast<double>(i) * stride)];
        opt.size = config.coeff_size;
        opt.seed = config.seed;
        auto r = gla_train(m, opt);
        rep.degenerate |= r.degenerate;
        q.coeff = std::move(r.codebook);
        rep.coeff_vectors = n;
    }
    {
        const RowMatrix m = to_rows(h.residual, kMaxTrainingVectors);
        opt.size = config.residual_size;
        opt.seed = config.seed + 1;
        auto r = gla_train(m, opt);
        rep.degenerate |= r.degenerate;
        q.residual = std::move(r.codebook);
        rep.residual_vectors = static_cast<std::size_t>(m.rows());
    }
    {
        const RowMatrix m = to_rows(h.intra, kMaxTrainingVectors);
        opt.size = config.intra_size;
        opt.seed = config.seed + 2;
        auto r = gla_train(m, opt);
        rep.degenerate |= r.degenerate;
        q.intra = std::move(r.codebook);
        rep.intra_vectors = static_cast<std::size_t>(m.rows());
    }
    if (report != nullptr) *report = rep;
    return q;
}

} // namespace hoa
