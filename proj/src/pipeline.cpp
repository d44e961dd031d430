#include "hoa/pipeline.hpp"

#include "hoa/error.hpp"
#include "hoa/transform.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace hoa {

namespace {

constexpr const char* kTrainHint = "; create them with `hoacodec train-quantizers --corpus <dir> --out <codebook dir>`";

std::uint32_t group_hash(const FrequencyGroups& g) {
    std::vector<unsigned char> bytes;
    for (const int o : g.offsets())
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(static_cast<std::uint32_t>(o) >> (8 * i)));
    return crc32_of(bytes);
}

std::vector<int> layout_for(const StreamHeader& h, int mode) {
    return mode == 0 ? std::vector<int>{h.hop} : h.band_lengths;
}

/// Core-channel spectra after quantization plus their payload.
struct CoreCoded {
    Eigen::MatrixXd decoded;
    std::vector<unsigned char> bytes;
    double max_nmr = 0.0;
    int flagged = 0;
    std::vector<CodedChannel> channels;
};

CoreCoded code_core(const Eigen::MatrixXd& channels, double mnmr, const MaskingModel& masking, bool bypass,
                    const EntropyTables& tables, const FrequencyGroups& groups) {
    CoreCoded out;
    if (bypass) {
        out.decoded = channels;
        BitWriter w;
        for (Eigen::Index c = 0; c < channels.cols(); ++c)
            for (Eigen::Index k = 0; k < channels.rows(); ++k) w.write(std::bit_cast<std::uint64_t>(channels(k, c)), 64);
        out.bytes = w.take();
        return out;
    }
    out.decoded.resize(channels.rows(), channels.cols());
    CoreEntropyEncoder enc(tables, groups);
    std::vector<double> col(static_cast<std::size_t>(channels.rows()));
    for (Eigen::Index c = 0; c < channels.cols(); ++c) {
        for (Eigen::Index k = 0; k < channels.rows(); ++k) col[static_cast<std::size_t>(k)] = channels(k, c);
        const MaskingCurve mask = masking_threshold(col, groups, masking);
        const CodedChannel coded = quantize_mnmr(col, mask, groups, mnmr);
        for (std::size_t b = 0; b < coded.nmr.size(); ++b) {
            out.max_nmr = std::max(out.max_nmr, coded.nmr[b]);
            if (coded.flagged[b]) ++out.flagged;
        }
        const std::vector<double> dq = dequantize_channel(coded, groups);
        for (Eigen::Index k = 0; k < channels.rows(); ++k) out.decoded(k, c) = dq[static_cast<std::size_t>(k)];
        enc.encode(coded);
        out.channels.push_back(coded);
    }
    out.bytes = enc.finish();
    return out;
}

Eigen::MatrixXd decode_core(std::span<const unsigned char> bytes, int hop, int count, bool bypass,
                            const EntropyTables& tables, const FrequencyGroups& groups) {
    Eigen::MatrixXd out(hop, count);
    if (bypass) {
        BitReader r(bytes);
        for (int c = 0; c < count; ++c)
            for (int k = 0; k < hop; ++k) out(k, c) = std::bit_cast<double>(r.read(64));
        if (!out.allFinite()) throw StreamError("non-finite raw spectrum");
        return out;
    }
    CoreEntropyDecoder dec(bytes, tables, groups);
    for (int c = 0; c < count; ++c) {
        const std::vector<double> dq = dequantize_channel(dec.decode(), groups);
        for (int k = 0; k < hop; ++k) out(k, c) = dq[static_cast<std::size_t>(k)];
    }
    return out;
}

/// Everything in a frame payload ahead of the core data.
struct ParsedFrame {
    bool silent = false;
    int mode = 0;
    std::vector<BandSideInfo> side;
    NoiseGroupInfo noise;
    std::span<const unsigned char> core;
    std::size_t flag_bits = 0;
    std::size_t side_bits = 0;
    std::size_t noise_bits = 0;
    std::size_t pad_bits = 0;
};

bool has_noise(const StreamHeader& h) {
    return h.codec == CodecId::kProposed && h.noise && !h.bypass && h.bg_order < h.order;
}

ParsedFrame parse_payload(std::span<const unsigned char> payload, const StreamHeader& h, const BasisCoder& coder,
                          const BasisState& state, int group_count) {
    ParsedFrame p;
    BitReader r(payload);
    p.silent = r.read_bool();
    if (!p.silent && h.codec == CodecId::kProposed) p.mode = r.read_bool() ? 1 : 0;
    p.flag_bits = r.bit_position();
    if (p.silent) {
        if (payload.size() != 1) throw StreamError("silent frame carries data");
        p.pad_bits = r.bits_left();
        return p;
    }
    const int band_count = static_cast<int>(layout_for(h, p.mode).size());
    for (int b = 0; b < band_count; ++b) p.side.push_back(coder.read(r, state, band_count, b));
    p.side_bits = r.bit_position() - p.flag_bits;
    if (has_noise(h)) p.noise = read_noise_info(r, group_count);
    p.noise_bits = r.bit_position() - p.flag_bits - p.side_bits;
    const std::size_t before = r.bit_position();
    r.align();
    p.pad_bits = r.bit_position() - before;
    p.core = payload.subspan(r.bit_position() / 8);
    return p;
}

std::vector<unsigned char> write_payload(int mode, bool proposed, const std::vector<BandSideInfo>& side,
                                         const BasisCoder& coder, const BasisState& state, const NoiseGroupInfo* noise,
                                         std::span<const unsigned char> core, FrameStats& st) {
    BitWriter w;
    w.write_bool(false);
    if (proposed) w.write_bool(mode == 1);
    const std::size_t flags = w.bit_count();
    for (const BandSideInfo& s : side) coder.write(w, s, state, static_cast<int>(side.size()));
    st.side_info_bits = w.bit_count() - flags;
    if (noise != nullptr) write_noise_info(w, *noise);
    st.noise_bits = w.bit_count() - flags - st.side_info_bits;
    st.noise_groups = noise != nullptr ? noise->active_count() : 0;
    w.write_bytes(core);
    st.core_bits = core.size() * 8;
    st.payload_bits = w.bit_count();
    return w.take();
}

std::vector<unsigned char> silent_payload() { return {0x80}; }

BasisCoder make_coder(const StreamHeader& h, const CodecResources& res) {
    if (h.bypass) return BasisCoder::bypass(h.channels(), h.rank);
    if (!res.quantizers) throw ConfigError(std::string("no basis codebooks loaded") + kTrainHint);
    if (res.quantizers->channels() != h.channels())
        throw ConfigError("codebooks are for " + std::to_string(res.quantizers->channels()) + " channels but the stream has " +
                          std::to_string(h.channels()));
    return BasisCoder(*res.quantizers, h.rank);
}

/// Per HOA channel masks of the input spectrum.
std::vector<MaskingCurve> hoa_masks(const Eigen::MatrixXd& s, const FrequencyGroups& groups, const MaskingModel& m) {
    std::vector<MaskingCurve> out;
    std::vector<double> col(static_cast<std::size_t>(s.rows()));
    for (Eigen::Index c = 0; c < s.cols(); ++c) {
        for (Eigen::Index k = 0; k < s.rows(); ++k) col[static_cast<std::size_t>(k)] = s(k, c);
        out.push_back(masking_threshold(col, groups, m));
    }
    return out;
}

double mask_weighted_error(const Eigen::MatrixXd& s, const Eigen::MatrixXd& approx, const std::vector<MaskingCurve>& masks,
                           const FrequencyGroups& groups) {
    double d = 0.0;
    for (Eigen::Index c = 0; c < s.cols(); ++c)
        for (int b = 0; b < groups.count(); ++b) {
            const double e = (s.block(groups.begin(b), c, groups.width(b), 1) - approx.block(groups.begin(b), c, groups.width(b), 1)).squaredNorm();
            d += e / masks[static_cast<std::size_t>(c)].band_mask[static_cast<std::size_t>(b)];
        }
    return d;
}

struct ProposedCandidate {
    std::vector<unsigned char> payload;
    std::vector<Eigen::MatrixXd> bases;
    FrameStats stats;
    ModeCandidate rd;
    Eigen::MatrixXd core;
    CoreCoded coded;
};

ProposedCandidate proposed_candidate(const Eigen::MatrixXd& s, int mode, const StreamHeader& h, const EncoderConfig& cfg,
                                     const CodecResources& res, const BasisCoder& coder, const BasisState& state,
                                     const FrequencyGroups& groups, const std::vector<MaskingCurve>& masks) {
    ProposedCandidate c;
    const BandLayout layout{layout_for(h, mode)};
    const std::vector<Eigen::MatrixXd> bands = band_split(s, layout);
    std::vector<BandSideInfo> side;
    const BandDecomposition dec = band_decompose(bands, coder, state, side);
    const Eigen::MatrixXd residual = compute_residual(s, dec);
    const int m = h.channels();
    const int nb = h.background_channels();

    NoiseGroupInfo noise;
    if (has_noise(h)) noise = analyze_discarded(residual.rightCols(m - nb), groups, cfg.flatness_threshold);

    c.core.resize(s.rows(), h.rank + nb);
    c.core.leftCols(h.rank) = band_concat(dec.foreground);
    c.core.rightCols(nb) = residual.leftCols(nb);
    c.coded = code_core(c.core, cfg.mnmr, cfg.masking, h.bypass, res.tables, groups);
    c.payload = write_payload(mode, true, side, coder, state, has_noise(h) ? &noise : nullptr, c.coded.bytes, c.stats);

    // Distortion of the decoded spectrum without substituted noise.
    Eigen::MatrixXd approx = Eigen::MatrixXd::Zero(s.rows(), m);
    for (int b = 0, row = 0; b < layout.band_count(); row += layout.lengths[static_cast<std::size_t>(b)], ++b) {
        const int l = layout.lengths[static_cast<std::size_t>(b)];
        approx.middleRows(row, l) = c.coded.decoded.block(row, 0, l, h.rank) * dec.bases[static_cast<std::size_t>(b)].transpose();
    }
    approx.leftCols(nb) += c.coded.decoded.rightCols(nb);
    c.rd.distortion = mask_weighted_error(s, approx, masks, groups);
    c.rd.bits = static_cast<double>(c.payload.size() * 8);
    c.stats.mode = mode;
    c.stats.max_nmr = c.coded.max_nmr;
    c.stats.flagged_bands = c.coded.flagged;
    c.bases = dec.bases;
    return c;
}

StreamHeader header_for(const HoaSignal& signal, const EncoderConfig& cfg, const CodecResources& res,
                        const FrequencyGroups& groups) {
    StreamHeader h;
    h.codec = cfg.codec == Codec::kBaseline ? CodecId::kBaseline : CodecId::kProposed;
    h.bypass = cfg.bypass;
    h.noise = cfg.noise && cfg.codec == Codec::kProposed && !cfg.bypass;
    h.hanning = cfg.interpolation == InterpolationWindow::Kind::kHanning;
    h.order = signal.order();
    h.hop = cfg.hop;
    h.sample_rate = signal.sample_rate();
    h.num_samples = static_cast<std::uint64_t>(signal.length());
    h.rank = cfg.rank;
    h.bg_order = cfg.bg_order;
    h.band_lengths = BandLayout::uniform(cfg.hop, cfg.bands).lengths;
    h.seed = cfg.seed;
    if (!cfg.bypass) {
        if (!res.quantizers) throw ConfigError(std::string("no basis codebooks loaded") + kTrainHint);
        h.coeff_size = res.quantizers->coeff.size();
        h.residual_size = res.quantizers->residual.size();
        h.intra_size = res.quantizers->intra.size();
        h.quantizer_hash = res.quantizers->hash();
        h.table_hash = res.tables.hash();
    }
    h.group_hash = group_hash(groups);
    return h;
}

} // namespace

void EncoderConfig::validate(int channels) const {
    const int order = order_for_channels(channels);
    if (order < 0) throw ShapeError("channel count is not (N+1)^2");
    if (hop < 2 || hop % 2 != 0 || hop > 65535) throw ParameterError("hop must be even and in [2, 65534]");
    if (bands < 1 || bands > 255 || hop % bands != 0) throw ParameterError("band count must divide the hop");
    if (rank < 1 || rank > channels || rank > hop / bands) throw ParameterError("rank must lie in [1, min(M, band length)]");
    if (bg_order < 0 || bg_order > order) throw ParameterError("background order must lie in [0, N]");
    if (!(mnmr > 0.0)) throw ParameterError("MNMR target must be positive");
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
    if (alternate_period < 1) throw ParameterError("alternate period must be positive");
}

int select_mode(std::span<const ModeCandidate> candidates, double lambda) {
    int best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double c = candidates[i].distortion + lambda * candidates[i].bits;
        if (c < best_cost) {
            best_cost = c;
            best = static_cast<int>(i);
        }
    }
    return best;
}

CodecResources load_resources(const std::filesystem::path& dir) {
    CodecResources r;
    r.quantizers = load_quantizers(dir);
    if (std::filesystem::exists(dir / kEntropyTableFile)) r.tables = EntropyTables::load(dir / kEntropyTableFile);
    return r;
}

EncodeResult encode(const HoaSignal& signal, const EncoderConfig& cfg, const CodecResources& res,
                    const EncodeOptions& opt) {
    cfg.validate(signal.channel_count());
    const FrequencyGroups groups = FrequencyGroups::for_hop(cfg.hop);
    const StreamHeader h = header_for(signal, cfg, res, groups);
    const BasisCoder coder = make_coder(h, res);
    const AnalysisWindow window = AnalysisWindow::sine(cfg.hop);
    const Mdct mdct(cfg.hop);
    const InterpolationWindow interp = InterpolationWindow::make(cfg.interpolation, cfg.hop);
    const int nb = h.background_channels();
    const int core_channels = h.rank + nb;

    EncodeResult out;
    write_header(out.stream, h);
    const FrameSegmenter seg(signal.samples(), cfg.hop);
    BasisState state;
    Eigen::MatrixXd block;
    Eigen::MatrixXd spectrum;
    Eigen::MatrixXd prev_advance = Eigen::MatrixXd::Zero(cfg.hop, core_channels);

    for (std::size_t f = 0; f < seg.frame_count(); ++f) {
        seg.frame_into(f, block);
        FrameStats st;
        st.index = f;
        std::vector<unsigned char> payload;
        const bool silent_input = block.isZero(0.0);

        if (cfg.codec == Codec::kProposed) {
            if (silent_input) {
                st.silent = true;
                payload = silent_payload();
                if (opt.record_core) out.core.push_back(Eigen::MatrixXd::Zero(cfg.hop, core_channels));
            } else {
                mdct.forward(block, window, spectrum);
                const std::vector<MaskingCurve> masks = hoa_masks(spectrum, groups, cfg.masking);
                int wanted[2] = {0, 0};
                switch (cfg.policy) {
                case ModePolicy::kRd: wanted[0] = wanted[1] = 1; break;
                case ModePolicy::kFixed0: wanted[0] = 1; break;
                case ModePolicy::kFixed1: wanted[1] = 1; break;
                case ModePolicy::kAlternate: wanted[(f / static_cast<std::size_t>(cfg.alternate_period)) % 2] = 1; break;
                }
                std::optional<ProposedCandidate> cand[2];
                std::vector<ModeCandidate> rd;
                for (int mode = 0; mode < 2; ++mode) {
                    if (!wanted[mode]) {
                        rd.push_back({std::numeric_limits<double>::infinity(), 0.0});
                        continue;
                    }
                    cand[mode] = proposed_candidate(spectrum, mode, h, cfg, res, coder, state, groups, masks);
                    rd.push_back(cand[mode]->rd);
                    st.evaluated[mode] = true;
                    st.candidate[mode] = cand[mode]->rd;
                }
                const int mode = select_mode(rd, cfg.lambda);
                ProposedCandidate& c = *cand[mode];
                const bool evaluated[2] = {st.evaluated[0], st.evaluated[1]};
                const ModeCandidate both[2] = {st.candidate[0], st.candidate[1]};
                st = c.stats;
                st.index = f;
                st.evaluated[0] = evaluated[0];
                st.evaluated[1] = evaluated[1];
                st.candidate[0] = both[0];
                st.candidate[1] = both[1];
                payload = std::move(c.payload);
                BasisCoder::commit(state, std::move(c.bases), mode);
                if (opt.record_core) out.core.push_back(std::move(c.core));
                if (opt.record_coded) out.coded.insert(out.coded.end(), c.coded.channels.begin(), c.coded.channels.end());
            }
        } else {
            Eigen::MatrixXd advance = Eigen::MatrixXd::Zero(cfg.hop, core_channels);
            std::vector<BandSideInfo> side;
            const BasisState before = state;
            if (!silent_input) {
                TimeFrame tf{f, block};
                BaselineFrameResult r = encode_frame_baseline(tf, h.rank, h.bg_order, interp, coder, state);
                advance.leftCols(h.rank) = r.decomposition.foreground;
                advance.rightCols(nb) = r.background;
                side = std::move(r.side_info);
            }
            Eigen::MatrixXd core_block(2 * cfg.hop, core_channels);
            core_block.topRows(cfg.hop) = prev_advance;
            core_block.bottomRows(cfg.hop) = advance;
            prev_advance = advance;
            if (silent_input && core_block.isZero(0.0)) {
                st.silent = true;
                payload = silent_payload();
                if (opt.record_core) out.core.push_back(Eigen::MatrixXd::Zero(cfg.hop, core_channels));
            } else {
                if (silent_input) throw NumericError("baseline: silent frame with a non-silent core block");
                mdct.forward(core_block, window, spectrum);
                const CoreCoded coded = code_core(spectrum, cfg.mnmr, cfg.masking, h.bypass, res.tables, groups);
                payload = write_payload(0, false, side, coder, before, nullptr, coded.bytes, st);
                st.max_nmr = coded.max_nmr;
                st.flagged_bands = coded.flagged;
                if (opt.record_core) out.core.push_back(spectrum);
                if (opt.record_coded) out.coded.insert(out.coded.end(), coded.channels.begin(), coded.channels.end());
            }
        }
        if (opt.record_bases) out.bases.push_back(state.bases);
        out.max_nmr = std::max(out.max_nmr, st.max_nmr);
        out.flagged_bands += st.flagged_bands;
        append_frame(out.stream, payload);
        out.frames.push_back(st);
    }
    return out;
}

namespace {

void check_resources(const StreamHeader& h, const CodecResources& res, const FrequencyGroups& groups) {
    if (h.group_hash != group_hash(groups)) throw FormatError("stream uses an unknown frequency-group table");
    if (h.bypass) return;
    if (!res.quantizers) throw ConfigError(std::string("no basis codebooks loaded") + kTrainHint);
    if (res.quantizers->hash() != h.quantizer_hash)
        throw ConfigError("basis codebooks differ from the ones the stream was encoded with");
    if (res.tables.hash() != h.table_hash)
        throw ConfigError("entropy tables differ from the ones the stream was encoded with");
}

} // namespace

DecodeResult decode(std::span<const unsigned char> stream, const CodecResources& res, const DecodeOptions& opt) {
    std::size_t header_size = 0;
    DecodeResult out;
    const StreamHeader h = read_header(stream, header_size);
    out.header = h;
    const FrequencyGroups groups = FrequencyGroups::for_hop(h.hop);
    check_resources(h, res, groups);
    const BasisCoder coder = make_coder(h, res);
    const int hop = h.hop;
    const int m = h.channels();
    const int nb = h.background_channels();
    const int core_channels = h.rank + nb;
    const bool proposed = h.codec == CodecId::kProposed;
    const AnalysisWindow window = AnalysisWindow::sine(hop);
    const Mdct mdct(hop);
    const InterpolationWindow interp = InterpolationWindow::make(
        h.hanning ? InterpolationWindow::Kind::kHanning : InterpolationWindow::Kind::kTriangular, hop);
    const auto n = static_cast<Eigen::Index>(h.num_samples);
    const std::size_t expected = frame_count_for(n, hop);

    const int width = proposed ? m : core_channels;
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(expected + 1) * hop, width);
    Eigen::MatrixXd prev_spec = Eigen::MatrixXd::Zero(hop, width);
    Eigen::MatrixXd prev_core = Eigen::MatrixXd::Zero(hop, core_channels);
    std::vector<std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>> frame_bases;
    BasisState state;
    FrameReader reader(stream, header_size);
    Eigen::MatrixXd block;

    for (std::size_t f = 0;; ++f) {
        const FrameReader::Frame fr = reader.next();
        if (fr.status == FrameReader::Status::kEnd) break;
        if (fr.status == FrameReader::Status::kTruncated) {
            out.error = true;
            out.message = "stream truncated in frame " + std::to_string(f);
            break;
        }
        if (f >= expected) {
            out.error = true;
            out.message = "stream holds more frames than its header announces";
            break;
        }
        bool bad = fr.status == FrameReader::Status::kCrcMismatch;
        if (bad) out.message = "CRC mismatch in frame " + std::to_string(f);
        Eigen::MatrixXd spec = Eigen::MatrixXd::Zero(hop, width);
        Eigen::MatrixXd core = Eigen::MatrixXd::Zero(hop, core_channels);
        Eigen::MatrixXd noise;
        std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> fb;
        int mode = -1;
        if (!bad) {
            try {
                const ParsedFrame p = parse_payload(fr.payload, h, coder, state, groups.count());
                if (p.silent) {
                    if (state.has_previous() && !proposed) fb.emplace(state.bases.front(), state.bases.front());
                } else {
                    mode = p.mode;
                    std::vector<Eigen::MatrixXd> bases;
                    for (const BandSideInfo& s : p.side) bases.push_back(coder.reconstruct(s, state));
                    core = decode_core(p.core, hop, core_channels, h.bypass, res.tables, groups);
                    if (proposed) {
                        const std::vector<int> layout = layout_for(h, p.mode);
                        for (std::size_t b = 0, row = 0; b < layout.size(); row += static_cast<std::size_t>(layout[b]), ++b) {
                            const auto r0 = static_cast<Eigen::Index>(row);
                            spec.middleRows(r0, layout[b]) = core.block(r0, 0, layout[b], h.rank) * bases[b].transpose();
                        }
                        if (!opt.foreground_only) spec.leftCols(nb) += core.rightCols(nb);
                        if (has_noise(h)) {
                            noise = synthesize_noise(p.noise, groups, m - nb, h.seed, f);
                            if (!opt.foreground_only) spec.rightCols(m - nb) += noise;
                            if (opt.record_noise) out.noise_info.push_back(p.noise);
                        }
                    } else {
                        spec = core;
                        fb.emplace(state.has_previous() ? state.bases.front() : bases.front(), bases.front());
                    }
                    BasisCoder::commit(state, std::move(bases), p.mode);
                }
            } catch (const StreamError& e) {
                bad = true;
                out.message = "frame " + std::to_string(f) + ": " + e.what();
            }
        }
        if (bad) {
            out.error = true;
            ++out.concealed;
            spec = prev_spec;
            core = prev_core;
            if (!proposed && state.has_previous()) fb.emplace(state.bases.front(), state.bases.front());
            noise.resize(0, 0);
        }
        mdct.inverse(spec, window, block);
        padded.middleRows(static_cast<Eigen::Index>(f) * hop, 2 * hop) += block;
        prev_spec = spec;
        prev_core = core;
        frame_bases.push_back(std::move(fb));
        out.modes.push_back(mode);
        if (opt.record_bases) out.bases.push_back(state.bases);
        if (opt.record_core) out.core.push_back(core);
        if (opt.record_noise) {
            if (noise.size() == 0) noise = Eigen::MatrixXd::Zero(hop, m - nb);
            out.noise.push_back(std::move(noise));
        }
        ++out.frames;
    }

    Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(n, m);
    if (proposed) {
        samples = padded.middleRows(hop, n);
    } else {
        for (std::size_t f = 0; f < frame_bases.size(); ++f) {
            const Eigen::Index start = static_cast<Eigen::Index>(f) * hop;
            if (start >= n || !frame_bases[f]) continue;
            const Eigen::Index rows = std::min<Eigen::Index>(hop, n - start);
            const Eigen::MatrixXd comps = padded.block(start + hop, 0, hop, h.rank);
            Eigen::MatrixXd x = interpolated_backprojection(comps, frame_bases[f]->first, frame_bases[f]->second, interp);
            if (!opt.foreground_only) x.leftCols(nb) += padded.block(start + hop, h.rank, hop, nb);
            samples.middleRows(start, rows) = x.topRows(rows);
        }
    }
    out.signal = HoaSignal(h.sample_rate, h.order, std::move(samples));
    return out;
}

StreamMeasurement measure_stream(std::span<const unsigned char> stream) {
    StreamMeasurement m;
    std::size_t header_size = 0;
    const StreamHeader h = read_header(stream, header_size);
    m.header = h;
    m.total_bits = stream.size() * 8;
    m.header_bits = header_size * 8;
    m.seconds = h.sample_rate > 0 ? static_cast<double>(h.num_samples) / h.sample_rate : 0.0;
    const FrequencyGroups groups = FrequencyGroups::for_hop(h.hop);
    const int channels = h.channels();
    std::optional<BasisCoder> coder;
    if (h.bypass) {
        coder = BasisCoder::bypass(channels, h.rank);
    } else {
        if (h.coeff_size < 1 || h.residual_size < 1 || h.intra_size < 1) throw FormatError("stream lacks codebook sizes");
        // Bit widths only depend on codebook sizes; the values are never used.
        QuantizerSet shape;
        shape.coeff.centroids.setZero(h.coeff_size, 1);
        shape.residual.centroids.setZero(h.residual_size, channels);
        shape.intra.centroids.setZero(h.intra_size, channels);
        coder.emplace(shape, h.rank);
    }
    BasisState state;
    FrameReader reader(stream, header_size);
    std::size_t accounted = m.header_bits;
    for (;;) {
        const FrameReader::Frame fr = reader.next();
        if (fr.status == FrameReader::Status::kEnd || fr.status == FrameReader::Status::kTruncated) break;
        ++m.frames;
        m.framing_bits += fr.framing_bytes * 8;
        accounted += fr.framing_bytes * 8 + fr.payload.size() * 8;
        if (fr.status == FrameReader::Status::kCrcMismatch) {
            ++m.bad_frames;
            m.corrupt_bits += fr.payload.size() * 8;
            continue;
        }
        try {
            const ParsedFrame p = parse_payload(fr.payload, h, *coder, state, groups.count());
            m.flag_bits += p.flag_bits;
            m.side_info_bits += p.side_bits;
            m.noise_bits += p.noise_bits;
            m.padding_bits += p.pad_bits;
            m.core_bits += p.core.size() * 8;
            if (p.silent) {
                ++m.silent_frames;
            } else {
                ++m.mode_count[p.mode];
                state.bases.assign(p.side.size(), Eigen::MatrixXd::Zero(channels, h.rank));
                state.mode = p.mode;
            }
        } catch (const StreamError&) {
            ++m.bad_frames;
            m.corrupt_bits += fr.payload.size() * 8;
        }
    }
    m.corrupt_bits += m.total_bits - accounted;
    return m;
}

nlohmann::json StreamMeasurement::to_json() const {
    nlohmann::json j;
    j["codec"] = header.codec == CodecId::kBaseline ? "baseline" : "proposed";
    j["bypass"] = header.bypass;
    j["channels"] = header.channels();
    j["hop"] = header.hop;
    j["rank"] = header.rank;
    j["bg_order"] = header.bg_order;
    j["bands"] = header.band_lengths.size();
    j["noise_substitution"] = header.noise;
    j["sample_rate"] = header.sample_rate;
    j["samples"] = header.num_samples;
    j["seconds"] = seconds;
    j["frames"] = frames;
    j["silent_frames"] = silent_frames;
    j["bad_frames"] = bad_frames;
    j["mode_histogram"] = {{"0", mode_count[0]}, {"1", mode_count[1]}};
    j["bits"] = {{"total", total_bits},         {"header", header_bits},   {"framing", framing_bits},
                 {"flags", flag_bits},          {"side_info", side_info_bits}, {"noise", noise_bits},
                 {"core", core_bits},           {"padding", padding_bits}, {"corrupt", corrupt_bits}};
    j["kbps"] = kbps();
    j["side_info_share"] = total_bits > 0 ? static_cast<double>(side_info_bits) / static_cast<double>(total_bits) : 0.0;
    return j;
}

const char* codec_name(Codec c) noexcept { return c == Codec::kBaseline ? "baseline" : "proposed"; }

Codec parse_codec(const std::string& s) {
    if (s == "baseline") return Codec::kBaseline;
    if (s == "proposed") return Codec::kProposed;
    throw ParameterError("unknown codec '" + s + "' (expected baseline or proposed)");
}

ModePolicy parse_policy(const std::string& s) {
    if (s == "rd") return ModePolicy::kRd;
    if (s == "fixed0") return ModePolicy::kFixed0;
    if (s == "fixed1") return ModePolicy::kFixed1;
    if (s == "alternate") return ModePolicy::kAlternate;
    throw ParameterError("unknown mode policy '" + s + "'");
}

void apply_config_json(EncoderConfig& cfg, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "codec") cfg.codec = parse_codec(v.get<std::string>());
            else if (key == "hop") cfg.hop = v.get<int>();
            else if (key == "rank") cfg.rank = v.get<int>();
            else if (key == "bg_order") cfg.bg_order = v.get<int>();
            else if (key == "bands") cfg.bands = v.get<int>();
            else if (key == "mnmr") cfg.mnmr = v.get<double>();
            else if (key == "flatness_threshold") cfg.flatness_threshold = v.get<double>();
            else if (key == "lambda") cfg.lambda = v.get<double>();
            else if (key == "policy") cfg.policy = parse_policy(v.get<std::string>());
            else if (key == "alternate_period") cfg.alternate_period = v.get<int>();
            else if (key == "noise") cfg.noise = v.get<bool>();
            else if (key == "bypass") cfg.bypass = v.get<bool>();
            else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
            else if (key == "interpolation") {
                const auto s = v.get<std::string>();
                if (s == "triangular") cfg.interpolation = InterpolationWindow::Kind::kTriangular;
                else if (s == "hanning") cfg.interpolation = InterpolationWindow::Kind::kHanning;
                else throw ConfigError("interpolation must be triangular or hanning");
            } else if (key == "masking") {
                for (const auto& [mk, mv] : v.items()) {
                    if (mk == "spread_up_db") cfg.masking.spread_up_db = mv.get<double>();
                    else if (mk == "spread_down_db") cfg.masking.spread_down_db = mv.get<double>();
                    else if (mk == "offset_db") cfg.masking.offset_db = mv.get<double>();
                    else if (mk == "floor_per_bin") cfg.masking.floor_per_bin = mv.get<double>();
                    else throw ConfigError("unknown masking key '" + mk + "'");
                }
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
}

} // namespace hoa
