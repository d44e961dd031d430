#include "hoa/core_codec.hpp"

#include "hoa/error.hpp"
#include "hoa/simd.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

namespace hoa {

MaskingCurve masking_threshold(std::span<const double> spectrum, const FrequencyGroups& groups,
                               const MaskingModel& model) {
    if (static_cast<int>(spectrum.size()) != groups.bins()) throw ShapeError("masking_threshold: length mismatch");
    const int n = groups.count();
    std::vector<double> density(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        double e = 0.0;
        for (int k = groups.begin(b); k < groups.end(b); ++k) e += spectrum[static_cast<std::size_t>(k)] * spectrum[static_cast<std::size_t>(k)];
        density[static_cast<std::size_t>(b)] = e / groups.width(b);
    }
    const double up = std::pow(10.0, -model.spread_up_db / 10.0);
    const double down = std::pow(10.0, -model.spread_down_db / 10.0);
    const double margin = std::pow(10.0, -model.offset_db / 10.0);
    MaskingCurve m;
    m.band_mask.resize(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            const int d = b - j;
            const double g = d == 0 ? 1.0 : (d > 0 ? std::pow(up, d) : std::pow(down, -d));
            s += density[static_cast<std::size_t>(j)] * g;
        }
        m.band_mask[static_cast<std::size_t>(b)] = groups.width(b) * std::max(s * margin, model.floor_per_bin);
    }
    return m;
}

double scalefactor_step(int sf) { return std::exp2(sf / 4.0); }

double dequantize_value(std::int32_t q, int sf) {
    if (q == 0) return 0.0;
    const double m = std::pow(static_cast<double>(q < 0 ? -q : q), 4.0 / 3.0) * scalefactor_step(sf);
    return q < 0 ? -m : m;
}

namespace {

struct BandTrial {
    std::vector<std::int32_t> q;
    double noise = 0.0;
};

void quantize_band(std::span<const double> x, int sf, BandTrial& t) {
    t.q.resize(x.size());
    simd::active().quantize_companded(x.data(), 1.0 / scalefactor_step(sf), kRoundingOffset, t.q.data(), x.size());
    double noise = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - dequantize_value(t.q[i], sf);
        noise += d * d;
    }
    t.noise = noise;
}

} // namespace

CodedChannel quantize_mnmr(std::span<const double> spectrum, const MaskingCurve& mask, const FrequencyGroups& groups,
                           double target) {
    if (!(target > 0.0)) throw ParameterError("quantize_mnmr: target must be positive");
    if (static_cast<int>(spectrum.size()) != groups.bins() ||
        static_cast<int>(mask.band_mask.size()) != groups.count())
        throw ShapeError("quantize_mnmr: shape mismatch");
    const int n = groups.count();
    CodedChannel c;
    c.scalefactors.assign(static_cast<std::size_t>(n), 0);
    c.quant.assign(spectrum.size(), 0);
    c.nmr.assign(static_cast<std::size_t>(n), 0.0);
    c.flagged.assign(static_cast<std::size_t>(n), false);
    BandTrial trial;
    BandTrial best;
    for (int b = 0; b < n; ++b) {
        const auto x = spectrum.subspan(static_cast<std::size_t>(groups.begin(b)), static_cast<std::size_t>(groups.width(b)));
        const double m = mask.band_mask[static_cast<std::size_t>(b)];
        const double limit = target * m;
        double energy = 0.0;
        for (const double v : x) energy += v * v;
        if (energy <= limit) {
            c.nmr[static_cast<std::size_t>(b)] = energy / m;
            continue;
        }
        int sf = kMaxScalefactor;
        quantize_band(x, sf, trial);
        if (trial.noise <= limit) {
            best = trial;
        } else {
            quantize_band(x, kMinScalefactor, trial);
            if (!(trial.noise <= limit)) {
                c.flagged[static_cast<std::size_t>(b)] = true;
                sf = kMinScalefactor;
                best = trial;
            } else {
                int lo = kMinScalefactor;
                int hi = kMaxScalefactor;
                best = trial;
                while (hi - lo > 1) {
                    const int mid = lo + (hi - lo) / 2;
                    quantize_band(x, mid, trial);
                    if (trial.noise <= limit) {
                        lo = mid;
                        best = trial;
                    } else {
                        hi = mid;
                    }
                }
                sf = lo;
                // Noise is not strictly monotone in the step; probe a few coarser steps.
                for (int s = lo + 2; s <= std::min(lo + 6, kMaxScalefactor); ++s) {
                    quantize_band(x, s, trial);
                    if (trial.noise <= limit) {
                        sf = s;
                        best = trial;
                    }
                }
            }
        }
        const bool all_zero = std::all_of(best.q.begin(), best.q.end(), [](std::int32_t v) { return v == 0; });
        c.scalefactors[static_cast<std::size_t>(b)] = all_zero ? 0 : sf;
        std::copy(best.q.begin(), best.q.end(), c.quant.begin() + groups.begin(b));
        c.nmr[static_cast<std::size_t>(b)] = best.noise / m;
    }
    return c;
}

std::vector<double> dequantize_channel(const CodedChannel& c, const FrequencyGroups& groups) {
    if (static_cast<int>(c.quant.size()) != groups.bins() || static_cast<int>(c.scalefactors.size()) != groups.count())
        throw ShapeError("dequantize_channel: shape mismatch");
    std::vector<double> out(c.quant.size());
    for (int b = 0; b < groups.count(); ++b)
        for (int k = groups.begin(b); k < groups.end(b); ++k)
            out[static_cast<std::size_t>(k)] = dequantize_value(c.quant[static_cast<std::size_t>(k)], c.scalefactors[static_cast<std::size_t>(b)]);
    return out;
}

std::vector<double> measure_nmr(std::span<const double> original, std::span<const double> decoded,
                                const MaskingCurve& mask, const FrequencyGroups& groups) {
    if (original.size() != decoded.size() || static_cast<int>(original.size()) != groups.bins() ||
        static_cast<int>(mask.band_mask.size()) != groups.count())
        throw ShapeError("measure_nmr: shape mismatch");
    std::vector<double> out(static_cast<std::size_t>(groups.count()));
    for (int b = 0; b < groups.count(); ++b) {
        double noise = 0.0;
        for (int k = groups.begin(b); k < groups.end(b); ++k) {
            const double d = original[static_cast<std::size_t>(k)] - decoded[static_cast<std::size_t>(k)];
            noise += d * d;
        }
        out[static_cast<std::size_t>(b)] = noise / mask.band_mask[static_cast<std::size_t>(b)];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entropy coding

namespace {

constexpr int kClassLimit[EntropyTables::kClasses] = {0, 1, 2, 4, 7, 15, 1 << 30};
constexpr int kEscape = EntropyTables::kMagnitudes - 1;
constexpr int kSfEscape = EntropyTables::kSfSymbols - 1;
constexpr int kSfDeltaBias = 16;
constexpr std::uint32_t kTablesMagic = 0x54455148; // "HQET"
constexpr std::uint32_t kTablesVersion = 1;

void put_golomb(RangeEncoder& rc, std::uint32_t v) {
    const int n = std::bit_width(v + 1U);
    rc.encode_direct(0, n - 1);
    rc.encode_direct(v + 1U, n);
}

std::uint32_t get_golomb(RangeDecoder& rc) {
    int zeros = 0;
    while (rc.decode_direct(1) == 0)
        if (++zeros > 30) throw StreamError("escape code too long");
    const std::uint32_t rest = zeros == 0 ? 0 : rc.decode_direct(zeros);
    return ((1U << zeros) | rest) - 1U;
}

template <typename Models>
void build_models(const EntropyTables& t, Models& cls, Models& mag, AdaptiveModel& sf) {
    cls.clear();
    mag.clear();
    for (const auto& row : t.band_class) cls.emplace_back(row);
    for (const auto& row : t.magnitude) mag.emplace_back(row);
    sf = AdaptiveModel(t.sf_delta);
}

} // namespace

int band_class(std::span<const std::int32_t> q) {
    std::int64_t peak = 0;
    for (const std::int32_t v : q) peak = std::max<std::int64_t>(peak, v < 0 ? -static_cast<std::int64_t>(v) : v);
    int c = 0;
    while (peak > kClassLimit[c]) ++c;
    return c;
}

EntropyTables EntropyTables::defaults() {
    EntropyTables t;
    for (int p = 0; p < kClasses; ++p)
        for (int c = 0; c < kClasses; ++c) t.band_class[p][c] = static_cast<std::uint16_t>(p == c ? 48 : (std::abs(p - c) == 1 ? 12 : 3));
    const double ratio[kClasses - 1] = {0.25, 0.45, 0.6, 0.72, 0.85, 0.93};
    for (int k = 0; k < kClasses - 1; ++k) {
        const int lav = std::min(kClassLimit[k + 1], kEscape - 1);
        for (int m = 0; m < kMagnitudes; ++m) {
            double w = 1.0;
            if (m <= lav) w = 1024.0 * std::pow(ratio[k], m) * (1.0 - ratio[k]);
            if (m == kEscape) w = k == kClasses - 2 ? 256.0 : 1.0;
            t.magnitude[k][m] = static_cast<std::uint16_t>(std::clamp(std::lround(w), 1L, 4096L));
        }
    }
    for (int s = 0; s < kSfSymbols; ++s) {
        const double w = s == kSfEscape ? 1.0 : 256.0 * std::pow(0.6, std::abs(s - kSfDeltaBias));
        t.sf_delta[s] = static_cast<std::uint16_t>(std::clamp(std::lround(w), 1L, 4096L));
    }
    return t;
}

EntropyTables EntropyTables::train(std::span<const CodedChannel> channels, const FrequencyGroups& groups) {
    std::vector<double> cls(kClasses * kClasses, 0.0), mag((kClasses - 1) * kMagnitudes, 0.0), sfd(kSfSymbols, 0.0);
    for (const CodedChannel& c : channels) {
        int prev = 0;
        bool have_sf = false;
        int prev_sf = 0;
        for (int b = 0; b < groups.count(); ++b) {
            const auto q = std::span(c.quant).subspan(static_cast<std::size_t>(groups.begin(b)), static_cast<std::size_t>(groups.width(b)));
            const int k = hoa::band_class(q);
            cls[static_cast<std::size_t>(prev * kClasses + k)] += 1.0;
            prev = k;
            if (k == 0) continue;
            const int sf = c.scalefactors[static_cast<std::size_t>(b)];
            if (have_sf) {
                const int d = sf - prev_sf;
                sfd[static_cast<std::size_t>(d >= -kSfDeltaBias && d < kSfEscape - kSfDeltaBias ? d + kSfDeltaBias : kSfEscape)] += 1.0;
            }
            have_sf = true;
            prev_sf = sf;
            for (const std::int32_t v : q)
                mag[static_cast<std::size_t>((k - 1) * kMagnitudes + std::min(std::abs(v), kEscape))] += 1.0;
        }
    }
    auto scale = [](const double* counts, int n, std::uint16_t* out) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += counts[i];
        for (int i = 0; i < n; ++i) {
            const double w = total > 0.0 ? 1.0 + 1023.0 * counts[i] / total : 64.0;
            out[i] = static_cast<std::uint16_t>(std::lround(w));
        }
    };
    EntropyTables t;
    for (int p = 0; p < kClasses; ++p) scale(&cls[static_cast<std::size_t>(p * kClasses)], kClasses, t.band_class[p]);
    for (int k = 0; k < kClasses - 1; ++k) scale(&mag[static_cast<std::size_t>(k * kMagnitudes)], kMagnitudes, t.magnitude[k]);
    scale(sfd.data(), kSfSymbols, t.sf_delta);
    return t;
}

std::vector<unsigned char> EntropyTables::serialize() const {
    std::vector<unsigned char> out;
    auto put32 = [&out](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    };
    auto put16 = [&out](std::uint16_t v) {
        out.push_back(static_cast<unsigned char>(v));
        out.push_back(static_cast<unsigned char>(v >> 8));
    };
    put32(kTablesMagic);
    put32(kTablesVersion);
    put32(kClasses);
    put32(kMagnitudes);
    put32(kSfSymbols);
    for (const auto& row : band_class)
        for (const auto v : row) put16(v);
    for (const auto& row : magnitude)
        for (const auto v : row) put16(v);
    for (const auto v : sf_delta) put16(v);
    return out;
}

EntropyTables EntropyTables::parse(std::span<const unsigned char> bytes) {
    std::size_t pos = 0;
    auto get = [&](int n) {
        if (pos + static_cast<std::size_t>(n) > bytes.size()) throw FormatError("entropy table file truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    if (get(4) != kTablesMagic) throw FormatError("not an entropy table file");
    if (get(4) != kTablesVersion) throw FormatError("unsupported entropy table version");
    if (get(4) != kClasses || get(4) != kMagnitudes || get(4) != kSfSymbols)
        throw FormatError("entropy table dimensions do not match");
    EntropyTables t;
    for (auto& row : t.band_class)
        for (auto& v : row) v = static_cast<std::uint16_t>(get(2));
    for (auto& row : t.magnitude)
        for (auto& v : row) v = static_cast<std::uint16_t>(get(2));
    for (auto& v : t.sf_delta) v = static_cast<std::uint16_t>(get(2));
    return t;
}

void EntropyTables::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    const auto bytes = serialize();
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + path.string());
}

EntropyTables EntropyTables::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open entropy tables " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(bytes);
}

std::uint32_t EntropyTables::hash() const {
    const auto bytes = serialize();
    return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

CoreEntropyEncoder::CoreEntropyEncoder(const EntropyTables& tables, const FrequencyGroups& groups) : groups_(&groups) {
    build_models(tables, class_models_, magnitude_models_, sf_model_);
}

void CoreEntropyEncoder::encode(const CodedChannel& c) {
    const FrequencyGroups& g = *groups_;
    if (static_cast<int>(c.quant.size()) != g.bins() || static_cast<int>(c.scalefactors.size()) != g.count())
        throw ShapeError("entropy_encode: channel does not match the band layout");
    int prev = 0;
    bool have_sf = false;
    int prev_sf = 0;
    for (int b = 0; b < g.count(); ++b) {
        const auto q = std::span(c.quant).subspan(static_cast<std::size_t>(g.begin(b)), static_cast<std::size_t>(g.width(b)));
        const int k = band_class(q);
        class_models_[static_cast<std::size_t>(prev)].encode(rc_, k);
        prev = k;
        if (k == 0) continue;
        const int sf = c.scalefactors[static_cast<std::size_t>(b)];
        if (sf < kMinScalefactor || sf > kMaxScalefactor) throw ParameterError("scalefactor out of range");
        if (!have_sf) {
            rc_.encode_direct(static_cast<std::uint32_t>(sf + 128), 8);
        } else {
            const int d = sf - prev_sf;
            if (d >= -kSfDeltaBias && d < kSfEscape - kSfDeltaBias) {
                sf_model_.encode(rc_, d + kSfDeltaBias);
            } else {
                sf_model_.encode(rc_, kSfEscape);
                rc_.encode_direct(static_cast<std::uint32_t>(d + 256), 9);
            }
        }
        have_sf = true;
        prev_sf = sf;
        AdaptiveModel& mm = magnitude_models_[static_cast<std::size_t>(k - 1)];
        for (const std::int32_t v : q) {
            const std::uint32_t m = static_cast<std::uint32_t>(v < 0 ? -static_cast<std::int64_t>(v) : v);
            mm.encode(rc_, static_cast<int>(std::min<std::uint32_t>(m, kEscape)));
            if (m >= static_cast<std::uint32_t>(kEscape)) put_golomb(rc_, m - kEscape);
            if (m != 0) rc_.encode_direct(v < 0 ? 1U : 0U, 1);
        }
    }
}

std::vector<unsigned char> CoreEntropyEncoder::finish() { return rc_.finish(); }

CoreEntropyDecoder::CoreEntropyDecoder(std::span<const unsigned char> data, const EntropyTables& tables,
                                       const FrequencyGroups& groups)
    : rc_(data), groups_(&groups) {
    build_models(tables, class_models_, magnitude_models_, sf_model_);
}

CodedChannel CoreEntropyDecoder::decode() {
    const FrequencyGroups& g = *groups_;
    CodedChannel c;
    c.scalefactors.assign(static_cast<std::size_t>(g.count()), 0);
    c.quant.assign(static_cast<std::size_t>(g.bins()), 0);
    int prev = 0;
    bool have_sf = false;
    int prev_sf = 0;
    for (int b = 0; b < g.count(); ++b) {
        const int k = class_models_[static_cast<std::size_t>(prev)].decode(rc_);
        prev = k;
        if (k == 0) continue;
        int sf = 0;
        if (!have_sf) {
            sf = static_cast<int>(rc_.decode_direct(8)) - 128;
        } else {
            const int s = sf_model_.decode(rc_);
            const int d = s == kSfEscape ? static_cast<int>(rc_.decode_direct(9)) - 256 : s - kSfDeltaBias;
            sf = prev_sf + d;
        }
        if (sf < kMinScalefactor || sf > kMaxScalefactor) throw StreamError("scalefactor out of range");
        have_sf = true;
        prev_sf = sf;
        c.scalefactors[static_cast<std::size_t>(b)] = sf;
        AdaptiveModel& mm = magnitude_models_[static_cast<std::size_t>(k - 1)];
        std::int64_t peak = 0;
        for (int i = g.begin(b); i < g.end(b); ++i) {
            std::int64_t m = mm.decode(rc_);
            if (m == kEscape) m += get_golomb(rc_);
            if (m > std::numeric_limits<std::int32_t>::max()) throw StreamError("coefficient out of range");
            peak = std::max(peak, m);
            const bool neg = m != 0 && rc_.decode_direct(1) != 0;
            c.quant[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(neg ? -m : m);
        }
        if (peak > kClassLimit[k] || peak <= kClassLimit[k - 1]) throw StreamError("band class does not match its coefficients");
    }
    c.nmr.assign(static_cast<std::size_t>(g.count()), 0.0);
    c.flagged.assign(static_cast<std::size_t>(g.count()), false);
    return c;
}

std::vector<unsigned char> entropy_encode(const CodedChannel& c, const EntropyTables& tables,
                                          const FrequencyGroups& groups) {
    CoreEntropyEncoder enc(tables, groups);
    enc.encode(c);
    return enc.finish();
}

CodedChannel entropy_decode(std::span<const unsigned char> bytes, const EntropyTables& tables,
                            const FrequencyGroups& groups) {
    CoreEntropyDecoder dec(bytes, tables, groups);
    return dec.decode();
}

std::size_t fixed_width_bits(const CodedChannel& c, const FrequencyGroups& groups) {
    std::int64_t peak = 0;
    for (const std::int32_t v : c.quant) peak = std::max<std::int64_t>(peak, v < 0 ? -static_cast<std::int64_t>(v) : v);
    const auto mag_bits = static_cast<std::size_t>(std::bit_width(static_cast<std::uint64_t>(peak)));
    return static_cast<std::size_t>(groups.count()) * 8 + c.quant.size() * (mag_bits + 1);
}

} // namespace hoa
