#include "support.hpp"

#include "hoa/core_codec.hpp"
#include "hoa/error.hpp"
#include "hoa/range_coder.hpp"

#include <doctest.h>

using namespace hoa;

namespace {

std::vector<double> random_spectrum(std::mt19937_64& rng, int bins, double scale) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> s(static_cast<std::size_t>(bins));
    // Decaying envelope, roughly like music.
    for (int k = 0; k < bins; ++k) s[static_cast<std::size_t>(k)] = scale * n(rng) / (1.0 + k / 40.0);
    return s;
}

CodedChannel skewed_channel(std::mt19937_64& rng, const FrequencyGroups& g, double p) {
    std::geometric_distribution<int> mag(p);
    std::bernoulli_distribution sign(0.5);
    CodedChannel c;
    c.quant.resize(static_cast<std::size_t>(g.bins()));
    for (auto& q : c.quant) {
        const int m = mag(rng);
        q = sign(rng) ? -m : m;
    }
    c.scalefactors.assign(static_cast<std::size_t>(g.count()), 0);
    for (int b = 0; b < g.count(); ++b) {
        bool nz = false;
        for (int k = g.begin(b); k < g.end(b); ++k) nz |= c.quant[static_cast<std::size_t>(k)] != 0;
        c.scalefactors[static_cast<std::size_t>(b)] = nz ? 10 : 0;
    }
    return c;
}

} // namespace

TEST_CASE("range coder roundtrip") {
    std::mt19937_64 rng(151);
    std::vector<std::uint16_t> prior(20, 1);
    AdaptiveModel enc_model(prior), dec_model(prior);
    RangeEncoder enc;
    std::vector<int> symbols;
    std::vector<std::uint32_t> raw;
    std::geometric_distribution<int> g(0.3);
    std::uniform_int_distribution<std::uint32_t> bits(0, 0xFFFFF);
    for (int i = 0; i < 20000; ++i) {
        const int s = std::min(g(rng), 19);
        symbols.push_back(s);
        enc_model.encode(enc, s);
        if (i % 7 == 0) {
            raw.push_back(bits(rng));
            enc.encode_direct(raw.back(), 20);
        }
    }
    const auto bytes = enc.finish();
    RangeDecoder dec(bytes);
    std::size_t r = 0;
    for (int i = 0; i < 20000; ++i) {
        REQUIRE(dec_model.decode(dec) == symbols[static_cast<std::size_t>(i)]);
        if (i % 7 == 0) REQUIRE(dec.decode_direct(20) == raw[r++]);
    }
    const double ideal = test::empirical_entropy_bits(symbols) + 20.0 * static_cast<double>(raw.size());
    CHECK(bytes.size() * 8.0 <= 1.02 * ideal + 64);
}

TEST_CASE("masking threshold") {
    const auto g = FrequencyGroups::from_offsets({0, 4, 8, 12});
    MaskingModel m;
    const std::vector<double> silence(12, 0.0);
    const MaskingCurve quiet = masking_threshold(silence, g, m);
    for (const double v : quiet.band_mask) CHECK(v == doctest::Approx(4 * m.floor_per_bin));

    std::vector<double> loud(12, 0.0);
    for (int k = 4; k < 8; ++k) loud[static_cast<std::size_t>(k)] = 10.0; // band 1 density 100
    const MaskingCurve c = masking_threshold(loud, g, m);
    const double margin = std::pow(10.0, -m.offset_db / 10.0);
    CHECK(c.band_mask[1] == doctest::Approx(4 * 100.0 * margin));
    CHECK(c.band_mask[2] == doctest::Approx(4 * 100.0 * margin * std::pow(10.0, -m.spread_up_db / 10.0)));
    CHECK(c.band_mask[0] == doctest::Approx(4 * 100.0 * margin * std::pow(10.0, -m.spread_down_db / 10.0)));

    const auto aac = FrequencyGroups::aac48k_long();
    std::vector<double> one(1024, 0.0);
    for (int k = aac.begin(20); k < aac.end(20); ++k) one[static_cast<std::size_t>(k)] = 1.0;
    const MaskingCurve mc = masking_threshold(one, aac, m);
    auto density = [&](int b) { return mc.band_mask[static_cast<std::size_t>(b)] / aac.width(b); };
    for (int b = 21; b < 49; ++b) CHECK(density(b) <= density(b - 1));
    for (int b = 0; b < 20; ++b) CHECK(density(b) <= density(b + 1));
    CHECK_THROWS_AS((void)masking_threshold(silence, aac, m), ShapeError);
}

TEST_CASE("noise-to-mask measurement") {
    const auto g = FrequencyGroups::from_offsets({0, 4, 8});
    MaskingCurve mask{{2.0, 8.0}};
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
    for (const double v : measure_nmr(x, x, mask, g)) CHECK(v == 0.0);
    std::vector<double> y = x;
    y[5] += 0.5; // P = 0.25 in band 1
    const auto nmr = measure_nmr(x, y, mask, g);
    CHECK(nmr[0] == 0.0);
    CHECK(std::abs(nmr[1] - 0.25 / 8.0) < 1e-12);
}

TEST_CASE("MNMR quantization") {
    const auto g = FrequencyGroups::aac48k_long();
    std::mt19937_64 rng(157);

    const std::vector<double> silence(1024, 0.0);
    const CodedChannel z = quantize_mnmr(silence, masking_threshold(silence, g), g, 1.0);
    CHECK(std::all_of(z.quant.begin(), z.quant.end(), [](int q) { return q == 0; }));
    CHECK(entropy_encode(z, EntropyTables::defaults(), g).size() * 8 < 2 * 49);

    const auto s = random_spectrum(rng, 1024, 1.0);
    const MaskingCurve mask = masking_threshold(s, g);
    const CodedChannel vac = quantize_mnmr(s, mask, g, 1e12);
    CHECK(std::all_of(vac.quant.begin(), vac.quant.end(), [](int q) { return q == 0; }));

    std::size_t prev_bits = std::numeric_limits<std::size_t>::max();
    for (const double tau : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = random_spectrum(rng, 1024, std::pow(10.0, trial % 4 - 2));
            const MaskingCurve m = masking_threshold(x, g);
            const CodedChannel c = quantize_mnmr(x, m, g, tau);
            const auto nmr = measure_nmr(x, dequantize_channel(c, g), m, g);
            for (int b = 0; b < g.count(); ++b) {
                CHECK_FALSE(c.flagged[static_cast<std::size_t>(b)]);
                CHECK(nmr[static_cast<std::size_t>(b)] <= tau);
                CHECK(nmr[static_cast<std::size_t>(b)] == doctest::Approx(c.nmr[static_cast<std::size_t>(b)]));
            }
        }
        const CodedChannel c = quantize_mnmr(s, mask, g, tau);
        const std::size_t bits = entropy_encode(c, EntropyTables::defaults(), g).size() * 8;
        CHECK(bits <= prev_bits);
        prev_bits = bits;
    }
    CHECK_THROWS_AS((void)quantize_mnmr(s, mask, g, 0.0), ParameterError);
}

TEST_CASE("unreachable targets are flagged") {
    const auto g = FrequencyGroups::from_offsets({0, 8});
    std::vector<double> x(8, 1e9);
    x[0] = 1e9 + 0.123456;
    MaskingCurve tiny{{1e-30}};
    const CodedChannel c = quantize_mnmr(x, tiny, g, 1.0);
    CHECK(c.flagged[0]);
    CHECK(c.scalefactors[0] == kMinScalefactor);
}

TEST_CASE("entropy coding is lossless and beats fixed-width coding") {
    const auto g = FrequencyGroups::aac48k_long();
    std::mt19937_64 rng(163);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_spectrum(rng, 1024, std::pow(10.0, trial % 5 - 2));
        const CodedChannel c = quantize_mnmr(x, masking_threshold(x, g), g, 0.5 + trial % 3);
        const auto bytes = entropy_encode(c, EntropyTables::defaults(), g);
        const CodedChannel d = entropy_decode(bytes, EntropyTables::defaults(), g);
        CHECK(d.quant == c.quant);
        CHECK(d.scalefactors == c.scalefactors);
        CHECK(bytes.size() * 8 <= fixed_width_bits(c, g));
    }
    // Large magnitudes go through the escape path.
    CodedChannel big = skewed_channel(rng, g, 0.5);
    big.quant[100] = 123456;
    big.quant[101] = -70000;
    big.scalefactors[0] = kMinScalefactor;
    big.scalefactors[48] = kMaxScalefactor;
    const auto bytes = entropy_encode(big, EntropyTables::defaults(), g);
    const CodedChannel d = entropy_decode(bytes, EntropyTables::defaults(), g);
    CHECK(d.quant == big.quant);
    CHECK(d.scalefactors == big.scalefactors);
}

TEST_CASE("skewed indices code close to their entropy") {
    const auto g = FrequencyGroups::aac48k_long();
    std::mt19937_64 rng(167);
    for (const double p : {0.3, 0.5, 0.7}) {
        CoreEntropyEncoder enc(EntropyTables::defaults(), g);
        std::vector<std::int32_t> all;
        for (int ch = 0; ch < 8; ++ch) {
            const CodedChannel c = skewed_channel(rng, g, p);
            all.insert(all.end(), c.quant.begin(), c.quant.end());
            enc.encode(c);
        }
        const double bits = static_cast<double>(enc.finish().size()) * 8.0;
        const double h = test::empirical_entropy_bits(all);
        CAPTURE(p);
        CHECK(bits <= 1.10 * h);
    }
}

TEST_CASE("corrupt and truncated payloads") {
    const auto g = FrequencyGroups::aac48k_long();
    std::mt19937_64 rng(173);
    const CodedChannel c = skewed_channel(rng, g, 0.4);
    const auto bytes = entropy_encode(c, EntropyTables::defaults(), g);
    const std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
    CHECK_THROWS_AS((void)entropy_decode(cut, EntropyTables::defaults(), g), StreamError);
    CHECK_THROWS_AS((void)entropy_decode(std::vector<unsigned char>{}, EntropyTables::defaults(), g), StreamError);
}

TEST_CASE("entropy tables") {
    const auto g = FrequencyGroups::aac48k_long();
    std::mt19937_64 rng(179);
    std::vector<CodedChannel> train;
    for (int i = 0; i < 30; ++i) train.push_back(skewed_channel(rng, g, 0.8));
    const EntropyTables t = EntropyTables::train(train, g);
    const EntropyTables back = EntropyTables::parse(t.serialize());
    CHECK(back.hash() == t.hash());
    CHECK(EntropyTables::defaults().hash() != t.hash());
    std::size_t trained = 0, defaults = 0;
    for (const auto& c : train) {
        trained += entropy_encode(c, t, g).size();
        defaults += entropy_encode(c, EntropyTables::defaults(), g).size();
        CHECK(entropy_decode(entropy_encode(c, t, g), t, g).quant == c.quant);
    }
    CHECK(trained <= defaults);
    auto bad = t.serialize();
    bad[0] ^= 0xFF;
    CHECK_THROWS_AS((void)EntropyTables::parse(bad), FormatError);
}
