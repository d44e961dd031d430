#include "support.hpp"

#include "hoa/baseline_td.hpp"
#include "hoa/bitio.hpp"
#include "hoa/error.hpp"
#include "hoa/sideinfo.hpp"
#include "hoa/synth.hpp"

#include <doctest.h>

using namespace hoa;

namespace {

Eigen::MatrixXd orthonormal(std::mt19937_64& rng, int m, int r) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(test::random_matrix(rng, m, r));
    return qr.householderQ() * Eigen::MatrixXd::Identity(m, r);
}

Eigen::MatrixXd perturb(std::mt19937_64& rng, const Eigen::MatrixXd& v, double amount) {
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(v + test::random_matrix(rng, v.rows(), v.cols(), amount));
    return qr.householderQ() * Eigen::MatrixXd::Identity(v.rows(), v.cols());
}

/// Encodes a frame's targets, writes and reads them back, and checks both
/// sides reconstruct the same bases. Commits the state.
std::vector<Eigen::MatrixXd> roundtrip(const BasisCoder& coder, const std::vector<Eigen::MatrixXd>& targets,
                                       BasisState& enc_state, BasisState& dec_state, int mode) {
    const auto coded = coder.encode(targets, enc_state);
    const int bands = static_cast<int>(targets.size());
    BitWriter w;
    for (const auto& c : coded) coder.write(w, c.info, enc_state, bands);
    const auto bytes = w.take();
    BitReader r(bytes);
    std::vector<Eigen::MatrixXd> enc_bases, dec_bases;
    for (int b = 0; b < bands; ++b) {
        const BandSideInfo info = coder.read(r, dec_state, bands, b);
        const Eigen::MatrixXd rec = coder.reconstruct(info, dec_state);
        CHECK(rec == coded[static_cast<std::size_t>(b)].reconstructed);
        CHECK(info.active == coded[static_cast<std::size_t>(b)].info.active);
        enc_bases.push_back(coded[static_cast<std::size_t>(b)].reconstructed);
        dec_bases.push_back(rec);
    }
    BasisCoder::commit(enc_state, enc_bases, mode);
    BasisCoder::commit(dec_state, dec_bases, mode);
    return dec_bases;
}

} // namespace

TEST_CASE("prediction coefficients and residuals") {
    std::mt19937_64 rng(101);
    const Eigen::MatrixXd p = orthonormal(rng, 16, 4);
    auto pr = predict_basis(p, p);
    for (const auto& c : pr) {
        CHECK(c.rho == doctest::Approx(1.0));
        CHECK(c.residual.norm() < 1e-12);
    }
    // Columns orthogonal to their predecessors.
    Eigen::MatrixXd q = orthonormal(rng, 16, 8);
    pr = predict_basis(q.leftCols(4), q.rightCols(4));
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(pr[static_cast<std::size_t>(i)].rho) < 1e-12);
        CHECK((pr[static_cast<std::size_t>(i)].residual - q.col(4 + i)).norm() < 1e-12);
    }
    for (int t = 0; t < 20; ++t) {
        const Eigen::MatrixXd a = test::random_matrix(rng, 16, 4);
        const Eigen::MatrixXd b = test::random_matrix(rng, 16, 4);
        pr = predict_basis(a, b);
        for (int i = 0; i < 4; ++i)
            CHECK((pr[static_cast<std::size_t>(i)].rho * a.col(i) + pr[static_cast<std::size_t>(i)].residual - b.col(i)).norm() < 1e-12);
    }
    Eigen::MatrixXd zero = p;
    zero.col(2).setZero();
    pr = predict_basis(zero, p);
    CHECK(pr[2].intra);
    CHECK_FALSE(pr[0].intra);
}

TEST_CASE("permutation ranks") {
    CHECK(factorial(0) == 1);
    CHECK(factorial(4) == 24);
    CHECK(permutation_rank({0, 1, 2, 3}) == 0);
    CHECK(permutation_rank({3, 2, 1, 0}) == 23);
    for (std::uint64_t r = 0; r < 120; ++r) CHECK(permutation_rank(permutation_unrank(r, 5)) == r);
}

TEST_CASE("first frame is coded intra") {
    std::mt19937_64 rng(103);
    const BasisCoder coder(test::synthetic_quantizers(16, 5), 4);
    BasisState state;
    const auto coded = coder.encode({orthonormal(rng, 16, 4)}, state);
    for (const auto& c : coded.front().info.columns) CHECK(c.intra);
    for (Eigen::Index i = 0; i < 4; ++i) CHECK(coded.front().reconstructed.col(i).norm() == doctest::Approx(1.0));
}

TEST_CASE("encoder and decoder reconstruct identical bases across mode switches") {
    std::mt19937_64 rng(107);
    const BasisCoder coder(test::synthetic_quantizers(16, 7), 4);
    BasisState enc, dec;
    Eigen::MatrixXd single = orthonormal(rng, 16, 4);
    std::vector<Eigen::MatrixXd> banded;
    for (int b = 0; b < 4; ++b) banded.push_back(orthonormal(rng, 16, 4));
    for (int f = 0; f < 60; ++f) {
        const int mode = (f / 5) % 2;
        single = perturb(rng, single, 0.05);
        for (auto& b : banded) b = perturb(rng, b, 0.05);
        if (mode == 0) {
            roundtrip(coder, {single}, enc, dec, 0);
        } else {
            roundtrip(coder, banded, enc, dec, 1);
        }
        REQUIRE(enc.bases.size() == dec.bases.size());
        for (std::size_t b = 0; b < enc.bases.size(); ++b) CHECK(enc.bases[b] == dec.bases[b]);
    }
}

TEST_CASE("mode switch predicts from the best matching previous band") {
    std::mt19937_64 rng(109);
    const BasisCoder coder(test::synthetic_quantizers(16, 9), 4);
    std::vector<Eigen::MatrixXd> prev;
    for (int b = 0; b < 4; ++b) prev.push_back(orthonormal(rng, 16, 4));
    BasisState state;
    BasisCoder::commit(state, prev, 1);
    const auto coded = coder.encode({perturb(rng, prev[2], 0.01)}, state);
    CHECK(coded.front().info.predictor == 2);
}

TEST_CASE("static basis is predicted, not sent intra") {
    std::mt19937_64 rng(113);
    const BasisCoder coder(test::synthetic_quantizers(16, 11), 4);
    const Eigen::MatrixXd v = orthonormal(rng, 16, 4);
    BasisState enc, dec;
    roundtrip(coder, {v}, enc, dec, 0);
    // The decoder-side basis repeated: rho = 1 and a zero residual.
    const auto coded = coder.encode({enc.bases.front()}, enc);
    for (const auto& c : coded.front().info.columns) {
        CHECK_FALSE(c.intra);
        CHECK(c.coeff_index == 15);
        CHECK(c.residual_index == 0);
    }
    CHECK((coded.front().reconstructed - enc.bases.front()).norm() < 1e-12);
}

TEST_CASE("bypass coder transmits bases exactly") {
    std::mt19937_64 rng(127);
    const BasisCoder coder = BasisCoder::bypass(16, 4);
    BasisState enc, dec;
    for (int f = 0; f < 5; ++f) {
        const Eigen::MatrixXd v = orthonormal(rng, 16, 4);
        const auto rec = roundtrip(coder, {v}, enc, dec, 0);
        // Every slot holds one of the target columns up to sign.
        for (Eigen::Index i = 0; i < 4; ++i) {
            const double best = (v.transpose() * rec.front().col(i)).cwiseAbs().maxCoeff();
            CHECK(best == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("corrupt side info is a stream error") {
    const BasisCoder coder(test::synthetic_quantizers(16, 13), 4);
    BasisState state;
    std::mt19937_64 rng(131);
    BasisCoder::commit(state, {orthonormal(rng, 16, 4)}, 0);
    BitWriter w;
    w.write(31, 5); // permutation index beyond 4! - 1
    w.write(0, 32);
    const auto bytes = w.take();
    BitReader r(bytes);
    CHECK_THROWS_AS((void)coder.read(r, state, 1, 0), StreamError);

    BitReader empty(std::span<const unsigned char>{});
    CHECK_THROWS_AS((void)coder.read(empty, state, 1, 0), StreamError);
}

TEST_CASE("quantizer files") {
    const auto dir = test::temp_dir("quant");
    CHECK_THROWS_WITH_AS((void)load_quantizers(dir), doctest::Contains("train-quantizers"), ConfigError);
    const QuantizerSet q = test::synthetic_quantizers(16, 17);
    save_quantizers(q, dir);
    const QuantizerSet r = load_quantizers(dir);
    CHECK(r.hash() == q.hash());
    CHECK(r.intra.centroids == q.intra.centroids);
    CHECK(test::synthetic_quantizers(16, 18).hash() != q.hash());
    std::filesystem::remove_all(dir);
}

TEST_CASE("quantizer training") {
    SceneRecipe r;
    r.seconds = 1.0;
    r.order = 1;
    SourceRecipe a;
    a.azimuth_deg = 30.0;
    a.kind = SourceRecipe::Kind::kTone;
    a.low_hz = 440.0;
    r.sources.push_back(a);
    const std::vector<HoaSignal> constant = {synthesize_scene(r)};

    TrainingConfig tc;
    tc.rank = 1;
    tc.coeff_size = 2;
    tc.residual_size = 2;
    tc.intra_size = 2;
    tc.band_count = 1;
    TrainingReport rep;
    const QuantizerSet q = train_quantizers(constant, tc, &rep);
    CHECK(rep.frames > 0);
    for (int i = 0; i < q.coeff.size(); ++i) CHECK(q.coeff.centroids(i, 0) > 0.99);
    CHECK(q.residual.centroids.norm() < 0.05);
    CHECK(train_quantizers(constant, tc).hash() == q.hash());

    TrainingConfig huge = tc;
    huge.residual_size = 100000;
    CHECK_THROWS_AS((void)train_quantizers(constant, huge), TrainingError);
    CHECK_THROWS_AS((void)train_quantizers({}, tc), TrainingError);
}
