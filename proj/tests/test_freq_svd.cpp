#include "support.hpp"

#include "hoa/error.hpp"
#include "hoa/freq_svd.hpp"
#include "hoa/sideinfo.hpp"

#include <doctest.h>

using namespace hoa;

TEST_CASE("band layouts") {
    const BandLayout one = BandLayout::uniform(1024, 1);
    CHECK(one.lengths == std::vector<int>{1024});
    const BandLayout four = BandLayout::uniform(1024, 4);
    CHECK(four.lengths == std::vector<int>{256, 256, 256, 256});
    CHECK(four.offset(2) == 512);
    CHECK(four.total() == 1024);
    CHECK_THROWS_AS((void)BandLayout::uniform(1024, 3), ParameterError);
    BandLayout bad{{100, 200}};
    CHECK_THROWS_AS(bad.validate(1024), ShapeError);

    std::mt19937_64 rng(71);
    const Eigen::MatrixXd s = test::random_matrix(rng, 1024, 16);
    const auto bands = band_split(s, four);
    REQUIRE(bands.size() == 4);
    for (const auto& b : bands) CHECK(b.rows() == 256);
    CHECK(band_concat(bands) == s);
    CHECK(band_split(s, one).front() == s);
    CHECK_THROWS_AS((void)band_split(s, bad), ShapeError);
}

TEST_CASE("exact low-rank bands are captured completely") {
    std::mt19937_64 rng(73);
    const BandLayout layout = BandLayout::uniform(512, 4);
    Eigen::MatrixXd s(512, 16);
    for (int b = 0; b < 4; ++b)
        s.middleRows(b * 128, 128) = test::random_matrix(rng, 128, 2) * test::random_matrix(rng, 2, 16);
    const auto dec = band_decompose(band_split(s, layout), {2, 2, 2, 2});
    const Eigen::MatrixXd res = compute_residual(s, dec);
    for (int b = 0; b < 4; ++b) CHECK(res.middleRows(b * 128, 128).squaredNorm() < 1e-18 * s.squaredNorm());
}

TEST_CASE("captured energy equals the top singular values") {
    std::mt19937_64 rng(79);
    const BandLayout layout = BandLayout::uniform(256, 4);
    const Eigen::MatrixXd s = test::random_matrix(rng, 256, 16);
    const std::vector<int> ranks = {1, 2, 3, 4};
    const auto bands = band_split(s, layout);
    const auto dec = band_decompose(bands, ranks);
    const auto fg = band_split(foreground_spectrum(dec), layout);
    for (int b = 0; b < 4; ++b) {
        const SvdResult sv = svd(bands[static_cast<std::size_t>(b)]);
        const double top = sv.singular_values.head(ranks[static_cast<std::size_t>(b)]).squaredNorm();
        CHECK(fg[static_cast<std::size_t>(b)].squaredNorm() == doctest::Approx(top).epsilon(1e-9));
    }
}

TEST_CASE("residual properties") {
    std::mt19937_64 rng(83);
    const BandLayout layout = BandLayout::uniform(256, 2);
    const Eigen::MatrixXd s = test::random_matrix(rng, 256, 9);
    const auto bands = band_split(s, layout);

    const auto full = band_decompose(bands, {9, 9});
    CHECK(compute_residual(s, full).norm() < 1e-12 * s.norm());

    const auto none = band_decompose(bands, {0, 0});
    CHECK(compute_residual(s, none) == s);

    const auto part = band_decompose(bands, {3, 2});
    const auto res = band_split(compute_residual(s, part), layout);
    for (std::size_t b = 0; b < 2; ++b)
        CHECK((res[b] * part.bases[b]).norm() < 1e-8 * s.norm());
}

TEST_CASE("compaction dominance") {
    std::mt19937_64 rng(89);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd s = test::random_matrix(rng, 256, 16);
        const auto g = compaction_gain(s, 4, BandLayout::uniform(256, 4));
        CHECK(g.energy_banded >= g.energy_global - 1e-9 * s.squaredNorm());
        const auto g1 = compaction_gain(s, 4, BandLayout::uniform(256, 1));
        CHECK(g1.energy_banded == doctest::Approx(g1.energy_global).epsilon(1e-12));
    }
    // Orthogonal rank-one content in two bands: banded rank 1 captures both.
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(64, 4);
    s.topRows(32).col(0) = test::random_matrix(rng, 32, 1);
    s.bottomRows(32).col(1) = test::random_matrix(rng, 32, 1);
    const auto g = compaction_gain(s, 1, BandLayout::uniform(64, 2));
    CHECK(g.energy_banded == doctest::Approx(s.squaredNorm()));
    CHECK(g.energy_banded > g.energy_global + 1e-3 * s.squaredNorm());
}

TEST_CASE("coded band decomposition follows the coder") {
    std::mt19937_64 rng(97);
    const Eigen::MatrixXd s = test::random_matrix(rng, 1024, 16);
    const auto bands = band_split(s, BandLayout::uniform(1024, 4));
    const BasisCoder bypass = BasisCoder::bypass(16, 4);
    BasisState state;
    std::vector<BandSideInfo> side;
    const auto dec = band_decompose(bands, bypass, state, side);
    CHECK(side.size() == 4);
    const auto ref = band_decompose(bands, {4, 4, 4, 4});
    CHECK((foreground_spectrum(dec) - foreground_spectrum(ref)).norm() < 1e-9 * s.norm());
    CHECK_FALSE(state.has_previous());

    const BasisCoder q(test::synthetic_quantizers(16, 3), 4);
    const auto qdec = band_decompose(bands, q, state, side);
    for (const auto& b : qdec.bases)
        for (Eigen::Index c = 0; c < b.cols(); ++c) CHECK(b.col(c).norm() == doctest::Approx(1.0));
}
