#include "support.hpp"

#include "hoa/error.hpp"
#include "hoa/transform.hpp"

#include <doctest.h>

using namespace hoa;

TEST_CASE("sine window satisfies Princen-Bradley") {
    const auto w = AnalysisWindow::sine(1024);
    REQUIRE(w.values.size() == 2048);
    for (int l = 0; l < 1024; ++l) {
        const double a = w.values[static_cast<std::size_t>(l)];
        const double b = w.values[static_cast<std::size_t>(l + 1024)];
        CHECK(a * a + b * b == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("MDCT matches the direct sum") {
    std::mt19937_64 rng(11);
    for (const int l : {4, 16, 1024}) {
        const auto w = AnalysisWindow::sine(l);
        const Mdct m(l);
        const Eigen::MatrixXd block = test::random_matrix(rng, 2 * l, l == 1024 ? 16 : 3);
        Eigen::MatrixXd out;
        m.forward(block, w, out);
        REQUIRE(out.rows() == l);
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
            std::vector<double> x(block.col(c).data(), block.col(c).data() + 2 * l);
            const auto ref = test::naive_mdct(x, w.values);
            const Eigen::Map<const Eigen::VectorXd> r(ref.data(), l);
            CHECK((out.col(c) - r).norm() <= 1e-9 * r.norm());
        }
    }
}

TEST_CASE("MDCT of zeros and of a basis function") {
    const int l = 64;
    const auto w = AnalysisWindow::sine(l);
    const Mdct m(l);
    Eigen::MatrixXd out;
    m.forward(Eigen::MatrixXd::Zero(2 * l, 2), w, out);
    CHECK(out.isZero());

    const int k0 = 17;
    Eigen::MatrixXd x(2 * l, 1);
    for (int i = 0; i < 2 * l; ++i)
        x(i, 0) = std::cos(std::numbers::pi / l * (i + 0.5 + l / 2.0) * (k0 + 0.5)) / w.values[static_cast<std::size_t>(i)];
    m.forward(x, w, out);
    Eigen::Index peak = 0;
    out.col(0).cwiseAbs().maxCoeff(&peak);
    CHECK(peak == k0);
    CHECK(out(k0, 0) * out(k0, 0) >= 0.99 * out.squaredNorm());
}

TEST_CASE("IMDCT overlap-add reconstructs the signal") {
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd x = test::random_matrix(rng, 10 * 1024, 4);
    const HoaSignal s(48000, 1, x);
    const auto spec = analyze_signal(s, 1024);
    CHECK(spec.size() == frame_count_for(x.rows(), 1024));
    const Eigen::MatrixXd y = synthesize_signal(spec, 1024, x.rows());
    CHECK(test::snr_db(x, y) > 180.0);

    Eigen::MatrixXd zero;
    Mdct(1024).inverse(Eigen::MatrixXd::Zero(1024, 2), AnalysisWindow::sine(1024), zero);
    CHECK(zero.rows() == 2048);
    CHECK(zero.isZero());
}

TEST_CASE("MDCT energy is within a factor of two of the windowed energy") {
    std::mt19937_64 rng(17);
    const int l = 256;
    const auto w = AnalysisWindow::sine(l);
    const Mdct m(l);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd x = test::random_matrix(rng, 2 * l, 1);
        double windowed = 0.0;
        for (int i = 0; i < 2 * l; ++i) windowed += std::pow(w.values[static_cast<std::size_t>(i)] * x(i, 0), 2);
        Eigen::MatrixXd out;
        m.forward(x, w, out);
        const double ratio = out.squaredNorm() / windowed;
        CHECK(ratio > 0.5 * l / 2.0);
        CHECK(ratio < 2.0 * l / 2.0);
    }
}

TEST_CASE("overlap_add index arithmetic") {
    const int l = 8;
    std::vector<Eigen::MatrixXd> blocks(3, Eigen::MatrixXd::Ones(2 * l, 1));
    const Eigen::MatrixXd y = overlap_add(blocks, l);
    CHECK(y.rows() == 2 * l);
    // Interior samples are covered by two blocks of ones.
    CHECK(y.col(0).isConstant(2.0));

    std::vector<Eigen::MatrixXd> one(1, Eigen::MatrixXd::Ones(2 * l, 1));
    CHECK(overlap_add(one, l).rows() == 0);

    std::vector<Eigen::MatrixXd> three(3, Eigen::MatrixXd::Ones(2048, 1));
    CHECK(overlap_add(three, 1024).rows() == 2048);
}

TEST_CASE("shape errors") {
    const auto w = AnalysisWindow::sine(16);
    TimeFrame f{0, Eigen::MatrixXd::Zero(30, 2)};
    CHECK_THROWS_AS((void)mdct_forward(f, w), ShapeError);
    SpectralFrame s{0, Eigen::MatrixXd::Zero(15, 2)};
    CHECK_THROWS_AS((void)mdct_inverse(s, w), ShapeError);
}
