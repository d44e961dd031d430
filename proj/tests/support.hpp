#pragma once
// Shared helpers for the unit tests: reference implementations used as
// oracles, random inputs and the trained-resource fixture.

#include "hoa/numlin.hpp"
#include "hoa/pipeline.hpp"
#include "hoa/sideinfo.hpp"
#include "hoa/transform.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include <unistd.h>

namespace hoa::test {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = n(rng);
    return m;
}

/// Direct O(L^2) evaluation of the windowed MDCT sum, one channel.
inline std::vector<double> naive_mdct(const std::vector<double>& x, const std::vector<double>& w) {
    const std::size_t n2 = x.size();
    const std::size_t l = n2 / 2;
    std::vector<double> out(l, 0.0);
    for (std::size_t k = 0; k < l; ++k) {
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n2; ++i) {
            const long double arg = std::numbers::pi_v<long double> / static_cast<long double>(l) *
                                    (static_cast<long double>(i) + 0.5L + static_cast<long double>(l) / 2.0L) *
                                    (static_cast<long double>(k) + 0.5L);
            acc += static_cast<long double>(w[i]) * static_cast<long double>(x[i]) * std::cos(arg);
        }
        out[k] = static_cast<double>(acc);
    }
    return out;
}

/// Minimum assignment cost by enumerating every permutation.
inline double brute_force_assignment(const Eigen::MatrixXd& cost, std::vector<int>* best_perm = nullptr) {
    const int n = static_cast<int>(cost.rows());
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i) c += cost(i, p[static_cast<std::size_t>(i)]);
        if (c < best) {
            best = c;
            if (best_perm) *best_perm = p;
        }
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

/// Row-by-row least squares min |x_row - y V^T| through a pivoted QR of V.
inline Eigen::MatrixXd least_squares_components(const Eigen::MatrixXd& x, const Eigen::MatrixXd& v) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
    Eigen::MatrixXd y(x.rows(), v.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) y.row(r) = qr.solve(x.row(r).transpose()).transpose();
    return y;
}

/// Shannon entropy in bits of an empirical symbol sample, times its size.
template <typename T>
double empirical_entropy_bits(const std::vector<T>& symbols) {
    std::map<T, std::size_t> counts;
    for (const T& s : symbols) ++counts[s];
    const double n = static_cast<double>(symbols.size());
    double bits = 0.0;
    for (const auto& [s, c] : counts) bits -= static_cast<double>(c) * std::log2(static_cast<double>(c) / n);
    return bits;
}

inline double snr_db(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& test) {
    const double err = (ref - test).squaredNorm();
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(ref.squaredNorm() / err);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("hoa_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
}

/// Small hand-made codebooks: coefficients on a uniform grid over [-1, 1],
/// residuals and intra vectors drawn at random (intra rows unit length).
inline QuantizerSet synthetic_quantizers(int channels, std::uint64_t seed, int residual_size = 64, int intra_size = 64) {
    std::mt19937_64 rng(seed);
    QuantizerSet q;
    q.coeff.centroids.resize(16, 1);
    for (int i = 0; i < 16; ++i) q.coeff.centroids(i, 0) = -1.0 + 2.0 * i / 15.0;
    q.residual.centroids = random_matrix(rng, residual_size, channels, 0.05);
    q.residual.centroids.row(0).setZero();
    q.intra.centroids = random_matrix(rng, intra_size, channels);
    for (Eigen::Index r = 0; r < q.intra.centroids.rows(); ++r) q.intra.centroids.row(r).normalize();
    return q;
}

#ifdef HOA_TEST_DATA_DIR
/// Codebooks and entropy tables produced by the training fixture.
inline std::filesystem::path data_dir() { return HOA_TEST_DATA_DIR; }

inline const CodecResources& trained_resources() {
    static const CodecResources res = load_resources(data_dir() / "codebooks");
    return res;
}
#endif

} // namespace hoa::test
