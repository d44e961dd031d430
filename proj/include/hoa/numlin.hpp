#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hoa {

/// Thin SVD A = U diag(s) V^T with k = min(m, n) columns.
struct SvdResult {
    Eigen::MatrixXd left;            // m x k
    Eigen::VectorXd singular_values; // k, non-increasing
    Eigen::MatrixXd right;           // n x k
};

/// Thin SVD with deterministic signs: the largest-magnitude entry of every
/// right singular vector is positive (first such entry on ties), and the left
/// vector is negated along with it. Throws NumericError on non-finite input.
[[nodiscard]] SvdResult svd(const Eigen::MatrixXd& a);

/// Optimal assignment. permutation[i] is the column assigned to row i.
struct Assignment {
    std::vector<int> permutation;
    double total_cost = 0.0;
};

/// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
/// potentials). Among optimal assignments the lexicographically smallest
/// permutation is returned. Throws ShapeError for non-square input.
[[nodiscard]] Assignment hungarian(const Eigen::MatrixXd& cost);

/// Vector-quantizer codebook; centroids are rows.
struct Codebook {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> centroids;
    std::uint64_t seed = 0;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(centroids.rows()); }
    [[nodiscard]] int dimension() const noexcept { return static_cast<int>(centroids.cols()); }
    [[nodiscard]] std::span<const double> centroid(int i) const {
        return {centroids.row(i).data(), static_cast<std::size_t>(centroids.cols())};
    }
};

struct GlaOptions {
    int size = 16;
    double tolerance = 1e-6; // relative distortion improvement that stops the iteration
    int max_iterations = 100;
    std::uint64_t seed = 0x5eed;
};

struct GlaResult {
    Codebook codebook;
    std::vector<double> distortion_history; // mean squared error after each partition
    int iterations = 0;
    /// Set when the requested size exceeds the number of distinct training
    /// vectors; the codebook then contains duplicate centroids.
    bool degenerate = false;
};

/// Generalized Lloyd algorithm with k-means++ seeding from `seed`. Empty
/// cells are reseeded with the training vector farthest from its centroid.
/// Training vectors are rows of `training`. Throws TrainingError on empty
/// training data or size < 1.
[[nodiscard]] GlaResult gla_train(const Eigen::Ref<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& training,
                                  const GlaOptions& options);

struct Quantized {
    int index = 0;
    std::span<const double> reconstruction;
};

/// Nearest centroid in Euclidean distance, ties to the smallest index.
/// Throws ShapeError on dimension mismatch.
[[nodiscard]] Quantized quantize_nearest(std::span<const double> v, const Codebook& cb);

/// Codebook file: "HQCB" magic, u32 version (1), u32 dimension, u32 size,
/// u64 seed, then size*dimension float64 centroids row-major. All little-endian.
void write_codebook(const Codebook& cb, const std::filesystem::path& path);
[[nodiscard]] Codebook read_codebook(const std::filesystem::path& path);
[[nodiscard]] std::vector<unsigned char> serialize_codebook(const Codebook& cb);
[[nodiscard]] Codebook parse_codebook(std::span<const unsigned char> bytes);

} // namespace hoa
