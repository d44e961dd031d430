#include "hoa/numlin.hpp"

#include "hoa/error.hpp"
#include "hoa/simd.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>

namespace hoa {

SvdResult svd(const Eigen::MatrixXd& a) {
    if (!a.allFinite()) throw NumericError("svd: non-finite input");
    SvdResult r;
    const Eigen::Index k = std::min(a.rows(), a.cols());
    if (k == 0) {
        r.left.resize(a.rows(), 0);
        r.right.resize(a.cols(), 0);
        r.singular_values.resize(0);
        return r;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> dec(
        a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    r.left = dec.matrixU();
    r.right = dec.matrixV();
    r.singular_values = dec.singularValues();
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < r.right.rows(); ++i) {
            const double m = std::abs(r.right(i, j));
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        if (r.right(arg, j) < 0.0) {
            r.right.col(j) *= -1.0;
            r.left.col(j) *= -1.0;
        }
    }
    return r;
}

namespace {

// Kuhn-Munkres with row/column potentials, O(n^3). Returns row -> column.
std::vector<int> solve_assignment(const Eigen::MatrixXd& c) {
    const int n = static_cast<int>(c.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double assignment_cost(const Eigen::MatrixXd& c, const std::vector<int>& perm) {
    double s = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) s += c(static_cast<Eigen::Index>(i), perm[i]);
    return s;
}

double min_cost(const Eigen::MatrixXd& c) {
    if (c.rows() == 0) return 0.0;
    return assignment_cost(c, solve_assignment(c));
}

} // namespace

Assignment hungarian(const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ShapeError("hungarian: cost matrix must be square");
    if (!cost.allFinite()) throw NumericError("hungarian: non-finite cost");
    const int n = static_cast<int>(cost.rows());
    Assignment a;
    if (n == 0) return a;
    const double optimum = min_cost(cost);
    const double eps = 1e-9 * (1.0 + std::abs(optimum));

    // Fix rows one at a time, taking the smallest column that still admits an
    // optimal completion.
    std::vector<int> remaining_cols(n);
    for (int j = 0; j < n; ++j) remaining_cols[j] = j;
    double fixed = 0.0;
    a.permutation.resize(n);
    for (int i = 0; i < n; ++i) {
        const int rest = n - i - 1;
        bool placed = false;
        for (std::size_t k = 0; k < remaining_cols.size() && !placed; ++k) {
            const int j = remaining_cols[k];
            Eigen::MatrixXd sub(rest, rest);
            for (int r = 0; r < rest; ++r) {
                int cc = 0;
                for (int col : remaining_cols) {
                    if (col == j) continue;
                    sub(r, cc++) = cost(i + 1 + r, col);
                }
            }
            const double total = fixed + cost(i, j) + min_cost(sub);
            if (total <= optimum + eps) {
                a.permutation[i] = j;
                fixed += cost(i, j);
                remaining_cols.erase(remaining_cols.begin() + static_cast<std::ptrdiff_t>(k));
                placed = true;
            }
        }
        if (!placed) throw NumericError("hungarian: tie-break search failed");
    }
    a.total_cost = assignment_cost(cost, a.permutation);
    return a;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t count_distinct_rows(const Eigen::Ref<const RowMatrix>& data) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    auto less = [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            if (data(a, c) != data(b, c)) return data(a, c) < data(b, c);
        }
        return false;
    };
    std::sort(order.begin(), order.end(), less);
    std::size_t distinct = order.empty() ? 0 : 1;
    for (std::size_t i = 1; i < order.size(); ++i)
        if (less(order[i - 1], order[i])) ++distinct;
    return distinct;
}

} // namespace

GlaResult gla_train(const Eigen::Ref<const RowMatrix>& training, const GlaOptions& options) {
    if (training.rows() == 0) throw TrainingError("gla_train: empty training set");
    if (options.size < 1) throw TrainingError("gla_train: codebook size must be >= 1");
    if (!training.allFinite()) throw NumericError("gla_train: non-finite training vector");

    const auto& k = simd::active();
    const Eigen::Index n = training.rows();
    const Eigen::Index dim = training.cols();
    const int size = options.size;
    GlaResult result;
    result.degenerate = static_cast<std::size_t>(size) > count_distinct_rows(training);

    std::mt19937_64 rng(options.seed);
    RowMatrix centroids(size, dim);
    // k-means++ seeding.
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    Eigen::Index first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
    centroids.row(0) = training.row(first);
    for (int c = 1; c < size; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = k.sum_sq_diff(training.row(i).data(), centroids.row(c - 1).data(),
                                           static_cast<std::size_t>(dim));
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
            total += d2[static_cast<std::size_t>(i)];
        }
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
        }
        centroids.row(c) = training.row(pick);
    }

    std::vector<int> cell(static_cast<std::size_t>(n));
    std::vector<double> dist(static_cast<std::size_t>(n));
    RowMatrix sums(size, dim);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(size));
    for (int iter = 0; iter < std::max(options.max_iterations, 1); ++iter) {
        double distortion = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d = 0.0;
            cell[static_cast<std::size_t>(i)] = static_cast<int>(k.nearest_row(
                training.row(i).data(), centroids.data(), static_cast<std::size_t>(dim),
                static_cast<std::size_t>(size), &d));
            dist[static_cast<std::size_t>(i)] = d;
            distortion += d;
        }
        distortion /= static_cast<double>(n);
        result.distortion_history.push_back(distortion);
        result.iterations = iter + 1;

        const auto h = result.distortion_history.size();
        if (h >= 2) {
            const double prev = result.distortion_history[h - 2];
            if (prev <= 0.0 || (prev - distortion) / prev < options.tolerance) break;
        }
        if (distortion == 0.0) break;

        sums.setZero();
        std::fill(counts.begin(), counts.end(), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = cell[static_cast<std::size_t>(i)];
            sums.row(c) += training.row(i);
            ++counts[static_cast<std::size_t>(c)];
        }
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (int c = 0; c < size; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            Eigen::Index far = -1;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (!taken[static_cast<std::size_t>(i)] && dist[static_cast<std::size_t>(i)] > far_d) {
                    far_d = dist[static_cast<std::size_t>(i)];
                    far = i;
                }
            }
            if (far >= 0) {
                taken[static_cast<std::size_t>(far)] = 1;
                centroids.row(c) = training.row(far);
            }
        }
    }
    result.codebook.centroids = std::move(centroids);
    result.codebook.seed = options.seed;
    return result;
}

Quantized quantize_nearest(std::span<const double> v, const Codebook& cb) {
    if (static_cast<int>(v.size()) != cb.dimension())
        throw ShapeError("quantize_nearest: vector dimension " + std::to_string(v.size()) + " vs codebook " +
                         std::to_string(cb.dimension()));
    if (cb.size() == 0) throw ConfigError("quantize_nearest: empty codebook");
    const auto idx = simd::active().nearest_row(v.data(), cb.centroids.data(), v.size(),
                                                static_cast<std::size_t>(cb.size()), nullptr);
    return {static_cast<int>(idx), cb.centroid(static_cast<int>(idx))};
}

namespace {

constexpr std::uint32_t kCodebookVersion = 1;

void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::span<const unsigned char> in, std::size_t pos, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

} // namespace

std::vector<unsigned char> serialize_codebook(const Codebook& cb) {
    std::vector<unsigned char> out{'H', 'Q', 'C', 'B'};
    put_le(out, kCodebookVersion, 4);
    put_le(out, static_cast<std::uint64_t>(cb.dimension()), 4);
    put_le(out, static_cast<std::uint64_t>(cb.size()), 4);
    put_le(out, cb.seed, 8);
    for (int i = 0; i < cb.size(); ++i)
        for (int j = 0; j < cb.dimension(); ++j) put_le(out, std::bit_cast<std::uint64_t>(cb.centroids(i, j)), 8);
    return out;
}

Codebook parse_codebook(std::span<const unsigned char> bytes) {
    if (bytes.size() < 24 || bytes[0] != 'H' || bytes[1] != 'Q' || bytes[2] != 'C' || bytes[3] != 'B')
        throw FormatError("not a codebook file");
    if (get_le(bytes, 4, 4) != kCodebookVersion) throw FormatError("unsupported codebook version");
    const auto dim = get_le(bytes, 8, 4);
    const auto size = get_le(bytes, 12, 4);
    if (dim == 0 || size == 0 || dim > 4096 || size > (1U << 20)) throw FormatError("codebook header out of range");
    if (bytes.size() != 24 + dim * size * 8) throw FormatError("codebook payload length mismatch");
    Codebook cb;
    cb.seed = get_le(bytes, 16, 8);
    cb.centroids.resize(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(dim));
    std::size_t pos = 24;
    for (Eigen::Index i = 0; i < cb.centroids.rows(); ++i)
        for (Eigen::Index j = 0; j < cb.centroids.cols(); ++j, pos += 8)
            cb.centroids(i, j) = std::bit_cast<double>(get_le(bytes, pos, 8));
    if (!cb.centroids.allFinite()) throw FormatError("codebook contains non-finite centroids");
    return cb;
}

void write_codebook(const Codebook& cb, const std::filesystem::path& path) {
    const auto bytes = serialize_codebook(cb);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Codebook read_codebook(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_codebook(bytes);
}

} // namespace hoa
