#include "hoa/noise_subst.hpp"

#include "hoa/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace hoa {

namespace {

constexpr int kAacOffsets48k[] = {0,   4,   8,   12,  16,  20,  24,  28,  32,  36,  40,  48,  56,
                                  64,  72,  80,  88,  96,  108, 120, 132, 144, 160, 176, 196, 216,
                                  240, 264, 292, 320, 352, 384, 416, 448, 480, 512, 544, 576, 608,
                                  640, 672, 704, 736, 768, 800, 832, 864, 896, 928, 1024};

double level_db(int index) {
    return kEnergyTopDb - kEnergyRangeDb + kEnergyRangeDb * index / (kEnergyLevels - 1);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in (0, 1] from the top 53 bits.
double uniform_open0(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

} // namespace

FrequencyGroups FrequencyGroups::aac48k_long() {
    return from_offsets(std::vector<int>(std::begin(kAacOffsets48k), std::end(kAacOffsets48k)));
}

FrequencyGroups FrequencyGroups::for_hop(int hop) {
    if (hop == 1024) return aac48k_long();
    std::vector<int> o;
    for (const int v : kAacOffsets48k) o.push_back(static_cast<int>(std::lround(static_cast<double>(v) * hop / 1024.0)));
    return from_offsets(std::move(o));
}

FrequencyGroups FrequencyGroups::from_offsets(std::vector<int> offsets) {
    if (offsets.size() < 2 || offsets.front() != 0) throw ParameterError("group offsets must start at 0");
    for (std::size_t i = 1; i < offsets.size(); ++i)
        if (offsets[i] <= offsets[i - 1]) throw ParameterError("group offsets must strictly increase");
    FrequencyGroups g;
    g.offsets_ = std::move(offsets);
    return g;
}

FrequencyGroups FrequencyGroups::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open group table " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        return from_offsets(j.at("offsets").get<std::vector<int>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad group table " + path.string() + ": " + e.what());
    }
}

double spectral_flatness(std::span<const double> power) {
    if (power.empty()) return 1.0;
    const double n = static_cast<double>(power.size());
    double mean = 0.0;
    for (const double p : power) mean += p;
    mean /= n;
    if (!(mean > 0.0)) return 1.0;
    const double floor = 1e-12 * mean + 1e-30;
    double log_sum = 0.0;
    double sum = 0.0;
    for (const double p : power) {
        const double v = std::max(p, floor);
        log_sum += std::log(v);
        sum += v;
    }
    const double f = std::exp(log_sum / n) / (sum / n);
    return std::clamp(f, 0.0, 1.0);
}

int quantize_energy(double power) {
    if (!(power > 0.0)) return -1;
    const double db = 10.0 * std::log10(power);
    const double step = kEnergyRangeDb / (kEnergyLevels - 1);
    const double pos = (db - level_db(0)) / step;
    if (pos < -0.5) return -1;
    return std::clamp(static_cast<int>(std::lround(pos)), 0, kEnergyLevels - 1);
}

double dequantize_energy(int index) {
    if (index < 0 || index >= kEnergyLevels) throw StreamError("energy index out of range");
    return std::pow(10.0, level_db(index) / 10.0);
}

int NoiseGroupInfo::active_count() const noexcept {
    return static_cast<int>(std::count(active.begin(), active.end(), true));
}

NoiseGroupInfo analyze_discarded(const Eigen::MatrixXd& discarded, const FrequencyGroups& groups, double threshold) {
    NoiseGroupInfo info;
    if (discarded.cols() == 0) return info;
    if (discarded.rows() != groups.bins()) throw ShapeError("analyze_discarded: spectrum length does not match the groups");
    const int g = groups.count();
    info.active.assign(static_cast<std::size_t>(g), false);
    info.energy_index.assign(static_cast<std::size_t>(g), 0);
    info.flatness.assign(static_cast<std::size_t>(g), 0.0);
    std::vector<double> power;
    for (int j = 0; j < g; ++j) {
        const int b0 = groups.begin(j);
        const int w = groups.width(j);
        power.resize(static_cast<std::size_t>(w));
        double flat = 0.0;
        double energy = 0.0;
        for (Eigen::Index c = 0; c < discarded.cols(); ++c) {
            for (int k = 0; k < w; ++k) {
                const double v = discarded(b0 + k, c);
                power[static_cast<std::size_t>(k)] = v * v;
                energy += v * v;
            }
            flat += spectral_flatness(power);
        }
        flat /= static_cast<double>(discarded.cols());
        energy /= static_cast<double>(discarded.cols()) * w;
        const int q = quantize_energy(energy);
        info.flatness[static_cast<std::size_t>(j)] = flat;
        if (flat > threshold && q >= 0) {
            info.active[static_cast<std::size_t>(j)] = true;
            info.energy_index[static_cast<std::size_t>(j)] = q;
        }
    }
    return info;
}

std::uint64_t noise_seed(std::uint64_t stream_seed, std::uint64_t frame, std::uint64_t channel) noexcept {
    return splitmix64(splitmix64(splitmix64(stream_seed) ^ frame) ^ channel);
}

Eigen::MatrixXd synthesize_noise(const NoiseGroupInfo& info, const FrequencyGroups& groups, int channel_count,
                                 std::uint64_t stream_seed, std::uint64_t frame) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(groups.bins(), channel_count);
    if (info.empty()) return out;
    if (static_cast<int>(info.active.size()) != groups.count()) throw ShapeError("noise info does not match the groups");
    for (int c = 0; c < channel_count; ++c) {
        std::mt19937_64 gen(noise_seed(stream_seed, frame, static_cast<std::uint64_t>(c)));
        for (int j = 0; j < groups.count(); ++j) {
            if (!info.active[static_cast<std::size_t>(j)]) continue;
            const int b0 = groups.begin(j);
            const int w = groups.width(j);
            double sum = 0.0;
            for (int k = 0; k < w; k += 2) {
                // Box-Muller pair.
                const double u1 = uniform_open0(gen);
                const double u2 = uniform_open0(gen);
                const double rad = std::sqrt(-2.0 * std::log(u1));
                const double a = rad * std::cos(2.0 * std::numbers::pi * u2);
                const double b = rad * std::sin(2.0 * std::numbers::pi * u2);
                out(b0 + k, c) = a;
                sum += a * a;
                if (k + 1 < w) {
                    out(b0 + k + 1, c) = b;
                    sum += b * b;
                }
            }
            const double target = dequantize_energy(info.energy_index[static_cast<std::size_t>(j)]);
            if (!(sum > 0.0)) {
                out.block(b0, c, w, 1).setConstant(std::sqrt(target));
                continue;
            }
            out.block(b0, c, w, 1) *= std::sqrt(target * w / sum);
        }
    }
    return out;
}

void write_noise_info(BitWriter& out, const NoiseGroupInfo& info) {
    for (const bool a : info.active) out.write_bool(a);
    for (std::size_t j = 0; j < info.active.size(); ++j)
        if (info.active[j]) out.write(static_cast<std::uint64_t>(info.energy_index[j]), 6);
}

NoiseGroupInfo read_noise_info(BitReader& in, int group_count) {
    NoiseGroupInfo info;
    info.active.resize(static_cast<std::size_t>(group_count));
    info.energy_index.assign(static_cast<std::size_t>(group_count), 0);
    for (int j = 0; j < group_count; ++j) info.active[static_cast<std::size_t>(j)] = in.read_bool();
    for (int j = 0; j < group_count; ++j)
        if (info.active[static_cast<std::size_t>(j)]) info.energy_index[static_cast<std::size_t>(j)] = static_cast<int>(in.read(6));
    return info;
}

} // namespace hoa
