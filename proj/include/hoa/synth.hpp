#pragma once
// Synthetic HOA scenes: plane-wave sources on trajectories plus a diffuse bed.

#include "hoa/hoa_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hoa {

/// Real spherical harmonics, SN3D normalization, ACN order, no
/// Condon-Shortley phase. Angles in radians; elevation from the horizon.
[[nodiscard]] std::vector<double> sh_sn3d(int order, double azimuth, double elevation);

struct SourceRecipe {
    enum class Kind { kSines, kTone, kNoise };
    Kind kind = Kind::kSines;
    double azimuth_deg = 0.0;
    double elevation_deg = 0.0;
    double azimuth_rate = 0.0; // degrees per second
    double elevation_rate = 0.0;
    double gain = 0.1;
    double low_hz = 100.0;  // band of the partials (kTone uses low_hz)
    double high_hz = 4000.0;
    int partials = 12;
};

struct SceneRecipe {
    std::string name = "scene";
    std::uint32_t sample_rate = 48000;
    int order = 3;
    double seconds = 2.0;
    std::uint64_t seed = 1;
    std::vector<SourceRecipe> sources;
    double diffuse_gain = 0.0;
    double diffuse_low_hz = 50.0;
    double diffuse_high_hz = 16000.0;
    int diffuse_partials = 48;

    [[nodiscard]] nlohmann::json to_json() const;
    static SceneRecipe from_json(const nlohmann::json& j);
};

/// Deterministic given the recipe (including its seed).
[[nodiscard]] HoaSignal synthesize_scene(const SceneRecipe& recipe);

/// `count` scenes with two band-separated sources on different trajectories
/// and a diffuse bed.
[[nodiscard]] std::vector<SceneRecipe> default_corpus(int count, double seconds, std::uint64_t seed);

/// Independent Gaussian white noise in every channel.
[[nodiscard]] HoaSignal white_noise(int order, Eigen::Index length, double stddev, std::uint64_t seed,
                                    std::uint32_t sample_rate = 48000);

} // namespace hoa
