#include "hoa/synth.hpp"

#include "hoa/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace hoa {

namespace {

double factorial_ratio(int a, int b) {
    // a! / b!
    double r = 1.0;
    if (a >= b)
        for (int i = b + 1; i <= a; ++i) r *= i;
    else
        for (int i = a + 1; i <= b; ++i) r /= i;
    return r;
}

double uniform(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(g() >> 11) * (1.0 / 9007199254740992.0));
}

// Sum of `count` unit-power random sinusoids in [lo, hi] Hz, evaluated with
// phasor recursion and renormalized every block.
std::vector<double> sine_mix(std::mt19937_64& g, int count, double lo, double hi, double fs, Eigen::Index n) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    const double amp = std::sqrt(2.0 / std::max(count, 1));
    for (int p = 0; p < count; ++p) {
        const double f = uniform(g, lo, hi);
        const double phase = uniform(g, 0.0, 2.0 * std::numbers::pi);
        const double w = 2.0 * std::numbers::pi * f / fs;
        const double cw = std::cos(w), sw = std::sin(w);
        double c = std::cos(phase), s = std::sin(phase);
        for (Eigen::Index i = 0; i < n; ++i) {
            out[static_cast<std::size_t>(i)] += amp * s;
            const double c2 = c * cw - s * sw;
            s = s * cw + c * sw;
            c = c2;
            if ((i & 4095) == 4095) {
                const double r = 1.0 / std::sqrt(c * c + s * s);
                c *= r;
                s *= r;
            }
        }
    }
    return out;
}

const char* kind_name(SourceRecipe::Kind k) {
    switch (k) {
    case SourceRecipe::Kind::kTone: return "tone";
    case SourceRecipe::Kind::kNoise: return "noise";
    default: return "sines";
    }
}

} // namespace

std::vector<double> sh_sn3d(int order, double azimuth, double elevation) {
    if (order < 0) throw ParameterError("sh_sn3d: negative order");
    const double x = std::sin(elevation);
    const double y = std::cos(elevation);
    // Associated Legendre P_n^m(x) without the Condon-Shortley phase.
    std::vector<std::vector<double>> p(static_cast<std::size_t>(order + 1), std::vector<double>(static_cast<std::size_t>(order + 1), 0.0));
    p[0][0] = 1.0;
    for (int m = 1; m <= order; ++m) p[m][m] = p[m - 1][m - 1] * (2 * m - 1) * y;
    for (int m = 0; m < order; ++m) p[m + 1][m] = x * (2 * m + 1) * p[m][m];
    for (int m = 0; m <= order; ++m)
        for (int n = m + 2; n <= order; ++n)
            p[n][m] = ((2 * n - 1) * x * p[n - 1][m] - (n + m - 1) * p[n - 2][m]) / (n - m);

    std::vector<double> out(static_cast<std::size_t>(channels_for_order(order)));
    for (int n = 0; n <= order; ++n) {
        for (int m = -n; m <= n; ++m) {
            const int am = std::abs(m);
            const double norm = std::sqrt((am == 0 ? 1.0 : 2.0) * factorial_ratio(n - am, n + am));
            const double trig = m >= 0 ? std::cos(am * azimuth) : std::sin(am * azimuth);
            out[static_cast<std::size_t>(n * (n + 1) + m)] = norm * p[n][am] * trig;
        }
    }
    return out;
}

nlohmann::json SceneRecipe::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["sample_rate"] = sample_rate;
    j["order"] = order;
    j["seconds"] = seconds;
    j["seed"] = seed;
    j["diffuse"] = {{"gain", diffuse_gain}, {"low_hz", diffuse_low_hz}, {"high_hz", diffuse_high_hz}, {"partials", diffuse_partials}};
    j["sources"] = nlohmann::json::array();
    for (const SourceRecipe& s : sources)
        j["sources"].push_back({{"kind", kind_name(s.kind)},
                                {"azimuth_deg", s.azimuth_deg},
                                {"elevation_deg", s.elevation_deg},
                                {"azimuth_rate", s.azimuth_rate},
                                {"elevation_rate", s.elevation_rate},
                                {"gain", s.gain},
                                {"low_hz", s.low_hz},
                                {"high_hz", s.high_hz},
                                {"partials", s.partials}});
    return j;
}

SceneRecipe SceneRecipe::from_json(const nlohmann::json& j) {
    SceneRecipe r;
    try {
        r.name = j.value("name", r.name);
        r.sample_rate = j.value("sample_rate", r.sample_rate);
        r.order = j.value("order", r.order);
        r.seconds = j.value("seconds", r.seconds);
        r.seed = j.value("seed", r.seed);
        if (j.contains("diffuse")) {
            const auto& d = j.at("diffuse");
            r.diffuse_gain = d.value("gain", r.diffuse_gain);
            r.diffuse_low_hz = d.value("low_hz", r.diffuse_low_hz);
            r.diffuse_high_hz = d.value("high_hz", r.diffuse_high_hz);
            r.diffuse_partials = d.value("partials", r.diffuse_partials);
        }
        for (const auto& s : j.value("sources", nlohmann::json::array())) {
            SourceRecipe src;
            const std::string kind = s.value("kind", "sines");
            if (kind == "tone") src.kind = SourceRecipe::Kind::kTone;
            else if (kind == "noise") src.kind = SourceRecipe::Kind::kNoise;
            else if (kind == "sines") src.kind = SourceRecipe::Kind::kSines;
            else throw ConfigError("unknown source kind '" + kind + "'");
            src.azimuth_deg = s.value("azimuth_deg", 0.0);
            src.elevation_deg = s.value("elevation_deg", 0.0);
            src.azimuth_rate = s.value("azimuth_rate", 0.0);
            src.elevation_rate = s.value("elevation_rate", 0.0);
            src.gain = s.value("gain", src.gain);
            src.low_hz = s.value("low_hz", src.low_hz);
            src.high_hz = s.value("high_hz", src.high_hz);
            src.partials = s.value("partials", src.partials);
            r.sources.push_back(src);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad scene recipe: ") + e.what());
    }
    if (r.order < 0 || r.seconds < 0.0 || r.sample_rate == 0) throw ConfigError("scene recipe holds invalid values");
    return r;
}

HoaSignal synthesize_scene(const SceneRecipe& recipe) {
    const double fs = recipe.sample_rate;
    const auto n = static_cast<Eigen::Index>(std::llround(recipe.seconds * fs));
    const int m = channels_for_order(recipe.order);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, m);
    std::mt19937_64 g(recipe.seed);
    const double deg = std::numbers::pi / 180.0;
    for (const SourceRecipe& s : recipe.sources) {
        std::vector<double> sig;
        switch (s.kind) {
        case SourceRecipe::Kind::kTone: sig = sine_mix(g, 1, s.low_hz, s.low_hz, fs, n); break;
        case SourceRecipe::Kind::kNoise: sig = sine_mix(g, std::max(s.partials, 64), s.low_hz, s.high_hz, fs, n); break;
        case SourceRecipe::Kind::kSines: sig = sine_mix(g, s.partials, s.low_hz, s.high_hz, fs, n); break;
        }
        const bool moving = s.azimuth_rate != 0.0 || s.elevation_rate != 0.0;
        std::vector<double> y = sh_sn3d(recipe.order, s.azimuth_deg * deg, s.elevation_deg * deg);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (moving && i % 16 == 0) {
                const double t = static_cast<double>(i) / fs;
                y = sh_sn3d(recipe.order, (s.azimuth_deg + s.azimuth_rate * t) * deg,
                            std::clamp(s.elevation_deg + s.elevation_rate * t, -90.0, 90.0) * deg);
            }
            const double v = s.gain * sig[static_cast<std::size_t>(i)];
            for (int c = 0; c < m; ++c) x(i, c) += v * y[static_cast<std::size_t>(c)];
        }
    }
    if (recipe.diffuse_gain > 0.0) {
        for (int c = 0; c < m; ++c) {
            const std::vector<double> d = sine_mix(g, recipe.diffuse_partials, recipe.diffuse_low_hz, recipe.diffuse_high_hz, fs, n);
            for (Eigen::Index i = 0; i < n; ++i) x(i, c) += recipe.diffuse_gain * d[static_cast<std::size_t>(i)];
        }
    }
    return HoaSignal(recipe.sample_rate, recipe.order, std::move(x));
}

std::vector<SceneRecipe> default_corpus(int count, double seconds, std::uint64_t seed) {
    std::vector<SceneRecipe> out;
    std::mt19937_64 g(seed);
    for (int i = 0; i < count; ++i) {
        SceneRecipe r;
        r.name = "scene" + std::to_string(i);
        r.seconds = seconds;
        r.seed = g();
        SourceRecipe low;
        low.azimuth_deg = uniform(g, -180.0, 180.0);
        low.elevation_deg = uniform(g, -30.0, 45.0);
        low.azimuth_rate = uniform(g, -20.0, 20.0);
        low.gain = 0.12;
        low.low_hz = 80.0;
        low.high_hz = 2500.0;
        low.partials = 10 + i;
        SourceRecipe high;
        high.azimuth_deg = low.azimuth_deg + uniform(g, 60.0, 300.0);
        high.elevation_deg = uniform(g, -20.0, 60.0);
        high.azimuth_rate = uniform(g, -30.0, 30.0);
        high.gain = 0.08;
        high.low_hz = 3000.0;
        high.high_hz = 14000.0;
        high.partials = 14 + i;
        r.sources = {low, high};
        r.diffuse_gain = 0.004 * (1 + i % 3);
        out.push_back(r);
    }
    return out;
}

HoaSignal white_noise(int order, Eigen::Index length, double stddev, std::uint64_t seed, std::uint32_t sample_rate) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> nd(0.0, stddev);
    Eigen::MatrixXd x(length, channels_for_order(order));
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index i = 0; i < length; ++i) x(i, c) = nd(g);
    return HoaSignal(sample_rate, order, std::move(x));
}

} // namespace hoa
