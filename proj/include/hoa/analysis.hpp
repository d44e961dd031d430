#pragma once
// Per-frame compaction and flatness statistics of an HOA signal.

#include "hoa/freq_svd.hpp"
#include "hoa/hoa_io.hpp"
#include "hoa/noise_subst.hpp"

#include <ostream>
#include <vector>

namespace hoa {

struct FrameAnalysis {
    std::size_t index = 0;
    double energy = 0.0; // ||S||^2
    double energy_global = 0.0;
    double energy_banded = 0.0;
    std::vector<double> flatness; // per group, of the channel-averaged power
};

/// MDCT frames of `signal` with compaction (rank r, `bands` uniform bands)
/// and group flatness. All-zero frames are skipped.
[[nodiscard]] std::vector<FrameAnalysis> analyze_frames(const HoaSignal& signal, int hop, int rank, int bands);

/// Flatness of the channel-averaged power of one L x M spectrum per group.
[[nodiscard]] std::vector<double> group_flatness(const Eigen::MatrixXd& spectrum, const FrequencyGroups& groups);

inline constexpr const char* kAnalyzeCsvVersion = "analyze-v1";
/// Columns: frame, energy, energy_global, energy_banded, dominance_ok, flat_0..flat_{G-1}.
void write_analysis_csv(std::ostream& out, const std::vector<FrameAnalysis>& frames);

} // namespace hoa
