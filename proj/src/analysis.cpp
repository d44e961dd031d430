#include "hoa/analysis.hpp"

#include "hoa/transform.hpp"

#include <iomanip>

namespace hoa {

std::vector<double> group_flatness(const Eigen::MatrixXd& spectrum, const FrequencyGroups& groups) {
    const Eigen::VectorXd power = spectrum.array().square().rowwise().mean();
    std::vector<double> out;
    for (int j = 0; j < groups.count(); ++j)
        out.push_back(spectral_flatness({power.data() + groups.begin(j), static_cast<std::size_t>(groups.width(j))}));
    return out;
}

std::vector<FrameAnalysis> analyze_frames(const HoaSignal& signal, int hop, int rank, int bands) {
    const FrequencyGroups groups = FrequencyGroups::for_hop(hop);
    const BandLayout layout = BandLayout::uniform(hop, bands);
    const FrameSegmenter seg(signal.samples(), hop);
    const Mdct mdct(hop);
    const AnalysisWindow window = AnalysisWindow::sine(hop);
    std::vector<FrameAnalysis> out;
    Eigen::MatrixXd block, spec;
    for (std::size_t f = 0; f < seg.frame_count(); ++f) {
        seg.frame_into(f, block);
        if (block.isZero(0.0)) continue;
        mdct.forward(block, window, spec);
        FrameAnalysis a;
        a.index = f;
        a.energy = spec.squaredNorm();
        const CompactionGain g = compaction_gain(spec, rank, layout);
        a.energy_global = g.energy_global;
        a.energy_banded = g.energy_banded;
        a.flatness = group_flatness(spec, groups);
        out.push_back(std::move(a));
    }
    return out;
}

void write_analysis_csv(std::ostream& out, const std::vector<FrameAnalysis>& frames) {
    out << "# " << kAnalyzeCsvVersion << "\n";
    out << "frame,energy,energy_global,energy_banded,dominance_ok";
    const std::size_t g = frames.empty() ? 0 : frames.front().flatness.size();
    for (std::size_t j = 0; j < g; ++j) out << ",flat_" << j;
    out << "\n" << std::setprecision(17);
    for (const FrameAnalysis& a : frames) {
        const bool ok = a.energy_banded >= a.energy_global - 1e-9 * a.energy;
        out << a.index << ',' << a.energy << ',' << a.energy_global << ',' << a.energy_banded << ',' << (ok ? 1 : 0);
        for (const double v : a.flatness) out << ',' << v;
        out << "\n";
    }
}

} // namespace hoa
