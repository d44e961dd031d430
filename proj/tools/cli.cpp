#include "cli.hpp"

#include "hoa/analysis.hpp"
#include "hoa/error.hpp"
#include "hoa/pipeline.hpp"
#include "hoa/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

namespace hoa::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<unsigned char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + p.string());
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
    if (!out) throw IoError("cannot write " + p.string());
}

std::vector<fs::path> wav_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (e.is_regular_file() && ext == ".wav") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

SampleFormat parse_format(const std::string& s) {
    if (s == "float32") return SampleFormat::kFloat32;
    if (s == "pcm16") return SampleFormat::kPcm16;
    if (s == "pcm24") return SampleFormat::kPcm24;
    if (s == "pcm32") return SampleFormat::kPcm32;
    throw ParameterError("unknown sample format '" + s + "'");
}

/// Encoder flags shared by encode and compare.
struct EncoderFlags {
    std::string codec = "proposed";
    double mnmr = 1.0;
    int bands = 4;
    int rank = 4;
    int bg_order = 1;
    std::uint64_t seed = 0x5eed;
    double lambda = 0.0;
    std::string policy = "rd";
    std::string config;
    std::string codebooks = "codebooks";
    bool bypass = false;
    CLI::Option* o_codec = nullptr;
    CLI::Option* o_mnmr = nullptr;
    CLI::Option* o_bands = nullptr;
    CLI::Option* o_rank = nullptr;
    CLI::Option* o_bg = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_lambda = nullptr;
    CLI::Option* o_policy = nullptr;

    void add(CLI::App* app, bool with_codec) {
        if (with_codec) o_codec = app->add_option("--codec", codec, "baseline or proposed")->capture_default_str();
        if (with_codec) o_mnmr = app->add_option("--mnmr", mnmr, "maximum noise-to-mask ratio")->capture_default_str();
        o_bands = app->add_option("--bands", bands, "uniform band count of mode 1")->capture_default_str();
        o_rank = app->add_option("--rank", rank, "foreground components r")->capture_default_str();
        o_bg = app->add_option("--bg-order", bg_order, "background order t")->capture_default_str();
        o_seed = app->add_option("--seed", seed, "noise substitution seed")->capture_default_str();
        o_lambda = app->add_option("--lambda", lambda, "rate-distortion lambda (default from config)");
        o_policy = app->add_option("--policy", policy, "mode policy: rd, fixed0, fixed1, alternate")->capture_default_str();
        app->add_option("--config", config, "JSON encoder config");
        app->add_option("--codebooks", codebooks, "directory with trained codebooks")->capture_default_str();
        app->add_flag("--bypass", bypass, "transmit bases and spectra unquantized");
    }

    [[nodiscard]] EncoderConfig resolve() const {
        EncoderConfig cfg;
        if (!config.empty()) {
            std::ifstream in(config);
            if (!in) throw ConfigError("cannot open config " + config);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError("config " + config + " is not valid JSON: " + e.what());
            }
            apply_config_json(cfg, j);
        }
        if (o_codec && o_codec->count()) cfg.codec = parse_codec(codec);
        if (o_mnmr && o_mnmr->count()) cfg.mnmr = mnmr;
        if (o_bands->count()) cfg.bands = bands;
        if (o_rank->count()) cfg.rank = rank;
        if (o_bg->count()) cfg.bg_order = bg_order;
        if (o_seed->count()) cfg.seed = seed;
        if (o_lambda->count()) cfg.lambda = lambda;
        if (o_policy->count()) cfg.policy = parse_policy(policy);
        if (bypass) cfg.bypass = true;
        return cfg;
    }

    [[nodiscard]] CodecResources resources(const EncoderConfig& cfg) const {
        if (cfg.bypass) return {};
        return load_resources(codebooks);
    }
};

json encode_stats(const EncodeResult& r) {
    json j = measure_stream(r.stream).to_json();
    int switches = 0;
    int last = -1;
    for (const FrameStats& f : r.frames) {
        if (f.silent) continue;
        if (last >= 0 && f.mode != last) ++switches;
        last = f.mode;
    }
    j["mode_switches"] = switches;
    j["max_nmr"] = r.max_nmr;
    j["flagged_bands"] = r.flagged_bands;
    return j;
}

int cmd_encode(const std::string& in, const std::string& outp, const EncoderFlags& flags, const std::string& stats,
               std::ostream& out) {
    const EncoderConfig cfg = flags.resolve();
    const CodecResources res = flags.resources(cfg);
    const HoaSignal sig = read_hoa_wav(in);
    const EncodeResult r = encode(sig, cfg, res);
    write_file(outp, r.stream);
    const json j = encode_stats(r);
    if (!stats.empty()) write_text(stats, j.dump(2) + "\n");
    out << j.dump(2) << "\n";
    return kExitOk;
}

int cmd_decode(const std::string& in, const std::string& outp, const std::string& codebooks, const std::string& format,
               bool fg_only, std::ostream& out, std::ostream& err) {
    const std::vector<unsigned char> bytes = read_file(in);
    std::size_t header_size = 0;
    const StreamHeader h = read_header(bytes, header_size);
    const CodecResources res = h.bypass ? CodecResources{} : load_resources(codebooks);
    DecodeOptions opt;
    opt.foreground_only = fg_only;
    const DecodeResult r = decode(bytes, res, opt);
    write_hoa_wav(r.signal, outp, parse_format(format));
    json j;
    j["frames"] = r.frames;
    j["concealed"] = r.concealed;
    j["error"] = r.error;
    if (r.error) j["message"] = r.message;
    out << j.dump(2) << "\n";
    if (r.error) {
        err << "hoacodec: " << r.message << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_train(const std::string& corpus, const std::string& outdir, const TrainingConfig& tc, bool tables,
              std::ostream& out) {
    std::vector<HoaSignal> signals;
    for (const auto& p : wav_files(corpus)) signals.push_back(read_hoa_wav(p));
    if (signals.empty()) throw TrainingError("no WAV files in " + corpus);
    TrainingReport rep;
    const QuantizerSet q = train_quantizers(signals, tc, &rep);
    save_quantizers(q, outdir);
    json j;
    j["frames"] = rep.frames;
    j["coeff_vectors"] = rep.coeff_vectors;
    j["residual_vectors"] = rep.residual_vectors;
    j["intra_vectors"] = rep.intra_vectors;
    j["degenerate"] = rep.degenerate;
    j["quantizer_hash"] = q.hash();
    if (tables) {
        CodecResources res;
        res.quantizers = q;
        std::vector<CodedChannel> coded;
        EncodeOptions opt;
        opt.record_coded = true;
        for (const HoaSignal& s : signals) {
            for (const Codec c : {Codec::kBaseline, Codec::kProposed}) {
                EncoderConfig cfg;
                cfg.codec = c;
                cfg.rank = tc.rank;
                cfg.bands = tc.band_count;
                const EncodeResult r = encode(s, cfg, res, opt);
                coded.insert(coded.end(), r.coded.begin(), r.coded.end());
            }
        }
        const EntropyTables t = EntropyTables::train(coded, FrequencyGroups::for_hop(tc.hop));
        t.save(fs::path(outdir) / kEntropyTableFile);
        j["entropy_tables"] = (fs::path(outdir) / kEntropyTableFile).string();
        j["table_hash"] = t.hash();
    }
    out << j.dump(2) << "\n";
    return kExitOk;
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_analyze(const std::string& in, const std::string& csv, int rank, int bands, std::ostream& out) {
    const HoaSignal sig = read_hoa_wav(in);
    const auto frames = analyze_frames(sig, 1024, rank, bands);
    if (!csv.empty()) {
        if (csv == "-") {
            write_analysis_csv(out, frames);
        } else {
            std::ofstream f(csv);
            write_analysis_csv(f, frames);
            if (!f) throw IoError("cannot write " + csv);
        }
    }
    std::size_t violations = 0;
    std::vector<double> flat;
    double gain = 0.0;
    for (const auto& a : frames) {
        if (a.energy_banded < a.energy_global - 1e-9 * a.energy) ++violations;
        flat.insert(flat.end(), a.flatness.begin(), a.flatness.end());
        if (a.energy_global > 0.0) gain += a.energy_banded / a.energy_global;
    }
    json j;
    j["frames"] = frames.size();
    j["dominance_violations"] = violations;
    j["mean_compaction_ratio"] = frames.empty() ? 0.0 : gain / static_cast<double>(frames.size());
    j["median_flatness"] = median(flat);
    if (csv != "-") out << j.dump(2) << "\n";
    return kExitOk;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParameterError("bad MNMR list entry '" + item + "'");
        }
    }
    if (v.empty()) throw ParameterError("empty MNMR list");
    return v;
}

int cmd_compare(const std::string& corpus, const std::string& targets, const std::string& csv, const EncoderFlags& flags,
                std::ostream& out) {
    const auto files = wav_files(corpus);
    if (files.empty()) throw IoError("no WAV files in " + corpus);
    const std::vector<double> taus = parse_list(targets);
    EncoderConfig base = flags.resolve();
    const CodecResources res = flags.resources(base);

    struct Row {
        std::string file;
        double tau;
        double baseline_kbps;
        double proposed_kbps;
        double reduction;
    };
    std::vector<Row> rows;
    for (const auto& path : files) {
        const HoaSignal sig = read_hoa_wav(path);
        for (const double tau : taus) {
            EncoderConfig cfg = base;
            cfg.mnmr = tau;
            cfg.codec = Codec::kBaseline;
            const double b = measure_stream(encode(sig, cfg, res).stream).kbps();
            cfg.codec = Codec::kProposed;
            const double p = measure_stream(encode(sig, cfg, res).stream).kbps();
            rows.push_back({path.filename().string(), tau, b, p, b > 0.0 ? (b - p) / b * 100.0 : 0.0});
        }
    }
    std::ostringstream table;
    table << "file,mnmr,baseline_kbps,proposed_kbps,reduction_pct\n" << std::setprecision(6);
    for (const Row& r : rows)
        table << r.file << ',' << r.tau << ',' << r.baseline_kbps << ',' << r.proposed_kbps << ',' << r.reduction << "\n";
    json summary = json::array();
    for (const double tau : taus) {
        double b = 0.0, p = 0.0, red = 0.0;
        int n = 0;
        for (const Row& r : rows)
            if (r.tau == tau) {
                b += r.baseline_kbps;
                p += r.proposed_kbps;
                red += r.reduction;
                ++n;
            }
        table << "AVERAGE," << tau << ',' << b / n << ',' << p / n << ',' << red / n << "\n";
        summary.push_back({{"mnmr", tau}, {"baseline_kbps", b / n}, {"proposed_kbps", p / n}, {"reduction_pct", red / n}});
    }
    if (!csv.empty()) write_text(csv, table.str());

    // Console table: one row per file, one column per target, labelled by the achieved rate.
    out << std::left << std::setw(24) << "file";
    for (const auto& s : summary) {
        std::ostringstream head;
        head << "~" << std::fixed << std::setprecision(0) << s["proposed_kbps"].get<double>() << " kbps";
        out << std::setw(16) << head.str();
    }
    out << "\n";
    for (std::size_t f = 0; f < files.size(); ++f) {
        out << std::setw(24) << files[f].filename().string();
        for (std::size_t t = 0; t < taus.size(); ++t) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(2) << rows[f * taus.size() + t].reduction << "%";
            out << std::setw(16) << cell.str();
        }
        out << "\n";
    }
    out << std::setw(24) << "Average";
    for (const auto& s : summary) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(2) << s["reduction_pct"].get<double>() << "%";
        out << std::setw(16) << cell.str();
    }
    out << "\n" << summary.dump() << "\n";
    return kExitOk;
}

int cmd_synth(const std::string& recipe, const std::string& outp, const std::string& corpus_dir, int count,
              double seconds, std::uint64_t seed, std::ostream& out) {
    if (!recipe.empty()) {
        if (outp.empty()) throw ParameterError("synth --recipe needs an output WAV");
        std::ifstream in(recipe);
        if (!in) throw ConfigError("cannot open recipe " + recipe);
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("recipe is not valid JSON: ") + e.what());
        }
        write_hoa_wav(synthesize_scene(SceneRecipe::from_json(j)), outp);
        out << outp << "\n";
        return kExitOk;
    }
    if (corpus_dir.empty()) throw ParameterError("synth needs --recipe or --corpus-dir");
    fs::create_directories(corpus_dir);
    for (const SceneRecipe& r : default_corpus(count, seconds, seed)) {
        const fs::path base = fs::path(corpus_dir) / r.name;
        write_text(base.string() + ".json", r.to_json().dump(2) + "\n");
        write_hoa_wav(synthesize_scene(r), base.string() + ".wav");
        out << base.string() << ".wav\n";
    }
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Higher-order ambisonics codec: baseline time-domain SVD and banded MDCT-domain SVD"};
    app.name("hoacodec");
    app.require_subcommand(1);

    EncoderFlags enc_flags;
    std::string enc_in, enc_out, enc_stats;
    auto* enc = app.add_subcommand("encode", "encode a WAV file");
    enc->add_option("input", enc_in, "input HOA WAV")->required();
    enc->add_option("output", enc_out, "output stream")->required();
    enc->add_option("--stats", enc_stats, "also write the JSON stats here");
    enc_flags.add(enc, true);

    std::string dec_in, dec_out, dec_cb = "codebooks", dec_format = "float32";
    bool dec_fg = false;
    auto* dec = app.add_subcommand("decode", "decode a stream to WAV");
    dec->add_option("input", dec_in, "input stream")->required();
    dec->add_option("output", dec_out, "output WAV")->required();
    dec->add_option("--codebooks", dec_cb, "directory with trained codebooks")->capture_default_str();
    dec->add_option("--format", dec_format, "float32, pcm16, pcm24 or pcm32")->capture_default_str();
    dec->add_flag("--foreground-only", dec_fg, "omit background and substituted noise");

    std::string tr_corpus, tr_out;
    TrainingConfig tc;
    bool tr_tables = false;
    auto* tr = app.add_subcommand("train-quantizers", "train basis codebooks (and optionally entropy tables)");
    tr->add_option("--corpus", tr_corpus, "directory of HOA WAV files")->required();
    tr->add_option("--out", tr_out, "output codebook directory")->required();
    tr->add_option("--rank", tc.rank, "foreground components r")->capture_default_str();
    tr->add_option("--bands", tc.band_count, "uniform band count of mode 1")->capture_default_str();
    tr->add_option("--max-frames", tc.max_frames, "training frame budget")->capture_default_str();
    tr->add_option("--coeff-size", tc.coeff_size)->capture_default_str();
    tr->add_option("--residual-size", tc.residual_size)->capture_default_str();
    tr->add_option("--intra-size", tc.intra_size)->capture_default_str();
    tr->add_option("--iterations", tc.max_iterations, "GLA iteration cap")->capture_default_str();
    tr->add_option("--seed", tc.seed, "GLA seeding")->capture_default_str();
    tr->add_flag("--tables", tr_tables, "also train entropy tables from encodes of the corpus");

    std::string an_in, an_csv;
    int an_rank = 4, an_bands = 4;
    auto* an = app.add_subcommand("analyze", "per-frame compaction and flatness report");
    an->add_option("input", an_in, "input HOA WAV")->required();
    an->add_option("--csv", an_csv, "CSV output path ('-' for stdout)");
    an->add_option("--rank", an_rank)->capture_default_str();
    an->add_option("--bands", an_bands)->capture_default_str();

    EncoderFlags cmp_flags;
    std::string cmp_corpus, cmp_targets = "0.5,1,2", cmp_csv;
    auto* cmp = app.add_subcommand("compare", "baseline vs proposed rates at matched MNMR targets");
    cmp->add_option("--corpus", cmp_corpus, "directory of HOA WAV files")->required();
    cmp->add_option("--mnmr", cmp_targets, "comma-separated MNMR targets")->capture_default_str();
    cmp->add_option("--csv", cmp_csv, "CSV output path");
    cmp_flags.add(cmp, false);

    std::string sy_recipe, sy_out, sy_dir;
    int sy_count = 6;
    double sy_seconds = 10.0;
    std::uint64_t sy_seed = 7;
    auto* sy = app.add_subcommand("synth", "generate synthetic HOA scenes");
    sy->add_option("--recipe", sy_recipe, "scene recipe JSON");
    sy->add_option("output", sy_out, "output WAV (with --recipe)");
    sy->add_option("--corpus-dir", sy_dir, "write a default corpus here");
    sy->add_option("--count", sy_count)->capture_default_str();
    sy->add_option("--seconds", sy_seconds)->capture_default_str();
    sy->add_option("--seed", sy_seed)->capture_default_str();

    std::string me_in, me_json;
    auto* me = app.add_subcommand("measure", "bit accounting of a stream");
    me->add_option("input", me_in, "input stream")->required();
    me->add_option("--json", me_json, "also write the JSON here");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*enc) return cmd_encode(enc_in, enc_out, enc_flags, enc_stats, out);
        if (*dec) return cmd_decode(dec_in, dec_out, dec_cb, dec_format, dec_fg, out, err);
        if (*tr) return cmd_train(tr_corpus, tr_out, tc, tr_tables, out);
        if (*an) return cmd_analyze(an_in, an_csv, an_rank, an_bands, out);
        if (*cmp) return cmd_compare(cmp_corpus, cmp_targets, cmp_csv, cmp_flags, out);
        if (*sy) return cmd_synth(sy_recipe, sy_out, sy_dir, sy_count, sy_seconds, sy_seed, out);
        if (*me) {
            const json j = measure_stream(read_file(me_in)).to_json();
            if (!me_json.empty()) write_text(me_json, j.dump(2) + "\n");
            out << j.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const ParameterError& e) {
        err << "hoacodec: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "hoacodec: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace hoa::cli
