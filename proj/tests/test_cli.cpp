#include "support.hpp"

#include "cli.hpp"

#include "hoa/synth.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace hoa;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string codebooks() { return (test::data_dir() / "codebooks").string(); }

struct Workspace {
    std::filesystem::path dir = test::temp_dir("cli");
    std::filesystem::path wav = dir / "in.wav";
    Workspace() {
        SceneRecipe r = default_corpus(1, 1.0, 21).front();
        write_hoa_wav(synthesize_scene(r), wav);
    }
    ~Workspace() { std::filesystem::remove_all(dir); }
    [[nodiscard]] std::string path(const std::string& name) const { return (dir / name).string(); }
};

} // namespace

TEST_CASE("usage errors exit with 1") {
    CHECK(run({}).code == cli::kExitUsage);
    CHECK(run({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run({"encode"}).code == cli::kExitUsage);
    CHECK(run({"encode", "a.wav", "b.bs", "--mnmr", "abc"}).code == cli::kExitUsage);
    const Run help = run({"--help"});
    CHECK(help.code == cli::kExitOk);
    CHECK(help.out.find("encode") != std::string::npos);
}

TEST_CASE("encode, measure and decode") {
    Workspace w;
    const Run e = run({"encode", "--codec", "proposed", "--mnmr", "1.0", w.wav.string(), w.path("out.bs"), "--codebooks",
                       codebooks(), "--stats", w.path("stats.json")});
    REQUIRE(e.code == 0);
    const auto stats = nlohmann::json::parse(e.out);
    CHECK(stats["codec"] == "proposed");
    CHECK(stats["kbps"].get<double>() > 0.0);
    CHECK(stats.contains("mode_histogram"));
    CHECK(stats.contains("side_info_share"));
    CHECK(std::filesystem::exists(w.path("stats.json")));

    const Run m = run({"measure", w.path("out.bs")});
    REQUIRE(m.code == 0);
    CHECK(nlohmann::json::parse(m.out)["bits"]["total"] == stats["bits"]["total"]);

    const Run d = run({"decode", w.path("out.bs"), w.path("out.wav"), "--codebooks", codebooks()});
    REQUIRE(d.code == 0);
    CHECK(read_hoa_wav(w.path("out.wav")).length() == read_hoa_wav(w.wav).length());

    const Run b = run({"encode", "--codec", "baseline", w.wav.string(), w.path("b.bs"), "--codebooks", codebooks()});
    REQUIRE(b.code == 0);
    CHECK(nlohmann::json::parse(b.out)["codec"] == "baseline");
    CHECK(run({"decode", w.path("b.bs"), w.path("b.wav"), "--codebooks", codebooks()}).code == 0);
}

TEST_CASE("missing codebooks name the training command") {
    Workspace w;
    const Run e = run({"encode", w.wav.string(), w.path("x.bs"), "--codebooks", w.path("nowhere")});
    CHECK(e.code == cli::kExitRuntime);
    CHECK(e.err.find("hoacodec train-quantizers") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
    Workspace w;
    {
        std::ofstream f(w.path("cfg.json"));
        f << R"({"codec": "baseline", "rank": 2})";
    }
    const Run e = run({"encode", w.wav.string(), w.path("x.bs"), "--bypass", "--config", w.path("cfg.json"), "--rank", "3"});
    REQUIRE(e.code == 0);
    const auto j = nlohmann::json::parse(e.out);
    CHECK(j["codec"] == "baseline");
    CHECK(j["rank"] == 3);
    {
        std::ofstream f(w.path("bad.json"));
        f << R"({"codec": "baseline", "colour": 2})";
    }
    CHECK(run({"encode", w.wav.string(), w.path("x.bs"), "--bypass", "--config", w.path("bad.json")}).code ==
          cli::kExitRuntime);
    CHECK(run({"encode", w.wav.string(), w.path("x.bs"), "--bypass", "--bg-order", "7"}).code == cli::kExitUsage);
}

TEST_CASE("analyze writes a versioned CSV") {
    Workspace w;
    const Run a = run({"analyze", w.wav.string(), "--csv", w.path("a.csv")});
    REQUIRE(a.code == 0);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["dominance_violations"] == 0);
    std::ifstream f(w.path("a.csv"));
    std::string line;
    std::getline(f, line);
    CHECK(line == "# analyze-v1");
}

TEST_CASE("synth from a recipe") {
    Workspace w;
    {
        std::ofstream f(w.path("r.json"));
        f << default_corpus(1, 0.25, 4).front().to_json().dump();
    }
    REQUIRE(run({"synth", "--recipe", w.path("r.json"), w.path("s.wav")}).code == 0);
    CHECK(read_hoa_wav(w.path("s.wav")).channel_count() == 16);
    CHECK(run({"synth"}).code == cli::kExitUsage);
}

TEST_CASE("compare emits per-file and average rows") {
    Workspace w;
    std::filesystem::create_directories(w.dir / "corpus");
    std::filesystem::copy_file(w.wav, w.dir / "corpus" / "a.wav");
    const Run c = run({"compare", "--corpus", w.path("corpus"), "--codebooks", codebooks(), "--mnmr", "1,2", "--csv",
                       w.path("c.csv")});
    REQUIRE(c.code == 0);
    CHECK(c.out.find("Average") != std::string::npos);
    std::ifstream f(w.path("c.csv"));
    std::vector<std::string> lines;
    for (std::string l; std::getline(f, l);) lines.push_back(l);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "file,mnmr,baseline_kbps,proposed_kbps,reduction_pct");
    CHECK(lines[1].rfind("a.wav,1,", 0) == 0);
    CHECK(lines[3].rfind("AVERAGE,1,", 0) == 0);
}
