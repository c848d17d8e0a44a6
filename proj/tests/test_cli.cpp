#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("leakdetect_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(CLI_BIN) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string scenario_text(double leak_area_mm2, std::uint64_t seed, bool with_leak = true) {
    std::string s =
        "pipe_inner_diameter_m = 0.4064\n"
        "fluid_density_kg_m3 = 800\n"
        "fluid_sound_speed_m_s = 1200\n"
        "station = A,0,PHAF\n"
        "station = B,200,PHAF\n"
        "duration_s = 8\n"
        "condition = transferring\n"
        "attenuation_np_per_m = 0.002\n"
        "noise_floor_kpa = 0.005\n"
        "seed = " + std::to_string(seed) + "\n"
        "rng = mt19937_64\n";
    if (with_leak)
        s += "leak_position_m = 100\n"
             "leak_area_mm2 = " + std::to_string(leak_area_mm2) + "\n"
             "leak_delta_p_bar = 4\n"
             "leak_start_s = 1\n"
             "leak_stop_s = 7\n";
    return s;
}

}  // namespace

TEST_CASE("full pipeline: simulate, extract, train, fit, detect, localize") {
    TempDir tmp;
    write_text(tmp.file("small.scn"), scenario_text(5.06, 11));
    write_text(tmp.file("large.scn"), scenario_text(31.65, 12));

    REQUIRE(run("simulate --scenario " + tmp.file("small.scn") + " --out " +
                tmp.file("small")) == 0);
    REQUIRE(run("simulate --scenario " + tmp.file("large.scn") + " --out " +
                tmp.file("large")) == 0);
    CHECK(fs::exists(tmp.path / "small" / "A.sig"));
    CHECK(fs::exists(tmp.path / "small" / "B.hdr"));
    CHECK(fs::exists(tmp.path / "small" / "manifest.txt"));

    for (const std::string name : {"small", "large"})
        REQUIRE(run("extract --in " + tmp.file(name) + " --out " + tmp.file(name + ".tsv") +
                    " --manifest " + tmp.file(name + "/manifest.txt")) == 0);

    REQUIRE(run("train --features " + tmp.file("large.tsv") + " --manifest " +
                tmp.file("large/manifest.txt") + " --out " + tmp.file("domain.txt")) == 0);

    REQUIRE(run("fit --features " + tmp.file("small.tsv") + " --features " +
                tmp.file("large.tsv") + " --manifest " + tmp.file("small/manifest.txt") +
                " --manifest " + tmp.file("large/manifest.txt") + " --out " +
                tmp.file("model.txt")) == 0);
    CHECK(fs::exists(tmp.path / "model.txt"));

    REQUIRE(run("detect --features " + tmp.file("large.tsv") + " --domain " +
                tmp.file("domain.txt") + " --model " + tmp.file("model.txt") + " --manifest " +
                tmp.file("large/manifest.txt") + " --out " + tmp.file("report.txt")) == 0);
    const auto report = read_bytes(tmp.file("report.txt"));
    CHECK(report.find("# summary all") != std::string::npos);

    REQUIRE(run("localize --a " + tmp.file("large/A.sig") + " --b " + tmp.file("large/B.sig") +
                " --config " + tmp.file("large.scn")) == 0);
}

TEST_CASE("reruns are byte-identical") {
    TempDir tmp;
    write_text(tmp.file("s.scn"), scenario_text(12.56, 21));
    REQUIRE(run("simulate --scenario " + tmp.file("s.scn") + " --out " + tmp.file("r1")) == 0);
    REQUIRE(run("simulate --scenario " + tmp.file("s.scn") + " --out " + tmp.file("r2")) == 0);
    for (const std::string name : {"A.sig", "B.sig", "manifest.txt"})
        REQUIRE(read_bytes(tmp.file("r1/" + name)) == read_bytes(tmp.file("r2/" + name)));

    for (int i = 1; i <= 2; ++i)
        REQUIRE(run("extract --in " + tmp.file("r1") + " --out " +
                    tmp.file("f" + std::to_string(i) + ".tsv") + " --manifest " +
                    tmp.file("r1/manifest.txt")) == 0);
    REQUIRE(read_bytes(tmp.file("f1.tsv")) == read_bytes(tmp.file("f2.tsv")));

    // a different seed changes the signal bytes
    REQUIRE(run("simulate --scenario " + tmp.file("s.scn") + " --seed 22 --out " +
                tmp.file("r3")) == 0);
    CHECK(read_bytes(tmp.file("r1/A.sig")) != read_bytes(tmp.file("r3/A.sig")));
}

TEST_CASE("exit code 2 on parse errors") {
    TempDir tmp;
    CHECK(run("simulate --scenario " + tmp.file("missing.scn") + " --out " + tmp.file("out")) ==
          2);
    write_text(tmp.file("bad.scn"), "this is not a key value file\n");
    CHECK(run("simulate --scenario " + tmp.file("bad.scn") + " --out " + tmp.file("out")) == 2);
}

TEST_CASE("exit code 3 on precondition violations, before writing outputs") {
    TempDir tmp;
    auto text = scenario_text(12.56, 5);
    const auto pos = text.find("duration_s = 8");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 14, "duration_s = 0");
    write_text(tmp.file("zero.scn"), text);
    CHECK(run("simulate --scenario " + tmp.file("zero.scn") + " --out " + tmp.file("out")) == 3);
    CHECK_FALSE(fs::exists(tmp.path / "out"));
}

TEST_CASE("exit code 4 when no coherent source links the stations") {
    TempDir tmp;
    write_text(tmp.file("quiet.scn"), scenario_text(12.56, 31, /*with_leak=*/false));
    REQUIRE(run("simulate --scenario " + tmp.file("quiet.scn") + " --out " + tmp.file("q")) == 0);
    CHECK(run("localize --a " + tmp.file("q/A.sig") + " --b " + tmp.file("q/B.sig") +
              " --config " + tmp.file("quiet.scn")) == 4);
}

TEST_CASE("missing required flags fail") {
    CHECK(run("simulate") != 0);
    CHECK(run("nonsense") != 0);
}
