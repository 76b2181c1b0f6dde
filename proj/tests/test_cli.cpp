#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "zsscl/seismic_io.hpp"
#include "zsscl/synthgen.hpp"

using namespace zsscl;
namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("ZSSCL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "ZSSCL_CLI must point at the zsscl binary (ctest sets it)");
    return p;
}

int run(const std::string& args, const std::string& log = "cli_test_tmp/log.txt") {
    const std::string cmd = cli_path() + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct TmpDir {
    TmpDir() { fs::create_directories("cli_test_tmp"); }
    ~TmpDir() {
        std::error_code ec;
        fs::remove_all("cli_test_tmp", ec);
    }
};

Gather small_scene(std::uint64_t seed = 3) {
    // 64 samples x 48 traces keeps CLI-driven training fast. Events are
    // scaled so every trace carries energy inside the 0.256 s window.
    std::vector<EventSpec> events{
        {EventSpec::Kind::linear, 0.030, 0.00030, 1.00, 40.0},
        {EventSpec::Kind::linear, 0.200, -0.00020, 0.70, 40.0},
        {EventSpec::Kind::hyperbolic, 0.060, 3000.0, 0.90, 40.0},
        {EventSpec::Kind::hyperbolic, 0.100, 3500.0, 0.80, 40.0},
    };
    return make_gather(48, 64, 0.004, 10.0, events, 0.0, seed);
}

}  // namespace

TEST_CASE("simulate-missing drops the exact fraction and is reproducible") {
    TmpDir tmp;
    write_grid(small_scene(), "cli_test_tmp/in.zsg");

    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0.5 --seed 7 "
                "--out cli_test_tmp/dec.zsg --mask-out cli_test_tmp/mask.txt") == 0);
    Gather dec = read_grid("cli_test_tmp/dec.zsg");
    TraceMask mask = read_mask("cli_test_tmp/mask.txt");
    CHECK(mask.missing_count() == 24);
    int zero_cols = 0;
    for (int t = 0; t < dec.n_traces; ++t) {
        bool all_zero = true;
        for (int s = 0; s < dec.n_samples; ++s) all_zero = all_zero && dec.at(s, t) == 0.0f;
        zero_cols += all_zero ? 1 : 0;
    }
    CHECK(zero_cols == 24);

    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0.5 --seed 7 "
                "--out cli_test_tmp/dec2.zsg --mask-out cli_test_tmp/mask2.txt") == 0);
    CHECK(slurp("cli_test_tmp/dec.zsg") == slurp("cli_test_tmp/dec2.zsg"));
    CHECK(slurp("cli_test_tmp/mask.txt") == slurp("cli_test_tmp/mask2.txt"));

    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0 --seed 7 "
                "--out cli_test_tmp/same.zsg") == 0);
    CHECK(slurp("cli_test_tmp/same.zsg") == slurp("cli_test_tmp/in.zsg"));
}

TEST_CASE("reconstruct writes output, history, manifest; observed traces are bit-equal") {
    TmpDir tmp;
    const Gather scene = small_scene();
    write_grid(scene, "cli_test_tmp/in.zsg");
    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0.4 --seed 2 "
                "--out cli_test_tmp/dec.zsg --mask-out cli_test_tmp/mask.txt") == 0);

    REQUIRE(run("reconstruct cli_test_tmp/dec.zsg --mask cli_test_tmp/mask.txt "
                "--out cli_test_tmp/rec.zsg --loss scl --iterations 40 --seed 5 "
                "--history cli_test_tmp/hist.csv --manifest cli_test_tmp/run.manifest") == 0);

    const Gather dec = read_grid("cli_test_tmp/dec.zsg");
    const Gather rec = read_grid("cli_test_tmp/rec.zsg");
    const TraceMask mask = read_mask("cli_test_tmp/mask.txt");
    REQUIRE(rec.same_shape(dec));
    for (int t = 0; t < dec.n_traces; ++t) {
        if (!mask.keep[static_cast<std::size_t>(t)]) continue;
        for (int s = 0; s < dec.n_samples; ++s) REQUIRE(rec.at(s, t) == dec.at(s, t));
    }

    const std::string hist = slurp("cli_test_tmp/hist.csv");
    CHECK(hist.find("iteration,term1,term2,term3,total") != std::string::npos);

    const std::string manifest = slurp("cli_test_tmp/run.manifest");
    CHECK(manifest.find("loss=scl") != std::string::npos);
    CHECK(manifest.find("iterations=40") != std::string::npos);
    CHECK(manifest.find("seed=5") != std::string::npos);
}

TEST_CASE("the two loss arms produce different reconstructions, same manifest schema") {
    TmpDir tmp;
    write_grid(small_scene(), "cli_test_tmp/in.zsg");
    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0.4 --seed 2 "
                "--out cli_test_tmp/dec.zsg --mask-out cli_test_tmp/mask.txt") == 0);

    REQUIRE(run("reconstruct cli_test_tmp/dec.zsg --mask cli_test_tmp/mask.txt "
                "--out cli_test_tmp/rec_scl.zsg --loss scl --iterations 30 --seed 5") == 0);
    REQUIRE(run("reconstruct cli_test_tmp/dec.zsg --mask cli_test_tmp/mask.txt "
                "--out cli_test_tmp/rec_trad.zsg --loss traditional --iterations 30 --seed 5") == 0);

    CHECK(slurp("cli_test_tmp/rec_scl.zsg") != slurp("cli_test_tmp/rec_trad.zsg"));

    auto keys = [](const std::string& text) {
        std::vector<std::string> out;
        std::istringstream is(text);
        std::string line;
        while (std::getline(is, line))
            if (!line.empty() && line[0] != '#') out.push_back(line.substr(0, line.find('=')));
        return out;
    };
    CHECK(keys(slurp("cli_test_tmp/rec_scl.zsg.manifest")) ==
          keys(slurp("cli_test_tmp/rec_trad.zsg.manifest")));
}

TEST_CASE("a manifest can be replayed as a config file") {
    TmpDir tmp;
    write_grid(small_scene(), "cli_test_tmp/in.zsg");
    REQUIRE(run("simulate-missing cli_test_tmp/in.zsg --fraction 0.3 --seed 4 "
                "--out cli_test_tmp/dec.zsg --mask-out cli_test_tmp/mask.txt") == 0);
    REQUIRE(run("reconstruct cli_test_tmp/dec.zsg --mask cli_test_tmp/mask.txt "
                "--out cli_test_tmp/rec1.zsg --iterations 25 --seed 9") == 0);
    // Replay with the output redirected; everything else comes from the manifest.
    REQUIRE(run("reconstruct --config cli_test_tmp/rec1.zsg.manifest --out cli_test_tmp/rec2.zsg "
                "--manifest cli_test_tmp/rec2.manifest") == 0);
    CHECK(slurp("cli_test_tmp/rec1.zsg") == slurp("cli_test_tmp/rec2.zsg"));
}

TEST_CASE("evaluate reports the identity metrics for identical gathers") {
    TmpDir tmp;
    write_grid(small_scene(), "cli_test_tmp/x.zsg");
    REQUIRE(run("evaluate cli_test_tmp/x.zsg cli_test_tmp/x.zsg --csv cli_test_tmp/m.csv") == 0);
    const std::string csv = slurp("cli_test_tmp/m.csv");
    CHECK(csv.find("ssim,r_squared") != std::string::npos);
    CHECK(csv.find("1.000000,1.000000") != std::string::npos);
}

TEST_CASE("usage errors exit with code 2 and name the problem") {
    TmpDir tmp;
    CHECK(run("evaluate cli_test_tmp/does_not_exist.zsg cli_test_tmp/nope.zsg") == 2);
    CHECK(slurp("cli_test_tmp/log.txt").find("does_not_exist.zsg") != std::string::npos);

    CHECK(run("reconstruct cli_test_tmp/missing_input.zsg --out cli_test_tmp/o.zsg") == 2);
    CHECK(slurp("cli_test_tmp/log.txt").find("missing_input.zsg") != std::string::npos);

    // Shape mismatch between evaluation inputs.
    write_grid(small_scene(), "cli_test_tmp/a.zsg");
    Gather other(32, 32, 0.004);
    for (auto& v : other.data) v = 1.0f;
    write_grid(other, "cli_test_tmp/b.zsg");
    CHECK(run("evaluate cli_test_tmp/a.zsg cli_test_tmp/b.zsg") == 2);

    CHECK(run("simulate-missing cli_test_tmp/a.zsg --fraction 1.5 --out cli_test_tmp/o.zsg") == 2);
}

TEST_CASE("benchmark emits one row per run plus a summary") {
    TmpDir tmp;
    REQUIRE(run("benchmark --seeds 2 --fractions 0.3 --iterations 25 --jobs 1 "
                "--out cli_test_tmp/bench") == 0);
    const std::string csv = slurp("cli_test_tmp/bench/results.csv");
    int rows = 0;
    for (char c : csv) rows += c == '\n' ? 1 : 0;
    CHECK(rows == 5);  // header + 2 seeds x 2 arms
    CHECK(csv.find("fraction,arm,seed,ssim,r_squared,noise_std,seconds") == 0);
    const std::string summary = slurp("cli_test_tmp/bench/summary.txt");
    CHECK(summary.find("scl") != std::string::npos);
    CHECK(summary.find("traditional") != std::string::npos);
    CHECK(summary.find("wins") != std::string::npos);
}
