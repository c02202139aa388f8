#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <dstab/io.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code{-1};
    std::string output;
};

Result cli(const std::string& args) {
    const std::string cmd = std::string(DSTAB_CLI) + " " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) r.output += buf;
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string config(const std::string& file) { return std::string(DSTAB_CONFIGS) + "/" + file; }

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("dstab_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string flags(const std::string& cfg, const fs::path& out) { return "--config " + cfg + " --out " + out.string(); }

} // namespace

TEST(Cli, PendulumEndToEnd) {
    const auto out = scratch_dir("ex1");
    const auto f = flags(config("ex1_pendulum.json"), out);
    for (const char* cmd : {"collect", "synth", "verify", "roa"}) {
        const auto r = cli(std::string(cmd) + " " + f);
        ASSERT_EQ(r.code, 0) << cmd << ": " << r.output;
    }
    const auto sim = cli("simulate " + f + " --x0 1,0 --steps 200");
    ASSERT_EQ(sim.code, 0) << sim.output;
    const auto rows = dstab::io::parse_csv(slurp(out / "rollout.csv"));
    ASSERT_EQ(rows.size(), 202u);
    EXPECT_LE(std::abs(std::stod(rows.back()[1])) + std::abs(std::stod(rows.back()[2])), 1e-6);

    const auto rep = cli("report " + f);
    ASSERT_EQ(rep.code, 0) << rep.output;
    const auto j = dstab::io::read_json((out / "report.json").string());
    EXPECT_EQ(j["synthesis"]["status"], "feasible");
    EXPECT_EQ(j["verify"]["pass"], true);
    EXPECT_TRUE(j["timings"].contains("synth"));
    for (const char* a : {"trajectory.csv", "data.json", "outcome.json", "verify.json", "roa_grid.csv", "roa.json", "timings.json"})
        EXPECT_TRUE(fs::exists(out / a)) << a;
}

TEST(Cli, RobustExampleRoaIsAValidNegative) {
    const auto out = scratch_dir("ex3");
    const auto f = flags(config("ex3_robust.json"), out);
    ASSERT_EQ(cli("collect " + f).code, 0);
    const int synth = cli("synth " + f).code;
    ASSERT_TRUE(synth == 0 || synth == 2);
    const auto r = cli("roa " + f);
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_EQ(dstab::io::read_json((out / "roa.json").string())["empty"], true);
}

TEST(Cli, DimensionMismatchIsAnError) {
    const auto out = scratch_dir("dims");
    auto j = dstab::io::read_json(config("ex1_pendulum.json"));
    j["annihilator"]["L0"] = {{0, 0, -1, 0}};
    j["annihilator"]["L1"] = {{1, 0, 0, 0}};
    const auto cfg = (out / "bad.json").string();
    dstab::io::write_json(cfg, j);
    const auto r = cli("collect " + flags(cfg, out));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("dimension mismatch: annihilator expects S=4"), std::string::npos) << r.output;
}

TEST(Cli, StaleArtifactsAreRejected) {
    const auto out = scratch_dir("hash");
    const auto f = flags(config("ex2_poly.json"), out);
    ASSERT_EQ(cli("collect " + f).code, 0);
    const auto r = cli("synth " + f + " --seed 2");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("config hash mismatch"), std::string::npos) << r.output;
}

TEST(Cli, MissingStageAndBadArguments) {
    const auto out = scratch_dir("missing");
    const auto r = cli("synth " + flags(config("ex2_poly.json"), out));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.output.find("missing artifact"), std::string::npos);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("collect --config /nonexistent.json").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, IdenticalRunsAreByteIdentical) {
    const std::vector<std::string> artifacts{"trajectory.csv", "data.json", "outcome.json", "roa_grid.csv", "roa.json"};
    std::vector<std::string> first;
    for (int run = 0; run < 2; ++run) {
        const auto out = scratch_dir("det" + std::to_string(run));
        const auto f = flags(config("ex2_poly.json"), out);
        for (const char* cmd : {"collect", "synth", "roa"}) ASSERT_EQ(cli(std::string(cmd) + " " + f + " --threads 3").code, 0);
        for (std::size_t k = 0; k < artifacts.size(); ++k) {
            const auto bytes = slurp(out / artifacts[k]);
            ASSERT_FALSE(bytes.empty()) << artifacts[k];
            if (run == 0) first.push_back(bytes);
            else EXPECT_EQ(bytes, first[k]) << artifacts[k];
        }
    }
}
