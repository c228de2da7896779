#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "cli/commands.hpp"
#include "klpriv/errors.hpp"
#include "klpriv/version.hpp"

using namespace klpriv::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "klpriv");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_app(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "klpriv_cli_test";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> body_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line.front() != '#') lines.push_back(line);
    return lines;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> parts;
    std::istringstream in(s);
    std::string p;
    while (std::getline(in, p, ',')) parts.push_back(p);
    if (!s.empty() && s.back() == ',') parts.push_back("");
    return parts;
}

// scheme,metric,value → map keyed by "scheme/metric"
std::map<std::string, double> metrics(const std::string& text) {
    std::map<std::string, double> m;
    const auto lines = body_lines(text);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f.size() == 3) m[f[0] + "/" + f[1]] = std::stod(f[2]);
        if (f.size() == 2) m[f[0]] = std::stod(f[1]);
    }
    return m;
}

std::vector<double> kl_means(const std::string& text) {
    std::vector<double> v;
    const auto lines = body_lines(text);
    for (std::size_t i = 1; i < lines.size(); ++i) v.push_back(std::stod(split(lines[i])[1]));
    return v;
}

}  // namespace

TEST(CliConfig, SerializeRoundTrip) {
    RunConfig c;
    c.command = "estimate";
    c.eta = 0.1;
    c.widths = {4, 5};
    c.depths = {3};
    c.replay_sigma2 = 1e-3;
    c.d = 7;
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : serialize(c)) kv[k] = v;
    const RunConfig back = parse_entries(kv);
    EXPECT_EQ(serialize(back), serialize(c));
}

TEST(CliConfig, KeyValueParsing) {
    const auto kv = parse_key_values("# klpriv 0.1.0\n# eta=0.5\nsteps = 3\nepochs,kl_means\n0,0\n");
    EXPECT_EQ(kv.at("eta"), "0.5");
    EXPECT_EQ(kv.at("steps"), "3");
    EXPECT_EQ(kv.size(), 2u);
    EXPECT_THROW(parse_entries({{"bogus", "1"}}), klpriv::ParseError);
    EXPECT_THROW(parse_entries({{"eta", "fast"}}), klpriv::ParseError);
}

TEST(CliConfig, DoubleFormatting) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(1e-10), "1e-10");
    EXPECT_EQ(format_double(INFINITY), "inf");
    EXPECT_EQ(parse_double(format_double(1.0 / 3.0), "x"), 1.0 / 3.0);
}

TEST(CliBound, WorkedExample) {
    const auto r = run({"bound", "--scheme", "lecun", "--d", "10", "--width", "100", "--depth", "3", "--outputs", "1",
                        "--T", "1", "--data", "synth:100", "--sigma2", "0.01"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = metrics(r.out);
    EXPECT_DOUBLE_EQ(m.at("lecun/B"), 52.5);
    EXPECT_DOUBLE_EQ(m.at("lecun/B_table"), 52.5);
    EXPECT_NEAR(m.at("lecun/kl_linearized"), 1.05, 1e-14);
    EXPECT_NE(r.out.find(std::string("# klpriv ") + klpriv::kVersion), std::string::npos);
    EXPECT_NE(r.out.find("# command=bound"), std::string::npos);
}

TEST(CliBound, ZeroHorizonAndAllSchemes) {
    const auto r = run({"bound", "--scheme", "all", "--T", "0", "--c", "1", "--beta-smooth", "0.5", "--rank", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = metrics(r.out);
    for (const char* s : {"lecun", "he", "ntk", "xavier"}) {
        EXPECT_EQ(m.at(std::string(s) + "/kl_linearized"), 0.0);
        EXPECT_EQ(m.at(std::string(s) + "/drift_kl"), 0.0);
        EXPECT_EQ(m.count(std::string(s) + "/B_table"), 1u);
    }
}

TEST(CliBound, ExactConventionHalves) {
    const auto paper = metrics(run({"bound", "--T", "2"}).out);
    const auto exact = metrics(run({"bound", "--T", "2", "--kl-constant", "exact"}).out);
    EXPECT_EQ(exact.at("lecun/kl_linearized"), paper.at("lecun/kl_linearized") / 2.0);
}

TEST(CliEstimate, ZeroStepsSingleRow) {
    const auto r = run({"estimate", "--steps", "0", "--d", "4", "--width", "8", "--data", "synth:8", "--runs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = body_lines(r.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "epochs,kl_means,kl_stds");
    EXPECT_EQ(lines[1], "0,0,0");
}

TEST(CliEstimate, RerunsAreByteIdentical) {
    const std::vector<std::string> args{"estimate", "--steps", "6", "--d", "4", "--width", "8", "--depth", "3",
                                        "--data", "synth:12", "--runs", "3", "--seed", "11", "--neighbor", "add",
                                        "--pool", "3"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out", temp_path("rerun_a.csv")});
    b.insert(b.end(), {"--out", temp_path("rerun_b.csv"), "--threads", "2"});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(slurp(temp_path("rerun_a.csv")), slurp(temp_path("rerun_b.csv")));
    EXPECT_EQ(slurp(temp_path("rerun_a.csv.neighbors.csv")), slurp(temp_path("rerun_b.csv.neighbors.csv")));
    EXPECT_EQ(body_lines(slurp(temp_path("rerun_a.csv"))).size(), 8u);
    const auto detail = body_lines(slurp(temp_path("rerun_a.csv.neighbors.csv")));
    EXPECT_EQ(detail.front(), "run,neighbor,removed,inserted,kl_final,diverged,diverged_at");
    EXPECT_EQ(detail.size(), 1u + 3u * 3u);
}

TEST(CliEstimate, EmbeddedConfigReproducesFile) {
    const std::string first = temp_path("config_src.csv"), second = temp_path("config_dst.csv");
    ASSERT_EQ(run({"estimate", "--steps", "4", "--d", "3", "--width", "6", "--data", "synth:10", "--runs", "2",
                   "--record-every", "2", "--sigma2", "0.05", "--out", first})
                  .code,
              0);
    ASSERT_EQ(run({"--config", first, "--out", second}).code, 0);
    EXPECT_EQ(slurp(first), slurp(second));
    // flags override the config file
    const auto r = run({"--config", first, "--steps", "2"});
    EXPECT_NE(r.out.find("# steps=2"), std::string::npos);
}

TEST(CliEstimate, ReplayDoublingSigmaHalvesKl) {
    const std::vector<std::string> base{"estimate", "--steps", "8", "--d", "4", "--width", "10", "--data", "synth:10",
                                        "--runs", "3", "--replay-sigma2", "0.01"};
    auto a = base, b = base;
    a.insert(a.end(), {"--sigma2", "0.01"});
    b.insert(b.end(), {"--sigma2", "0.02"});
    const auto ka = kl_means(run(a).out), kb = kl_means(run(b).out);
    ASSERT_EQ(ka.size(), kb.size());
    for (std::size_t i = 0; i < ka.size(); ++i) EXPECT_EQ(kb[i], ka[i] / 2.0);
}

TEST(CliEstimate, DivergenceExitCode) {
    const auto r = run({"estimate", "--steps", "3", "--eta", "1", "--sigma2", "1e30", "--d", "3", "--width", "6",
                        "--data", "synth:6", "--runs", "2", "--scheme", "he"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.out.find("inf"), std::string::npos);
}

TEST(CliValidation, ExitCodeTwo) {
    EXPECT_EQ(run({"bound", "--depth", "1"}).code, 2);
    EXPECT_EQ(run({"bound", "--scheme", "glorot"}).code, 2);
    EXPECT_EQ(run({"estimate", "--scheme", "all"}).code, 2);
    EXPECT_EQ(run({"bound", "--neighbor", "swap"}).code, 2);
    EXPECT_EQ(run({"bound", "--data", "file.csv"}).code, 2);
    EXPECT_EQ(run({"nonsense"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"lazy", "--outputs", "2"}).code, 2);
    EXPECT_EQ(run({"--config", "/nonexistent/klpriv.cfg"}).code, 2);
    EXPECT_EQ(run({"bound", "--data", "csv:/nonexistent/x.csv"}).code, 2);
}

TEST(CliMcVerify, ReferenceConfigPasses) {
    const auto r = run({"mc-verify", "--scheme", "all", "--d", "8", "--width", "32", "--depth", "4", "--outputs", "1",
                        "--samples", "1500", "--data", "synth:32"});
    ASSERT_EQ(r.code, 0) << r.out << r.err;
    const auto lines = body_lines(r.out);
    EXPECT_EQ(lines.size(), 1u + 4u * 3u);
    for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_EQ(split(lines[i]).back(), "true") << lines[i];
}

TEST(CliMcVerify, ZeroInputAndZeroVariance) {
    const std::string csv = temp_path("zero.csv");
    std::ofstream(csv) << "a,b,label\n0,0,1\n0,0,-1\n";
    const auto zero_x = run({"mc-verify", "--data", "csv:" + csv, "--normalize", "none", "--width", "5", "--samples", "10"});
    EXPECT_EQ(zero_x.code, 0) << zero_x.out << zero_x.err;
    const auto zero_var = run({"mc-verify", "--scheme", "custom:0,0,0", "--d", "3", "--width", "5", "--samples", "10"});
    EXPECT_EQ(zero_var.code, 0) << zero_var.out << zero_var.err;
    for (const auto& line : body_lines(zero_var.out))
        if (line.rfind("custom", 0) == 0) EXPECT_EQ(split(line)[2], "0");
}

TEST(CliLazy, ReportsInterpolation) {
    const auto r = run({"lazy", "--d", "16", "--width", "64", "--depth", "2", "--data", "synth:8", "--ridge", "0",
                        "--train", "--steps", "200", "--eta", "0.05", "--sigma2", "1e-4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = metrics(r.out);
    EXPECT_EQ(m.at("rank"), 8.0);
    EXPECT_EQ(m.at("achieved_below_inv_n2"), 1.0);
    EXPECT_NEAR(m.at("achieved_loss"), std::log1p(1.0 / 64.0), 1e-9);
    EXPECT_GT(m.at("R"), 0.0);
    EXPECT_EQ(m.count("train_excess_bound"), 1u);
    // the schedule spends exactly the KL budget
    EXPECT_NEAR(2.0 * m.at("B") * m.at("tradeoff_T") / (64.0 * m.at("tradeoff_sigma2")), m.at("eps"), 1e-12);
}

TEST(CliLazy, RankDeficientGram) {
    const std::string csv = temp_path("dup.csv");
    std::ofstream(csv) << "a,b,label\n1,0,1\n1,0,-1\n";
    EXPECT_EQ(run({"lazy", "--data", "csv:" + csv, "--width", "8", "--depth", "2", "--ridge", "0"}).code, 2);
}

TEST(CliSweep, SingleCellSingleRow) {
    const auto r = run({"sweep", "--steps", "0", "--data", "synth:5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = body_lines(r.out);
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0], "scheme,width,depth,epoch,metric,value");
}

TEST(CliSweep, AnalyticTrends) {
    const auto r = run({"sweep", "--scheme", "all", "--d", "16", "--width", "16,32,64", "--depth", "2,3,4,5",
                        "--steps", "1", "--data", "synth:50"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::map<std::tuple<std::string, int, int>, double> table;
    auto kl = [&](const std::string& s, int w, int l) { return table.at({s, w, l}); };
    const auto lines = body_lines(r.out);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split(lines[i]);
        if (f[3] == "1" && f[4] == "kl_bound") table[{f[0], std::stoi(f[1]), std::stoi(f[2])}] = std::stod(f[5]);
    }
    for (int l = 3; l < 5; ++l) EXPECT_LT(kl("lecun", 16, l + 1), kl("lecun", 16, l));
    for (const char* s : {"lecun", "he", "ntk", "xavier"})
        for (int l = 2; l <= 5; ++l) {
            EXPECT_LT(kl(s, 16, l), kl(s, 32, l));
            EXPECT_LT(kl(s, 32, l), kl(s, 64, l));
        }
}

TEST(CliSweep, EmpiricalRowsAreSorted) {
    const auto r = run({"sweep", "--scheme", "all", "--width", "6,4", "--depth", "2", "--steps", "2", "--d", "3",
                        "--data", "synth:8", "--runs", "2", "--empirical", "--threads", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto lines = body_lines(r.out);
    // 8 cells × (3 epochs × 3 metrics + diverged_runs)
    EXPECT_EQ(lines.size(), 1u + 8u * 10u);
    EXPECT_TRUE(std::is_sorted(lines.begin() + 1, lines.end(), [](const std::string& a, const std::string& b) {
        const auto fa = split(a), fb = split(b);
        return std::make_tuple(fa[0], std::stoi(fa[1]), std::stoi(fa[2]), std::stoi(fa[3]), fa[4]) <
               std::make_tuple(fb[0], std::stoi(fb[1]), std::stoi(fb[2]), std::stoi(fb[3]), fb[4]);
    }));
    const auto again = run({"sweep", "--scheme", "all", "--width", "6,4", "--depth", "2", "--steps", "2", "--d", "3",
                            "--data", "synth:8", "--runs", "2", "--empirical", "--threads", "1"});
    EXPECT_EQ(again.out, r.out);
}

TEST(CliSweep, FailedCellIsRecorded) {
    const auto r = run({"sweep", "--scheme", "custom:0,1", "--depth", "2", "--steps", "1", "--data", "synth:4"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find(",error,nan"), std::string::npos);
    EXPECT_NE(r.err.find("failed"), std::string::npos);
}
