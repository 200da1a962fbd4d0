#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "artifacts.hpp"
#include "commands.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace regimealloc;
using namespace regimealloc::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("regimealloc_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path synthetic_csv(const fs::path& dir) {
    static const auto data = generate_synthetic();
    const auto p = dir / "prices.in.csv";
    write_atomic(p, prices_csv(data.prices));
    return p;
}

std::vector<std::string> fast(std::vector<std::string> args) {
    for (const char* a : {"--states", "2", "--iters", "1000"}) args.emplace_back(a);
    return args;
}

}  // namespace

TEST(Cli, IngestManifestListsTickers) {
    const auto dir = scratch("ingest");
    std::ofstream(dir / "two.csv") << "date,AAA,BBB\n2020-01-02,10,20\n2020-01-03,11,19\n2020-01-06,12,21\n";
    const auto r = run({"ingest", "--data", (dir / "two.csv").string(), "-o", (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = read_json(dir / "out" / "manifest.json");
    const auto tickers = manifest.at("stages").at("ingest").at("tickers");
    ASSERT_EQ(tickers.size(), 2u);
    EXPECT_EQ(tickers[0], "AAA");
    EXPECT_EQ(manifest["stages"]["ingest"]["inputs"].size(), 1u);
    EXPECT_TRUE(fs::exists(dir / "out" / "returns.csv"));
}

TEST(Cli, UnreadablePathExitsWithValidationCode) {
    const auto dir = scratch("unreadable");
    const auto r = run({"ingest", "--data", "/no/such/prices.csv", "-o", dir.string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.err.find("/no/such/prices.csv"), std::string::npos);
    EXPECT_NE(r.err.find("[ingest]"), std::string::npos);
}

TEST(Cli, OneChainIsConfigError) {
    const auto dir = scratch("onechain");
    const auto r = run({"pipeline", "--data", synthetic_csv(dir).string(), "--chains", "1", "-o", dir.string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.err.find("n_chains ≥ 2 required for PSRF"), std::string::npos);
}

TEST(Cli, UnknownSubcommandOrKey) {
    EXPECT_EQ(run({"frobnicate"}).code, kExitValidation);
    const auto dir = scratch("badkey");
    std::ofstream(dir / "cfg.json") << R"({"k": 3, "colour": "blue"})";
    const auto r = run({"mixing", "-c", (dir / "cfg.json").string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST(Cli, FlagsOverrideConfigFile) {
    const auto dir = scratch("precedence");
    const auto csv = synthetic_csv(dir);
    std::ofstream(dir / "cfg.json") << R"({"k": 3, "window": 10, "output_dir": ")" << (dir / "from_file").string()
                                    << "\"}";
    ASSERT_EQ(run({"ingest", "-c", (dir / "cfg.json").string(), "--data", csv.string()}).code, 0);
    const auto r = run({"cluster", "-c", (dir / "cfg.json").string(), "--states", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto regimes = read_json(dir / "from_file" / "regimes.json");
    EXPECT_EQ(regimes.at("k"), 2);
    EXPECT_EQ(regimes.at("labels").size(), generate_synthetic().prices.size() - 1 - 9);
}

TEST(Cli, OutputDirFromEnvironment) {
    const auto dir = scratch("env");
    const auto csv = synthetic_csv(dir);
    ::setenv(kOutputEnv, (dir / "envout").string().c_str(), 1);
    const auto r = run({"ingest", "--data", csv.string()});
    ::unsetenv(kOutputEnv);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "envout" / "prices.csv"));
}

TEST(Cli, MissingUpstreamArtifact) {
    const auto dir = scratch("upstream");
    const auto r = run({"backtest", "-o", dir.string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.err.find("returns.csv"), std::string::npos);
}

TEST(Cli, DegenerateChainIsComputationError) {
    const auto dir = scratch("degenerate");
    json t{{"k", 3}, {"mean", matrix_json(Eigen::MatrixXd::Identity(3, 3))}};
    write_json(dir / "transitions.json", t);
    const auto r = run({"mixing", "-o", dir.string()});
    EXPECT_EQ(r.code, kExitComputation);
    EXPECT_NE(r.err.find("not aperiodic/irreducible"), std::string::npos);
}

TEST(Cli, ConvergenceGate) {
    const auto dir = scratch("gate");
    const auto csv = synthetic_csv(dir);
    ASSERT_EQ(run({"ingest", "--data", csv.string(), "-o", dir.string()}).code, 0);
    ASSERT_EQ(run({"cluster", "--states", "6", "-o", dir.string()}).code, 0);
    const std::vector<std::string> starved{"transitions", "--states", "6",       "--iters", "12",
                                           "--burn-in",   "2",        "--chains", "2",      "-o", dir.string()};
    const auto r = run(starved);
    ASSERT_EQ(r.code, kExitConvergence) << r.out << r.err;
    EXPECT_NE(r.err.find("--allow-unconverged"), std::string::npos);
    EXPECT_EQ(read_json(dir / "transitions.json").at("converged"), false);
    auto allowed = starved;
    allowed.emplace_back("--allow-unconverged");
    EXPECT_EQ(run(allowed).code, 0);
}

TEST(Cli, SyntheticPipelineEndToEnd) {
    const auto dir = scratch("pipeline");
    const auto r = run(fast({"pipeline", "--data", synthetic_csv(dir).string(), "-o", (dir / "out").string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto w = matrix_from_json(read_json(dir / "out" / "total_return_weights.json").at("weights"));
    EXPECT_LT((w.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
    const auto p = transition_matrix_from_json(read_json(dir / "out" / "transitions.json"));
    EXPECT_LT((p.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    for (const char* f : {"prices.csv", "returns.csv", "volatility.csv", "yearly.csv", "totals.csv", "value_paths.csv",
                          "total_return_weights.csv", "spectral.json", "allocations.json", "report.json"})
        EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Cli, RerunIsByteIdentical) {
    const auto dir = scratch("rerun");
    const auto csv = synthetic_csv(dir);
    ASSERT_EQ(run(fast({"pipeline", "--data", csv.string(), "-o", (dir / "a").string()})).code, 0);
    ASSERT_EQ(run(fast({"pipeline", "--data", csv.string(), "-o", (dir / "b").string()})).code, 0);
    const auto ma = read_json(dir / "a" / "manifest.json"), mb = read_json(dir / "b" / "manifest.json");
    std::size_t compared = 0;
    for (const auto& [stage, entry] : ma.at("stages").items()) {
        EXPECT_EQ(entry.at("outputs"), mb.at("stages").at(stage).at("outputs")) << stage;
        EXPECT_EQ(entry.at("config_hash"), mb.at("stages").at(stage).at("config_hash")) << stage;
        compared += entry.at("outputs").size();
    }
    EXPECT_GE(compared, 14u);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        if (e.path().filename() == "manifest.json") continue;
        EXPECT_EQ(read_file(e.path()), read_file(dir / "b" / e.path().filename())) << e.path().filename();
    }
}

TEST(Cli, FixtureModeReproducesTable) {
    const auto dir = scratch("fixtures");
    const auto r = run({"pipeline", "--from-fixtures", "paper_first_asset", "-o", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = read_json(dir / "fixtures_report.json");
    EXPECT_TRUE(report.at("first_asset_total_return_weights").at("passed").get<bool>());
    EXPECT_EQ(read_json(dir / "spectral.json").at("point_estimate"), 109);
    EXPECT_EQ(run({"pipeline", "--from-fixtures", "other_set", "-o", dir.string()}).code, kExitValidation);
}

TEST(Cli, ReproduceFixturesReport) {
    const auto dir = scratch("reproduce");
    const auto r = run({"reproduce-paper-fixtures", "-o", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = read_json(dir / "fixtures_report.json");
    EXPECT_TRUE(report.at("mixing_point_estimates").at("passed").get<bool>());
    EXPECT_EQ(report.at("sharpe_convention").at("cells"), 150);
    EXPECT_EQ(report.at("sharpe_convention").at("consistent_with_rounding"), 150);
    EXPECT_FALSE(report.at("printed_indicator_discrepancies").empty());
    EXPECT_EQ(run({"reproduce-paper-fixtures", "--fixtures-dir", "/no/fixtures", "-o", dir.string()}).code,
              kExitValidation);
}

TEST(Cli, GenerateSynthetic) {
    const auto dir = scratch("synth");
    const auto r = run({"generate-synthetic", "--days", "300", "--assets", "2", "--out", (dir / "s.csv").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto loaded = load_prices(dir / "s.csv");
    EXPECT_EQ(loaded.prices.size(), 301u);
    EXPECT_EQ(loaded.prices.asset_count(), 2u);
    EXPECT_TRUE(fs::exists(dir / "s_regimes.csv"));
}

TEST(Cli, ArtifactsMatchSchemas) {
    const auto dir = scratch("schemas");
    ASSERT_EQ(run(fast({"pipeline", "--data", synthetic_csv(dir).string(), "-o", (dir / "out").string()})).code, 0);
    ASSERT_EQ(run({"reproduce-paper-fixtures", "-o", (dir / "out").string()}).code, 0);
    const std::string cmd = std::string("python3 ") + REGIMEALLOC_SOURCE_DIR + "/tests/support/validate_artifacts.py " +
                            (dir / "out").string() + " " + REGIMEALLOC_SOURCE_DIR + "/docs/schemas > " +
                            (dir / "schema.log").string() + " 2>&1";
    EXPECT_EQ(std::system(cmd.c_str()), 0) << read_file(dir / "schema.log");
}
