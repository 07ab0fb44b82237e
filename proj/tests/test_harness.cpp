#include "mlsim/error.hpp"
#include "mlsim/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mlsim;
namespace fs = std::filesystem;

namespace
{
    fs::path fresh_dir(const std::string &name)
    {
        auto p = fs::temp_directory_path() / ("mlsim_harness_" + name);
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }
}

TEST(RunConfig, Defaults)
{
    RunConfig c;
    auto r = c.resolved();
    EXPECT_EQ(r.cp_int, 25);
    EXPECT_EQ(r.n_iters, 50);
    EXPECT_EQ(r.log_size, 25);
    c.kernel = KernelId::Stencil;
    c.n_procs = 27;
    c.mode = RollbackPolicy::Hybrid;
    r = c.resolved();
    EXPECT_EQ(r.cp_int, 20);
    EXPECT_EQ(r.log_size, 10);
}

TEST(RunConfig, Validation)
{
    RunConfig c;
    c.log_size = 5;
    EXPECT_THROW(c.resolved(), ConfigError);
    c.mode = RollbackPolicy::Hybrid;
    EXPECT_NO_THROW(c.resolved());
    c.log_size = 26;
    EXPECT_THROW(c.resolved(), ConfigError);
    c = RunConfig{};
    c.failures = {{2, 51, 0}};
    EXPECT_THROW(c.resolved(), ConfigError);
    c.failures = {{16, 5, 0}};
    EXPECT_THROW(c.resolved(), ConfigError);
    c = RunConfig{};
    c.failures = {{2, 5, 7}};
    EXPECT_THROW(run(c), ConfigError);
    c = RunConfig{};
    c.n_procs = 12;
    EXPECT_THROW(run(c), ConfigError);
}

TEST(RunConfig, ParseFailure)
{
    EXPECT_EQ(parse_failure("2:13:1"), (FailureSpec{2, 13, 1}));
    EXPECT_THROW(parse_failure("2:13"), ConfigError);
    EXPECT_THROW(parse_failure("2:13:1x"), ConfigError);
}

TEST(RunConfig, JsonRoundTrip)
{
    RunConfig c;
    c.kernel = KernelId::Stencil;
    c.n_procs = 8;
    c.n_iters = 40;
    c.seed = 9;
    c.cp_int = 20;
    c.log_size = 10;
    c.mode = RollbackPolicy::Hybrid;
    c.failures = {{1, 23, 2}, {4, 30, 0}};
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(back.kernel, c.kernel);
    EXPECT_EQ(back.n_procs, 8);
    EXPECT_EQ(back.n_iters, 40);
    EXPECT_EQ(back.seed, 9u);
    EXPECT_EQ(back.log_size, 10);
    EXPECT_EQ(back.mode, RollbackPolicy::Hybrid);
    EXPECT_EQ(back.failures, c.failures);
    EXPECT_THROW(config_from_json("{\"bogus\": 1}"), ConfigError);
    EXPECT_THROW(config_from_json("[1"), ConfigError);
    EXPECT_THROW(config_from_json("{\"procs\": \"x\"}"), ConfigError);
}

TEST(Metrics, CsvShape)
{
    EXPECT_EQ(csv_header(),
              "run_id,kernel,n_procs,cp_int,log_size,fail_rank,fail_iter,fail_phase,mode_taken,"
              "recompute_iters_total,recompute_iters_failed_rank,replayed_msgs,payload_bytes_peak,final_metric_hex");
    EXPECT_EQ(metric_hex(1.0), "3ff0000000000000");
    EXPECT_EQ(metric_hex(-0.0), "8000000000000000");
}

TEST(Harness, RunWritesArtifacts)
{
    const auto dir = fresh_dir("artifacts");
    RunConfig c;
    c.cp_int = 10;
    c.n_iters = 20;
    c.failures = {{2, 13, 1}};
    c.out_dir = dir.string();
    const auto out = run(c);
    EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
    EXPECT_TRUE(fs::exists(dir / "trace.jsonl"));
    EXPECT_TRUE(fs::exists(dir / "config.json"));
    EXPECT_TRUE(fs::exists(dir / "checkpoints" / "ckpt_cg_15.bin"));
    EXPECT_EQ(slurp(dir / "metrics.csv"), csv_header() + "\n" + csv_row(out.metrics) + "\n");
    EXPECT_EQ(out.metrics.run_id, "cg-p16-s1-i20-cp10-ls10-local-f2.13.1");
    EXPECT_EQ(out.metrics.fail_rank, "2");
    EXPECT_EQ(out.metrics.fail_iter, "13");
    EXPECT_EQ(out.metrics.fail_phase, "1");
    EXPECT_EQ(out.metrics.mode_taken, "local");
    EXPECT_GE(out.metrics.recompute_iters_total, out.metrics.recompute_iters_failed_rank);
    fs::remove_all(dir);
}

TEST(Harness, VerifyComparesFinalMetric)
{
    const auto a = fresh_dir("va");
    const auto b = fresh_dir("vb");
    const auto bad = fresh_dir("vbad");
    RunConfig c;
    c.cp_int = 10;
    c.n_iters = 30;
    c.out_dir = a.string();
    run(c);
    EXPECT_TRUE(verify(a.string(), a.string()));
    c.out_dir = b.string();
    c.failures = {{2, 13, 1}};
    run(c);
    EXPECT_TRUE(verify(a.string(), b.string()));
    c.out_dir = bad.string();
    c.failures = {{2, 13, 2}};
    c.no_transaction = true;
    run(c);
    EXPECT_FALSE(verify(a.string(), bad.string()));

    RunConfig other;
    other.seed = 2;
    other.cp_int = 10;
    other.n_iters = 30;
    other.out_dir = bad.string();
    run(other);
    EXPECT_THROW(verify(a.string(), bad.string()), ConfigError);
    EXPECT_THROW(verify(a.string(), (a / "missing").string()), IoError);
    for (const auto &d : {a, b, bad})
        fs::remove_all(d);
}

TEST(Harness, SweepLocalSlopeIsOne)
{
    SweepConfig sc;
    sc.base.cp_int = 10;
    sc.base.n_iters = 20;
    sc.phases = {1};
    const auto out = sweep(sc);
    ASSERT_EQ(out.points.size(), 10u);
    for (std::size_t i = 0; i < out.points.size(); ++i)
    {
        const auto &p = out.points[i];
        EXPECT_TRUE(p.matches_baseline);
        EXPECT_TRUE(p.ledger_matches);
        EXPECT_EQ(p.metrics.recompute_iters_failed_rank, static_cast<Iter>(i + 1));
        EXPECT_EQ(p.metrics.recompute_iters_total, static_cast<Iter>(i + 1));
        EXPECT_GT(p.metrics.replayed_msgs, 0u);
    }
    std::istringstream csv(out.csv);
    std::string line;
    int lines = 0;
    while (std::getline(csv, line))
        ++lines;
    EXPECT_EQ(lines, 11);
}

TEST(Harness, SweepGlobalGrowsWithWorld)
{
    SweepConfig sc;
    sc.base.cp_int = 10;
    sc.base.n_iters = 20;
    sc.base.mode = RollbackPolicy::Global;
    sc.phases = {0};
    const auto out = sweep(sc);
    for (std::size_t i = 0; i < out.points.size(); ++i)
    {
        // Phase 0: every survivor detects in the failure iteration.
        EXPECT_EQ(out.points[i].metrics.recompute_iters_total, 16 * static_cast<Iter>(i + 1));
        EXPECT_TRUE(out.points[i].matches_baseline);
    }
}
