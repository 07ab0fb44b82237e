#pragma once

#include "mlsim/kernel.hpp"
#include "mlsim/runtime.hpp"
#include "mlsim/trace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlsim
{
    struct RunConfig
    {
        KernelId kernel = KernelId::Cg;
        int n_procs = 16;
        Iter n_iters = 0;  // 0: two checkpoint intervals
        std::uint64_t seed = 1;
        Iter cp_int = 0;   // 0: kernel default (cg 25, stencil 20)
        Iter log_size = 0; // 0: cp_int, or cp_int / 2 in hybrid mode
        RollbackPolicy mode = RollbackPolicy::Local;
        std::vector<FailureSpec> failures;
        std::string out_dir; // empty: nothing written, checkpoints in memory
        KernelParams params;
        bool trace = true;

        bool skip_replay = false;
        bool no_transaction = false;
        bool audit_logs = false;

        // Defaults filled in and constraints checked; throws ConfigError.
        RunConfig resolved() const;
    };

    // Reads the JSON config format (same keys as the CLI flags, snake_case).
    RunConfig config_from_json(const std::string &text);
    std::string config_to_json(const RunConfig &cfg);
    FailureSpec parse_failure(const std::string &text);

    struct Metrics
    {
        std::string run_id;
        std::string kernel;
        int n_procs = 0;
        Iter cp_int = 0;
        Iter log_size = 0;
        std::string fail_rank;
        std::string fail_iter;
        std::string fail_phase;
        std::string mode_taken = "none";
        Iter recompute_iters_total = 0;
        Iter recompute_iters_failed_rank = 0;
        std::uint64_t replayed_msgs = 0;
        std::size_t payload_bytes_peak = 0;
        std::string final_metric_hex;
        double final_metric = 0.0;
    };

    std::string csv_header();
    std::string csv_row(const Metrics &m);
    std::string metric_hex(double v);

    struct RunOutput
    {
        RunConfig config; // resolved
        Metrics metrics;
        RunResult result;
        Trace trace;
    };

    RunOutput run(const RunConfig &cfg);

    struct SweepConfig
    {
        RunConfig base;
        std::vector<Rank> ranks{2};
        Iter from = 0;           // 0: first iteration after the first checkpoint
        Iter to = 0;             // 0: the end of that interval
        std::vector<int> phases; // empty: every kill phase of the kernel
    };

    struct SweepPoint
    {
        FailureSpec failure;
        Metrics metrics;
        bool matches_baseline = false;
        bool ledger_matches = false;
    };

    struct SweepOutput
    {
        Metrics baseline;
        std::vector<SweepPoint> points;
        std::string csv; // header + one row per point
    };

    SweepOutput sweep(const SweepConfig &cfg);

    // Compares the final metric bit patterns recorded in two run directories.
    bool verify(const std::string &dir_a, const std::string &dir_b);
}
