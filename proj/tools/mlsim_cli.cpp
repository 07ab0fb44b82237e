#include "mlsim/error.hpp"
#include "mlsim/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mlsim;

namespace
{
    struct Flags
    {
        std::string config;
        std::string kernel;
        int procs = 0;
        Iter iters = 0;
        std::uint64_t seed = 0;
        Iter cp_int = 0;
        Iter log_size = 0;
        std::string mode;
        std::vector<std::string> fails;
        std::string out;
    };

    void add_common(CLI::App *cmd, Flags &f)
    {
        cmd->add_option("--config", f.config, "JSON file with the same keys; flags override");
        cmd->add_option("--kernel", f.kernel, "cg or stencil");
        cmd->add_option("--procs", f.procs, "number of virtual processes");
        cmd->add_option("--iters", f.iters, "total iterations (default: 2 checkpoint intervals)");
        cmd->add_option("--seed", f.seed, "problem seed");
        cmd->add_option("--cp-int", f.cp_int, "checkpoint interval");
        cmd->add_option("--log-size", f.log_size, "iterations of payloads kept after a checkpoint");
        cmd->add_option("--mode", f.mode, "local, global or hybrid");
        cmd->add_option("--out", f.out, "output directory");
    }

    RunConfig build_config(const Flags &f)
    {
        RunConfig c;
        if (!f.config.empty())
        {
            std::ifstream in(f.config);
            if (!in)
            {
                throw IoError("cannot read " + f.config);
            }
            std::ostringstream os;
            os << in.rdbuf();
            c = config_from_json(os.str());
        }
        if (!f.kernel.empty())
            c.kernel = parse_kernel(f.kernel);
        if (f.procs != 0)
            c.n_procs = f.procs;
        if (f.iters != 0)
            c.n_iters = f.iters;
        if (f.seed != 0)
            c.seed = f.seed;
        if (f.cp_int != 0)
            c.cp_int = f.cp_int;
        if (f.log_size != 0)
            c.log_size = f.log_size;
        if (!f.mode.empty())
            c.mode = parse_policy(f.mode);
        if (!f.fails.empty())
        {
            c.failures.clear();
            for (const auto &s : f.fails)
            {
                c.failures.push_back(parse_failure(s));
            }
        }
        if (!f.out.empty())
            c.out_dir = f.out;
        return c;
    }

    int cmd_run(const Flags &f)
    {
        RunConfig cfg = build_config(f);
        if (!cfg.out_dir.empty())
        {
            std::filesystem::create_directories(cfg.out_dir);
        }
        const auto out = run(cfg);
        std::cout << csv_header() << "\n" << csv_row(out.metrics) << "\n";

        RunConfig base = out.config;
        base.failures.clear();
        base.out_dir.clear();
        base.trace = false;
        const auto ref = run(base);
        if (ref.metrics.final_metric_hex != out.metrics.final_metric_hex)
        {
            throw VerificationError("final metric " + out.metrics.final_metric_hex + " differs from fault-free " +
                                    ref.metrics.final_metric_hex);
        }
        if (ref.result.ledger != out.result.ledger)
        {
            throw VerificationError("delivered-message ledger differs from the fault-free run");
        }
        return 0;
    }

    int cmd_sweep(const Flags &f, const std::vector<Rank> &ranks, Iter from, Iter to, const std::vector<int> &phases)
    {
        SweepConfig sc;
        sc.base = build_config(f);
        if (!ranks.empty())
            sc.ranks = ranks;
        sc.from = from;
        sc.to = to;
        sc.phases = phases;
        const auto out = sweep(sc);
        if (!sc.base.out_dir.empty())
        {
            std::filesystem::create_directories(sc.base.out_dir);
            std::ofstream csv(std::filesystem::path(sc.base.out_dir) / "metrics.csv", std::ios::binary);
            if (!csv)
            {
                throw IoError("cannot write sweep csv");
            }
            csv << out.csv;
        }
        std::cout << out.csv;
        int bad = 0;
        for (const auto &p : out.points)
        {
            if (!p.matches_baseline || !p.ledger_matches)
            {
                std::cerr << "mismatch at " << p.failure.rank << ":" << p.failure.iter << ":" << p.failure.phase
                          << "\n";
                ++bad;
            }
        }
        if (bad > 0)
        {
            throw VerificationError(std::to_string(bad) + " sweep point(s) differ from the fault-free run");
        }
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Message-logging local rollback simulator"};
    app.require_subcommand(1);

    Flags run_flags;
    auto *run_cmd = app.add_subcommand("run", "run one simulation and check it against a fault-free run");
    add_common(run_cmd, run_flags);
    run_cmd->add_option("--fail", run_flags.fails, "failure rank:iter:phase (repeatable)");

    Flags sweep_flags;
    std::vector<Rank> sweep_ranks;
    Iter sweep_from = 0, sweep_to = 0;
    std::vector<int> sweep_phases;
    auto *sweep_cmd = app.add_subcommand("sweep", "one run per failure point, CSV to stdout");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--fail-rank", sweep_ranks, "rank to crash (repeatable, default 2)");
    sweep_cmd->add_option("--from", sweep_from, "first failure iteration (default cp_int + 1)");
    sweep_cmd->add_option("--to", sweep_to, "last failure iteration (default 2 * cp_int)");
    sweep_cmd->add_option("--phases", sweep_phases, "kill phases (default all)")->delimiter(',');

    std::string dir_a, dir_b;
    auto *verify_cmd = app.add_subcommand("verify", "compare final metrics of two run directories");
    verify_cmd->add_option("dir_a", dir_a)->required();
    verify_cmd->add_option("dir_b", dir_b)->required();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try
    {
        if (*run_cmd)
        {
            return cmd_run(run_flags);
        }
        if (*sweep_cmd)
        {
            return cmd_sweep(sweep_flags, sweep_ranks, sweep_from, sweep_to, sweep_phases);
        }
        if (verify(dir_a, dir_b))
        {
            std::cout << "match\n";
            return 0;
        }
        std::cout << "mismatch\n";
        return exit_code(ErrorKind::Verification);
    }
    catch (const Error &e)
    {
        std::cerr << "mlsim: " << e.what() << "\n";
        return exit_code(e.kind());
    }
    catch (const std::exception &e)
    {
        std::cerr << "mlsim: " << e.what() << "\n";
        return 1;
    }
}
