#include "mlsim/harness.hpp"

#include "mlsim/checkpoint.hpp"
#include "mlsim/error.hpp"

#include <json.hpp>

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mlsim
{
    namespace fs = std::filesystem;
    using nlohmann::ordered_json;

    FailureSpec parse_failure(const std::string &text)
    {
        FailureSpec f;
        char tail = 0;
        long long r = 0, i = 0, p = 0;
        if (std::sscanf(text.c_str(), "%lld:%lld:%lld%c", &r, &i, &p, &tail) != 3)
        {
            throw ConfigError("bad failure spec '" + text + "' (expected rank:iter:phase)");
        }
        f.rank = static_cast<Rank>(r);
        f.iter = static_cast<Iter>(i);
        f.phase = static_cast<int>(p);
        return f;
    }

    RunConfig RunConfig::resolved() const
    {
        RunConfig c = *this;
        if (c.n_procs < 1)
        {
            throw ConfigError("procs must be >= 1");
        }
        if (c.cp_int == 0)
        {
            c.cp_int = default_cp_int(c.kernel);
        }
        if (c.cp_int < 1)
        {
            throw ConfigError("cp_int must be >= 1");
        }
        if (c.n_iters == 0)
        {
            c.n_iters = 2 * c.cp_int;
        }
        if (c.n_iters < 1)
        {
            throw ConfigError("iters must be >= 1");
        }
        if (c.log_size == 0)
        {
            c.log_size = c.mode == RollbackPolicy::Hybrid ? std::max<Iter>(1, c.cp_int / 2) : c.cp_int;
        }
        if (c.mode == RollbackPolicy::Local && c.log_size != c.cp_int)
        {
            throw ConfigError("local mode requires log_size == cp_int");
        }
        if (c.log_size < 1 || c.log_size > c.cp_int)
        {
            throw ConfigError("log_size must lie in 1..cp_int");
        }
        for (const auto &f : c.failures)
        {
            if (f.iter < 1 || f.iter > c.n_iters)
            {
                throw ConfigError("failure iteration " + std::to_string(f.iter) + " outside 1.." +
                                  std::to_string(c.n_iters));
            }
            if (f.rank < 0 || f.rank >= c.n_procs)
            {
                throw ConfigError("failure rank " + std::to_string(f.rank) + " outside world");
            }
        }
        return c;
    }

    RunConfig config_from_json(const std::string &text)
    {
        ordered_json j;
        try
        {
            j = ordered_json::parse(text);
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!j.is_object())
        {
            throw ConfigError("config must be a JSON object");
        }
        RunConfig c;
        try
        {
            for (const auto &[key, v] : j.items())
            {
                if (key == "kernel")
                    c.kernel = parse_kernel(v.get<std::string>());
                else if (key == "procs")
                    c.n_procs = v.get<int>();
                else if (key == "iters")
                    c.n_iters = v.get<Iter>();
                else if (key == "seed")
                    c.seed = v.get<std::uint64_t>();
                else if (key == "cp_int")
                    c.cp_int = v.get<Iter>();
                else if (key == "log_size")
                    c.log_size = v.get<Iter>();
                else if (key == "mode")
                    c.mode = parse_policy(v.get<std::string>());
                else if (key == "fail")
                {
                    for (const auto &f : v)
                    {
                        c.failures.push_back(parse_failure(f.get<std::string>()));
                    }
                }
                else if (key == "out")
                    c.out_dir = v.get<std::string>();
                else if (key == "cg_n")
                    c.params.cg_n = v.get<int>();
                else if (key == "stencil_edge")
                    c.params.stencil_edge = v.get<int>();
                else
                    throw ConfigError("unknown config key '" + key + "'");
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(std::string("bad config value: ") + e.what());
        }
        return c;
    }

    std::string config_to_json(const RunConfig &c)
    {
        ordered_json j;
        j["kernel"] = kernel_name(c.kernel);
        j["procs"] = c.n_procs;
        j["iters"] = c.n_iters;
        j["seed"] = c.seed;
        j["cp_int"] = c.cp_int;
        j["log_size"] = c.log_size;
        j["mode"] = to_string(c.mode);
        auto fails = ordered_json::array();
        for (const auto &f : c.failures)
        {
            fails.push_back(std::to_string(f.rank) + ":" + std::to_string(f.iter) + ":" + std::to_string(f.phase));
        }
        j["fail"] = fails;
        j["cg_n"] = c.params.cg_n;
        j["stencil_edge"] = c.params.stencil_edge;
        return j.dump(2) + "\n";
    }

    std::string metric_hex(double v)
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016" PRIx64, std::bit_cast<std::uint64_t>(v));
        return buf;
    }

    std::string csv_header()
    {
        return "run_id,kernel,n_procs,cp_int,log_size,fail_rank,fail_iter,fail_phase,mode_taken,"
               "recompute_iters_total,recompute_iters_failed_rank,replayed_msgs,payload_bytes_peak,final_metric_hex";
    }

    std::string csv_row(const Metrics &m)
    {
        std::ostringstream os;
        os << m.run_id << ',' << m.kernel << ',' << m.n_procs << ',' << m.cp_int << ',' << m.log_size << ','
           << m.fail_rank << ',' << m.fail_iter << ',' << m.fail_phase << ',' << m.mode_taken << ','
           << m.recompute_iters_total << ',' << m.recompute_iters_failed_rank << ',' << m.replayed_msgs << ','
           << m.payload_bytes_peak << ',' << m.final_metric_hex;
        return os.str();
    }

    namespace
    {
        std::string join(const std::vector<std::string> &parts)
        {
            std::string out;
            for (std::size_t i = 0; i < parts.size(); ++i)
            {
                out += (i ? ";" : "") + parts[i];
            }
            return out;
        }

        std::string make_run_id(const RunConfig &c)
        {
            std::string id = kernel_name(c.kernel) + "-p" + std::to_string(c.n_procs) + "-s" + std::to_string(c.seed) +
                             "-i" + std::to_string(c.n_iters) + "-cp" + std::to_string(c.cp_int) + "-ls" +
                             std::to_string(c.log_size) + "-" + to_string(c.mode);
            for (const auto &f : c.failures)
            {
                id += "-f" + std::to_string(f.rank) + "." + std::to_string(f.iter) + "." + std::to_string(f.phase);
            }
            return id;
        }

        Metrics make_metrics(const RunConfig &c, const RunResult &res)
        {
            Metrics m;
            m.run_id = make_run_id(c);
            m.kernel = kernel_name(c.kernel);
            m.n_procs = c.n_procs;
            m.cp_int = c.cp_int;
            m.log_size = c.log_size;
            std::vector<std::string> ranks, iters, phases, modes;
            for (const auto &rec : res.recoveries)
            {
                for (const auto &f : rec.specs)
                {
                    ranks.push_back(std::to_string(f.rank));
                    iters.push_back(std::to_string(f.iter));
                    phases.push_back(std::to_string(f.phase));
                }
                modes.push_back(to_string(rec.mode));
            }
            m.fail_rank = join(ranks);
            m.fail_iter = join(iters);
            m.fail_phase = join(phases);
            if (!modes.empty())
            {
                m.mode_taken = join(modes);
            }
            m.recompute_iters_total = res.recompute_total;
            m.recompute_iters_failed_rank = res.recompute_failed;
            m.replayed_msgs = res.replayed;
            m.payload_bytes_peak = res.payload_bytes_peak;
            m.final_metric = res.metric;
            m.final_metric_hex = metric_hex(res.metric);
            return m;
        }

        void write_text(const fs::path &p, const std::string &text)
        {
            std::ofstream out(p, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw IoError("cannot write " + p.string());
            }
            out << text;
            if (!out)
            {
                throw IoError("short write to " + p.string());
            }
        }

        std::string read_text(const fs::path &p)
        {
            std::ifstream in(p, std::ios::binary);
            if (!in)
            {
                throw IoError("cannot read " + p.string());
            }
            std::ostringstream os;
            os << in.rdbuf();
            return os.str();
        }

        RuntimeConfig runtime_config(const RunConfig &c)
        {
            RuntimeConfig rc;
            rc.n_iters = c.n_iters;
            rc.cp_int = c.cp_int;
            rc.log_size = c.log_size;
            rc.policy = c.mode;
            rc.failures = c.failures;
            rc.seed = c.seed;
            rc.skip_replay = c.skip_replay;
            rc.no_transaction = c.no_transaction;
            rc.audit_logs = c.audit_logs;
            return rc;
        }
    }

    RunOutput run(const RunConfig &cfg)
    {
        RunOutput out;
        out.config = cfg.resolved();
        const RunConfig &c = out.config;
        out.trace = Trace(c.trace);
        auto factory = make_factory(c.kernel, c.n_procs, c.seed, c.params);

        std::unique_ptr<CheckpointStore> store;
        if (!c.out_dir.empty())
        {
            const fs::path ck_dir = fs::path(c.out_dir) / "checkpoints";
            std::error_code ec;
            fs::remove_all(ck_dir, ec);
            store = std::make_unique<FileCheckpointStore>(ck_dir);
        }
        else
        {
            store = std::make_unique<MemoryCheckpointStore>();
        }

        Runtime rt(factory, runtime_config(c), *store, &out.trace);
        out.result = rt.run();
        out.metrics = make_metrics(c, out.result);

        if (!c.out_dir.empty())
        {
            const fs::path dir(c.out_dir);
            write_text(dir / "config.json", config_to_json(c));
            write_text(dir / "metrics.csv", csv_header() + "\n" + csv_row(out.metrics) + "\n");
            write_text(dir / "trace.jsonl", out.trace.to_jsonl());
        }
        return out;
    }

    SweepOutput sweep(const SweepConfig &sc)
    {
        RunConfig base = sc.base.resolved();
        base.failures.clear();
        base.out_dir.clear();
        base.trace = false;

        SweepOutput out;
        const auto baseline = run(base);
        out.baseline = baseline.metrics;

        const Iter from = sc.from > 0 ? sc.from : base.cp_int + 1;
        const Iter to = sc.to > 0 ? sc.to : std::min(base.n_iters, base.cp_int + base.cp_int);
        std::vector<int> phases = sc.phases;
        if (phases.empty())
        {
            const int n = make_factory(base.kernel, base.n_procs, base.seed, base.params)->kill_phases();
            for (int p = 0; p < n; ++p)
            {
                phases.push_back(p);
            }
        }

        std::ostringstream csv;
        csv << csv_header() << "\n";
        for (Rank r : sc.ranks)
        {
            for (Iter it = from; it <= to; ++it)
            {
                for (int ph : phases)
                {
                    RunConfig c = base;
                    c.failures = {FailureSpec{r, it, ph}};
                    const auto o = run(c);
                    SweepPoint pt;
                    pt.failure = c.failures.front();
                    pt.metrics = o.metrics;
                    pt.matches_baseline = o.metrics.final_metric_hex == baseline.metrics.final_metric_hex;
                    pt.ledger_matches = o.result.ledger == baseline.result.ledger;
                    csv << csv_row(o.metrics) << "\n";
                    out.points.push_back(std::move(pt));
                }
            }
        }
        out.csv = csv.str();
        return out;
    }

    bool verify(const std::string &dir_a, const std::string &dir_b)
    {
        auto load = [](const std::string &dir) {
            const fs::path d(dir);
            const auto cfg = config_from_json(read_text(d / "config.json"));
            std::istringstream csv(read_text(d / "metrics.csv"));
            std::string header, row;
            std::getline(csv, header);
            std::getline(csv, row);
            if (header != csv_header() || row.empty())
            {
                throw IoError("malformed metrics.csv in " + dir);
            }
            return std::make_pair(cfg, row.substr(row.rfind(',') + 1));
        };
        const auto [ca, ha] = load(dir_a);
        const auto [cb, hb] = load(dir_b);
        if (ca.kernel != cb.kernel || ca.seed != cb.seed || ca.n_procs != cb.n_procs || ca.n_iters != cb.n_iters ||
            ca.params.cg_n != cb.params.cg_n || ca.params.stencil_edge != cb.params.stencil_edge)
        {
            throw ConfigError("runs are not comparable (kernel, seed, size, procs or iters differ)");
        }
        return ha == hb;
    }
}
