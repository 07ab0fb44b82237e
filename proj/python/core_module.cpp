// Python bindings: runs, sweeps and verification driven by the JSON config format.

#include "mlsim/error.hpp"
#include "mlsim/harness.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mlsim;

namespace
{
    py::dict metrics_dict(const Metrics &m)
    {
        py::dict d;
        d["run_id"] = m.run_id;
        d["kernel"] = m.kernel;
        d["n_procs"] = m.n_procs;
        d["cp_int"] = m.cp_int;
        d["log_size"] = m.log_size;
        d["fail_rank"] = m.fail_rank;
        d["fail_iter"] = m.fail_iter;
        d["fail_phase"] = m.fail_phase;
        d["mode_taken"] = m.mode_taken;
        d["recompute_iters_total"] = m.recompute_iters_total;
        d["recompute_iters_failed_rank"] = m.recompute_iters_failed_rank;
        d["replayed_msgs"] = m.replayed_msgs;
        d["payload_bytes_peak"] = m.payload_bytes_peak;
        d["final_metric_hex"] = m.final_metric_hex;
        d["final_metric"] = m.final_metric;
        return d;
    }

    py::dict run_json(const std::string &text, bool with_trace)
    {
        RunConfig cfg = config_from_json(text);
        cfg.trace = with_trace;
        RunOutput out;
        {
            py::gil_scoped_release release;
            out = run(cfg);
        }
        py::dict d;
        d["metrics"] = metrics_dict(out.metrics);
        py::list recs;
        for (const auto &r : out.result.recoveries)
        {
            py::dict rd;
            rd["failed"] = r.failed;
            rd["front"] = r.front.iters;
            rd["mode"] = to_string(r.mode);
            rd["checkpoint_iter"] = r.checkpoint_iter;
            rd["detect_iter"] = r.detect_iter;
            rd["replayed"] = r.replayed;
            recs.append(rd);
        }
        d["recoveries"] = recs;
        d["payload_bytes_peak_per_rank"] = out.result.payload_bytes_peak_per_rank;
        if (with_trace)
            d["trace"] = out.trace.to_jsonl();
        return d;
    }

    py::dict sweep_json(const std::string &text, const std::vector<Rank> &ranks, Iter from, Iter to,
                        const std::vector<int> &phases)
    {
        SweepConfig sc;
        sc.base = config_from_json(text);
        sc.base.trace = false;
        if (!ranks.empty())
            sc.ranks = ranks;
        sc.from = from;
        sc.to = to;
        sc.phases = phases;
        SweepOutput out;
        {
            py::gil_scoped_release release;
            out = sweep(sc);
        }
        py::list points;
        for (const auto &p : out.points)
        {
            py::dict pd = metrics_dict(p.metrics);
            pd["matches_baseline"] = p.matches_baseline;
            pd["ledger_matches"] = p.ledger_matches;
            points.append(pd);
        }
        py::dict d;
        d["baseline"] = metrics_dict(out.baseline);
        d["points"] = points;
        d["csv"] = out.csv;
        return d;
    }
}

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Message-logging rollback recovery simulator";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<ConfigError> config(m, "ConfigError", base.ptr());
    static py::exception<IoError> io(m, "IoError", base.ptr());
    static py::exception<VerificationError> verification(m, "VerificationError", base.ptr());
    static py::exception<ProtocolError> protocol(m, "ProtocolError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try
        {
            if (p)
                std::rethrow_exception(p);
        }
        catch (const ConfigError &e)
        {
            PyErr_SetString(config.ptr(), e.what());
        }
        catch (const IoError &e)
        {
            PyErr_SetString(io.ptr(), e.what());
        }
        catch (const VerificationError &e)
        {
            PyErr_SetString(verification.ptr(), e.what());
        }
        catch (const ProtocolError &e)
        {
            PyErr_SetString(protocol.ptr(), e.what());
        }
        catch (const Error &e)
        {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    m.def("run_json", &run_json, py::arg("config"), py::arg("trace") = false);
    m.def("sweep_json", &sweep_json, py::arg("config"), py::arg("ranks") = std::vector<Rank>{},
          py::arg("from_iter") = 0, py::arg("to_iter") = 0, py::arg("phases") = std::vector<int>{});
    m.def("verify", [](const std::string &a, const std::string &b) { return verify(a, b); }, py::arg("dir_a"),
          py::arg("dir_b"));
    m.def("csv_header", &csv_header);
}
