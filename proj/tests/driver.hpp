#pragma once

#include "mlsim/kernel.hpp"
#include "mlsim/runtime.hpp"

#include <map>
#include <tuple>

namespace mlsim::testing
{
    // Inbound payloads of a fault-free run, keyed by (rank, iteration, receive op).
    struct Recording
    {
        std::map<std::tuple<Rank, Iter, std::size_t>, Bytes> inbound;
    };

    Recording record_run(std::shared_ptr<const KernelFactory> factory, Iter n_iters, Iter cp_int);

    // Executes iteration `label` of one kernel in isolation, feeding the
    // recorded messages. With abort_after_phase >= 0 the iteration stops after
    // the last operation of that communication phase and is aborted.
    // Returns false if the iteration was aborted.
    bool run_iteration(KernelProcess &k, const Recording &rec, Iter label, int abort_after_phase = -1);

    // Brings a fresh kernel to `iters` committed iterations.
    void advance_to(KernelProcess &k, const Recording &rec, Iter iters);
}
