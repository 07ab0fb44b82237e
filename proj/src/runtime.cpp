#include "mlsim/runtime.hpp"

#include "mlsim/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlsim
{
    RollbackPolicy parse_policy(const std::string &name)
    {
        if (name == "local")
        {
            return RollbackPolicy::Local;
        }
        if (name == "global")
        {
            return RollbackPolicy::Global;
        }
        if (name == "hybrid")
        {
            return RollbackPolicy::Hybrid;
        }
        throw ConfigError("unknown mode '" + name + "' (expected local, global or hybrid)");
    }

    const char *to_string(RollbackPolicy p) noexcept
    {
        switch (p)
        {
        case RollbackPolicy::Local:
            return "local";
        case RollbackPolicy::Global:
            return "global";
        case RollbackPolicy::Hybrid:
            return "hybrid";
        }
        return "?";
    }

    Runtime::Runtime(std::shared_ptr<const KernelFactory> factory, RuntimeConfig cfg, CheckpointStore &store,
                     Trace *trace, RunObserver *observer)
        : m_factory(std::move(factory)), m_cfg(std::move(cfg)), m_store(store), m_trace(trace), m_observer(observer),
          m_world(WorldConfig{m_factory->n_procs(), m_cfg.n_iters, m_factory->kill_phases(), m_cfg.seed}, trace)
    {
        if (m_cfg.cp_int < 1)
        {
            throw ConfigError("cp_int must be >= 1");
        }
        if (m_cfg.log_size < 1 || m_cfg.log_size > m_cfg.cp_int)
        {
            throw ConfigError("log_size must lie in 1..cp_int");
        }
        const int n = m_factory->n_procs();
        m_procs.resize(static_cast<std::size_t>(n));
        for (Rank r = 0; r < n; ++r)
        {
            auto &p = m_procs[static_cast<std::size_t>(r)];
            p.kernel = m_factory->make(r);
            p.kernel->set_bypass(m_cfg.no_transaction);
            p.proto = ProtocolState(r, n, m_cfg.cp_int, m_cfg.log_size, 0);
            p.schedule = send_schedule(p.kernel->program());
            int k = 0;
            for (const auto &op : p.kernel->program())
            {
                p.send_index.push_back(op.kind == OpKind::Send ? k++ : -1);
            }
        }
        for (const auto &f : m_cfg.failures)
        {
            m_world.inject_failure(f);
        }
    }

    Runtime::~Runtime() = default;

    bool Runtime::barrier_needed(const Proc &p, Iter c) const noexcept
    {
        if (p.passed_barrier == c)
        {
            return false;
        }
        return c == m_cfg.n_iters || (c > 0 && c % m_cfg.cp_int == 0 && c > m_valid_gen);
    }

    void Runtime::start_iteration(Rank r)
    {
        auto &p = m_procs[static_cast<std::size_t>(r)];
        p.kernel->begin();
        p.pc = 0;
        p.label = p.kernel->iter() + 1;
        p.stage = Stage::InIter;
        ++m_result.work_units;
        m_world.record(r, "begin", kNoRank, p.label, -1, "open");
    }

    void Runtime::detect(Rank r)
    {
        auto &p = m_procs[static_cast<std::size_t>(r)];
        p.stage = Stage::Detected;
        p.detect_iter = p.kernel->iter() + (p.kernel->open() ? 1 : 0);
        m_world.set_current_iter(r, p.kernel->iter());
        m_world.record(r, "detect", kNoRank, p.detect_iter, -1, "failure");
    }

    void Runtime::kill(Rank r, int phase)
    {
        auto &p = m_procs[static_cast<std::size_t>(r)];
        p.detect_iter = p.kernel->iter() + (p.kernel->open() ? 1 : 0);
        p.stage = Stage::Dead;
        p.peak = std::max(p.peak, p.proto.log().bytes_peak());
        m_world.kill(r, p.label, phase);
        m_fired.push_back(FailureSpec{r, p.label, phase});
    }

    bool Runtime::advance(Rank r)
    {
        auto &p = m_procs[static_cast<std::size_t>(r)];
        bool progressed = false;
        for (;;)
        {
            switch (p.stage)
            {
            case Stage::Dead:
            case Stage::Done:
            case Stage::Detected:
                return progressed;
            case Stage::Boundary:
            {
                const Iter c = p.kernel->iter();
                m_world.set_current_iter(r, c);
                if (barrier_needed(p, c))
                {
                    m_world.barrier_arrive(r, c);
                    p.barrier = c;
                    p.stage = Stage::Barrier;
                }
                else
                {
                    start_iteration(r);
                }
                progressed = true;
                break;
            }
            case Stage::Barrier:
            {
                const auto st = m_world.barrier_poll(r, p.barrier);
                if (st == RecvStatus::Pending)
                {
                    return progressed;
                }
                if (st == RecvStatus::FailureDetected)
                {
                    detect(r);
                    return true;
                }
                const Iter c = p.barrier;
                if (c > 0 && c % m_cfg.cp_int == 0 && c > m_valid_gen)
                {
                    write_checkpoints(c);
                }
                p.passed_barrier = c;
                if (c == m_cfg.n_iters)
                {
                    p.stage = Stage::Done;
                    m_world.record(r, "done", kNoRank, c, -1, "ok");
                    return true;
                }
                start_iteration(r);
                return true;
            }
            case Stage::InIter:
            {
                const auto &prog = p.kernel->program();
                const Op &op = prog[p.pc];
                switch (op.kind)
                {
                case OpKind::Compute:
                    if (op.phase >= 0 && m_world.take_failure(r, p.label, op.phase))
                    {
                        kill(r, op.phase);
                        return true;
                    }
                    p.kernel->compute(op.slot, p.label);
                    break;
                case OpKind::Send:
                {
                    const auto &s = p.schedule[static_cast<std::size_t>(p.send_index[p.pc])];
                    auto *k = p.kernel.get();
                    const Iter label = p.label;
                    const int slot = op.slot;
                    const auto res = p.proto.send(m_world, s, label, [k, slot, label] { return k->payload(slot, label); });
                    if (res.outcome == SendOutcome::RevokedError)
                    {
                        detect(r);
                        return true;
                    }
                    break;
                }
                case OpKind::Recv:
                {
                    auto out = m_world.post_recv(r, op.peer, op.tag, p.label, op.phase);
                    if (out.status == RecvStatus::Pending)
                    {
                        return progressed;
                    }
                    if (out.status == RecvStatus::FailureDetected)
                    {
                        detect(r);
                        return true;
                    }
                    if (out.message.iter != p.label)
                    {
                        throw ProtocolError("rank " + std::to_string(r) + " in iteration " + std::to_string(p.label) +
                                            " received a message of iteration " + std::to_string(out.message.iter) +
                                            " from rank " + std::to_string(op.peer));
                    }
                    if (m_observer != nullptr)
                    {
                        m_observer->on_deliver(r, p.label, p.pc, out.message);
                    }
                    p.kernel->deliver(op.slot, out.message.payload, p.label);
                    p.staged.push_back(DeliveryKey{out.message.src, r, out.message.iter, out.message.seq});
                    break;
                }
                case OpKind::Commit:
                    p.kernel->commit();
                    p.proto.on_commit(p.kernel->iter());
                    p.ledger.insert(p.ledger.end(), p.staged.begin(), p.staged.end());
                    p.staged.clear();
                    m_world.set_current_iter(r, p.kernel->iter());
                    m_world.record(r, "commit", kNoRank, p.kernel->iter(), -1, "ok");
                    if (m_observer != nullptr)
                    {
                        m_observer->on_commit(r, p.kernel->iter(), *p.kernel);
                    }
                    break;
                }
                progressed = true;
                ++p.pc;
                if (p.pc == prog.size())
                {
                    p.stage = Stage::Boundary;
                    return true;
                }
                // A scheduler slice ends with the last operation of a
                // communication phase.
                const bool comm = op.kind == OpKind::Send || op.kind == OpKind::Recv;
                const Op &next = prog[p.pc];
                const bool next_comm = next.kind == OpKind::Send || next.kind == OpKind::Recv;
                if (comm && (!next_comm || next.phase != op.phase))
                {
                    return true;
                }
                break;
            }
            }
        }
    }

    void Runtime::write_checkpoints(Iter c)
    {
        const auto id = m_factory->id();
        for (Rank r = 0; r < m_world.n_procs(); ++r)
        {
            auto &p = m_procs[static_cast<std::size_t>(r)];
            if (p.kernel->iter() != c || p.kernel->open())
            {
                throw ProtocolError("checkpoint " + std::to_string(c) + " taken while rank " + std::to_string(r) +
                                    " is not at the boundary");
            }
            m_store.write(Checkpoint{r, c, id, p.kernel->serialize()});
        }
        m_valid_gen = c;
        for (auto &p : m_procs)
        {
            p.proto.on_checkpoint(c);
        }
        m_world.record(kNoRank, "checkpoint", kNoRank, c, -1, "written");
    }

    void Runtime::load_state(Rank r, bool fresh_kernel)
    {
        auto &p = m_procs[static_cast<std::size_t>(r)];
        if (fresh_kernel)
        {
            p.kernel = m_factory->make(r);
            p.kernel->set_bypass(m_cfg.no_transaction);
        }
        if (m_valid_gen > 0)
        {
            const auto ck = m_store.read(m_factory->id(), r);
            if (ck.iter != m_valid_gen || ck.rank != r)
            {
                throw ProtocolError("checkpoint of rank " + std::to_string(r) + " holds iteration " +
                                    std::to_string(ck.iter) + ", expected " + std::to_string(m_valid_gen));
            }
            p.kernel->deserialize(ck.state, ck.iter);
        }
        p.peak = std::max(p.peak, p.proto.log().bytes_peak());
        p.proto = ProtocolState(r, m_world.n_procs(), m_cfg.cp_int, m_cfg.log_size, m_valid_gen);
        std::erase_if(p.ledger, [this](const DeliveryKey &k) { return k.iter > m_valid_gen; });
        p.staged.clear();
        p.stage = Stage::Boundary;
        p.passed_barrier = -1;
        m_world.set_current_iter(r, m_valid_gen);
    }

    void Runtime::recover()
    {
        const int n = m_world.n_procs();
        RecoveryRecord rec;
        rec.failed = m_world.dead_ranks();
        rec.specs = m_fired;
        m_fired.clear();
        rec.checkpoint_iter = m_valid_gen;
        rec.detect_iter.resize(static_cast<std::size_t>(n));
        rec.recompute.assign(static_cast<std::size_t>(n), 0);

        for (Rank r = 0; r < n; ++r)
        {
            auto &p = m_procs[static_cast<std::size_t>(r)];
            rec.detect_iter[static_cast<std::size_t>(r)] = p.detect_iter;
            if (p.stage == Stage::Dead)
            {
                continue;
            }
            if (p.kernel->open())
            {
                p.proto.log().discard_from(p.kernel->iter() + 1);
                p.kernel->abort();
            }
            p.staged.clear();
            p.stage = Stage::Boundary;
            p.passed_barrier = -1;
        }

        m_world.recover();
        rec.epoch = m_world.epoch();
        for (Rank f : rec.failed)
        {
            load_state(f, true);
        }

        rec.front = gather_front_line(m_world);
        switch (m_cfg.policy)
        {
        case RollbackPolicy::Local:
            rec.mode = RollbackMode::Local;
            break;
        case RollbackPolicy::Global:
            rec.mode = RollbackMode::Global;
            break;
        case RollbackPolicy::Hybrid:
            rec.mode = decide_rollback(rec.front, m_valid_gen, m_cfg.log_size);
            break;
        }
        m_world.record(kNoRank, "rollback", kNoRank, rec.front.maxit, -1, to_string(rec.mode));

        if (rec.mode == RollbackMode::Local)
        {
            for (auto &p : m_procs)
            {
                p.proto.peer_iters() = rec.front.iters;
            }
            if (!m_cfg.skip_replay)
            {
                for (Rank r = 0; r < n; ++r)
                {
                    auto &p = m_procs[static_cast<std::size_t>(r)];
                    rec.replayed += replay(p.proto, m_world, rec.front, p.schedule);
                }
            }
            for (Rank f : rec.failed)
            {
                rec.recompute[static_cast<std::size_t>(f)] = rec.detect_iter[static_cast<std::size_t>(f)] - m_valid_gen;
            }
        }
        else
        {
            for (Rank r = 0; r < n; ++r)
            {
                const bool failed = std::find(rec.failed.begin(), rec.failed.end(), r) != rec.failed.end();
                if (!failed)
                {
                    load_state(r, true);
                }
                rec.recompute[static_cast<std::size_t>(r)] = rec.detect_iter[static_cast<std::size_t>(r)] - m_valid_gen;
            }
        }

        for (Rank r = 0; r < n; ++r)
        {
            const Iter rc = rec.recompute[static_cast<std::size_t>(r)];
            m_result.recompute_total += rc;
            if (std::find(rec.failed.begin(), rec.failed.end(), r) != rec.failed.end())
            {
                m_result.recompute_failed += rc;
            }
        }
        m_result.replayed += rec.replayed;
        if (m_observer != nullptr)
        {
            m_observer->on_recovery(rec);
        }
        m_result.recoveries.push_back(std::move(rec));
    }

    void Runtime::audit()
    {
        for (Rank r = 0; r < m_world.n_procs(); ++r)
        {
            const auto &p = m_procs[static_cast<std::size_t>(r)];
            if (p.stage == Stage::Dead)
            {
                continue;
            }
            auto msg = p.proto.log().audit();
            if (!msg.empty())
            {
                m_result.audit_failures.push_back("step " + std::to_string(m_world.step()) + " rank " +
                                                  std::to_string(r) + ": " + msg);
            }
        }
    }

    RunResult Runtime::run()
    {
        const int n = m_world.n_procs();
        for (;;)
        {
            bool progress = false;
            for (Rank r = 0; r < n; ++r)
            {
                progress = advance(r) || progress;
            }
            m_world.advance_step();
            ++m_result.rounds;
            if (m_cfg.audit_logs)
            {
                audit();
            }

            bool all_done = true;
            bool any_detected = false;
            bool all_alive_detected = true;
            for (const auto &p : m_procs)
            {
                all_done = all_done && p.stage == Stage::Done;
                if (p.stage == Stage::Detected)
                {
                    any_detected = true;
                }
                else if (p.stage != Stage::Dead)
                {
                    all_alive_detected = false;
                }
            }
            if (all_done)
            {
                break;
            }
            if (any_detected && all_alive_detected)
            {
                recover();
                continue;
            }
            if (!progress)
            {
                if (!m_world.any_dead())
                {
                    throw ProtocolError("deadlock: no process can make progress");
                }
                if (m_world.detector_armed())
                {
                    throw ProtocolError("deadlock: failure detector armed but nobody observed the failure");
                }
                m_world.arm_detector();
            }
        }
        m_world.mark_finished();

        m_result.metric = m_procs[static_cast<std::size_t>(m_factory->metric_rank())].kernel->metric();
        m_result.payload_bytes_peak_per_rank.resize(static_cast<std::size_t>(n));
        for (Rank r = 0; r < n; ++r)
        {
            auto &p = m_procs[static_cast<std::size_t>(r)];
            p.peak = std::max(p.peak, p.proto.log().bytes_peak());
            m_result.payload_bytes_peak_per_rank[static_cast<std::size_t>(r)] = p.peak;
            m_result.payload_bytes_peak = std::max(m_result.payload_bytes_peak, p.peak);
            m_result.ledger.insert(m_result.ledger.end(), p.ledger.begin(), p.ledger.end());
        }
        std::sort(m_result.ledger.begin(), m_result.ledger.end());
        return std::move(m_result);
    }
}
