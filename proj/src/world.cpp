#include "mlsim/world.hpp"

#include "mlsim/error.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mlsim
{
    World::World(WorldConfig cfg, Trace *trace) : m_cfg(cfg), m_trace(trace)
    {
        if (cfg.n_procs < 1)
        {
            throw ConfigError("world needs at least one process");
        }
        if (cfg.n_iters < 1)
        {
            throw ConfigError("world needs at least one iteration");
        }
        m_procs.resize(static_cast<std::size_t>(cfg.n_procs));
        for (Rank r = 0; r < cfg.n_procs; ++r)
        {
            m_procs[static_cast<std::size_t>(r)].rank = r;
        }
    }

    void World::check_rank(Rank r) const
    {
        if (r < 0 || r >= m_cfg.n_procs)
        {
            throw std::out_of_range("rank " + std::to_string(r) + " outside world");
        }
    }

    VirtualProcess &World::proc(Rank r)
    {
        check_rank(r);
        return m_procs[static_cast<std::size_t>(r)];
    }

    const VirtualProcess &World::process(Rank r) const
    {
        check_rank(r);
        return m_procs[static_cast<std::size_t>(r)];
    }

    void World::set_current_iter(Rank r, Iter it)
    {
        proc(r).current_iter = it;
    }

    std::vector<Rank> World::dead_ranks() const
    {
        std::vector<Rank> out;
        for (const auto &p : m_procs)
        {
            if (!p.alive())
            {
                out.push_back(p.rank);
            }
        }
        return out;
    }

    bool World::any_dead() const
    {
        return std::any_of(m_procs.begin(), m_procs.end(), [](const VirtualProcess &p) { return !p.alive(); });
    }

    void World::record(Rank rank, const char *op, Rank peer, Iter iter, int phase, const char *outcome)
    {
        if (m_trace != nullptr)
        {
            m_trace->record(TraceEvent{m_step, rank, op, peer, iter, phase, outcome});
        }
    }

    RecvStatus World::observe_failure(Rank r)
    {
        auto &p = proc(r);
        p.observed_revocation = true;
        m_revoked = true;
        return RecvStatus::FailureDetected;
    }

    SendOutcome World::post_send(Rank src, Rank dst, int tag, Bytes payload, Iter iter, int seq, int phase)
    {
        auto &s = proc(src);
        if (!s.alive())
        {
            throw std::logic_error("send from dead rank " + std::to_string(src));
        }
        if (s.observed_revocation || m_revoked)
        {
            // The sender learns about the revocation here.
            observe_failure(src);
            record(src, "send", dst, iter, phase, "revoked");
            return SendOutcome::RevokedError;
        }
        auto &d = proc(dst);
        if (!d.alive())
        {
            record(src, "send", dst, iter, phase, "lost");
            return SendOutcome::Buffered;
        }
        d.inbox[{src, tag}].push_back(Message{src, dst, tag, iter, seq, std::move(payload), m_epoch});
        record(src, "send", dst, iter, phase, "buffered");
        return SendOutcome::Buffered;
    }

    RecvOutcome World::post_recv(Rank dst, Rank src, int tag, Iter iter, int phase)
    {
        auto &d = proc(dst);
        if (!d.alive())
        {
            throw std::logic_error("recv on dead rank " + std::to_string(dst));
        }
        if (d.observed_revocation || m_revoked)
        {
            observe_failure(dst);
            record(dst, "recv", src, iter, phase, "failure");
            return {RecvStatus::FailureDetected, {}};
        }
        auto it = d.inbox.find({src, tag});
        if (it != d.inbox.end() && !it->second.empty())
        {
            RecvOutcome out{RecvStatus::Data, std::move(it->second.front())};
            it->second.pop_front();
            record(dst, "recv", src, out.message.iter, phase, "data");
            return out;
        }
        if (!proc(src).alive() && m_detector_armed)
        {
            observe_failure(dst);
            record(dst, "recv", src, iter, phase, "failure");
            return {RecvStatus::FailureDetected, {}};
        }
        return {RecvStatus::Pending, {}};
    }

    void World::barrier_arrive(Rank r, Iter id)
    {
        auto &flags = m_barriers[id];
        flags.resize(static_cast<std::size_t>(m_cfg.n_procs), false);
        flags[static_cast<std::size_t>(r)] = true;
        record(r, "barrier", kNoRank, id, -1, "arrive");
    }

    bool World::barrier_complete(Iter id) const
    {
        auto it = m_barriers.find(id);
        if (it == m_barriers.end())
        {
            return false;
        }
        return std::all_of(it->second.begin(), it->second.end(), [](bool b) { return b; });
    }

    RecvStatus World::barrier_poll(Rank r, Iter id)
    {
        auto &p = proc(r);
        if (!p.alive())
        {
            throw std::logic_error("barrier on dead rank " + std::to_string(r));
        }
        if (p.observed_revocation || m_revoked)
        {
            record(r, "barrier", kNoRank, id, -1, "failure");
            return observe_failure(r);
        }
        if (barrier_complete(id))
        {
            return RecvStatus::Data;
        }
        if (any_dead() && m_detector_armed)
        {
            record(r, "barrier", kNoRank, id, -1, "failure");
            return observe_failure(r);
        }
        return RecvStatus::Pending;
    }

    void World::inject_failure(const FailureSpec &spec)
    {
        if (m_finished)
        {
            throw ConfigError("failure injected into a finished run");
        }
        if (spec.rank < 0 || spec.rank >= m_cfg.n_procs)
        {
            throw ConfigError("failure rank " + std::to_string(spec.rank) + " outside world");
        }
        if (!process(spec.rank).alive())
        {
            throw ConfigError("failure rank " + std::to_string(spec.rank) + " is not alive");
        }
        if (spec.iter < 1 || spec.iter > m_cfg.n_iters)
        {
            throw ConfigError("failure iteration " + std::to_string(spec.iter) + " outside 1.." +
                              std::to_string(m_cfg.n_iters));
        }
        if (spec.phase < 0 || spec.phase >= m_cfg.n_phases)
        {
            throw ConfigError("failure phase " + std::to_string(spec.phase) + " outside 0.." +
                              std::to_string(m_cfg.n_phases - 1));
        }
        m_pending.push_back(spec);
    }

    bool World::take_failure(Rank r, Iter iter, int phase)
    {
        auto it = std::find(m_pending.begin(), m_pending.end(), FailureSpec{r, iter, phase});
        if (it == m_pending.end())
        {
            return false;
        }
        m_pending.erase(it);
        return true;
    }

    void World::kill(Rank r, Iter iter, int phase)
    {
        auto &p = proc(r);
        p.status = ProcStatus::Dead;
        record(r, "kill", kNoRank, iter, phase, "dead");
    }

    void World::arm_detector()
    {
        m_detector_armed = true;
    }

    void World::recover()
    {
        if (!m_revoked)
        {
            throw std::logic_error("recover without revocation");
        }
        if (!any_dead())
        {
            throw std::logic_error("recover with no dead process");
        }
        ++m_epoch;
        for (auto &p : m_procs)
        {
            if (!p.alive())
            {
                p.status = ProcStatus::Respawned;
                record(p.rank, "respawn", kNoRank, 0, -1, "respawned");
            }
            p.inbox.clear();
            p.observed_revocation = false;
        }
        m_barriers.clear();
        m_revoked = false;
        m_detector_armed = false;
        record(kNoRank, "recover", kNoRank, static_cast<Iter>(m_epoch), -1, "epoch");
    }
}
