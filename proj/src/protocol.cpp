#include "mlsim/protocol.hpp"

#include "mlsim/error.hpp"

#include <algorithm>
#include <stdexcept>

namespace mlsim
{
    const char *to_string(SendAction a) noexcept
    {
        switch (a)
        {
        case SendAction::SentAndLogged:
            return "sent";
        case SendAction::Replayed:
            return "replayed";
        case SendAction::SkippedFuture:
            return "skipped_future";
        case SendAction::SkippedIrrelevant:
            return "skipped_irrelevant";
        }
        return "?";
    }

    const char *to_string(RollbackMode m) noexcept
    {
        return m == RollbackMode::Local ? "local" : "global";
    }

    ProtocolState::ProtocolState(Rank rank, int n_procs, Iter cp_int, Iter log_size, Iter last_cp)
        : m_rank(rank), m_cp_int(cp_int), m_log_size(log_size),
          m_peer_iters(static_cast<std::size_t>(n_procs), last_cp), m_log(log_size, last_cp)
    {
        if (rank < 0 || rank >= n_procs)
        {
            throw std::out_of_range("protocol rank outside world");
        }
    }

    void ProtocolState::set_all_peers(Iter it)
    {
        std::fill(m_peer_iters.begin(), m_peer_iters.end(), it);
    }

    SendResult ProtocolState::send(World &world, const ScheduledSend &s, Iter iter,
                                   const std::function<Bytes()> &materialize)
    {
        const bool normal = iter > m_peer_iters[static_cast<std::size_t>(m_rank)];
        const bool needed = iter > m_peer_iters[static_cast<std::size_t>(s.dst)];
        SendResult res;
        if (normal)
        {
            Bytes payload = materialize();
            if (needed)
            {
                m_log.append(iter, s.dst, s.seq, payload);
                res.action = SendAction::SentAndLogged;
                res.outcome = world.post_send(m_rank, s.dst, s.tag, std::move(payload), iter, s.seq, s.phase);
                ++m_sent;
            }
            else
            {
                // The peer already holds this message. Keep the payload anyway: a
                // later failure of another rank may need it replayed.
                m_log.append(iter, s.dst, s.seq, std::move(payload));
                res.action = SendAction::SkippedFuture;
                ++m_skipped_future;
                world.record(m_rank, "send", s.dst, iter, s.phase, "skipped_future");
            }
            return res;
        }
        if (needed)
        {
            Bytes payload = m_log.get(iter, s.dst, s.seq);
            res.action = SendAction::Replayed;
            world.record(m_rank, "replay", s.dst, iter, s.phase, "replayed");
            res.outcome = world.post_send(m_rank, s.dst, s.tag, std::move(payload), iter, s.seq, s.phase);
            ++m_replayed;
            return res;
        }
        res.action = SendAction::SkippedIrrelevant;
        return res;
    }

    FrontLine FrontLine::from(std::vector<Iter> iters)
    {
        FrontLine f;
        f.iters = std::move(iters);
        if (!f.iters.empty())
        {
            auto [lo, hi] = std::minmax_element(f.iters.begin(), f.iters.end());
            f.minit = *lo;
            f.maxit = *hi;
        }
        return f;
    }

    FrontLine gather_front_line(const World &world)
    {
        std::vector<Iter> iters;
        iters.reserve(static_cast<std::size_t>(world.n_procs()));
        for (Rank r = 0; r < world.n_procs(); ++r)
        {
            iters.push_back(world.process(r).current_iter);
        }
        return FrontLine::from(std::move(iters));
    }

    RollbackMode decide_rollback(const FrontLine &front, Iter last_cp_iter, Iter log_size) noexcept
    {
        return front.maxit - last_cp_iter <= log_size ? RollbackMode::Local : RollbackMode::Global;
    }

    std::size_t replay(ProtocolState &proto, World &world, const FrontLine &front,
                       const std::vector<ScheduledSend> &schedule)
    {
        const Iter mine = front.iters.at(static_cast<std::size_t>(proto.rank()));
        std::size_t n = 0;
        for (Iter it = front.minit + 1; it <= mine; ++it)
        {
            for (const auto &s : schedule)
            {
                auto res = proto.send(world, s, it, [] () -> Bytes {
                    throw std::logic_error("replay must not materialize payloads");
                });
                if (res.outcome == SendOutcome::RevokedError)
                {
                    throw ProtocolError("communicator revoked during replay");
                }
                if (res.action == SendAction::Replayed)
                {
                    ++n;
                }
            }
        }
        return n;
    }
}
