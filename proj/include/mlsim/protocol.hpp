#pragma once

#include "mlsim/payload_log.hpp"
#include "mlsim/types.hpp"
#include "mlsim/world.hpp"

#include <functional>
#include <vector>

namespace mlsim
{
    enum class SendAction : std::uint8_t
    {
        SentAndLogged,
        Replayed,
        SkippedFuture,
        SkippedIrrelevant,
    };

    const char *to_string(SendAction a) noexcept;

    // One send of a kernel iteration, as the kernel's static schedule knows it.
    struct ScheduledSend
    {
        Rank dst = 0;
        int tag = 0;
        int seq = 0;   // per (dst, iteration), program order
        int phase = 0; // communication phase
        int slot = 0;  // kernel payload selector

        bool operator==(const ScheduledSend &) const = default;
    };

    struct SendResult
    {
        SendAction action = SendAction::SkippedIrrelevant;
        SendOutcome outcome = SendOutcome::Buffered;
    };

    // Per-process message-logging state.
    class ProtocolState
    {
    public:
        ProtocolState() = default;
        ProtocolState(Rank rank, int n_procs, Iter cp_int, Iter log_size, Iter last_cp = 0);

        Rank rank() const noexcept { return m_rank; }
        Iter cp_int() const noexcept { return m_cp_int; }
        Iter log_size() const noexcept { return m_log_size; }
        Iter last_cp_iter() const noexcept { return m_log.last_cp(); }

        std::vector<Iter> &peer_iters() noexcept { return m_peer_iters; }
        const std::vector<Iter> &peer_iters() const noexcept { return m_peer_iters; }
        PayloadLog &log() noexcept { return m_log; }
        const PayloadLog &log() const noexcept { return m_log; }

        // Own iteration counter advanced by a commit.
        void on_commit(Iter committed) { m_peer_iters[static_cast<std::size_t>(m_rank)] = committed; }
        // Coordinated checkpoint at `cp` committed on every rank.
        void on_checkpoint(Iter cp) { m_log.evict_through(cp); }
        void set_all_peers(Iter it);

        // Dispatch of one kernel send attributed to iteration label `iter`.
        // `materialize` is only called when the payload has to be produced from
        // live state.
        SendResult send(World &world, const ScheduledSend &s, Iter iter, const std::function<Bytes()> &materialize);

        std::uint64_t replayed() const noexcept { return m_replayed; }
        std::uint64_t sent() const noexcept { return m_sent; }
        std::uint64_t skipped_future() const noexcept { return m_skipped_future; }

    private:
        Rank m_rank = 0;
        Iter m_cp_int = 1;
        Iter m_log_size = 1;
        std::vector<Iter> m_peer_iters;
        PayloadLog m_log;
        std::uint64_t m_replayed = 0;
        std::uint64_t m_sent = 0;
        std::uint64_t m_skipped_future = 0;
    };

    // Committed iteration counts of every rank right after communicator
    // recovery. A restarted rank contributes its checkpoint iteration.
    struct FrontLine
    {
        std::vector<Iter> iters;
        Iter minit = 0;
        Iter maxit = 0;

        static FrontLine from(std::vector<Iter> iters);
    };

    FrontLine gather_front_line(const World &world);

    enum class RollbackMode : std::uint8_t
    {
        Local,
        Global,
    };

    const char *to_string(RollbackMode m) noexcept;

    // Local iff every payload the front line needs is still in the logs.
    RollbackMode decide_rollback(const FrontLine &front, Iter last_cp_iter, Iter log_size) noexcept;

    // Re-sends, from the log, every message of iterations (minit, own front]
    // that some peer still needs. No receives, no computation. Returns the
    // number of messages replayed.
    std::size_t replay(ProtocolState &proto, World &world, const FrontLine &front,
                       const std::vector<ScheduledSend> &schedule);
}
