#pragma once

#include "mlsim/trace.hpp"
#include "mlsim/types.hpp"

#include <deque>
#include <map>
#include <utility>
#include <vector>

namespace mlsim
{
    enum class ProcStatus : std::uint8_t
    {
        Alive,
        Dead,
        Respawned,
    };

    struct Message
    {
        Rank src = kNoRank;
        Rank dst = kNoRank;
        int tag = 0;
        Iter iter = 0; // iteration label the sender attributes to the message
        int seq = 0;   // per (src, dst, iter), program order
        Bytes payload;
        std::uint64_t epoch = 0;
    };

    struct VirtualProcess
    {
        Rank rank = kNoRank;
        ProcStatus status = ProcStatus::Alive;
        std::map<std::pair<Rank, int>, std::deque<Message>> inbox; // keyed by (src, tag)
        Iter current_iter = 0;
        bool observed_revocation = false;

        bool alive() const noexcept { return status != ProcStatus::Dead; }
    };

    enum class SendOutcome : std::uint8_t
    {
        Buffered,
        RevokedError,
    };

    enum class RecvStatus : std::uint8_t
    {
        Data,
        FailureDetected,
        Pending,
    };

    struct RecvOutcome
    {
        RecvStatus status = RecvStatus::Pending;
        Message message;
    };

    // Kill point: the victim dies when it reaches compute phase `phase` of
    // iteration `iter` (1-based), before executing it.
    struct FailureSpec
    {
        Rank rank = 0;
        Iter iter = 1;
        int phase = 0;

        bool operator==(const FailureSpec &) const = default;
    };

    struct WorldConfig
    {
        int n_procs = 1;
        Iter n_iters = 1;
        int n_phases = 1; // kill phases of the selected kernel
        std::uint64_t seed = 1;
    };

    // Deterministic virtual runtime with MPI-like point-to-point semantics and
    // ULFM-style revoke/shrink/respawn. A receive that waits on a dead peer
    // stays Pending until the scheduler arms the failure detector (no alive
    // process can make progress); from then on the dead peer is reported, the
    // communicator is revoked, and every process observes the revocation at its
    // next communication call.
    class World
    {
    public:
        explicit World(WorldConfig cfg, Trace *trace = nullptr);

        int n_procs() const noexcept { return m_cfg.n_procs; }
        const WorldConfig &config() const noexcept { return m_cfg; }
        std::uint64_t epoch() const noexcept { return m_epoch; }
        bool revoked() const noexcept { return m_revoked; }
        bool detector_armed() const noexcept { return m_detector_armed; }
        bool finished() const noexcept { return m_finished; }

        const VirtualProcess &process(Rank r) const;
        void set_current_iter(Rank r, Iter it);
        std::vector<Rank> dead_ranks() const;
        bool any_dead() const;

        SendOutcome post_send(Rank src, Rank dst, int tag, Bytes payload, Iter iter, int seq, int phase = -1);
        RecvOutcome post_recv(Rank dst, Rank src, int tag, Iter iter = 0, int phase = -1);

        // Barriers are identified by an iteration count; they complete once
        // every rank of the current epoch has arrived.
        void barrier_arrive(Rank r, Iter id);
        RecvStatus barrier_poll(Rank r, Iter id);
        bool barrier_complete(Iter id) const;

        void inject_failure(const FailureSpec &spec);
        const std::vector<FailureSpec> &pending_failures() const noexcept { return m_pending; }
        // Consumes the matching pending failure, if any.
        bool take_failure(Rank r, Iter iter, int phase);
        void kill(Rank r, Iter iter = 0, int phase = -1);

        void arm_detector();

        // Communicator recovery: epoch + 1, dead ranks respawned, inboxes and
        // barriers of the previous epoch cleared, revocation reset.
        void recover();

        void mark_finished() noexcept { m_finished = true; }

        std::uint64_t step() const noexcept { return m_step; }
        void advance_step() noexcept { ++m_step; }

        Trace *trace() noexcept { return m_trace; }
        void record(Rank rank, const char *op, Rank peer, Iter iter, int phase, const char *outcome);

    private:
        VirtualProcess &proc(Rank r);
        void check_rank(Rank r) const;
        RecvStatus observe_failure(Rank r);

        WorldConfig m_cfg;
        Trace *m_trace;
        std::vector<VirtualProcess> m_procs;
        std::map<Iter, std::vector<bool>> m_barriers;
        std::vector<FailureSpec> m_pending;
        std::uint64_t m_epoch = 0;
        std::uint64_t m_step = 0;
        bool m_revoked = false;
        bool m_detector_armed = false;
        bool m_finished = false;
    };
}
