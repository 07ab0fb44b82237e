#pragma once

#include "mlsim/checkpoint.hpp"
#include "mlsim/kernel.hpp"
#include "mlsim/protocol.hpp"
#include "mlsim/trace.hpp"
#include "mlsim/world.hpp"

#include <memory>
#include <string>
#include <vector>

namespace mlsim
{
    enum class RollbackPolicy : std::uint8_t
    {
        Local,
        Global,
        Hybrid,
    };

    RollbackPolicy parse_policy(const std::string &name);
    const char *to_string(RollbackPolicy p) noexcept;

    struct RuntimeConfig
    {
        Iter n_iters = 50;
        Iter cp_int = 25;
        Iter log_size = 25;
        RollbackPolicy policy = RollbackPolicy::Local;
        std::vector<FailureSpec> failures;
        std::uint64_t seed = 1;

        // Test hooks.
        bool skip_replay = false;    // survivors never replay
        bool no_transaction = false; // iterations write committed state directly
        bool audit_logs = false;     // check payload-log invariants after every step
    };

    // One logical message as consumed by a committed iteration.
    struct DeliveryKey
    {
        Rank src = 0;
        Rank dst = 0;
        Iter iter = 0;
        int seq = 0;

        auto operator<=>(const DeliveryKey &) const = default;
    };

    struct RecoveryRecord
    {
        std::uint64_t epoch = 0;
        std::vector<Rank> failed;
        std::vector<FailureSpec> specs;
        FrontLine front;
        RollbackMode mode = RollbackMode::Local;
        Iter checkpoint_iter = 0;
        // Per rank: committed + (1 if an iteration was open) when the failure
        // was detected (for the failed ranks: when they died).
        std::vector<Iter> detect_iter;
        std::vector<Iter> recompute;
        std::size_t replayed = 0;
    };

    struct RunResult
    {
        double metric = 0.0;
        std::vector<RecoveryRecord> recoveries;
        Iter recompute_total = 0;
        Iter recompute_failed = 0;
        std::uint64_t replayed = 0;
        std::size_t payload_bytes_peak = 0;
        std::vector<std::size_t> payload_bytes_peak_per_rank;
        std::vector<DeliveryKey> ledger; // sorted
        std::uint64_t rounds = 0;
        std::uint64_t work_units = 0; // iteration attempts started
        std::vector<std::string> audit_failures;
    };

    class RunObserver
    {
    public:
        virtual ~RunObserver() = default;
        // A message was handed to rank `dst` by receive op `pc` of iteration `label`.
        virtual void on_deliver(Rank /*dst*/, Iter /*label*/, std::size_t /*pc*/, const Message & /*msg*/) {}
        virtual void on_commit(Rank /*rank*/, Iter /*committed*/, const KernelProcess & /*kernel*/) {}
        virtual void on_recovery(const RecoveryRecord & /*rec*/) {}
    };

    // Drives every virtual process through the kernel's iterations, with
    // coordinated checkpoints, failure injection and message-logging recovery.
    class Runtime
    {
    public:
        Runtime(std::shared_ptr<const KernelFactory> factory, RuntimeConfig cfg, CheckpointStore &store,
                Trace *trace = nullptr, RunObserver *observer = nullptr);
        ~Runtime();

        RunResult run();

        const World &world() const noexcept { return m_world; }

    private:
        enum class Stage : std::uint8_t
        {
            Boundary,
            Barrier,
            InIter,
            Detected,
            Dead,
            Done,
        };

        struct Proc
        {
            std::unique_ptr<KernelProcess> kernel;
            ProtocolState proto;
            std::vector<ScheduledSend> schedule;
            std::vector<int> send_index; // program pc -> schedule index
            Stage stage = Stage::Boundary;
            std::size_t pc = 0;
            Iter label = 0;
            Iter barrier = -1;
            Iter passed_barrier = -1;
            Iter detect_iter = 0;
            std::vector<DeliveryKey> staged;
            std::vector<DeliveryKey> ledger;
            std::size_t peak = 0;
        };

        bool advance(Rank r);
        void start_iteration(Rank r);
        void detect(Rank r);
        void kill(Rank r, int phase);
        void write_checkpoints(Iter c);
        void recover();
        void load_state(Rank r, bool fresh_kernel);
        void audit();
        bool barrier_needed(const Proc &p, Iter c) const noexcept;

        std::shared_ptr<const KernelFactory> m_factory;
        RuntimeConfig m_cfg;
        CheckpointStore &m_store;
        Trace *m_trace;
        RunObserver *m_observer;
        World m_world;
        std::vector<Proc> m_procs;
        std::vector<FailureSpec> m_fired;
        Iter m_valid_gen = 0;
        RunResult m_result;
    };
}
