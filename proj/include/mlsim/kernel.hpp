#pragma once

#include "mlsim/protocol.hpp"
#include "mlsim/types.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mlsim
{
    enum class OpKind : std::uint8_t
    {
        Compute,
        Send,
        Recv,
        Commit,
    };

    // One step of a kernel iteration. Programs are iteration-invariant, which
    // is what lets replay rebuild the send sequence without an event log.
    struct Op
    {
        OpKind kind = OpKind::Compute;
        // Send/Recv: communication phase. Compute: kill point index, or -1 when
        // failures cannot be injected there.
        int phase = -1;
        Rank peer = kNoRank;
        int tag = 0;
        int slot = 0; // compute step, payload selector or receive target
        int seq = 0;  // sends only, per (peer, iteration)
    };

    struct KernelParams
    {
        // CG
        int cg_n = 1024;
        int cg_nnz_per_row = 16;
        int cg_inner_iters = 25;
        double cg_diag_shift = 0.1;
        double cg_zeta_shift = 10.0;
        // stencil
        int stencil_edge = 12;
        double stencil_dt = 0.5;
        double stencil_kappa = 0.25;
    };

    // A kernel instance owned by one virtual process.
    class KernelProcess
    {
    public:
        virtual ~KernelProcess() = default;

        virtual Rank rank() const noexcept = 0;
        virtual const std::vector<Op> &program() const noexcept = 0;

        virtual void begin() = 0;
        virtual void commit() = 0;
        virtual void abort() = 0;
        virtual bool open() const noexcept = 0;
        // Number of committed iterations.
        virtual Iter iter() const noexcept = 0;

        // `label` is the 1-based iteration being executed.
        virtual void compute(int step, Iter label) = 0;
        virtual Bytes payload(int slot, Iter label) = 0;
        virtual void deliver(int slot, std::span<const std::byte> data, Iter label) = 0;

        virtual Bytes serialize() const = 0;
        virtual void deserialize(std::span<const std::byte> data, Iter iter) = 0;

        virtual double metric() const = 0;
        virtual std::size_t shadow_bytes() const noexcept = 0;
        virtual void set_bypass(bool on) = 0;
    };

    // Shared, immutable problem description from which every rank's kernel
    // (and its fresh replacement after a crash) is built.
    class KernelFactory
    {
    public:
        virtual ~KernelFactory() = default;

        virtual KernelId id() const noexcept = 0;
        virtual int n_procs() const noexcept = 0;
        virtual int kill_phases() const noexcept = 0;
        virtual int comm_phases() const noexcept = 0;
        // Rank owning the verification value.
        virtual Rank metric_rank() const noexcept { return 0; }
        virtual std::unique_ptr<KernelProcess> make(Rank rank) const = 0;
    };

    std::shared_ptr<const KernelFactory> make_factory(KernelId id, int n_procs, std::uint64_t seed,
                                                      const KernelParams &params = {});

    KernelId parse_kernel(const std::string &name);
    Iter default_cp_int(KernelId id) noexcept;

    // Sends of one iteration in program order with per-destination sequence
    // numbers.
    std::vector<ScheduledSend> send_schedule(const std::vector<Op> &program);

    // Assigns per-destination sequence numbers to the Send ops of a program.
    void number_sends(std::vector<Op> &program);

    // Portable uniform double in [0, 1) from a 64-bit draw.
    inline double unit_double(std::uint64_t bits) noexcept
    {
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }
}
