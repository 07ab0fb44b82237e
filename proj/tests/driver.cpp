#include "driver.hpp"

#include "mlsim/checkpoint.hpp"

#include <stdexcept>

namespace mlsim::testing
{
    namespace
    {
        class Recorder final : public RunObserver
        {
        public:
            explicit Recorder(Recording &rec) : m_rec(rec) {}

            void on_deliver(Rank dst, Iter label, std::size_t pc, const Message &msg) override
            {
                m_rec.inbound[{dst, label, pc}] = msg.payload;
            }

        private:
            Recording &m_rec;
        };
    }

    Recording record_run(std::shared_ptr<const KernelFactory> factory, Iter n_iters, Iter cp_int)
    {
        Recording rec;
        Recorder obs(rec);
        MemoryCheckpointStore store;
        RuntimeConfig cfg;
        cfg.n_iters = n_iters;
        cfg.cp_int = cp_int;
        cfg.log_size = cp_int;
        Runtime rt(std::move(factory), cfg, store, nullptr, &obs);
        rt.run();
        return rec;
    }

    bool run_iteration(KernelProcess &k, const Recording &rec, Iter label, int abort_after_phase)
    {
        const auto &prog = k.program();
        k.begin();
        for (std::size_t pc = 0; pc < prog.size(); ++pc)
        {
            const Op &op = prog[pc];
            switch (op.kind)
            {
            case OpKind::Compute:
                k.compute(op.slot, label);
                break;
            case OpKind::Send:
                (void)k.payload(op.slot, label);
                break;
            case OpKind::Recv:
            {
                auto it = rec.inbound.find({k.rank(), label, pc});
                if (it == rec.inbound.end())
                {
                    throw std::runtime_error("no recorded message");
                }
                k.deliver(op.slot, it->second, label);
                break;
            }
            case OpKind::Commit:
                k.commit();
                break;
            }
            if (abort_after_phase >= 0 && (op.kind == OpKind::Send || op.kind == OpKind::Recv) &&
                op.phase == abort_after_phase)
            {
                const Op *next = pc + 1 < prog.size() ? &prog[pc + 1] : nullptr;
                const bool phase_ends = next == nullptr || !(next->kind == OpKind::Send || next->kind == OpKind::Recv) ||
                                        next->phase != op.phase;
                if (phase_ends)
                {
                    k.abort();
                    return false;
                }
            }
        }
        return true;
    }

    void advance_to(KernelProcess &k, const Recording &rec, Iter iters)
    {
        while (k.iter() < iters)
        {
            run_iteration(k, rec, k.iter() + 1);
        }
    }
}
