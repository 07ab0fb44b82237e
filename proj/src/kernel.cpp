#include "mlsim/kernel.hpp"

#include "mlsim/cg.hpp"
#include "mlsim/error.hpp"
#include "mlsim/stencil.hpp"

#include <map>

namespace mlsim
{
    KernelId parse_kernel(const std::string &name)
    {
        if (name == "cg")
        {
            return KernelId::Cg;
        }
        if (name == "stencil")
        {
            return KernelId::Stencil;
        }
        throw ConfigError("unknown kernel '" + name + "' (expected cg or stencil)");
    }

    Iter default_cp_int(KernelId id) noexcept
    {
        return id == KernelId::Cg ? 25 : 20;
    }

    void number_sends(std::vector<Op> &program)
    {
        std::map<Rank, int> next;
        for (auto &op : program)
        {
            if (op.kind == OpKind::Send)
            {
                op.seq = next[op.peer]++;
            }
        }
    }

    std::vector<ScheduledSend> send_schedule(const std::vector<Op> &program)
    {
        std::vector<ScheduledSend> out;
        for (const auto &op : program)
        {
            if (op.kind == OpKind::Send)
            {
                out.push_back(ScheduledSend{op.peer, op.tag, op.seq, op.phase, op.slot});
            }
        }
        return out;
    }

    std::shared_ptr<const KernelFactory> make_factory(KernelId id, int n_procs, std::uint64_t seed,
                                                      const KernelParams &params)
    {
        if (id == KernelId::Cg)
        {
            return std::make_shared<CgProblem>(n_procs, seed, params);
        }
        return std::make_shared<StencilProblem>(n_procs, seed, params);
    }
}
