#include "mlsim/stencil.hpp"

#include "mlsim/error.hpp"

#include <cmath>
#include <random>

namespace mlsim
{
    StencilTopology StencilTopology::for_procs(int n_procs)
    {
        const int side = static_cast<int>(std::lround(std::cbrt(static_cast<double>(n_procs))));
        if (n_procs < 1 || side * side * side != n_procs)
        {
            throw ConfigError("stencil needs a cubic process count (1, 8, 27, ...), got " + std::to_string(n_procs));
        }
        return StencilTopology{side};
    }

    std::array<int, 3> StencilTopology::coords(Rank r) const noexcept
    {
        return {r % side, (r / side) % side, r / (side * side)};
    }

    std::array<Rank, 6> StencilTopology::neighbors(Rank r) const noexcept
    {
        const auto c = coords(r);
        std::array<Rank, 6> out{};
        for (int dir = 0; dir < 6; ++dir)
        {
            auto n = c;
            n[static_cast<std::size_t>(dir / 2)] += (dir % 2 == 0) ? -1 : 1;
            const bool inside = n[0] >= 0 && n[0] < side && n[1] >= 0 && n[1] < side && n[2] >= 0 && n[2] < side;
            out[static_cast<std::size_t>(dir)] = inside ? n[0] + side * (n[1] + side * n[2]) : kNoRank;
        }
        return out;
    }

    namespace
    {
        // Maps plane coordinates (a, b) on side `dir` at depth `layer` to a cell.
        std::array<int, 3> face_cell(int dir, int layer, int a, int b) noexcept
        {
            switch (dir / 2)
            {
            case 0:
                return {layer, a, b};
            case 1:
                return {a, layer, b};
            default:
                return {a, b, layer};
            }
        }
    }

    std::vector<double> extract_face(const Field &f, int dir)
    {
        const int L = f.edge;
        const int layer = (dir % 2 == 0) ? 1 : L;
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(L * L));
        for (int b = 1; b <= L; ++b)
        {
            for (int a = 1; a <= L; ++a)
            {
                const auto c = face_cell(dir, layer, a, b);
                out.push_back(f.at(c[0], c[1], c[2]));
            }
        }
        return out;
    }

    void insert_halo(Field &f, int dir, std::span<const double> plane)
    {
        const int L = f.edge;
        if (plane.size() != static_cast<std::size_t>(L * L))
        {
            throw ProtocolError("stencil halo plane size mismatch");
        }
        const int layer = (dir % 2 == 0) ? 0 : L + 1;
        std::size_t n = 0;
        for (int b = 1; b <= L; ++b)
        {
            for (int a = 1; a <= L; ++a)
            {
                const auto c = face_cell(dir, layer, a, b);
                f.at(c[0], c[1], c[2]) = plane[n++];
            }
        }
    }

    double smooth_at(const Field &f, int i, int j, int k) noexcept
    {
        const double s = f.at(i, j, k) + f.at(i - 1, j, k) + f.at(i + 1, j, k) + f.at(i, j - 1, k) +
                         f.at(i, j + 1, k) + f.at(i, j, k - 1) + f.at(i, j, k + 1);
        return s / 7.0;
    }

    StencilProblem::StencilProblem(int n_procs, std::uint64_t seed, const KernelParams &params)
        : m_n_procs(n_procs), m_params(params), m_topo(StencilTopology::for_procs(n_procs))
    {
        if (params.stencil_edge < 1)
        {
            throw ConfigError("stencil edge must be >= 1");
        }
        m_global_edge = m_topo.side * params.stencil_edge;
        const auto total = static_cast<std::size_t>(m_global_edge) * static_cast<std::size_t>(m_global_edge) *
                           static_cast<std::size_t>(m_global_edge);
        std::mt19937_64 rng(seed);
        m_init.resize(total);
        for (auto &c : m_init)
        {
            c = 1e-3 * unit_double(rng());
        }
        m_init[0] += 1.0;
    }

    double StencilProblem::initial(int gx, int gy, int gz) const noexcept
    {
        const auto g = static_cast<std::size_t>(m_global_edge);
        return m_init[static_cast<std::size_t>(gx) + g * (static_cast<std::size_t>(gy) + g * static_cast<std::size_t>(gz))];
    }

    std::unique_ptr<KernelProcess> StencilProblem::make(Rank rank) const
    {
        if (rank < 0 || rank >= m_n_procs)
        {
            throw std::out_of_range("stencil rank outside lattice");
        }
        return std::make_unique<StencilProcess>(*this, rank);
    }

    StencilProcess::StencilProcess(const StencilProblem &problem, Rank rank)
        : m_problem(problem), m_rank(rank), m_edge(problem.params().stencil_edge), m_v(m_edge), m_tmp(m_edge)
    {
        const auto nb = problem.topology().neighbors(rank);
        auto exchange = [&](int ex) {
            for (int dir = 0; dir < 6; ++dir)
            {
                if (nb[static_cast<std::size_t>(dir)] != kNoRank)
                {
                    m_program.push_back(Op{OpKind::Send, ex, nb[static_cast<std::size_t>(dir)], 100 * (ex + 1) + dir,
                                           6 * ex + dir, 0});
                }
            }
            for (int dir = 0; dir < 6; ++dir)
            {
                if (nb[static_cast<std::size_t>(dir)] != kNoRank)
                {
                    m_program.push_back(Op{OpKind::Recv, ex, nb[static_cast<std::size_t>(dir)],
                                           100 * (ex + 1) + opposite_dir(dir), 6 * ex + dir, 0});
                }
            }
        };
        m_program.push_back(Op{OpKind::Compute, 0, kNoRank, 0, Begin, 0});
        exchange(0);
        m_program.push_back(Op{OpKind::Compute, -1, kNoRank, 0, Smooth, 0});
        exchange(1);
        m_program.push_back(Op{OpKind::Compute, 1, kNoRank, 0, Update, 0});
        exchange(2);
        m_program.push_back(Op{OpKind::Compute, 2, kNoRank, 0, Constraint, 0});
        m_program.push_back(Op{OpKind::Commit, -1, kNoRank, 0, 0, 0});
        number_sends(m_program);

        const auto c = problem.topology().coords(rank);
        Field u(m_edge);
        for (int k = 1; k <= m_edge; ++k)
        {
            for (int j = 1; j <= m_edge; ++j)
            {
                for (int i = 1; i <= m_edge; ++i)
                {
                    u.at(i, j, k) = problem.initial(c[0] * m_edge + i - 1, c[1] * m_edge + j - 1, c[2] * m_edge + k - 1);
                }
            }
        }
        m_txn.reset(std::move(u), 0);
    }

    void StencilProcess::compute(int step, Iter)
    {
        const int L = m_edge;
        switch (step)
        {
        case Begin:
            break;
        case Smooth:
        {
            const auto &u = m_txn.working();
            for (int k = 1; k <= L; ++k)
                for (int j = 1; j <= L; ++j)
                    for (int i = 1; i <= L; ++i)
                        m_v.at(i, j, k) = smooth_at(u, i, j, k);
            break;
        }
        case Update:
        {
            auto &u = m_txn.working();
            const double dt = m_problem.params().stencil_dt;
            for (int k = 1; k <= L; ++k)
                for (int j = 1; j <= L; ++j)
                    for (int i = 1; i <= L; ++i)
                    {
                        const double c = u.at(i, j, k);
                        u.at(i, j, k) = c + dt * (smooth_at(m_v, i, j, k) - c);
                    }
            break;
        }
        case Constraint:
        {
            auto &u = m_txn.working();
            const double kappa = m_problem.params().stencil_kappa;
            for (int k = 1; k <= L; ++k)
                for (int j = 1; j <= L; ++j)
                    for (int i = 1; i <= L; ++i)
                        m_tmp.at(i, j, k) = smooth_at(u, i, j, k);
            for (int k = 1; k <= L; ++k)
                for (int j = 1; j <= L; ++j)
                    for (int i = 1; i <= L; ++i)
                    {
                        const double c = u.at(i, j, k);
                        u.at(i, j, k) = c + kappa * (m_tmp.at(i, j, k) - c);
                    }
            break;
        }
        default:
            throw std::logic_error("unknown stencil step");
        }
    }

    Bytes StencilProcess::payload(int slot, Iter)
    {
        const int ex = slot / 6;
        const int dir = slot % 6;
        const Field &src = ex == 1 ? m_v : m_txn.working();
        return to_bytes<double>(extract_face(src, dir));
    }

    void StencilProcess::deliver(int slot, std::span<const std::byte> data, Iter)
    {
        const int ex = slot / 6;
        const int dir = slot % 6;
        const auto plane = from_bytes<double>(data);
        insert_halo(ex == 1 ? m_v : m_txn.working(), dir, plane);
    }

    std::size_t StencilProcess::shadow_bytes() const noexcept
    {
        return m_txn.committed().v.size() * sizeof(double);
    }

    Bytes StencilProcess::serialize() const
    {
        return to_bytes<double>(m_txn.committed().v);
    }

    void StencilProcess::deserialize(std::span<const std::byte> data, Iter iter)
    {
        Field u(m_edge);
        if (data.size() != u.v.size() * sizeof(double))
        {
            throw CorruptCheckpoint("stencil state has wrong size");
        }
        u.v = from_bytes<double>(data);
        m_txn.reset(std::move(u), iter);
    }
}
