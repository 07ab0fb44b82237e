#include "mlsim/cg.hpp"

#include "mlsim/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <tuple>

namespace mlsim
{
    namespace
    {
        double dot(const std::vector<double> &a, const std::vector<double> &b)
        {
            double s = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i)
            {
                s += a[i] * b[i];
            }
            return s;
        }

        void put_doubles(Bytes &out, std::span<const double> v)
        {
            const auto b = to_bytes(v);
            out.insert(out.end(), b.begin(), b.end());
        }

        std::vector<double> take_doubles(std::span<const std::byte> &in, std::size_t n)
        {
            if (in.size() < n * sizeof(double))
            {
                throw CorruptCheckpoint("cg state truncated");
            }
            auto out = from_bytes<double>(in.first(n * sizeof(double)));
            in = in.subspan(n * sizeof(double));
            return out;
        }
    }

    CgTopology CgTopology::for_procs(int n_procs)
    {
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_procs))));
        if (n_procs < 1 || side * side != n_procs || !std::has_single_bit(static_cast<unsigned>(side)))
        {
            throw ConfigError("cg needs a square power-of-two process count (1, 4, 16, 64, ...), got " +
                              std::to_string(n_procs));
        }
        return CgTopology{side, side};
    }

    std::vector<Rank> CgTopology::reduce_partners(Rank r) const
    {
        std::vector<Rank> out;
        const int row = row_of(r);
        const int col = col_of(r);
        for (int d = 1; d < cols; d <<= 1)
        {
            out.push_back(row * cols + (col ^ d));
        }
        return out;
    }

    double CsrMatrix::at(int i, int j) const
    {
        for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        {
            if (col[static_cast<std::size_t>(k)] == j)
            {
                return val[static_cast<std::size_t>(k)];
            }
        }
        return 0.0;
    }

    std::vector<double> CsrMatrix::multiply(const std::vector<double> &x) const
    {
        std::vector<double> y(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
        {
            double s = 0.0;
            for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            {
                s += val[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
            }
            y[static_cast<std::size_t>(i)] = s;
        }
        return y;
    }

    CsrMatrix make_cg_matrix(std::uint64_t seed, int n, int nnz_per_row, double diag_shift)
    {
        if (n < 1 || nnz_per_row < 1)
        {
            throw ConfigError("cg matrix needs n >= 1 and nnz_per_row >= 1");
        }
        std::mt19937_64 rng(seed);
        std::vector<std::tuple<int, int, double>> trip;
        const int pairs = n > 1 ? (nnz_per_row - 1) / 2 : 0;
        for (int i = 0; i < n; ++i)
        {
            for (int k = 0; k < pairs; ++k)
            {
                int j = static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
                if (j >= i)
                {
                    ++j;
                }
                const double v = 2.0 * unit_double(rng()) - 1.0;
                trip.emplace_back(i, j, v);
                trip.emplace_back(j, i, v);
            }
        }
        // Sorting whole triplets fixes the summation order of duplicates, so
        // both triangles merge to bitwise-equal values.
        std::sort(trip.begin(), trip.end());
        CsrMatrix a;
        a.n = n;
        a.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
        std::vector<double> absrow(static_cast<std::size_t>(n), 0.0);
        std::vector<std::tuple<int, int, double>> merged;
        for (const auto &t : trip)
        {
            if (!merged.empty() && std::get<0>(merged.back()) == std::get<0>(t) &&
                std::get<1>(merged.back()) == std::get<1>(t))
            {
                std::get<2>(merged.back()) += std::get<2>(t);
            }
            else
            {
                merged.push_back(t);
            }
        }
        for (const auto &[i, j, v] : merged)
        {
            absrow[static_cast<std::size_t>(i)] += std::fabs(v);
        }
        for (int i = 0; i < n; ++i)
        {
            merged.emplace_back(i, i, absrow[static_cast<std::size_t>(i)] + diag_shift);
        }
        std::sort(merged.begin(), merged.end());
        for (const auto &[i, j, v] : merged)
        {
            ++a.row_ptr[static_cast<std::size_t>(i) + 1];
            a.col.push_back(j);
            a.val.push_back(v);
        }
        for (int i = 0; i < n; ++i)
        {
            a.row_ptr[static_cast<std::size_t>(i) + 1] += a.row_ptr[static_cast<std::size_t>(i)];
        }
        return a;
    }

    CgProblem::CgProblem(int n_procs, std::uint64_t seed, const KernelParams &params)
        : m_n_procs(n_procs), m_params(params), m_topo(CgTopology::for_procs(n_procs))
    {
        if (params.cg_n < 1 || params.cg_n % m_topo.cols != 0)
        {
            throw ConfigError("cg size " + std::to_string(params.cg_n) + " not divisible by grid side " +
                              std::to_string(m_topo.cols));
        }
        if (params.cg_inner_iters < 1)
        {
            throw ConfigError("cg inner iterations must be >= 1");
        }
        m_seg = params.cg_n / m_topo.cols;
        m_a = make_cg_matrix(seed, params.cg_n, params.cg_nnz_per_row, params.cg_diag_shift);
    }

    std::unique_ptr<KernelProcess> CgProblem::make(Rank rank) const
    {
        if (rank < 0 || rank >= m_n_procs)
        {
            throw std::out_of_range("cg rank outside grid");
        }
        return std::make_unique<CgProcess>(*this, rank);
    }

    CgProcess::CgProcess(const CgProblem &problem, Rank rank) : m_problem(problem), m_rank(rank)
    {
        const auto &topo = problem.topology();
        const int m = problem.segment();
        const auto partners = topo.reduce_partners(rank);

        auto add = [this](OpKind kind, int phase, Rank peer, int tag, int slot) {
            m_program.push_back(Op{kind, phase, peer, tag, slot, 0});
        };
        add(OpKind::Compute, 0, kNoRank, 0, Matvec);
        for (std::size_t s = 0; s < partners.size(); ++s)
        {
            add(OpKind::Send, 0, partners[s], 100 + static_cast<int>(s), W);
            add(OpKind::Recv, 0, partners[s], 100 + static_cast<int>(s), WAdd);
        }
        add(OpKind::Send, 1, topo.transpose_partner(rank), 200, W);
        add(OpKind::Recv, 1, topo.transpose_partner(rank), 200, Q);
        add(OpKind::Compute, 1, kNoRank, 0, DotPq);
        for (std::size_t s = 0; s < partners.size(); ++s)
        {
            add(OpKind::Send, 2, partners[s], 300 + static_cast<int>(s), D);
            add(OpKind::Recv, 2, partners[s], 300 + static_cast<int>(s), DAdd);
        }
        add(OpKind::Compute, 2, kNoRank, 0, Update);
        for (std::size_t s = 0; s < partners.size(); ++s)
        {
            add(OpKind::Send, 3, partners[s], 400 + static_cast<int>(s), Sums);
            add(OpKind::Recv, 3, partners[s], 400 + static_cast<int>(s), SumsAdd);
        }
        m_program.push_back(Op{OpKind::Commit, -1, kNoRank, 0, 0, 0});
        add(OpKind::Compute, 3, kNoRank, 0, Post);
        number_sends(m_program);

        // Extract the local block.
        const auto &a = problem.matrix();
        const int r0 = topo.row_of(rank) * m;
        const int c0 = topo.col_of(rank) * m;
        m_bptr.assign(static_cast<std::size_t>(m) + 1, 0);
        for (int i = 0; i < m; ++i)
        {
            const auto gi = static_cast<std::size_t>(r0 + i);
            for (int k = a.row_ptr[gi]; k < a.row_ptr[gi + 1]; ++k)
            {
                const int j = a.col[static_cast<std::size_t>(k)];
                if (j >= c0 && j < c0 + m)
                {
                    m_bcol.push_back(j - c0);
                    m_bval.push_back(a.val[static_cast<std::size_t>(k)]);
                }
            }
            m_bptr[static_cast<std::size_t>(i) + 1] = static_cast<int>(m_bcol.size());
        }

        const double x0 = 1.0 / std::sqrt(static_cast<double>(problem.params().cg_n));
        m_x.assign(static_cast<std::size_t>(m), x0);
        m_p = m_x;
        m_txn.reset(CgProtected{std::vector<double>(static_cast<std::size_t>(m), 0.0), m_x}, 0);
        m_rho = static_cast<double>(problem.params().cg_n) * x0 * x0;
        m_w.assign(static_cast<std::size_t>(m), 0.0);
        m_q.assign(static_cast<std::size_t>(m), 0.0);
    }

    void CgProcess::compute(int step, Iter label)
    {
        const std::size_t m = m_x.size();
        switch (step)
        {
        case Matvec:
            for (std::size_t i = 0; i < m; ++i)
            {
                double s = 0.0;
                for (int k = m_bptr[i]; k < m_bptr[i + 1]; ++k)
                {
                    s += m_bval[static_cast<std::size_t>(k)] * m_p[static_cast<std::size_t>(m_bcol[static_cast<std::size_t>(k)])];
                }
                m_w[i] = s;
            }
            break;
        case DotPq:
            m_d = dot(m_p, m_q);
            break;
        case Update:
        {
            m_alpha = m_d != 0.0 ? m_rho / m_d : 0.0;
            auto &st = m_txn.working();
            for (std::size_t i = 0; i < m; ++i)
            {
                st.z[i] += m_alpha * m_p[i];
                st.r[i] -= m_alpha * m_q[i];
            }
            m_sums[0] = dot(st.r, st.r);
            m_sums[1] = dot(m_x, st.z);
            m_sums[2] = dot(st.z, st.z);
            break;
        }
        case Post:
        {
            const double beta = m_rho0 != 0.0 ? m_rho / m_rho0 : 0.0;
            const auto &st = m_txn.committed();
            for (std::size_t i = 0; i < m; ++i)
            {
                m_p[i] = st.r[i] + beta * m_p[i];
            }
            if (label % m_problem.params().cg_inner_iters == 0)
            {
                // Outer step: new eigenvalue estimate, restart from normalized z.
                m_zeta = m_problem.params().cg_zeta_shift + 1.0 / m_sums[1];
                const double norm = 1.0 / std::sqrt(m_sums[2]);
                for (std::size_t i = 0; i < m; ++i)
                {
                    m_x[i] = norm * st.z[i];
                }
                CgProtected fresh{std::vector<double>(m, 0.0), m_x};
                m_txn.reset(std::move(fresh), m_txn.iter());
                m_p = m_x;
                m_rho = m_sums[2] * norm * norm;
            }
            break;
        }
        default:
            throw std::logic_error("unknown cg step");
        }
    }

    void CgProcess::commit()
    {
        m_txn.commit();
        m_rho0 = m_rho;
        m_rho = m_sums[0];
    }

    Bytes CgProcess::payload(int slot, Iter)
    {
        switch (slot)
        {
        case W:
            return to_bytes<double>(m_w);
        case D:
            return to_bytes<double>(std::span<const double>(&m_d, 1));
        case Sums:
            return to_bytes<double>(std::span<const double>(m_sums, 3));
        default:
            throw std::logic_error("unknown cg payload slot");
        }
    }

    void CgProcess::deliver(int slot, std::span<const std::byte> data, Iter)
    {
        const auto v = from_bytes<double>(data);
        switch (slot)
        {
        case WAdd:
            if (v.size() != m_w.size())
            {
                throw ProtocolError("cg w segment size mismatch");
            }
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                m_w[i] += v[i];
            }
            break;
        case Q:
            if (v.size() != m_q.size())
            {
                throw ProtocolError("cg q segment size mismatch");
            }
            m_q = v;
            break;
        case DAdd:
            if (v.size() != 1)
            {
                throw ProtocolError("cg scalar size mismatch");
            }
            m_d += v[0];
            break;
        case SumsAdd:
            if (v.size() != 3)
            {
                throw ProtocolError("cg sums size mismatch");
            }
            for (int i = 0; i < 3; ++i)
            {
                m_sums[i] += v[static_cast<std::size_t>(i)];
            }
            break;
        default:
            throw std::logic_error("unknown cg receive slot");
        }
    }

    std::size_t CgProcess::shadow_bytes() const noexcept
    {
        return 2 * m_x.size() * sizeof(double);
    }

    Bytes CgProcess::serialize() const
    {
        Bytes out;
        const auto &st = m_txn.committed();
        put_doubles(out, m_x);
        put_doubles(out, st.z);
        put_doubles(out, st.r);
        put_doubles(out, m_p);
        const double scalars[3] = {m_rho, m_rho0, m_zeta};
        put_doubles(out, scalars);
        return out;
    }

    void CgProcess::deserialize(std::span<const std::byte> data, Iter iter)
    {
        const std::size_t m = m_x.size();
        if (data.size() != (4 * m + 3) * sizeof(double))
        {
            throw CorruptCheckpoint("cg state has wrong size");
        }
        m_x = take_doubles(data, m);
        auto z = take_doubles(data, m);
        auto r = take_doubles(data, m);
        m_p = take_doubles(data, m);
        const auto s = take_doubles(data, 3);
        m_rho = s[0];
        m_rho0 = s[1];
        m_zeta = s[2];
        m_txn.reset(CgProtected{std::move(z), std::move(r)}, iter);
    }
}
