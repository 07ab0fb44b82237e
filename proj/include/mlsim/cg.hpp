#pragma once

#include "mlsim/kernel.hpp"
#include "mlsim/transaction.hpp"

#include <vector>

namespace mlsim
{
    // Square power-of-two process grid. Rank r sits at (r / cols, r % cols).
    struct CgTopology
    {
        int rows = 1;
        int cols = 1;

        static CgTopology for_procs(int n_procs);

        int row_of(Rank r) const noexcept { return r / cols; }
        int col_of(Rank r) const noexcept { return r % cols; }
        // Recursive-halving partners within the row, nearest first.
        std::vector<Rank> reduce_partners(Rank r) const;
        Rank transpose_partner(Rank r) const noexcept { return col_of(r) * cols + row_of(r); }
    };

    // Symmetric sparse matrix in CSR form.
    struct CsrMatrix
    {
        int n = 0;
        std::vector<int> row_ptr;
        std::vector<int> col;
        std::vector<double> val;

        double at(int i, int j) const;
        std::vector<double> multiply(const std::vector<double> &x) const;
    };

    // Random symmetric, strictly diagonally dominant (hence SPD) matrix.
    CsrMatrix make_cg_matrix(std::uint64_t seed, int n, int nnz_per_row, double diag_shift);

    // Persistent vectors updated before the last exchange of an iteration.
    struct CgProtected
    {
        std::vector<double> z;
        std::vector<double> r;
    };

    class CgProblem final : public KernelFactory
    {
    public:
        CgProblem(int n_procs, std::uint64_t seed, const KernelParams &params);

        KernelId id() const noexcept override { return KernelId::Cg; }
        int n_procs() const noexcept override { return m_n_procs; }
        int kill_phases() const noexcept override { return 4; }
        int comm_phases() const noexcept override { return 4; }
        std::unique_ptr<KernelProcess> make(Rank rank) const override;

        const CgTopology &topology() const noexcept { return m_topo; }
        const CsrMatrix &matrix() const noexcept { return m_a; }
        const KernelParams &params() const noexcept { return m_params; }
        int segment() const noexcept { return m_seg; }

    private:
        int m_n_procs;
        KernelParams m_params;
        CgTopology m_topo;
        int m_seg;
        CsrMatrix m_a;
    };

    class CgProcess final : public KernelProcess
    {
    public:
        enum Step : int
        {
            Matvec,
            DotPq,
            Update,
            Post,
        };

        enum Slot : int
        {
            W,
            WAdd,
            Q,
            D,
            DAdd,
            Sums,
            SumsAdd,
        };

        CgProcess(const CgProblem &problem, Rank rank);

        Rank rank() const noexcept override { return m_rank; }
        const std::vector<Op> &program() const noexcept override { return m_program; }

        void begin() override { m_txn.begin(); }
        void commit() override;
        void abort() override { m_txn.abort(); }
        bool open() const noexcept override { return m_txn.open(); }
        Iter iter() const noexcept override { return m_txn.iter(); }

        void compute(int step, Iter label) override;
        Bytes payload(int slot, Iter label) override;
        void deliver(int slot, std::span<const std::byte> data, Iter label) override;

        Bytes serialize() const override;
        void deserialize(std::span<const std::byte> data, Iter iter) override;

        double metric() const override { return m_zeta; }
        std::size_t shadow_bytes() const noexcept override;
        void set_bypass(bool on) override { m_txn.set_bypass(on); }

        const std::vector<double> &x() const noexcept { return m_x; }
        const CgProtected &committed() const noexcept { return m_txn.committed(); }
        double rho() const noexcept { return m_rho; }

    private:
        const CgProblem &m_problem;
        Rank m_rank;
        std::vector<Op> m_program;

        // Local block A[row segment][col segment], CSR with local column indices.
        std::vector<int> m_bptr;
        std::vector<int> m_bcol;
        std::vector<double> m_bval;

        Transaction<CgProtected> m_txn;
        std::vector<double> m_x;
        std::vector<double> m_p;
        double m_rho = 0.0;
        double m_rho0 = 0.0;
        double m_zeta = 0.0;

        // Per-iteration scratch, rebuilt from committed state on every attempt.
        std::vector<double> m_w;
        std::vector<double> m_q;
        double m_d = 0.0;
        double m_alpha = 0.0;
        double m_sums[3] = {0.0, 0.0, 0.0};
    };
}
