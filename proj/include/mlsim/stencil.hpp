#pragma once

#include "mlsim/kernel.hpp"
#include "mlsim/transaction.hpp"

#include <array>
#include <vector>

namespace mlsim
{
    // p x p x p lattice, rank = x + p * (y + p * z).
    struct StencilTopology
    {
        int side = 1;

        static StencilTopology for_procs(int n_procs);

        std::array<int, 3> coords(Rank r) const noexcept;
        // Neighbors in the fixed order -x, +x, -y, +y, -z, +z; kNoRank at a
        // physical boundary.
        std::array<Rank, 6> neighbors(Rank r) const noexcept;
    };

    inline constexpr int opposite_dir(int dir) noexcept
    {
        return dir ^ 1;
    }

    // Local field with a one-cell halo, x fastest.
    struct Field
    {
        int edge = 0;
        std::vector<double> v;

        Field() = default;
        explicit Field(int e) : edge(e), v(static_cast<std::size_t>((e + 2) * (e + 2) * (e + 2)), 0.0) {}

        std::size_t idx(int i, int j, int k) const noexcept
        {
            const auto w = static_cast<std::size_t>(edge + 2);
            return static_cast<std::size_t>(i) + w * (static_cast<std::size_t>(j) + w * static_cast<std::size_t>(k));
        }
        double &at(int i, int j, int k) noexcept { return v[idx(i, j, k)]; }
        double at(int i, int j, int k) const noexcept { return v[idx(i, j, k)]; }

        bool operator==(const Field &) const = default;
    };

    // Boundary plane of the interior on side `dir`.
    std::vector<double> extract_face(const Field &f, int dir);
    // Writes a neighbor's plane into the halo on side `dir`.
    void insert_halo(Field &f, int dir, std::span<const double> plane);
    // (center + six neighbors) / 7 at an interior cell.
    double smooth_at(const Field &f, int i, int j, int k) noexcept;

    class StencilProblem final : public KernelFactory
    {
    public:
        StencilProblem(int n_procs, std::uint64_t seed, const KernelParams &params);

        KernelId id() const noexcept override { return KernelId::Stencil; }
        int n_procs() const noexcept override { return m_n_procs; }
        int kill_phases() const noexcept override { return 3; }
        int comm_phases() const noexcept override { return 3; }
        std::unique_ptr<KernelProcess> make(Rank rank) const override;

        const StencilTopology &topology() const noexcept { return m_topo; }
        const KernelParams &params() const noexcept { return m_params; }
        // Initial value of global cell (gx, gy, gz).
        double initial(int gx, int gy, int gz) const noexcept;

    private:
        int m_n_procs;
        KernelParams m_params;
        StencilTopology m_topo;
        int m_global_edge;
        std::vector<double> m_init;
    };

    class StencilProcess final : public KernelProcess
    {
    public:
        enum Step : int
        {
            Begin,
            Smooth,
            Update,
            Constraint,
        };

        StencilProcess(const StencilProblem &problem, Rank rank);

        Rank rank() const noexcept override { return m_rank; }
        const std::vector<Op> &program() const noexcept override { return m_program; }

        void begin() override { m_txn.begin(); }
        void commit() override { m_txn.commit(); }
        void abort() override { m_txn.abort(); }
        bool open() const noexcept override { return m_txn.open(); }
        Iter iter() const noexcept override { return m_txn.iter(); }

        void compute(int step, Iter label) override;
        // Slot = 6 * exchange + direction.
        Bytes payload(int slot, Iter label) override;
        void deliver(int slot, std::span<const std::byte> data, Iter label) override;

        Bytes serialize() const override;
        void deserialize(std::span<const std::byte> data, Iter iter) override;

        // Value at the global origin cell; only meaningful on rank 0.
        double metric() const override { return m_txn.committed().at(1, 1, 1); }
        std::size_t shadow_bytes() const noexcept override;
        void set_bypass(bool on) override { m_txn.set_bypass(on); }

        const Field &committed() const noexcept { return m_txn.committed(); }

    private:
        const StencilProblem &m_problem;
        Rank m_rank;
        int m_edge;
        std::vector<Op> m_program;
        Transaction<Field> m_txn;
        Field m_v;   // intermediate field of the current attempt
        Field m_tmp; // scratch for the constraint pass
    };
}
