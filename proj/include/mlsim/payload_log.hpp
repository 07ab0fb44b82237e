#pragma once

#include "mlsim/types.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <tuple>

namespace mlsim
{
    struct LogKey
    {
        Iter iter = 0;
        Rank dst = 0;
        int seq = 0;

        auto operator<=>(const LogKey &) const = default;
    };

    // Sender-side payload store. Only iterations within log_size of the last
    // checkpoint are kept; everything at or before a new checkpoint is evicted.
    class PayloadLog
    {
    public:
        PayloadLog() = default;
        explicit PayloadLog(Iter log_size, Iter last_cp = 0) : m_log_size(log_size), m_last_cp(last_cp) {}

        Iter log_size() const noexcept { return m_log_size; }
        Iter last_cp() const noexcept { return m_last_cp; }

        bool admits(Iter iter) const noexcept { return iter > m_last_cp && iter - m_last_cp <= m_log_size; }

        // Returns false when the capping rule drops the payload.
        bool append(Iter iter, Rank dst, int seq, Bytes payload);
        const Bytes &get(Iter iter, Rank dst, int seq) const;
        bool contains(Iter iter, Rank dst, int seq) const;

        // Checkpoint committed at `cp`: drop entries with iter <= cp.
        void evict_through(Iter cp);
        // Aborted iteration: drop entries with iter >= `iter`.
        void discard_from(Iter iter);
        void clear() noexcept;

        std::size_t size() const noexcept { return m_entries.size(); }
        std::size_t bytes_total() const noexcept { return m_bytes; }
        std::size_t bytes_peak() const noexcept { return m_peak; }
        std::size_t dropped() const noexcept { return m_dropped; }
        // Lowest retained iteration, or 0 when empty.
        Iter window_start() const noexcept;
        Iter window_end() const noexcept;
        std::size_t distinct_iters() const;

        const std::map<LogKey, Bytes> &entries() const noexcept { return m_entries; }

        // Checks byte accounting and the window rule; returns an empty string or
        // a description of the first violation.
        std::string audit() const;

    private:
        Iter m_log_size = 0;
        Iter m_last_cp = 0;
        std::map<LogKey, Bytes> m_entries;
        std::size_t m_bytes = 0;
        std::size_t m_peak = 0;
        std::size_t m_dropped = 0;
    };
}
