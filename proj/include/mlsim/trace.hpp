#pragma once

#include "mlsim/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mlsim
{
    struct TraceEvent
    {
        std::uint64_t step = 0;
        Rank rank = kNoRank;
        std::string op;
        Rank peer = kNoRank;
        Iter iter = 0;
        int phase = -1;
        std::string outcome;

        bool operator==(const TraceEvent &) const = default;
    };

    // Append-only event record. Disabled traces drop events without allocating.
    class Trace
    {
    public:
        explicit Trace(bool enabled = true) : m_enabled(enabled) {}

        bool enabled() const noexcept { return m_enabled; }

        void record(TraceEvent ev)
        {
            if (m_enabled)
            {
                m_events.push_back(std::move(ev));
            }
        }

        const std::vector<TraceEvent> &events() const noexcept { return m_events; }

        // One JSON object per line: {step, rank, op, peer, iter, phase, outcome}.
        void write_jsonl(std::ostream &os) const;
        std::string to_jsonl() const;

    private:
        bool m_enabled;
        std::vector<TraceEvent> m_events;
    };
}
