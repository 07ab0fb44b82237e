#include "mlsim/payload_log.hpp"

#include "mlsim/error.hpp"

#include <limits>
#include <set>
#include <string>

namespace mlsim
{
    namespace
    {
        std::string key_str(Iter iter, Rank dst, int seq)
        {
            return "(iter " + std::to_string(iter) + ", dst " + std::to_string(dst) + ", seq " + std::to_string(seq) +
                   ")";
        }
    }

    bool PayloadLog::append(Iter iter, Rank dst, int seq, Bytes payload)
    {
        if (!admits(iter))
        {
            ++m_dropped;
            return false;
        }
        const std::size_t len = payload.size();
        auto [it, inserted] = m_entries.try_emplace(LogKey{iter, dst, seq}, std::move(payload));
        if (!inserted)
        {
            throw ProtocolError("duplicate log entry " + key_str(iter, dst, seq));
        }
        m_bytes += len;
        if (m_bytes > m_peak)
        {
            m_peak = m_bytes;
        }
        return true;
    }

    const Bytes &PayloadLog::get(Iter iter, Rank dst, int seq) const
    {
        auto it = m_entries.find(LogKey{iter, dst, seq});
        if (it == m_entries.end())
        {
            throw MissingLogEntry("no logged payload for " + key_str(iter, dst, seq));
        }
        return it->second;
    }

    bool PayloadLog::contains(Iter iter, Rank dst, int seq) const
    {
        return m_entries.count(LogKey{iter, dst, seq}) != 0;
    }

    void PayloadLog::evict_through(Iter cp)
    {
        auto end = m_entries.upper_bound(LogKey{cp, std::numeric_limits<Rank>::max(), std::numeric_limits<int>::max()});
        for (auto it = m_entries.begin(); it != end; ++it)
        {
            m_bytes -= it->second.size();
        }
        m_entries.erase(m_entries.begin(), end);
        if (cp > m_last_cp)
        {
            m_last_cp = cp;
        }
    }

    void PayloadLog::discard_from(Iter iter)
    {
        auto begin = m_entries.lower_bound(LogKey{iter, std::numeric_limits<Rank>::min(), std::numeric_limits<int>::min()});
        for (auto it = begin; it != m_entries.end(); ++it)
        {
            m_bytes -= it->second.size();
        }
        m_entries.erase(begin, m_entries.end());
    }

    void PayloadLog::clear() noexcept
    {
        m_entries.clear();
        m_bytes = 0;
    }

    Iter PayloadLog::window_start() const noexcept
    {
        return m_entries.empty() ? 0 : m_entries.begin()->first.iter;
    }

    Iter PayloadLog::window_end() const noexcept
    {
        return m_entries.empty() ? 0 : m_entries.rbegin()->first.iter;
    }

    std::size_t PayloadLog::distinct_iters() const
    {
        std::set<Iter> iters;
        for (const auto &kv : m_entries)
        {
            iters.insert(kv.first.iter);
        }
        return iters.size();
    }

    std::string PayloadLog::audit() const
    {
        std::size_t sum = 0;
        for (const auto &[key, bytes] : m_entries)
        {
            sum += bytes.size();
            if (!admits(key.iter))
            {
                return "entry " + key_str(key.iter, key.dst, key.seq) + " outside window after checkpoint " +
                       std::to_string(m_last_cp);
            }
        }
        if (sum != m_bytes)
        {
            return "bytes_total " + std::to_string(m_bytes) + " != retained " + std::to_string(sum);
        }
        if (!m_entries.empty() && window_end() - window_start() >= m_log_size)
        {
            return "window spans " + std::to_string(window_end() - window_start() + 1) + " iterations";
        }
        if (static_cast<Iter>(distinct_iters()) > m_log_size)
        {
            return "more than log_size distinct iterations retained";
        }
        return {};
    }
}
