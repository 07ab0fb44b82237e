#pragma once

#include "mlsim/types.hpp"

#include <optional>
#include <stdexcept>
#include <utility>

namespace mlsim
{
    // Shadow-copy transaction over the protected part of a kernel's state.
    // Everything an iteration mutates before its last communication call goes
    // through working(); commit publishes it, abort throws it away.
    template <class State>
    class Transaction
    {
    public:
        Transaction() = default;
        explicit Transaction(State initial, Iter iter = 0) : m_committed(std::move(initial)), m_iter(iter) {}

        void begin()
        {
            if (m_shadow)
            {
                throw std::logic_error("transaction already open");
            }
            m_shadow = m_committed;
        }

        void commit()
        {
            if (!m_shadow)
            {
                throw std::logic_error("commit without begin");
            }
            if (!m_bypass)
            {
                m_committed = std::move(*m_shadow);
            }
            m_shadow.reset();
            ++m_iter;
        }

        void abort()
        {
            if (!m_shadow)
            {
                throw std::logic_error("abort without begin");
            }
            m_shadow.reset();
        }

        bool open() const noexcept { return m_shadow.has_value(); }

        // Test hook: writes go straight to the committed state, so an abort
        // can no longer undo them.
        void set_bypass(bool on) noexcept { m_bypass = on; }
        bool bypass() const noexcept { return m_bypass; }

        State &working()
        {
            if (!m_shadow)
            {
                throw std::logic_error("no open transaction");
            }
            return m_bypass ? m_committed : *m_shadow;
        }

        const State &committed() const noexcept { return m_committed; }

        // Replaces the committed state wholesale (checkpoint load, cold start).
        void reset(State state, Iter iter)
        {
            m_committed = std::move(state);
            m_shadow.reset();
            m_iter = iter;
        }

        Iter iter() const noexcept { return m_iter; }

    private:
        State m_committed{};
        std::optional<State> m_shadow;
        Iter m_iter = 0;
        bool m_bypass = false;
    };
}
