#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace mlsim
{
    using Rank = std::int32_t;

    // Iteration counts. A process's `current_iter` is the number of committed
    // iterations; labels attached to messages and failures are 1-based, so a
    // process executing with current_iter == c is in iteration c + 1.
    using Iter = std::int64_t;

    using Bytes = std::vector<std::byte>;

    inline constexpr Rank kNoRank = -1;

    enum class KernelId : std::uint8_t
    {
        Cg = 1,
        Stencil = 2,
    };

    template <class T>
    Bytes to_bytes(std::span<const T> values)
    {
        Bytes out(values.size_bytes());
        if (!values.empty())
        {
            std::memcpy(out.data(), values.data(), values.size_bytes());
        }
        return out;
    }

    template <class T>
    std::vector<T> from_bytes(std::span<const std::byte> bytes)
    {
        std::vector<T> out(bytes.size() / sizeof(T));
        if (!out.empty())
        {
            std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
        }
        return out;
    }
}
