#include "mlsim/checkpoint.hpp"

#include "mlsim/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <iterator>

namespace mlsim
{
    namespace
    {
        constexpr std::size_t kHeaderLen = 4 + 2 + 4 + 8 + 8;

        template <class T>
        void put_le(Bytes &out, T v)
        {
            for (std::size_t i = 0; i < sizeof(T); ++i)
            {
                out.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffu));
            }
        }

        template <class T>
        T get_le(std::span<const std::byte> in, std::size_t at)
        {
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i)
            {
                v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[at + i])) << (8 * i);
            }
            return static_cast<T>(v);
        }

        std::uint32_t crc_of(std::span<const std::byte> data)
        {
            uLong crc = crc32(0L, Z_NULL, 0);
            // zlib takes uInt lengths; feed in chunks.
            std::size_t off = 0;
            while (off < data.size())
            {
                const std::size_t n = std::min<std::size_t>(data.size() - off, 1u << 30);
                crc = crc32(crc, reinterpret_cast<const Bytef *>(data.data() + off), static_cast<uInt>(n));
                off += n;
            }
            return static_cast<std::uint32_t>(crc);
        }

        Bytes read_file(const std::filesystem::path &p)
        {
            std::ifstream in(p, std::ios::binary);
            if (!in)
            {
                throw IoError("cannot open " + p.string());
            }
            std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            Bytes out(raw.size());
            std::memcpy(out.data(), raw.data(), raw.size());
            return out;
        }
    }

    bool should_checkpoint(Iter iter, Iter cp_int)
    {
        if (iter < 1 || cp_int < 1)
        {
            throw std::invalid_argument("should_checkpoint needs iter >= 1 and cp_int >= 1");
        }
        return iter % cp_int == 0;
    }

    std::string kernel_name(KernelId id)
    {
        return id == KernelId::Cg ? "cg" : "stencil";
    }

    Bytes encode_checkpoint(const Checkpoint &ck)
    {
        Bytes out;
        out.reserve(kHeaderLen + 1 + ck.state.size() + 4);
        for (char c : {'M', 'L', 'C', 'K'})
        {
            out.push_back(static_cast<std::byte>(c));
        }
        put_le<std::uint16_t>(out, kCheckpointVersion);
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ck.rank));
        put_le<std::uint64_t>(out, static_cast<std::uint64_t>(ck.iter));
        put_le<std::uint64_t>(out, ck.state.size() + 1);
        out.push_back(static_cast<std::byte>(ck.kernel));
        out.insert(out.end(), ck.state.begin(), ck.state.end());
        put_le<std::uint32_t>(out, crc_of(out));
        return out;
    }

    Checkpoint decode_checkpoint(std::span<const std::byte> image, const std::string &where)
    {
        if (image.size() < kHeaderLen + 1 + 4)
        {
            throw CorruptCheckpoint(where + ": truncated");
        }
        if (std::memcmp(image.data(), "MLCK", 4) != 0)
        {
            throw CorruptCheckpoint(where + ": bad magic");
        }
        const auto body_len = get_le<std::uint64_t>(image, 18);
        if (body_len < 1 || body_len != image.size() - kHeaderLen - 4)
        {
            throw CorruptCheckpoint(where + ": body length mismatch");
        }
        const auto stored = get_le<std::uint32_t>(image, image.size() - 4);
        if (stored != crc_of(image.first(image.size() - 4)))
        {
            throw CorruptCheckpoint(where + ": crc mismatch");
        }
        if (get_le<std::uint16_t>(image, 4) != kCheckpointVersion)
        {
            throw CorruptCheckpoint(where + ": unsupported version");
        }
        Checkpoint ck;
        ck.rank = static_cast<Rank>(get_le<std::uint32_t>(image, 6));
        ck.iter = static_cast<Iter>(get_le<std::uint64_t>(image, 10));
        const auto kid = std::to_integer<std::uint8_t>(image[kHeaderLen]);
        if (kid != static_cast<std::uint8_t>(KernelId::Cg) && kid != static_cast<std::uint8_t>(KernelId::Stencil))
        {
            throw CorruptCheckpoint(where + ": unknown kernel id");
        }
        ck.kernel = static_cast<KernelId>(kid);
        auto body = image.subspan(kHeaderLen + 1, body_len - 1);
        ck.state.assign(body.begin(), body.end());
        return ck;
    }

    std::string MemoryCheckpointStore::write(const Checkpoint &ck)
    {
        m_images[{ck.kernel, ck.rank}] = encode_checkpoint(ck);
        return "mem:" + kernel_name(ck.kernel) + "/" + std::to_string(ck.rank);
    }

    Checkpoint MemoryCheckpointStore::read(KernelId kernel, Rank rank) const
    {
        auto it = m_images.find({kernel, rank});
        if (it == m_images.end())
        {
            throw MissingCheckpoint("no checkpoint for rank " + std::to_string(rank));
        }
        return decode_checkpoint(it->second, "mem:" + std::to_string(rank));
    }

    bool MemoryCheckpointStore::contains(KernelId kernel, Rank rank) const
    {
        return m_images.count({kernel, rank}) != 0;
    }

    Bytes *MemoryCheckpointStore::image(KernelId kernel, Rank rank)
    {
        auto it = m_images.find({kernel, rank});
        return it == m_images.end() ? nullptr : &it->second;
    }

    FileCheckpointStore::FileCheckpointStore(std::filesystem::path dir) : m_dir(std::move(dir))
    {
        std::error_code ec;
        std::filesystem::create_directories(m_dir, ec);
        if (ec)
        {
            throw IoError("cannot create " + m_dir.string() + ": " + ec.message());
        }
    }

    std::filesystem::path FileCheckpointStore::path_for(KernelId kernel, Rank rank) const
    {
        return m_dir / ("ckpt_" + kernel_name(kernel) + "_" + std::to_string(rank) + ".bin");
    }

    std::string FileCheckpointStore::write(const Checkpoint &ck)
    {
        const auto final_path = path_for(ck.kernel, ck.rank);
        auto tmp = final_path;
        tmp += ".tmp";
        const Bytes image = encode_checkpoint(ck);
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw IoError("cannot write " + tmp.string());
            }
            out.write(reinterpret_cast<const char *>(image.data()), static_cast<std::streamsize>(image.size()));
            if (!out)
            {
                throw IoError("short write to " + tmp.string());
            }
        }
        // Validate the new generation before it replaces the old one.
        const Bytes back = read_file(tmp);
        if (back != image)
        {
            throw IoError("read-back mismatch for " + tmp.string());
        }
        decode_checkpoint(back, tmp.string());
        std::error_code ec;
        std::filesystem::rename(tmp, final_path, ec);
        if (ec)
        {
            throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
        }
        return final_path.string();
    }

    Checkpoint FileCheckpointStore::read(KernelId kernel, Rank rank) const
    {
        const auto p = path_for(kernel, rank);
        if (!std::filesystem::exists(p))
        {
            throw MissingCheckpoint("no checkpoint at " + p.string());
        }
        return decode_checkpoint(read_file(p), p.string());
    }

    bool FileCheckpointStore::contains(KernelId kernel, Rank rank) const
    {
        return std::filesystem::exists(path_for(kernel, rank));
    }
}
