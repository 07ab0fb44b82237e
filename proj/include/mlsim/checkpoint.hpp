#pragma once

#include "mlsim/types.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>

namespace mlsim
{
    bool should_checkpoint(Iter iter, Iter cp_int);

    struct Checkpoint
    {
        Rank rank = 0;
        Iter iter = 0;
        KernelId kernel = KernelId::Cg;
        Bytes state;

        bool operator==(const Checkpoint &) const = default;
    };

    // Little-endian image: "MLCK", u16 version, u32 rank, u64 iter,
    // u64 body_len, body (kernel id byte + state), u32 crc32(header + body).
    inline constexpr std::uint16_t kCheckpointVersion = 1;

    Bytes encode_checkpoint(const Checkpoint &ck);
    // Throws CorruptCheckpoint on any framing or checksum problem.
    Checkpoint decode_checkpoint(std::span<const std::byte> image, const std::string &where = "checkpoint");

    class CheckpointStore
    {
    public:
        virtual ~CheckpointStore() = default;

        // Returns the location the checkpoint was stored under.
        virtual std::string write(const Checkpoint &ck) = 0;
        // Throws MissingCheckpoint or CorruptCheckpoint.
        virtual Checkpoint read(KernelId kernel, Rank rank) const = 0;
        virtual bool contains(KernelId kernel, Rank rank) const = 0;
    };

    class MemoryCheckpointStore final : public CheckpointStore
    {
    public:
        std::string write(const Checkpoint &ck) override;
        Checkpoint read(KernelId kernel, Rank rank) const override;
        bool contains(KernelId kernel, Rank rank) const override;

        // Direct access to the stored image, for corruption tests.
        Bytes *image(KernelId kernel, Rank rank);

    private:
        std::map<std::pair<KernelId, Rank>, Bytes> m_images;
    };

    // ckpt_<kernel>_<rank>.bin in one directory, one generation per rank.
    class FileCheckpointStore final : public CheckpointStore
    {
    public:
        explicit FileCheckpointStore(std::filesystem::path dir);

        std::string write(const Checkpoint &ck) override;
        Checkpoint read(KernelId kernel, Rank rank) const override;
        bool contains(KernelId kernel, Rank rank) const override;

        std::filesystem::path path_for(KernelId kernel, Rank rank) const;
        const std::filesystem::path &dir() const noexcept { return m_dir; }

    private:
        std::filesystem::path m_dir;
    };

    std::string kernel_name(KernelId id);
}
