#pragma once

#include <stdexcept>
#include <string>

namespace mlsim
{
    enum class ErrorKind
    {
        Config,
        Io,
        Verification,
        Protocol,
    };

    // Process exit codes used by the CLI. 0 is verified success.
    int exit_code(ErrorKind kind) noexcept;

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), m_kind(kind) {}

        ErrorKind kind() const noexcept { return m_kind; }

    private:
        ErrorKind m_kind;
    };

    class ConfigError : public Error
    {
    public:
        explicit ConfigError(const std::string &what) : Error(ErrorKind::Config, what) {}
    };

    class IoError : public Error
    {
    public:
        explicit IoError(const std::string &what) : Error(ErrorKind::Io, what) {}
    };

    class VerificationError : public Error
    {
    public:
        explicit VerificationError(const std::string &what) : Error(ErrorKind::Verification, what) {}
    };

    class ProtocolError : public Error
    {
    public:
        explicit ProtocolError(const std::string &what) : Error(ErrorKind::Protocol, what) {}
    };

    // A replay needed a payload the log no longer holds. Reaching this under a
    // Local decision means the rollback decision was wrong.
    class MissingLogEntry : public ProtocolError
    {
    public:
        explicit MissingLogEntry(const std::string &what) : ProtocolError(what) {}
    };

    class MissingCheckpoint : public IoError
    {
    public:
        explicit MissingCheckpoint(const std::string &what) : IoError(what) {}
    };

    class CorruptCheckpoint : public IoError
    {
    public:
        explicit CorruptCheckpoint(const std::string &what) : IoError(what) {}
    };
}
