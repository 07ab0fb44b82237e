#include "mlsim/error.hpp"

namespace mlsim
{
    int exit_code(ErrorKind kind) noexcept
    {
        switch (kind)
        {
        case ErrorKind::Config:
            return 2;
        case ErrorKind::Io:
            return 3;
        case ErrorKind::Verification:
            return 4;
        case ErrorKind::Protocol:
            return 5;
        }
        return 1;
    }
}
