#pragma once

#include <stdexcept>
#include <string>

namespace marginlab {

// Every failure raised by the library derives from Error so callers (the CLI,
// the sweep runner) can map it to a status without knowing the concrete type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MARGINLAB_ERROR(Name)                    \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

MARGINLAB_ERROR(DomainError);
MARGINLAB_ERROR(DimensionMismatch);
MARGINLAB_ERROR(InvalidParam);
MARGINLAB_ERROR(ZeroVector);
MARGINLAB_ERROR(NonFinite);
MARGINLAB_ERROR(StepUnderflow);
MARGINLAB_ERROR(IncompatibleQuery);
MARGINLAB_ERROR(WrongMethod);
MARGINLAB_ERROR(HorizonTooShort);
MARGINLAB_ERROR(MissingInput);

#undef MARGINLAB_ERROR

} // namespace marginlab
