#pragma once

#include <stdexcept>
#include <string>

namespace dex {

/// Network or process failure talking to an external service. Retryable.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, int attempts)
        : std::runtime_error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
    int attempts() const { return attempts_; }

private:
    int attempts_;
};

/// The peer answered, but not in the expected wire format.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace dex
