#pragma once

#include <stdexcept>
#include <string>

namespace unio {

enum class Errc {
    closed,
    invalid_state,
    invalid_value,
    invalid_length,
    oversize,
    fifo_violation,
    already_registered,
    unknown_option,
    unknown_backend,
    handshake_timeout,
    connect_failed,
    backend_failure,
    peer_desync,
    truncated_message,
    no_data,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace unio
