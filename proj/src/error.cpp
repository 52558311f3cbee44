#include "unio/error.hpp"

namespace unio {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::closed: return "closed";
    case Errc::invalid_state: return "invalid_state";
    case Errc::invalid_value: return "invalid_value";
    case Errc::invalid_length: return "invalid_length";
    case Errc::oversize: return "oversize";
    case Errc::fifo_violation: return "fifo_violation";
    case Errc::already_registered: return "already_registered";
    case Errc::unknown_option: return "unknown_option";
    case Errc::unknown_backend: return "unknown_backend";
    case Errc::handshake_timeout: return "handshake_timeout";
    case Errc::connect_failed: return "connect_failed";
    case Errc::backend_failure: return "backend_failure";
    case Errc::peer_desync: return "peer_desync";
    case Errc::truncated_message: return "truncated_message";
    case Errc::no_data: return "no_data";
    }
    return "unknown";
}

} // namespace unio
