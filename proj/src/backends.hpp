#pragma once

#include <memory>

#include "unio/transport.hpp"

namespace unio::transport {

std::unique_ptr<Worker> make_loopback_worker();
std::unique_ptr<Worker> make_stream_worker();

} // namespace unio::transport
