#include "unio/config.hpp"

#include <cstdlib>
#include <string>

namespace unio {

namespace {
std::size_t env_size(const char* name, std::size_t fallback) {
    const char* raw = std::getenv(name);
    if (raw == nullptr || *raw == '\0') return fallback;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (end == raw || *end != '\0' || v == 0) return fallback;
    return static_cast<std::size_t>(v);
}
} // namespace

std::size_t ring_buffer_size_from_env() {
    return env_size("RING_BUFFER_SIZE", kDefaultRingBufferSize);
}

std::size_t slice_length_from_env() {
    return env_size("SLICE_LENGTH", kDefaultSliceLength);
}

} // namespace unio
