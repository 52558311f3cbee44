#pragma once

#include <cstddef>

namespace unio {

// Sizes are read from the environment on each call so tests can override
// them per section. Defaults: 8 MiB ring, 64 KiB slices.
inline constexpr std::size_t kDefaultRingBufferSize = 8 * 1024 * 1024;
inline constexpr std::size_t kDefaultSliceLength = 64 * 1024;

// RING_BUFFER_SIZE environment variable, or the default.
std::size_t ring_buffer_size_from_env();

// SLICE_LENGTH environment variable, or the default.
std::size_t slice_length_from_env();

} // namespace unio
