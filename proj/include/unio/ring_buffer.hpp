#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "unio/error.hpp"

namespace unio {

enum class RegionState : uint8_t { reserved, committed, in_flight, released };

// Handle to a contiguous reservation inside a RingBuffer. Regions never
// span the physical wrap point; when the tail gap is too small the gap is
// skipped as padding and the region starts at offset 0.
struct Region {
    uint64_t id = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
};

// Bounded circular outgoing byte store. Regions are reserved, committed
// (possibly shrunk), marked in-flight while a transport send references
// them, and released strictly in reservation order.
class RingBuffer {
public:
    RingBuffer(std::size_t capacity, std::size_t slice_length);

    std::size_t capacity() const { return capacity_; }
    std::size_t slice_length() const { return slice_length_; }

    // Bytes between release and commit cursor, including padding.
    std::size_t used_bytes() const { return static_cast<std::size_t>(head_ - tail_); }
    std::size_t free_bytes() const { return capacity_ - used_bytes(); }

    // Whether a reservation of len bytes would currently succeed.
    bool can_reserve(std::size_t len) const;

    // Largest single reservation (<= slice_length) that would succeed now.
    std::size_t max_reservable() const;

    // Contiguous region of exactly len bytes, or nullopt when space is
    // insufficient. len must satisfy 0 < len <= slice_length.
    std::optional<Region> reserve(std::size_t len);

    // Shrink a reserved region to actual_len and mark it committed. The
    // freed tail is returned to free space only for the most recent
    // reservation; otherwise it is retained as padding. actual_len == 0
    // cancels the most recent reservation entirely.
    void commit(const Region& region, std::size_t actual_len);

    void mark_in_flight(const Region& region);

    // Release the oldest outstanding region (FIFO only); its bytes and any
    // adjacent padding return to free space.
    void release(const Region& region);

    struct GatherResult {
        Region region;
        std::size_t spans_consumed = 0;
    };

    // Copy the longest prefix of whole spans that fits into a single fresh
    // committed region bounded by slice_length and free space. Returns
    // nullopt when not even the first span fits (or it is empty).
    std::optional<GatherResult> merge_gather(std::span<const std::span<const std::byte>> srcs);

    // Writable view of a reserved region's bytes.
    std::span<std::byte> region_bytes(const Region& region);
    std::span<const std::byte> region_bytes(const Region& region) const;

    RegionState region_state(uint64_t id) const;

    // Accounting, for invariant checks: bytes currently tracked as padding.
    std::size_t padding_bytes() const;
    std::size_t outstanding_regions() const { return records_.size(); }

private:
    struct Record {
        uint64_t id;
        uint64_t logical_start; // monotone cursor position of first byte
        std::size_t padding_before;
        std::size_t length;
        std::size_t padding_after;
        RegionState state;
    };

    Record& find(uint64_t id);
    const Record& find(uint64_t id) const;

    std::size_t capacity_;
    std::size_t slice_length_;
    std::vector<std::byte> storage_;
    uint64_t head_ = 0; // commit cursor (monotone)
    uint64_t tail_ = 0; // release cursor (monotone)
    uint64_t next_id_ = 1;
    std::deque<Record> records_;
};

} // namespace unio
