#include "unio/ring_buffer.hpp"

#include <algorithm>
#include <cstring>

namespace unio {

RingBuffer::RingBuffer(std::size_t capacity, std::size_t slice_length)
    : capacity_(capacity), slice_length_(slice_length), storage_(capacity) {
    if (capacity == 0 || slice_length == 0)
        throw Error(Errc::invalid_value, "ring capacity and slice length must be positive");
    if (slice_length > capacity)
        throw Error(Errc::invalid_value, "slice length exceeds ring capacity");
}

bool RingBuffer::can_reserve(std::size_t len) const {
    if (len == 0 || len > slice_length_) return false;
    const std::size_t pos = static_cast<std::size_t>(head_ % capacity_);
    const std::size_t end_gap = capacity_ - pos;
    const std::size_t pad = end_gap < len ? end_gap : 0;
    return free_bytes() >= pad + len;
}

std::size_t RingBuffer::max_reservable() const {
    const std::size_t pos = static_cast<std::size_t>(head_ % capacity_);
    const std::size_t end_gap = capacity_ - pos;
    const std::size_t free = free_bytes();
    // Without padding the region must fit in the end gap; with end-gap
    // padding it starts at offset 0 and may use the remaining free space.
    std::size_t best = std::min(free, end_gap);
    if (free > end_gap) best = std::max(best, free - end_gap);
    return std::min(best, slice_length_);
}

std::optional<Region> RingBuffer::reserve(std::size_t len) {
    if (len == 0) throw Error(Errc::invalid_value, "zero-length reservation");
    if (len > slice_length_) throw Error(Errc::oversize, "reservation exceeds slice length");

    const std::size_t pos = static_cast<std::size_t>(head_ % capacity_);
    const std::size_t end_gap = capacity_ - pos;
    const std::size_t pad = end_gap < len ? end_gap : 0;
    if (free_bytes() < pad + len) return std::nullopt;

    Record rec{next_id_++, head_ + pad, pad, len, 0, RegionState::reserved};
    head_ += pad + len;
    records_.push_back(rec);
    return Region{rec.id, static_cast<std::size_t>(rec.logical_start % capacity_), len};
}

void RingBuffer::commit(const Region& region, std::size_t actual_len) {
    Record& rec = find(region.id);
    if (rec.state != RegionState::reserved)
        throw Error(Errc::invalid_state, "commit on non-reserved region");
    if (actual_len > rec.length)
        throw Error(Errc::invalid_value, "commit length exceeds reservation");

    const bool latest = rec.logical_start + rec.length == head_;
    if (latest) {
        if (actual_len == 0) {
            head_ = rec.logical_start - rec.padding_before;
            std::erase_if(records_, [&](const Record& r) { return r.id == rec.id; });
            return;
        }
        head_ -= rec.length - actual_len;
        rec.length = actual_len;
    } else {
        if (actual_len == 0)
            throw Error(Errc::invalid_state, "zero commit only allowed on most recent reservation");
        rec.padding_after += rec.length - actual_len;
        rec.length = actual_len;
    }
    rec.state = RegionState::committed;
}

void RingBuffer::mark_in_flight(const Region& region) {
    Record& rec = find(region.id);
    if (rec.state != RegionState::committed)
        throw Error(Errc::invalid_state, "in-flight transition requires committed region");
    rec.state = RegionState::in_flight;
}

void RingBuffer::release(const Region& region) {
    if (records_.empty()) throw Error(Errc::invalid_state, "release with no outstanding regions");
    Record& front = records_.front();
    if (front.id != region.id)
        throw Error(Errc::fifo_violation, "regions must be released in reservation order");
    if (front.state != RegionState::in_flight)
        throw Error(Errc::invalid_state, "release requires in-flight region");
    tail_ = front.logical_start + front.length + front.padding_after;
    records_.pop_front();
}

std::optional<RingBuffer::GatherResult>
RingBuffer::merge_gather(std::span<const std::span<const std::byte>> srcs) {
    if (srcs.empty()) return std::nullopt;
    if (srcs.front().empty()) return std::nullopt;
    if (srcs.front().size() > slice_length_)
        throw Error(Errc::oversize, "first span exceeds slice length, caller must chunk");

    std::size_t total = 0;
    std::size_t count = 0;
    for (const auto& s : srcs) {
        if (s.empty()) break;
        if (total + s.size() > slice_length_) break;
        total += s.size();
        ++count;
    }
    // Shrink the prefix until the reservation fits the ring.
    while (count > 0 && !can_reserve(total)) {
        --count;
        total -= srcs[count].size();
    }
    if (count == 0) return std::nullopt;

    auto region = reserve(total);
    auto dst = region_bytes(*region);
    std::size_t off = 0;
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(dst.data() + off, srcs[i].data(), srcs[i].size());
        off += srcs[i].size();
    }
    commit(*region, total);
    return GatherResult{*region, count};
}

std::span<std::byte> RingBuffer::region_bytes(const Region& region) {
    const Record& rec = find(region.id);
    return {storage_.data() + (rec.logical_start % capacity_), rec.length};
}

std::span<const std::byte> RingBuffer::region_bytes(const Region& region) const {
    const Record& rec = find(region.id);
    return {storage_.data() + (rec.logical_start % capacity_), rec.length};
}

RegionState RingBuffer::region_state(uint64_t id) const {
    for (const auto& r : records_)
        if (r.id == id) return r.state;
    return RegionState::released;
}

std::size_t RingBuffer::padding_bytes() const {
    std::size_t pad = 0;
    for (const auto& r : records_) pad += r.padding_before + r.padding_after;
    return pad;
}

RingBuffer::Record& RingBuffer::find(uint64_t id) {
    for (auto& r : records_)
        if (r.id == id) return r;
    throw Error(Errc::invalid_state, "unknown or already released region");
}

const RingBuffer::Record& RingBuffer::find(uint64_t id) const {
    return const_cast<RingBuffer*>(this)->find(id);
}

} // namespace unio
