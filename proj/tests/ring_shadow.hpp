#pragma once

// Brute-force reference model for the send ring. Instead of cursor
// arithmetic it keeps one labelled cell per byte and recomputes free space
// and padding by counting cells, so disagreements with the real ring cannot
// share a root cause.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ringshadow {

enum class Cell : char { free_cell, padding, data };

struct ShadowRegion {
    uint64_t id = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
    std::size_t pad_before = 0;
    std::size_t pad_after = 0;
    int state = 0; // 0 reserved, 1 committed, 2 in-flight
};

class ShadowRing {
public:
    ShadowRing(std::size_t capacity, std::size_t slice)
        : capacity_(capacity), slice_(slice), cells_(capacity, Cell::free_cell) {}

    std::size_t free_bytes() const {
        std::size_t n = 0;
        for (Cell c : cells_)
            if (c == Cell::free_cell) ++n;
        return n;
    }
    std::size_t used_bytes() const { return capacity_ - free_bytes(); }
    std::size_t padding_bytes() const {
        std::size_t n = 0;
        for (Cell c : cells_)
            if (c == Cell::padding) ++n;
        return n;
    }
    std::size_t outstanding() const { return regions_.size(); }

    bool can_reserve(std::size_t len) const {
        if (len == 0 || len > slice_) return false;
        return free_bytes() >= len + end_gap_padding(len);
    }

    std::size_t max_reservable() const {
        std::size_t best = 0;
        for (std::size_t len = 1; len <= slice_ && len <= capacity_; ++len)
            if (can_reserve(len)) best = len;
        return best;
    }

    // Returns the physical offset, or nullopt when space is insufficient.
    // Throws on contract violations just like the real ring.
    std::optional<std::size_t> reserve(std::size_t len) {
        if (len == 0) throw std::invalid_argument("zero reserve");
        if (len > slice_) throw std::length_error("oversize reserve");
        const std::size_t pad = end_gap_padding(len);
        if (free_bytes() < len + pad) return std::nullopt;

        ShadowRegion r;
        r.id = next_id_++;
        r.pad_before = pad;
        for (std::size_t i = 0; i < pad; ++i) set_cell(Cell::padding);
        r.offset = head_;
        r.length = len;
        for (std::size_t i = 0; i < len; ++i) set_cell(Cell::data);
        regions_.push_back(r);
        return r.offset;
    }

    void commit(uint64_t id, std::size_t actual) {
        ShadowRegion& r = find(id);
        if (r.state != 0) throw std::logic_error("commit on non-reserved");
        if (actual > r.length) throw std::length_error("commit grows region");
        const bool latest = (id == regions_.back().id);
        if (actual == 0) {
            if (!latest) throw std::logic_error("zero commit on non-latest");
            rewind(r.length + r.pad_before);
            regions_.pop_back();
            return;
        }
        const std::size_t extra = r.length - actual;
        if (latest) {
            rewind(extra);
        } else {
            // Freed tail is unreachable until release; keep it as padding.
            for (std::size_t i = 0; i < extra; ++i)
                cells_[(r.offset + actual + i) % capacity_] = Cell::padding;
            r.pad_after += extra;
        }
        r.length = actual;
        r.state = 1;
    }

    void mark_in_flight(uint64_t id) {
        ShadowRegion& r = find(id);
        if (r.state != 1) throw std::logic_error("in-flight on non-committed");
        r.state = 2;
    }

    void release(uint64_t id) {
        if (regions_.empty() || regions_.front().id != id)
            throw std::logic_error("non-FIFO release");
        const ShadowRegion r = regions_.front();
        if (r.state != 2) throw std::logic_error("release on non-in-flight");
        std::size_t start = (r.offset + capacity_ - r.pad_before) % capacity_;
        const std::size_t total = r.pad_before + r.length + r.pad_after;
        for (std::size_t i = 0; i < total; ++i)
            cells_[(start + i) % capacity_] = Cell::free_cell;
        regions_.pop_front();
    }

    struct GatherOutcome {
        std::size_t offset;
        std::size_t length;
        std::size_t spans_consumed;
    };

    std::optional<GatherOutcome> merge_gather(std::span<const std::size_t> span_lengths) {
        if (span_lengths.empty()) return std::nullopt;
        if (span_lengths.front() == 0) return std::nullopt;
        if (span_lengths.front() > slice_) throw std::length_error("oversize first span");

        std::size_t count = 0;
        std::size_t total = 0;
        for (std::size_t len : span_lengths) {
            if (len == 0 || total + len > slice_) break;
            total += len;
            ++count;
        }
        while (count > 0 && !can_reserve(total)) {
            total -= span_lengths[count - 1];
            --count;
        }
        if (count == 0) return std::nullopt;

        const auto offset = reserve(total);
        const uint64_t id = regions_.back().id;
        commit(id, total);
        return GatherOutcome{*offset, total, count};
    }

    uint64_t last_id() const { return regions_.empty() ? 0 : regions_.back().id; }
    uint64_t first_id() const { return regions_.empty() ? 0 : regions_.front().id; }
    const std::deque<ShadowRegion>& regions() const { return regions_; }

private:
    std::size_t end_gap_padding(std::size_t len) const {
        const std::size_t gap = capacity_ - head_;
        return gap < len ? gap : 0;
    }

    void set_cell(Cell c) {
        cells_[head_] = c;
        head_ = (head_ + 1) % capacity_;
    }

    void rewind(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            head_ = (head_ + capacity_ - 1) % capacity_;
            cells_[head_] = Cell::free_cell;
        }
    }

    ShadowRegion& find(uint64_t id) {
        for (ShadowRegion& r : regions_)
            if (r.id == id) return r;
        throw std::logic_error("unknown region id");
    }

    std::size_t capacity_;
    std::size_t slice_;
    std::vector<Cell> cells_;
    std::size_t head_ = 0;
    uint64_t next_id_ = 1;
    std::deque<ShadowRegion> regions_;
};

} // namespace ringshadow
