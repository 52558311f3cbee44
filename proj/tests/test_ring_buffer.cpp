#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "ring_shadow.hpp"
#include "unio/ring_buffer.hpp"

using namespace unio;

namespace {

std::vector<std::byte> bytes(std::size_t n, uint8_t seed = 0) {
    std::vector<std::byte> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<std::byte>((seed + i) & 0xff);
    return v;
}

std::vector<std::span<const std::byte>> as_spans(const std::vector<std::vector<std::byte>>& store) {
    std::vector<std::span<const std::byte>> spans;
    spans.reserve(store.size());
    for (const auto& s : store) spans.emplace_back(s);
    return spans;
}

} // namespace

TEST_CASE("reserve on an empty ring starts at offset zero") {
    RingBuffer ring(8192, 2048);
    auto r = ring.reserve(1024);
    REQUIRE(r.has_value());
    CHECK(r->offset == 0);
    CHECK(r->length == 1024);
    CHECK(ring.used_bytes() == 1024);
}

TEST_CASE("reserve rejects degenerate lengths") {
    RingBuffer ring(8192, 2048);
    CHECK_THROWS_WITH_AS(ring.reserve(2049), "oversize: reservation exceeds slice length", Error);
    CHECK_THROWS_AS(ring.reserve(0), Error);
}

TEST_CASE("reserve returns insufficient when free space runs out") {
    RingBuffer ring(4096, 4096);
    REQUIRE(ring.reserve(4096).has_value());
    CHECK(!ring.reserve(1).has_value());
    CHECK(!ring.can_reserve(1));
}

TEST_CASE("a reservation that would cross the physical end pads and wraps to zero") {
    // capacity 1024, slice 512: after a full reserve/release cycle of 512
    // bytes and a 300-byte region at offset 512, the next 300-byte region
    // cannot fit in the 212-byte end gap.
    RingBuffer ring(1024, 512);
    ringshadow::ShadowRing model(1024, 512);

    auto first = ring.reserve(512);
    REQUIRE(first.has_value());
    CHECK(*model.reserve(512) == first->offset);
    ring.commit(*first, 512);
    model.commit(model.last_id(), 512);
    ring.mark_in_flight(*first);
    model.mark_in_flight(model.last_id());
    ring.release(*first);
    model.release(model.first_id());

    auto second = ring.reserve(300);
    REQUIRE(second.has_value());
    CHECK(second->offset == 512);
    CHECK(second->offset == *model.reserve(300));

    auto third = ring.reserve(300);
    REQUIRE(third.has_value());
    CHECK(third->offset == 0);
    CHECK(third->offset == *model.reserve(300));
    CHECK(ring.padding_bytes() == 212);
    CHECK(model.padding_bytes() == 212);
    CHECK(ring.free_bytes() == model.free_bytes());
}

TEST_CASE("commit of the full length leaves used bytes unchanged") {
    RingBuffer ring(8192, 2048);
    auto r = ring.reserve(2000);
    REQUIRE(r.has_value());
    const auto used = ring.used_bytes();
    ring.commit(*r, 2000);
    CHECK(ring.used_bytes() == used);
    CHECK(ring.region_state(r->id) == RegionState::committed);
}

TEST_CASE("zero commit cancels the most recent reservation entirely") {
    RingBuffer ring(8192, 2048);
    auto r = ring.reserve(2000);
    REQUIRE(r.has_value());
    ring.commit(*r, 0);
    CHECK(ring.used_bytes() == 0);
    CHECK(ring.outstanding_regions() == 0);
}

TEST_CASE("zero commit on a non-latest reservation is rejected") {
    RingBuffer ring(8192, 2048);
    auto a = ring.reserve(100);
    auto b = ring.reserve(100);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    CHECK_THROWS_AS(ring.commit(*a, 0), Error);
}

TEST_CASE("shrinking a non-latest reservation retains the tail as padding") {
    RingBuffer ring(8192, 2048);
    ringshadow::ShadowRing model(8192, 2048);

    auto a = ring.reserve(200);
    model.reserve(200);
    const auto a_id = model.last_id();
    auto b = ring.reserve(50);
    model.reserve(50);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());

    ring.commit(*a, 100);
    model.commit(a_id, 100);
    CHECK(ring.padding_bytes() == 100);
    CHECK(model.padding_bytes() == 100);
    CHECK(ring.used_bytes() == 8192 - model.free_bytes());
}

TEST_CASE("releasing the oldest region returns its bytes and padding") {
    RingBuffer ring(1024, 512);
    auto warm = ring.reserve(512);
    ring.commit(*warm, 512);
    ring.mark_in_flight(*warm);
    ring.release(*warm);
    auto a = ring.reserve(300); // offset 512
    auto b = ring.reserve(300); // pads 212, offset 0
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    ring.commit(*a, 300);
    ring.commit(*b, 300);
    ring.mark_in_flight(*a);
    ring.mark_in_flight(*b);

    const auto free_before = ring.free_bytes();
    ring.release(*a);
    CHECK(ring.free_bytes() == free_before + 300);
    // The end-gap padding travels with the wrapped region.
    ring.release(*b);
    CHECK(ring.free_bytes() == free_before + 300 + 212 + 300);
}

TEST_CASE("out of order release is a FIFO violation") {
    RingBuffer ring(8192, 2048);
    auto a = ring.reserve(100);
    auto b = ring.reserve(100);
    ring.commit(*a, 100);
    ring.commit(*b, 100);
    ring.mark_in_flight(*a);
    ring.mark_in_flight(*b);
    CHECK_THROWS_AS(ring.release(*b), Error);
    try {
        ring.release(*b);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::fifo_violation);
    }
    ring.release(*a); // still possible afterwards
    ring.release(*b);
}

TEST_CASE("merge_gather packs 64 small spans into one region") {
    RingBuffer ring(1 << 20, 64 * 1024);
    std::vector<std::vector<std::byte>> store;
    for (int i = 0; i < 64; ++i) store.push_back(bytes(16, static_cast<uint8_t>(i)));
    const auto spans = as_spans(store);

    auto result = ring.merge_gather(spans);
    REQUIRE(result.has_value());
    CHECK(result->spans_consumed == 64);
    CHECK(result->region.length == 1024);

    // Byte fidelity: region content is the concatenation of consumed spans.
    auto view = ring.region_bytes(result->region);
    std::size_t off = 0;
    for (const auto& s : store) {
        CHECK(std::memcmp(view.data() + off, s.data(), s.size()) == 0);
        off += s.size();
    }
}

TEST_CASE("merge_gather rejects a leading zero-length span") {
    RingBuffer ring(8192, 2048);
    std::vector<std::byte> empty;
    std::vector<std::span<const std::byte>> spans{std::span<const std::byte>(empty)};
    CHECK(!ring.merge_gather(spans).has_value());
    CHECK(!ring.merge_gather({}).has_value());
}

TEST_CASE("merge_gather stops at the reservable prefix") {
    // 16 KiB ring with 8 KiB already outstanding leaves room for 8 of the
    // 16 one-KiB spans.
    RingBuffer ring(16384, 16384);
    auto blocker = ring.reserve(8192);
    REQUIRE(blocker.has_value());
    ring.commit(*blocker, 8192);

    std::vector<std::vector<std::byte>> store;
    for (int i = 0; i < 16; ++i) store.push_back(bytes(1024, static_cast<uint8_t>(i)));
    auto result = ring.merge_gather(as_spans(store));
    REQUIRE(result.has_value());
    CHECK(result->spans_consumed == 8);
    CHECK(result->region.length == 8192);

    // Maximality: one more span would exceed free space.
    CHECK(!ring.can_reserve(1));
}

TEST_CASE("merge_gather refuses a first span above the slice length") {
    RingBuffer ring(8192, 1024);
    auto big = bytes(1025);
    std::vector<std::span<const std::byte>> spans{std::span<const std::byte>(big)};
    CHECK_THROWS_AS(ring.merge_gather(spans), Error);
}

TEST_CASE("randomized operation sequences agree with the cell-map model") {
    std::mt19937 gen(20240811);
    std::uniform_int_distribution<int> op_dist(0, 99);

    for (int round = 0; round < 4; ++round) {
        const std::size_t cap = 1u << (9 + round);      // 512 .. 4096
        const std::size_t slice = cap / (1 + round % 3); // varies per round
        RingBuffer ring(cap, slice);
        ringshadow::ShadowRing model(cap, slice);

        struct Live {
            Region region;
            uint64_t model_id;
            int state; // 0 reserved, 1 committed, 2 in-flight
        };
        std::deque<Live> live;

        std::uniform_int_distribution<std::size_t> len_dist(1, slice);
        for (int step = 0; step < 2500; ++step) {
            const int op = op_dist(gen);
            if (op < 35) {
                const std::size_t len = len_dist(gen);
                auto got = ring.reserve(len);
                auto want = model.reserve(len);
                REQUIRE(got.has_value() == want.has_value());
                if (got) {
                    CHECK(got->offset == *want);
                    live.push_back(Live{*got, model.last_id(), 0});
                }
            } else if (op < 55) {
                // Commit a random reserved region, sometimes shrunk.
                for (auto& l : live) {
                    if (l.state != 0) continue;
                    std::uniform_int_distribution<std::size_t> cut(0, l.region.length);
                    std::size_t actual = cut(gen);
                    const bool latest = l.model_id == model.last_id();
                    if (actual == 0 && !latest) actual = 1;
                    if (actual == 0) {
                        ring.commit(l.region, 0);
                        model.commit(l.model_id, 0);
                        l.state = -1;
                    } else {
                        ring.commit(l.region, actual);
                        model.commit(l.model_id, actual);
                        l.region.length = actual;
                        l.state = 1;
                    }
                    break;
                }
                std::erase_if(live, [](const Live& l) { return l.state == -1; });
            } else if (op < 70) {
                for (auto& l : live) {
                    if (l.state == 1) {
                        ring.mark_in_flight(l.region);
                        model.mark_in_flight(l.model_id);
                        l.state = 2;
                        break;
                    }
                }
            } else if (op < 90) {
                if (!live.empty() && live.front().state == 2) {
                    ring.release(live.front().region);
                    model.release(live.front().model_id);
                    live.pop_front();
                }
            } else {
                std::uniform_int_distribution<std::size_t> span_count(1, 8);
                std::uniform_int_distribution<std::size_t> span_len(1, slice / 2 + 1);
                std::vector<std::vector<std::byte>> store;
                std::vector<std::size_t> lens;
                for (std::size_t i = 0, n = span_count(gen); i < n; ++i) {
                    const std::size_t len = std::min(span_len(gen), slice);
                    store.push_back(bytes(len));
                    lens.push_back(len);
                }
                auto got = ring.merge_gather(as_spans(store));
                auto want = model.merge_gather(lens);
                REQUIRE(got.has_value() == want.has_value());
                if (got) {
                    CHECK(got->region.offset == want->offset);
                    CHECK(got->region.length == want->length);
                    CHECK(got->spans_consumed == want->spans_consumed);
                    live.push_back(Live{got->region, model.last_id(), 1});
                }
            }

            // Conservation, checked after every operation.
            REQUIRE(ring.free_bytes() == model.free_bytes());
            REQUIRE(ring.used_bytes() == model.used_bytes());
            REQUIRE(ring.padding_bytes() == model.padding_bytes());
            REQUIRE(ring.outstanding_regions() == model.outstanding());
            REQUIRE(ring.max_reservable() == model.max_reservable());
        }
    }
}
