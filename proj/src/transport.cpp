#include "unio/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>

#include "backends.hpp"
#include "unio/config.hpp"

namespace unio::transport {

namespace {
std::atomic<uint64_t> g_live_workers{0};
} // namespace

uint64_t Tag::encode() const {
    uint64_t raw = static_cast<uint64_t>(connection_id) << 32;
    raw |= static_cast<uint64_t>(server_to_client ? 1 : 0) << 31;
    raw |= static_cast<uint64_t>(static_cast<uint8_t>(kind) & 0x3) << 29;
    raw |= aux & kAuxMax;
    return raw;
}

Tag Tag::decode(uint64_t raw) {
    Tag t;
    t.connection_id = static_cast<uint32_t>(raw >> 32);
    t.server_to_client = ((raw >> 31) & 0x1) != 0;
    t.kind = static_cast<MsgKind>((raw >> 29) & 0x3);
    t.aux = static_cast<uint32_t>(raw & kAuxMax);
    return t;
}

Worker::Token::Token() { g_live_workers.fetch_add(1, std::memory_order_relaxed); }
Worker::Token::~Token() { g_live_workers.fetch_sub(1, std::memory_order_relaxed); }

Worker::Worker() = default;

EndpointOptions EndpointOptions::from_env() {
    return EndpointOptions{slice_length_from_env(), ring_buffer_size_from_env()};
}

uint64_t Worker::live_count() { return g_live_workers.load(std::memory_order_relaxed); }

std::unique_ptr<Worker> Worker::create(const std::string& backend) {
    if (backend == "loopback") return make_loopback_worker();
    if (backend == "stream") return make_stream_worker();
    throw Error(Errc::unknown_backend, "no such backend: " + backend);
}

Endpoint::Endpoint(std::size_t slice_length, std::size_t recv_capacity)
    : slice_length_(slice_length), recv_capacity_(recv_capacity) {}

std::optional<SendRequest> Endpoint::send_data(std::span<const std::byte> payload) {
    if (state_ == EndpointState::closed) throw Error(Errc::closed, "endpoint closed");
    if (state_ != EndpointState::established)
        throw Error(Errc::invalid_state, "endpoint not established");
    if (payload.empty() || payload.size() > slice_length_)
        throw Error(Errc::invalid_length, "DATA payload must be 1..slice_length bytes");
    if (send_credit_ < payload.size()) return std::nullopt; // would-block

    send_credit_ -= payload.size();
    inflight_data_bytes_ += payload.size();
    max_inflight_data_bytes_ = std::max(max_inflight_data_bytes_, inflight_data_bytes_);
    ++data_requests_sent_;

    SendRequest request;
    Tag tag{connection_id_, is_server_side_, MsgKind::data, 0};
    enqueue(tag, std::vector<std::byte>(payload.begin(), payload.end()), request);
    return request;
}

std::size_t Endpoint::read_bytes(std::span<std::byte> dst) {
    std::size_t copied = 0;
    while (copied < dst.size() && !recv_segments_.empty()) {
        auto& seg = recv_segments_.front();
        const std::size_t avail = seg.size() - recv_front_offset_;
        const std::size_t n = std::min(avail, dst.size() - copied);
        std::memcpy(dst.data() + copied, seg.data() + recv_front_offset_, n);
        copied += n;
        recv_front_offset_ += n;
        if (recv_front_offset_ == seg.size()) {
            recv_segments_.pop_front();
            recv_front_offset_ = 0;
        }
    }
    recv_pending_bytes_ -= copied;
    freed_since_grant_ += copied;

    // Grant freed receive space back to the sender once a quarter of the
    // capacity has been consumed since the last grant.
    if (state_ == EndpointState::established && freed_since_grant_ >= recv_capacity_ / 4) {
        const uint32_t grant =
            static_cast<uint32_t>(std::min<std::size_t>(freed_since_grant_, Tag::kAuxMax));
        freed_since_grant_ -= grant;
        Tag tag{connection_id_, is_server_side_, MsgKind::ack, grant};
        enqueue(tag, {}, SendRequest{});
    }
    return copied;
}

void Endpoint::handle_inbound(const Tag& tag, std::vector<std::byte> payload) {
    switch (tag.kind) {
    case MsgKind::data:
        recv_pending_bytes_ += payload.size();
        recv_segments_.push_back(std::move(payload));
        break;
    case MsgKind::ack:
        if (state_ == EndpointState::handshaking) {
            connection_id_ = tag.connection_id;
            send_credit_ = tag.aux;
            state_ = EndpointState::established;
        } else {
            send_credit_ += tag.aux;
            inflight_data_bytes_ -= std::min<uint64_t>(inflight_data_bytes_, tag.aux);
        }
        break;
    case MsgKind::fin:
        eof_ = true;
        break;
    case MsgKind::syn:
        // SYNs are consumed by listeners, never by endpoints.
        break;
    }
}

void Endpoint::close(bool graceful) {
    if (state_ == EndpointState::closed) return; // idempotent
    if (!graceful) drop_pending_sends();
    if (state_ != EndpointState::failed && !fin_sent_) {
        Tag tag{connection_id_, is_server_side_, MsgKind::fin, 0};
        enqueue(tag, {}, SendRequest{});
        fin_sent_ = true;
    }
    state_ = EndpointState::closed;
}

void Endpoint::fail(const std::string& reason) {
    if (state_ == EndpointState::established || state_ == EndpointState::handshaking) {
        state_ = EndpointState::failed;
        failure_reason_ = reason;
    }
}

} // namespace unio::transport
