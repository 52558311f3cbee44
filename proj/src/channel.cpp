#include "unio/channel.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <thread>

#include "unio/config.hpp"
#include "unio/selector.hpp"

namespace unio {

namespace {
std::atomic<uint64_t> g_next_channel_id{0};
std::atomic<uint64_t> g_open_channels{0};
std::atomic<uint64_t> g_open_server_channels{0};

constexpr std::chrono::seconds kCloseDrainLimit{5};
} // namespace

uint64_t open_channel_count() { return g_open_channels.load(); }
uint64_t open_server_channel_count() { return g_open_server_channels.load(); }

Pollable::~Pollable() {
    auto key = selection_key();
    if (key) key->cancel();
}

std::shared_ptr<SelectionKey> Pollable::selection_key() const {
    std::lock_guard lock(reg_mutex_);
    return key_;
}

// ---------------------------------------------------------------- Channel

Channel::Channel(const std::string& backend)
    : backend_(backend),
      id_(g_next_channel_id.fetch_add(1) + 1),
      ring_capacity_(ring_buffer_size_from_env()),
      slice_length_(slice_length_from_env()),
      recv_capacity_(ring_buffer_size_from_env()),
      worker_(transport::Worker::create(backend)) {
    g_open_channels.fetch_add(1);
}

Channel::Channel(AcceptedTag, std::string backend, std::unique_ptr<transport::Worker> worker,
                 std::unique_ptr<transport::Endpoint> endpoint, std::size_t ring_capacity,
                 std::size_t slice_length, std::size_t recv_capacity)
    : backend_(std::move(backend)),
      id_(g_next_channel_id.fetch_add(1) + 1),
      state_(ChannelState::connected),
      ring_capacity_(ring_capacity),
      slice_length_(slice_length),
      recv_capacity_(recv_capacity),
      worker_(std::move(worker)),
      endpoint_(std::move(endpoint)),
      ring_(std::make_unique<RingBuffer>(ring_capacity, slice_length)) {
    g_open_channels.fetch_add(1);
}

Channel::~Channel() {
    try {
        close();
    } catch (...) {
    }
    if (state_ != ChannelState::closed) g_open_channels.fetch_sub(1);
}

void Channel::connect(const std::string& remote) {
    if (state_ != ChannelState::created)
        throw Error(Errc::invalid_state, "connect requires a fresh channel");
    try {
        endpoint_ =
            worker_->connect(remote, transport::EndpointOptions{slice_length_, recv_capacity_});
        state_ = ChannelState::connecting;
    } catch (const Error& e) {
        connect_failure_ = e.what();
        state_ = ChannelState::connecting; // failure surfaces on finish_connect
    }
}

bool Channel::finish_connect() {
    if (state_ == ChannelState::connected) return true;
    if (state_ == ChannelState::closed) throw Error(Errc::closed, "channel closed");
    if (state_ != ChannelState::connecting)
        throw Error(Errc::invalid_state, "finish_connect before connect");

    if (!connect_failure_.empty()) {
        const std::string why = connect_failure_;
        close();
        throw Error(Errc::connect_failed, why);
    }

    process();
    switch (endpoint_->state()) {
    case transport::EndpointState::established:
        state_ = ChannelState::connected;
        ring_ = std::make_unique<RingBuffer>(ring_capacity_, slice_length_);
        return true;
    case transport::EndpointState::failed: {
        const std::string why = endpoint_->failure_reason();
        close();
        throw Error(Errc::connect_failed, why);
    }
    default:
        return false;
    }
}

std::optional<std::size_t> Channel::read(std::span<std::byte> dst) {
    if (state_ == ChannelState::closed) throw Error(Errc::closed, "channel closed");
    if (state_ == ChannelState::input_shutdown) return std::nullopt; // sticky end-of-stream
    if (state_ != ChannelState::connected)
        throw Error(Errc::invalid_state, "read requires a connected channel");

    const std::size_t n = endpoint_->read_bytes(dst);
    if (n == 0 && endpoint_->eof_received() && !endpoint_->has_pending_data()) {
        state_ = ChannelState::input_shutdown;
        return std::nullopt;
    }
    return n;
}

void Channel::require_connected() const {
    if (state_ == ChannelState::closed) throw Error(Errc::closed, "channel closed");
    if (state_ != ChannelState::connected && state_ != ChannelState::input_shutdown)
        throw Error(Errc::invalid_state, "channel not connected");
}

std::size_t Channel::write_chunked(std::span<const std::byte> src) {
    std::size_t accepted = 0;
    while (accepted < src.size()) {
        std::size_t chunk = std::min(src.size() - accepted, ring_->max_reservable());
        chunk = std::min<std::size_t>(chunk, endpoint_->send_credit());
        if (chunk == 0) break;
        auto region = ring_->reserve(chunk);
        auto dst = ring_->region_bytes(*region);
        std::memcpy(dst.data(), src.data() + accepted, chunk);
        ring_->commit(*region, chunk);
        auto request = endpoint_->send_data(ring_->region_bytes(*region));
        ring_->mark_in_flight(*region);
        inflight_.emplace_back(std::move(*request), *region);
        accepted += chunk;
    }
    return accepted;
}

std::size_t Channel::write(std::span<const std::byte> src) {
    require_connected();
    if (src.empty()) return 0;
    reap_completions();
    return write_chunked(src);
}

std::size_t Channel::write_gather(std::span<const std::span<const std::byte>> srcs) {
    require_connected();
    reap_completions();

    std::size_t accepted = 0;
    std::size_t idx = 0;
    while (idx < srcs.size()) {
        const auto first = srcs[idx];
        if (first.empty())
            throw Error(Errc::invalid_value, "zero-length span in gathering write");

        if (first.size() > slice_length_) {
            // Oversize span: sent alone in slice-length chunks.
            const std::size_t n = write_chunked(first);
            accepted += n;
            if (n < first.size()) break;
            ++idx;
            continue;
        }

        // Whole leading spans only, bounded by the peer's credit; the ring
        // bounds the merge by slice length and free space itself.
        const uint64_t credit = endpoint_->send_credit();
        if (credit < first.size()) break;
        std::size_t limit = idx;
        uint64_t total = 0;
        while (limit < srcs.size() && !srcs[limit].empty() &&
               total + srcs[limit].size() <= credit) {
            total += srcs[limit].size();
            ++limit;
        }

        auto merged = ring_->merge_gather(srcs.subspan(idx, limit - idx));
        if (!merged) break;
        auto request = endpoint_->send_data(ring_->region_bytes(merged->region));
        ring_->mark_in_flight(merged->region);
        inflight_.emplace_back(std::move(*request), merged->region);
        accepted += merged->region.length;
        idx += merged->spans_consumed;
    }
    return accepted;
}

bool Channel::can_send_region(std::size_t len) const {
    if (state_ != ChannelState::connected || len == 0 || len > slice_length_) return false;
    return endpoint_->send_credit() >= len && ring_->can_reserve(len);
}

void Channel::reap_completions() {
    while (!inflight_.empty() && inflight_.front().first.done()) {
        ring_->release(inflight_.front().second);
        inflight_.pop_front();
    }
}

std::size_t Channel::process() {
    if (state_ == ChannelState::closed || !worker_) return 0;
    const std::size_t events = worker_->progress();
    if (ring_) reap_completions();
    return events;
}

OpSet Channel::readiness() {
    OpSet r;
    switch (state_) {
    case ChannelState::connecting:
        if (!connect_failure_.empty() ||
            endpoint_->state() == transport::EndpointState::established ||
            endpoint_->state() == transport::EndpointState::failed)
            r = r | OpSet(OpSet::CONNECT);
        break;
    case ChannelState::connected:
        if (endpoint_->has_pending_data() || endpoint_->eof_received()) r = r | OpSet(OpSet::READ);
        if (ring_ && ring_->free_bytes() >= 1) r = r | OpSet(OpSet::WRITE);
        break;
    case ChannelState::input_shutdown:
        r = r | OpSet(OpSet::READ); // end-of-stream is readable, sticky
        break;
    default:
        break;
    }
    return r;
}

void Channel::close() {
    if (state_ == ChannelState::closed) return;

    auto key = selection_key();
    if (key) key->cancel();

    if (endpoint_) {
        endpoint_->close(true);
        const auto deadline = std::chrono::steady_clock::now() + kCloseDrainLimit;
        while (!endpoint_->idle() && std::chrono::steady_clock::now() < deadline)
            worker_->progress();
    }
    endpoint_.reset();
    ring_.reset();
    inflight_.clear();
    worker_.reset();
    state_ = ChannelState::closed;
    g_open_channels.fetch_sub(1);
}

uint64_t Channel::data_requests_sent() const {
    return endpoint_ ? endpoint_->data_requests_sent() : 0;
}

uint64_t Channel::send_credit() const { return endpoint_ ? endpoint_->send_credit() : 0; }

// --------------------------------------------------------- ServerChannel

ServerChannel::ServerChannel(const std::string& backend)
    : backend_(backend), worker_(transport::Worker::create(backend)) {
    g_open_server_channels.fetch_add(1);
}

ServerChannel::~ServerChannel() {
    try {
        close();
    } catch (...) {
    }
    if (!closed_) g_open_server_channels.fetch_sub(1);
}

void ServerChannel::bind(const std::string& address) {
    if (closed_) throw Error(Errc::closed, "server channel closed");
    if (listener_) throw Error(Errc::invalid_state, "already bound");
    listener_ = worker_->listen(address);
}

std::unique_ptr<Channel> ServerChannel::accept() {
    if (closed_) throw Error(Errc::closed, "server channel closed");
    if (!listener_) throw Error(Errc::invalid_state, "not bound");

    worker_->progress();
    if (!listener_->has_pending()) return nullptr;

    const auto opts = transport::EndpointOptions::from_env();
    auto worker = transport::Worker::create(backend_);
    auto endpoint = worker->adopt(*listener_, opts);
    if (!endpoint) return nullptr;
    return std::unique_ptr<Channel>(new Channel(Channel::AcceptedTag{}, backend_,
                                                std::move(worker), std::move(endpoint),
                                                opts.recv_capacity, opts.slice_length,
                                                opts.recv_capacity));
}

void ServerChannel::close() {
    if (closed_) return;
    auto key = selection_key();
    if (key) key->cancel();
    if (listener_) listener_->close();
    listener_.reset();
    worker_.reset();
    closed_ = true;
    g_open_server_channels.fetch_sub(1);
}

const std::string& ServerChannel::local_address() const {
    if (!listener_) throw Error(Errc::invalid_state, "not bound");
    return listener_->address();
}

std::size_t ServerChannel::process() {
    if (closed_ || !worker_) return 0;
    return worker_->progress();
}

OpSet ServerChannel::readiness() {
    OpSet r;
    if (!closed_ && listener_ && listener_->has_pending()) r = r | OpSet(OpSet::ACCEPT);
    return r;
}

} // namespace unio
