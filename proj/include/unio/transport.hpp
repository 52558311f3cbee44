#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unio/error.hpp"

namespace unio::transport {

// Message kinds carried in the tag. DATA payloads are bounded by the slice
// length; control kinds carry their fields in the tag's aux bits.
enum class MsgKind : uint8_t { data = 0, syn = 1, ack = 2, fin = 3 };

// 64-bit tag layout: [connection_id:32][server_to_client:1][kind:2][aux:29].
// aux carries the credit grant for SYN/ACK messages.
struct Tag {
    static constexpr uint32_t kAuxMax = (1u << 29) - 1;

    uint32_t connection_id = 0;
    bool server_to_client = false;
    MsgKind kind = MsgKind::data;
    uint32_t aux = 0;

    uint64_t encode() const;
    static Tag decode(uint64_t raw);
};

struct TaggedMessage {
    Tag tag;
    std::vector<std::byte> payload;
};

// Completion handle for a tagged send. Becomes done only during a
// progress() call on the sending worker.
class SendRequest {
public:
    SendRequest() : state_(std::make_shared<std::atomic<bool>>(false)) {}
    bool done() const { return state_->load(std::memory_order_acquire); }
    void mark_done() { state_->store(true, std::memory_order_release); }

private:
    std::shared_ptr<std::atomic<bool>> state_;
};

enum class EndpointState { handshaking, established, closed, failed };

// Per-endpoint sizing; defaults come from the environment.
struct EndpointOptions {
    std::size_t slice_length;
    std::size_t recv_capacity;

    static EndpointOptions from_env();
};

class Worker;

// One transport-level connection. Endpoints cannot move data on their own;
// all traffic happens inside their worker's progress().
class Endpoint {
public:
    virtual ~Endpoint() = default;

    EndpointState state() const { return state_; }
    uint32_t connection_id() const { return connection_id_; }
    const std::string& remote_address() const { return remote_address_; }
    const std::string& local_address() const { return local_address_; }
    const std::string& failure_reason() const { return failure_reason_; }

    // Bytes of DATA the peer currently allows us to send.
    uint64_t send_credit() const { return send_credit_; }

    // Enqueue a DATA send. Returns nullopt when credit is insufficient
    // (would-block; retry after a credit grant arrives). The payload is
    // copied at call time.
    std::optional<SendRequest> send_data(std::span<const std::byte> payload);

    // Receive side: bytes delivered by progress() and not yet read.
    std::size_t pending_bytes() const { return recv_pending_bytes_; }
    bool has_pending_data() const { return recv_pending_bytes_ > 0; }
    std::size_t read_bytes(std::span<std::byte> dst);
    bool eof_received() const { return eof_; }

    // Graceful close drains pending sends before the FIN; abort drops them.
    void close(bool graceful);

    // True when nothing remains queued for transmission.
    virtual bool idle() const = 0;

    uint64_t data_requests_sent() const { return data_requests_sent_; }
    uint64_t max_inflight_data_bytes() const { return max_inflight_data_bytes_; }

protected:
    Endpoint(std::size_t slice_length, std::size_t recv_capacity);

    // Backend hook: queue a message for transmission on next progress().
    virtual void enqueue(Tag tag, std::vector<std::byte> payload, SendRequest request) = 0;

    // Backend hook for abortive close: discard queued-but-unsent messages.
    virtual void drop_pending_sends() = 0;

    // Called by backends for every delivered message.
    void handle_inbound(const Tag& tag, std::vector<std::byte> payload);

    void fail(const std::string& reason);

    std::size_t slice_length_;
    std::size_t recv_capacity_;
    EndpointState state_ = EndpointState::handshaking;
    uint32_t connection_id_ = 0;
    bool is_server_side_ = false;
    std::string remote_address_;
    std::string local_address_;
    std::string failure_reason_;

    uint64_t send_credit_ = 0;
    uint64_t inflight_data_bytes_ = 0;
    uint64_t max_inflight_data_bytes_ = 0;

    std::deque<std::vector<std::byte>> recv_segments_;
    std::size_t recv_front_offset_ = 0;
    std::size_t recv_pending_bytes_ = 0;
    std::size_t freed_since_grant_ = 0;
    bool eof_ = false;
    bool fin_sent_ = false;
    uint64_t data_requests_sent_ = 0;
};

// Pending inbound connections on a bound address. Owned by the listening
// worker; accepted endpoints may live on a different worker.
class Listener {
public:
    virtual ~Listener() = default;
    virtual bool has_pending() const = 0;
    virtual const std::string& address() const = 0;
    virtual void close() = 0;
};

// Progress engine. Owns backend resources; no message moves except during
// progress(). Confined to one thread at a time.
class Worker {
public:
    // backend is "loopback" or "stream".
    static std::unique_ptr<Worker> create(const std::string& backend);

    virtual ~Worker() = default;

    // Advance as much pending work as possible without blocking. Returns
    // the number of completions and deliveries processed.
    virtual std::size_t progress() = 0;

    virtual std::unique_ptr<Endpoint> connect(const std::string& address,
                                              const EndpointOptions& options) = 0;
    virtual std::unique_ptr<Listener> listen(const std::string& address) = 0;

    // Adopt one pending connection from a listener (possibly owned by a
    // different worker of the same backend). Returns nullptr when none.
    virtual std::unique_ptr<Endpoint> adopt(Listener& listener,
                                            const EndpointOptions& options) = 0;

    std::unique_ptr<Endpoint> connect(const std::string& address) {
        return connect(address, EndpointOptions::from_env());
    }
    std::unique_ptr<Endpoint> adopt(Listener& listener) {
        return adopt(listener, EndpointOptions::from_env());
    }

    virtual const std::string& backend_name() const = 0;

    void set_handshake_timeout(std::chrono::milliseconds t) { handshake_timeout_ = t; }
    std::chrono::milliseconds handshake_timeout() const { return handshake_timeout_; }

    // Count of live workers across the process, for cardinality checks.
    static uint64_t live_count();

protected:
    Worker();
    std::chrono::milliseconds handshake_timeout_{10'000};

private:
    struct Token { Token(); ~Token(); } liveness_token_;
};

} // namespace unio::transport
