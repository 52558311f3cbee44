#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "unio/ops.hpp"
#include "unio/ring_buffer.hpp"
#include "unio/transport.hpp"

namespace unio {

class Selector;
class SelectionKey;
class Channel;

// Anything a selector can monitor: it can be progressed and report which
// operations are ready.
class Pollable {
public:
    virtual ~Pollable();

    // Drive the underlying worker; returns events processed.
    virtual std::size_t process() = 0;
    virtual OpSet readiness() = 0;
    virtual bool is_open() const = 0;

    std::shared_ptr<SelectionKey> selection_key() const;

private:
    friend class Selector;
    friend class SelectionKey;
    mutable std::mutex reg_mutex_;
    Selector* registered_with_ = nullptr;
    std::shared_ptr<SelectionKey> key_;
};

enum class ChannelState { created, connecting, connected, input_shutdown, closed };

// Socket-attribute view of a channel for frameworks that expect to reach
// the underlying socket. There is no socket; attributes are answered from
// the transport handshake and the ring configuration.
class SocketFacade {
public:
    using OptionValue = std::variant<bool, int64_t, std::string>;
    enum class SetResult { accepted, ignored };

    // Current value, or nullopt for attributes not yet known (e.g. the
    // remote address before the handshake finished).
    std::optional<OptionValue> get_option(const std::string& name) const;

    SetResult set_option(const std::string& name, const OptionValue& value);

    std::optional<std::string> local_address() const;
    std::optional<std::string> remote_address() const;
    std::size_t send_buffer_size() const;
    std::size_t receive_buffer_size() const;
    bool no_delay() const { return no_delay_; }
    bool keep_alive() const { return keep_alive_; }

private:
    friend class Channel;
    explicit SocketFacade(Channel& channel) : channel_(channel) {}

    Channel& channel_;
    bool no_delay_ = false;
    bool keep_alive_ = false;
};

// Non-blocking byte-stream endpoint carried by its own transport worker.
// Usable by one thread at a time, transferable between threads.
class Channel final : public Pollable {
public:
    explicit Channel(const std::string& backend = "loopback");
    ~Channel() override;

    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;

    uint64_t id() const { return id_; }
    ChannelState state() const { return state_; }
    const std::string& backend() const { return backend_; }

    // Initiate the transport handshake. CONNECT becomes ready once it can
    // be finished; an unreachable remote surfaces on finish_connect.
    void connect(const std::string& remote);

    // True once connected. Throws Errc::connect_failed when the handshake
    // failed; the channel is then closed.
    bool finish_connect();

    // nullopt signals end-of-stream (sticky); 0 means nothing pending.
    std::optional<std::size_t> read(std::span<std::byte> dst);

    // Bytes accepted into the send ring, possibly 0 when the ring is full
    // or send credit is exhausted.
    std::size_t write(std::span<const std::byte> src);

    // Merge whole leading spans into contiguous ring regions, one transport
    // request per region. Returns total bytes accepted.
    std::size_t write_gather(std::span<const std::span<const std::byte>> srcs);

    // Whether a single gather of len bytes (<= slice) would currently be
    // accepted as one transport request.
    bool can_send_region(std::size_t len) const;

    void close();

    SocketFacade& facade() { return facade_; }
    const SocketFacade& facade() const { return facade_; }

    std::size_t process() override;
    OpSet readiness() override;
    bool is_open() const override { return state_ != ChannelState::closed; }

    uint64_t data_requests_sent() const;
    uint64_t send_credit() const;
    std::size_t ring_free_bytes() const { return ring_ ? ring_->free_bytes() : 0; }

    transport::Endpoint* endpoint() { return endpoint_.get(); }

private:
    friend class ServerChannel;
    friend class SocketFacade;

    struct AcceptedTag {};
    Channel(AcceptedTag, std::string backend, std::unique_ptr<transport::Worker> worker,
            std::unique_ptr<transport::Endpoint> endpoint, std::size_t ring_capacity,
            std::size_t slice_length, std::size_t recv_capacity);

    void reap_completions();
    void require_connected() const;
    std::size_t write_chunked(std::span<const std::byte> src);

    std::string backend_;
    uint64_t id_;
    ChannelState state_ = ChannelState::created;
    std::size_t ring_capacity_;
    std::size_t slice_length_;
    std::size_t recv_capacity_;
    std::unique_ptr<transport::Worker> worker_; // declared before endpoint_: destroyed last
    std::unique_ptr<transport::Endpoint> endpoint_;
    std::unique_ptr<RingBuffer> ring_;
    std::deque<std::pair<transport::SendRequest, Region>> inflight_;
    std::string connect_failure_;
    SocketFacade facade_{*this};
};

// Bound listening endpoint; accept never blocks.
class ServerChannel final : public Pollable {
public:
    explicit ServerChannel(const std::string& backend = "loopback");
    ~ServerChannel() override;

    void bind(const std::string& address);

    // One fully handshaken channel with its own worker, or nullptr.
    std::unique_ptr<Channel> accept();

    void close();

    const std::string& local_address() const;

    std::size_t process() override;
    OpSet readiness() override;
    bool is_open() const override { return !closed_; }

private:
    std::string backend_;
    std::unique_ptr<transport::Worker> worker_;
    std::unique_ptr<transport::Listener> listener_;
    bool closed_ = false;
};

// Open channel / server-channel counters, for cardinality checks.
uint64_t open_channel_count();
uint64_t open_server_channel_count();

} // namespace unio
