#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "backends.hpp"
#include "unio/config.hpp"
#include "unio/transport.hpp"

// Deterministic in-process backend: per-connection FIFO pipes, one message
// moved per progress call per direction. Nothing moves outside progress().

namespace unio::transport {
namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
    std::mutex m;
    std::deque<TaggedMessage> q;

    void push(TaggedMessage msg) {
        std::lock_guard lock(m);
        q.push_back(std::move(msg));
    }
    std::optional<TaggedMessage> pop() {
        std::lock_guard lock(m);
        if (q.empty()) return std::nullopt;
        TaggedMessage msg = std::move(q.front());
        q.pop_front();
        return msg;
    }
};

struct Conn {
    uint32_t id = 0;
    std::string listen_addr;
    std::string client_addr;
    Pipe to_server;
    Pipe to_client;
};

struct ListenerState {
    std::string address;
    std::mutex m;
    uint32_t next_conn_id = 1;
    std::deque<std::shared_ptr<Conn>> embryonic; // SYN not yet seen
    struct Ready {
        std::shared_ptr<Conn> conn;
        uint32_t peer_credit;
    };
    std::deque<Ready> ready;
    bool closed = false;
};

class Domain {
public:
    static Domain& instance() {
        static Domain d;
        return d;
    }

    std::shared_ptr<ListenerState> bind(const std::string& address) {
        std::lock_guard lock(m_);
        auto [it, inserted] = listeners_.try_emplace(address);
        if (!inserted && !it->second->closed)
            throw Error(Errc::backend_failure, "loopback address already bound: " + address);
        it->second = std::make_shared<ListenerState>();
        it->second->address = address;
        return it->second;
    }

    void unbind(const std::string& address, const std::shared_ptr<ListenerState>& state) {
        std::lock_guard lock(m_);
        auto it = listeners_.find(address);
        if (it != listeners_.end() && it->second == state) listeners_.erase(it);
    }

    std::shared_ptr<Conn> connect(const std::string& address, std::string client_addr) {
        std::shared_ptr<ListenerState> listener;
        {
            std::lock_guard lock(m_);
            auto it = listeners_.find(address);
            if (it == listeners_.end() || it->second->closed)
                throw Error(Errc::handshake_timeout, "no loopback listener at " + address);
            listener = it->second;
        }
        auto conn = std::make_shared<Conn>();
        std::lock_guard lock(listener->m);
        if (listener->closed)
            throw Error(Errc::handshake_timeout, "loopback listener closed: " + address);
        conn->id = listener->next_conn_id++;
        conn->listen_addr = address;
        conn->client_addr = std::move(client_addr);
        listener->embryonic.push_back(conn);
        return conn;
    }

    uint64_t next_client_id() { return client_counter_.fetch_add(1) + 1; }

private:
    std::mutex m_;
    std::map<std::string, std::shared_ptr<ListenerState>> listeners_;
    std::atomic<uint64_t> client_counter_{0};
};

class LoopbackWorker;

class LoopbackEndpoint final : public Endpoint {
public:
    LoopbackEndpoint(LoopbackWorker& worker, std::shared_ptr<Conn> conn, bool server_side,
                     uint32_t initial_send_credit, bool established,
                     const EndpointOptions& options);
    ~LoopbackEndpoint() override;

    bool idle() const override { return outbox_.empty(); }

    std::size_t progress_one();

protected:
    void enqueue(Tag tag, std::vector<std::byte> payload, SendRequest request) override {
        outbox_.push_back(Out{TaggedMessage{tag, std::move(payload)}, std::move(request)});
    }
    void drop_pending_sends() override { outbox_.clear(); }

private:
    Pipe& tx_pipe() { return is_server_side_ ? conn_->to_client : conn_->to_server; }
    Pipe& rx_pipe() { return is_server_side_ ? conn_->to_server : conn_->to_client; }

    struct Out {
        TaggedMessage msg;
        SendRequest request;
    };

    LoopbackWorker& worker_;
    std::shared_ptr<Conn> conn_;
    std::deque<Out> outbox_;
    Clock::time_point handshake_start_ = Clock::now();
};

class LoopbackListener final : public Listener {
public:
    LoopbackListener(LoopbackWorker& worker, std::shared_ptr<ListenerState> state);
    ~LoopbackListener() override;

    bool has_pending() const override {
        std::lock_guard lock(state_->m);
        return !state_->ready.empty();
    }
    const std::string& address() const override { return state_->address; }
    void close() override;

    std::size_t progress_one();
    std::optional<ListenerState::Ready> take_ready() {
        std::lock_guard lock(state_->m);
        if (state_->ready.empty()) return std::nullopt;
        auto r = std::move(state_->ready.front());
        state_->ready.pop_front();
        return r;
    }

private:
    LoopbackWorker& worker_;
    std::shared_ptr<ListenerState> state_;
    bool closed_ = false;
};

class LoopbackWorker final : public Worker {
public:
    std::size_t progress() override {
        std::size_t events = 0;
        for (auto* ep : std::vector<LoopbackEndpoint*>(endpoints_)) events += ep->progress_one();
        for (auto* l : std::vector<LoopbackListener*>(listeners_)) events += l->progress_one();
        return events;
    }

    std::unique_ptr<Endpoint> connect(const std::string& address,
                                      const EndpointOptions& options) override {
        std::string client_addr =
            "loopback:client-" + std::to_string(Domain::instance().next_client_id());
        auto conn = Domain::instance().connect(address, client_addr);
        return std::make_unique<LoopbackEndpoint>(*this, std::move(conn), false, 0, false,
                                                  options);
    }

    std::unique_ptr<Listener> listen(const std::string& address) override {
        return std::make_unique<LoopbackListener>(*this, Domain::instance().bind(address));
    }

    std::unique_ptr<Endpoint> adopt(Listener& listener,
                                    const EndpointOptions& options) override {
        auto* lb = dynamic_cast<LoopbackListener*>(&listener);
        if (lb == nullptr)
            throw Error(Errc::backend_failure, "listener does not belong to the loopback backend");
        auto ready = lb->take_ready();
        if (!ready) return nullptr;
        return std::make_unique<LoopbackEndpoint>(*this, std::move(ready->conn), true,
                                                  ready->peer_credit, true, options);
    }

    const std::string& backend_name() const override {
        static const std::string name = "loopback";
        return name;
    }

    void add(LoopbackEndpoint* ep) { endpoints_.push_back(ep); }
    void remove(LoopbackEndpoint* ep) { std::erase(endpoints_, ep); }
    void add(LoopbackListener* l) { listeners_.push_back(l); }
    void remove(LoopbackListener* l) { std::erase(listeners_, l); }

private:
    std::vector<LoopbackEndpoint*> endpoints_;
    std::vector<LoopbackListener*> listeners_;
};

LoopbackEndpoint::LoopbackEndpoint(LoopbackWorker& worker, std::shared_ptr<Conn> conn,
                                   bool server_side, uint32_t initial_send_credit,
                                   bool established, const EndpointOptions& options)
    : Endpoint(options.slice_length, options.recv_capacity),
      worker_(worker),
      conn_(std::move(conn)) {
    is_server_side_ = server_side;
    connection_id_ = conn_->id;
    local_address_ = server_side ? conn_->listen_addr : conn_->client_addr;
    remote_address_ = server_side ? conn_->client_addr : conn_->listen_addr;

    // The aux field holds 29 bits; anything above the clamp is granted back
    // incrementally as the receive queue drains.
    const uint32_t advertised =
        static_cast<uint32_t>(std::min<std::size_t>(recv_capacity_, Tag::kAuxMax));
    freed_since_grant_ = recv_capacity_ - advertised;

    if (established) {
        state_ = EndpointState::established;
        send_credit_ = initial_send_credit;
        enqueue(Tag{connection_id_, true, MsgKind::ack, advertised}, {}, SendRequest{});
    } else {
        enqueue(Tag{connection_id_, false, MsgKind::syn, advertised}, {}, SendRequest{});
    }
    worker_.add(this);
}

LoopbackEndpoint::~LoopbackEndpoint() { worker_.remove(this); }

std::size_t LoopbackEndpoint::progress_one() {
    std::size_t events = 0;
    if (!outbox_.empty()) {
        Out out = std::move(outbox_.front());
        outbox_.pop_front();
        tx_pipe().push(std::move(out.msg));
        out.request.mark_done();
        ++events;
    }
    if (auto msg = rx_pipe().pop()) {
        handle_inbound(msg->tag, std::move(msg->payload));
        ++events;
    }
    if (state_ == EndpointState::handshaking &&
        Clock::now() - handshake_start_ > worker_.handshake_timeout()) {
        fail("handshake timeout");
    }
    return events;
}

LoopbackListener::LoopbackListener(LoopbackWorker& worker, std::shared_ptr<ListenerState> state)
    : worker_(worker), state_(std::move(state)) {
    worker_.add(this);
}

LoopbackListener::~LoopbackListener() {
    close();
    worker_.remove(this);
}

void LoopbackListener::close() {
    if (closed_) return;
    closed_ = true;
    {
        std::lock_guard lock(state_->m);
        state_->closed = true;
    }
    Domain::instance().unbind(state_->address, state_);
}

std::size_t LoopbackListener::progress_one() {
    std::size_t events = 0;
    std::lock_guard lock(state_->m);
    for (auto it = state_->embryonic.begin(); it != state_->embryonic.end();) {
        auto msg = (*it)->to_server.pop();
        if (msg && msg->tag.kind == MsgKind::syn) {
            state_->ready.push_back(ListenerState::Ready{*it, msg->tag.aux});
            it = state_->embryonic.erase(it);
            ++events;
        } else {
            ++it;
        }
    }
    return events;
}

} // namespace

std::unique_ptr<Worker> make_loopback_worker() { return std::make_unique<LoopbackWorker>(); }

} // namespace unio::transport
