#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <optional>
#include <vector>

#include "backends.hpp"
#include "unio/config.hpp"
#include "unio/transport.hpp"

// OS byte-stream backend. TaggedMessages are framed on a non-blocking TCP
// socket as [tag: 8 bytes BE][length: 4 bytes BE][payload].

namespace unio::transport {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kHeaderSize = 12;

void put_u64_be(std::byte* p, uint64_t v) {
    for (int i = 7; i >= 0; --i) {
        p[i] = static_cast<std::byte>(v & 0xff);
        v >>= 8;
    }
}
void put_u32_be(std::byte* p, uint32_t v) {
    for (int i = 3; i >= 0; --i) {
        p[i] = static_cast<std::byte>(v & 0xff);
        v >>= 8;
    }
}
uint64_t get_u64_be(const std::byte* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(p[i]);
    return v;
}
uint32_t get_u32_be(const std::byte* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<uint8_t>(p[i]);
    return v;
}

std::vector<std::byte> encode_frame(const Tag& tag, std::span<const std::byte> payload) {
    std::vector<std::byte> frame(kHeaderSize + payload.size());
    put_u64_be(frame.data(), tag.encode());
    put_u32_be(frame.data() + 8, static_cast<uint32_t>(payload.size()));
    std::memcpy(frame.data() + kHeaderSize, payload.data(), payload.size());
    return frame;
}

void set_nonblocking(int fd) {
    const int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

struct SockAddr {
    sockaddr_storage storage{};
    socklen_t len = 0;
};

SockAddr resolve(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos)
        throw Error(Errc::invalid_value, "stream address must be host:port, got " + address);
    const std::string host = address.substr(0, colon);
    const std::string port = address.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &result);
    if (rc != 0 || result == nullptr)
        throw Error(Errc::backend_failure, "cannot resolve " + address + ": " + gai_strerror(rc));
    SockAddr out;
    std::memcpy(&out.storage, result->ai_addr, result->ai_addrlen);
    out.len = static_cast<socklen_t>(result->ai_addrlen);
    freeaddrinfo(result);
    return out;
}

std::string addr_to_string(const sockaddr_storage& ss) {
    if (ss.ss_family != AF_INET) return "?";
    const auto* in = reinterpret_cast<const sockaddr_in*>(&ss);
    char buf[INET_ADDRSTRLEN];
    inet_ntop(AF_INET, &in->sin_addr, buf, sizeof buf);
    return std::string(buf) + ":" + std::to_string(ntohs(in->sin_port));
}

std::string peer_name(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (getpeername(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return "?";
    return addr_to_string(ss);
}

std::string local_name(int fd) {
    sockaddr_storage ss{};
    socklen_t len = sizeof ss;
    if (getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0) return "?";
    return addr_to_string(ss);
}

class StreamWorker;

class StreamEndpoint final : public Endpoint {
public:
    // Client side: fd is mid-connect, handshake pending.
    StreamEndpoint(StreamWorker& worker, int fd, std::string remote,
                   const EndpointOptions& options);
    // Server side: fd carried a complete SYN, established immediately.
    StreamEndpoint(StreamWorker& worker, int fd, uint32_t conn_id, uint32_t peer_credit,
                   std::vector<std::byte> leftover, const EndpointOptions& options);
    ~StreamEndpoint() override;

    bool idle() const override { return outbox_.empty(); }

    std::size_t progress_one();

protected:
    void enqueue(Tag tag, std::vector<std::byte> payload, SendRequest request) override {
        outbox_.push_back(Out{encode_frame(tag, payload), 0, std::move(request)});
    }
    void drop_pending_sends() override { outbox_.clear(); }

private:
    uint32_t advertised_credit();
    std::size_t flush_outbox();
    std::size_t drain_socket();

    struct Out {
        std::vector<std::byte> frame;
        std::size_t written;
        SendRequest request;
    };

    StreamWorker& worker_;
    int fd_;
    bool tcp_connecting_;
    std::deque<Out> outbox_;
    std::vector<std::byte> rxbuf_;
    Clock::time_point handshake_start_ = Clock::now();
};

class StreamListener final : public Listener {
public:
    StreamListener(StreamWorker& worker, const std::string& address);
    ~StreamListener() override;

    bool has_pending() const override { return !ready_.empty(); }
    const std::string& address() const override { return address_; }
    void close() override;

    std::size_t progress_one();

    struct Ready {
        int fd;
        uint32_t conn_id;
        uint32_t peer_credit;
        std::vector<std::byte> leftover; // bytes received past the SYN frame
    };
    std::optional<Ready> take_ready() {
        if (ready_.empty()) return std::nullopt;
        Ready r = std::move(ready_.front());
        ready_.pop_front();
        return r;
    }

private:
    struct Embryonic {
        int fd;
        std::vector<std::byte> rxbuf;
    };

    StreamWorker& worker_;
    std::string address_;
    int fd_ = -1;
    uint32_t next_conn_id_ = 1;
    std::vector<Embryonic> embryonic_;
    std::deque<Ready> ready_;
};

class StreamWorker final : public Worker {
public:
    std::size_t progress() override {
        std::size_t events = 0;
        for (auto* ep : std::vector<StreamEndpoint*>(endpoints_)) events += ep->progress_one();
        for (auto* l : std::vector<StreamListener*>(listeners_)) events += l->progress_one();
        return events;
    }

    std::unique_ptr<Endpoint> connect(const std::string& address,
                                      const EndpointOptions& options) override {
        const SockAddr addr = resolve(address);
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw Error(Errc::backend_failure, std::strerror(errno));
        set_nonblocking(fd);
        const int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        const int rc = ::connect(fd, reinterpret_cast<const sockaddr*>(&addr.storage), addr.len);
        if (rc != 0 && errno != EINPROGRESS) {
            const std::string why = std::strerror(errno);
            ::close(fd);
            throw Error(Errc::connect_failed, "connect to " + address + " failed: " + why);
        }
        return std::make_unique<StreamEndpoint>(*this, fd, address, options);
    }

    std::unique_ptr<Listener> listen(const std::string& address) override {
        return std::make_unique<StreamListener>(*this, address);
    }

    std::unique_ptr<Endpoint> adopt(Listener& listener,
                                    const EndpointOptions& options) override {
        auto* sl = dynamic_cast<StreamListener*>(&listener);
        if (sl == nullptr)
            throw Error(Errc::backend_failure, "listener does not belong to the stream backend");
        auto ready = sl->take_ready();
        if (!ready) return nullptr;
        return std::make_unique<StreamEndpoint>(*this, ready->fd, ready->conn_id,
                                                ready->peer_credit, std::move(ready->leftover),
                                                options);
    }

    const std::string& backend_name() const override {
        static const std::string name = "stream";
        return name;
    }

    void add(StreamEndpoint* ep) { endpoints_.push_back(ep); }
    void remove(StreamEndpoint* ep) { std::erase(endpoints_, ep); }
    void add(StreamListener* l) { listeners_.push_back(l); }
    void remove(StreamListener* l) { std::erase(listeners_, l); }

private:
    std::vector<StreamEndpoint*> endpoints_;
    std::vector<StreamListener*> listeners_;
};

StreamEndpoint::StreamEndpoint(StreamWorker& worker, int fd, std::string remote,
                               const EndpointOptions& options)
    : Endpoint(options.slice_length, options.recv_capacity),
      worker_(worker),
      fd_(fd),
      tcp_connecting_(true) {
    is_server_side_ = false;
    remote_address_ = std::move(remote);
    local_address_ = local_name(fd_);
    worker_.add(this);
}

StreamEndpoint::StreamEndpoint(StreamWorker& worker, int fd, uint32_t conn_id,
                               uint32_t peer_credit, std::vector<std::byte> leftover,
                               const EndpointOptions& options)
    : Endpoint(options.slice_length, options.recv_capacity),
      worker_(worker),
      fd_(fd),
      tcp_connecting_(false) {
    rxbuf_ = std::move(leftover);
    is_server_side_ = true;
    connection_id_ = conn_id;
    remote_address_ = peer_name(fd_);
    local_address_ = local_name(fd_);
    state_ = EndpointState::established;
    send_credit_ = peer_credit;
    enqueue(Tag{connection_id_, true, MsgKind::ack, advertised_credit()}, {}, SendRequest{});
    worker_.add(this);
}

StreamEndpoint::~StreamEndpoint() {
    if (fd_ >= 0) ::close(fd_);
    worker_.remove(this);
}

uint32_t StreamEndpoint::advertised_credit() {
    const uint32_t advertised =
        static_cast<uint32_t>(std::min<std::size_t>(recv_capacity_, Tag::kAuxMax));
    freed_since_grant_ = recv_capacity_ - advertised;
    return advertised;
}

std::size_t StreamEndpoint::progress_one() {
    std::size_t events = 0;

    if (tcp_connecting_) {
        pollfd pfd{fd_, POLLOUT, 0};
        if (::poll(&pfd, 1, 0) > 0) {
            int err = 0;
            socklen_t len = sizeof err;
            getsockopt(fd_, SOL_SOCKET, SO_ERROR, &err, &len);
            if (err != 0) {
                fail(std::string("connect failed: ") + std::strerror(err));
                tcp_connecting_ = false;
                return events;
            }
            tcp_connecting_ = false;
            local_address_ = local_name(fd_);
            enqueue(Tag{0, false, MsgKind::syn, advertised_credit()}, {}, SendRequest{});
        }
    }

    if (!tcp_connecting_ && state_ != EndpointState::failed) {
        events += flush_outbox();
        events += drain_socket();
    }

    if (state_ == EndpointState::handshaking &&
        Clock::now() - handshake_start_ > worker_.handshake_timeout()) {
        fail("handshake timeout");
    }
    return events;
}

std::size_t StreamEndpoint::flush_outbox() {
    std::size_t events = 0;
    while (!outbox_.empty()) {
        Out& out = outbox_.front();
        const ssize_t n = ::send(fd_, out.frame.data() + out.written,
                                 out.frame.size() - out.written, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            fail(std::string("send failed: ") + std::strerror(errno));
            eof_ = true;
            outbox_.clear();
            break;
        }
        out.written += static_cast<std::size_t>(n);
        if (out.written < out.frame.size()) break;
        out.request.mark_done();
        outbox_.pop_front();
        ++events;
    }
    return events;
}

std::size_t StreamEndpoint::drain_socket() {
    std::size_t events = 0;
    std::byte chunk[64 * 1024];
    for (;;) {
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n > 0) {
            rxbuf_.insert(rxbuf_.end(), chunk, chunk + n);
            if (static_cast<std::size_t>(n) < sizeof chunk) break;
        } else if (n == 0) {
            eof_ = true; // stream EOF counts as FIN
            break;
        } else {
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            if (errno == ECONNRESET) {
                eof_ = true;
                break;
            }
            fail(std::string("recv failed: ") + std::strerror(errno));
            break;
        }
    }
    std::size_t consumed = 0;
    while (rxbuf_.size() - consumed >= kHeaderSize) {
        const Tag tag = Tag::decode(get_u64_be(rxbuf_.data() + consumed));
        const uint32_t len = get_u32_be(rxbuf_.data() + consumed + 8);
        if (rxbuf_.size() - consumed - kHeaderSize < len) break;
        std::vector<std::byte> payload(rxbuf_.begin() + consumed + kHeaderSize,
                                       rxbuf_.begin() + consumed + kHeaderSize + len);
        handle_inbound(tag, std::move(payload));
        consumed += kHeaderSize + len;
        ++events;
    }
    if (consumed > 0) rxbuf_.erase(rxbuf_.begin(), rxbuf_.begin() + consumed);
    return events;
}

StreamListener::StreamListener(StreamWorker& worker, const std::string& address)
    : worker_(worker), address_(address) {
    const SockAddr addr = resolve(address);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(Errc::backend_failure, std::strerror(errno));
    const int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr.storage), addr.len) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd_);
        fd_ = -1;
        throw Error(Errc::backend_failure, "bind " + address + " failed: " + why);
    }
    if (::listen(fd_, 128) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd_);
        fd_ = -1;
        throw Error(Errc::backend_failure, "listen " + address + " failed: " + why);
    }
    set_nonblocking(fd_);
    worker_.add(this);
}

StreamListener::~StreamListener() {
    close();
    worker_.remove(this);
}

void StreamListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    for (auto& e : embryonic_) ::close(e.fd);
    embryonic_.clear();
    for (auto& r : ready_) ::close(r.fd);
    ready_.clear();
}

std::size_t StreamListener::progress_one() {
    std::size_t events = 0;
    if (fd_ < 0) return 0;
    for (;;) {
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd < 0) break;
        set_nonblocking(fd);
        const int one = 1;
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        embryonic_.push_back(Embryonic{fd, {}});
    }
    // Read each embryonic connection until its SYN frame is complete.
    for (auto it = embryonic_.begin(); it != embryonic_.end();) {
        std::byte chunk[256];
        bool dead = false;
        for (;;) {
            const ssize_t n = ::recv(it->fd, chunk, sizeof chunk, 0);
            if (n > 0) {
                it->rxbuf.insert(it->rxbuf.end(), chunk, chunk + n);
            } else if (n == 0) {
                dead = true;
                break;
            } else {
                if (errno != EAGAIN && errno != EWOULDBLOCK) dead = true;
                break;
            }
        }
        if (dead) {
            ::close(it->fd);
            it = embryonic_.erase(it);
            continue;
        }
        if (it->rxbuf.size() >= kHeaderSize) {
            const Tag tag = Tag::decode(get_u64_be(it->rxbuf.data()));
            if (tag.kind == MsgKind::syn) {
                std::vector<std::byte> leftover(it->rxbuf.begin() + kHeaderSize, it->rxbuf.end());
                ready_.push_back(Ready{it->fd, next_conn_id_++, tag.aux, std::move(leftover)});
                it = embryonic_.erase(it);
                ++events;
                continue;
            }
            ::close(it->fd); // protocol violation
            it = embryonic_.erase(it);
            continue;
        }
        ++it;
    }
    return events;
}

} // namespace

std::unique_ptr<Worker> make_stream_worker() { return std::make_unique<StreamWorker>(); }

} // namespace unio::transport
