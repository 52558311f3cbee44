#pragma once

// Helpers shared by the channel-level tests: deterministic in-process pairs,
// TCP pairs on a probed free port, and a generic progress pump.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "unio/channel.hpp"

namespace testutil {

inline std::string unique_address(const std::string& prefix) {
    static std::atomic<uint64_t> counter{0};
    return prefix + "-" + std::to_string(counter.fetch_add(1));
}

// Bind port 0, read back the assigned port, release it. Racy in principle,
// harmless in an isolated test environment.
inline int free_tcp_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        throw std::runtime_error("bind");
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const int port = ntohs(addr.sin_port);
    ::close(fd);
    return port;
}

template <typename Pred>
inline bool pump_until(std::initializer_list<unio::Pollable*> pollables, Pred pred,
                       std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (!pred()) {
        for (auto* p : pollables) p->process();
        if (std::chrono::steady_clock::now() > deadline) return false;
    }
    return true;
}

struct ChannelPair {
    std::unique_ptr<unio::ServerChannel> server;
    std::unique_ptr<unio::Channel> accepted;
    std::unique_ptr<unio::Channel> client;

    ChannelPair() = default;
    ChannelPair(ChannelPair&&) = default;
    ChannelPair& operator=(ChannelPair&&) = default;

    ~ChannelPair() {
        if (client) client->close();
        if (accepted) accepted->close();
        if (server) server->close();
    }
};

// Fully handshaken pair over the given backend.
inline ChannelPair make_pair(const std::string& backend = "loopback") {
    ChannelPair pair;
    std::string address;
    if (backend == "loopback") {
        address = unique_address("pair");
    } else {
        address = "127.0.0.1:" + std::to_string(free_tcp_port());
    }
    pair.server = std::make_unique<unio::ServerChannel>(backend);
    pair.server->bind(address);
    pair.client = std::make_unique<unio::Channel>(backend);
    pair.client->connect(address);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (!pair.accepted || pair.client->state() != unio::ChannelState::connected) {
        pair.server->process();
        pair.client->process();
        if (!pair.accepted) pair.accepted = pair.server->accept();
        if (pair.accepted) pair.accepted->process();
        if (pair.client->state() != unio::ChannelState::connected) pair.client->finish_connect();
        if (std::chrono::steady_clock::now() > deadline)
            throw std::runtime_error("pair handshake never completed");
    }
    return pair;
}

// Scoped environment variable override.
class EnvGuard {
public:
    EnvGuard(const char* name, const std::string& value) : name_(name) {
        if (const char* old = std::getenv(name)) {
            had_old_ = true;
            old_ = old;
        }
        ::setenv(name, value.c_str(), 1);
    }
    ~EnvGuard() {
        if (had_old_)
            ::setenv(name_, old_.c_str(), 1);
        else
            ::unsetenv(name_);
    }

private:
    const char* name_;
    bool had_old_ = false;
    std::string old_;
};

} // namespace testutil
