#pragma once

#include <any>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "unio/channel.hpp"
#include "unio/ops.hpp"

namespace unio {

class Selector;

class SelectionKey {
public:
    OpSet interest() const;
    void set_interest(OpSet interest);
    OpSet ready() const { return ready_; }

    Pollable* pollable() const { return pollable_; }
    Channel* channel() const { return dynamic_cast<Channel*>(pollable_); }
    ServerChannel* server_channel() const { return dynamic_cast<ServerChannel*>(pollable_); }

    void attach(std::any value) { attachment_ = std::move(value); }
    std::any& attachment() { return attachment_; }

    bool valid() const;
    void cancel();

private:
    friend class Selector;
    SelectionKey(Selector& selector, Pollable& pollable, OpSet interest)
        : selector_(&selector), pollable_(&pollable), interest_(interest) {}

    Selector* selector_;
    Pollable* pollable_;
    OpSet interest_;
    OpSet ready_;
    bool cancelled_ = false;
    std::any attachment_;
    mutable std::mutex mutex_;
};

// Readiness registry over channels. select() busy-polls the workers of all
// registered channels, with a cooperative yield every 64 idle iterations.
// register/deregister may be called from any thread; select runs on one
// thread at a time.
class Selector {
public:
    Selector() = default;
    ~Selector();

    Selector(const Selector&) = delete;
    Selector& operator=(const Selector&) = delete;

    std::shared_ptr<SelectionKey> register_pollable(Pollable& pollable, OpSet interest);

    // Block (busy-poll) until at least one registered key is ready.
    int select();
    int select(std::chrono::milliseconds timeout);
    int select_now();

    // Keys selected by the last select call.
    std::vector<std::shared_ptr<SelectionKey>> selected_keys() const;

    std::size_t key_count() const;

    void close();
    bool is_open() const;

private:
    friend class SelectionKey;
    int do_select(std::optional<std::chrono::nanoseconds> timeout);

    mutable std::mutex mutex_;
    bool open_ = true;
    std::vector<std::shared_ptr<SelectionKey>> keys_;
    std::vector<std::shared_ptr<SelectionKey>> selected_;
};

} // namespace unio
