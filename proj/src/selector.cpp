#include "unio/selector.hpp"

#include <algorithm>
#include <thread>

namespace unio {

OpSet SelectionKey::interest() const {
    std::lock_guard lock(mutex_);
    return interest_;
}

void SelectionKey::set_interest(OpSet interest) {
    std::lock_guard lock(mutex_);
    interest_ = interest;
}

bool SelectionKey::valid() const {
    std::lock_guard lock(mutex_);
    return !cancelled_;
}

void SelectionKey::cancel() {
    Selector* selector;
    {
        std::lock_guard lock(mutex_);
        if (cancelled_) return;
        cancelled_ = true;
        selector = selector_;
        selector_ = nullptr;
    }
    {
        std::lock_guard lock(pollable_->reg_mutex_);
        pollable_->registered_with_ = nullptr;
        pollable_->key_.reset();
    }
    if (selector) {
        std::lock_guard lock(selector->mutex_);
        std::erase_if(selector->keys_,
                      [this](const std::shared_ptr<SelectionKey>& k) { return k.get() == this; });
    }
}

Selector::~Selector() { close(); }

std::shared_ptr<SelectionKey> Selector::register_pollable(Pollable& pollable, OpSet interest) {
    {
        std::lock_guard lock(mutex_);
        if (!open_) throw Error(Errc::closed, "selector closed");
    }
    if (!pollable.is_open()) throw Error(Errc::closed, "channel closed");

    std::lock_guard reg_lock(pollable.reg_mutex_);
    if (pollable.registered_with_ == this) return pollable.key_;
    if (pollable.registered_with_ != nullptr)
        throw Error(Errc::already_registered, "channel is registered with another selector");

    auto key = std::shared_ptr<SelectionKey>(new SelectionKey(*this, pollable, interest));
    pollable.registered_with_ = this;
    pollable.key_ = key;
    std::lock_guard lock(mutex_);
    keys_.push_back(key);
    return key;
}

int Selector::select() { return do_select(std::nullopt); }

int Selector::select(std::chrono::milliseconds timeout) {
    return do_select(std::chrono::nanoseconds(timeout));
}

int Selector::select_now() { return do_select(std::chrono::nanoseconds::zero()); }

int Selector::do_select(std::optional<std::chrono::nanoseconds> timeout) {
    using Clock = std::chrono::steady_clock;
    const auto deadline =
        timeout ? Clock::now() + *timeout : Clock::time_point::max();

    uint64_t iterations = 0;
    for (;;) {
        std::vector<std::shared_ptr<SelectionKey>> snapshot;
        {
            std::lock_guard lock(mutex_);
            if (!open_) throw Error(Errc::closed, "selector closed");
            snapshot = keys_;
        }

        std::vector<std::shared_ptr<SelectionKey>> selected;
        for (const auto& key : snapshot) {
            if (!key->valid()) continue;
            Pollable* p = key->pollable();
            p->process();
            const OpSet ready = p->readiness();
            key->ready_ = ready;
            if (!(ready & key->interest()).empty()) selected.push_back(key);
        }
        if (!selected.empty()) {
            std::lock_guard lock(mutex_);
            selected_ = std::move(selected);
            return static_cast<int>(selected_.size());
        }
        if (timeout && (timeout->count() == 0 || Clock::now() >= deadline)) {
            std::lock_guard lock(mutex_);
            selected_.clear();
            return 0;
        }
        if (++iterations % 64 == 0) std::this_thread::yield();
    }
}

std::vector<std::shared_ptr<SelectionKey>> Selector::selected_keys() const {
    std::lock_guard lock(mutex_);
    return selected_;
}

std::size_t Selector::key_count() const {
    std::lock_guard lock(mutex_);
    return keys_.size();
}

void Selector::close() {
    std::vector<std::shared_ptr<SelectionKey>> keys;
    {
        std::lock_guard lock(mutex_);
        if (!open_) return;
        open_ = false;
        keys = keys_;
        selected_.clear();
    }
    for (auto& key : keys) key->cancel();
}

bool Selector::is_open() const {
    std::lock_guard lock(mutex_);
    return open_;
}

} // namespace unio
