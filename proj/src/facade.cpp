#include "unio/channel.hpp"

#include <algorithm>

namespace unio {

namespace {
int64_t as_size(const SocketFacade::OptionValue& value) {
    if (const auto* i = std::get_if<int64_t>(&value)) return *i;
    throw Error(Errc::invalid_value, "buffer size option requires an integer value");
}

bool as_bool(const SocketFacade::OptionValue& value) {
    if (const auto* b = std::get_if<bool>(&value)) return *b;
    throw Error(Errc::invalid_value, "option requires a boolean value");
}
} // namespace

std::optional<std::string> SocketFacade::local_address() const {
    if (channel_.endpoint_) return channel_.endpoint_->local_address();
    return std::nullopt;
}

std::optional<std::string> SocketFacade::remote_address() const {
    if (channel_.state() == ChannelState::connected ||
        channel_.state() == ChannelState::input_shutdown)
        return channel_.endpoint_->remote_address();
    return std::nullopt;
}

std::size_t SocketFacade::send_buffer_size() const { return channel_.ring_capacity_; }
std::size_t SocketFacade::receive_buffer_size() const { return channel_.recv_capacity_; }

std::optional<SocketFacade::OptionValue> SocketFacade::get_option(const std::string& name) const {
    if (channel_.state() == ChannelState::closed) throw Error(Errc::closed, "channel closed");

    if (name == "send_buffer_size") return OptionValue(static_cast<int64_t>(send_buffer_size()));
    if (name == "receive_buffer_size")
        return OptionValue(static_cast<int64_t>(receive_buffer_size()));
    if (name == "no_delay") return OptionValue(no_delay_);
    if (name == "keep_alive") return OptionValue(keep_alive_);
    if (name == "local_address") {
        auto a = local_address();
        if (!a) return std::nullopt;
        return OptionValue(*a);
    }
    if (name == "remote_address") {
        auto a = remote_address();
        if (!a) return std::nullopt;
        return OptionValue(*a);
    }
    throw Error(Errc::unknown_option, name);
}

SocketFacade::SetResult SocketFacade::set_option(const std::string& name,
                                                 const OptionValue& value) {
    if (channel_.state() == ChannelState::closed) throw Error(Errc::closed, "channel closed");

    // no_delay / keep_alive are recorded and reported back; the transport
    // has no equivalent knobs.
    if (name == "no_delay") {
        no_delay_ = as_bool(value);
        return SetResult::accepted;
    }
    if (name == "keep_alive") {
        keep_alive_ = as_bool(value);
        return SetResult::accepted;
    }
    if (name == "send_buffer_size" || name == "receive_buffer_size") {
        const int64_t size = as_size(value);
        if (size <= 0) throw Error(Errc::invalid_value, name + " must be positive");
        if (channel_.state() != ChannelState::created) return SetResult::ignored;
        if (name == "send_buffer_size") {
            channel_.ring_capacity_ = static_cast<std::size_t>(size);
            channel_.slice_length_ =
                std::min(channel_.slice_length_, channel_.ring_capacity_);
        } else {
            channel_.recv_capacity_ = static_cast<std::size_t>(size);
        }
        return SetResult::accepted;
    }
    if (name == "local_address" || name == "remote_address") return SetResult::ignored;
    throw Error(Errc::unknown_option, name);
}

} // namespace unio
