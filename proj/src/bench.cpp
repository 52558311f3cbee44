#include "unio/bench.hpp"

#include <algorithm>
#include <barrier>
#include <cstring>
#include <exception>
#include <thread>

#include "unio/config.hpp"
#include "unio/selector.hpp"
#include "unio/stats.hpp"

namespace unio::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

[[noreturn]] void desync(const std::string& what) { throw Error(Errc::peer_desync, what); }

// Spin-read exactly n bytes, discarding them. End-of-stream mid-count is a
// protocol violation.
void recv_exact(Channel& ch, uint64_t n, Clock::time_point deadline) {
    std::byte scratch[16 * 1024];
    uint64_t got = 0;
    while (got < n) {
        ch.process();
        const auto want = std::min<uint64_t>(n - got, sizeof scratch);
        const auto r = ch.read({scratch, static_cast<std::size_t>(want)});
        if (!r) throw Error(Errc::truncated_message, "peer closed mid-protocol");
        got += *r;
        if (*r == 0) {
            if (Clock::now() > deadline) desync("timed out waiting for peer data");
            std::this_thread::yield();
        }
    }
}

void send_all(Channel& ch, std::span<const std::byte> src, Clock::time_point deadline) {
    std::size_t sent = 0;
    while (sent < src.size()) {
        const std::size_t n = ch.write(src.subspan(sent));
        sent += n;
        if (n == 0) {
            ch.process();
            if (Clock::now() > deadline) desync("timed out draining send ring");
            std::this_thread::yield();
        }
    }
}

// Accumulate-then-flush sender: messages are buffered locally and handed to
// the channel as one gathering write per flush interval.
class BatchSender {
public:
    BatchSender(Channel& ch, std::size_t message_size, uint64_t flush_interval)
        : ch_(ch),
          message_size_(message_size),
          flush_interval_(std::max<uint64_t>(1, flush_interval)),
          payload_(message_size * flush_interval_) {
        for (std::size_t i = 0; i < payload_.size(); ++i)
            payload_[i] = static_cast<std::byte>(i & 0xff);
        slice_ = slice_length_from_env();
    }

    uint64_t gather_calls() const { return gather_calls_; }

    void send_messages(uint64_t count, Clock::time_point deadline) {
        uint64_t sent = 0;
        while (sent < count) {
            const uint64_t batch = std::min<uint64_t>(flush_interval_, count - sent);
            flush(batch, deadline);
            sent += batch;
        }
    }

private:
    void flush(uint64_t batch, Clock::time_point deadline) {
        spans_.clear();
        for (uint64_t i = 0; i < batch; ++i)
            spans_.push_back(
                std::span<const std::byte>(payload_.data() + i * message_size_, message_size_));
        ++gather_calls_;

        const std::size_t total = batch * message_size_;
        if (total <= slice_) {
            // Wait for room so the whole flush merges into one region.
            while (!ch_.can_send_region(total)) {
                ch_.process();
                if (Clock::now() > deadline) desync("send ring never drained");
                std::this_thread::yield();
            }
            ch_.write_gather(spans_);
            return;
        }
        std::size_t offset = 0; // in whole spans
        while (offset < spans_.size()) {
            const std::size_t n =
                ch_.write_gather(std::span<const std::span<const std::byte>>(spans_).subspan(offset));
            offset += n / message_size_;
            if (n == 0) {
                ch_.process();
                if (Clock::now() > deadline) desync("send ring never drained");
                std::this_thread::yield();
            }
        }
    }

    Channel& ch_;
    std::size_t message_size_;
    uint64_t flush_interval_;
    std::size_t slice_;
    std::vector<std::byte> payload_;
    std::vector<std::span<const std::byte>> spans_;
    uint64_t gather_calls_ = 0;
};

void send_signal_byte(Channel& ch, Clock::time_point deadline) {
    const std::byte b{0x5a};
    send_all(ch, {&b, 1}, deadline);
}

} // namespace

// ------------------------------------------------------------ aggregation

RunAggregate aggregate_runs(std::span<const RunResult> results) {
    if (results.empty()) throw Error(Errc::no_data, "no runs to aggregate");

    auto summarize = [&](auto getter) {
        std::vector<double> series;
        series.reserve(results.size());
        for (const auto& r : results) series.push_back(getter(r));
        return MetricSummary{stats::mean(series), stats::stddev(series)};
    };

    RunAggregate agg;
    agg.bytes_per_s = summarize([](const RunResult& r) { return r.bytes_per_s; });
    agg.ops_per_s = summarize([](const RunResult& r) { return r.ops_per_s; });
    agg.rtt_mean_us = summarize([](const RunResult& r) { return r.rtt_mean_us; });
    agg.rtt_p50_us = summarize([](const RunResult& r) { return r.rtt_p50_us; });
    agg.rtt_p99_us = summarize([](const RunResult& r) { return r.rtt_p99_us; });
    agg.rtt_p999_us = summarize([](const RunResult& r) { return r.rtt_p999_us; });
    return agg;
}

namespace {

void finalize_aggregates(RunResult& result) {
    double max_elapsed = 0;
    uint64_t bytes = 0;
    uint64_t ops = 0;
    std::vector<double> pooled;
    for (const auto& c : result.connections) {
        max_elapsed = std::max(max_elapsed, c.elapsed_s);
        bytes += c.bytes_moved;
        ops += c.operations;
        pooled.insert(pooled.end(), c.latency_ns.begin(), c.latency_ns.end());
    }
    result.elapsed_s = max_elapsed;
    if (max_elapsed > 0) {
        result.bytes_per_s = static_cast<double>(bytes) / max_elapsed;
        result.ops_per_s = static_cast<double>(ops) / max_elapsed;
    }
    if (!pooled.empty()) {
        result.rtt_mean_us = stats::mean(pooled) / 1000.0;
        result.rtt_p50_us = stats::percentile(pooled, 50) / 1000.0;
        result.rtt_p99_us = stats::percentile(pooled, 99) / 1000.0;
        result.rtt_p999_us = stats::percentile(pooled, 99.9) / 1000.0;
    }
}

} // namespace

// ------------------------------------------------------------ BenchServer

BenchServer::BenchServer(const std::string& backend, const std::string& bind_address)
    : server_(backend) {
    server_.bind(bind_address);
}

BenchServer::~BenchServer() { close(); }

void BenchServer::close() {
    if (server_.is_open()) server_.close();
}

std::vector<std::unique_ptr<Channel>>
BenchServer::accept_connections(const BenchmarkConfig& config) {
    std::vector<std::unique_ptr<Channel>> channels;
    const auto deadline = Clock::now() + config.peer_timeout;
    while (channels.size() < static_cast<std::size_t>(config.connections)) {
        server_.process();
        if (auto ch = server_.accept()) channels.push_back(std::move(ch));
        // Keep handshakes moving on already accepted connections.
        for (auto& ch : channels) ch->process();
        if (Clock::now() > deadline) desync("expected connection count never reached");
        std::this_thread::yield();
    }
    return channels;
}

RunResult BenchServer::run(const BenchmarkConfig& config) {
    auto channels = accept_connections(config);
    if (config.mode == Mode::throughput) return run_throughput(config, std::move(channels));
    return run_latency(config, std::move(channels));
}

RunResult BenchServer::run_throughput(const BenchmarkConfig& config,
                                      std::vector<std::unique_ptr<Channel>> channels) {
    const int n = config.connections;
    RunResult result;
    result.connections.resize(n);

    // The completion step runs before any thread is released, so the log
    // shows every barrier exit ahead of every timed send.
    auto on_barrier = [&config, n]() noexcept {
        if (config.event_log)
            for (int i = 0; i < n; ++i)
                config.event_log->record(EventLog::Kind::barrier_exit, i, i);
    };
    std::barrier barrier(n, on_barrier);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);

    for (int i = 0; i < n; ++i) {
        threads.emplace_back([&, i, ch = channels[i].get()] {
            try {
                const auto deadline = Clock::now() + config.peer_timeout;
                BatchSender sender(*ch, config.message_size, config.flush_interval);

                sender.send_messages(config.warmup_count(), deadline);
                recv_exact(*ch, 1, deadline); // client: all warmup received
                barrier.arrive_and_wait();

                const auto t0 = Clock::now();
                const uint64_t requests_before = ch->data_requests_sent();
                if (config.event_log)
                    config.event_log->record(EventLog::Kind::timed_send, i, i);
                sender.send_messages(config.message_count, deadline);
                recv_exact(*ch, 1, deadline); // client: benchmark finished
                const auto t1 = Clock::now();

                auto& c = result.connections[i];
                c.index = i;
                c.elapsed_s = seconds_between(t0, t1);
                c.operations = config.message_count;
                c.bytes_moved = config.message_count * config.message_size;
                c.data_requests = ch->data_requests_sent() - requests_before;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& ch : channels) ch->close();
    finalize_aggregates(result);
    return result;
}

RunResult BenchServer::run_latency(const BenchmarkConfig& config,
                                   std::vector<std::unique_ptr<Channel>> channels) {
    const int n = config.connections;
    const uint64_t rounds = config.warmup_count() + config.message_count;
    RunResult result;
    result.connections.resize(n);

    // One worker thread per connection; connection i belongs to thread
    // i mod n (identity here, kept general for clarity).
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);

    for (int t = 0; t < n; ++t) {
        threads.emplace_back([&, t] {
            try {
                struct ConnState {
                    Channel* ch;
                    int index;
                    uint64_t completed = 0;
                    std::size_t have = 0;
                    Clock::time_point t_send;
                    Clock::time_point t_first;
                    Clock::time_point t_last;
                };
                const auto deadline = Clock::now() + config.peer_timeout;
                std::vector<std::byte> message(config.message_size);
                for (std::size_t i = 0; i < message.size(); ++i)
                    message[i] = static_cast<std::byte>(i & 0xff);
                std::vector<std::byte> scratch(config.message_size);

                Selector selector;
                std::vector<ConnState> conns;
                for (int i = t; i < n; i += n) {
                    conns.push_back(ConnState{channels[i].get(), i});
                    auto key = selector.register_pollable(*channels[i],
                                                          OpSet(OpSet::READ));
                    key->attach(static_cast<std::size_t>(conns.size() - 1));
                }

                // Kick off the ping-pong pattern with one initial message.
                for (auto& c : conns) {
                    c.t_send = Clock::now();
                    c.t_first = c.t_send;
                    if (config.event_log)
                        config.event_log->record(EventLog::Kind::timed_send, t, c.index);
                    send_all(*c.ch, message, deadline);
                }

                std::size_t done = 0;
                while (done < conns.size()) {
                    if (selector.select(std::chrono::milliseconds(100)) == 0) {
                        if (Clock::now() > deadline) desync("ping-pong stalled");
                        continue;
                    }
                    for (const auto& key : selector.selected_keys()) {
                        auto& c = conns[std::any_cast<std::size_t>(key->attachment())];
                        if (c.completed >= rounds) continue;
                        const auto r = c.ch->read(
                            {scratch.data() + c.have, scratch.size() - c.have});
                        if (!r)
                            throw Error(Errc::truncated_message,
                                        "peer closed mid ping-pong");
                        c.have += *r;
                        if (c.have < config.message_size) continue;
                        c.have = 0;

                        const auto now = Clock::now();
                        ++c.completed;
                        if (config.event_log)
                            config.event_log->record(EventLog::Kind::receive, t, c.index);
                        if (c.completed > config.warmup_count()) {
                            result.connections[c.index].latency_ns.push_back(
                                std::chrono::duration<double, std::nano>(now - c.t_send)
                                    .count());
                        }
                        if (c.completed == rounds) {
                            c.t_last = now;
                            ++done;
                            key->cancel(); // finished connections stop polling
                            auto& out = result.connections[c.index];
                            out.index = c.index;
                            out.elapsed_s = seconds_between(c.t_first, c.t_last);
                            out.operations = config.message_count;
                            out.bytes_moved =
                                2 * config.message_count * config.message_size;
                            out.data_requests = c.ch->data_requests_sent();
                        } else {
                            c.t_send = Clock::now();
                            send_all(*c.ch, message, deadline);
                        }
                    }
                }
                for (auto& c : conns) {
                    auto key = c.ch->selection_key();
                    if (key) key->cancel();
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& ch : channels) ch->close();
    finalize_aggregates(result);
    return result;
}

// ----------------------------------------------------------------- client

ClientRunStats run_client(const BenchmarkConfig& config) {
    const int n = config.connections;
    const auto deadline = Clock::now() + config.peer_timeout;

    std::vector<std::unique_ptr<Channel>> channels;
    for (int i = 0; i < n; ++i) {
        auto ch = std::make_unique<Channel>(config.backend);
        ch->connect(config.address);
        channels.push_back(std::move(ch));
    }
    for (;;) {
        bool all = true;
        for (auto& ch : channels) {
            ch->process();
            if (ch->state() != ChannelState::connected) all = ch->finish_connect() && all;
        }
        if (all) break;
        if (Clock::now() > deadline) desync("client connections never established");
        std::this_thread::yield();
    }

    ClientRunStats clientstats;
    clientstats.messages_received.assign(n, 0);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(n);

    for (int t = 0; t < n; ++t) {
        threads.emplace_back([&, t, ch = channels[t].get()] {
            try {
                const auto deadline2 = Clock::now() + config.peer_timeout;
                if (config.mode == Mode::throughput) {
                    recv_exact(*ch, config.warmup_count() * config.message_size, deadline2);
                    send_signal_byte(*ch, deadline2);
                    recv_exact(*ch, config.message_count * config.message_size, deadline2);
                    send_signal_byte(*ch, deadline2);
                    clientstats.messages_received[t] =
                        config.warmup_count() + config.message_count;
                } else {
                    // Echo every full message back.
                    const uint64_t rounds = config.warmup_count() + config.message_count;
                    std::vector<std::byte> buf(config.message_size);
                    for (uint64_t r = 0; r < rounds; ++r) {
                        std::size_t have = 0;
                        while (have < buf.size()) {
                            ch->process();
                            const auto got =
                                ch->read({buf.data() + have, buf.size() - have});
                            if (!got)
                                throw Error(Errc::truncated_message,
                                            "server closed mid ping-pong");
                            have += *got;
                            if (*got == 0) {
                                if (Clock::now() > deadline2)
                                    desync("echo stream stalled");
                                std::this_thread::yield();
                            }
                        }
                        send_all(*ch, buf, deadline2);
                        ++clientstats.messages_received[t];
                    }
                }
                ch->close();
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return clientstats;
}

} // namespace unio::bench
