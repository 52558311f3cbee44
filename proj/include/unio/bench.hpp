#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "unio/channel.hpp"

namespace unio::bench {

enum class Mode { throughput, latency };

// Shared event journal used by protocol-conformance checks: barrier/timing
// order and thread-to-connection affinity.
class EventLog {
public:
    enum class Kind { barrier_exit, timed_send, receive };
    struct Event {
        Kind kind;
        int thread_index;
        int connection_index;
    };

    void record(Kind kind, int thread_index, int connection_index) {
        std::lock_guard lock(mutex_);
        events_.push_back(Event{kind, thread_index, connection_index});
    }
    std::vector<Event> snapshot() const {
        std::lock_guard lock(mutex_);
        return events_;
    }

private:
    mutable std::mutex mutex_;
    std::vector<Event> events_;
};

struct BenchmarkConfig {
    Mode mode = Mode::throughput;
    std::string backend = "loopback";
    std::string address = "bench";
    int connections = 1;
    std::size_t message_size = 16;
    uint64_t message_count = 1000;
    uint64_t flush_interval = 64; // ignored in latency mode
    int runs = 5;
    std::chrono::milliseconds peer_timeout{30'000};
    EventLog* event_log = nullptr;

    // A tenth of the operations, at least one.
    uint64_t warmup_count() const {
        const uint64_t w = message_count / 10;
        return w == 0 ? 1 : w;
    }
};

struct ConnectionResult {
    int index = 0;
    double elapsed_s = 0;
    uint64_t bytes_moved = 0;
    uint64_t operations = 0;
    uint64_t data_requests = 0;           // DATA sends during the timed window
    std::vector<double> latency_ns;       // latency mode only
};

struct RunResult {
    std::vector<ConnectionResult> connections;
    double elapsed_s = 0;    // barrier-synchronized window: max over connections
    double bytes_per_s = 0;
    double ops_per_s = 0;
    double rtt_mean_us = 0;
    double rtt_p50_us = 0;
    double rtt_p99_us = 0;
    double rtt_p999_us = 0;
};

struct MetricSummary {
    double mean = 0;
    double stddev = 0;
};

struct RunAggregate {
    MetricSummary bytes_per_s;
    MetricSummary ops_per_s;
    MetricSummary rtt_mean_us;
    MetricSummary rtt_p50_us;
    MetricSummary rtt_p99_us;
    MetricSummary rtt_p999_us;
};

// Arithmetic mean and population standard deviation per metric.
RunAggregate aggregate_runs(std::span<const RunResult> results);

// Measuring side. Binds once; each run() accepts the configured number of
// connections, executes the protocol, and closes them.
class BenchServer {
public:
    BenchServer(const std::string& backend, const std::string& bind_address);
    ~BenchServer();

    RunResult run(const BenchmarkConfig& config);
    void close();

private:
    std::vector<std::unique_ptr<Channel>> accept_connections(const BenchmarkConfig& config);
    RunResult run_throughput(const BenchmarkConfig& config,
                             std::vector<std::unique_ptr<Channel>> channels);
    RunResult run_latency(const BenchmarkConfig& config,
                          std::vector<std::unique_ptr<Channel>> channels);

    ServerChannel server_;
};

// Peer side; returns messages received per connection (receive oracle).
struct ClientRunStats {
    std::vector<uint64_t> messages_received;
};
ClientRunStats run_client(const BenchmarkConfig& config);

} // namespace unio::bench
