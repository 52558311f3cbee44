#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "unio/bench.hpp"

namespace unio::cli {

// Thrown for invalid or missing flags; message lists every problem found.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what, bool help_requested = false)
        : std::runtime_error(what), help_requested(help_requested) {}
    bool help_requested;
};

enum class Role { server, client, both };
enum class Format { csv, human };

struct CliArgs {
    bench::Mode mode = bench::Mode::throughput;
    Role role = Role::server;
    std::string backend = "loopback";
    std::string address = "127.0.0.1";
    int port = 9750;
    int conn_min = 1;
    int conn_max = 1;
    std::size_t message_size = 16;
    uint64_t message_count = 1000;
    uint64_t flush_interval = 64;
    int runs = 5;
    std::string output;
    Format format = Format::human;

    // Full transport address: host:port for the stream backend, the raw
    // address string for loopback.
    std::string endpoint_address() const {
        if (backend == "stream") return address + ":" + std::to_string(port);
        return address;
    }

    bench::BenchmarkConfig config(int connections) const {
        bench::BenchmarkConfig cfg;
        cfg.mode = mode;
        cfg.backend = backend;
        cfg.address = endpoint_address();
        cfg.connections = connections;
        cfg.message_size = message_size;
        cfg.message_count = message_count;
        cfg.flush_interval = flush_interval;
        cfg.runs = runs;
        return cfg;
    }
};

CliArgs parse(const std::vector<std::string>& argv);

// Execute the configured sweep; appends one CSV row per (connection count,
// run) on the measuring side. Returns the process exit code.
int run_sweep(const CliArgs& args);

// Fixed CSV header, one place.
extern const char* kCsvHeader;

} // namespace unio::cli
