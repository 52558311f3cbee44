#include "unio/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

namespace unio::cli {

const char* kCsvHeader =
    "mode,backend,connections,message_size,message_count,flush_interval,run_index,"
    "elapsed_s,bytes_total,ops_total,throughput_MBps,ops_per_s,"
    "rtt_mean_us,rtt_p50_us,rtt_p99_us,rtt_p999_us";

namespace {

void parse_connections(const std::string& spec, int& min, int& max) {
    const auto dots = spec.find("..");
    try {
        if (dots == std::string::npos) {
            min = max = std::stoi(spec);
        } else {
            min = std::stoi(spec.substr(0, dots));
            max = std::stoi(spec.substr(dots + 2));
        }
    } catch (const std::exception&) {
        throw UsageError("--connections must be N or A..B, got '" + spec + "'");
    }
    if (min < 1 || min > max || max > 1024)
        throw UsageError("--connections range must satisfy 1 <= min <= max <= 1024");
}

} // namespace

CliArgs parse(const std::vector<std::string>& argv) {
    CliArgs args;

    CLI::App app{"Two-sided throughput / round-trip latency microbenchmark"};
    app.name("netbench");

    std::string mode_s, role_s, connections_s = "1", format_s = "human";
    bool flush_given = false;

    app.add_option("--mode", mode_s, "Benchmark mode: throughput | latency")->required();
    app.add_option("--role", role_s, "Process role: server | client | both")->required();
    app.add_option("--address", args.address, "Remote host (client) or bind host (server)");
    app.add_option("--port", args.port, "TCP port for the stream backend")
        ->check(CLI::Range(1, 65535));
    auto* backend_opt =
        app.add_option("--backend", args.backend, "Transport backend: loopback | stream")
            ->check(CLI::IsMember({"loopback", "stream"}));
    app.add_option("--connections", connections_s, "Connection count, or sweep range A..B");
    app.add_option("--size", args.message_size, "Message size in bytes")
        ->check(CLI::PositiveNumber);
    app.add_option("--count", args.message_count, "Messages (or round trips) per connection")
        ->check(CLI::PositiveNumber);
    auto* flush_opt =
        app.add_option("--flush", args.flush_interval, "Messages buffered per flush")
            ->check(CLI::PositiveNumber);
    app.add_option("--runs", args.runs, "Repetitions per connection count")
        ->check(CLI::PositiveNumber);
    app.add_option("--output", args.output, "CSV output path");
    app.add_option("--format", format_s, "Result format: csv | human")
        ->check(CLI::IsMember({"csv", "human"}));

    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw UsageError(app.help(), true);
    } catch (const CLI::ParseError& e) {
        throw UsageError(std::string(e.what()) + "\n\n" + app.help());
    }

    if (mode_s == "throughput")
        args.mode = bench::Mode::throughput;
    else if (mode_s == "latency")
        args.mode = bench::Mode::latency;
    else
        throw UsageError("--mode must be throughput or latency, got '" + mode_s + "'");

    if (role_s == "server")
        args.role = Role::server;
    else if (role_s == "client")
        args.role = Role::client;
    else if (role_s == "both")
        args.role = Role::both;
    else
        throw UsageError("--role must be server, client or both, got '" + role_s + "'");

    parse_connections(connections_s, args.conn_min, args.conn_max);
    args.format = format_s == "csv" ? Format::csv : Format::human;

    flush_given = flush_opt->count() > 0;
    if (args.mode == bench::Mode::latency && flush_given)
        std::cerr << "warning: --flush is ignored in latency mode\n";

    // Default backend follows the role: a two-process role means real
    // sockets, a single-process role means the in-process backend.
    if (backend_opt->count() == 0) args.backend = args.role == Role::both ? "loopback" : "stream";
    if (args.role == Role::both && args.backend == "stream")
        throw UsageError("--role both requires the loopback backend");
    if (args.role != Role::both && args.backend == "loopback")
        throw UsageError("the loopback backend runs in one process; use --role both");

    return args;
}

namespace {

void write_csv_row(std::ofstream& out, const CliArgs& args, int connections, int run_index,
                   const bench::RunResult& r) {
    uint64_t bytes = 0, ops = 0;
    for (const auto& c : r.connections) {
        bytes += c.bytes_moved;
        ops += c.operations;
    }
    char line[512];
    std::snprintf(line, sizeof line,
                  "%s,%s,%d,%zu,%llu,%llu,%d,%.9f,%llu,%llu,%.6f,%.3f,%.3f,%.3f,%.3f,%.3f",
                  args.mode == bench::Mode::throughput ? "throughput" : "latency",
                  args.backend.c_str(), connections, args.message_size,
                  static_cast<unsigned long long>(args.message_count),
                  static_cast<unsigned long long>(args.flush_interval), run_index, r.elapsed_s,
                  static_cast<unsigned long long>(bytes), static_cast<unsigned long long>(ops),
                  r.bytes_per_s / 1e6, r.ops_per_s, r.rtt_mean_us, r.rtt_p50_us, r.rtt_p99_us,
                  r.rtt_p999_us);
    out << line << "\n";
    out.flush();
}

void print_human(const CliArgs& args, int connections, std::span<const bench::RunResult> results) {
    const auto agg = bench::aggregate_runs(results);
    std::printf("connections=%d runs=%zu\n", connections, results.size());
    if (args.mode == bench::Mode::throughput) {
        std::printf("  throughput: %.3f +- %.3f MB/s, %.0f +- %.0f ops/s\n",
                    agg.bytes_per_s.mean / 1e6, agg.bytes_per_s.stddev / 1e6, agg.ops_per_s.mean,
                    agg.ops_per_s.stddev);
    } else {
        std::printf("  rtt: mean %.3f +- %.3f us, p50 %.3f us, p99 %.3f us, p999 %.3f us\n",
                    agg.rtt_mean_us.mean, agg.rtt_mean_us.stddev, agg.rtt_p50_us.mean,
                    agg.rtt_p99_us.mean, agg.rtt_p999_us.mean);
    }
    std::fflush(stdout);
}

} // namespace

int run_sweep(const CliArgs& args) {
    const bool measuring = args.role != Role::client;

    std::ofstream csv;
    if (measuring && !args.output.empty()) {
        const bool fresh =
            !std::filesystem::exists(args.output) || std::filesystem::file_size(args.output) == 0;
        csv.open(args.output, std::ios::app);
        if (!csv) {
            std::cerr << "cannot open output file " << args.output << "\n";
            return 1;
        }
        if (fresh) csv << kCsvHeader << "\n";
    }

    try {
        std::unique_ptr<bench::BenchServer> server;
        if (args.role != Role::client)
            server = std::make_unique<bench::BenchServer>(args.backend, args.endpoint_address());

        for (int n = args.conn_min; n <= args.conn_max; ++n) {
            std::vector<bench::RunResult> results;
            for (int run = 0; run < args.runs; ++run) {
                const auto cfg = args.config(n);
                bench::RunResult result;
                if (args.role == Role::both) {
                    std::exception_ptr client_error;
                    std::thread client([&] {
                        try {
                            bench::run_client(cfg);
                        } catch (...) {
                            client_error = std::current_exception();
                        }
                    });
                    try {
                        result = server->run(cfg);
                    } catch (...) {
                        client.join();
                        throw;
                    }
                    client.join();
                    if (client_error) std::rethrow_exception(client_error);
                } else if (args.role == Role::server) {
                    result = server->run(cfg);
                } else {
                    bench::run_client(cfg);
                }
                if (measuring) {
                    if (csv.is_open()) write_csv_row(csv, args, n, run, result);
                    results.push_back(std::move(result));
                }
            }
            if (measuring && args.format == Format::human) print_human(args, n, results);
        }
    } catch (const std::exception& e) {
        std::cerr << "benchmark failed: " << e.what() << "\n";
        return 1; // partial CSV output is retained
    }
    return 0;
}

} // namespace unio::cli
