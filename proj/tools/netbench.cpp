#include <cstdio>
#include <iostream>
#include <vector>

#include "unio/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        const auto parsed = unio::cli::parse(args);
        return unio::cli::run_sweep(parsed);
    } catch (const unio::cli::UsageError& e) {
        if (e.help_requested) {
            std::cout << e.what() << "\n";
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
