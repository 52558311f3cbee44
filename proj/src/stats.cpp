#include "unio/stats.hpp"

#include <algorithm>
#include <cmath>

#include "unio/error.hpp"

namespace unio::stats {

double mean(std::span<const double> values) {
    if (values.empty()) throw Error(Errc::no_data, "mean of empty series");
    double sum = 0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
    const double m = mean(values);
    double acc = 0;
    for (double v : values) acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(Errc::no_data, "percentile of empty series");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

} // namespace unio::stats
