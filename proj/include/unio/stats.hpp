#pragma once

#include <span>
#include <vector>

namespace unio::stats {

double mean(std::span<const double> values);

// Population standard deviation.
double stddev(std::span<const double> values);

// Nearest-rank percentile, p in (0, 100]. values need not be sorted.
double percentile(std::vector<double> values, double p);

} // namespace unio::stats
