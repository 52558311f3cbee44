#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "unio/error.hpp"
#include "unio/stats.hpp"

using namespace unio;

namespace {

// Independent two-pass mean/variance, deliberately not sharing code with
// the implementation under test.
double oracle_mean(const std::vector<double>& v) {
    double sum = 0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

double oracle_stddev(const std::vector<double>& v) {
    const double m = oracle_mean(v);
    double acc = 0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size()));
}

} // namespace

TEST_CASE("hand-computable mean and stddev") {
    std::vector<double> v{8, 12};
    CHECK(stats::mean(v) == 10.0);
    CHECK(stats::stddev(v) == 2.0);

    std::vector<double> constant{10, 10, 10};
    CHECK(stats::mean(constant) == 10.0);
    CHECK(stats::stddev(constant) == 0.0);
}

TEST_CASE("empty input reports no data") {
    std::vector<double> empty;
    CHECK_THROWS_AS(stats::mean(empty), Error);
    CHECK_THROWS_AS(stats::stddev(empty), Error);
    try {
        stats::mean(empty);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::no_data);
    }
}

TEST_CASE("randomized series match the two-pass oracle to 1e-9 relative") {
    std::mt19937 gen(555);
    std::uniform_real_distribution<double> dist(0.5, 5000.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> v;
        for (int i = 0; i < 5 + round % 13; ++i) v.push_back(dist(gen));
        const double m = stats::mean(v);
        const double s = stats::stddev(v);
        CHECK(std::abs(m - oracle_mean(v)) <= 1e-9 * std::abs(oracle_mean(v)));
        const double so = oracle_stddev(v);
        CHECK(std::abs(s - so) <= 1e-9 * std::max(so, 1.0));
    }
}

TEST_CASE("percentile uses nearest-rank on the sorted data") {
    std::vector<double> v{15, 20, 35, 40, 50};
    CHECK(stats::percentile(v, 30) == 20.0);
    CHECK(stats::percentile(v, 40) == 20.0);
    CHECK(stats::percentile(v, 50) == 35.0);
    CHECK(stats::percentile(v, 100) == 50.0);
    CHECK(stats::percentile(v, 1) == 15.0);

    std::vector<double> single{7};
    CHECK(stats::percentile(single, 50) == 7.0);
    CHECK(stats::percentile(single, 99.9) == 7.0);
}
