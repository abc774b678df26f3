#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "triagelab/rng.hpp"

using namespace triagelab;

TEST_CASE("same seed gives an identical stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        same += a.next_u64() == b.next_u64();
    }
    CHECK(same == 0);
}

TEST_CASE("next_below stays in range and hits all values") {
    Rng rng(7);
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const uint64_t v = rng.next_below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("next_double lies in [0,1)") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double d = rng.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
}

TEST_CASE("normal draws have roughly unit variance") {
    Rng rng(11);
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("shuffle is a permutation and deterministic") {
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(5), b(5);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expected(50);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(sorted == expected);
}

TEST_CASE("derive_seed separates stages and seeds") {
    CHECK(derive_seed(1, "gen") != derive_seed(1, "train-clean"));
    CHECK(derive_seed(1, "gen") != derive_seed(2, "gen"));
    CHECK(derive_seed(1, "gen") == derive_seed(1, "gen"));
    // composite stage names used by the poisoned assembly
    CHECK(derive_seed(1, "poisoned:1") != derive_seed(1, "poisoned:2"));
}
