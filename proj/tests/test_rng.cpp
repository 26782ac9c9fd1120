#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cflab/rng.hpp"

using cflab::Rng;

TEST_SUITE("rng") {

TEST_CASE("matches the generator family's reference output") {
  // First outputs of the reference implementation for (seed 42, stream 54).
  Rng rng(42, 54);
  const std::uint32_t expected[] = {0xa15c02b7u, 0x7b47f409u, 0xba1d3330u,
                                    0x83d2f293u, 0xbfa4784bu, 0xcbed606eu};
  for (auto e : expected) CHECK(rng.next_u32() == e);
}

TEST_CASE("identical (seed, stream) reproduces bit-identically") {
  Rng a(123456789, 7);
  Rng b(123456789, 7);
  for (int i = 0; i < 100000; ++i) REQUIRE(a.next_u32() == b.next_u32());
}

TEST_CASE("distinct streams differ") {
  Rng a(5, 0);
  Rng b(5, 1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i)
    if (a.next_u32() == b.next_u32()) ++equal;
  CHECK(equal < 5);
}

TEST_CASE("uniform stays in [0, 1) and fills the range") {
  Rng rng(1, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("gaussian with zero std returns the mean") {
  Rng rng(9, 2);
  CHECK(rng.gaussian(0.4, 0.0) == 0.4);
}

TEST_CASE("gaussian sample mean obeys the law of large numbers") {
  Rng rng(2024, 0);
  double acc = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) acc += rng.gaussian(0.0, 1.0);
  CHECK(std::fabs(acc / n) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gaussian golden value for (seed 7, stream 0)") {
  // Recorded once from the documented Box-Muller convention and pinned.
  Rng rng(7, 0);
  CHECK(rng.gaussian(0.0, 1.0) == doctest::Approx(-1.564358378152688).epsilon(1e-14));
}

TEST_CASE("uniform_int covers [0, n) uniformly enough") {
  Rng rng(11, 3);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const int v = rng.uniform_int(10);
    REQUIRE(v >= 0);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int c : counts) CHECK(c > 800);
}

TEST_CASE("bernoulli edge probabilities") {
  Rng rng(3, 3);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}

TEST_CASE("negative std is rejected") {
  Rng rng(1, 1);
  CHECK_THROWS_AS(rng.gaussian(0.0, -1.0), std::invalid_argument);
}

}  // TEST_SUITE
