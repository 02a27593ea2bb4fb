#include <doctest.h>

#include <cmath>

#include "cdpm/rng.hpp"

using namespace cdpm;

TEST_SUITE("rng") {

TEST_CASE("same seed and position give identical draws") {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RandomStream c(42, 7);
  const double first = c.normal();
  RandomStream d(42, 7);
  CHECK(first == d.normal());
}

TEST_CASE("different seeds and streams decorrelate") {
  RandomStream a(1, 0), b(2, 0), c(1, 1);
  CHECK(a.next_u64() != b.next_u64());
  RandomStream a2(1, 0);
  a2.next_u64();
  CHECK(a2.next_u64() != c.next_u64());
}

TEST_CASE("uniform stays inside the open unit interval") {
  RandomStream rng(3, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments over 1e6 samples") {
  RandomStream rng(2024, 0);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 4e-3);       // 4 standard errors of the mean
  CHECK(std::abs(var - 1.0) < 0.01);  // 1% chi-square concentration
}

TEST_CASE("fork is independent of parent position") {
  RandomStream a(9, 1);
  const RandomStream f1 = a.fork(5);
  a.next_u64();
  a.next_u64();
  RandomStream f2 = a.fork(5);
  RandomStream f1c = f1;
  CHECK(f1c.next_u64() == f2.next_u64());
}

TEST_CASE("uniform_index covers the range") {
  RandomStream rng(5, 0);
  bool seen[7] = {};
  for (int i = 0; i < 1000; ++i) {
    const auto k = rng.uniform_index(7);
    CHECK(k < 7);
    seen[k] = true;
  }
  for (bool s : seen) CHECK(s);
}

}  // TEST_SUITE
