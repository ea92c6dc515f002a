#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "coldstart/random.hpp"

using namespace coldstart;

TEST_CASE("streams are reproducible and distinct", "[random]") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> va, vb, vc;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(derive_seed(42, {1, 2}) == derive_seed(42, {1, 2}));
  CHECK(derive_seed(42, {1, 2}) != derive_seed(42, {2, 1}));
  CHECK(derive_seed(42, {1}) != derive_seed(7, {1}));
}

TEST_CASE("fnv1a64 reference values", "[random]") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("xoshiro256** seeded by splitmix64 matches reference output", "[random]") {
  std::uint64_t state = 0;
  CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(state) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("uniform, index and normal moments", "[random]") {
  Rng rng(1);
  const int n = 200000;
  double sum = 0, sum_sq = 0, nsum = 0, nsq = 0;
  std::vector<int> counts(7, 0);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
    REQUIRE(rng.uniform_open() > 0.0);
    const auto k = rng.index(7);
    REQUIRE(k < 7);
    ++counts[k];
    const double z = rng.normal();
    nsum += z;
    nsq += z * z;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sum_sq / n - 1.0 / 3.0) < 0.005);
  CHECK(std::abs(nsum / n) < 0.01);
  CHECK(std::abs(nsq / n - 1.0) < 0.015);
  const double expected = n / 7.0;
  const double sigma = std::sqrt(n * (1.0 / 7) * (6.0 / 7));
  for (int c : counts) CHECK(std::abs(c - expected) < 4 * sigma);
}

TEST_CASE("gumbel mean is the Euler-Mascheroni constant", "[random]") {
  Rng rng(3);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += rng.gumbel();
  CHECK(std::abs(sum / n - 0.5772156649) < 0.01);
}
