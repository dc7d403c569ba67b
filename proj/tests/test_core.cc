// Copyright 2026 The drlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <set>

#include "doctest.h"
#include "drlab/core.h"
#include "drlab/transducer.h"
#include "oracles.h"

using namespace drlab;

TEST_CASE("log_add basic cases") {
  CHECK(log_add(-1.5, kLogZero) == -1.5);
  CHECK(log_add(kLogZero, -1.5) == -1.5);
  CHECK(is_log_zero(log_add(kLogZero, kLogZero)));
  CHECK(std::abs(log_add(std::log(0.5), std::log(0.5))) < 1e-15);
  const double direct = std::log(std::exp(std::log(0.3)) + std::exp(std::log(0.2)));
  CHECK(std::abs(log_add(std::log(0.3), std::log(0.2)) - direct) < 1e-12);
  CHECK(std::abs(log_add(std::log(0.3), std::log(0.2)) - std::log(0.5)) < 1e-12);
}

TEST_CASE("log_add stays finite for large magnitudes") {
  CHECK(log_add(-1000.0, -1000.0) == doctest::Approx(-1000.0 + std::log(2.0)));
  CHECK(log_add(800.0, 800.0) == doctest::Approx(800.0 + std::log(2.0)));
}

TEST_CASE("log_add is commutative and associative on [-50, 0]") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double a = -50.0 * rng.uniform();
    const double b = -50.0 * rng.uniform();
    const double c = -50.0 * rng.uniform();
    CHECK(log_add(a, b) == log_add(b, a));
    CHECK(std::abs(log_add(log_add(a, b), c) - log_add(a, log_add(b, c))) <= 1e-10);
    CHECK(log_add(a, b) >= std::max(a, b));
  }
}

TEST_CASE("log_sum matches pairwise accumulation") {
  const std::vector<double> xs{std::log(0.1), std::log(0.2), kLogZero, std::log(0.3)};
  CHECK(std::abs(log_sum(xs) - std::log(0.6)) < 1e-12);
  CHECK(is_log_zero(log_sum(std::vector<double>{})));
  CHECK(is_log_zero(log_mul(kLogZero, 0.0)));
  CHECK(log_mul(-1.0, -2.0) == -3.0);
}

TEST_CASE("count_alignments examples") {
  CHECK(count_alignments(1, 0) == 1);
  CHECK(count_alignments(2, 1) == 2);
  CHECK(count_alignments(4, 2) == 10);
  CHECK(count_alignments(3, 2) == 6);
  CHECK_THROWS(count_alignments(0, 1));
  // Large U stays exact: C(200+300-1, 300) has more than 64 bits.
  const auto big = count_alignments(200, 300);
  CHECK(big > boost::multiprecision::cpp_int(std::numeric_limits<std::uint64_t>::max()));
  // Pascal's rule as an independent big-integer oracle.
  std::vector<std::vector<boost::multiprecision::cpp_int>> pascal(80);
  for (std::size_t n = 0; n < pascal.size(); ++n) {
    pascal[n].assign(n + 1, 1);
    for (std::size_t k = 1; k < n; ++k) pascal[n][k] = pascal[n - 1][k - 1] + pascal[n - 1][k];
  }
  CHECK(count_alignments(30, 49) == pascal[78][49]);
  CHECK(count_alignments(1, 60) == 1);
}

TEST_CASE("count_alignments equals brute-force and library enumeration") {
  for (int t = 1; t <= 6; ++t) {
    for (int u = 0; u <= 4; ++u) {
      const auto brute = testing::interleavings(t, u);
      CHECK(count_alignments(t, u) == brute.size());
      CHECK(count_alignments(t, u) == enumerate_alignments(t, u).size());
    }
  }
}

TEST_CASE("alignment validation follows the final-blank convention") {
  const LabelSeq w = to_labels({3, 1});
  for (const auto& shape : enumerate_alignments(4, 2)) {
    const Alignment a = instantiate(shape, w);
    CHECK_NOTHROW(validate_alignment(a, 4));
    CHECK(a.labels() == w);
    CHECK(a.num_frames() == 4);
    CHECK(a.times.front() == 1);
    CHECK(a.times.back() == 4);
    for (std::size_t i = 0; i + 1 < a.symbols.size(); ++i) {
      CHECK(a.times[i + 1] - a.times[i] == (a.symbols[i].is_blank() ? 1 : 0));
    }
  }
  Alignment bad;
  bad.symbols = {Symbol{1}};
  bad.times = {1};
  CHECK_THROWS(validate_alignment(bad, 1));
  bad.symbols = {Symbol::blank(), Symbol::blank()};
  bad.times = {1, 1};
  CHECK_THROWS(validate_alignment(bad, 2));
}

TEST_CASE("label text round trip and parse errors") {
  const LabelSeq w = to_labels({1, 4, 2});
  CHECK(format_labels(w) == "1 4 2");
  CHECK(parse_labels("1 4 2") == w);
  CHECK(parse_labels("").empty());
  CHECK(parse_labels("  ").empty());
  CHECK_THROWS_AS(parse_labels("1 x 2"), DataError);
  CHECK(parse_ints("0 5 3") == std::vector<int>{0, 5, 3});
}

TEST_CASE("domain names round trip") {
  CHECK(parse_domain(domain_name(Domain::kSource)) == Domain::kSource);
  CHECK(parse_domain(domain_name(Domain::kTarget)) == Domain::kTarget);
  CHECK_THROWS(parse_domain("other"));
}

TEST_CASE("vocabulary ids") {
  const Vocabulary v(4);
  CHECK(v.size() == 5);
  CHECK(v.contains(Symbol::blank()));
  CHECK_FALSE(v.is_label(Symbol::blank()));
  CHECK(v.is_label(Symbol{4}));
  CHECK_FALSE(v.contains(Symbol{5}));
  CHECK_THROWS(Vocabulary(0));
}

TEST_CASE("rng streams are deterministic and separated") {
  Rng a(derive_seed(42, "sample", 3));
  Rng b(derive_seed(42, "sample", 3));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(derive_seed(42, "sample", i));
  seeds.insert(derive_seed(42, "split", 0));
  seeds.insert(derive_seed(43, "sample", 0));
  CHECK(seeds.size() == 1002);
}

TEST_CASE("rng uniform and categorical frequencies") {
  Rng rng(99);
  const std::vector<double> w{0.2, 0.0, 0.5, 0.3};
  std::vector<int> hits(4, 0);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    ++hits[static_cast<std::size_t>(rng.categorical(w))];
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(hits[1] == 0);
  for (std::size_t k : {0u, 2u, 3u}) {
    const double se = std::sqrt(w[k] * (1 - w[k]) / n);
    CHECK(std::abs(hits[k] / double(n) - w[k]) < 4.0 * se);
  }
}
