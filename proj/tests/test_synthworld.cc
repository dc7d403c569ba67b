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

#include "doctest.h"
#include "drlab/synthworld.h"
#include "oracles.h"

using namespace drlab;

namespace {

double prior_mass(const TableLM& lm) {
  double total = 0.0;
  for (const auto& [w, p] : lm.table()) total += p;
  return total;
}

SynthWorld disjoint_world() {
  const Vocabulary vocab(2);
  TableLM src(vocab, {{to_labels({1}), 0.25}, {to_labels({1, 1}), 0.75}});
  TableLM tgt(vocab, {{to_labels({2}), 0.5}, {to_labels({2, 2}), 0.5}});
  return SynthWorld(vocab, 2, random_channel(2, 3, 2, 0.1, 5), src, tgt, 1);
}

}  // namespace

TEST_CASE("default world shape") {
  const SynthWorld w = default_world();
  CHECK(w.vocabulary().num_labels() == 4);
  CHECK(w.channel().obs_alphabet == 6);
  CHECK(w.l_max() == 3);
  CHECK(w.channel().max_duration == 2);
  CHECK(w.channel().noise_floor == 0.1);
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    CHECK(std::abs(prior_mass(w.prior(d)) - 1.0) <= 1e-12);
  }
  auto label_share = [&](Domain d, int a, int b) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [seq, p] : w.prior(d).table()) {
      for (Symbol s : seq) {
        den += p;
        if (s.id == a || s.id == b) num += p;
      }
    }
    return num / den;
  };
  CHECK(label_share(Domain::kSource, 1, 2) > 0.7);
  CHECK(label_share(Domain::kTarget, 3, 4) > 0.7);
}

TEST_CASE("deterministic channel samples are the observation images") {
  const SynthWorld w = deterministic_world(4, 3, 11);
  for (const auto& u : sample_corpus(w, Domain::kSource, 200, 1, "test/det")) {
    Frames expected;
    for (Symbol s : u.transcript) expected.push_back(s.id - 1);
    if (u.transcript.empty()) expected.push_back(4);
    CHECK(u.frames == expected);
  }
}

TEST_CASE("sampling is deterministic per seed and stream") {
  const SynthWorld w = default_world();
  Rng a(derive_seed(3, "x", 7));
  Rng b(derive_seed(3, "x", 7));
  const Utterance ua = sample_utterance(w, Domain::kTarget, a);
  const Utterance ub = sample_utterance(w, Domain::kTarget, b);
  CHECK(ua.frames == ub.frames);
  CHECK(ua.transcript == ub.transcript);
  const auto c1 = sample_corpus(w, Domain::kSource, 50, 9, "p");
  const auto c2 = sample_corpus(w, Domain::kSource, 50, 9, "p");
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1[i].frames == c2[i].frames);
    CHECK(c1[i].transcript == c2[i].transcript);
  }
}

TEST_CASE("label frequencies match prior marginals within 3 standard errors") {
  const SynthWorld w = default_world();
  const std::size_t n = 10000;
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    const auto corpus = sample_corpus(w, d, n, 123, "test/marginals");
    for (int s = 1; s <= 4; ++s) {
      // Per-utterance count of label s: analytic mean and variance.
      double mean = 0.0;
      double second = 0.0;
      for (const auto& [seq, p] : w.prior(d).table()) {
        double c = 0.0;
        for (Symbol x : seq) c += x.id == s ? 1.0 : 0.0;
        mean += p * c;
        second += p * c * c;
      }
      const double se = std::sqrt((second - mean * mean) / static_cast<double>(n));
      double observed = 0.0;
      for (const auto& u : corpus) {
        for (Symbol x : u.transcript) observed += x.id == s ? 1.0 : 0.0;
      }
      observed /= static_cast<double>(n);
      CHECK(std::abs(observed - mean) <= 3.0 * se);
    }
  }
}

TEST_CASE("true likelihood in a deterministic channel") {
  const SynthWorld w = deterministic_world(3, 3, 1);
  CHECK(true_likelihood(w, Frames{0, 2}, to_labels({1, 3})) == 0.0);
  CHECK(is_log_zero(true_likelihood(w, Frames{0, 2}, to_labels({1, 2}))));
  CHECK(is_log_zero(true_likelihood(w, Frames{0, 2}, to_labels({1}))));
  CHECK(true_likelihood(w, Frames{3}, {}) == 0.0);
}

TEST_CASE("true likelihood equals brute-force segmentation sums") {
  const SynthWorld w = default_world();
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int num_frames = 1 + trial % 5;
    Frames x;
    for (int i = 0; i < num_frames; ++i) x.push_back(static_cast<int>(rng.uniform() * 6));
    const LabelSeq labels = testing::random_labels(rng, 4, 3);
    const double brute = testing::brute_likelihood(w.channel(), x, labels);
    const double got = true_likelihood(w, x, labels);
    if (brute == 0.0) {
      CHECK(is_log_zero(got));
    } else {
      CHECK(std::abs(std::exp(got) - brute) <= 1e-12 * std::max(1.0, brute));
      CHECK(std::abs(got - std::log(brute)) <= 1e-10);
    }
  }
}

TEST_CASE("true posterior normalizes and its evidence is the Bayes sum") {
  const SynthWorld w = default_world();
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int num_frames = 1 + trial % w.max_frames();
    Frames x;
    for (int i = 0; i < num_frames; ++i) x.push_back(static_cast<int>(rng.uniform() * 6));
    for (Domain d : {Domain::kSource, Domain::kTarget}) {
      const TruePosterior tp = true_posterior(w, d, x);
      double total = 0.0;
      for (const auto& [seq, p] : tp.posterior) total += p;
      CHECK(std::abs(total - 1.0) <= 1e-10);
      double evidence = 0.0;
      for (const auto& [seq, p] : w.prior(d).table()) {
        evidence += p * testing::brute_likelihood(w.channel(), x, seq);
      }
      CHECK(std::abs(std::exp(tp.log_evidence) - evidence) <= 1e-10 * std::max(1.0, evidence));
    }
  }
}

TEST_CASE("true posterior is a point mass in a deterministic world") {
  const SynthWorld w = deterministic_world(3, 3, 1);
  for (const auto& u : sample_corpus(w, Domain::kTarget, 30, 2, "test/point")) {
    const TruePosterior tp = true_posterior(w, Domain::kTarget, u.frames);
    CHECK(tp.posterior.at(u.transcript) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("true posterior enumeration guard") {
  const SynthWorld big = deterministic_world(7, 2, 1);
  CHECK_THROWS_WITH_AS(true_posterior(big, Domain::kSource, Frames{0}),
                       "enumeration bound exceeded", std::length_error);
  const SynthWorld deep = deterministic_world(2, 5, 1);
  CHECK_THROWS_AS(true_posterior(deep, Domain::kSource, Frames{0}), std::length_error);
}

TEST_CASE("scaled likelihood identity holds in both domains") {
  const SynthWorld w = default_world();
  Rng rng(51);
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto u = sample_utterance(w, trial % 2 == 0 ? Domain::kSource : Domain::kTarget, rng);
    const LabelSeq labels = trial % 3 == 0 ? u.transcript : testing::random_labels(rng, 4, 3);
    const auto src = scaled_likelihood_identity(w, Domain::kSource, u.frames, labels);
    const auto tgt = scaled_likelihood_identity(w, Domain::kTarget, u.frames, labels);
    CHECK(src.rhs == tgt.rhs);
    for (const auto* c : {&src, &tgt}) {
      if (c->skipped) continue;
      if (is_log_zero(c->rhs)) {
        CHECK(is_log_zero(c->lhs));
      } else {
        CHECK(std::abs(c->lhs - c->rhs) <= 1e-9);
        ++compared;
      }
    }
  }
  CHECK(compared > 500);
}

TEST_CASE("scaled likelihood identity skips zero-prior hypotheses") {
  const SynthWorld w = disjoint_world();
  const auto check = scaled_likelihood_identity(w, Domain::kSource, Frames{0, 1}, to_labels({2}));
  REQUIRE(check.skipped.has_value());
  CHECK(check.skipped->find("zero") != std::string::npos);
}

TEST_CASE("k(X) is the same for every hypothesis") {
  const SynthWorld w = default_world();
  for (const auto& u : sample_corpus(w, Domain::kTarget, 20, 61, "test/k")) {
    const double k = log_marginal_ratio(w, u.frames);
    const TruePosterior ps = true_posterior(w, Domain::kSource, u.frames);
    const TruePosterior pt = true_posterior(w, Domain::kTarget, u.frames);
    for (const auto& [seq, p_src] : ps.posterior) {
      const double p_tgt = pt.posterior.at(seq);
      if (p_src <= 0.0 || p_tgt <= 0.0) continue;
      const double via_w = (std::log(w.prior(Domain::kSource).probability(seq)) - std::log(p_src)) -
                           (std::log(w.prior(Domain::kTarget).probability(seq)) - std::log(p_tgt));
      CHECK(std::abs(via_w - k) <= 1e-9);
    }
  }
}

TEST_CASE("mixture worlds") {
  const SynthWorld w = default_world();
  const SynthWorld zero = mixture_world(w, 0.0);
  CHECK(zero.prior(Domain::kSource).table() == w.prior(Domain::kSource).table());
  const SynthWorld one = mixture_world(w, 1.0);
  CHECK(one.prior(Domain::kSource).table() == w.prior(Domain::kTarget).table());
  CHECK(one.channel() == w.channel());
  CHECK(one.prior(Domain::kTarget).table() == w.prior(Domain::kTarget).table());

  const SynthWorld d = disjoint_world();
  const SynthWorld half = mixture_world(d, 0.5);
  const auto& mixed = half.prior(Domain::kSource);
  CHECK(mixed.probability(to_labels({1})) == 0.125);
  CHECK(mixed.probability(to_labels({1, 1})) == 0.375);
  CHECK(mixed.probability(to_labels({2})) == 0.25);
  CHECK(mixed.probability(to_labels({2, 2})) == 0.25);
  CHECK_THROWS(mixture_world(w, 1.5));
}

TEST_CASE("world JSON round trip and validation") {
  const SynthWorld w = default_world();
  const SynthWorld back = world_from_json(world_to_json(w));
  CHECK(back.channel() == w.channel());
  CHECK(back.l_max() == w.l_max());
  CHECK(back.seed() == w.seed());
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    CHECK(back.prior(d).table() == w.prior(d).table());
  }
  auto j = default_world_json();
  j["schema"] = 2;
  CHECK_THROWS_AS(world_from_json(j), ConfigError);
  j = default_world_json();
  j.erase("l_max");
  CHECK_THROWS_AS(world_from_json(j), ConfigError);
  j = default_world_json();
  j["channel"]["emission"][1][0] = 0.9;
  CHECK_THROWS_AS(world_from_json(j), ConfigError);
  j = default_world_json();
  j.erase("channel");
  const SynthWorld random = world_from_json(j);
  CHECK_NOTHROW(random.channel().validate(4));
  CHECK(random.channel() == world_from_json(j).channel());
  CHECK_THROWS_AS(load_world_file("/nonexistent/world.json"), ConfigError);
}
