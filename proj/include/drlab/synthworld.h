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

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "drlab/core.h"
#include "drlab/lm.h"

namespace drlab {

/// Observation model shared by both domains. Row 0 of each table describes
/// the silence segment used for empty transcripts; rows 1..V describe the
/// labels. A segment for row r lasts d frames with probability
/// duration[r][d-1], and every frame independently shows observation o with
/// probability (1 - noise_floor) * emission[r][o] + noise_floor / A.
struct AcousticChannel {
  int obs_alphabet = 0;
  int max_duration = 0;
  double noise_floor = 0.0;
  std::vector<std::vector<double>> emission;
  std::vector<std::vector<double>> duration;

  double frame_prob(int row, int obs) const;
  void validate(int num_labels) const;

  friend bool operator==(const AcousticChannel&,
                         const AcousticChannel&) = default;
};

/// Two label priors over sequences of length <= l_max sharing one channel.
/// Priors are always held as exact tables; n-gram parameter blocks are
/// materialized on load, with termination forced at l_max.
class SynthWorld {
 public:
  SynthWorld(Vocabulary vocab, int l_max, AcousticChannel channel,
             TableLM source_prior, TableLM target_prior, std::uint64_t seed);

  const Vocabulary& vocabulary() const { return vocab_; }
  int l_max() const { return l_max_; }
  const AcousticChannel& channel() const { return channel_; }
  const TableLM& prior(Domain d) const {
    return d == Domain::kSource ? source_prior_ : target_prior_;
  }
  std::uint64_t seed() const { return seed_; }
  /// Longest utterance any transcript can produce.
  int max_frames() const;

 private:
  Vocabulary vocab_;
  int l_max_;
  AcousticChannel channel_;
  TableLM source_prior_;
  TableLM target_prior_;
  std::uint64_t seed_;
};

/// Every label sequence of length <= l_max, shortest first, then
/// lexicographic.
std::vector<LabelSeq> all_label_sequences(int num_labels, int l_max);

/// Draws W from the domain prior, then a duration per label and an
/// observation per frame.
Utterance sample_utterance(const SynthWorld& world, Domain domain, Rng& rng);

/// n utterances; utterance i uses the stream derive_seed(seed, purpose, i),
/// so corpora for different purposes are independent and any prefix is
/// reproducible on its own.
std::vector<Utterance> sample_corpus(const SynthWorld& world, Domain domain,
                                     std::size_t n, std::uint64_t seed,
                                     std::string_view purpose);

/// log p(X | W) summed over all segmentations of X into |W| segments (one
/// silence segment for the empty transcript). Infeasible lengths give
/// kLogZero.
LogProb true_likelihood(const SynthWorld& world, std::span<const int> frames,
                        std::span<const Symbol> labels);

struct TruePosterior {
  std::map<LabelSeq, double> posterior;  // every W of length <= l_max
  LogProb log_evidence = kLogZero;       // log p_domain(X)
};

inline constexpr int kMaxPosteriorLabels = 6;
inline constexpr int kMaxPosteriorLength = 4;

/// Exact Bayes over all W. Throws std::length_error ("enumeration bound
/// exceeded") for V > 6 or l_max > 4.
TruePosterior true_posterior(const SynthWorld& world, Domain domain,
                             std::span<const int> frames);

struct ScaledLikelihoodCheck {
  LogProb lhs = kLogZero;  // log p(X) + log P(W|X) - log P(W)
  LogProb rhs = kLogZero;  // log p(X|W)
  std::optional<std::string> skipped;  // set when P(W) = 0
};

ScaledLikelihoodCheck scaled_likelihood_identity(const SynthWorld& world,
                                                 Domain domain,
                                                 std::span<const int> frames,
                                                 std::span<const Symbol> labels);

/// log k(X) = log p_source(X) - log p_target(X).
LogProb log_marginal_ratio(const SynthWorld& world,
                           std::span<const int> frames);

/// Same world with source prior (1 - alpha) * P_source + alpha * P_target.
SynthWorld mixture_world(const SynthWorld& world, double alpha);

// World files ---------------------------------------------------------------
//
// {
//   "schema": 1,
//   "vocab_size": V, "obs_alphabet": A, "l_max": L, "d_max": D,
//   "noise_floor": f, "seed": s,
//   "source_prior": PRIOR, "target_prior": PRIOR,
//   "channel": {"emission": [[...]], "duration": [[...]]}   (optional)
// }
//
// PRIOR is either {"type": "table", "entries": [{"labels": [..], "prob": p}]}
// or {"type": "ngram", "order": n, "conditionals":
//      [{"history": [ids, -1 = boundary], "probs": [p_1..p_V, p_eos]}]}.
// Without "channel" the channel is drawn from the seed.

inline constexpr int kWorldSchemaVersion = 1;

SynthWorld world_from_json(const nlohmann::json& j);
nlohmann::json world_to_json(const SynthWorld& world);
SynthWorld load_world_file(const std::string& path);

/// Materializes an n-gram parameter block into an exact table prior.
TableLM prior_from_ngram_block(const nlohmann::json& block,
                               const Vocabulary& vocab, int l_max);

/// Random channel: label r peaks on observation (r-1) mod (A-1), silence on
/// A-1.
AcousticChannel random_channel(int num_labels, int obs_alphabet,
                               int max_duration, double noise_floor,
                               std::uint64_t seed);

/// The reference world: V=4, A=6, l_max=3, d_max=2, noise_floor=0.1; the
/// source prior favours labels {1,2} and the target prior {3,4}, with
/// different bigram structure.
nlohmann::json default_world_json();
SynthWorld default_world();

/// One observation per label, unit durations, no noise; the silence
/// segment is one frame of its own observation. Used for degenerate tests.
SynthWorld deterministic_world(int num_labels, int l_max,
                               std::uint64_t seed);

}  // namespace drlab
