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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drlab/core.h"

namespace drlab {

// Reserved ids in serialized n-gram files.
inline constexpr int kBoundaryId = -1;
inline constexpr int kEosId = -2;

/// Conditional label model P(s_{i+1} | s_{1:i}) over labels 1..V plus an
/// explicit end-of-sequence event. Blank is never in the support.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  /// log P(next | history). Throws std::invalid_argument for a blank.
  virtual LogProb log_prob(Symbol next,
                           std::span<const Symbol> history) const = 0;
  /// log P(EOS | history).
  virtual LogProb eos_log_prob(std::span<const Symbol> history) const = 0;

  /// Sum of label conditionals plus the EOS term.
  virtual LogProb sequence_log_prob(std::span<const Symbol> labels) const;

  /// True when every label conditional is strictly positive for every
  /// history, which density-ratio decoding requires of a source LM.
  virtual bool zero_free() const = 0;
};

/// Add-k smoothed n-gram:
///   P(s | h) = (count(h, s) + k) / (count(h) + k * (V + 1))
/// over labels plus EOS, with histories padded by a start boundary. A
/// history never seen in training with k == 0 falls back to uniform.
class NGramLM : public LanguageModel {
 public:
  NGramLM(int order, Vocabulary vocab, double add_k);

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProb log_prob(Symbol next,
                   std::span<const Symbol> history) const override;
  LogProb eos_log_prob(std::span<const Symbol> history) const override;
  bool zero_free() const override { return add_k_ > 0.0; }

  int order() const { return order_; }
  double add_k() const { return add_k_; }

  /// Adds one transcript's events (every label and the final EOS).
  void add_transcript(std::span<const Symbol> transcript);
  /// Raw count for a padded history key (length order-1) and event id
  /// (label id or kEosId).
  std::uint64_t count(const std::vector<int>& history_key, int event) const;

  /// Line format: `ngram <order> <V> <add_k>` then one
  /// `<history ids> <event id> <count>` line per non-zero count, with -1
  /// for the boundary and -2 for EOS.
  void save(std::ostream& out) const;
  static NGramLM load(std::istream& in);

  friend bool operator==(const NGramLM& a, const NGramLM& b);

 private:
  std::vector<int> history_key(std::span<const Symbol> history) const;
  int event_index(int event) const;
  LogProb conditional(std::span<const Symbol> history, int event_index) const;

  int order_;
  Vocabulary vocab_;
  double add_k_;
  // history key -> per-event counts, labels 1..V at [0, V), EOS at V.
  std::map<std::vector<int>, std::vector<std::uint64_t>> counts_;
};

NGramLM train_ngram(std::span<const LabelSeq> corpus, int order, double add_k,
                    const Vocabulary& vocab);

/// Explicit distribution over complete label sequences. Conditionals come
/// from exact prefix marginalization.
class TableLM : public LanguageModel {
 public:
  TableLM(Vocabulary vocab, std::map<LabelSeq, double> table);

  const Vocabulary& vocabulary() const override { return vocab_; }
  LogProb log_prob(Symbol next,
                   std::span<const Symbol> history) const override;
  LogProb eos_log_prob(std::span<const Symbol> history) const override;
  /// log(table[W]) directly rather than a chain of conditionals.
  LogProb sequence_log_prob(std::span<const Symbol> labels) const override;
  bool zero_free() const override { return false; }

  const std::map<LabelSeq, double>& table() const { return table_; }
  double probability(const LabelSeq& w) const;
  int max_length() const { return max_length_; }

 private:
  double prefix_mass(std::span<const Symbol> prefix) const;

  Vocabulary vocab_;
  std::map<LabelSeq, double> table_;
  std::map<LabelSeq, double> prefix_mass_;
  int max_length_ = 0;
};

struct PerplexityResult {
  double perplexity = 0.0;
  double total_log_prob = 0.0;
  std::size_t num_tokens = 0;  // labels plus one EOS per utterance
  /// Set when some event had probability zero; perplexity is then +inf.
  std::optional<std::string> diagnostic;
};

PerplexityResult perplexity(const LanguageModel& lm,
                            std::span<const LabelSeq> corpus);

/// Reads an `ngram` file; throws DataError on a malformed stream.
NGramLM load_ngram_file(const std::string& path);
void save_ngram_file(const NGramLM& lm, const std::string& path);

}  // namespace drlab
