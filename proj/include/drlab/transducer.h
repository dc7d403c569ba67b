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
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "drlab/core.h"

namespace drlab {

/// Source of per-step transducer posteriors P(s | X, t, s_{1:i}) over the
/// V labels plus blank. `t` is the number of frames consumed so far and
/// must be below T: the terminal blank at t = T is applied by callers.
class StepScorer {
 public:
  virtual ~StepScorer() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  /// Log-probabilities indexed by symbol id (0 = blank). Throws
  /// std::out_of_range("all frames consumed") when t >= T.
  std::vector<LogProb> step_posterior(std::span<const int> frames, int t,
                                      std::span<const Symbol> history) const;

 protected:
  virtual std::vector<LogProb> compute_step_posterior(
      std::span<const int> frames, int t,
      std::span<const Symbol> history) const = 0;
};

/// Test double: every symbol gets 1/(V+1).
class UniformScorer : public StepScorer {
 public:
  explicit UniformScorer(Vocabulary vocab) : vocab_(vocab) {}
  const Vocabulary& vocabulary() const override { return vocab_; }

 protected:
  std::vector<LogProb> compute_step_posterior(
      std::span<const int> frames, int t,
      std::span<const Symbol> history) const override;

 private:
  Vocabulary vocab_;
};

/// Explicit per-(t, label history) distributions, independent of the frame
/// contents. Serialized as
///
///   tablescorer <V> <T>
///   <t> <history length> <history ids...> <p_blank> <p_1> ... <p_V>
///
/// with probabilities written to 17 significant digits.
class TableScorer : public StepScorer {
 public:
  TableScorer(Vocabulary vocab, int num_frames);

  const Vocabulary& vocabulary() const override { return vocab_; }
  int num_frames() const { return num_frames_; }

  /// `probs` indexed by symbol id; must sum to 1 within 1e-10.
  void set(int t, const LabelSeq& history, std::vector<double> probs);

  /// Random distributions for every t < T and every history of length at
  /// most `max_history` (weights uniform in (0, 1], then normalized).
  static TableScorer random(Vocabulary vocab, int num_frames, int max_history,
                            Rng& rng);

  void save(std::ostream& out) const;
  static TableScorer load(std::istream& in);

  friend bool operator==(const TableScorer& a, const TableScorer& b);

 protected:
  std::vector<LogProb> compute_step_posterior(
      std::span<const int> frames, int t,
      std::span<const Symbol> history) const override;

 private:
  Vocabulary vocab_;
  int num_frames_;
  std::map<std::pair<int, LabelSeq>, std::vector<double>> rows_;
};

// Alignment lattice -------------------------------------------------------

enum class Semiring { kViterbi, kLogAdd };

/// Optional rescoring of each lattice arc: receives the symbol, the label
/// history before it and the scorer's log-probability, returns the arc
/// score. Used by fusion to put LM terms on label arcs.
using ArcScoreFn =
    std::function<double(Symbol, std::span<const Symbol>, LogProb)>;

/// Forward pass over the (t, u) lattice of a fixed label sequence W:
/// alpha(t, u) collects blank arcs (t-1, u) -> (t, u) and label arcs
/// (t, u-1) -> (t, u); the result is alpha at (T, U), reached through the
/// blank that consumes frame T. Label arcs never leave t = T.
double lattice_score(const StepScorer& scorer, std::span<const int> frames,
                     std::span<const Symbol> labels, Semiring semiring,
                     const ArcScoreFn& arc = {});

/// log sum over alignments of the path posterior.
LogProb sequence_posterior(const StepScorer& scorer,
                           std::span<const int> frames,
                           std::span<const Symbol> labels);

/// log max over alignments of the path posterior.
LogProb viterbi_sequence_score(const StepScorer& scorer,
                               std::span<const int> frames,
                               std::span<const Symbol> labels);

enum class SymbolKind : std::uint8_t { kBlank, kLabel };
using AlignmentShape = std::vector<SymbolKind>;

inline constexpr int kMaxEnumFrames = 8;
inline constexpr int kMaxEnumLabels = 5;

/// Every interleaving of T blanks and U labels that ends with a blank, in
/// lexicographic order (label before blank). Throws std::length_error
/// ("enumeration bound exceeded") past T = 8 or U = 5.
std::vector<AlignmentShape> enumerate_alignments(int num_frames,
                                                 int num_labels);

/// Fills a shape with the labels of W and the frame attachment times.
Alignment instantiate(const AlignmentShape& shape,
                      std::span<const Symbol> labels);

}  // namespace drlab
