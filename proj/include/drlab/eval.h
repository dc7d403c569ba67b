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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drlab/core.h"
#include "drlab/decoder.h"
#include "drlab/fusion.h"

namespace drlab {

struct WerBreakdown {
  double wer = 0.0;
  double del_rate = 0.0;
  double ins_rate = 0.0;
  double sub_rate = 0.0;
  std::int64_t num_ref_tokens = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t substitutions = 0;
  /// Empty reference: rates are divided by 1 instead of 0.
  bool empty_reference = false;

  std::int64_t errors() const { return deletions + insertions + substitutions; }
};

/// Unit-cost edit distance. Among minimum-cost alignments the split into
/// deletions/insertions/substitutions follows the back-pointer priority
/// diagonal > up (deletion) > left (insertion).
WerBreakdown wer(std::span<const Symbol> ref, std::span<const Symbol> hyp);

using RefHyp = std::pair<LabelSeq, LabelSeq>;

/// Pooled counts over all pairs. Throws DataError when every reference is
/// empty.
WerBreakdown corpus_wer(std::span<const RefHyp> pairs);

/// Top-1 labels for every utterance; utterances are decoded in parallel
/// and returned in input order. An utterance with no surviving hypothesis
/// decodes to the empty sequence.
std::vector<LabelSeq> decode_corpus(const StepScorer& scorer,
                                    const FusionLms& lms,
                                    const FusionConfig& fusion,
                                    const BeamConfig& beam,
                                    std::span<const Utterance> utterances);

WerBreakdown evaluate(const StepScorer& scorer, const FusionLms& lms,
                      const FusionConfig& fusion, const BeamConfig& beam,
                      std::span<const Utterance> utterances);

struct SweepCell {
  FusionConfig config;
  WerBreakdown wer;
};

/// Two-axis grid of corpus WERs. cells[i * axis1.size() + j] holds
/// (axis0[i], axis1[j]).
struct SweepResult {
  std::string axis0_name;
  std::string axis1_name;
  std::vector<double> axis0;
  std::vector<double> axis1;
  std::vector<SweepCell> cells;
  std::size_t argmin = 0;

  const SweepCell& at(std::size_t i, std::size_t j) const {
    return cells[i * axis1.size() + j];
  }
  const SweepCell& best() const { return cells[argmin]; }
};

/// Index of the lowest WER; ties go to the smaller axis-0 value, then the
/// smaller axis-1 value.
std::size_t sweep_argmin(const SweepResult& r);

/// Axes (lambda, beta). Shallow uses lambda as lambda_tau; density ratio
/// ties lambda_psi = lambda_tau = lambda; mode none ignores lambda.
SweepResult sweep_lambda_beta(const StepScorer& scorer, const FusionLms& lms,
                              FusionMode mode,
                              std::span<const double> lambda_grid,
                              std::span<const double> beta_grid,
                              const BeamConfig& beam,
                              std::span<const Utterance> dev,
                              bool eos_final = false);

/// Density ratio with axes (lambda_psi, lambda_tau) at a fixed beta.
SweepResult sweep_lambda_pair(const StepScorer& scorer, const FusionLms& lms,
                              double beta,
                              std::span<const double> lambda_psi_grid,
                              std::span<const double> lambda_tau_grid,
                              const BeamConfig& beam,
                              std::span<const Utterance> dev,
                              bool eos_final = false);

struct SweetSpot {
  std::size_t cells = 0;        // cells with WER <= (1 + slack) * min
  std::size_t axis0_width = 0;  // distinct axis-0 values among them
  std::size_t axis1_width = 0;
};

SweetSpot sweet_spot_width(const SweepResult& r, double slack);

/// Header `mode,lambda_psi,lambda_tau,beta,wer,del,ins,sub,n_ref_tokens`,
/// one row per cell, six decimals, then `# argmin,...` repeating the best
/// row.
void write_sweep_csv(const SweepResult& r, std::ostream& out);
std::string sweep_csv_row(const SweepCell& cell);

/// Runs `fn(i)` for i in [0, n) on up to hardware_concurrency threads.
/// The first exception thrown is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace drlab
