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

#include <span>
#include <string>
#include <string_view>

#include "drlab/core.h"
#include "drlab/lm.h"
#include "drlab/transducer.h"

namespace drlab {

enum class FusionMode { kNone, kShallow, kDensityRatio };

std::string_view fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(std::string_view name);

struct FusionConfig {
  FusionMode mode = FusionMode::kNone;
  double lambda_tau = 0.0;  // the single lambda of shallow fusion
  double lambda_psi = 0.0;  // density ratio only
  double beta = 0.0;        // reward per emitted label
  /// Adds lambda_tau * log P_tau(EOS|W) - lambda_psi * log P_psi(EOS|W)
  /// when a hypothesis completes.
  bool include_eos_at_finalization = false;

  /// Throws ConfigError on negative scales or non-finite values.
  void validate() const;
};

/// External LMs available to fusion. Either may be null when the mode does
/// not need it.
struct FusionLms {
  const LanguageModel* target = nullptr;
  const LanguageModel* source = nullptr;
};

/// Checks that the LMs required by `config` are present and compatible:
/// shallow needs a target LM; density ratio needs both, and a source LM
/// with no zero label probabilities.
void validate_fusion_setup(const FusionConfig& config, const FusionLms& lms,
                           const Vocabulary& vocab);

/// Decomposed decoding score of one path extension.
struct FusedStepScore {
  double total = 0.0;
  double base = 0.0;
  double target_lm = 0.0;  // lambda_tau * log P_tau
  double source_lm = 0.0;  // -lambda_psi * log P_psi
  double beta = 0.0;
  /// True when the source LM gave zero mass to a label the target LM
  /// supports, which drives the total to +inf.
  bool unbounded = false;
};

/// Blank extensions keep the base score in every mode. Label extensions
/// add, per mode:
///   none:          beta
///   shallow:       lambda_tau * log P_tau(s|h) + beta
///   density_ratio: lambda_tau * log P_tau(s|h) - lambda_psi * log P_psi(s|h)
///                  + beta
/// A zero scale drops its term entirely, and a -inf base or target term
/// makes the total -inf.
FusedStepScore fused_step_score(LogProb base, Symbol symbol,
                                std::span<const Symbol> history,
                                const FusionLms& lms,
                                const FusionConfig& config);

/// P_tau(s|h) / P_psi(s|h) * P(s | X, t, h) in the log domain. Not
/// normalized over symbols.
LogProb pseudo_posterior(LogProb base, Symbol symbol,
                         std::span<const Symbol> history,
                         const FusionLms& lms);

/// End-of-sequence bonus for a completed hypothesis; 0 unless
/// include_eos_at_finalization is set.
double finalization_score(std::span<const Symbol> labels, const FusionLms& lms,
                          const FusionConfig& config);

/// Lattice score of W with fused arc scores plus the finalization term.
/// kViterbi gives the best-alignment decoding score; kLogAdd sums over
/// alignments.
double sequence_fused_score(const StepScorer& scorer, const FusionLms& lms,
                            const FusionConfig& config,
                            std::span<const int> frames,
                            std::span<const Symbol> labels,
                            Semiring semiring = Semiring::kViterbi);

}  // namespace drlab
