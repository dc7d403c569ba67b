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
#include <vector>

#include "drlab/core.h"
#include "drlab/fusion.h"
#include "drlab/transducer.h"

namespace drlab {

struct Hypothesis {
  LabelSeq labels;
  double score = 0.0;  // accumulated fused score (plus EOS bonus when final)
  int frames_consumed = 0;
};

/// Ranking used everywhere in search: higher score first, then the shorter
/// label sequence, then lexicographically smaller ids.
bool hypothesis_before(const Hypothesis& a, const Hypothesis& b);

struct BeamConfig {
  int beam_size = 8;
  /// Cap on consecutive label emissions within one frame.
  int max_expansions_per_frame = 3;
  int nbest = 1;
  /// How hypotheses with the same labels at the same frame are merged.
  /// kViterbi keeps the best path; kLogAdd sums them.
  Semiring merge = Semiring::kViterbi;

  void validate() const;
};

/// Frame-synchronous transducer beam search. Within frame t every
/// hypothesis may emit up to max_expansions_per_frame labels (each scored
/// by fused_step_score), states are visited in order of label length so
/// each one is expanded once after all its incoming paths are merged, and
/// then every state takes the blank of frame t+1. The beam is pruned to
/// beam_size after the blank. After the final frame the EOS bonus is added
/// and the top nbest are returned.
std::vector<Hypothesis> beam_search(const StepScorer& scorer,
                                    const FusionLms& lms,
                                    const FusionConfig& fusion,
                                    const BeamConfig& beam,
                                    std::span<const int> frames);

}  // namespace drlab
