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

#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "drlab/core.h"
#include "drlab/synthworld.h"
#include "drlab/transducer.h"

namespace drlab {

/// Exact transducer for one domain of a SynthWorld.
///
/// The world fixes P(W | X) but not how a transducer spreads it over
/// alignments, so the oracle uses an acoustic path weight: a label arc
/// emitted with t frames consumed weighs the channel probability of frame
/// t+1 under that label, a blank arc weighs 1. The joint over paths is
///
///   P(path | X) = prod(arc weights) * P(W | X) / Z_W(X),
///
/// with Z_W the total weight of W's paths. Because the W-dependent factor
/// sits only on the terminal node, the per-step conditionals
///
///   P(s | X, t, h) = weight(s, t) * beta(next) / beta(t, h)
///
/// depend on (t, h) alone, and summing a sequence's alignments recovers
/// P(W | X) exactly. beta is computed once per distinct X by a backward
/// pass over all (t, prefix) nodes and cached.
///
/// The oracle sees the whole utterance, not only frames up to t+1.
/// Nodes that no positive-probability path reaches return a uniform
/// distribution.
class OracleTransducer : public StepScorer {
 public:
  OracleTransducer(std::shared_ptr<const SynthWorld> world, Domain domain);

  const Vocabulary& vocabulary() const override {
    return world_->vocabulary();
  }
  const SynthWorld& world() const { return *world_; }
  Domain domain() const { return domain_; }

  std::size_t cache_size() const;

 protected:
  std::vector<LogProb> compute_step_posterior(
      std::span<const int> frames, int t,
      std::span<const Symbol> history) const override;

 private:
  struct Lattice {
    int num_frames = 0;
    // label_weight[t * V + (s-1)]: channel probability of frame t+1.
    std::vector<double> label_weight;
    // beta[t * num_prefixes + prefix_index], t in [0, T]; row T holds the
    // terminal weights P(W | X) / Z_W.
    std::vector<double> beta;
  };

  std::shared_ptr<const Lattice> lattice_for(std::span<const int> frames) const;
  Lattice build(std::span<const int> frames) const;
  std::size_t prefix_index(std::span<const Symbol> prefix) const;

  std::shared_ptr<const SynthWorld> world_;
  Domain domain_;
  std::vector<LabelSeq> prefixes_;  // all_label_sequences order
  std::vector<std::size_t> level_offset_;  // first index of each length

  mutable std::shared_mutex mu_;
  mutable std::map<Frames, std::shared_ptr<const Lattice>> cache_;
};

}  // namespace drlab
