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

#include "drlab/decoder.h"

#include <algorithm>
#include <map>

namespace drlab {

bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.labels.size() != b.labels.size()) {
    return a.labels.size() < b.labels.size();
  }
  return a.labels < b.labels;
}

void BeamConfig::validate() const {
  if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
  if (max_expansions_per_frame < 1) {
    throw ConfigError("max_expansions_per_frame must be >= 1");
  }
  if (nbest < 1) throw ConfigError("nbest must be >= 1");
  if (nbest > beam_size) throw ConfigError("nbest must not exceed beam_size");
}

namespace {

struct State {
  double score = kLogZero;
  int depth = 0;  // labels emitted in the current frame
};

void prune(std::vector<Hypothesis>& hyps, std::size_t keep) {
  std::sort(hyps.begin(), hyps.end(), hypothesis_before);
  if (hyps.size() > keep) hyps.resize(keep);
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer,
                                    const FusionLms& lms,
                                    const FusionConfig& fusion,
                                    const BeamConfig& beam,
                                    std::span<const int> frames) {
  beam.validate();
  validate_fusion_setup(fusion, lms, scorer.vocabulary());
  if (frames.empty()) throw std::invalid_argument("empty frame sequence");

  const int num_labels = scorer.vocabulary().num_labels();
  const std::size_t beam_size = static_cast<std::size_t>(beam.beam_size);
  auto merge = [&beam](double a, double b) {
    return beam.merge == Semiring::kViterbi ? std::max(a, b) : log_add(a, b);
  };

  std::vector<Hypothesis> hyps{Hypothesis{}};
  for (int t = 0; t < static_cast<int>(frames.size()); ++t) {
    // Label length -> states of that length at this frame.
    std::map<std::size_t, std::map<LabelSeq, State>> levels;
    for (const Hypothesis& h : hyps) {
      levels[h.labels.size()][h.labels] = State{h.score, 0};
    }

    std::vector<Hypothesis> advanced;
    for (auto level = levels.begin(); level != levels.end(); ++level) {
      std::vector<Hypothesis> ranked;
      ranked.reserve(level->second.size());
      for (const auto& [labels, st] : level->second) {
        ranked.push_back({labels, st.score, st.depth});
      }
      std::sort(ranked.begin(), ranked.end(), hypothesis_before);

      for (std::size_t r = 0; r < ranked.size(); ++r) {
        const Hypothesis& h = ranked[r];
        const auto post = scorer.step_posterior(frames, t, h.labels);
        const double blank =
            fused_step_score(post[0], Symbol::blank(), h.labels, lms, fusion)
                .total;
        if (!is_log_zero(blank)) {
          advanced.push_back({h.labels, h.score + blank, t + 1});
        }
        // frames_consumed doubles as the in-frame emission depth here.
        const int depth = h.frames_consumed;
        if (r >= beam_size || depth >= beam.max_expansions_per_frame) continue;
        auto& next_level = levels[h.labels.size() + 1];
        for (int s = 1; s <= num_labels; ++s) {
          const Symbol sym{s};
          const double step =
              fused_step_score(post[static_cast<std::size_t>(s)], sym,
                               h.labels, lms, fusion)
                  .total;
          if (is_log_zero(step)) continue;
          LabelSeq extended = h.labels;
          extended.push_back(sym);
          auto [it, inserted] =
              next_level.try_emplace(std::move(extended), State{});
          it->second.score = inserted ? h.score + step
                                      : merge(it->second.score, h.score + step);
          it->second.depth =
              inserted ? depth + 1 : std::min(it->second.depth, depth + 1);
        }
      }
    }
    // Distinct labels per state, so no merging is needed after the blank.
    prune(advanced, beam_size);
    hyps = std::move(advanced);
    if (hyps.empty()) break;
  }

  for (Hypothesis& h : hyps) {
    h.score += finalization_score(h.labels, lms, fusion);
  }
  std::erase_if(hyps, [](const Hypothesis& h) { return is_log_zero(h.score); });
  prune(hyps, static_cast<std::size_t>(beam.nbest));
  return hyps;
}

}  // namespace drlab
