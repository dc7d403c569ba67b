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

#include "drlab/oracle_transducer.h"

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace drlab {

OracleTransducer::OracleTransducer(std::shared_ptr<const SynthWorld> world,
                                   Domain domain)
    : world_(std::move(world)), domain_(domain) {
  if (!world_) throw std::invalid_argument("oracle transducer needs a world");
  const int v = world_->vocabulary().num_labels();
  prefixes_ = all_label_sequences(v, world_->l_max());
  std::size_t offset = 0;
  std::size_t level = 1;
  for (int len = 0; len <= world_->l_max() + 1; ++len) {
    level_offset_.push_back(offset);
    offset += level;
    level *= static_cast<std::size_t>(v);
  }
}

std::size_t OracleTransducer::cache_size() const {
  std::shared_lock lock(mu_);
  return cache_.size();
}

std::size_t OracleTransducer::prefix_index(
    std::span<const Symbol> prefix) const {
  const std::size_t v =
      static_cast<std::size_t>(world_->vocabulary().num_labels());
  std::size_t digits = 0;
  for (Symbol s : prefix) digits = digits * v + static_cast<std::size_t>(s.id - 1);
  return level_offset_[prefix.size()] + digits;
}

OracleTransducer::Lattice OracleTransducer::build(
    std::span<const int> frames) const {
  const SynthWorld& w = *world_;
  const std::size_t v = static_cast<std::size_t>(w.vocabulary().num_labels());
  const std::size_t l_max = static_cast<std::size_t>(w.l_max());
  const std::size_t num_frames = frames.size();
  const std::size_t n = prefixes_.size();

  Lattice lat;
  lat.num_frames = static_cast<int>(num_frames);
  lat.label_weight.resize(num_frames * v);
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (std::size_t s = 0; s < v; ++s) {
      lat.label_weight[t * v + s] =
          w.channel().frame_prob(static_cast<int>(s + 1), frames[t]);
    }
  }

  // Terminal weights P(W | X) / Z_W, with Z_W from a forward pass over W's
  // own (t, u) lattice under the path weights.
  const TruePosterior post = true_posterior(w, domain_, frames);
  lat.beta.assign((num_frames + 1) * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const LabelSeq& seq = prefixes_[i];
    const double p = post.posterior.at(seq);
    if (p == 0.0) continue;
    std::vector<double> alpha(seq.size() + 1, 0.0);
    alpha[0] = 1.0;
    for (std::size_t t = 0; t < num_frames; ++t) {
      for (std::size_t u = 0; u < seq.size(); ++u) {
        alpha[u + 1] +=
            alpha[u] *
            lat.label_weight[t * v + static_cast<std::size_t>(seq[u].id - 1)];
      }
      // Blank arcs carry weight one, so alpha moves to frame t+1 as is.
    }
    const double z = alpha[seq.size()];
    if (!(z > 0.0)) {
      throw std::logic_error("oracle transducer: positive posterior for [" +
                             format_labels(seq) + "] but no weighted path");
    }
    lat.beta[num_frames * n + i] = p / z;
  }

  for (std::size_t t = num_frames; t-- > 0;) {
    double* row = &lat.beta[t * n];
    const double* next = &lat.beta[(t + 1) * n];
    const double* weight = &lat.label_weight[t * v];
    // Children have larger indices than their parents.
    for (std::size_t i = n; i-- > 0;) {
      double b = next[i];
      const std::size_t len = prefixes_[i].size();
      if (len < l_max) {
        const std::size_t first_child =
            level_offset_[len + 1] + (i - level_offset_[len]) * v;
        for (std::size_t s = 0; s < v; ++s) {
          b += weight[s] * row[first_child + s];
        }
      }
      row[i] = b;
    }
  }
  return lat;
}

std::shared_ptr<const OracleTransducer::Lattice> OracleTransducer::lattice_for(
    std::span<const int> frames) const {
  Frames key(frames.begin(), frames.end());
  {
    std::shared_lock lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto built = std::make_shared<const Lattice>(build(frames));
  std::unique_lock lock(mu_);
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(built));
  return it->second;
}

std::vector<LogProb> OracleTransducer::compute_step_posterior(
    std::span<const int> frames, int t,
    std::span<const Symbol> history) const {
  const Vocabulary& vocab = world_->vocabulary();
  for (Symbol s : history) {
    if (!vocab.is_label(s)) {
      throw std::invalid_argument("history contains a non-label id");
    }
  }
  const std::size_t v = static_cast<std::size_t>(vocab.num_labels());
  std::vector<LogProb> out(v + 1, -std::log(static_cast<double>(v + 1)));
  if (history.size() > static_cast<std::size_t>(world_->l_max())) return out;

  const auto lat = lattice_for(frames);
  const std::size_t n = prefixes_.size();
  const std::size_t tt = static_cast<std::size_t>(t);
  const std::size_t i = prefix_index(history);
  const double here = lat->beta[tt * n + i];
  if (!(here > 0.0)) return out;

  auto to_log = [here](double x) {
    return x > 0.0 ? std::log(x / here) : kLogZero;
  };
  out[0] = to_log(lat->beta[(tt + 1) * n + i]);
  const std::size_t len = history.size();
  for (std::size_t s = 0; s < v; ++s) {
    if (len < static_cast<std::size_t>(world_->l_max())) {
      const std::size_t child =
          level_offset_[len + 1] + (i - level_offset_[len]) * v + s;
      out[s + 1] =
          to_log(lat->label_weight[tt * v + s] * lat->beta[tt * n + child]);
    } else {
      out[s + 1] = kLogZero;
    }
  }
  return out;
}

}  // namespace drlab
