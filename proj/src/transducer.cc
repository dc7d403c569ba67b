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

#include "drlab/transducer.h"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace drlab {

std::vector<LogProb> StepScorer::step_posterior(
    std::span<const int> frames, int t,
    std::span<const Symbol> history) const {
  if (t < 0) throw std::out_of_range("negative frame index");
  if (t >= static_cast<int>(frames.size())) {
    throw std::out_of_range("all frames consumed");
  }
  return compute_step_posterior(frames, t, history);
}

std::vector<LogProb> UniformScorer::compute_step_posterior(
    std::span<const int>, int, std::span<const Symbol>) const {
  return std::vector<LogProb>(static_cast<std::size_t>(vocab_.size()),
                              -std::log(static_cast<double>(vocab_.size())));
}

// TableScorer -------------------------------------------------------------

TableScorer::TableScorer(Vocabulary vocab, int num_frames)
    : vocab_(vocab), num_frames_(num_frames) {
  if (num_frames < 1) throw std::invalid_argument("table scorer needs T >= 1");
}

void TableScorer::set(int t, const LabelSeq& history,
                      std::vector<double> probs) {
  if (t < 0 || t >= num_frames_) {
    throw std::invalid_argument("table scorer row outside [0, T)");
  }
  if (probs.size() != static_cast<std::size_t>(vocab_.size())) {
    throw std::invalid_argument("table scorer row has wrong width");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw std::invalid_argument("table scorer row does not sum to one");
  }
  for (Symbol s : history) {
    if (!vocab_.is_label(s)) throw std::invalid_argument("bad history label");
  }
  rows_[{t, history}] = std::move(probs);
}

TableScorer TableScorer::random(Vocabulary vocab, int num_frames,
                                int max_history, Rng& rng) {
  TableScorer ts(vocab, num_frames);
  const int v = vocab.num_labels();
  std::vector<LabelSeq> histories{LabelSeq{}};
  for (std::size_t i = 0; i < histories.size(); ++i) {
    if (static_cast<int>(histories[i].size()) == max_history) continue;
    for (int s = 1; s <= v; ++s) {
      LabelSeq h = histories[i];
      h.push_back(Symbol{s});
      histories.push_back(std::move(h));
    }
  }
  for (int t = 0; t < num_frames; ++t) {
    for (const LabelSeq& h : histories) {
      std::vector<double> w(static_cast<std::size_t>(vocab.size()));
      double total = 0.0;
      for (double& x : w) {
        x = 1.0 - rng.uniform();  // (0, 1]
        total += x;
      }
      for (double& x : w) x /= total;
      ts.rows_[{t, h}] = std::move(w);
    }
  }
  return ts;
}

bool operator==(const TableScorer& a, const TableScorer& b) {
  return a.vocab_ == b.vocab_ && a.num_frames_ == b.num_frames_ &&
         a.rows_ == b.rows_;
}

std::vector<LogProb> TableScorer::compute_step_posterior(
    std::span<const int>, int t, std::span<const Symbol> history) const {
  if (t >= num_frames_) throw std::out_of_range("all frames consumed");
  auto it = rows_.find({t, LabelSeq(history.begin(), history.end())});
  if (it == rows_.end()) {
    throw std::out_of_range("table scorer has no row for t=" +
                            std::to_string(t) + " history [" +
                            format_labels(history) + "]");
  }
  std::vector<LogProb> out;
  out.reserve(it->second.size());
  for (double p : it->second) out.push_back(p > 0.0 ? std::log(p) : kLogZero);
  return out;
}

void TableScorer::save(std::ostream& out) const {
  out << "tablescorer " << vocab_.num_labels() << ' ' << num_frames_ << '\n';
  out << std::setprecision(17);
  for (const auto& [key, probs] : rows_) {
    out << key.first << ' ' << key.second.size();
    for (Symbol s : key.second) out << ' ' << s.id;
    for (double p : probs) out << ' ' << p;
    out << '\n';
  }
}

TableScorer TableScorer::load(std::istream& in) {
  std::string line;
  std::string tag;
  int v = 0;
  int num_frames = 0;
  if (!std::getline(in, line)) throw DataError("empty table scorer file");
  std::istringstream header(line);
  if (!(header >> tag >> v >> num_frames) || tag != "tablescorer" || v < 1 ||
      num_frames < 1) {
    throw DataError("corrupted table scorer header: '" + line + "'");
  }
  TableScorer ts(Vocabulary(v), num_frames);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    int t = 0;
    std::size_t len = 0;
    if (!(fields >> t >> len)) {
      throw DataError("malformed table scorer line " + std::to_string(lineno));
    }
    LabelSeq h(len);
    for (Symbol& s : h) {
      if (!(fields >> s.id)) {
        throw DataError("malformed table scorer line " +
                        std::to_string(lineno));
      }
    }
    std::vector<double> probs(static_cast<std::size_t>(v + 1));
    for (double& p : probs) {
      std::string tok;
      if (!(fields >> tok)) {
        throw DataError("malformed table scorer line " +
                        std::to_string(lineno));
      }
      p = std::stod(tok);
    }
    try {
      ts.set(t, h, std::move(probs));
    } catch (const std::invalid_argument& e) {
      throw DataError("table scorer line " + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  return ts;
}

// Lattice -----------------------------------------------------------------

namespace {

double extend(double alpha, double arc) {
  if (alpha == kLogZero || arc == kLogZero) return kLogZero;
  return alpha + arc;
}

}  // namespace

double lattice_score(const StepScorer& scorer, std::span<const int> frames,
                     std::span<const Symbol> labels, Semiring semiring,
                     const ArcScoreFn& arc) {
  const std::size_t num_frames = frames.size();
  const std::size_t u_max = labels.size();
  if (num_frames == 0) throw std::invalid_argument("empty frame sequence");
  auto combine = [semiring](double a, double b) {
    return semiring == Semiring::kViterbi ? std::max(a, b) : log_add(a, b);
  };
  auto score = [&arc](Symbol s, std::span<const Symbol> h, LogProb base) {
    return arc ? arc(s, h, base) : base;
  };
  // alpha[u] holds the current frame's row; next[u] accumulates blank arcs.
  std::vector<double> alpha(u_max + 1, kLogZero);
  alpha[0] = kLogOne;
  for (std::size_t t = 0; t < num_frames; ++t) {
    std::vector<double> next(u_max + 1, kLogZero);
    for (std::size_t u = 0; u <= u_max; ++u) {
      const auto history = labels.subspan(0, u);
      if (alpha[u] == kLogZero) continue;
      const auto post = scorer.step_posterior(frames, static_cast<int>(t),
                                              history);
      next[u] = combine(next[u],
                        extend(alpha[u], score(Symbol::blank(), history,
                                               post[0])));
      if (u < u_max) {
        const Symbol s = labels[u];
        const double via = extend(
            alpha[u],
            score(s, history, post[static_cast<std::size_t>(s.id)]));
        alpha[u + 1] = combine(alpha[u + 1], via);
      }
    }
    alpha = std::move(next);
  }
  return alpha[u_max];
}

LogProb sequence_posterior(const StepScorer& scorer,
                           std::span<const int> frames,
                           std::span<const Symbol> labels) {
  return lattice_score(scorer, frames, labels, Semiring::kLogAdd);
}

LogProb viterbi_sequence_score(const StepScorer& scorer,
                               std::span<const int> frames,
                               std::span<const Symbol> labels) {
  return lattice_score(scorer, frames, labels, Semiring::kViterbi);
}

// Enumeration -------------------------------------------------------------

namespace {

void enumerate_rec(int blanks_left, int labels_left, AlignmentShape& cur,
                   std::vector<AlignmentShape>& out) {
  if (blanks_left == 0 && labels_left == 0) {
    out.push_back(cur);
    return;
  }
  if (labels_left > 0) {
    cur.push_back(SymbolKind::kLabel);
    enumerate_rec(blanks_left, labels_left - 1, cur, out);
    cur.pop_back();
  }
  // The final blank must come after every label.
  if (blanks_left > 1 || (blanks_left == 1 && labels_left == 0)) {
    cur.push_back(SymbolKind::kBlank);
    enumerate_rec(blanks_left - 1, labels_left, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<AlignmentShape> enumerate_alignments(int num_frames,
                                                 int num_labels) {
  if (num_frames < 1 || num_labels < 0) {
    throw std::invalid_argument("enumerate_alignments: need T >= 1, U >= 0");
  }
  if (num_frames > kMaxEnumFrames || num_labels > kMaxEnumLabels) {
    throw std::length_error("enumeration bound exceeded");
  }
  std::vector<AlignmentShape> out;
  AlignmentShape cur;
  enumerate_rec(num_frames, num_labels, cur, out);
  return out;
}

Alignment instantiate(const AlignmentShape& shape,
                      std::span<const Symbol> labels) {
  Alignment a;
  std::size_t next_label = 0;
  int frame = 1;
  for (SymbolKind k : shape) {
    if (k == SymbolKind::kLabel) {
      if (next_label >= labels.size()) {
        throw std::invalid_argument("shape has more label slots than W");
      }
      a.symbols.push_back(labels[next_label++]);
      a.times.push_back(frame);
    } else {
      a.symbols.push_back(Symbol::blank());
      a.times.push_back(frame++);
    }
  }
  if (next_label != labels.size()) {
    throw std::invalid_argument("shape has fewer label slots than W");
  }
  return a;
}

}  // namespace drlab
