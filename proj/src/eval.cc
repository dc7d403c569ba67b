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

#include "drlab/eval.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

namespace drlab {

namespace {

void fill_rates(WerBreakdown& b) {
  const double denom =
      b.num_ref_tokens > 0 ? static_cast<double>(b.num_ref_tokens) : 1.0;
  b.empty_reference = b.num_ref_tokens == 0;
  b.del_rate = static_cast<double>(b.deletions) / denom;
  b.ins_rate = static_cast<double>(b.insertions) / denom;
  b.sub_rate = static_cast<double>(b.substitutions) / denom;
  b.wer = static_cast<double>(b.errors()) / denom;
}

}  // namespace

WerBreakdown wer(std::span<const Symbol> ref, std::span<const Symbol> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::vector<int>> cost(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = 0; i <= n; ++i) cost[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cost[i][j] = std::min({sub, cost[i - 1][j] + 1, cost[i][j - 1] + 1});
    }
  }
  WerBreakdown b;
  b.num_ref_tokens = static_cast<std::int64_t>(n);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        cost[i][j] ==
            cost[i - 1][j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++b.substitutions;
      --i;
      --j;
    } else if (i > 0 && cost[i][j] == cost[i - 1][j] + 1) {
      ++b.deletions;
      --i;
    } else {
      ++b.insertions;
      --j;
    }
  }
  fill_rates(b);
  return b;
}

WerBreakdown corpus_wer(std::span<const RefHyp> pairs) {
  WerBreakdown total;
  for (const auto& [ref, hyp] : pairs) {
    const WerBreakdown b = wer(ref, hyp);
    total.num_ref_tokens += b.num_ref_tokens;
    total.deletions += b.deletions;
    total.insertions += b.insertions;
    total.substitutions += b.substitutions;
  }
  if (total.num_ref_tokens == 0) {
    throw DataError("corpus WER needs at least one non-empty reference");
  }
  fill_rates(total);
  return total;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(
      n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<LabelSeq> decode_corpus(const StepScorer& scorer,
                                    const FusionLms& lms,
                                    const FusionConfig& fusion,
                                    const BeamConfig& beam,
                                    std::span<const Utterance> utterances) {
  validate_fusion_setup(fusion, lms, scorer.vocabulary());
  std::vector<LabelSeq> out(utterances.size());
  parallel_for(utterances.size(), [&](std::size_t i) {
    auto nbest = beam_search(scorer, lms, fusion, beam, utterances[i].frames);
    if (!nbest.empty()) out[i] = std::move(nbest.front().labels);
  });
  return out;
}

WerBreakdown evaluate(const StepScorer& scorer, const FusionLms& lms,
                      const FusionConfig& fusion, const BeamConfig& beam,
                      std::span<const Utterance> utterances) {
  auto hyps = decode_corpus(scorer, lms, fusion, beam, utterances);
  std::vector<RefHyp> pairs;
  pairs.reserve(utterances.size());
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    pairs.emplace_back(utterances[i].transcript, std::move(hyps[i]));
  }
  return corpus_wer(pairs);
}

std::size_t sweep_argmin(const SweepResult& r) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < r.axis0.size(); ++i) {
    for (std::size_t j = 0; j < r.axis1.size(); ++j) {
      const std::size_t k = i * r.axis1.size() + j;
      const std::size_t bi = best / r.axis1.size();
      const std::size_t bj = best % r.axis1.size();
      const double w = r.cells[k].wer.wer;
      const double bw = r.cells[best].wer.wer;
      if (w < bw ||
          (w == bw && (r.axis0[i] < r.axis0[bi] ||
                       (r.axis0[i] == r.axis0[bi] && r.axis1[j] < r.axis1[bj])))) {
        best = k;
      }
    }
  }
  return best;
}

namespace {

SweepResult run_grid(SweepResult r, const StepScorer& scorer,
                     const FusionLms& lms, const BeamConfig& beam,
                     std::span<const Utterance> dev) {
  if (r.axis0.empty() || r.axis1.empty()) {
    throw ConfigError("sweep grids must be non-empty");
  }
  for (const SweepCell& c : r.cells) {
    validate_fusion_setup(c.config, lms, scorer.vocabulary());
  }
  // Decode cell by cell; each decode is itself parallel over utterances.
  for (SweepCell& c : r.cells) {
    c.wer = evaluate(scorer, lms, c.config, beam, dev);
  }
  r.argmin = sweep_argmin(r);
  return r;
}

}  // namespace

SweepResult sweep_lambda_beta(const StepScorer& scorer, const FusionLms& lms,
                              FusionMode mode,
                              std::span<const double> lambda_grid,
                              std::span<const double> beta_grid,
                              const BeamConfig& beam,
                              std::span<const Utterance> dev,
                              bool eos_final) {
  SweepResult r;
  r.axis0_name = "lambda";
  r.axis1_name = "beta";
  r.axis0.assign(lambda_grid.begin(), lambda_grid.end());
  r.axis1.assign(beta_grid.begin(), beta_grid.end());
  for (double lambda : r.axis0) {
    for (double beta : r.axis1) {
      FusionConfig c;
      c.mode = mode;
      c.beta = beta;
      c.include_eos_at_finalization = eos_final;
      if (mode != FusionMode::kNone) c.lambda_tau = lambda;
      if (mode == FusionMode::kDensityRatio) c.lambda_psi = lambda;
      r.cells.push_back({c, {}});
    }
  }
  return run_grid(std::move(r), scorer, lms, beam, dev);
}

SweepResult sweep_lambda_pair(const StepScorer& scorer, const FusionLms& lms,
                              double beta,
                              std::span<const double> lambda_psi_grid,
                              std::span<const double> lambda_tau_grid,
                              const BeamConfig& beam,
                              std::span<const Utterance> dev,
                              bool eos_final) {
  SweepResult r;
  r.axis0_name = "lambda_psi";
  r.axis1_name = "lambda_tau";
  r.axis0.assign(lambda_psi_grid.begin(), lambda_psi_grid.end());
  r.axis1.assign(lambda_tau_grid.begin(), lambda_tau_grid.end());
  for (double lp : r.axis0) {
    for (double lt : r.axis1) {
      FusionConfig c;
      c.mode = FusionMode::kDensityRatio;
      c.lambda_psi = lp;
      c.lambda_tau = lt;
      c.beta = beta;
      c.include_eos_at_finalization = eos_final;
      r.cells.push_back({c, {}});
    }
  }
  return run_grid(std::move(r), scorer, lms, beam, dev);
}

SweetSpot sweet_spot_width(const SweepResult& r, double slack) {
  SweetSpot s;
  if (r.cells.empty()) return s;
  double best = r.cells.front().wer.wer;
  for (const SweepCell& c : r.cells) best = std::min(best, c.wer.wer);
  const double limit = (1.0 + slack) * best;
  std::set<std::size_t> rows;
  std::set<std::size_t> cols;
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    if (r.cells[k].wer.wer <= limit) {
      ++s.cells;
      rows.insert(k / r.axis1.size());
      cols.insert(k % r.axis1.size());
    }
  }
  s.axis0_width = rows.size();
  s.axis1_width = cols.size();
  return s;
}

std::string sweep_csv_row(const SweepCell& cell) {
  const FusionConfig& c = cell.config;
  const WerBreakdown& w = cell.wer;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%lld",
                std::string(fusion_mode_name(c.mode)).c_str(), c.lambda_psi,
                c.lambda_tau, c.beta, w.wer, w.del_rate, w.ins_rate,
                w.sub_rate, static_cast<long long>(w.num_ref_tokens));
  return buf;
}

void write_sweep_csv(const SweepResult& r, std::ostream& out) {
  out << "mode,lambda_psi,lambda_tau,beta,wer,del,ins,sub,n_ref_tokens\n";
  for (const SweepCell& c : r.cells) out << sweep_csv_row(c) << '\n';
  out << "# argmin," << sweep_csv_row(r.best()) << '\n';
}

}  // namespace drlab
