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

#include "drlab/fusion.h"

#include <cmath>
#include <limits>

namespace drlab {

std::string_view fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::kNone:
      return "none";
    case FusionMode::kShallow:
      return "shallow";
    case FusionMode::kDensityRatio:
      return "density_ratio";
  }
  return "none";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "none") return FusionMode::kNone;
  if (name == "shallow") return FusionMode::kShallow;
  if (name == "density_ratio") return FusionMode::kDensityRatio;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "'");
}

void FusionConfig::validate() const {
  if (!std::isfinite(lambda_tau) || !std::isfinite(lambda_psi) ||
      !std::isfinite(beta)) {
    throw ConfigError("fusion scales must be finite");
  }
  if (lambda_tau < 0.0 || lambda_psi < 0.0) {
    throw ConfigError("LM scaling factors must be >= 0");
  }
}

void validate_fusion_setup(const FusionConfig& config, const FusionLms& lms,
                           const Vocabulary& vocab) {
  config.validate();
  if (config.mode == FusionMode::kNone) return;
  if (!lms.target) {
    throw ConfigError(std::string(fusion_mode_name(config.mode)) +
                      " fusion requires target-domain LM");
  }
  if (!(lms.target->vocabulary() == vocab)) {
    throw ConfigError("target LM vocabulary does not match the scorer");
  }
  if (config.mode != FusionMode::kDensityRatio) return;
  if (!lms.source) {
    throw ConfigError("density ratio requires source-domain LM");
  }
  if (!(lms.source->vocabulary() == vocab)) {
    throw ConfigError("source LM vocabulary does not match the scorer");
  }
  if (config.lambda_psi > 0.0 && !lms.source->zero_free()) {
    throw ConfigError(
        "density ratio requires a source LM without zero label "
        "probabilities (train it with add_k > 0)");
  }
}

namespace {

double scaled(double lambda, LogProb lp) {
  return lambda == 0.0 ? 0.0 : lambda * lp;
}

}  // namespace

FusedStepScore fused_step_score(LogProb base, Symbol symbol,
                                std::span<const Symbol> history,
                                const FusionLms& lms,
                                const FusionConfig& config) {
  FusedStepScore r;
  r.base = base;
  if (symbol.is_blank() || is_log_zero(base)) {
    r.total = base;
    return r;
  }
  r.beta = config.beta;
  if (config.mode != FusionMode::kNone) {
    if (!lms.target) {
      throw std::invalid_argument("fusion requires target-domain LM");
    }
    r.target_lm = scaled(config.lambda_tau, lms.target->log_prob(symbol, history));
  }
  if (config.mode == FusionMode::kDensityRatio) {
    if (!lms.source) {
      throw std::invalid_argument("density ratio requires source-domain LM");
    }
    r.source_lm =
        -scaled(config.lambda_psi, lms.source->log_prob(symbol, history));
  }
  if (is_log_zero(r.target_lm)) {
    r.total = kLogZero;
    return r;
  }
  if (std::isinf(r.source_lm)) {
    r.unbounded = true;
    r.total = std::numeric_limits<double>::infinity();
    return r;
  }
  // Grouping the LM terms first keeps equal-and-opposite terms exactly
  // cancelling, so matched density ratio reproduces mode none bit for bit.
  r.total = (base + (r.target_lm + r.source_lm)) + r.beta;
  return r;
}

LogProb pseudo_posterior(LogProb base, Symbol symbol,
                         std::span<const Symbol> history,
                         const FusionLms& lms) {
  if (symbol.is_blank()) {
    throw std::invalid_argument("pseudo-posterior is defined for labels only");
  }
  FusionConfig cfg;
  cfg.mode = FusionMode::kDensityRatio;
  cfg.lambda_tau = 1.0;
  cfg.lambda_psi = 1.0;
  return fused_step_score(base, symbol, history, lms, cfg).total;
}

double finalization_score(std::span<const Symbol> labels, const FusionLms& lms,
                          const FusionConfig& config) {
  if (!config.include_eos_at_finalization ||
      config.mode == FusionMode::kNone) {
    return 0.0;
  }
  const double target = scaled(config.lambda_tau, lms.target->eos_log_prob(labels));
  double source = 0.0;
  if (config.mode == FusionMode::kDensityRatio) {
    source = -scaled(config.lambda_psi, lms.source->eos_log_prob(labels));
  }
  if (is_log_zero(target)) return kLogZero;
  return target + source;
}

double sequence_fused_score(const StepScorer& scorer, const FusionLms& lms,
                            const FusionConfig& config,
                            std::span<const int> frames,
                            std::span<const Symbol> labels,
                            Semiring semiring) {
  const ArcScoreFn arc = [&](Symbol s, std::span<const Symbol> h,
                             LogProb base) {
    return fused_step_score(base, s, h, lms, config).total;
  };
  const double path = lattice_score(scorer, frames, labels, semiring, arc);
  if (is_log_zero(path)) return kLogZero;
  const double fin = finalization_score(labels, lms, config);
  if (is_log_zero(fin)) return kLogZero;
  return path + fin;
}

}  // namespace drlab
