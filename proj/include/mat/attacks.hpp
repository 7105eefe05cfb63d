#pragma once

#include <cstdint>
#include <vector>

#include "mat/model.hpp"

namespace mat {

/// L-infinity attack configuration; pixel units throughout.
struct AttackConfig {
  double epsilon = 4.0 / 255.0;
  int steps = 10;
  double step_size = 0.0;  // <= 0 means the epsilon/4 default
  bool random_start = true;
  double clip_min = 0.0;
  double clip_max = 1.0;

  double effective_step_size() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }

  void validate() const;

  /// steps=1, step_size=epsilon, no random start: the FGSM-equivalent config.
  static AttackConfig fgsm_equivalent(double epsilon);
};

/// Single-step sign attack: x' = clip(x + eps * sign(grad_x CE)).
/// cfg.steps is ignored. The input batch is never mutated.
ImageBatch fgsm(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
                const std::vector<int>& y, const AttackConfig& cfg);

/// Iterated sign attack projected onto the eps-ball and pixel bounds.
/// Randomness (the optional uniform start) is keyed per sample as
/// derive(seed, sample_offset + i), so chunked evaluation reproduces the
/// unchunked result bit for bit.
ImageBatch pgd(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
               const std::vector<int>& y, const AttackConfig& cfg, uint64_t seed = 0,
               uint64_t sample_offset = 0);

/// PGD ascending KL(softmax f(x') || softmax f(x)) instead of cross-entropy;
/// the inner maximization used when training TRADES experts.
ImageBatch pgd_kl(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
                  const AttackConfig& cfg, uint64_t seed = 0, uint64_t sample_offset = 0);

}  // namespace mat
