#include "mat/attacks.hpp"

#include <cmath>
#include <functional>

#include "mat/errors.hpp"
#include "mat/kernels.hpp"
#include "mat/rng.hpp"

namespace mat {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_finite_grad(const std::vector<double>& g) {
  for (double v : g)
    if (!std::isfinite(v))
      fail(ErrorCategory::numeric,
           "attack: non-finite input gradient (divergent model parameters upstream)");
}

// Post-call invariant guard: output stays in the eps-ball and pixel bounds.
void check_attack_output(const ImageBatch& x, const ImageBatch& adv, const AttackConfig& cfg) {
  for (size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = std::abs(adv.pixels[i] - x.pixels[i]);
    if (d > cfg.epsilon + 1e-6 || adv.pixels[i] < cfg.clip_min - 1e-12 ||
        adv.pixels[i] > cfg.clip_max + 1e-12)
      fail(ErrorCategory::numeric, "attack: output violates the eps-ball or pixel bounds");
  }
}

ImageBatch random_start(const ImageBatch& x, const AttackConfig& cfg, uint64_t seed,
                        uint64_t sample_offset) {
  ImageBatch adv = x;
  const size_t n = x.sample_size();
  for (int i = 0; i < x.count; ++i) {
    Rng rng(derive_seed(seed, sample_offset + uint64_t(i)));
    double* p = adv.sample(i);
    for (size_t j = 0; j < n; ++j) {
      const double v = p[j] + rng.uniform(-cfg.epsilon, cfg.epsilon);
      p[j] = std::min(std::max(v, cfg.clip_min), cfg.clip_max);
    }
  }
  return adv;
}

// Shared ascent loop; grad_fn returns the input gradient of the loss being
// maximized, evaluated at the current iterate.
ImageBatch iterate_signed_ascent(const ImageBatch& x, const AttackConfig& cfg, int steps,
                                 double step_size, bool use_random_start, uint64_t seed,
                                 uint64_t sample_offset,
                                 const std::function<std::vector<double>(const ImageBatch&)>& grad_fn) {
  ImageBatch adv = use_random_start ? random_start(x, cfg, seed, sample_offset) : x;
  for (int k = 0; k < steps; ++k) {
    const std::vector<double> g = grad_fn(adv);
    check_finite_grad(g);
    for (size_t i = 0; i < adv.pixels.size(); ++i) {
      double v = adv.pixels[i] + step_size * sign(g[i]);
      v = std::min(std::max(v, x.pixels[i] - cfg.epsilon), x.pixels[i] + cfg.epsilon);
      v = std::min(std::max(v, cfg.clip_min), cfg.clip_max);
      adv.pixels[i] = v;
    }
  }
  check_attack_output(x, adv, cfg);
  return adv;
}

}  // namespace

void AttackConfig::validate() const {
  if (clip_min >= clip_max)
    fail(ErrorCategory::config, "attack: clip_min must be below clip_max");
  if (epsilon < 0.0 || epsilon > clip_max - clip_min)
    fail(ErrorCategory::config, "attack: epsilon must lie in [0, clip_max - clip_min]");
  if (steps > 0 && effective_step_size() <= 0.0)
    fail(ErrorCategory::config, "attack: step_size must be positive when steps > 0");
}

AttackConfig AttackConfig::fgsm_equivalent(double epsilon) {
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.steps = 1;
  cfg.step_size = epsilon;
  cfg.random_start = false;
  return cfg;
}

ImageBatch fgsm(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
                const std::vector<int>& y, const AttackConfig& cfg) {
  cfg.validate();
  const auto grads = ce_loss_grads(params, spec, x, y, false, true);
  check_finite_grad(grads.input_grad);
  ImageBatch adv = x;
  for (size_t i = 0; i < adv.pixels.size(); ++i) {
    double v = adv.pixels[i] + cfg.epsilon * sign(grads.input_grad[i]);
    adv.pixels[i] = std::min(std::max(v, cfg.clip_min), cfg.clip_max);
  }
  check_attack_output(x, adv, cfg);
  return adv;
}

ImageBatch pgd(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
               const std::vector<int>& y, const AttackConfig& cfg, uint64_t seed,
               uint64_t sample_offset) {
  cfg.validate();
  if (cfg.steps < 1) fail(ErrorCategory::config, "pgd: steps must be >= 1");
  return iterate_signed_ascent(
      x, cfg, cfg.steps, cfg.effective_step_size(), cfg.random_start, seed, sample_offset,
      [&](const ImageBatch& cur) {
        return ce_loss_grads(params, spec, cur, y, false, true).input_grad;
      });
}

ImageBatch pgd_kl(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
                  const AttackConfig& cfg, uint64_t seed, uint64_t sample_offset) {
  cfg.validate();
  if (cfg.steps < 1) fail(ErrorCategory::config, "pgd_kl: steps must be >= 1");
  check_params(spec, params);
  check_batch(spec, x);

  // Reference distribution of the unperturbed inputs, held fixed.
  const std::vector<double> nat_logits = forward(params, spec, x);
  const int k = spec.num_classes;
  std::vector<double> nat_logprob(nat_logits.size());
  for (int b = 0; b < x.count; ++b) {
    const double* l = nat_logits.data() + size_t(b) * k;
    double m = l[argmax_row(l, k)];
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(l[j] - m);
    const double lse = m + std::log(sum);
    for (int j = 0; j < k; ++j) nat_logprob[size_t(b) * k + j] = l[j] - lse;
  }

  return iterate_signed_ascent(
      x, cfg, cfg.steps, cfg.effective_step_size(), cfg.random_start, seed, sample_offset,
      [&](const ImageBatch& cur) {
        ForwardTrace<double> trace;
        net_forward(spec, params.values.data(), cur.pixels.data(), cur.count, trace);
        // d/dl' of mean_b KL(p' || p) = p' * ((s' - s) - KL_b) / B
        std::vector<double> dlogits(trace.logits.size());
        const double inv_b = 1.0 / double(cur.count);
        for (int b = 0; b < cur.count; ++b) {
          const double* l = trace.logits.data() + size_t(b) * k;
          double m = l[argmax_row(l, k)];
          double sum = 0.0;
          for (int j = 0; j < k; ++j) sum += std::exp(l[j] - m);
          const double lse = m + std::log(sum);
          double kl = 0.0;
          for (int j = 0; j < k; ++j) {
            const double sj = l[j] - lse;
            kl += std::exp(sj) * (sj - nat_logprob[size_t(b) * k + j]);
          }
          for (int j = 0; j < k; ++j) {
            const double sj = l[j] - lse;
            dlogits[size_t(b) * k + j] =
                std::exp(sj) * ((sj - nat_logprob[size_t(b) * k + j]) - kl) * inv_b;
          }
        }
        std::vector<double> dparams(params.size(), 0.0);
        std::vector<double> dx(cur.pixels.size(), 0.0);
        net_backward(spec, params.values.data(), trace, dlogits, dparams.data(), dx.data());
        return dx;
      });
}

}  // namespace mat
