#include <doctest.h>

#include <cmath>
#include <limits>

#include "mat/attacks.hpp"
#include "mat/errors.hpp"
#include "mat/rng.hpp"

using namespace mat;

namespace {

// Linear two-class model on a two-pixel input: logits = W x + b.
ModelSpec linear_spec() { return ModelSpec::make_mlp({1, 2, 1}, 2, {}); }

ParamVector linear_params(double w00, double w01, double w10, double w11) {
  const ModelSpec spec = linear_spec();
  ParamVector p;
  p.spec_hash = spec.hash();
  p.values = {w00, w01, w10, w11, 0.0, 0.0};
  return p;
}

ImageBatch make_batch(std::vector<double> pixels, int w) {
  ImageBatch b;
  b.count = int(pixels.size()) / w;
  b.shape = {1, w, 1};
  b.pixels = std::move(pixels);
  return b;
}

}  // namespace

TEST_CASE("zero-radius attacks return the input exactly") {
  const ModelSpec spec = linear_spec();
  const ParamVector params = linear_params(1.0, -1.0, 0.0, 0.0);
  const ImageBatch x = make_batch({0.5, 0.5, 0.25, 0.75}, 2);
  const std::vector<int> y = {0, 1};
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  cfg.steps = 1;
  cfg.step_size = 1.0;  // irrelevant at radius zero
  CHECK(fgsm(params, spec, x, y, cfg).pixels == x.pixels);
  cfg.steps = 5;
  cfg.random_start = true;
  CHECK(pgd(params, spec, x, y, cfg, 42).pixels == x.pixels);
}

TEST_CASE("fgsm on a linear score loss matches the hand-derived step") {
  // logits = [w.x, 0] with w = (1, -1); CE gradient at y=0 is -p1 * w, so
  // the ascent direction is sign(-w) = (-1, +1).
  const ModelSpec spec = linear_spec();
  const ParamVector params = linear_params(1.0, -1.0, 0.0, 0.0);
  const ImageBatch x = make_batch({0.5, 0.5}, 2);
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  const ImageBatch adv = fgsm(params, spec, x, {0}, cfg);
  CHECK(adv.pixels[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(adv.pixels[1] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(x.pixels[0] == 0.5);  // input untouched
}

TEST_CASE("clip boundary keeps adversarial pixels inside [0,1]") {
  const ModelSpec spec = linear_spec();
  const ParamVector params = linear_params(2.0, 1.0, -1.0, 0.5);
  const ImageBatch x = make_batch({1.0, 1.0}, 2);
  AttackConfig cfg;
  cfg.epsilon = 0.3;
  const ImageBatch adv = fgsm(params, spec, x, {1}, cfg);
  for (double p : adv.pixels) CHECK(p <= 1.0);
}

TEST_CASE("single-step pgd without random start reduces to fgsm") {
  const ModelSpec spec = ModelSpec::make_mlp({4, 4, 1}, 3, {8});
  const ParamVector params = init_model(spec, 4);
  Rng rng(5);
  ImageBatch x;
  x.count = 6;
  x.shape = spec.input;
  x.pixels.resize(size_t(x.count) * x.sample_size());
  for (double& p : x.pixels) p = rng.uniform();
  std::vector<int> y = {0, 1, 2, 0, 1, 2};

  const AttackConfig cfg = AttackConfig::fgsm_equivalent(0.05);
  const ImageBatch a = fgsm(params, spec, x, y, cfg);
  const ImageBatch b = pgd(params, spec, x, y, cfg, 123);
  for (size_t i = 0; i < a.pixels.size(); ++i)
    CHECK(std::abs(a.pixels[i] - b.pixels[i]) <= 1e-7);
}

TEST_CASE("two half-steps on a linear loss equal one full step") {
  const ModelSpec spec = linear_spec();
  const ParamVector params = linear_params(1.0, -1.0, 0.0, 0.0);
  const ImageBatch x = make_batch({0.5, 0.5}, 2);
  AttackConfig two;
  two.epsilon = 0.1;
  two.steps = 2;
  two.step_size = 0.05;
  two.random_start = false;
  const ImageBatch adv = pgd(params, spec, x, {0}, two);
  CHECK(adv.pixels[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(adv.pixels[1] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("attack outputs respect the eps-ball and bounds on random cases") {
  const ModelSpec spec = ModelSpec::make_mlp({3, 3, 1}, 2, {6});
  const ParamVector params = init_model(spec, 1);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    ImageBatch x;
    x.count = 2;
    x.shape = spec.input;
    x.pixels.resize(size_t(x.count) * x.sample_size());
    for (double& p : x.pixels) p = rng.uniform();
    const std::vector<int> y = {int(rng.below(2)), int(rng.below(2))};
    AttackConfig cfg;
    cfg.epsilon = rng.uniform(0.0, 0.3);
    cfg.steps = 1 + int(rng.below(4));
    cfg.step_size = cfg.epsilon > 0 ? cfg.epsilon / 2 : 0.1;
    cfg.random_start = rng.below(2) == 0;
    const ImageBatch adv = pgd(params, spec, x, y, cfg, rng.next_u64());
    for (size_t i = 0; i < adv.pixels.size(); ++i) {
      CHECK(std::abs(adv.pixels[i] - x.pixels[i]) <= cfg.epsilon + 1e-6);
      CHECK(adv.pixels[i] >= 0.0);
      CHECK(adv.pixels[i] <= 1.0);
    }
  }
}

TEST_CASE("pgd is deterministic given the seed and chunk-offset keyed") {
  const ModelSpec spec = ModelSpec::make_mlp({3, 3, 1}, 2, {6});
  const ParamVector params = init_model(spec, 9);
  Rng rng(3);
  ImageBatch x;
  x.count = 4;
  x.shape = spec.input;
  x.pixels.resize(size_t(x.count) * x.sample_size());
  for (double& p : x.pixels) p = rng.uniform();
  const std::vector<int> y = {0, 1, 0, 1};
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.steps = 3;
  cfg.random_start = true;

  const ImageBatch a = pgd(params, spec, x, y, cfg, 77);
  const ImageBatch b = pgd(params, spec, x, y, cfg, 77);
  CHECK(a.pixels == b.pixels);
  const ImageBatch c = pgd(params, spec, x, y, cfg, 78);
  CHECK(a.pixels != c.pixels);

  // Attacking the second half alone with the matching sample offset
  // reproduces the tail of the full-batch result.
  std::vector<int> half_idx = {2, 3};
  const ImageBatch x_half = x.select(half_idx);
  const std::vector<int> y_half = {y[2], y[3]};
  const ImageBatch d = pgd(params, spec, x_half, y_half, cfg, 77, 2);
  for (size_t i = 0; i < d.pixels.size(); ++i)
    CHECK(d.pixels[i] == a.pixels[2 * x.sample_size() + i]);
}

TEST_CASE("non-finite gradients are rejected with a diagnostic") {
  const ModelSpec spec = linear_spec();
  ParamVector params = linear_params(1.0, -1.0, 0.0, 0.0);
  params.values[0] = std::numeric_limits<double>::quiet_NaN();
  const ImageBatch x = make_batch({0.5, 0.5}, 2);
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  CHECK_THROWS_AS((void)fgsm(params, spec, x, {0}, cfg), Error);
  try {
    (void)fgsm(params, spec, x, {0}, cfg);
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::numeric);
  }
}

TEST_CASE("pgd_kl stays within the ball and is deterministic") {
  const ModelSpec spec = ModelSpec::make_mlp({3, 3, 1}, 2, {6});
  const ParamVector params = init_model(spec, 21);
  Rng rng(13);
  ImageBatch x;
  x.count = 3;
  x.shape = spec.input;
  x.pixels.resize(size_t(x.count) * x.sample_size());
  for (double& p : x.pixels) p = rng.uniform();
  AttackConfig cfg;
  cfg.epsilon = 0.06;
  cfg.steps = 4;
  cfg.random_start = true;
  const ImageBatch a = pgd_kl(params, spec, x, cfg, 5);
  const ImageBatch b = pgd_kl(params, spec, x, cfg, 5);
  CHECK(a.pixels == b.pixels);
  for (size_t i = 0; i < a.pixels.size(); ++i)
    CHECK(std::abs(a.pixels[i] - x.pixels[i]) <= cfg.epsilon + 1e-6);
}
