#include "mat/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "mat/errors.hpp"
#include "mat/rng.hpp"

namespace mat {

void EvalConfig::validate() const {
  spec.validate();
  if (epochs < 1) fail(ErrorCategory::config, "eval: epochs must be >= 1");
  if (seeds.empty()) fail(ErrorCategory::config, "eval: needs at least one seed");
  if (batch_size < 1) fail(ErrorCategory::config, "eval: batch_size must be >= 1");
  if (attack_chunk < 1) fail(ErrorCategory::config, "eval: attack_chunk must be >= 1");
  if (!(lr >= 0.0)) fail(ErrorCategory::config, "eval: lr must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0))
    fail(ErrorCategory::config, "eval: momentum must lie in [0,1)");
  for (const auto& a : attacks) {
    if (a.name != "pgd" && a.name != "fgsm")
      fail(ErrorCategory::config, "eval: unknown attack '" + a.name + "'");
    a.cfg.validate();
  }
}

ParamVector natural_train(const SyntheticDataset& s, const EvalConfig& cfg, uint64_t seed) {
  cfg.validate();
  s.validate();
  if (!(s.images.shape == cfg.spec.input) || s.num_classes != cfg.spec.num_classes)
    fail(ErrorCategory::mismatch, "natural_train: synthetic set does not match model spec");

  ParamVector params = init_model(cfg.spec, seed);
  std::vector<double> velocity(params.size(), 0.0);
  Rng shuffle_rng(derive_seed(seed, "natural-train"));
  std::vector<int> order(size_t(s.count()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t begin = 0; begin < order.size(); begin += size_t(cfg.batch_size)) {
      const size_t end = std::min(begin + size_t(cfg.batch_size), order.size());
      std::vector<int> idx(order.begin() + begin, order.begin() + end);
      ImageBatch x = s.images.select(idx);
      std::vector<int> y(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) y[i] = s.labels[idx[i]];
      const LossGrads lg = ce_loss_grads(params, cfg.spec, x, y, true, false);
      if (!std::isfinite(lg.loss))
        fail(ErrorCategory::numeric,
             "natural_train: non-finite loss at epoch " + std::to_string(epoch));
      for (size_t i = 0; i < params.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] + lg.param_grad[i];
        params.values[i] -= cfg.lr * velocity[i];
      }
    }
  }
  return params;
}

namespace {

int count_correct(const ParamVector& params, const ModelSpec& spec, const ImageBatch& x,
                  const std::vector<int>& y) {
  const std::vector<double> logits = forward(params, spec, x);
  int correct = 0;
  for (int b = 0; b < x.count; ++b)
    if (argmax_row(logits.data() + size_t(b) * spec.num_classes, spec.num_classes) == y[b])
      ++correct;
  return correct;
}

}  // namespace

Metrics evaluate(const ParamVector& params, const ModelSpec& spec, const RawDataset& test_set,
                 const std::vector<EvalAttack>& attacks, int chunk, uint64_t attack_seed) {
  if (test_set.count() == 0) fail(ErrorCategory::mismatch, "evaluate: empty test set");
  test_set.validate();
  if (chunk < 1) fail(ErrorCategory::config, "evaluate: chunk must be >= 1");

  const int n = test_set.count();
  int std_correct = 0;
  std::vector<int> adv_correct(attacks.size(), 0);
  for (int begin = 0; begin < n; begin += chunk) {
    const int end = std::min(begin + chunk, n);
    std::vector<int> idx(size_t(end - begin));
    for (int i = begin; i < end; ++i) idx[size_t(i - begin)] = i;
    const ImageBatch x = test_set.images.select(idx);
    std::vector<int> y(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) y[i] = test_set.labels[idx[i]];

    std_correct += count_correct(params, spec, x, y);
    for (size_t a = 0; a < attacks.size(); ++a) {
      const ImageBatch adv =
          attacks[a].name == "fgsm"
              ? fgsm(params, spec, x, y, attacks[a].cfg)
              : pgd(params, spec, x, y, attacks[a].cfg, derive_seed(attack_seed, attacks[a].name),
                    uint64_t(begin));
      adv_correct[a] += count_correct(params, spec, adv, y);
    }
  }

  Metrics m;
  m.standard_acc = double(std_correct) / double(n);
  for (size_t a = 0; a < attacks.size(); ++a)
    m.adversarial_acc.emplace_back(attacks[a].name, double(adv_correct[a]) / double(n));
  return m;
}

Aggregate aggregate_values(std::vector<double> values) {
  // Sorted reduction keeps aggregation invariant under seed permutation.
  std::sort(values.begin(), values.end());
  const double n = double(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

EvalReport run_eval(const SyntheticDataset& s, const RawDataset& test_set,
                    const EvalConfig& cfg, int jobs) {
  cfg.validate();
  s.validate();
  if (!(test_set.images.shape == s.images.shape))
    fail(ErrorCategory::mismatch, "run_eval: test set shape does not match synthetic set");

  EvalReport report;
  report.per_seed.resize(cfg.seeds.size());
  std::vector<std::string> failures(cfg.seeds.size());

  auto run_seed = [&](size_t i) {
    try {
      const uint64_t seed = cfg.seeds[i];
      const ParamVector params = natural_train(s, cfg, seed);
      report.per_seed[i].seed = seed;
      report.per_seed[i].metrics = evaluate(params, cfg.spec, test_set, cfg.attacks,
                                            cfg.attack_chunk, derive_seed(seed, "eval-attack"));
    } catch (const Error& e) {
      failures[i] = "seed " + std::to_string(cfg.seeds[i]) + ": " + e.what();
    }
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < cfg.seeds.size(); ++i) run_seed(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    const size_t workers = std::min(size_t(jobs), cfg.seeds.size());
    for (size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < cfg.seeds.size(); i = next.fetch_add(1))
          run_seed(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (!f.empty()) fail(ErrorCategory::numeric, "run_eval: " + f);

  std::vector<double> std_vals;
  for (const auto& rec : report.per_seed) std_vals.push_back(rec.metrics.standard_acc);
  report.standard = aggregate_values(std_vals);
  for (size_t a = 0; a < cfg.attacks.size(); ++a) {
    std::vector<double> vals;
    for (const auto& rec : report.per_seed)
      vals.push_back(rec.metrics.adversarial_acc[a].second);
    report.adversarial.emplace_back(cfg.attacks[a].name, aggregate_values(vals));
  }

  MetaDoc& prov = report.provenance;
  prov.set("synthetic_digest", hex16(s.digest()));
  prov.set("spec", cfg.spec.canonical());
  prov.set_u64("epochs", uint64_t(cfg.epochs));
  prov.set_f64("lr", cfg.lr);
  prov.set_f64("momentum", cfg.momentum);
  prov.set_u64("batch_size", uint64_t(cfg.batch_size));
  prov.set_u64("attack_chunk", uint64_t(cfg.attack_chunk));
  prov.set("optimizer", "sgd-momentum");
  prov.set("argmax_tie_break", "lowest-class-index");
  prov.set("variance_metric", "population-std");
  std::string seed_list;
  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    if (i) seed_list += ',';
    seed_list += std::to_string(cfg.seeds[i]);
  }
  prov.set("seeds", seed_list);
  for (const auto& a : cfg.attacks) {
    const std::string prefix = "attack." + a.name + ".";
    prov.set_f64(prefix + "eps", a.cfg.epsilon);
    prov.set_u64(prefix + "steps", uint64_t(a.cfg.steps));
    prov.set_f64(prefix + "step_size", a.cfg.effective_step_size());
    prov.set_bool(prefix + "random_start", a.cfg.random_start);
  }
  return report;
}

std::string report_text(const EvalReport& report) {
  std::string out = "mat-eval-report v1\n";
  out += report.provenance.serialize();
  for (const auto& rec : report.per_seed) {
    out += "[seed " + std::to_string(rec.seed) + "]\n";
    out += "standard_acc=" + format_f64(rec.metrics.standard_acc) + "\n";
    for (const auto& [name, acc] : rec.metrics.adversarial_acc)
      out += "adversarial_acc." + name + "=" + format_f64(acc) + "\n";
  }
  out += "[aggregate]\n";
  out += "standard_acc.mean=" + format_f64(report.standard.mean) + "\n";
  out += "standard_acc.std=" + format_f64(report.standard.stddev) + "\n";
  for (const auto& [name, agg] : report.adversarial) {
    out += "adversarial_acc." + name + ".mean=" + format_f64(agg.mean) + "\n";
    out += "adversarial_acc." + name + ".std=" + format_f64(agg.stddev) + "\n";
  }
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "seed,metric,value\n";
  for (const auto& rec : report.per_seed) {
    out += std::to_string(rec.seed) + ",standard_acc," +
           format_f64(rec.metrics.standard_acc) + "\n";
    for (const auto& [name, acc] : rec.metrics.adversarial_acc)
      out += std::to_string(rec.seed) + ",adversarial_acc." + name + "," + format_f64(acc) +
             "\n";
  }
  out += "mean,standard_acc," + format_f64(report.standard.mean) + "\n";
  out += "std,standard_acc," + format_f64(report.standard.stddev) + "\n";
  for (const auto& [name, agg] : report.adversarial) {
    out += "mean,adversarial_acc." + name + "," + format_f64(agg.mean) + "\n";
    out += "std,adversarial_acc." + name + "," + format_f64(agg.stddev) + "\n";
  }
  return out;
}

}  // namespace mat
