#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/attacks.hpp"
#include "mat/data.hpp"
#include "mat/distill.hpp"
#include "mat/model.hpp"

namespace mat {

struct EvalAttack {
  std::string name;  // "pgd" or "fgsm"; selects the attack algorithm
  AttackConfig cfg;
};

struct EvalConfig {
  ModelSpec spec;
  int epochs = 500;
  double lr = 0.01;
  double momentum = 0.9;  // natural-training optimizer (SGD + momentum)
  int batch_size = 256;
  int attack_chunk = 256;
  std::vector<uint64_t> seeds;
  std::vector<EvalAttack> attacks;

  void validate() const;
};

struct Metrics {
  double standard_acc = 0.0;
  std::vector<std::pair<std::string, double>> adversarial_acc;
};

struct SeedRecord {
  uint64_t seed = 0;
  Metrics metrics;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

struct EvalReport {
  std::vector<SeedRecord> per_seed;
  Aggregate standard;
  std::vector<std::pair<std::string, Aggregate>> adversarial;
  MetaDoc provenance;
};

/// Natural training from scratch on the synthetic set: SGD with momentum on
/// cross-entropy, no adversarial examples anywhere. Deterministic per seed.
ParamVector natural_train(const SyntheticDataset& s, const EvalConfig& cfg, uint64_t seed);

/// Standard and per-attack adversarial accuracy over the test set. Attacks
/// run in fixed-size chunks; per-sample seeding makes the result chunk-size
/// invariant.
Metrics evaluate(const ParamVector& params, const ModelSpec& spec, const RawDataset& test_set,
                 const std::vector<EvalAttack>& attacks, int chunk, uint64_t attack_seed);

/// Aggregate over the computed per-seed values (permutation-invariant:
/// values are reduced in sorted order).
Aggregate aggregate_values(std::vector<double> values);

/// Full protocol: natural_train + evaluate per seed, then mean/std
/// aggregation. `jobs` caps worker threads (1 = strictly sequential).
EvalReport run_eval(const SyntheticDataset& s, const RawDataset& test_set,
                    const EvalConfig& cfg, int jobs = 1);

std::string report_text(const EvalReport& report);
std::string report_csv(const EvalReport& report);

}  // namespace mat
