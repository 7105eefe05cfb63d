#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/attacks.hpp"
#include "mat/binio.hpp"
#include "mat/data.hpp"
#include "mat/model.hpp"

namespace mat {

enum class LossVariant { natural, pgd_at, trades, mart };

std::string_view variant_name(LossVariant v);
LossVariant variant_from_name(std::string_view name);

/// Adversarial-training loss selector; beta is the trade-off coefficient
/// required by trades and mart.
struct ATLossConfig {
  LossVariant kind = LossVariant::pgd_at;
  double beta = 6.0;

  void validate() const;
};

enum class Track { ema, raw };

/// Expert trajectory: per-epoch parameter snapshots (EMA track and,
/// optionally, the raw track) plus full provenance metadata. Snapshot 0 is
/// the initialization; values are float32-quantized at snapshot time so the
/// MATB container round-trips bit-exactly.
struct TrajectoryBuffer {
  ModelSpec spec;
  std::vector<std::vector<double>> snapshots_ema;
  std::vector<std::vector<double>> snapshots_raw;  // empty when not recorded
  MetaDoc meta;

  int epochs() const { return int(snapshots_ema.size()) - 1; }
  bool has_raw() const { return !snapshots_raw.empty(); }
  const std::vector<double>& snapshot(Track track, int epoch) const;
  ParamVector param_vector(Track track, int epoch) const;
  void validate() const;
};

/// theta_ema <- alpha * ema_prev + (1 - alpha) * theta_t, elementwise.
ParamVector ema_update(const ParamVector& ema_prev, const ParamVector& theta_t, double alpha);

/// Loss value of the chosen variant; x_adv must come from an attack
/// consistent with the variant (natural expects x_adv == x).
double at_loss(const ATLossConfig& variant, const ParamVector& params, const ModelSpec& spec,
               const ImageBatch& x, const ImageBatch& x_adv, const std::vector<int>& y);

/// Loss plus its parameter gradient (what the expert SGD step consumes).
LossGrads at_loss_grads(const ATLossConfig& variant, const ParamVector& params,
                        const ModelSpec& spec, const ImageBatch& x, const ImageBatch& x_adv,
                        const std::vector<int>& y);

struct ExpertConfig {
  ATLossConfig loss;
  AttackConfig attack;   // training-time attack (ignored for natural)
  double ema_decay = 0.999;
  double outer_lr = 0.05;
  double momentum = 0.0;
  int epochs = 30;
  int batch_size = 16;
  bool record_raw = true;

  void validate() const;
};

/// Adversarial (or natural) teacher training over the full dataset.
/// Per minibatch iteration: attack, SGD step on the variant loss, EMA
/// update; snapshots are taken at each epoch's end. Deterministic given
/// (dataset, spec, cfg, seed).
TrajectoryBuffer train_expert(const RawDataset& dataset, const ModelSpec& spec,
                              const ExpertConfig& cfg, uint64_t seed);

/// Per-epoch step norms d_e = ||theta_e - theta_{e-1}||_2, e = 1..E.
std::vector<double> weight_variance(const TrajectoryBuffer& buffer, Track track);

/// CSV rows `epoch,delta_norm,track` for every available track.
std::string weight_variance_csv(const TrajectoryBuffer& buffer);

void save_buffer(const TrajectoryBuffer& buffer, const std::string& path);
TrajectoryBuffer load_buffer(const std::string& path, bool verify_digest = false);
std::string encode_buffer(const TrajectoryBuffer& buffer);
TrajectoryBuffer decode_buffer(const std::string& bytes, const std::string& label,
                               bool verify_digest = false);

}  // namespace mat
