#include "mat/expert.hpp"

#include <cmath>

#include "mat/errors.hpp"
#include "mat/kernels.hpp"
#include "mat/rng.hpp"

namespace mat {

std::string_view variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::natural: return "natural";
    case LossVariant::pgd_at: return "pgd-at";
    case LossVariant::trades: return "trades";
    case LossVariant::mart: return "mart";
  }
  return "unknown";
}

LossVariant variant_from_name(std::string_view name) {
  if (name == "natural") return LossVariant::natural;
  if (name == "pgd-at") return LossVariant::pgd_at;
  if (name == "trades") return LossVariant::trades;
  if (name == "mart") return LossVariant::mart;
  fail(ErrorCategory::config, "unknown adversarial loss variant '" + std::string(name) + "'");
}

void ATLossConfig::validate() const {
  if ((kind == LossVariant::trades || kind == LossVariant::mart) && !(beta > 0.0))
    fail(ErrorCategory::config,
         std::string(variant_name(kind)) + " loss requires beta > 0");
}

void ExpertConfig::validate() const {
  loss.validate();
  if (loss.kind != LossVariant::natural) attack.validate();
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0))
    fail(ErrorCategory::config, "ema_decay must lie in [0,1]");
  if (epochs < 0) fail(ErrorCategory::config, "expert epochs must be >= 0");
  if (batch_size < 1) fail(ErrorCategory::config, "expert batch_size must be >= 1");
  if (!(outer_lr >= 0.0)) fail(ErrorCategory::config, "expert lr must be nonnegative");
  if (!(momentum >= 0.0 && momentum < 1.0))
    fail(ErrorCategory::config, "expert momentum must lie in [0,1)");
}

const std::vector<double>& TrajectoryBuffer::snapshot(Track track, int epoch) const {
  const auto& list = track == Track::ema ? snapshots_ema : snapshots_raw;
  if (track == Track::raw && snapshots_raw.empty())
    fail(ErrorCategory::mismatch, "trajectory buffer has no raw track");
  if (epoch < 0 || epoch >= int(list.size()))
    fail(ErrorCategory::mismatch, "snapshot epoch " + std::to_string(epoch) + " out of range");
  return list[size_t(epoch)];
}

ParamVector TrajectoryBuffer::param_vector(Track track, int epoch) const {
  ParamVector p;
  p.values = snapshot(track, epoch);
  p.spec_hash = spec.hash();
  return p;
}

void TrajectoryBuffer::validate() const {
  spec.validate();
  if (snapshots_ema.empty())
    fail(ErrorCategory::mismatch, "trajectory buffer must hold at least the init snapshot");
  const size_t n = spec.param_count();
  for (const auto& s : snapshots_ema)
    if (s.size() != n) fail(ErrorCategory::mismatch, "EMA snapshot length mismatch");
  for (const auto& s : snapshots_raw)
    if (s.size() != n) fail(ErrorCategory::mismatch, "raw snapshot length mismatch");
  if (!snapshots_raw.empty() && snapshots_raw.size() != snapshots_ema.size())
    fail(ErrorCategory::mismatch, "raw track length differs from EMA track");
}

ParamVector ema_update(const ParamVector& ema_prev, const ParamVector& theta_t, double alpha) {
  if (ema_prev.values.size() != theta_t.values.size())
    fail(ErrorCategory::mismatch, "ema_update: length mismatch (" +
                                      std::to_string(ema_prev.values.size()) + " vs " +
                                      std::to_string(theta_t.values.size()) + ")");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    fail(ErrorCategory::config, "ema_update: alpha must lie in [0,1]");
  ParamVector out;
  out.spec_hash = theta_t.spec_hash;
  out.values.resize(theta_t.values.size());
  for (size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = alpha * ema_prev.values[i] + (1.0 - alpha) * theta_t.values[i];
  return out;
}

namespace {

void log_softmax_rows(const std::vector<double>& logits, int k, std::vector<double>& out) {
  const int batch = int(logits.size()) / k;
  out.resize(logits.size());
  for (int b = 0; b < batch; ++b) {
    const double* l = logits.data() + size_t(b) * k;
    double m = l[argmax_row(l, k)];
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += std::exp(l[j] - m);
    const double lse = m + std::log(sum);
    for (int j = 0; j < k; ++j) out[size_t(b) * k + j] = l[j] - lse;
  }
}

struct HeadGrads {
  double loss = 0.0;
  std::vector<double> dnat;
  std::vector<double> dadv;
};

// TRADES: CE(f(x), y) + beta * KL(softmax f(x') || softmax f(x)).
HeadGrads trades_head(const std::vector<double>& nat_logits,
                      const std::vector<double>& adv_logits, const std::vector<int>& y, int k,
                      double beta) {
  const int batch = int(y.size());
  const double inv_b = 1.0 / double(batch);
  HeadGrads out;
  out.loss = softmax_xent_mean(nat_logits, y, k, &out.dnat);
  out.dadv.assign(adv_logits.size(), 0.0);
  std::vector<double> s, sp;
  log_softmax_rows(nat_logits, k, s);
  log_softmax_rows(adv_logits, k, sp);
  for (int b = 0; b < batch; ++b) {
    const size_t o = size_t(b) * k;
    double kl = 0.0;
    for (int j = 0; j < k; ++j) kl += std::exp(sp[o + j]) * (sp[o + j] - s[o + j]);
    for (int j = 0; j < k; ++j) {
      out.dadv[o + j] += beta * std::exp(sp[o + j]) * ((sp[o + j] - s[o + j]) - kl) * inv_b;
      out.dnat[o + j] += beta * (std::exp(s[o + j]) - std::exp(sp[o + j])) * inv_b;
    }
    out.loss += beta * kl * inv_b;
  }
  return out;
}

// MART: boosted CE on x' plus beta * (1 - p_y(x)) * KL(softmax f(x) ||
// softmax f(x')), per the original misclassification-aware formulation.
HeadGrads mart_head(const std::vector<double>& nat_logits,
                    const std::vector<double>& adv_logits, const std::vector<int>& y, int k,
                    double beta) {
  constexpr double kEps = 1e-12;
  const int batch = int(y.size());
  const double inv_b = 1.0 / double(batch);
  HeadGrads out;
  out.dnat.assign(nat_logits.size(), 0.0);
  out.dadv.assign(adv_logits.size(), 0.0);
  std::vector<double> s, sp;
  log_softmax_rows(nat_logits, k, s);
  log_softmax_rows(adv_logits, k, sp);
  for (int b = 0; b < batch; ++b) {
    const size_t o = size_t(b) * k;
    const int yb = y[b];
    // adversarial cross-entropy
    out.loss += -sp[o + yb] * inv_b;
    for (int j = 0; j < k; ++j) out.dadv[o + j] += (std::exp(sp[o + j]) - (j == yb)) * inv_b;
    // boosted margin term on the strongest non-true class
    int m = yb == 0 ? 1 : 0;
    for (int j = 0; j < k; ++j)
      if (j != yb && sp[o + j] > sp[o + m]) m = j;
    const double pm = std::exp(sp[o + m]);
    const double q = 1.0 - pm + kEps;
    out.loss += -std::log(q) * inv_b;
    for (int j = 0; j < k; ++j)
      out.dadv[o + j] += (pm / q) * ((j == m) - std::exp(sp[o + j])) * inv_b;
    // misclassification-aware KL regularizer
    const double py = std::exp(s[o + yb]);
    const double w = 1.0 - py;
    double kl = 0.0;
    for (int j = 0; j < k; ++j) kl += std::exp(s[o + j]) * (s[o + j] - sp[o + j]);
    out.loss += beta * w * kl * inv_b;
    for (int j = 0; j < k; ++j) {
      const double pj = std::exp(s[o + j]);
      out.dadv[o + j] += beta * w * (std::exp(sp[o + j]) - pj) * inv_b;
      out.dnat[o + j] +=
          beta * (w * pj * ((s[o + j] - sp[o + j]) - kl) - kl * py * ((j == yb) - pj)) * inv_b;
    }
  }
  return out;
}

LossGrads two_branch_loss(const ATLossConfig& variant, const ParamVector& params,
                          const ModelSpec& spec, const ImageBatch& x, const ImageBatch& x_adv,
                          const std::vector<int>& y, bool want_grads) {
  check_params(spec, params);
  check_batch(spec, x);
  check_batch(spec, x_adv);
  if (x.count != x_adv.count || int(y.size()) != x.count)
    fail(ErrorCategory::mismatch, "at_loss: batch and label counts disagree");

  ForwardTrace<double> nat_trace, adv_trace;
  net_forward(spec, params.values.data(), x.pixels.data(), x.count, nat_trace);
  net_forward(spec, params.values.data(), x_adv.pixels.data(), x_adv.count, adv_trace);

  HeadGrads head = variant.kind == LossVariant::trades
                       ? trades_head(nat_trace.logits, adv_trace.logits, y, spec.num_classes,
                                     variant.beta)
                       : mart_head(nat_trace.logits, adv_trace.logits, y, spec.num_classes,
                                   variant.beta);
  LossGrads out;
  out.loss = head.loss;
  if (want_grads) {
    out.param_grad.assign(params.size(), 0.0);
    net_backward(spec, params.values.data(), nat_trace, head.dnat, out.param_grad.data(),
                 static_cast<double*>(nullptr));
    net_backward(spec, params.values.data(), adv_trace, head.dadv, out.param_grad.data(),
                 static_cast<double*>(nullptr));
  }
  return out;
}

}  // namespace

LossGrads at_loss_grads(const ATLossConfig& variant, const ParamVector& params,
                        const ModelSpec& spec, const ImageBatch& x, const ImageBatch& x_adv,
                        const std::vector<int>& y) {
  variant.validate();
  switch (variant.kind) {
    case LossVariant::natural:
      return ce_loss_grads(params, spec, x, y, true, false);
    case LossVariant::pgd_at:
      return ce_loss_grads(params, spec, x_adv, y, true, false);
    default:
      return two_branch_loss(variant, params, spec, x, x_adv, y, true);
  }
}

double at_loss(const ATLossConfig& variant, const ParamVector& params, const ModelSpec& spec,
               const ImageBatch& x, const ImageBatch& x_adv, const std::vector<int>& y) {
  variant.validate();
  switch (variant.kind) {
    case LossVariant::natural:
      return ce_loss_grads(params, spec, x, y, false, false).loss;
    case LossVariant::pgd_at:
      return ce_loss_grads(params, spec, x_adv, y, false, false).loss;
    default:
      return two_branch_loss(variant, params, spec, x, x_adv, y, false).loss;
  }
}

TrajectoryBuffer train_expert(const RawDataset& dataset, const ModelSpec& spec,
                              const ExpertConfig& cfg, uint64_t seed) {
  cfg.validate();
  dataset.validate();
  if (!(dataset.images.shape == spec.input))
    fail(ErrorCategory::mismatch, "train_expert: dataset shape does not match model input");
  if (dataset.num_classes != spec.num_classes)
    fail(ErrorCategory::mismatch, "train_expert: dataset classes do not match model classes");

  const ParamVector init = init_model(spec, seed);
  std::vector<double> theta = init.values;
  std::vector<double> ema = init.values;  // EMA initialized to the initial weights
  std::vector<double> velocity;
  if (cfg.momentum > 0.0) velocity.assign(theta.size(), 0.0);

  TrajectoryBuffer buffer;
  buffer.spec = spec;
  auto snapshot = [&]() {
    std::vector<double> e(ema.size()), r(theta.size());
    for (size_t i = 0; i < ema.size(); ++i) e[i] = quantize_f32(ema[i]);
    for (size_t i = 0; i < theta.size(); ++i) r[i] = quantize_f32(theta[i]);
    buffer.snapshots_ema.push_back(std::move(e));
    if (cfg.record_raw) buffer.snapshots_raw.push_back(std::move(r));
  };
  snapshot();  // epoch 0 = initialization

  Rng shuffle_rng(derive_seed(seed, "expert-shuffle"));
  const uint64_t attack_base = derive_seed(seed, "expert-attack");
  std::vector<int> order(size_t(dataset.count()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

  ParamVector cur;
  cur.spec_hash = spec.hash();
  uint64_t iteration = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (size_t begin = 0; begin < order.size(); begin += size_t(cfg.batch_size)) {
      const size_t end = std::min(begin + size_t(cfg.batch_size), order.size());
      std::vector<int> idx(order.begin() + begin, order.begin() + end);
      ImageBatch x = dataset.images.select(idx);
      std::vector<int> y(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) y[i] = dataset.labels[idx[i]];

      cur.values = theta;
      ImageBatch x_adv =
          cfg.loss.kind == LossVariant::natural
              ? x
              : (cfg.loss.kind == LossVariant::trades
                     ? pgd_kl(cur, spec, x, cfg.attack, derive_seed(attack_base, iteration))
                     : pgd(cur, spec, x, y, cfg.attack, derive_seed(attack_base, iteration)));
      const LossGrads lg = at_loss_grads(cfg.loss, cur, spec, x, x_adv, y);
      if (!std::isfinite(lg.loss))
        fail(ErrorCategory::numeric, "train_expert: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", iteration " +
                                         std::to_string(iteration));
      if (cfg.momentum > 0.0) {
        for (size_t i = 0; i < theta.size(); ++i) {
          velocity[i] = cfg.momentum * velocity[i] + lg.param_grad[i];
          theta[i] -= cfg.outer_lr * velocity[i];
        }
      } else {
        for (size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.outer_lr * lg.param_grad[i];
      }
      for (size_t i = 0; i < ema.size(); ++i)
        ema[i] = cfg.ema_decay * ema[i] + (1.0 - cfg.ema_decay) * theta[i];
      ++iteration;
    }
    snapshot();
  }

  MetaDoc& m = buffer.meta;
  m.set("variant", std::string(variant_name(cfg.loss.kind)));
  if (cfg.loss.kind == LossVariant::trades || cfg.loss.kind == LossVariant::mart)
    m.set_f64("beta", cfg.loss.beta);
  if (cfg.loss.kind != LossVariant::natural) {
    m.set_f64("attack.eps", cfg.attack.epsilon);
    m.set_u64("attack.steps", uint64_t(cfg.attack.steps));
    m.set_f64("attack.step_size", cfg.attack.effective_step_size());
    m.set_bool("attack.random_start", cfg.attack.random_start);
    if (cfg.loss.kind == LossVariant::trades) m.set("attack.objective", "kl");
  }
  m.set_f64("ema_decay", cfg.ema_decay);
  m.set_f64("outer_lr", cfg.outer_lr);
  m.set_f64("momentum", cfg.momentum);
  m.set_u64("epochs", uint64_t(cfg.epochs));
  m.set_u64("batch_size", uint64_t(cfg.batch_size));
  m.set_u64("seed", seed);
  m.set("dataset_digest", hex16(dataset.digest()));
  m.set("init", "fanin-uniform-f32-v1");
  m.set("optimizer", "sgd");
  m.set("ema_granularity", "minibatch-iteration");
  return buffer;
}

std::vector<double> weight_variance(const TrajectoryBuffer& buffer, Track track) {
  const auto& list = track == Track::ema ? buffer.snapshots_ema : buffer.snapshots_raw;
  if (track == Track::raw && buffer.snapshots_raw.empty())
    fail(ErrorCategory::mismatch, "weight_variance: buffer has no raw track");
  if (list.size() < 2)
    fail(ErrorCategory::mismatch, "weight_variance: needs at least 2 snapshots");
  std::vector<double> out;
  out.reserve(list.size() - 1);
  for (size_t e = 1; e < list.size(); ++e)
    out.push_back(std::sqrt(squared_distance(list[e], list[e - 1])));
  return out;
}

std::string weight_variance_csv(const TrajectoryBuffer& buffer) {
  std::string csv = "epoch,delta_norm,track\n";
  const auto emit = [&](Track track, const char* name) {
    const std::vector<double> d = weight_variance(buffer, track);
    for (size_t e = 0; e < d.size(); ++e) {
      csv += std::to_string(e + 1);
      csv += ',';
      csv += format_f64(d[e]);
      csv += ',';
      csv += name;
      csv += '\n';
    }
  };
  emit(Track::ema, "ema");
  if (buffer.has_raw()) emit(Track::raw, "raw");
  return csv;
}

std::string encode_buffer(const TrajectoryBuffer& buffer) {
  buffer.validate();
  ByteWriter payload;
  payload.magic("MATB");
  payload.u32(1);  // version
  payload.str_u16(buffer.spec.canonical());
  payload.u32(uint32_t(buffer.snapshots_ema.size()));
  payload.u64(buffer.spec.param_count());
  payload.u8(buffer.has_raw() ? 1 : 0);
  for (const auto& snap : buffer.snapshots_ema)
    for (double v : snap) payload.f32(float(v));
  for (const auto& snap : buffer.snapshots_raw)
    for (double v : snap) payload.f32(float(v));

  MetaDoc meta = buffer.meta;
  meta.set("payload_digest", hex16(fnv1a64(payload.bytes().data(), payload.bytes().size())));

  ByteWriter file;
  file.raw(payload.bytes().data(), payload.bytes().size());
  file.str_u32(meta.serialize());
  return file.bytes();
}

TrajectoryBuffer decode_buffer(const std::string& bytes, const std::string& label,
                               bool verify_digest) {
  ByteReader r(bytes, label);
  r.expect_magic("MATB", "trajectory buffer");
  const uint32_t version = r.u32();
  if (version != 1)
    fail(ErrorCategory::bad_version,
         label + ": unsupported trajectory buffer version " + std::to_string(version));
  TrajectoryBuffer buffer;
  buffer.spec = ModelSpec::parse(r.str_u16());
  const uint32_t count = r.u32();
  const uint64_t param_count = r.u64();
  const uint8_t flags = r.u8();
  if (count < 1) fail(ErrorCategory::mismatch, label + ": buffer holds no snapshots");
  if (param_count != buffer.spec.param_count())
    fail(ErrorCategory::mismatch,
         label + ": header param count " + std::to_string(param_count) +
             " does not match spec '" + buffer.spec.canonical() + "' (" +
             std::to_string(buffer.spec.param_count()) + ")");
  auto read_track = [&](std::vector<std::vector<double>>& track) {
    track.resize(count);
    for (auto& snap : track) {
      snap.resize(param_count);
      for (double& v : snap) v = double(r.f32());
    }
  };
  read_track(buffer.snapshots_ema);
  if (flags & 1) read_track(buffer.snapshots_raw);
  const size_t payload_end = r.pos();
  buffer.meta = MetaDoc::parse(r.str_u32());
  if (verify_digest) check_payload_digest(r, payload_end, buffer.meta);
  if (!r.at_end()) fail(ErrorCategory::mismatch, label + ": trailing bytes after metadata");
  buffer.validate();
  return buffer;
}

void save_buffer(const TrajectoryBuffer& buffer, const std::string& path) {
  write_file_atomic(path, encode_buffer(buffer));
}

TrajectoryBuffer load_buffer(const std::string& path, bool verify_digest) {
  return decode_buffer(read_file(path), path, verify_digest);
}

}  // namespace mat
