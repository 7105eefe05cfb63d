#include "mat/distill.hpp"

#include <cmath>

#include "mat/dual.hpp"
#include "mat/errors.hpp"
#include "mat/kernels.hpp"

namespace mat {

void SyntheticDataset::validate() const {
  if (num_classes < 2 || ipc < 1)
    fail(ErrorCategory::mismatch, "synthetic dataset: needs >= 2 classes and ipc >= 1");
  if (images.count != num_classes * ipc)
    fail(ErrorCategory::mismatch, "synthetic dataset: image count != classes * ipc");
  if (int(labels.size()) != images.count)
    fail(ErrorCategory::mismatch, "synthetic dataset: label count mismatch");
  for (int i = 0; i < images.count; ++i)
    if (labels[i] != i / ipc)
      fail(ErrorCategory::mismatch, "synthetic dataset: labels must be class-major blocks");
  if (!(inner_lr > 0.0))
    fail(ErrorCategory::mismatch, "synthetic dataset: inner_lr must be positive");
  for (double p : images.pixels)
    if (!(p >= 0.0 && p <= 1.0))
      fail(ErrorCategory::mismatch, "synthetic dataset: pixel outside [0,1]");
}

namespace {

void encode_synth_core(const SyntheticDataset& s, ByteWriter& w) {
  w.u32(uint32_t(s.num_classes));
  w.u32(uint32_t(s.ipc));
  w.u32(uint32_t(s.images.shape.h));
  w.u32(uint32_t(s.images.shape.w));
  w.u32(uint32_t(s.images.shape.c));
  w.f32(float(s.inner_lr));
  for (double p : s.images.pixels) w.f32(float(p));
  for (int y : s.labels) w.i32(y);
}

}  // namespace

uint64_t SyntheticDataset::digest() const {
  ByteWriter w;
  encode_synth_core(*this, w);
  return fnv1a64(w.bytes().data(), w.bytes().size());
}

SyntheticDataset init_synthetic(const RawDataset& source, int ipc, InitStrategy strategy,
                                double inner_lr, uint64_t seed) {
  source.validate();
  if (ipc < 1) fail(ErrorCategory::config, "init_synthetic: ipc must be >= 1");
  if (!(inner_lr > 0.0)) fail(ErrorCategory::config, "init_synthetic: inner_lr must be > 0");

  SyntheticDataset s;
  s.num_classes = source.num_classes;
  s.ipc = ipc;
  s.inner_lr = quantize_f32(inner_lr);
  s.images.count = source.num_classes * ipc;
  s.images.shape = source.images.shape;
  s.images.pixels.resize(size_t(s.images.count) * s.images.sample_size());
  s.labels.resize(size_t(s.images.count));
  for (int i = 0; i < s.images.count; ++i) s.labels[i] = i / ipc;

  Rng rng(derive_seed(seed, "init-synthetic"));
  if (strategy == InitStrategy::real) {
    for (int c = 0; c < source.num_classes; ++c) {
      std::vector<int> pool;
      for (int i = 0; i < source.count(); ++i)
        if (source.labels[i] == c) pool.push_back(i);
      if (int(pool.size()) < ipc)
        fail(ErrorCategory::config, "init_synthetic: class " + std::to_string(c) + " has " +
                                        std::to_string(pool.size()) + " samples, need " +
                                        std::to_string(ipc));
      rng.shuffle(pool);
      for (int k = 0; k < ipc; ++k) {
        const double* src = source.images.sample(pool[k]);
        double* dst = s.images.sample(c * ipc + k);
        for (size_t p = 0; p < s.images.sample_size(); ++p) dst[p] = quantize_f32(src[p]);
      }
    }
  } else {
    for (double& p : s.images.pixels) p = quantize_f32(rng.uniform());
  }

  s.meta.set("init_strategy", strategy == InitStrategy::real ? "real" : "noise");
  s.meta.set_u64("init_seed", seed);
  s.meta.set("source_digest", hex16(source.digest()));
  return s;
}

void MatchConfig::validate(int expert_epochs) const {
  if (max_start_epoch < 1)
    fail(ErrorCategory::config, "distill: max_start_epoch must be >= 1");
  if (target_offset < 1) fail(ErrorCategory::config, "distill: target_offset must be >= 1");
  if (max_start_epoch + target_offset > expert_epochs)
    fail(ErrorCategory::config,
         "distill: max_start_epoch + target_offset (" +
             std::to_string(max_start_epoch + target_offset) +
             ") exceeds expert epochs (" + std::to_string(expert_epochs) + ")");
  if (max_student_steps < 1)
    fail(ErrorCategory::config, "distill: max_student_steps must be >= 1");
  if (student_batch < 1) fail(ErrorCategory::config, "distill: student_batch must be >= 1");
  if (!(degenerate_eps > 0.0))
    fail(ErrorCategory::config, "distill: degenerate_eps must be > 0");
  if (syn_lr < 0.0 || lr_lr < 0.0)
    fail(ErrorCategory::config, "distill: learning rates must be nonnegative");
  if (!(syn_momentum >= 0.0 && syn_momentum < 1.0))
    fail(ErrorCategory::config, "distill: syn_momentum must lie in [0,1)");
  if (retry_limit < 1) fail(ErrorCategory::config, "distill: retry_limit must be >= 1");
}

StudentUnroll student_unroll(const SyntheticDataset& s, const ParamVector& theta_start,
                             const ModelSpec& spec, int n_steps, int student_batch, Rng& rng) {
  // Pure function of its inputs: unlike the container-level invariant this
  // accepts inner_lr = 0 (the student then stays at theta_start).
  check_params(spec, theta_start);
  if (!(s.images.shape == spec.input) || s.num_classes != spec.num_classes)
    fail(ErrorCategory::mismatch, "student_unroll: synthetic set does not match model spec");
  if (int(s.labels.size()) != s.images.count)
    fail(ErrorCategory::mismatch, "student_unroll: label count mismatch");
  if (!(s.inner_lr >= 0.0))
    fail(ErrorCategory::mismatch, "student_unroll: inner_lr must be nonnegative");
  if (n_steps < 0) fail(ErrorCategory::config, "student_unroll: n_steps must be >= 0");

  StudentUnroll unroll;
  const bool full_batch = s.count() <= student_batch;
  std::vector<int> order(size_t(s.count()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  size_t cursor = order.size();  // forces an initial shuffle in minibatch mode

  std::vector<double> theta = theta_start.values;
  ParamVector cur;
  cur.spec_hash = spec.hash();
  for (int k = 0; k < n_steps; ++k) {
    std::vector<int> batch_idx;
    if (full_batch) {
      batch_idx = order;
    } else {
      batch_idx.reserve(size_t(student_batch));
      while (int(batch_idx.size()) < student_batch) {
        if (cursor == order.size()) {
          rng.shuffle(order);
          cursor = 0;
        }
        batch_idx.push_back(order[cursor++]);
      }
    }
    ImageBatch x = s.images.select(batch_idx);
    std::vector<int> y(batch_idx.size());
    for (size_t i = 0; i < batch_idx.size(); ++i) y[i] = s.labels[batch_idx[i]];

    cur.values = theta;
    const LossGrads lg = ce_loss_grads(cur, spec, x, y, true, false);
    if (!std::isfinite(lg.loss))
      fail(ErrorCategory::numeric,
           "student_unroll: non-finite student loss at step " + std::to_string(k + 1));
    for (size_t i = 0; i < theta.size(); ++i) theta[i] -= s.inner_lr * lg.param_grad[i];
    unroll.thetas.push_back(theta);
    unroll.batches.push_back(std::move(batch_idx));
  }
  return unroll;
}

double match_loss(const std::vector<double>& theta_student,
                  const std::vector<double>& theta_target,
                  const std::vector<double>& theta_start, double degenerate_eps) {
  if (theta_student.size() != theta_target.size() ||
      theta_target.size() != theta_start.size())
    fail(ErrorCategory::mismatch, "match_loss: parameter length mismatch");
  const double denom = squared_distance(theta_target, theta_start);
  if (denom < degenerate_eps)
    fail(ErrorCategory::degenerate_segment,
         "match_loss: ||theta_target - theta_start||^2 = " + format_f64(denom) +
             " below threshold " + format_f64(degenerate_eps));
  return squared_distance(theta_student, theta_target) / denom;
}

AttSelection att_select(const std::vector<std::vector<double>>& thetas,
                        const std::vector<double>& theta_target) {
  if (thetas.empty()) fail(ErrorCategory::mismatch, "att_select: empty student trajectory");
  AttSelection sel;
  sel.n_star = 1;
  sel.distance_sq = squared_distance(thetas[0], theta_target);
  for (size_t k = 1; k < thetas.size(); ++k) {
    const double d = squared_distance(thetas[k], theta_target);
    if (d < sel.distance_sq) {
      sel.distance_sq = d;
      sel.n_star = int(k) + 1;
    }
  }
  return sel;
}

MetaGrads match_meta_gradients(const SyntheticDataset& s, const ModelSpec& spec,
                               const std::vector<double>& theta_start,
                               const std::vector<double>& theta_target,
                               const StudentUnroll& unroll, int n_star,
                               double degenerate_eps) {
  if (n_star < 1 || n_star > int(unroll.thetas.size()))
    fail(ErrorCategory::mismatch, "match_meta_gradients: n_star out of range");
  const size_t p = theta_start.size();
  const double denom = squared_distance(theta_target, theta_start);
  if (denom < degenerate_eps)
    fail(ErrorCategory::degenerate_segment, "match_meta_gradients: degenerate segment");

  MetaGrads out;
  out.loss = squared_distance(unroll.thetas[size_t(n_star) - 1], theta_target) / denom;
  out.image_grad.assign(s.images.pixels.size(), 0.0);

  // Adjoint of the selected student parameters.
  std::vector<double> lambda(p);
  {
    const auto& theta_n = unroll.thetas[size_t(n_star) - 1];
    const double scale = 2.0 / denom;
    for (size_t i = 0; i < p; ++i) lambda[i] = scale * (theta_n[i] - theta_target[i]);
  }

  const size_t sample_size = s.images.sample_size();
  std::vector<Dual> dual_params(p);
  ForwardTrace<Dual> trace;
  for (int k = n_star - 1; k >= 0; --k) {
    const std::vector<double>& theta_k =
        k == 0 ? theta_start : unroll.thetas[size_t(k) - 1];
    const std::vector<int>& batch_idx = unroll.batches[size_t(k)];

    // Dual sweep at (theta_k + eps * lambda, batch): the dual part of the
    // parameter gradient is H_k * lambda, the dual part of the input
    // gradient is the mixed d^2 L / dx dtheta contracted with lambda.
    for (size_t i = 0; i < p; ++i) dual_params[i] = Dual(theta_k[i], lambda[i]);
    std::vector<Dual> dual_x(batch_idx.size() * sample_size);
    std::vector<int> y(batch_idx.size());
    for (size_t b = 0; b < batch_idx.size(); ++b) {
      const double* src = s.images.sample(batch_idx[b]);
      for (size_t j = 0; j < sample_size; ++j)
        dual_x[b * sample_size + j] = Dual(src[j], 0.0);
      y[b] = s.labels[batch_idx[b]];
    }
    net_forward(spec, dual_params.data(), dual_x.data(), int(batch_idx.size()), trace);
    std::vector<Dual> dlogits;
    softmax_xent_mean(trace.logits, y, spec.num_classes, &dlogits);
    std::vector<Dual> dparams(p, Dual(0.0, 0.0));
    std::vector<Dual> dx(dual_x.size(), Dual(0.0, 0.0));
    net_backward(spec, dual_params.data(), trace, dlogits, dparams.data(), dx.data());

    // theta_{k+1} = theta_k - lr * g_k
    double dot = 0.0;
    for (size_t i = 0; i < p; ++i) dot += lambda[i] * dparams[i].v;
    out.inner_lr_grad -= dot;
    for (size_t b = 0; b < batch_idx.size(); ++b) {
      double* dst = out.image_grad.data() + size_t(batch_idx[b]) * sample_size;
      for (size_t j = 0; j < sample_size; ++j)
        dst[j] -= s.inner_lr * dx[b * sample_size + j].d;
    }
    for (size_t i = 0; i < p; ++i) lambda[i] -= s.inner_lr * dparams[i].d;
  }
  return out;
}

Distiller::Distiller(SyntheticDataset s, const std::vector<TrajectoryBuffer>& buffers,
                     MatchConfig cfg, uint64_t seed)
    : s_(std::move(s)),
      buffers_(buffers),
      cfg_(cfg),
      rng_(derive_seed(seed, "distill")),
      image_velocity_(s_.images.pixels.size(), 0.0) {
  if (buffers_.empty()) fail(ErrorCategory::config, "distiller: no trajectory buffers");
  spec_ = buffers_.front().spec;
  const std::string dataset_digest = buffers_.front().meta.contains("dataset_digest")
                                         ? buffers_.front().meta.get("dataset_digest")
                                         : std::string();
  int min_epochs = buffers_.front().epochs();
  for (const auto& b : buffers_) {
    b.validate();
    if (!(b.spec == spec_))
      fail(ErrorCategory::mismatch, "distiller: buffers disagree on model spec");
    if (cfg_.track == Track::raw && !b.has_raw())
      fail(ErrorCategory::mismatch, "distiller: raw track requested but absent from buffer");
    if (b.meta.contains("dataset_digest") && b.meta.get("dataset_digest") != dataset_digest)
      fail(ErrorCategory::mismatch, "distiller: buffers disagree on dataset digest");
    min_epochs = std::min(min_epochs, b.epochs());
  }
  cfg_.validate(min_epochs);
  s_.validate();
  if (!(s_.images.shape == spec_.input) || s_.num_classes != spec_.num_classes)
    fail(ErrorCategory::mismatch, "distiller: synthetic set does not match buffer spec");
}

DistillStats Distiller::step() {
  const std::vector<double>* theta_start = nullptr;
  const std::vector<double>* theta_target = nullptr;
  int buffer_id = 0, start_epoch = 0;
  bool found = false;
  std::string last_failure;
  for (int attempt = 0; attempt < cfg_.retry_limit && !found; ++attempt) {
    buffer_id = int(rng_.below(uint64_t(buffers_.size())));
    start_epoch = int(rng_.below(uint64_t(cfg_.max_start_epoch)));
    const TrajectoryBuffer& buf = buffers_[size_t(buffer_id)];
    const auto& start = buf.snapshot(cfg_.track, start_epoch);
    const auto& target = buf.snapshot(cfg_.track, start_epoch + cfg_.target_offset);
    const double denom = squared_distance(target, start);
    if (denom < cfg_.degenerate_eps) {
      last_failure = "buffer " + std::to_string(buffer_id) + " t=" +
                     std::to_string(start_epoch) + " denom=" + format_f64(denom);
      continue;
    }
    theta_start = &start;
    theta_target = &target;
    found = true;
  }
  if (!found)
    fail(ErrorCategory::degenerate_segment,
         "distill_step: no usable segment after " + std::to_string(cfg_.retry_limit) +
             " attempts (last: " + last_failure + ")");

  ParamVector start_pv;
  start_pv.spec_hash = spec_.hash();
  start_pv.values = *theta_start;
  StudentUnroll unroll =
      student_unroll(s_, start_pv, spec_, cfg_.max_student_steps, cfg_.student_batch, rng_);
  const AttSelection sel = att_select(unroll.thetas, *theta_target);

  // Identity guards on the sampled segment: the start weights score exactly
  // 1 and the target scores exactly 0 under the normalized match loss.
  if (match_loss(*theta_target, *theta_target, *theta_start, cfg_.degenerate_eps) != 0.0 ||
      match_loss(*theta_start, *theta_target, *theta_start, cfg_.degenerate_eps) != 1.0)
    fail(ErrorCategory::numeric, "distill_step: match-loss identity check failed");

  MetaGrads grads = match_meta_gradients(s_, spec_, *theta_start, *theta_target, unroll,
                                         sel.n_star, cfg_.degenerate_eps);

  // One momentum step on the images and the inner learning rate, then
  // project back into the feasible set.
  for (size_t i = 0; i < s_.images.pixels.size(); ++i) {
    image_velocity_[i] = cfg_.syn_momentum * image_velocity_[i] + grads.image_grad[i];
    double v = s_.images.pixels[i] - cfg_.syn_lr * image_velocity_[i];
    v = std::min(std::max(v, 0.0), 1.0);
    s_.images.pixels[i] = quantize_f32(v);
  }
  lr_velocity_ = cfg_.syn_momentum * lr_velocity_ + grads.inner_lr_grad;
  double lr = s_.inner_lr - cfg_.lr_lr * lr_velocity_;
  if (lr < 1e-6) lr = 1e-6;  // positivity floor
  s_.inner_lr = quantize_f32(lr);

  DistillStats stats;
  stats.iteration = iteration_++;
  stats.loss = grads.loss;
  stats.start_epoch = start_epoch;
  stats.n_star = sel.n_star;
  stats.buffer_id = buffer_id;
  stats.inner_lr = s_.inner_lr;
  return stats;
}

std::string distill_stats_csv_header() { return "iter,loss,t,n_star,buffer_id,inner_lr\n"; }

std::string distill_stats_csv_row(const DistillStats& stats) {
  std::string row = std::to_string(stats.iteration);
  row += ',';
  row += format_f64(stats.loss);
  row += ',';
  row += std::to_string(stats.start_epoch);
  row += ',';
  row += std::to_string(stats.n_star);
  row += ',';
  row += std::to_string(stats.buffer_id);
  row += ',';
  row += format_f64(stats.inner_lr);
  row += '\n';
  return row;
}

std::string encode_synthetic(const SyntheticDataset& s) {
  s.validate();
  ByteWriter payload;
  payload.magic("MATS");
  payload.u32(1);  // version
  encode_synth_core(s, payload);

  MetaDoc meta = s.meta;
  meta.set("payload_digest", hex16(fnv1a64(payload.bytes().data(), payload.bytes().size())));

  ByteWriter file;
  file.raw(payload.bytes().data(), payload.bytes().size());
  file.str_u32(meta.serialize());
  return file.bytes();
}

SyntheticDataset decode_synthetic(const std::string& bytes, const std::string& label,
                                  bool verify_digest) {
  ByteReader r(bytes, label);
  r.expect_magic("MATS", "synthetic dataset");
  const uint32_t version = r.u32();
  if (version != 1)
    fail(ErrorCategory::bad_version,
         label + ": unsupported synthetic container version " + std::to_string(version));
  SyntheticDataset s;
  s.num_classes = int(r.u32());
  s.ipc = int(r.u32());
  s.images.shape.h = int(r.u32());
  s.images.shape.w = int(r.u32());
  s.images.shape.c = int(r.u32());
  s.inner_lr = double(r.f32());
  if (s.num_classes < 2 || s.ipc < 1 || s.images.shape.h <= 0 || s.images.shape.w <= 0 ||
      s.images.shape.c <= 0)
    fail(ErrorCategory::mismatch, label + ": bad synthetic container dimensions");
  s.images.count = s.num_classes * s.ipc;
  s.images.pixels.resize(size_t(s.images.count) * s.images.sample_size());
  for (double& p : s.images.pixels) p = double(r.f32());
  s.labels.resize(size_t(s.images.count));
  for (int& y : s.labels) y = r.i32();
  const size_t payload_end = r.pos();
  s.meta = MetaDoc::parse(r.str_u32());
  if (!r.at_end()) fail(ErrorCategory::mismatch, label + ": trailing bytes after metadata");
  if (verify_digest) check_payload_digest(r, payload_end, s.meta);
  s.validate();
  return s;
}

void save_synthetic(const SyntheticDataset& s, const std::string& path) {
  write_file_atomic(path, encode_synthetic(s));
}

SyntheticDataset load_synthetic(const std::string& path, bool verify_digest) {
  return decode_synthetic(read_file(path), path, verify_digest);
}

}  // namespace mat
