#include "mat/model.hpp"

#include <cmath>

#include "mat/errors.hpp"
#include "mat/kernels.hpp"
#include "mat/rng.hpp"

namespace mat {

ImageBatch ImageBatch::select(const std::vector<int>& indices) const {
  ImageBatch out;
  out.count = int(indices.size());
  out.shape = shape;
  out.pixels.resize(indices.size() * sample_size());
  for (size_t i = 0; i < indices.size(); ++i) {
    const double* src = sample(indices[i]);
    std::copy(src, src + sample_size(), out.pixels.begin() + i * sample_size());
  }
  return out;
}

ParamVector init_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ParamVector p;
  p.spec_hash = spec.hash();
  p.values.assign(spec.param_count(), 0.0);
  for (const auto& block : param_layout(spec)) {
    double* dst = p.values.data() + block.offset;
    if (block.name.ends_with(".weight")) {
      // fan_in = product of all dims past the first (output) dim
      size_t fan_in = 1;
      for (size_t d = 1; d < block.shape.size(); ++d) fan_in *= size_t(block.shape[d]);
      const double bound = 1.0 / std::sqrt(double(fan_in));
      for (size_t i = 0; i < block.size; ++i)
        dst[i] = quantize_f32(rng.uniform(-bound, bound));
    } else if (block.name.ends_with("norm.scale")) {
      for (size_t i = 0; i < block.size; ++i) dst[i] = 1.0;
    } else {
      // biases and norm shifts start at zero
    }
  }
  return p;
}

void check_batch(const ModelSpec& spec, const ImageBatch& batch) {
  if (!(batch.shape == spec.input))
    fail(ErrorCategory::mismatch,
         "batch shape " + std::to_string(batch.shape.h) + "x" + std::to_string(batch.shape.w) +
             "x" + std::to_string(batch.shape.c) + " does not match model input " +
             std::to_string(spec.input.h) + "x" + std::to_string(spec.input.w) + "x" +
             std::to_string(spec.input.c));
  if (batch.pixels.size() != size_t(batch.count) * batch.sample_size())
    fail(ErrorCategory::mismatch, "batch pixel buffer size does not match count*shape");
}

void check_params(const ModelSpec& spec, const ParamVector& params) {
  if (params.spec_hash != spec.hash())
    fail(ErrorCategory::mismatch, "param vector spec hash does not match model spec " +
                                      spec.canonical());
  if (params.values.size() != spec.param_count())
    fail(ErrorCategory::mismatch,
         "param vector length " + std::to_string(params.values.size()) +
             " does not match spec param count " + std::to_string(spec.param_count()));
}

std::vector<double> forward(const ParamVector& params, const ModelSpec& spec,
                            const ImageBatch& batch) {
  check_params(spec, params);
  check_batch(spec, batch);
  ForwardTrace<double> trace;
  net_forward(spec, params.values.data(), batch.pixels.data(), batch.count, trace);
  return std::move(trace.logits);
}

StructuredParams unflatten(const ParamVector& params, const ModelSpec& spec) {
  check_params(spec, params);
  StructuredParams sp;
  sp.spec_hash = params.spec_hash;
  for (const auto& info : param_layout(spec)) {
    StructuredParams::Block b;
    b.name = info.name;
    b.shape = info.shape;
    b.values.assign(params.values.begin() + info.offset,
                    params.values.begin() + info.offset + info.size);
    sp.blocks.push_back(std::move(b));
  }
  return sp;
}

ParamVector flatten(const StructuredParams& structured, const ModelSpec& spec) {
  const auto layout = param_layout(spec);
  if (structured.blocks.size() != layout.size())
    fail(ErrorCategory::mismatch, "structured params: block count mismatch");
  ParamVector p;
  p.spec_hash = spec.hash();
  p.values.reserve(spec.param_count());
  for (size_t i = 0; i < layout.size(); ++i) {
    if (structured.blocks[i].values.size() != layout[i].size)
      fail(ErrorCategory::mismatch,
           "structured params: block '" + layout[i].name + "' length mismatch");
    p.values.insert(p.values.end(), structured.blocks[i].values.begin(),
                    structured.blocks[i].values.end());
  }
  return p;
}

LossGrads ce_loss_grads(const ParamVector& params, const ModelSpec& spec,
                        const ImageBatch& batch, const std::vector<int>& labels,
                        bool want_param_grad, bool want_input_grad) {
  check_params(spec, params);
  check_batch(spec, batch);
  if (int(labels.size()) != batch.count)
    fail(ErrorCategory::mismatch, "label count does not match batch count");

  ForwardTrace<double> trace;
  net_forward(spec, params.values.data(), batch.pixels.data(), batch.count, trace);
  LossGrads out;
  std::vector<double> dlogits;
  out.loss = softmax_xent_mean(trace.logits, labels, spec.num_classes, &dlogits);
  if (want_param_grad || want_input_grad) {
    out.param_grad.assign(params.size(), 0.0);
    if (want_input_grad) out.input_grad.assign(batch.pixels.size(), 0.0);
    net_backward(spec, params.values.data(), trace, dlogits, out.param_grad.data(),
                 want_input_grad ? out.input_grad.data() : nullptr);
    if (!want_param_grad) out.param_grad.clear();
  }
  return out;
}

int argmax_row(const double* row, int n) {
  int arg = 0;
  for (int k = 1; k < n; ++k)
    if (row[k] > row[arg]) arg = k;
  return arg;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace mat
