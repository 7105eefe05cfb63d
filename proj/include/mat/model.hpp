#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/model_spec.hpp"

namespace mat {

/// Flat ordered vector of all model parameters (layout per param_layout).
struct ParamVector {
  std::vector<double> values;
  uint64_t spec_hash = 0;

  size_t size() const { return values.size(); }
};

/// Image batch in (count, height, width, channel) row-major order.
struct ImageBatch {
  int count = 0;
  ImageShape shape;
  std::vector<double> pixels;

  size_t sample_size() const { return shape.pixels(); }
  const double* sample(int i) const { return pixels.data() + size_t(i) * sample_size(); }
  double* sample(int i) { return pixels.data() + size_t(i) * sample_size(); }

  ImageBatch select(const std::vector<int>& indices) const;
};

struct StructuredParams {
  struct Block {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;
  };
  uint64_t spec_hash = 0;
  std::vector<Block> blocks;
};

/// Deterministic initialization: weights from a fan-in-scaled uniform
/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) quantized to float32 values, biases 0,
/// norm scales 1, norm shifts 0. Draw order follows the parameter layout.
ParamVector init_model(const ModelSpec& spec, uint64_t seed);

/// Logits (count x num_classes). Rejects shape or spec-hash mismatches.
std::vector<double> forward(const ParamVector& params, const ModelSpec& spec,
                            const ImageBatch& batch);

StructuredParams unflatten(const ParamVector& params, const ModelSpec& spec);
ParamVector flatten(const StructuredParams& structured, const ModelSpec& spec);

struct LossGrads {
  double loss = 0.0;
  std::vector<double> param_grad;
  std::vector<double> input_grad;
};

/// Mean cross-entropy and its gradients; either gradient is optional.
LossGrads ce_loss_grads(const ParamVector& params, const ModelSpec& spec,
                        const ImageBatch& batch, const std::vector<int>& labels,
                        bool want_param_grad, bool want_input_grad);

/// Argmax with ties broken toward the lowest class index.
int argmax_row(const double* row, int n);

void check_batch(const ModelSpec& spec, const ImageBatch& batch);
void check_params(const ModelSpec& spec, const ParamVector& params);

/// Nearest float32 value (snapshot / serialization quantization).
inline double quantize_f32(double x) { return double(float(x)); }

double l2_norm(const std::vector<double>& v);
double squared_distance(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mat
