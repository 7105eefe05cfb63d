#pragma once

// Dense forward/backward kernels for the convnet and mlp families,
// templated on the scalar type. Instantiated with double for training and
// attacks, and with Dual for the second-order sweeps the distiller needs
// (running backward in Dual arithmetic yields Hessian-vector and mixed
// input/parameter products).
//
// All reductions accumulate sequentially in row-major loop order; under the
// single-threaded contract equal inputs give bit-identical outputs.
//
// Activation layout is (batch, height, width, channel) row-major. The final
// convnet feature index is (h * W + w) * C + c over the last pooled stage.

#include <cmath>
#include <vector>

#include "mat/dual.hpp"
#include "mat/errors.hpp"
#include "mat/model_spec.hpp"

namespace mat {

// Bring the double overloads into scope so the templated kernels below can
// call exp/log/sqrt unqualified for both double and Dual.
using std::exp;
using std::log;
using std::sqrt;

inline constexpr double kInstanceNormEps = 1e-5;  // variance stabilizer

template <typename T>
struct ForwardTrace {
  int batch = 0;
  // stages[0] is the (flattened) input; stages[b+1] is the pooled output of
  // conv block b (convnet) or the post-ReLU activation of layer b (mlp).
  std::vector<std::vector<T>> stages;
  std::vector<std::vector<T>> conv_out;  // pre-norm conv outputs per block
  std::vector<std::vector<T>> xhat;      // normalized pre-affine activations
  std::vector<std::vector<T>> invstd;    // per (sample, channel)
  std::vector<std::vector<T>> act;       // post-ReLU, pre-pool per block
  std::vector<T> logits;                 // (batch, num_classes)
};

namespace detail {

template <typename T>
void conv3x3_forward(const T* in, int batch, int h, int w, int cin, const T* weight,
                     const T* bias, int cout, T* out) {
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int co = 0; co < cout; ++co) {
          T acc = bias[co];
          for (int ci = 0; ci < cin; ++ci)
            for (int di = 0; di < 3; ++di) {
              const int ii = i + di - 1;
              if (ii < 0 || ii >= h) continue;
              for (int dj = 0; dj < 3; ++dj) {
                const int jj = j + dj - 1;
                if (jj < 0 || jj >= w) continue;
                acc += weight[((size_t(co) * cin + ci) * 3 + di) * 3 + dj] *
                       in[((size_t(b) * h + ii) * w + jj) * cin + ci];
              }
            }
          out[((size_t(b) * h + i) * w + j) * cout + co] = acc;
        }
}

template <typename T>
void conv3x3_backward(const T* in, int batch, int h, int w, int cin, const T* weight,
                      int cout, const T* dout, T* dweight, T* dbias, T* din) {
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        for (int co = 0; co < cout; ++co) {
          const T g = dout[((size_t(b) * h + i) * w + j) * cout + co];
          dbias[co] += g;
          for (int ci = 0; ci < cin; ++ci)
            for (int di = 0; di < 3; ++di) {
              const int ii = i + di - 1;
              if (ii < 0 || ii >= h) continue;
              for (int dj = 0; dj < 3; ++dj) {
                const int jj = j + dj - 1;
                if (jj < 0 || jj >= w) continue;
                const size_t widx = ((size_t(co) * cin + ci) * 3 + di) * 3 + dj;
                const size_t iidx = ((size_t(b) * h + ii) * w + jj) * cin + ci;
                dweight[widx] += g * in[iidx];
                if (din) din[iidx] += g * weight[widx];
              }
            }
        }
}

// Per-sample, per-channel normalization over the spatial extent with biased
// variance. Emits xhat and invstd for the backward pass.
template <typename T>
void instnorm_forward(const T* in, int batch, int h, int w, int channels, const T* scale,
                      const T* shift, T* xhat, T* invstd, T* out) {
  const int hw = h * w;
  const T inv_n = T(1.0 / double(hw));
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c) {
      T mean = T(0.0);
      for (int p = 0; p < hw; ++p) mean += in[(size_t(b) * hw + p) * channels + c];
      mean *= inv_n;
      T var = T(0.0);
      for (int p = 0; p < hw; ++p) {
        const T d = in[(size_t(b) * hw + p) * channels + c] - mean;
        var += d * d;
      }
      var *= inv_n;
      const T is = T(1.0) / sqrt(var + T(kInstanceNormEps));
      invstd[size_t(b) * channels + c] = is;
      for (int p = 0; p < hw; ++p) {
        const size_t idx = (size_t(b) * hw + p) * channels + c;
        const T xh = (in[idx] - mean) * is;
        xhat[idx] = xh;
        out[idx] = scale[c] * xh + shift[c];
      }
    }
}

template <typename T>
void instnorm_backward(const T* xhat, const T* invstd, int batch, int h, int w, int channels,
                       const T* scale, const T* dout, T* dscale, T* dshift, T* din) {
  const int hw = h * w;
  const T inv_n = T(1.0 / double(hw));
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < channels; ++c) {
      T sum_dy = T(0.0), sum_dy_xhat = T(0.0);
      for (int p = 0; p < hw; ++p) {
        const size_t idx = (size_t(b) * hw + p) * channels + c;
        sum_dy += dout[idx];
        sum_dy_xhat += dout[idx] * xhat[idx];
      }
      dshift[c] += sum_dy;
      dscale[c] += sum_dy_xhat;
      const T is = invstd[size_t(b) * channels + c];
      const T mean_dy = sum_dy * inv_n;
      const T mean_dy_xhat = sum_dy_xhat * inv_n;
      for (int p = 0; p < hw; ++p) {
        const size_t idx = (size_t(b) * hw + p) * channels + c;
        const T dxhat = dout[idx] * scale[c];
        din[idx] += is * (dxhat - scale[c] * mean_dy - xhat[idx] * scale[c] * mean_dy_xhat);
      }
    }
}

template <typename T>
void avgpool2x2_forward(const T* in, int batch, int h, int w, int channels, T* out) {
  const int oh = h / 2, ow = w / 2;
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        for (int c = 0; c < channels; ++c) {
          const auto at = [&](int ii, int jj) -> const T& {
            return in[((size_t(b) * h + ii) * w + jj) * channels + c];
          };
          out[((size_t(b) * oh + i) * ow + j) * channels + c] =
              (at(2 * i, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j) +
               at(2 * i + 1, 2 * j + 1)) *
              T(0.25);
        }
}

template <typename T>
void avgpool2x2_backward(const T* dout, int batch, int h, int w, int channels, T* din) {
  const int oh = h / 2, ow = w / 2;
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        for (int c = 0; c < channels; ++c) {
          const T g = dout[((size_t(b) * oh + i) * ow + j) * channels + c] * T(0.25);
          din[((size_t(b) * h + 2 * i) * w + 2 * j) * channels + c] += g;
          din[((size_t(b) * h + 2 * i) * w + 2 * j + 1) * channels + c] += g;
          din[((size_t(b) * h + 2 * i + 1) * w + 2 * j) * channels + c] += g;
          din[((size_t(b) * h + 2 * i + 1) * w + 2 * j + 1) * channels + c] += g;
        }
}

template <typename T>
void linear_forward(const T* in, int batch, int features, const T* weight, const T* bias,
                    int out_dim, T* out) {
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < out_dim; ++k) {
      T acc = bias[k];
      for (int f = 0; f < features; ++f)
        acc += weight[size_t(k) * features + f] * in[size_t(b) * features + f];
      out[size_t(b) * out_dim + k] = acc;
    }
}

template <typename T>
void linear_backward(const T* in, int batch, int features, const T* weight, int out_dim,
                     const T* dout, T* dweight, T* dbias, T* din) {
  for (int b = 0; b < batch; ++b)
    for (int k = 0; k < out_dim; ++k) {
      const T g = dout[size_t(b) * out_dim + k];
      dbias[k] += g;
      for (int f = 0; f < features; ++f) {
        dweight[size_t(k) * features + f] += g * in[size_t(b) * features + f];
        if (din) din[size_t(b) * features + f] += g * weight[size_t(k) * features + f];
      }
    }
}

template <typename T>
void relu_inplace(std::vector<T>& v) {
  for (T& x : v)
    if (x < T(0.0)) x = T(0.0);
}

}  // namespace detail

/// Forward pass; fills the trace needed by net_backward.
template <typename T>
void net_forward(const ModelSpec& spec, const T* params, const T* x, int batch,
                 ForwardTrace<T>& trace) {
  trace.batch = batch;
  trace.stages.clear();
  trace.conv_out.clear();
  trace.xhat.clear();
  trace.invstd.clear();
  trace.act.clear();

  if (spec.family == ModelFamily::convnet) {
    const bool affine = spec.norm == NormKind::instance_affine;
    trace.stages.emplace_back(x, x + size_t(batch) * spec.input.pixels());
    size_t off = 0;
    int cin = spec.input.c;
    for (int blk = 0; blk < spec.depth; ++blk) {
      const ImageShape sh = spec.stage_shape(blk);
      const int h = sh.h, w = sh.w, cout = spec.width;
      const T* weight = params + off;
      off += size_t(cout) * cin * 9;
      const T* bias = params + off;
      off += cout;

      std::vector<T> conv(size_t(batch) * h * w * cout);
      detail::conv3x3_forward(trace.stages[blk].data(), batch, h, w, cin, weight, bias, cout,
                              conv.data());
      std::vector<T> post;
      if (affine) {
        const T* scale = params + off;
        off += cout;
        const T* shift = params + off;
        off += cout;
        std::vector<T> xh(conv.size());
        std::vector<T> is(size_t(batch) * cout);
        post.resize(conv.size());
        detail::instnorm_forward(conv.data(), batch, h, w, cout, scale, shift, xh.data(),
                                 is.data(), post.data());
        trace.xhat.push_back(std::move(xh));
        trace.invstd.push_back(std::move(is));
      } else {
        post = conv;
      }
      trace.conv_out.push_back(std::move(conv));
      detail::relu_inplace(post);
      std::vector<T> pooled(size_t(batch) * (h / 2) * (w / 2) * cout);
      detail::avgpool2x2_forward(post.data(), batch, h, w, cout, pooled.data());
      trace.act.push_back(std::move(post));
      trace.stages.push_back(std::move(pooled));
      cin = cout;
    }
    const int features = int(spec.stage_shape(spec.depth).pixels());
    const T* weight = params + off;
    off += size_t(spec.num_classes) * features;
    const T* bias = params + off;
    trace.logits.assign(size_t(batch) * spec.num_classes, T(0.0));
    detail::linear_forward(trace.stages.back().data(), batch, features, weight, bias,
                           spec.num_classes, trace.logits.data());
  } else {
    trace.stages.emplace_back(x, x + size_t(batch) * spec.input.pixels());
    size_t off = 0;
    int in_dim = int(spec.input.pixels());
    for (int hdim : spec.hidden) {
      const T* weight = params + off;
      off += size_t(hdim) * in_dim;
      const T* bias = params + off;
      off += hdim;
      std::vector<T> out(size_t(batch) * hdim, T(0.0));
      detail::linear_forward(trace.stages.back().data(), batch, in_dim, weight, bias, hdim,
                             out.data());
      detail::relu_inplace(out);
      trace.stages.push_back(std::move(out));
      in_dim = hdim;
    }
    const T* weight = params + off;
    off += size_t(spec.num_classes) * in_dim;
    const T* bias = params + off;
    trace.logits.assign(size_t(batch) * spec.num_classes, T(0.0));
    detail::linear_forward(trace.stages.back().data(), batch, in_dim, weight, bias,
                           spec.num_classes, trace.logits.data());
  }
}

/// Backward pass from dlogits. Accumulates (+=) into dparams (length
/// param_count) and, when dx is non-null, into dx (length batch * input
/// pixels). Callers zero the buffers.
template <typename T>
void net_backward(const ModelSpec& spec, const T* params, const ForwardTrace<T>& trace,
                  const std::vector<T>& dlogits, T* dparams, T* dx) {
  const int batch = trace.batch;
  if (spec.family == ModelFamily::convnet) {
    const bool affine = spec.norm == NormKind::instance_affine;
    // Parameter offsets per block, recomputed in layout order.
    struct BlockOff {
      size_t weight, bias, scale, shift;
      int cin;
    };
    std::vector<BlockOff> offs(spec.depth);
    size_t off = 0;
    int cin = spec.input.c;
    for (int blk = 0; blk < spec.depth; ++blk) {
      offs[blk].cin = cin;
      offs[blk].weight = off;
      off += size_t(spec.width) * cin * 9;
      offs[blk].bias = off;
      off += spec.width;
      if (affine) {
        offs[blk].scale = off;
        off += spec.width;
        offs[blk].shift = off;
        off += spec.width;
      }
      cin = spec.width;
    }
    const int features = int(spec.stage_shape(spec.depth).pixels());
    const size_t fc_w = off;
    const size_t fc_b = off + size_t(spec.num_classes) * features;

    std::vector<T> dstage(size_t(batch) * features, T(0.0));
    detail::linear_backward(trace.stages.back().data(), batch, features, params + fc_w,
                            spec.num_classes, dlogits.data(), dparams + fc_w, dparams + fc_b,
                            dstage.data());

    for (int blk = spec.depth - 1; blk >= 0; --blk) {
      const ImageShape sh = spec.stage_shape(blk);
      const int h = sh.h, w = sh.w, cout = spec.width;
      // pool
      std::vector<T> dact(size_t(batch) * h * w * cout, T(0.0));
      detail::avgpool2x2_backward(dstage.data(), batch, h, w, cout, dact.data());
      // relu mask from post-activation values
      const auto& act = trace.act[blk];
      for (size_t i = 0; i < dact.size(); ++i)
        if (!(act[i] > T(0.0))) dact[i] = T(0.0);
      // norm
      std::vector<T> dconv;
      if (affine) {
        dconv.assign(dact.size(), T(0.0));
        detail::instnorm_backward(trace.xhat[blk].data(), trace.invstd[blk].data(), batch, h,
                                  w, cout, params + offs[blk].scale, dact.data(),
                                  dparams + offs[blk].scale, dparams + offs[blk].shift,
                                  dconv.data());
      } else {
        dconv = std::move(dact);
      }
      // conv
      const bool need_din = blk > 0 || dx != nullptr;
      std::vector<T> din;
      if (need_din) din.assign(size_t(batch) * h * w * offs[blk].cin, T(0.0));
      detail::conv3x3_backward(trace.stages[blk].data(), batch, h, w, offs[blk].cin,
                               params + offs[blk].weight, cout, dconv.data(),
                               dparams + offs[blk].weight, dparams + offs[blk].bias,
                               need_din ? din.data() : nullptr);
      dstage = std::move(din);
    }
    if (dx)
      for (size_t i = 0; i < dstage.size(); ++i) dx[i] += dstage[i];
  } else {
    std::vector<size_t> w_off(spec.hidden.size() + 1), b_off(spec.hidden.size() + 1);
    std::vector<int> dims;
    dims.push_back(int(spec.input.pixels()));
    for (int hdim : spec.hidden) dims.push_back(hdim);
    size_t off = 0;
    for (size_t l = 0; l < spec.hidden.size(); ++l) {
      w_off[l] = off;
      off += size_t(spec.hidden[l]) * dims[l];
      b_off[l] = off;
      off += spec.hidden[l];
    }
    w_off.back() = off;
    off += size_t(spec.num_classes) * dims.back();
    b_off.back() = off;

    std::vector<T> dstage(size_t(batch) * dims.back(), T(0.0));
    detail::linear_backward(trace.stages.back().data(), batch, dims.back(),
                            params + w_off.back(), spec.num_classes, dlogits.data(),
                            dparams + w_off.back(), dparams + b_off.back(), dstage.data());
    for (int l = int(spec.hidden.size()) - 1; l >= 0; --l) {
      const auto& act = trace.stages[l + 1];
      for (size_t i = 0; i < dstage.size(); ++i)
        if (!(act[i] > T(0.0))) dstage[i] = T(0.0);
      const bool need_din = l > 0 || dx != nullptr;
      std::vector<T> din;
      if (need_din) din.assign(size_t(batch) * dims[l], T(0.0));
      detail::linear_backward(trace.stages[l].data(), batch, dims[l], params + w_off[l],
                              spec.hidden[l], dstage.data(), dparams + w_off[l],
                              dparams + b_off[l], need_din ? din.data() : nullptr);
      dstage = std::move(din);
    }
    if (dx)
      for (size_t i = 0; i < dstage.size(); ++i) dx[i] += dstage[i];
  }
}

/// Mean cross-entropy over the batch with a stable log-sum-exp; fills
/// dlogits with (softmax - onehot) / batch when requested.
template <typename T>
T softmax_xent_mean(const std::vector<T>& logits, const std::vector<int>& labels,
                    int num_classes, std::vector<T>* dlogits) {
  const int batch = int(labels.size());
  if (dlogits) dlogits->assign(logits.size(), T(0.0));
  T total = T(0.0);
  const T inv_b = T(1.0 / double(batch));
  for (int b = 0; b < batch; ++b) {
    const T* l = logits.data() + size_t(b) * num_classes;
    int arg = 0;
    for (int k = 1; k < num_classes; ++k)
      if (l[k] > l[arg]) arg = k;
    T sum = T(0.0);
    for (int k = 0; k < num_classes; ++k) sum += exp(l[k] - l[arg]);
    const T lse = l[arg] + log(sum);
    total += (lse - l[labels[b]]) * inv_b;
    if (dlogits) {
      T* d = dlogits->data() + size_t(b) * num_classes;
      for (int k = 0; k < num_classes; ++k) d[k] = exp(l[k] - lse) * inv_b;
      d[labels[b]] -= inv_b;
    }
  }
  return total;
}

}  // namespace mat
