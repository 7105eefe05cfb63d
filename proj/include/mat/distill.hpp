#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mat/binio.hpp"
#include "mat/data.hpp"
#include "mat/expert.hpp"
#include "mat/model.hpp"
#include "mat/rng.hpp"

namespace mat {

/// Learnable synthetic dataset: images (class-major, ipc per class), fixed
/// one-hot-per-class-block labels, and a learnable student learning rate.
/// Pixels live in [0,1] and are float32-quantized after every optimizer
/// step so the MATS container round-trips bit-exactly.
struct SyntheticDataset {
  ImageBatch images;
  std::vector<int> labels;
  int num_classes = 0;
  int ipc = 0;
  double inner_lr = 0.01;
  MetaDoc meta;

  int count() const { return images.count; }
  void validate() const;
  uint64_t digest() const;
};

enum class InitStrategy { real, noise };

SyntheticDataset init_synthetic(const RawDataset& source, int ipc, InitStrategy strategy,
                                double inner_lr, uint64_t seed);

struct MatchConfig {
  int max_start_epoch = 10;    // T: start epochs sampled from {0..T-1}
  int target_offset = 2;       // M: expert epochs between start and target
  int max_student_steps = 8;   // N_max
  int student_batch = 256;
  double syn_lr = 0.1;         // learning rate for images
  double lr_lr = 1e-5;         // learning rate for inner_lr
  double syn_momentum = 0.5;
  int iterations = 500;
  double degenerate_eps = 1e-12;  // minimum ||theta_target - theta_start||^2
  int retry_limit = 16;
  Track track = Track::ema;    // which expert track to match

  void validate(int expert_epochs) const;
};

/// Recorded unroll of student SGD on the synthetic set: thetas[k] is the
/// parameter vector after step k+1, batches[k] the synthetic sample indices
/// consumed by that step. Full-batch whenever |S| <= student_batch.
struct StudentUnroll {
  std::vector<std::vector<double>> thetas;
  std::vector<std::vector<int>> batches;
};

StudentUnroll student_unroll(const SyntheticDataset& s, const ParamVector& theta_start,
                             const ModelSpec& spec, int n_steps, int student_batch, Rng& rng);

/// ||theta_student - theta_target||^2 / ||theta_target - theta_start||^2.
/// Throws Error(degenerate_segment) when the denominator is below
/// degenerate_eps.
double match_loss(const std::vector<double>& theta_student,
                  const std::vector<double>& theta_target,
                  const std::vector<double>& theta_start, double degenerate_eps);

struct AttSelection {
  int n_star = 0;        // 1-based step index, ties toward the smallest
  double distance_sq = 0.0;
};

AttSelection att_select(const std::vector<std::vector<double>>& thetas,
                        const std::vector<double>& theta_target);

/// Meta-gradients of the match loss at unroll step n_star with respect to
/// every synthetic pixel and the inner learning rate, computed by a reverse
/// sweep over the recorded unroll with one dual-number forward/backward per
/// step (Hessian-vector and mixed products in a single pass).
struct MetaGrads {
  double loss = 0.0;
  std::vector<double> image_grad;  // same layout as s.images.pixels
  double inner_lr_grad = 0.0;
};

MetaGrads match_meta_gradients(const SyntheticDataset& s, const ModelSpec& spec,
                               const std::vector<double>& theta_start,
                               const std::vector<double>& theta_target,
                               const StudentUnroll& unroll, int n_star, double degenerate_eps);

struct DistillStats {
  int iteration = 0;
  double loss = 0.0;
  int start_epoch = 0;   // sampled t
  int n_star = 0;
  int buffer_id = 0;
  double inner_lr = 0.0;
};

/// Owns the synthetic set, the image/lr momentum state, and the sampling
/// stream; one step() is one distillation iteration.
class Distiller {
 public:
  Distiller(SyntheticDataset s, const std::vector<TrajectoryBuffer>& buffers, MatchConfig cfg,
            uint64_t seed);

  DistillStats step();
  const SyntheticDataset& synthetic() const { return s_; }
  SyntheticDataset& synthetic() { return s_; }
  int iterations_done() const { return iteration_; }

 private:
  SyntheticDataset s_;
  const std::vector<TrajectoryBuffer>& buffers_;
  MatchConfig cfg_;
  ModelSpec spec_;
  Rng rng_;
  std::vector<double> image_velocity_;
  double lr_velocity_ = 0.0;
  int iteration_ = 0;
};

std::string distill_stats_csv_header();
std::string distill_stats_csv_row(const DistillStats& stats);

void save_synthetic(const SyntheticDataset& s, const std::string& path);
SyntheticDataset load_synthetic(const std::string& path, bool verify_digest = false);
std::string encode_synthetic(const SyntheticDataset& s);
SyntheticDataset decode_synthetic(const std::string& bytes, const std::string& label,
                                  bool verify_digest = false);

}  // namespace mat
