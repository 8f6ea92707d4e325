#pragma once

#include <functional>
#include <string>

#include "wblift/checkpoint.hpp"
#include "wblift/data.hpp"
#include "wblift/losses.hpp"
#include "wblift/metrics.hpp"
#include "wblift/model.hpp"

namespace wblift {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 200;
  double base_lr = 1e-3;
  double min_lr = 0.0;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // 0 = off
  uint64_t seed = 0;
  LossWeights loss_weights;
  int eval_interval = 10;        // epochs between periodic checkpoints
  std::string checkpoint_dir = "checkpoints";
  ModelConfig model;

  void validate() const;
  static TrainConfig from_json_file(const std::string& path);
  std::string to_json() const;
};

/// Cosine annealing: min_lr + 0.5 (base - min)(1 + cos(pi step/total)).
double cosine_lr(long step, long total_steps, double base_lr, double min_lr);

/// Adam with decoupled weight decay (decay applied directly to parameters).
class AdamW {
 public:
  AdamW(const ParamRefs& params, double beta1, double beta2, double eps);

  void step(const ParamRefs& params, double lr, double weight_decay);

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct TrainResult {
  std::string checkpoint_path;
  std::string log_path;
  LossReport first_report;
  LossReport final_report;
  long steps = 0;
};

/// Full training run: deterministic per seed (init, data order, dropout).
/// Writes a JSONL loss log and periodic + final checkpoints. Aborts on a
/// non-finite loss, preserving the last-good checkpoint.
TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const SkeletonTopology& topo,
                  const std::string& topology_version);

/// Maps a batch of normalized 2D poses to 3D predictions.
using Predictor =
    std::function<PoseBatch(const std::vector<Pose2d>& norm_2d)>;

Predictor make_model_predictor(Model& model, const SkeletonTopology& topo);

/// prediction = model(x), or with TTA the average of model(x) and the
/// un-flipped prediction on the flipped input.
PoseBatch predict_with_tta(const Predictor& predictor,
                           const std::vector<Pose2d>& norm_2d,
                           const SkeletonTopology& topo, bool tta);

MetricReport evaluate_with_tta(const Predictor& predictor, const Dataset& ds,
                               const SkeletonTopology& topo, bool tta,
                               int batch_size = 200);

}  // namespace wblift
