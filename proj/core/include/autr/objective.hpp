#pragma once

#include <array>
#include <functional>

#include "autr/model.hpp"
#include "autr/optim.hpp"

namespace autr {

struct CostWeights {
  double lambda_dice = 1.0;
  double lambda_focal = 1.0;
  double lambda_sound = 1.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_eps = 1.0;

  static CostWeights from_config(const Config& cfg);
};

struct GroundTruth {
  Tensor mask;                 // [T, H0, W0], values exactly in {0, 1}
  std::vector<bool> present;   // sounding object present, per frame
};

/// Eq.-style per-query cost decomposition. totals keep the graph so the
/// matched query's cost can be backpropagated.
struct CostReport {
  std::vector<Tensor> totals;                     // scalar, one per query
  std::vector<double> per_query;                  // values of totals
  std::vector<std::array<double, 3>> components;  // (dice, focal, sound)
};

struct MatchResult {
  int64_t index;
  double cost;
};

/// 1 - (2 sum(p y) + eps) / (sum p + sum y + eps), p = sigmoid(logits),
/// summed over all pixels and frames jointly.
Tensor dice_cost(const Tensor& pred_logits, const Tensor& gt, double eps);

/// Mean binary focal loss over pixels (standard alpha/gamma form).
Tensor focal_cost(const Tensor& pred_logits, const Tensor& gt, double gamma,
                  double alpha);

/// Mean BCE between sigmoid(score) and per-frame presence labels.
Tensor sounding_cost(const Tensor& scores, const std::vector<bool>& present);

/// Per-query weighted cost; the ground-truth mask is downsampled to the
/// logit resolution by nearest neighbor.
CostReport total_cost(const MaskLogits& masks, const SoundingScores& scores,
                      const GroundTruth& gt, const CostWeights& w);

/// Argmin over queries; ties break to the lowest index.
MatchResult match(const CostReport& report);

struct TrainStepOptions {
  CostWeights weights;
  /// Supervise unmatched queries' sounding scores toward "not sounding".
  bool negative_sounding = false;
};

/// Forward -> per-query cost -> match -> backward of the matched cost only
/// -> optimizer step. Returns the matched cost.
double training_step(Model& model, const VideoClip& video,
                     const AudioClip& audio, const GroundTruth& gt,
                     const TrainStepOptions& opts, AdamW& optimizer);

/// Scene tuple used by the trainer and evaluator.
struct TrainScene {
  VideoClip video;
  AudioClip audio;
  GroundTruth gt;
};

struct TrainOptions {
  TrainStepOptions step;
  int64_t epochs = 50;
  int64_t batch_size = 8;
  uint64_t shuffle_seed = 0;
  /// Multiplies the optimizer's learning rate after every epoch.
  double lr_decay = 1.0;
  /// Called after each epoch with (epoch, mean matched cost).
  std::function<void(int64_t, double)> on_epoch;
};

/// Shuffled mini-batch training; gradients accumulate over a batch before
/// each optimizer step. Returns the last epoch's mean matched cost.
double train(Model& model, const std::vector<TrainScene>& scenes,
             const TrainOptions& opts, AdamW& optimizer);

}  // namespace autr
