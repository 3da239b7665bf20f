#include "autr/objective.hpp"

#include <cmath>
#include <numeric>

#include "autr/ops.hpp"

namespace autr {

CostWeights CostWeights::from_config(const Config& cfg) {
  CostWeights w;
  w.lambda_dice = cfg.get_double("lambda_dice");
  w.lambda_focal = cfg.get_double("lambda_focal");
  w.lambda_sound = cfg.get_double("lambda_sound");
  w.focal_gamma = cfg.get_double("focal_gamma");
  w.focal_alpha = cfg.get_double("focal_alpha");
  w.dice_eps = cfg.get_double("dice_eps");
  return w;
}

Tensor dice_cost(const Tensor& pred_logits, const Tensor& gt, double eps) {
  if (pred_logits.shape() != gt.shape()) {
    throw ContractError("dice_cost: prediction " +
                        shape_str(pred_logits.shape()) + " vs ground truth " +
                        shape_str(gt.shape()));
  }
  Tensor p = sigmoid(pred_logits);
  Tensor num = add_scalar(scale(sum(mul(p, gt)), 2.0), eps);
  Tensor den = add_scalar(add(sum(p), sum(gt)), eps);
  return add_scalar(neg(div(num, den)), 1.0);
}

Tensor focal_cost(const Tensor& pred_logits, const Tensor& gt, double gamma,
                  double alpha) {
  if (pred_logits.shape() != gt.shape()) {
    throw ContractError("focal_cost: prediction " +
                        shape_str(pred_logits.shape()) + " vs ground truth " +
                        shape_str(gt.shape()));
  }
  // s = logits for y=1, -logits for y=0; then p_t = sigmoid(s) and the loss
  // is -alpha_t (1 - p_t)^gamma log p_t, all via log-sigmoid for stability.
  const int64_t n = gt.numel();
  std::vector<double> sign(n), alpha_t(n);
  const auto& y = gt.data();
  for (int64_t i = 0; i < n; ++i) {
    sign[i] = y[i] > 0.5 ? 1.0 : -1.0;
    alpha_t[i] = y[i] > 0.5 ? alpha : 1.0 - alpha;
  }
  Tensor s = mul(pred_logits, Tensor::from_data(gt.shape(), std::move(sign)));
  Tensor log_pt = logsigmoid(s);
  Tensor modulator = exp(scale(logsigmoid(neg(s)), gamma));  // (1 - p_t)^gamma
  Tensor at = Tensor::from_data(gt.shape(), std::move(alpha_t));
  return scale(mean(mul(at, mul(modulator, log_pt))), -1.0);
}

Tensor sounding_cost(const Tensor& scores, const std::vector<bool>& present) {
  if (scores.numel() != static_cast<int64_t>(present.size())) {
    throw ContractError("sounding_cost: " + std::to_string(scores.numel()) +
                        " scores vs " + std::to_string(present.size()) +
                        " labels");
  }
  const int64_t n = scores.numel();
  std::vector<double> ypos(n), yneg(n);
  for (int64_t i = 0; i < n; ++i) {
    ypos[i] = present[i] ? 1.0 : 0.0;
    yneg[i] = present[i] ? 0.0 : 1.0;
  }
  Tensor pos = mul(Tensor::from_data(scores.shape(), std::move(ypos)),
                   logsigmoid(scores));
  Tensor negt = mul(Tensor::from_data(scores.shape(), std::move(yneg)),
                    logsigmoid(neg(scores)));
  return scale(mean(add(pos, negt)), -1.0);
}

CostReport total_cost(const MaskLogits& masks, const SoundingScores& scores,
                      const GroundTruth& gt, const CostWeights& w) {
  const Tensor& logits = masks.logits;
  const int64_t Nq = logits.size(0), T = logits.size(1);
  const int64_t Hl = logits.size(2), Wl = logits.size(3);
  if (gt.mask.dim() != 3 || gt.mask.size(0) != T) {
    throw ContractError("total_cost: ground truth " +
                        shape_str(gt.mask.shape()) + " vs logits " +
                        shape_str(logits.shape()));
  }
  Tensor gt_lr = nearest_resize(gt.mask, Hl, Wl);

  CostReport report;
  for (int64_t i = 0; i < Nq; ++i) {
    Tensor pred = reshape(slice(logits, 0, i, 1), {T, Hl, Wl});
    Tensor score_i = reshape(slice(scores.scores, 1, i, 1), {T});
    Tensor d = dice_cost(pred, gt_lr, w.dice_eps);
    Tensor f = focal_cost(pred, gt_lr, w.focal_gamma, w.focal_alpha);
    Tensor s = sounding_cost(score_i, gt.present);
    Tensor total = add(add(scale(d, w.lambda_dice), scale(f, w.lambda_focal)),
                       scale(s, w.lambda_sound));
    report.components.push_back({d.value(), f.value(), s.value()});
    report.per_query.push_back(total.value());
    report.totals.push_back(std::move(total));
  }
  return report;
}

MatchResult match(const CostReport& report) {
  if (report.per_query.empty())
    throw ContractError("match: empty cost report");
  int64_t best = 0;
  for (size_t i = 1; i < report.per_query.size(); ++i)
    if (report.per_query[i] < report.per_query[best])
      best = static_cast<int64_t>(i);
  return {best, report.per_query[best]};
}

namespace {

void check_finite(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v))
      throw ContractError(std::string("non-finite values in ") + what);
  }
}

// Matched cost plus (optionally) negative sounding supervision of the
// unmatched queries. Matching itself is a pure argmin over detached values.
Tensor scene_loss(const ForwardResult& out, const GroundTruth& gt,
                  const TrainStepOptions& opts, MatchResult* match_out) {
  check_finite(out.mask_logits.logits, "mask_logits");
  check_finite(out.scores.scores, "sounding scores");
  CostReport report = total_cost(out.mask_logits, out.scores, gt, opts.weights);
  const MatchResult m = match(report);
  if (match_out) *match_out = m;
  Tensor loss = report.totals[m.index];
  const int64_t Nq = static_cast<int64_t>(report.totals.size());
  if (opts.negative_sounding && Nq > 1) {
    const std::vector<bool> silent(gt.present.size(), false);
    Tensor negsum;
    for (int64_t i = 0; i < Nq; ++i) {
      if (i == m.index) continue;
      Tensor score_i = reshape(slice(out.scores.scores, 1, i, 1),
                               {out.scores.scores.size(0)});
      Tensor c = sounding_cost(score_i, silent);
      negsum = negsum.defined() ? add(negsum, c) : c;
    }
    loss = add(loss, scale(negsum, opts.weights.lambda_sound / (Nq - 1)));
  }
  check_finite(loss, "loss");
  return loss;
}

}  // namespace

double training_step(Model& model, const VideoClip& video,
                     const AudioClip& audio, const GroundTruth& gt,
                     const TrainStepOptions& opts, AdamW& optimizer) {
  ForwardResult out = model.forward(video, audio);
  MatchResult m{};
  Tensor loss = scene_loss(out, gt, opts, &m);
  backward(loss);
  optimizer.step(model.params());
  return m.cost;
}

double train(Model& model, const std::vector<TrainScene>& scenes,
             const TrainOptions& opts, AdamW& optimizer) {
  if (scenes.empty()) throw ContractError("train: no scenes");
  Rng rng(opts.shuffle_seed);
  std::vector<size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), 0);
  double epoch_mean = 0.0;
  for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fisher-Yates with the deterministic rng.
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j =
          static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    double sum_cost = 0.0;
    int64_t in_batch = 0;
    for (size_t n = 0; n < order.size(); ++n) {
      const TrainScene& sc = scenes[order[n]];
      ForwardResult out = model.forward(sc.video, sc.audio);
      Tensor loss = scene_loss(out, sc.gt, opts.step, nullptr);
      // Mean over the batch.
      backward(scale(loss, 1.0 / opts.batch_size));
      sum_cost += loss.value();
      ++in_batch;
      if (in_batch == opts.batch_size || n + 1 == order.size()) {
        optimizer.step(model.params());
        in_batch = 0;
      }
    }
    epoch_mean = sum_cost / scenes.size();
    if (opts.on_epoch) opts.on_epoch(epoch, epoch_mean);
    optimizer.options().lr *= opts.lr_decay;
  }
  return epoch_mean;
}

}  // namespace autr
