#include "autr/metrics.hpp"

#include <cmath>
#include <fstream>

#include "autr/ops.hpp"

namespace autr {

double iou(const Tensor& pred, const Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw ContractError("iou: shapes " + shape_str(pred.shape()) + " and " +
                        shape_str(gt.shape()) + " differ");
  }
  int64_t inter = 0, uni = 0;
  const auto& p = pred.data();
  const auto& g = gt.data();
  for (size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] > 0.5, b = g[i] > 0.5;
    inter += (a && b);
    uni += (a || b);
  }
  if (uni == 0) return 1.0;  // both empty: correct emptiness
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double f_score(const Tensor& pred_prob, const Tensor& gt, double beta_sq,
               double threshold) {
  if (pred_prob.shape() != gt.shape()) {
    throw ContractError("f_score: shapes " + shape_str(pred_prob.shape()) +
                        " and " + shape_str(gt.shape()) + " differ");
  }
  int64_t tp = 0, fp = 0, fn = 0;
  const auto& p = pred_prob.data();
  const auto& g = gt.data();
  for (size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] >= threshold, b = g[i] > 0.5;
    tp += (a && b);
    fp += (a && !b);
    fn += (!a && b);
  }
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  const double precision = static_cast<double>(tp) / (tp + fp);
  const double recall = static_cast<double>(tp) / (tp + fn);
  const double den = beta_sq * precision + recall;
  if (den == 0.0) return 0.0;
  return (1.0 + beta_sq) * precision * recall / den;
}

InferenceOutput infer_scene(const Model& model, const VideoClip& video,
                            const AudioClip& audio) {
  NoGradGuard no_grad;
  ForwardResult out = model.forward(video, audio);
  const Tensor& logits = out.mask_logits.logits;  // [N_q, T, H_lr, W_lr]
  const Tensor& scores = out.scores.scores;       // [T, N_q]
  const int64_t Nq = logits.size(0), T = logits.size(1);
  const int64_t H0 = video.frames.size(2), W0 = video.frames.size(3);

  Tensor mask_prob = Tensor::zeros({T, H0, W0});
  Tensor sounding_prob = Tensor::zeros({T});
  for (int64_t t = 0; t < T; ++t) {
    int64_t best = 0;
    for (int64_t i = 1; i < Nq; ++i)
      if (scores.at({t, i}) > scores.at({t, best})) best = i;
    Tensor frame =
        reshape(slice(reshape(slice(logits, 0, best, 1),
                              {T, logits.size(2), logits.size(3)}),
                      0, t, 1),
                {1, logits.size(2), logits.size(3)});
    Tensor up = sigmoid(bilinear_resize(frame, H0, W0));
    std::copy(up.data().begin(), up.data().end(),
              mask_prob.data().begin() + t * H0 * W0);
    sounding_prob.data()[t] =
        1.0 / (1.0 + std::exp(-scores.at({t, best})));
  }
  return {mask_prob, sounding_prob};
}

EvalResult evaluate(const Model& model, const std::vector<TrainScene>& scenes,
                    const EvalOptions& opts) {
  EvalResult result;
  double sum_iou = 0.0, sum_f = 0.0;
  for (const auto& sc : scenes) {
    InferenceOutput out = infer_scene(model, sc.video, sc.audio);
    const int64_t T = out.mask_prob.size(0);
    const int64_t H0 = out.mask_prob.size(1), W0 = out.mask_prob.size(2);
    for (int64_t t = 0; t < T; ++t) {
      Tensor prob = reshape(slice(out.mask_prob, 0, t, 1), {H0, W0});
      Tensor gt_t = reshape(slice(sc.gt.mask, 0, t, 1), {H0, W0});
      // Binarize at the threshold for IoU.
      Tensor pred_bin = Tensor::zeros({H0, W0});
      for (int64_t i = 0; i < H0 * W0; ++i)
        pred_bin.data()[i] = prob.data()[i] >= opts.threshold ? 1.0 : 0.0;
      const double j = iou(pred_bin, gt_t);
      const double f = f_score(prob, gt_t, opts.beta_sq, opts.threshold);
      sum_iou += j;
      sum_f += f;
      result.per_frame.emplace_back(j, f);
      ++result.num_frames;
    }
  }
  if (result.num_frames > 0) {
    sum_iou /= result.num_frames;
    sum_f /= result.num_frames;
  }
  result.m_j = 100.0 * sum_iou;
  result.m_f = sum_f;
  return result;
}

void write_report(const std::string& path, const EvalResult& result) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report file: " + path);
  out << "m_j=" << result.m_j << "\n";
  out << "m_f=" << result.m_f << "\n";
  out << "num_frames=" << result.num_frames << "\n";
}

}  // namespace autr
