#pragma once

#include "autr/objective.hpp"

namespace autr {

struct EvalResult {
  double m_j = 0.0;  // mean IoU x 100
  double m_f = 0.0;  // mean F-score in [0, 1]
  int64_t num_frames = 0;
  std::vector<std::pair<double, double>> per_frame;  // (iou, f)
};

/// |pred n gt| / |pred u gt|; 1.0 when both masks are empty.
double iou(const Tensor& pred, const Tensor& gt);

/// Binarize at threshold, then F_beta = (1+b2) P R / (b2 P + R); 0 when the
/// denominator vanishes.
double f_score(const Tensor& pred_prob, const Tensor& gt, double beta_sq,
               double threshold);

struct EvalOptions {
  double beta_sq = 0.3;
  double threshold = 0.5;
};

/// Per frame: pick the query with the highest sounding score, bilinearly
/// upsample its logits to full resolution, sigmoid, then score against the
/// ground truth.
EvalResult evaluate(const Model& model, const std::vector<TrainScene>& scenes,
                    const EvalOptions& opts = {});

/// Plain-text key=value report (m_j, m_f, num_frames).
void write_report(const std::string& path, const EvalResult& result);

/// Full-resolution per-frame mask probabilities of the selected query,
/// [T, H0, W0], plus the selected sounding probability per frame.
struct InferenceOutput {
  Tensor mask_prob;
  Tensor sounding_prob;  // [T]
};
InferenceOutput infer_scene(const Model& model, const VideoClip& video,
                            const AudioClip& audio);

}  // namespace autr
