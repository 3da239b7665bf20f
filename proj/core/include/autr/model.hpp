#pragma once

#include "autr/mask_head.hpp"

namespace autr {

/// End-to-end forward result; intermediate stages are kept for tests and
/// diagnostics.
struct ForwardResult {
  VisualPyramid pyramid;        // backbone scales
  AudioEmbedding audio;         // pooled audio, C_a
  VisualPyramid pyramid_av;     // projected to C_av
  AudioEmbedding audio_av;      // projected to C_av
  FusedPyramid fused;
  EncodedFeatures encoded;
  QuerySet queries;
  DecoderOutput decoded;
  MaskFeatures mask_features;
  KernelSet kernels;
  MaskLogits mask_logits;       // [N_q, T, H_lr, W_lr]
  SoundingScores scores;        // [T, N_q]
};

class Model {
 public:
  Model(const ModelDims& dims, uint64_t seed);

  ForwardResult forward(const VideoClip& video, const AudioClip& audio) const;

  const ModelDims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  void save_checkpoint(const std::string& path) const;
  /// Rebuilds a model from the checkpoint's embedded dims; every expected
  /// parameter must be present with a matching shape.
  static Model load_checkpoint(const std::string& path);
  /// Loads parameters into this model; dims must agree with the checkpoint.
  void load_parameters(const std::string& path);

 private:
  ModelDims dims_;
  ParamStore params_;
};

}  // namespace autr
