#pragma once

#include <array>

#include "autr/config.hpp"
#include "autr/params.hpp"

namespace autr {

/// Architecture hyperparameters shared by every module of the network.
struct ModelDims {
  int64_t image_size = 64;   // H0 = W0
  int64_t frames = 2;        // T
  int64_t audio_size = 32;   // H_a = W_a
  int64_t audio_channels = 32;  // C_a
  int64_t fusion_dim = 64;   // C_av
  int64_t model_dim = 64;    // D
  int64_t pyr_c1 = 32, pyr_c2 = 48, pyr_c3 = 64;
  int64_t num_queries = 4;
  int64_t heads = 4;
  int64_t enc_layers = 2;
  int64_t dec_layers = 2;
  int64_t ffn_dim = 128;
  int64_t mask_channels = 32;  // C_m
  int64_t audio_enc_depth = 2;
  bool audio_queries = true;

  static ModelDims from_config(const Config& cfg);
  int64_t kernel_dim() const { return mask_channels + 1; }  // D_s
};

struct VideoClip {
  Tensor frames;  // [T, 3, H0, W0], values in [0, 1]
};

struct AudioClip {
  Tensor spectrograms;  // [T, H_a, W_a]
};

struct VisualPyramid {
  std::array<Tensor, 3> scales;  // strides 4, 8, 16
};

struct AudioEmbedding {
  Tensor vectors;  // [T, C_a] (or [T, C_av] after projection)
};

void init_visual_encoder(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_audio_encoder(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_projections(ParamStore& params, const ModelDims& dims, Rng& rng);

/// Strided 3x3 conv stack with GELU + layer norm, taps at strides 4/8/16.
VisualPyramid encode_visual(const VideoClip& clip, const ParamStore& params,
                            const ModelDims& dims);

/// Conv stack over each spectrogram, then global average pool to C_a dims.
AudioEmbedding encode_audio(const AudioClip& clip, const ParamStore& params,
                            const ModelDims& dims);

/// 1x1 convs per scale and a 2-layer MLP map everything to C_av.
void project_features(const VisualPyramid& pyramid, const AudioEmbedding& audio,
                      const ParamStore& params, const ModelDims& dims,
                      VisualPyramid* pyramid_out, AudioEmbedding* audio_out);

}  // namespace autr
