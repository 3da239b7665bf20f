#pragma once

#include "autr/transformer.hpp"

namespace autr {

struct MaskFeatures {
  Tensor features;  // [T, C_m, H_m, W_m], H_m = H0/4
};

struct KernelSet {
  Tensor kernels;  // [T, N_q, D_s], D_s = C_m + 1 (weights + bias)
};

struct MaskLogits {
  Tensor logits;  // [N_q, T, H_lr, W_lr], raw pre-sigmoid
};

struct SoundingScores {
  Tensor scores;  // [T, N_q], raw logits of sounding probability
};

void init_pixel_decoder(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_kernel_head(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_sounding_head(ParamStore& params, const ModelDims& dims, Rng& rng);

/// FPN-style top-down aggregation of the encoder tokens and the raw visual
/// pyramid; one audio cross-attention at the finest level, then a 1x1
/// projection to C_m channels.
MaskFeatures pixel_decode(const VisualPyramid& pyramid,
                          const AudioEmbedding& audio,
                          const EncodedFeatures& encoded,
                          const ParamStore& params, const ModelDims& dims);

/// Shared 2-layer MLP from each query embedding to D_s kernel values.
KernelSet generate_kernels(const DecoderOutput& decoded,
                           const ParamStore& params, const ModelDims& dims);

/// 1x1 dynamic convolution with bias:
/// logits[i,t,h,w] = sum_c k[t,i,c] * f[t,c,h,w] + k[t,i,C_m].
MaskLogits dynamic_convolve(const MaskFeatures& masks_in,
                            const KernelSet& kernels);

/// Shared linear map D -> 1 per (frame, query).
SoundingScores sounding_head(const DecoderOutput& decoded,
                             const ParamStore& params, const ModelDims& dims);

}  // namespace autr
