#pragma once

#include "autr/encoders.hpp"

namespace autr {

struct FusedPyramid {
  std::array<Tensor, 3> scales;  // [T, C_av, H_l, W_l]
};

struct ScaleRecord {
  int64_t offset, h, w;
};

struct EncodedFeatures {
  Tensor tokens;  // [T, L, C_av], L = sum of H_l * W_l
  std::array<ScaleRecord, 3> scale_offsets;
};

struct QuerySet {
  Tensor content;    // [T, N_q, D]; audio-initialized
  Tensor query_pos;  // [N_q, D] learnable, audio-independent
};

struct DecoderOutput {
  Tensor embeddings;  // [T, N_q, D]
};

void init_avef(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_encoder(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_queries(ParamStore& params, const ModelDims& dims, Rng& rng);
void init_decoder(ParamStore& params, const ModelDims& dims, Rng& rng);

/// Multi-head attention: tokens of q_in attend to kv_in. Parameter names
/// are <prefix>.{wq,wk,wv,wo}.{w,b}.
Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, const ParamStore& params,
                            const std::string& prefix, int64_t heads);

/// Fixed 2-D sinusoidal position encoding, [H*W, C].
Tensor make_position_encoding(int64_t h, int64_t w, int64_t c);

/// Per-scale cross-attention from pixel tokens to the frame's audio token;
/// pre-norm residual, so a zero output projection is an exact identity.
FusedPyramid avef_fuse(const VisualPyramid& pyramid,
                       const AudioEmbedding& audio, const ParamStore& params,
                       const ModelDims& dims);

/// Flatten + position/level embeddings + per-frame self-attention stack.
EncodedFeatures encode(const FusedPyramid& fused, const ParamStore& params,
                       const ModelDims& dims);

/// Audio-initialized query content plus learnable positions.
QuerySet make_queries(const AudioEmbedding& audio, const ParamStore& params,
                      const ModelDims& dims);

/// Standard decoder stack: query self-attention, cross-attention into the
/// encoded tokens, feed-forward.
DecoderOutput decode(const QuerySet& queries, const EncodedFeatures& memory,
                     const ParamStore& params, const ModelDims& dims);

}  // namespace autr
