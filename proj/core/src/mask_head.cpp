#include "autr/mask_head.hpp"

#include "autr/ops.hpp"

namespace autr {

namespace {

void init_conv1x1(ParamStore& p, const std::string& prefix, int64_t cin,
                  int64_t cout, Rng& rng) {
  p.create_xavier(prefix + ".w", {cout, cin}, cin, cout, rng);
  p.create_const(prefix + ".b", {cout}, 0.0);
}

void init_conv3x3(ParamStore& p, const std::string& prefix, int64_t cin,
                  int64_t cout, Rng& rng) {
  p.create_xavier(prefix + ".w", {cout, cin, 3, 3}, cin * 9, cout * 9, rng);
  p.create_const(prefix + ".b", {cout}, 0.0);
}

void init_linear(ParamStore& p, const std::string& prefix, int64_t d_in,
                 int64_t d_out, Rng& rng) {
  p.create_xavier(prefix + ".w", {d_in, d_out}, d_in, d_out, rng);
  p.create_const(prefix + ".b", {d_out}, 0.0);
}

Tensor conv1x1(const Tensor& x, const ParamStore& p,
               const std::string& prefix) {
  return conv2d_1x1(x, p.get(prefix + ".w"), p.get(prefix + ".b"));
}

// Unflatten one scale's token block back to a [T, C, H, W] map.
Tensor unflatten_scale(const EncodedFeatures& enc, int l, int64_t c) {
  const ScaleRecord& rec = enc.scale_offsets[l];
  const int64_t T = enc.tokens.size(0);
  if (rec.offset + rec.h * rec.w > enc.tokens.size(1)) {
    throw ContractError("pixel_decode: scale record [offset " +
                        std::to_string(rec.offset) + ", " +
                        std::to_string(rec.h) + "x" + std::to_string(rec.w) +
                        "] exceeds token count " +
                        std::to_string(enc.tokens.size(1)));
  }
  Tensor t = slice(enc.tokens, 1, rec.offset, rec.h * rec.w);
  return reshape(permute(t, {0, 2, 1}), {T, c, rec.h, rec.w});
}

}  // namespace

void init_pixel_decoder(ParamStore& p, const ModelDims& d, Rng& rng) {
  const int64_t pc[3] = {d.pyr_c1, d.pyr_c2, d.pyr_c3};
  for (int l = 0; l < 3; ++l) {
    const std::string n = std::to_string(l + 1);
    init_conv1x1(p, "px.enc_lat" + n, d.fusion_dim, d.fusion_dim, rng);
    init_conv1x1(p, "px.pyr_lat" + n, pc[l], d.fusion_dim, rng);
  }
  init_conv3x3(p, "px.smooth1", d.fusion_dim, d.fusion_dim, rng);
  init_conv3x3(p, "px.smooth2", d.fusion_dim, d.fusion_dim, rng);
  p.create_const("px.audio_attn.lnq.g", {d.fusion_dim}, 1.0);
  p.create_const("px.audio_attn.lnq.b", {d.fusion_dim}, 0.0);
  p.create_const("px.audio_attn.lnkv.g", {d.fusion_dim}, 1.0);
  p.create_const("px.audio_attn.lnkv.b", {d.fusion_dim}, 0.0);
  init_linear(p, "px.audio_attn.wq", d.fusion_dim, d.fusion_dim, rng);
  init_linear(p, "px.audio_attn.wk", d.fusion_dim, d.fusion_dim, rng);
  init_linear(p, "px.audio_attn.wv", d.fusion_dim, d.fusion_dim, rng);
  p.create_const("px.audio_attn.wo.w", {d.fusion_dim, d.fusion_dim}, 0.0);
  p.create_const("px.audio_attn.wo.b", {d.fusion_dim}, 0.0);
  init_conv1x1(p, "px.out", d.fusion_dim, d.mask_channels, rng);
}

void init_kernel_head(ParamStore& p, const ModelDims& d, Rng& rng) {
  init_linear(p, "kernel.fc1", d.model_dim, d.model_dim, rng);
  init_linear(p, "kernel.fc2", d.model_dim, d.kernel_dim(), rng);
}

void init_sounding_head(ParamStore& p, const ModelDims& d, Rng& rng) {
  init_linear(p, "sound.fc", d.model_dim, 1, rng);
}

MaskFeatures pixel_decode(const VisualPyramid& pyramid,
                          const AudioEmbedding& audio,
                          const EncodedFeatures& encoded,
                          const ParamStore& p, const ModelDims& d) {
  const int64_t T = encoded.tokens.size(0);
  // Top-down pathway, coarse to fine.
  Tensor m3 = add(conv1x1(unflatten_scale(encoded, 2, d.fusion_dim), p,
                          "px.enc_lat3"),
                  conv1x1(pyramid.scales[2], p, "px.pyr_lat3"));
  Tensor m2 = add(conv1x1(unflatten_scale(encoded, 1, d.fusion_dim), p,
                          "px.enc_lat2"),
                  conv1x1(pyramid.scales[1], p, "px.pyr_lat2"));
  m2 = add(m2, bilinear_resize(m3, m2.size(2), m2.size(3)));
  m2 = conv2d_3x3(m2, p.get("px.smooth2.w"), p.get("px.smooth2.b"), 1);
  Tensor m1 = add(conv1x1(unflatten_scale(encoded, 0, d.fusion_dim), p,
                          "px.enc_lat1"),
                  conv1x1(pyramid.scales[0], p, "px.pyr_lat1"));
  m1 = add(m1, bilinear_resize(m2, m1.size(2), m1.size(3)));
  m1 = conv2d_3x3(m1, p.get("px.smooth1.w"), p.get("px.smooth1.b"), 1);

  // Audio cross-attention at the finest level; pre-norm residual, so a zero
  // output projection leaves the features audio-independent.
  const int64_t H = m1.size(2), W = m1.size(3);
  Tensor tokens = permute(reshape(m1, {T, d.fusion_dim, H * W}), {0, 2, 1});
  Tensor audio_tok = reshape(audio.vectors, {T, 1, d.fusion_dim});
  Tensor nq = layer_norm(tokens, p.get("px.audio_attn.lnq.g"),
                         p.get("px.audio_attn.lnq.b"));
  Tensor nkv = layer_norm(audio_tok, p.get("px.audio_attn.lnkv.g"),
                          p.get("px.audio_attn.lnkv.b"));
  tokens = add(tokens, multi_head_attention(nq, nkv, nkv, p, "px.audio_attn",
                                            d.heads));
  Tensor out = reshape(permute(tokens, {0, 2, 1}), {T, d.fusion_dim, H, W});
  return {conv1x1(out, p, "px.out")};
}

KernelSet generate_kernels(const DecoderOutput& decoded, const ParamStore& p,
                           const ModelDims&) {
  Tensor h = linear(decoded.embeddings, p.get("kernel.fc1.w"),
                    p.get("kernel.fc1.b"));
  h = relu(h);
  return {linear(h, p.get("kernel.fc2.w"), p.get("kernel.fc2.b"))};
}

MaskLogits dynamic_convolve(const MaskFeatures& masks_in,
                            const KernelSet& kernels) {
  const Tensor& f = masks_in.features;
  const Tensor& k = kernels.kernels;
  const int64_t T = f.size(0), C = f.size(1), H = f.size(2), W = f.size(3);
  if (k.dim() != 3 || k.size(0) != T || k.size(2) != C + 1) {
    throw ContractError("dynamic_convolve: kernels " + shape_str(k.shape()) +
                        " do not match features " + shape_str(f.shape()) +
                        " (expected D_s = C_m + 1 = " + std::to_string(C + 1) +
                        ")");
  }
  const int64_t Nq = k.size(1);
  Tensor weights = slice(k, 2, 0, C);      // [T, N_q, C]
  Tensor bias = slice(k, 2, C, 1);         // [T, N_q, 1]
  Tensor flat = reshape(f, {T, C, H * W});
  Tensor logits = matmul(weights, flat);   // [T, N_q, HW]
  // Broadcast the per-query bias over pixels.
  logits = add(logits, matmul(bias, Tensor::full({1, H * W}, 1.0)));
  logits = reshape(logits, {T, Nq, H, W});
  return {permute(logits, {1, 0, 2, 3})};
}

SoundingScores sounding_head(const DecoderOutput& decoded,
                             const ParamStore& p, const ModelDims& d) {
  (void)d;
  Tensor s =
      linear(decoded.embeddings, p.get("sound.fc.w"), p.get("sound.fc.b"));
  return {reshape(s, {s.size(0), s.size(1)})};
}

}  // namespace autr
