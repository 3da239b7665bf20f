#include "autr/transformer.hpp"

#include <cmath>

#include "autr/ops.hpp"

namespace autr {

namespace {

void init_linear(ParamStore& p, const std::string& prefix, int64_t d_in,
                 int64_t d_out, Rng& rng) {
  p.create_xavier(prefix + ".w", {d_in, d_out}, d_in, d_out, rng);
  p.create_const(prefix + ".b", {d_out}, 0.0);
}

void init_zero_linear(ParamStore& p, const std::string& prefix, int64_t d_in,
                      int64_t d_out) {
  p.create_const(prefix + ".w", {d_in, d_out}, 0.0);
  p.create_const(prefix + ".b", {d_out}, 0.0);
}

void init_ln(ParamStore& p, const std::string& prefix, int64_t c) {
  p.create_const(prefix + ".g", {c}, 1.0);
  p.create_const(prefix + ".b", {c}, 0.0);
}

// wq/wk/wv randomly initialized; wo optionally zeroed so residual blocks
// start as identity. d_kv covers cross-attention with a different memory
// width.
void init_mha(ParamStore& p, const std::string& prefix, int64_t d, Rng& rng,
              bool zero_out_proj, int64_t d_kv = 0) {
  if (d_kv == 0) d_kv = d;
  init_linear(p, prefix + ".wq", d, d, rng);
  init_linear(p, prefix + ".wk", d_kv, d, rng);
  init_linear(p, prefix + ".wv", d_kv, d, rng);
  if (zero_out_proj)
    init_zero_linear(p, prefix + ".wo", d, d);
  else
    init_linear(p, prefix + ".wo", d, d, rng);
}

void init_ffn(ParamStore& p, const std::string& prefix, int64_t d,
              int64_t hidden, Rng& rng) {
  init_linear(p, prefix + ".fc1", d, hidden, rng);
  init_linear(p, prefix + ".fc2", hidden, d, rng);
}

Tensor apply_ln(const Tensor& x, const ParamStore& p,
                const std::string& prefix) {
  return layer_norm(x, p.get(prefix + ".g"), p.get(prefix + ".b"));
}

Tensor apply_ffn(const Tensor& x, const ParamStore& p,
                 const std::string& prefix) {
  Tensor h = linear(x, p.get(prefix + ".fc1.w"), p.get(prefix + ".fc1.b"));
  h = gelu(h);
  return linear(h, p.get(prefix + ".fc2.w"), p.get(prefix + ".fc2.b"));
}

// [B, L, D] -> [B*heads, L, D/heads]
Tensor split_heads(const Tensor& x, int64_t heads) {
  const int64_t B = x.size(0), L = x.size(1), D = x.size(2);
  Tensor t = reshape(x, {B, L, heads, D / heads});
  t = permute(t, {0, 2, 1, 3});
  return reshape(t, {B * heads, L, D / heads});
}

Tensor merge_heads(const Tensor& x, int64_t heads) {
  const int64_t Bh = x.size(0), L = x.size(1), dh = x.size(2);
  Tensor t = reshape(x, {Bh / heads, heads, L, dh});
  t = permute(t, {0, 2, 1, 3});
  return reshape(t, {Bh / heads, L, heads * dh});
}

}  // namespace

Tensor multi_head_attention(const Tensor& q_in, const Tensor& k_in,
                            const Tensor& v_in, const ParamStore& p,
                            const std::string& prefix, int64_t heads) {
  const int64_t D = q_in.size(2);
  if (D % heads != 0) {
    throw ContractError("multi_head_attention: dim " + std::to_string(D) +
                        " not divisible by " + std::to_string(heads) +
                        " heads");
  }
  Tensor q = linear(q_in, p.get(prefix + ".wq.w"), p.get(prefix + ".wq.b"));
  Tensor k = linear(k_in, p.get(prefix + ".wk.w"), p.get(prefix + ".wk.b"));
  Tensor v = linear(v_in, p.get(prefix + ".wv.w"), p.get(prefix + ".wv.b"));
  q = split_heads(q, heads);
  k = split_heads(k, heads);
  v = split_heads(v, heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(D / heads));
  Tensor logits = scale(matmul(q, permute(k, {0, 2, 1})), inv_sqrt);
  Tensor attn = softmax(logits, -1);
  Tensor out = merge_heads(matmul(attn, v), heads);
  return linear(out, p.get(prefix + ".wo.w"), p.get(prefix + ".wo.b"));
}

Tensor make_position_encoding(int64_t h, int64_t w, int64_t c) {
  if (c % 4 != 0)
    throw ContractError("position encoding dim must be divisible by 4, got " +
                        std::to_string(c));
  const int64_t half = c / 2;      // per spatial axis
  const int64_t quarter = c / 4;   // sin/cos pairs per axis
  std::vector<double> data(static_cast<size_t>(h * w * c));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double* row = data.data() + (y * w + x) * c;
      for (int64_t i = 0; i < quarter; ++i) {
        const double freq =
            std::pow(10000.0, -2.0 * static_cast<double>(i) / half);
        row[2 * i] = std::sin(y * freq);
        row[2 * i + 1] = std::cos(y * freq);
        row[half + 2 * i] = std::sin(x * freq);
        row[half + 2 * i + 1] = std::cos(x * freq);
      }
    }
  }
  return Tensor::from_data({h * w, c}, std::move(data));
}

void init_avef(ParamStore& p, const ModelDims& d, Rng& rng) {
  for (int l = 1; l <= 3; ++l) {
    const std::string pre = "avef.scale" + std::to_string(l);
    init_ln(p, pre + ".lnq", d.fusion_dim);
    init_ln(p, pre + ".lnkv", d.fusion_dim);
    init_mha(p, pre + ".attn", d.fusion_dim, rng, /*zero_out_proj=*/true);
  }
}

void init_encoder(ParamStore& p, const ModelDims& d, Rng& rng) {
  p.create_normal("enc.level_embed", {3, d.fusion_dim}, 0.02, rng);
  for (int64_t i = 0; i < d.enc_layers; ++i) {
    const std::string pre = "enc.layer" + std::to_string(i);
    init_ln(p, pre + ".ln1", d.fusion_dim);
    init_mha(p, pre + ".attn", d.fusion_dim, rng, false);
    init_ln(p, pre + ".ln2", d.fusion_dim);
    init_ffn(p, pre + ".ffn", d.fusion_dim, d.ffn_dim, rng);
  }
}

void init_queries(ParamStore& p, const ModelDims& d, Rng& rng) {
  if (d.audio_queries) {
    // Identity-shaped map from projected audio to query content.
    Tensor w = p.create_const("query.content_proj.w",
                              {d.fusion_dim, d.model_dim}, 0.0);
    for (int64_t i = 0; i < std::min(d.fusion_dim, d.model_dim); ++i)
      w.data()[i * d.model_dim + i] = 1.0;
    p.create_const("query.content_proj.b", {d.model_dim}, 0.0);
  }
  p.create_normal("query.pos", {d.num_queries, d.model_dim}, 0.02, rng);
}

void init_decoder(ParamStore& p, const ModelDims& d, Rng& rng) {
  for (int64_t i = 0; i < d.dec_layers; ++i) {
    const std::string pre = "dec.layer" + std::to_string(i);
    init_ln(p, pre + ".ln1", d.model_dim);
    init_mha(p, pre + ".self", d.model_dim, rng, false);
    init_ln(p, pre + ".ln2", d.model_dim);
    init_mha(p, pre + ".cross", d.model_dim, rng, false, d.fusion_dim);
    init_ln(p, pre + ".ln3", d.model_dim);
    init_ffn(p, pre + ".ffn", d.model_dim, d.ffn_dim, rng);
  }
  if (d.dec_layers > 0) init_ln(p, "dec.final_ln", d.model_dim);
}

FusedPyramid avef_fuse(const VisualPyramid& pyramid,
                       const AudioEmbedding& audio, const ParamStore& p,
                       const ModelDims& d) {
  const int64_t T = audio.vectors.size(0);
  Tensor audio_tok = reshape(audio.vectors, {T, 1, d.fusion_dim});
  FusedPyramid out;
  for (int l = 0; l < 3; ++l) {
    const Tensor& x = pyramid.scales[l];
    if (x.size(1) != d.fusion_dim) {
      throw ShapeError("avef_fuse: scale " + std::to_string(l + 1) +
                       " has shape " + shape_str(x.shape()) +
                       ", expected channel dim " +
                       std::to_string(d.fusion_dim));
    }
    const int64_t H = x.size(2), W = x.size(3);
    Tensor tokens = permute(reshape(x, {T, d.fusion_dim, H * W}), {0, 2, 1});
    const std::string pre = "avef.scale" + std::to_string(l + 1);
    Tensor attn = multi_head_attention(
        apply_ln(tokens, p, pre + ".lnq"), apply_ln(audio_tok, p, pre + ".lnkv"),
        apply_ln(audio_tok, p, pre + ".lnkv"), p, pre + ".attn", d.heads);
    tokens = add(tokens, attn);
    out.scales[l] =
        reshape(permute(tokens, {0, 2, 1}), {T, d.fusion_dim, H, W});
  }
  return out;
}

EncodedFeatures encode(const FusedPyramid& fused, const ParamStore& p,
                       const ModelDims& d) {
  const int64_t T = fused.scales[0].size(0);
  EncodedFeatures out;
  std::vector<Tensor> parts;
  int64_t offset = 0;
  for (int l = 0; l < 3; ++l) {
    const Tensor& x = fused.scales[l];
    const int64_t H = x.size(2), W = x.size(3);
    Tensor tokens = permute(reshape(x, {T, d.fusion_dim, H * W}), {0, 2, 1});
    tokens = add_broadcast(tokens, make_position_encoding(H, W, d.fusion_dim));
    Tensor level = reshape(slice(p.get("enc.level_embed"), 0, l, 1),
                           {d.fusion_dim});
    tokens = add_broadcast(tokens, level);
    parts.push_back(tokens);
    out.scale_offsets[l] = {offset, H, W};
    offset += H * W;
  }
  Tensor x = concat(parts, 1);
  for (int64_t i = 0; i < d.enc_layers; ++i) {
    const std::string pre = "enc.layer" + std::to_string(i);
    Tensor n1 = apply_ln(x, p, pre + ".ln1");
    x = add(x, multi_head_attention(n1, n1, n1, p, pre + ".attn", d.heads));
    x = add(x, apply_ffn(apply_ln(x, p, pre + ".ln2"), p, pre + ".ffn"));
  }
  out.tokens = x;
  return out;
}

QuerySet make_queries(const AudioEmbedding& audio, const ParamStore& p,
                      const ModelDims& d) {
  QuerySet q;
  q.query_pos = p.get("query.pos");
  if (d.audio_queries) {
    Tensor content = linear(audio.vectors, p.get("query.content_proj.w"),
                            p.get("query.content_proj.b"));
    q.content = repeat_middle(content, d.num_queries);
  } else {
    // Ablation: audio-agnostic queries, zero content.
    q.content = Tensor::zeros(
        {audio.vectors.size(0), d.num_queries, d.model_dim});
  }
  return q;
}

DecoderOutput decode(const QuerySet& queries, const EncodedFeatures& memory,
                     const ParamStore& p, const ModelDims& d) {
  Tensor x = queries.content;
  const Tensor& qpos = queries.query_pos;
  for (int64_t i = 0; i < d.dec_layers; ++i) {
    const std::string pre = "dec.layer" + std::to_string(i);
    // Query self-attention; positions enter q and k additively.
    Tensor n1 = apply_ln(x, p, pre + ".ln1");
    Tensor qk = add_broadcast(n1, qpos);
    x = add(x, multi_head_attention(qk, qk, n1, p, pre + ".self", d.heads));
    // Cross-attention into the encoded tokens.
    Tensor n2 = apply_ln(x, p, pre + ".ln2");
    x = add(x, multi_head_attention(add_broadcast(n2, qpos), memory.tokens,
                                    memory.tokens, p, pre + ".cross",
                                    d.heads));
    x = add(x, apply_ffn(apply_ln(x, p, pre + ".ln3"), p, pre + ".ffn"));
  }
  if (d.dec_layers > 0) x = apply_ln(x, p, "dec.final_ln");
  return {x};
}

}  // namespace autr
