#include "autr/encoders.hpp"

#include "autr/ops.hpp"

namespace autr {

ModelDims ModelDims::from_config(const Config& cfg) {
  ModelDims d;
  d.image_size = cfg.get_int("image_size");
  d.frames = cfg.get_int("frames");
  d.audio_size = cfg.get_int("audio_size");
  d.audio_channels = cfg.get_int("audio_channels");
  d.fusion_dim = cfg.get_int("fusion_dim");
  d.model_dim = cfg.get_int("model_dim");
  d.pyr_c1 = cfg.get_int("pyr_c1");
  d.pyr_c2 = cfg.get_int("pyr_c2");
  d.pyr_c3 = cfg.get_int("pyr_c3");
  d.num_queries = cfg.get_int("num_queries");
  d.heads = cfg.get_int("heads");
  d.enc_layers = cfg.get_int("enc_layers");
  d.dec_layers = cfg.get_int("dec_layers");
  d.ffn_dim = cfg.get_int("ffn_dim");
  d.mask_channels = cfg.get_int("mask_channels");
  d.audio_enc_depth = cfg.get_int("audio_enc_depth");
  d.audio_queries = cfg.get_bool("audio_queries");
  return d;
}

namespace {

constexpr int64_t kStemChannels = 16;

void init_conv3x3(ParamStore& p, const std::string& prefix, int64_t cin,
                  int64_t cout, Rng& rng) {
  p.create_xavier(prefix + ".w", {cout, cin, 3, 3}, cin * 9, cout * 9, rng);
  p.create_const(prefix + ".b", {cout}, 0.0);
}

void init_conv1x1(ParamStore& p, const std::string& prefix, int64_t cin,
                  int64_t cout, Rng& rng) {
  p.create_xavier(prefix + ".w", {cout, cin}, cin, cout, rng);
  p.create_const(prefix + ".b", {cout}, 0.0);
}

void init_ln(ParamStore& p, const std::string& prefix, int64_t c) {
  p.create_const(prefix + ".g", {c}, 1.0);
  p.create_const(prefix + ".b", {c}, 0.0);
}

/// Layer norm across the channel axis of a [B, C, H, W] map.
Tensor channel_layer_norm(const Tensor& x, const Tensor& gamma,
                          const Tensor& beta) {
  Tensor t = permute(x, {0, 2, 3, 1});
  t = layer_norm(t, gamma, beta);
  return permute(t, {0, 3, 1, 2});
}

std::vector<int64_t> audio_channels_plan(const ModelDims& d) {
  std::vector<int64_t> chan;
  for (int64_t i = 0; i < d.audio_enc_depth; ++i)
    chan.push_back(i + 1 == d.audio_enc_depth ? d.audio_channels
                                              : kStemChannels);
  return chan;
}

}  // namespace

void init_visual_encoder(ParamStore& p, const ModelDims& d, Rng& rng) {
  const int64_t chan[5] = {3, kStemChannels, d.pyr_c1, d.pyr_c2, d.pyr_c3};
  for (int i = 0; i < 4; ++i) {
    init_conv3x3(p, "visual.conv" + std::to_string(i), chan[i], chan[i + 1],
                 rng);
    init_ln(p, "visual.ln" + std::to_string(i), chan[i + 1]);
  }
}

void init_audio_encoder(ParamStore& p, const ModelDims& d, Rng& rng) {
  if (d.audio_enc_depth == 0) {
    init_conv1x1(p, "audio.lin", 1, d.audio_channels, rng);
    return;
  }
  int64_t cin = 1;
  auto plan = audio_channels_plan(d);
  for (size_t i = 0; i < plan.size(); ++i) {
    init_conv3x3(p, "audio.conv" + std::to_string(i), cin, plan[i], rng);
    cin = plan[i];
  }
}

void init_projections(ParamStore& p, const ModelDims& d, Rng& rng) {
  const int64_t pc[3] = {d.pyr_c1, d.pyr_c2, d.pyr_c3};
  for (int l = 0; l < 3; ++l)
    init_conv1x1(p, "proj.vis" + std::to_string(l + 1), pc[l], d.fusion_dim,
                 rng);
  p.create_xavier("proj.audio.fc1.w", {d.audio_channels, d.fusion_dim},
                  d.audio_channels, d.fusion_dim, rng);
  p.create_const("proj.audio.fc1.b", {d.fusion_dim}, 0.0);
  p.create_xavier("proj.audio.fc2.w", {d.fusion_dim, d.fusion_dim},
                  d.fusion_dim, d.fusion_dim, rng);
  p.create_const("proj.audio.fc2.b", {d.fusion_dim}, 0.0);
}

VisualPyramid encode_visual(const VideoClip& clip, const ParamStore& p,
                            const ModelDims&) {
  const Tensor& x0 = clip.frames;
  if (x0.dim() != 4 || x0.size(1) != 3) {
    throw ContractError("encode_visual: expected [T, 3, H0, W0] frames, got " +
                        shape_str(x0.shape()));
  }
  if (x0.size(2) % 16 != 0 || x0.size(3) % 16 != 0) {
    throw ContractError("encode_visual: spatial size " + shape_str(x0.shape()) +
                        " not divisible by 16");
  }
  VisualPyramid out;
  Tensor x = x0;
  for (int i = 0; i < 4; ++i) {
    const std::string ci = std::to_string(i);
    x = conv2d_3x3(x, p.get("visual.conv" + ci + ".w"),
                   p.get("visual.conv" + ci + ".b"), 2);
    x = gelu(x);
    x = channel_layer_norm(x, p.get("visual.ln" + ci + ".g"),
                           p.get("visual.ln" + ci + ".b"));
    if (i >= 1) out.scales[i - 1] = x;
  }
  return out;
}

AudioEmbedding encode_audio(const AudioClip& clip, const ParamStore& p,
                            const ModelDims& d) {
  const Tensor& a = clip.spectrograms;
  if (a.dim() != 3) {
    throw ContractError("encode_audio: expected [T, H_a, W_a], got " +
                        shape_str(a.shape()));
  }
  const int64_t T = a.size(0), H = a.size(1), W = a.size(2);
  Tensor x = reshape(a, {T, 1, H, W});
  if (d.audio_enc_depth == 0) {
    x = conv2d_1x1(x, p.get("audio.lin.w"), p.get("audio.lin.b"));
  } else {
    auto plan = audio_channels_plan(d);
    for (size_t i = 0; i < plan.size(); ++i) {
      x = conv2d_3x3(x, p.get("audio.conv" + std::to_string(i) + ".w"),
                     p.get("audio.conv" + std::to_string(i) + ".b"), 2);
      x = gelu(x);
    }
  }
  // Global average pool over space.
  const int64_t C = x.size(1);
  x = reshape(x, {T, C, x.size(2) * x.size(3)});
  return {mean_last(x)};
}

void project_features(const VisualPyramid& pyramid, const AudioEmbedding& audio,
                      const ParamStore& p, const ModelDims&,
                      VisualPyramid* pyramid_out, AudioEmbedding* audio_out) {
  for (int l = 0; l < 3; ++l) {
    const std::string pre = "proj.vis" + std::to_string(l + 1);
    pyramid_out->scales[l] = conv2d_1x1(pyramid.scales[l], p.get(pre + ".w"),
                                        p.get(pre + ".b"));
  }
  Tensor h = linear(audio.vectors, p.get("proj.audio.fc1.w"),
                    p.get("proj.audio.fc1.b"));
  h = gelu(h);
  audio_out->vectors =
      linear(h, p.get("proj.audio.fc2.w"), p.get("proj.audio.fc2.b"));
}

}  // namespace autr
