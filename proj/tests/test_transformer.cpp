#include <doctest.h>

#include <cmath>

#include "autr/ops.hpp"
#include "autr/transformer.hpp"
#include "gradcheck.hpp"

using namespace autr;
using autr::testing::random_tensor;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.image_size = 32;
  d.frames = 2;
  d.fusion_dim = 8;
  d.model_dim = 8;
  d.heads = 2;
  d.enc_layers = 1;
  d.dec_layers = 2;
  d.ffn_dim = 16;
  d.num_queries = 2;
  return d;
}

VisualPyramid random_pyramid(const ModelDims& d, Rng& rng) {
  VisualPyramid pyr;
  pyr.scales[0] = random_tensor({d.frames, d.fusion_dim, 8, 8}, rng);
  pyr.scales[1] = random_tensor({d.frames, d.fusion_dim, 4, 4}, rng);
  pyr.scales[2] = random_tensor({d.frames, d.fusion_dim, 2, 2}, rng);
  return pyr;
}

}  // namespace

TEST_CASE("position encoding rows are unit sin/cos pairs") {
  Tensor pe = make_position_encoding(3, 4, 8);
  CHECK(pe.shape() == Shape{12, 8});
  for (int64_t r = 0; r < 12; ++r) {
    for (int64_t i = 0; i < 4; i += 2) {
      const double s = pe.at({r, i}), c = pe.at({r, i + 1});
      CHECK(s * s + c * c == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // Distinct positions produce distinct rows.
  bool all_equal = true;
  for (int64_t i = 0; i < 8; ++i)
    if (pe.at({0, i}) != pe.at({5, i})) all_equal = false;
  CHECK_FALSE(all_equal);
  CHECK_THROWS_AS(make_position_encoding(2, 2, 6), ContractError);
}

TEST_CASE("attention rejects a width not divisible by the head count") {
  ModelDims d = tiny_dims();
  Rng rng(41);
  ParamStore p;
  init_encoder(p, d, rng);
  Tensor x = random_tensor({1, 4, d.fusion_dim}, rng);
  CHECK_THROWS_AS(
      multi_head_attention(x, x, x, p, "enc.layer0.attn", /*heads=*/3),
      ContractError);
}

TEST_CASE("audio-visual fusion at zero init is a bit-exact identity") {
  ModelDims d = tiny_dims();
  Rng rng(42);
  ParamStore p;
  init_avef(p, d, rng);

  VisualPyramid pyr = random_pyramid(d, rng);
  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  FusedPyramid fused = avef_fuse(pyr, audio, p, d);
  for (int l = 0; l < 3; ++l) {
    CHECK(fused.scales[l].shape() == pyr.scales[l].shape());
    CHECK(fused.scales[l].data() == pyr.scales[l].data());  // bit-exact
  }
}

TEST_CASE("fusion rejects a pyramid that was not projected") {
  ModelDims d = tiny_dims();
  Rng rng(43);
  ParamStore p;
  init_avef(p, d, rng);
  VisualPyramid pyr = random_pyramid(d, rng);
  pyr.scales[1] = random_tensor({d.frames, d.fusion_dim + 1, 4, 4}, rng);
  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  CHECK_THROWS_AS(avef_fuse(pyr, audio, p, d), ShapeError);
}

TEST_CASE("encoder flattens the pyramid into L = sum of H*W tokens") {
  ModelDims d = tiny_dims();
  Rng rng(44);
  ParamStore p;
  init_avef(p, d, rng);
  init_encoder(p, d, rng);

  FusedPyramid fused;
  fused.scales = random_pyramid(d, rng).scales;
  EncodedFeatures enc = encode(fused, p, d);
  CHECK(enc.tokens.shape() == Shape{d.frames, 64 + 16 + 4, d.fusion_dim});
  CHECK(enc.scale_offsets[0].offset == 0);
  CHECK(enc.scale_offsets[0].h == 8);
  CHECK(enc.scale_offsets[1].offset == 64);
  CHECK(enc.scale_offsets[2].offset == 80);
  CHECK(enc.scale_offsets[2].w == 2);
}

TEST_CASE("a zero-layer encoder returns inputs plus position and level terms") {
  ModelDims d = tiny_dims();
  d.enc_layers = 0;
  Rng rng(45);
  ParamStore p;
  init_encoder(p, d, rng);

  FusedPyramid fused;
  fused.scales = random_pyramid(d, rng).scales;
  EncodedFeatures enc = encode(fused, p, d);

  Tensor pe = make_position_encoding(8, 8, d.fusion_dim);
  const Tensor& lvl = p.get("enc.level_embed");
  // Token 3 of frame 1 lives at (y=0, x=3) of scale 0.
  for (int64_t c = 0; c < d.fusion_dim; ++c) {
    const double want =
        fused.scales[0].at({1, c, 0, 3}) + pe.at({3, c}) + lvl.at({0, c});
    CHECK(enc.tokens.at({1, 3, c}) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("swapping frames swaps encoder outputs bit-exactly") {
  ModelDims d = tiny_dims();
  Rng rng(46);
  ParamStore p;
  init_encoder(p, d, rng);

  FusedPyramid fused;
  fused.scales = random_pyramid(d, rng).scales;
  FusedPyramid swapped;
  for (int l = 0; l < 3; ++l) {
    const Tensor& x = fused.scales[l];
    Tensor a = slice(x, 0, 0, 1), b = slice(x, 0, 1, 1);
    swapped.scales[l] = concat({b, a}, 0);
  }
  EncodedFeatures ea = encode(fused, p, d);
  EncodedFeatures eb = encode(swapped, p, d);
  const int64_t per_frame = ea.tokens.numel() / 2;
  for (int64_t i = 0; i < per_frame; ++i) {
    CHECK(ea.tokens.data()[i] == eb.tokens.data()[per_frame + i]);
    CHECK(ea.tokens.data()[per_frame + i] == eb.tokens.data()[i]);
  }
}

TEST_CASE("query content repeats the frame's audio embedding") {
  ModelDims d = tiny_dims();
  Rng rng(47);
  ParamStore p;
  init_queries(p, d, rng);

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  QuerySet q = make_queries(audio, p, d);
  CHECK(q.content.shape() == Shape{d.frames, d.num_queries, d.model_dim});
  CHECK(q.query_pos.shape() == Shape{d.num_queries, d.model_dim});
  // content_proj starts as identity, so each row is the audio vector itself.
  for (int64_t t = 0; t < d.frames; ++t)
    for (int64_t i = 0; i < d.num_queries; ++i)
      for (int64_t c = 0; c < d.model_dim; ++c)
        CHECK(q.content.at({t, i, c}) == audio.vectors.at({t, c}));
}

TEST_CASE("audio-agnostic queries have zero content") {
  ModelDims d = tiny_dims();
  d.audio_queries = false;
  Rng rng(48);
  ParamStore p;
  init_queries(p, d, rng);
  CHECK_FALSE(p.contains("query.content_proj.w"));

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  QuerySet q = make_queries(audio, p, d);
  for (double v : q.content.data()) CHECK(v == 0.0);
}

TEST_CASE("a zero-layer decoder returns the query content") {
  ModelDims d = tiny_dims();
  d.dec_layers = 0;
  Rng rng(49);
  ParamStore p;
  init_queries(p, d, rng);
  init_decoder(p, d, rng);

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  QuerySet q = make_queries(audio, p, d);
  EncodedFeatures mem;
  mem.tokens = random_tensor({d.frames, 10, d.fusion_dim}, rng);
  DecoderOutput out = decode(q, mem, p, d);
  CHECK(out.embeddings.data() == q.content.data());
}

TEST_CASE("swapping the two query positions swaps embeddings bit-exactly") {
  ModelDims d = tiny_dims();
  Rng rng(50);
  ParamStore p;
  init_queries(p, d, rng);
  init_decoder(p, d, rng);

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  QuerySet q = make_queries(audio, p, d);
  EncodedFeatures mem;
  mem.tokens = random_tensor({d.frames, 12, d.fusion_dim}, rng);

  QuerySet q_swapped = q;
  Tensor p0 = slice(q.query_pos, 0, 0, 1), p1 = slice(q.query_pos, 0, 1, 1);
  q_swapped.query_pos = concat({p1, p0}, 0);

  DecoderOutput a = decode(q, mem, p, d);
  DecoderOutput b = decode(q_swapped, mem, p, d);
  for (int64_t t = 0; t < d.frames; ++t)
    for (int64_t c = 0; c < d.model_dim; ++c) {
      CHECK(a.embeddings.at({t, 0, c}) == b.embeddings.at({t, 1, c}));
      CHECK(a.embeddings.at({t, 1, c}) == b.embeddings.at({t, 0, c}));
    }
}

TEST_CASE("decoder output reacts to the audio embedding") {
  ModelDims d = tiny_dims();
  Rng rng(51);
  ParamStore p;
  init_queries(p, d, rng);
  init_decoder(p, d, rng);

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  EncodedFeatures mem;
  mem.tokens = random_tensor({d.frames, 12, d.fusion_dim}, rng);
  DecoderOutput a = decode(make_queries(audio, p, d), mem, p, d);

  std::vector<double> bumped = audio.vectors.data();
  bumped[0] += 0.5;
  AudioEmbedding audio2{Tensor::from_data(audio.vectors.shape(), bumped)};
  DecoderOutput b = decode(make_queries(audio2, p, d), mem, p, d);

  double diff = 0;
  for (int64_t i = 0; i < a.embeddings.numel(); ++i)
    diff += std::fabs(a.embeddings.data()[i] - b.embeddings.data()[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("gradient reaches the query positions and attention weights") {
  ModelDims d = tiny_dims();
  d.dec_layers = 1;
  Rng rng(52);
  ParamStore p;
  init_queries(p, d, rng);
  init_decoder(p, d, rng);

  AudioEmbedding audio{random_tensor({d.frames, d.fusion_dim}, rng)};
  EncodedFeatures mem;
  mem.tokens = random_tensor({d.frames, 6, d.fusion_dim}, rng);
  DecoderOutput out = decode(make_queries(audio, p, d), mem, p, d);
  backward(sum(mul(out.embeddings, out.embeddings)));

  for (const char* name : {"query.pos", "dec.layer0.self.wq.w",
                           "dec.layer0.cross.wk.w", "dec.layer0.ffn.fc1.w"}) {
    const Tensor& w = p.get(name);
    REQUIRE(w.has_grad());
    double g = 0;
    for (double v : w.grad()) g += std::fabs(v);
    INFO(name);
    CHECK(g > 0.0);
  }
}
