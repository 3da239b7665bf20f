#include <doctest.h>

#include <algorithm>

#include "autr/encoders.hpp"
#include "autr/ops.hpp"
#include "gradcheck.hpp"

using namespace autr;
using autr::testing::random_tensor;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.image_size = 32;
  d.frames = 2;
  d.audio_size = 16;
  d.audio_channels = 6;
  d.fusion_dim = 8;
  d.pyr_c1 = 4;
  d.pyr_c2 = 5;
  d.pyr_c3 = 6;
  return d;
}

}  // namespace

TEST_CASE("visual pyramid has strides 4, 8 and 16") {
  ModelDims d = tiny_dims();
  Rng rng(31);
  ParamStore p;
  init_visual_encoder(p, d, rng);

  VideoClip clip{random_tensor({d.frames, 3, d.image_size, d.image_size}, rng,
                               0.0, 1.0)};
  VisualPyramid pyr = encode_visual(clip, p, d);
  CHECK(pyr.scales[0].shape() == Shape{d.frames, d.pyr_c1, 8, 8});
  CHECK(pyr.scales[1].shape() == Shape{d.frames, d.pyr_c2, 4, 4});
  CHECK(pyr.scales[2].shape() == Shape{d.frames, d.pyr_c3, 2, 2});
}

TEST_CASE("visual encoder rejects malformed clips") {
  ModelDims d = tiny_dims();
  Rng rng(32);
  ParamStore p;
  init_visual_encoder(p, d, rng);
  VideoClip bad_channels{Tensor::zeros({2, 1, 32, 32})};
  CHECK_THROWS_AS(encode_visual(bad_channels, p, d), ContractError);
  VideoClip bad_size{Tensor::zeros({2, 3, 24, 24})};
  CHECK_THROWS_AS(encode_visual(bad_size, p, d), ContractError);
}

TEST_CASE("audio embedding is one vector per frame") {
  ModelDims d = tiny_dims();
  Rng rng(33);
  ParamStore p;
  init_audio_encoder(p, d, rng);
  AudioClip clip{random_tensor({d.frames, d.audio_size, d.audio_size}, rng)};
  AudioEmbedding emb = encode_audio(clip, p, d);
  CHECK(emb.vectors.shape() == Shape{d.frames, d.audio_channels});
  CHECK_THROWS_AS(encode_audio({Tensor::zeros({2, 1, 16, 16})}, p, d),
                  ContractError);
}

TEST_CASE("global pooling makes the depth-0 audio encoder shuffle-invariant") {
  // With a per-pixel linear map the pooled embedding depends only on the
  // multiset of spectrogram values, not their positions.
  ModelDims d = tiny_dims();
  d.audio_enc_depth = 0;
  Rng rng(34);
  ParamStore p;
  init_audio_encoder(p, d, rng);

  Tensor a = random_tensor({1, 4, 4}, rng);
  std::vector<double> shuffled = a.data();
  Rng shuffle_rng(35);
  for (size_t i = shuffled.size() - 1; i > 0; --i)
    std::swap(shuffled[i],
              shuffled[static_cast<size_t>(shuffle_rng.uniform_int(
                  0, static_cast<int64_t>(i)))]);
  Tensor b = Tensor::from_data({1, 4, 4}, shuffled);

  AudioEmbedding ea = encode_audio({a}, p, d);
  AudioEmbedding eb = encode_audio({b}, p, d);
  for (int64_t c = 0; c < d.audio_channels; ++c)
    CHECK(ea.vectors.at({0, c}) ==
          doctest::Approx(eb.vectors.at({0, c})).epsilon(1e-12));
}

TEST_CASE("depth-0 pooled embedding matches the closed form w*mean + b") {
  ModelDims d = tiny_dims();
  d.audio_enc_depth = 0;
  Rng rng(36);
  ParamStore p;
  init_audio_encoder(p, d, rng);

  Tensor a = random_tensor({2, 4, 4}, rng);
  AudioEmbedding emb = encode_audio({a}, p, d);

  const Tensor& w = p.get("audio.lin.w");  // [C_a, 1]
  const Tensor& b = p.get("audio.lin.b");
  for (int64_t t = 0; t < 2; ++t) {
    double m = 0;
    for (int64_t i = 0; i < 16; ++i) m += a.data()[t * 16 + i];
    m /= 16.0;
    for (int64_t c = 0; c < d.audio_channels; ++c) {
      const double want = w.at({c, 0}) * m + b.data()[c];
      CHECK(emb.vectors.at({t, c}) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("projections map every stream to the fusion width") {
  ModelDims d = tiny_dims();
  Rng rng(37);
  ParamStore p;
  init_visual_encoder(p, d, rng);
  init_audio_encoder(p, d, rng);
  init_projections(p, d, rng);

  VideoClip clip{random_tensor({d.frames, 3, d.image_size, d.image_size}, rng,
                               0.0, 1.0)};
  AudioClip aclip{random_tensor({d.frames, d.audio_size, d.audio_size}, rng)};
  VisualPyramid pyr = encode_visual(clip, p, d);
  AudioEmbedding emb = encode_audio(aclip, p, d);

  VisualPyramid pyr_av;
  AudioEmbedding emb_av;
  project_features(pyr, emb, p, d, &pyr_av, &emb_av);
  CHECK(pyr_av.scales[0].shape() == Shape{d.frames, d.fusion_dim, 8, 8});
  CHECK(pyr_av.scales[1].shape() == Shape{d.frames, d.fusion_dim, 4, 4});
  CHECK(pyr_av.scales[2].shape() == Shape{d.frames, d.fusion_dim, 2, 2});
  CHECK(emb_av.vectors.shape() == Shape{d.frames, d.fusion_dim});
}

TEST_CASE("encoder output depends on every input frame") {
  ModelDims d = tiny_dims();
  Rng rng(38);
  ParamStore p;
  init_visual_encoder(p, d, rng);
  Tensor frames = random_tensor({2, 3, 32, 32}, rng, 0.0, 1.0);
  VisualPyramid a = encode_visual({frames}, p, d);

  std::vector<double> bumped = frames.data();
  bumped[5] += 0.37;  // frame 0 only
  VisualPyramid b = encode_visual({Tensor::from_data(frames.shape(), bumped)},
                                  p, d);
  // Frame 1 maps are untouched, frame 0 maps change.
  const auto &a2 = a.scales[2].data(), &b2 = b.scales[2].data();
  const int64_t per_frame = a.scales[2].numel() / 2;
  bool frame0_changed = false;
  for (int64_t i = 0; i < per_frame; ++i)
    if (a2[i] != b2[i]) frame0_changed = true;
  CHECK(frame0_changed);
  for (int64_t i = per_frame; i < 2 * per_frame; ++i) CHECK(a2[i] == b2[i]);
}
