#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "autr/metrics.hpp"

using namespace autr;

TEST_CASE("iou on hand-built masks") {
  Tensor a = Tensor::from_data({2, 2}, {1, 1, 0, 0});
  Tensor b = Tensor::from_data({2, 2}, {1, 0, 1, 0});
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Tensor::zeros({2, 2})) == 0.0);
  CHECK_THROWS_AS(iou(a, Tensor::zeros({4})), ContractError);
}

TEST_CASE("iou is symmetric and rewards correct emptiness") {
  Tensor a = Tensor::from_data({3}, {1, 0, 1});
  Tensor b = Tensor::from_data({3}, {0, 0, 1});
  CHECK(iou(a, b) == iou(b, a));
  CHECK(iou(Tensor::zeros({3}), Tensor::zeros({3})) == 1.0);
}

TEST_CASE("flipping a false negative to true positive never lowers iou") {
  Tensor gt = Tensor::from_data({4}, {1, 1, 1, 0});
  Tensor pred = Tensor::from_data({4}, {1, 0, 0, 0});
  const double before = iou(pred, gt);
  pred.data()[1] = 1.0;  // false negative -> true positive
  CHECK(iou(pred, gt) >= before);
}

TEST_CASE("f-score matches the precision/recall formula") {
  // tp=2, fp=1, fn=1 -> P=2/3, R=2/3.
  Tensor prob = Tensor::from_data({4}, {0.9, 0.8, 0.6, 0.2});
  Tensor gt = Tensor::from_data({4}, {1, 1, 0, 1});
  const double p = 2.0 / 3.0, r = 2.0 / 3.0, b2 = 0.3;
  const double want = (1.0 + b2) * p * r / (b2 * p + r);
  CHECK(f_score(prob, gt, b2, 0.5) == doctest::Approx(want).epsilon(1e-12));

  // Both empty counts as perfect; empty prediction on a nonempty gt is 0.
  CHECK(f_score(Tensor::zeros({3}), Tensor::zeros({3}), b2, 0.5) == 1.0);
  CHECK(f_score(Tensor::zeros({3}), Tensor::from_data({3}, {1, 0, 0}), b2,
                0.5) == 0.0);
}

TEST_CASE("f-score thresholds probabilities at the given cut") {
  Tensor prob = Tensor::from_data({2}, {0.49, 0.51});
  Tensor gt = Tensor::from_data({2}, {1, 1});
  // Only the second pixel counts as predicted at threshold 0.5.
  const double p = 1.0, r = 0.5, b2 = 0.3;
  CHECK(f_score(prob, gt, b2, 0.5) ==
        doctest::Approx((1.0 + b2) * p * r / (b2 * p + r)).epsilon(1e-12));
}

TEST_CASE("evaluate averages per frame over all scenes") {
  ModelDims d;
  d.image_size = 16;
  d.frames = 2;
  d.audio_size = 8;
  d.audio_channels = 4;
  d.fusion_dim = 8;
  d.model_dim = 8;
  d.heads = 2;
  d.pyr_c1 = 4;
  d.pyr_c2 = 4;
  d.pyr_c3 = 4;
  d.num_queries = 2;
  d.enc_layers = 1;
  d.dec_layers = 1;
  d.ffn_dim = 8;
  d.mask_channels = 4;
  Model model(d, 7);

  std::vector<TrainScene> scenes;
  Rng rng(81);
  for (int s = 0; s < 2; ++s) {
    TrainScene sc;
    sc.video.frames = Tensor::zeros({2, 3, 16, 16});
    sc.audio.spectrograms = Tensor::zeros({2, 8, 8});
    for (auto& v : sc.video.frames.data()) v = rng.uniform(0, 1);
    for (auto& v : sc.audio.spectrograms.data()) v = rng.uniform(0, 1);
    sc.gt.mask = Tensor::zeros({2, 16, 16});
    for (auto& v : sc.gt.mask.data()) v = rng.uniform(0, 1) < 0.3 ? 1.0 : 0.0;
    sc.gt.present = {true, true};
    scenes.push_back(std::move(sc));
  }
  EvalResult res = evaluate(model, scenes);
  CHECK(res.num_frames == 4);
  REQUIRE(res.per_frame.size() == 4);
  double sj = 0, sf = 0;
  for (auto& [j, f] : res.per_frame) {
    sj += j;
    sf += f;
  }
  CHECK(res.m_j == doctest::Approx(100.0 * sj / 4).epsilon(1e-12));
  CHECK(res.m_f == doctest::Approx(sf / 4).epsilon(1e-12));

  // Order independence: reversing the scenes leaves the means unchanged.
  std::vector<TrainScene> rev(scenes.rbegin(), scenes.rend());
  EvalResult res2 = evaluate(model, rev);
  CHECK(res2.m_j == doctest::Approx(res.m_j).epsilon(1e-12));

  // Inference output contract.
  InferenceOutput inf =
      infer_scene(model, scenes[0].video, scenes[0].audio);
  CHECK(inf.mask_prob.shape() == Shape{2, 16, 16});
  CHECK(inf.sounding_prob.shape() == Shape{2});
  for (double v : inf.mask_prob.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("report files are plain key=value text") {
  EvalResult r;
  r.m_j = 75.25;
  r.m_f = 0.5;
  r.num_frames = 8;
  const std::string path = "/tmp/autr_test_report.txt";
  write_report(path, r);
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  CHECK(l1 == "m_j=75.25");
  CHECK(l2 == "m_f=0.5");
  CHECK(l3 == "num_frames=8");
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_report("/nonexistent/r.txt", r), FormatError);
}
