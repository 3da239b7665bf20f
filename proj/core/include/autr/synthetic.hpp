#pragma once

#include "autr/objective.hpp"

namespace autr {

/// Deterministic recipe for one paired audio-visual scene: two
/// non-overlapping drifting objects, of which a subset sounds.
struct SceneSpec {
  uint64_t seed = 0;
  std::array<int64_t, 2> classes{0, 1};  // distinct, in [0, K)
  std::vector<int64_t> sounding{0};      // object slots (non-empty)
  double noise_level = 0.0;
};

struct Scene {
  VideoClip video;
  AudioClip audio;
  GroundTruth gt;      // union of the rasterized sounding objects
  Tensor distractor;   // [T, H0, W0] union of the silent objects
  SceneSpec spec;
};

struct DataGenConfig {
  int64_t image_size = 64;
  int64_t frames = 2;
  int64_t audio_size = 32;
  int64_t num_classes = 8;

  static DataGenConfig from_config(const Config& cfg);
};

/// Class-specific spectrogram pattern, [H_a, W_a]: horizontal stripes at
/// every multiple of the class's fundamental period (period = class id + 2).
Tensor class_band_pattern(int64_t class_id, int64_t audio_size,
                          int64_t num_classes);

Scene generate_scene(const SceneSpec& spec, const DataGenConfig& cfg);

struct SplitConfig {
  std::string name;          // train | val | test | open_set
  int64_t count = 0;
  std::vector<int64_t> class_pool;
  bool multi_source = false;
  double noise_level = 0.0;
  uint64_t base_seed = 0;    // scene i uses seed base_seed + i
};

/// Writes manifest.txt plus one tensor container per scene into dir.
void generate_split(const SplitConfig& split, const DataGenConfig& cfg,
                    const std::string& dir);

}  // namespace autr
