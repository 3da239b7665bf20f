#pragma once

#include "autr/synthetic.hpp"

namespace autr {

/// One dataset record: the training tuple plus the extras carried in the
/// scene file and its manifest line.
struct SceneRecord {
  int64_t id = 0;
  std::string file;
  std::array<int64_t, 2> classes{0, 0};
  std::vector<int64_t> sounding;
  TrainScene scene;
  Tensor distractor;  // [T, H0, W0]
};

/// Reads manifest.txt in dir and loads every referenced scene container.
/// Per-frame presence is derived from the ground-truth mask.
std::vector<SceneRecord> load_split(const std::string& dir);

/// The training tuples only.
std::vector<TrainScene> to_train_scenes(const std::vector<SceneRecord>& recs);

/// Loads a single scene container (no manifest metadata).
SceneRecord load_scene_file(const std::string& path);

}  // namespace autr
