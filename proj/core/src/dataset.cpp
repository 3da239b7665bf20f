#include "autr/dataset.hpp"

#include <fstream>
#include <sstream>

#include "autr/container.hpp"

namespace autr {

namespace {

Tensor entry_tensor(const ContainerEntry& e) {
  return Tensor::from_data(e.shape, e.values);
}

std::vector<int64_t> parse_int_list(const std::string& s) {
  std::vector<int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

void fill_from_entries(SceneRecord& rec,
                       const std::vector<ContainerEntry>& entries,
                       const std::string& path) {
  rec.scene.video.frames = entry_tensor(find_entry(entries, "video"));
  rec.scene.audio.spectrograms = entry_tensor(find_entry(entries, "audio"));
  rec.scene.gt.mask = entry_tensor(find_entry(entries, "gt"));
  rec.distractor = entry_tensor(find_entry(entries, "distractor"));

  const Shape& v = rec.scene.video.frames.shape();
  const Shape& m = rec.scene.gt.mask.shape();
  if (v.size() != 4 || m.size() != 3 || v[0] != m[0] || v[2] != m[1] ||
      v[3] != m[2]) {
    throw FormatError("scene file " + path + ": video " + shape_str(v) +
                      " and gt " + shape_str(m) + " are inconsistent");
  }
  const int64_t T = m[0], hw = m[1] * m[2];
  rec.scene.gt.present.assign(T, false);
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t i = 0; i < hw; ++i) {
      if (rec.scene.gt.mask.data()[t * hw + i] > 0.5) {
        rec.scene.gt.present[t] = true;
        break;
      }
    }
  }
}

}  // namespace

SceneRecord load_scene_file(const std::string& path) {
  SceneRecord rec;
  rec.file = path;
  fill_from_entries(rec, read_container(path), path);
  return rec;
}

std::vector<SceneRecord> load_split(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.txt";
  std::ifstream manifest(manifest_path);
  if (!manifest) throw FormatError("cannot open manifest: " + manifest_path);

  std::vector<SceneRecord> records;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    SceneRecord rec;
    std::stringstream ss(line);
    std::string field;
    bool have_id = false, have_file = false;
    while (ss >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) {
        throw FormatError(manifest_path + ":" + std::to_string(line_no) +
                          ": malformed field '" + field + "'");
      }
      const std::string key = field.substr(0, eq);
      const std::string val = field.substr(eq + 1);
      if (key == "id") {
        rec.id = std::stoll(val);
        have_id = true;
      } else if (key == "file") {
        rec.file = val;
        have_file = true;
      } else if (key == "classes") {
        auto cs = parse_int_list(val);
        if (cs.size() != 2) {
          throw FormatError(manifest_path + ":" + std::to_string(line_no) +
                            ": expected two classes");
        }
        rec.classes = {cs[0], cs[1]};
      } else if (key == "sounding") {
        rec.sounding = parse_int_list(val);
      }
      // Unknown keys are tolerated for forward compatibility.
    }
    if (!have_id || !have_file) {
      throw FormatError(manifest_path + ":" + std::to_string(line_no) +
                        ": missing id= or file=");
    }
    const std::string path = dir + "/" + rec.file;
    fill_from_entries(rec, read_container(path), path);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<TrainScene> to_train_scenes(const std::vector<SceneRecord>& recs) {
  std::vector<TrainScene> out;
  out.reserve(recs.size());
  for (const auto& r : recs) out.push_back(r.scene);
  return out;
}

}  // namespace autr
