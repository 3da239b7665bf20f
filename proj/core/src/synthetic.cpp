#include "autr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "autr/container.hpp"

namespace autr {

DataGenConfig DataGenConfig::from_config(const Config& cfg) {
  DataGenConfig d;
  d.image_size = cfg.get_int("image_size");
  d.frames = cfg.get_int("frames");
  d.audio_size = cfg.get_int("audio_size");
  d.num_classes = cfg.get_int("num_classes");
  return d;
}

namespace {

struct Rgb {
  double r, g, b;
};

// Class colors sit on a straight line through RGB space, ordered by class
// id. Appearance then varies smoothly with the class index, exactly like the
// audio stripe density, so unseen interior classes are interpolations of
// seen ones rather than novel hues.
Rgb class_color(int64_t class_id, int64_t num_classes) {
  const double steps = num_classes > 1 ? num_classes - 1 : 1;
  const double u = static_cast<double>(class_id) / steps;
  const Rgb a{0.9, 0.25, 0.1}, b{0.1, 0.35, 0.9};
  return {a.r + u * (b.r - a.r), a.g + u * (b.g - a.g),
          a.b + u * (b.b - a.b)};
}

// Object geometry lives on a coarse cell grid (kCell pixels per cell) so the
// rasterized masks stay exactly representable at the segmentation stride;
// drift is a whole number of cells per frame, which keeps it linear in time.
constexpr int64_t kCell = 4;

struct ObjectTrack {
  bool ellipse;
  int64_t rx, ry;       // half extents, cells
  int64_t cx0, cy0;     // center cell at frame 0
  int64_t vx, vy;       // drift, cells per frame
  Rgb color;

  int64_t cx(int64_t t) const { return cx0 + vx * t; }
  int64_t cy(int64_t t) const { return cy0 + vy * t; }

  bool contains(int64_t t, int64_t x, int64_t y) const {
    const double dx = x - cx(t), dy = y - cy(t);
    if (ellipse) {
      const double ax = rx + 0.5, ay = ry + 0.5;
      return (dx * dx) / (ax * ax) + (dy * dy) / (ay * ay) <= 1.0;
    }
    return std::llabs(x - cx(t)) <= rx && std::llabs(y - cy(t)) <= ry;
  }
};

bool tracks_overlap(const ObjectTrack& a, const ObjectTrack& b,
                    int64_t frames) {
  for (int64_t t = 0; t < frames; ++t) {
    const bool apart = std::llabs(a.cx(t) - b.cx(t)) > a.rx + b.rx + 1 ||
                       std::llabs(a.cy(t) - b.cy(t)) > a.ry + b.ry + 1;
    if (!apart) return true;
  }
  return false;
}

bool in_bounds(const ObjectTrack& o, int64_t frames, int64_t cells) {
  for (int64_t t = 0; t < frames; ++t) {
    if (o.cx(t) - o.rx < 0 || o.cx(t) + o.rx >= cells ||
        o.cy(t) - o.ry < 0 || o.cy(t) + o.ry >= cells)
      return false;
  }
  return true;
}

ObjectTrack sample_track(Rng& rng, int64_t class_id, int64_t num_classes,
                         int64_t cells) {
  ObjectTrack o;
  o.ellipse = class_id % 2 == 1;
  // Radii are capped so a centered object always fits the grid.
  const int64_t rmax = std::min<int64_t>(4, (cells - 1) / 2);
  o.rx = rng.uniform_int(2, rmax);
  o.ry = rng.uniform_int(2, rmax);
  o.cx0 = rng.uniform_int(o.rx, cells - 1 - o.rx);
  o.cy0 = rng.uniform_int(o.ry, cells - 1 - o.ry);
  o.vx = rng.uniform_int(-1, 1);
  o.vy = rng.uniform_int(-1, 1);
  o.color = class_color(class_id, num_classes);
  return o;
}

constexpr double kBackground = 0.08;

}  // namespace

Tensor class_band_pattern(int64_t class_id, int64_t audio_size,
                          int64_t num_classes) {
  if (class_id < 0 || class_id >= num_classes)
    throw ContractError("class_band_pattern: class id " +
                        std::to_string(class_id) + " outside [0, " +
                        std::to_string(num_classes) + ")");
  // Evenly spread bright rows whose count grows linearly with the class id.
  // The pattern mean — the part that survives the audio encoder's spatially
  // invariant pooling — is then a linear function of the class index, exactly
  // mirroring the linear color line, so the audio-to-appearance binding is
  // linear and interpolates cleanly to held-out classes.
  const int64_t rows = 2 * (class_id + 1);
  if (rows > audio_size)
    throw ContractError("class_band_pattern: audio_size " +
                        std::to_string(audio_size) + " too small for class " +
                        std::to_string(class_id));
  Tensor p = Tensor::zeros({audio_size, audio_size});
  for (int64_t j = 0; j < rows; ++j) {
    const int64_t r = j * audio_size / rows;
    for (int64_t c = 0; c < audio_size; ++c) p.data()[r * audio_size + c] = 1.0;
  }
  return p;
}

Scene generate_scene(const SceneSpec& spec, const DataGenConfig& cfg) {
  if (spec.classes[0] == spec.classes[1])
    throw ContractError("generate_scene: classes must be distinct");
  if (spec.sounding.empty())
    throw ContractError("generate_scene: sounding set is empty");
  for (int64_t c : spec.classes) {
    if (c < 0 || c >= cfg.num_classes)
      throw ContractError("generate_scene: class id " + std::to_string(c) +
                          " outside [0, " + std::to_string(cfg.num_classes) +
                          ")");
  }
  Rng rng(spec.seed);
  const int64_t S = cfg.image_size, T = cfg.frames;
  if (S % kCell != 0)
    throw ContractError("generate_scene: image_size must be a multiple of " +
                        std::to_string(kCell));
  const int64_t cells = S / kCell;
  if (cells < 5)
    throw ContractError("generate_scene: image_size " + std::to_string(S) +
                        " is too small for two objects");

  // Place two non-overlapping drifting objects.
  std::array<ObjectTrack, 2> tracks;
  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    tracks[0] = sample_track(rng, spec.classes[0], cfg.num_classes, cells);
    tracks[1] = sample_track(rng, spec.classes[1], cfg.num_classes, cells);
    placed = in_bounds(tracks[0], T, cells) && in_bounds(tracks[1], T, cells) &&
             !tracks_overlap(tracks[0], tracks[1], T);
  }
  if (!placed)
    throw ContractError(
        "generate_scene: could not place non-overlapping objects in 100 "
        "attempts");

  std::vector<bool> is_sounding(2, false);
  for (int64_t slot : spec.sounding) {
    if (slot < 0 || slot > 1)
      throw ContractError("generate_scene: bad sounding slot " +
                          std::to_string(slot));
    is_sounding[slot] = true;
  }

  Scene scene;
  scene.spec = spec;
  scene.video.frames = Tensor::full({T, 3, S, S}, kBackground);
  scene.gt.mask = Tensor::zeros({T, S, S});
  scene.distractor = Tensor::zeros({T, S, S});
  scene.gt.present.assign(T, false);

  auto& vid = scene.video.frames.data();
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t cy = 0; cy < cells; ++cy) {
      for (int64_t cx = 0; cx < cells; ++cx) {
        for (int slot = 0; slot < 2; ++slot) {
          const ObjectTrack& o = tracks[slot];
          if (!o.contains(t, cx, cy)) continue;
          for (int64_t y = cy * kCell; y < (cy + 1) * kCell; ++y) {
            for (int64_t x = cx * kCell; x < (cx + 1) * kCell; ++x) {
              vid[((t * 3 + 0) * S + y) * S + x] = o.color.r;
              vid[((t * 3 + 1) * S + y) * S + x] = o.color.g;
              vid[((t * 3 + 2) * S + y) * S + x] = o.color.b;
              if (is_sounding[slot])
                scene.gt.mask.data()[(t * S + y) * S + x] = 1.0;
              else
                scene.distractor.data()[(t * S + y) * S + x] = 1.0;
            }
          }
          if (is_sounding[slot]) scene.gt.present[t] = true;
        }
      }
    }
  }

  // Audio: sum of the sounding classes' band patterns plus noise.
  const int64_t A = cfg.audio_size;
  scene.audio.spectrograms = Tensor::zeros({T, A, A});
  auto& aud = scene.audio.spectrograms.data();
  for (int slot = 0; slot < 2; ++slot) {
    if (!is_sounding[slot]) continue;
    Tensor band = class_band_pattern(spec.classes[slot], A, cfg.num_classes);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t i = 0; i < A * A; ++i) aud[t * A * A + i] += band.data()[i];
  }
  if (spec.noise_level > 0.0) {
    for (auto& v : aud) v += spec.noise_level * rng.normal(0.0, 1.0);
  }
  return scene;
}

void generate_split(const SplitConfig& split, const DataGenConfig& cfg,
                    const std::string& dir) {
  if (split.class_pool.size() < 2)
    throw ContractError("generate_split: class pool needs at least 2 classes");
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  if (!manifest) throw FormatError("cannot write manifest in " + dir);

  for (int64_t i = 0; i < split.count; ++i) {
    Rng rng(split.base_seed + static_cast<uint64_t>(i));
    SceneSpec spec;
    // Two distinct classes from the pool.
    const int64_t n = static_cast<int64_t>(split.class_pool.size());
    const int64_t a = rng.uniform_int(0, n - 1);
    int64_t b = rng.uniform_int(0, n - 2);
    if (b >= a) ++b;
    spec.classes = {split.class_pool[a], split.class_pool[b]};
    if (split.multi_source)
      spec.sounding = {0, 1};
    else
      spec.sounding = {rng.uniform_int(0, 1)};
    spec.noise_level = split.noise_level;
    spec.seed = rng.next_u64();

    Scene scene = generate_scene(spec, cfg);
    char fname[32];
    std::snprintf(fname, sizeof(fname), "scene_%04lld.autr",
                  static_cast<long long>(i));
    write_container(dir + "/" + fname,
                    {ContainerEntry::f64("video", scene.video.frames),
                     ContainerEntry::f64("audio", scene.audio.spectrograms),
                     ContainerEntry::f64("gt", scene.gt.mask),
                     ContainerEntry::f64("distractor", scene.distractor)});
    manifest << "id=" << i << " file=" << fname << " classes="
             << spec.classes[0] << "," << spec.classes[1] << " sounding=";
    for (size_t s = 0; s < spec.sounding.size(); ++s) {
      if (s) manifest << ",";
      manifest << spec.sounding[s];
    }
    manifest << "\n";
  }
}

}  // namespace autr
