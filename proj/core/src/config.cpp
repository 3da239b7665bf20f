#include "autr/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace autr {

const std::vector<Config::KeySpec>& Config::schema() {
  static const std::vector<KeySpec> kSchema = {
      // architecture
      {"image_size", "64", "frame height and width H0 = W0; divisible by 16"},
      {"frames", "2", "frames per clip T"},
      {"audio_size", "32", "spectrogram height and width H_a = W_a"},
      {"audio_channels", "32", "pooled audio embedding width C_a"},
      {"fusion_dim", "64", "shared audio-visual channel width C_av"},
      {"model_dim", "64", "transformer width D"},
      {"pyr_c1", "32", "visual pyramid channels at stride 4"},
      {"pyr_c2", "48", "visual pyramid channels at stride 8"},
      {"pyr_c3", "64", "visual pyramid channels at stride 16"},
      {"num_queries", "4", "decoder query count N_q"},
      {"heads", "4", "attention heads"},
      {"enc_layers", "2", "transformer encoder layers"},
      {"dec_layers", "2", "transformer decoder layers"},
      {"ffn_dim", "128", "feed-forward hidden width"},
      {"mask_channels", "32", "mask feature channels C_m"},
      {"audio_enc_depth", "2",
       "audio encoder conv depth; 0 = single per-pixel linear map"},
      {"audio_queries", "true",
       "initialize decoder queries from audio (false = zero content)"},
      // objective
      {"lambda_dice", "1", "dice cost weight"},
      {"lambda_focal", "1", "focal cost weight"},
      {"lambda_sound", "1", "sounding-score cost weight"},
      {"focal_gamma", "2", "focal focusing exponent"},
      {"focal_alpha", "0.25", "focal positive-class weight"},
      {"dice_eps", "1", "dice smoothing constant"},
      {"negative_sounding", "false",
       "also supervise unmatched queries' sounding scores toward 0"},
      // optimization
      {"lr", "0.0001", "AdamW learning rate"},
      {"lr_decay", "1.0", "learning-rate multiplier applied after each epoch"},
      {"weight_decay", "0.0005", "AdamW decoupled weight decay"},
      {"adam_beta1", "0.9", "AdamW beta1"},
      {"adam_beta2", "0.999", "AdamW beta2"},
      {"adam_eps", "1e-08", "AdamW epsilon"},
      {"epochs", "50", "training epochs"},
      {"batch_size", "8", "scenes per optimizer step"},
      {"seed", "0", "parameter init and shuffle seed"},
      // evaluation
      {"beta_sq", "0.3", "beta^2 of the F-measure"},
      {"threshold", "0.5", "binarization threshold for masks"},
      // synthetic data
      {"num_classes", "8", "total object classes K"},
      {"open_set_classes", "2",
       "classes reserved for the open_set split (taken from the middle of K)"},
      {"train_scenes", "512", "scene count of the train split"},
      {"val_scenes", "64", "scene count of the val split"},
      {"test_scenes", "64", "scene count of the test split"},
      {"open_set_scenes", "64", "scene count of the open_set split"},
      {"noise_level", "0.05", "gaussian noise scale on spectrograms"},
      {"multi_source", "false", "both objects sound (MS3-style scenes)"},
      {"data_seed", "1234", "base seed for scene generation"},
      // runtime
      {"threads", "4", "GEMM thread cap"},
  };
  return kSchema;
}

namespace {
const Config::KeySpec* find_key(const std::string& name) {
  for (const auto& k : Config::schema())
    if (k.name == name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}
}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw FormatError("unknown config key: " + key);
  values_[key] = value;
}

std::string Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const KeySpec* k = find_key(key);
  if (!k) throw FormatError("unknown config key: " + key);
  return k->def;
}

int64_t Config::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw FormatError("config key " + key + ": '" + v + "' is not an integer");
}

double Config::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw FormatError("config key " + key + ": '" + v + "' is not a number");
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config key " + key + ": '" + v + "' is not a boolean");
}

Config Config::parse_string(const std::string& text) {
  Config c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(lineno) +
                        ": expected key=value, got '" + t + "'");
    }
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str());
}

std::string Config::print() const {
  std::ostringstream os;
  for (const auto& k : schema()) os << k.name << "=" << get(k.name) << "\n";
  return os.str();
}

void Config::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write config file: " + path);
  out << print();
}

bool Config::operator==(const Config& other) const {
  for (const auto& k : schema())
    if (get(k.name) != other.get(k.name)) return false;
  return true;
}

}  // namespace autr
