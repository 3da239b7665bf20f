#include "autr/model.hpp"

#include <set>

#include "autr/container.hpp"
#include "autr/ops.hpp"

namespace autr {

namespace {

constexpr const char* kConfigEntry = "__config__";

// Fixed field order of the architecture echo inside checkpoints.
std::vector<double> dims_to_vector(const ModelDims& d) {
  return {static_cast<double>(d.image_size),
          static_cast<double>(d.frames),
          static_cast<double>(d.audio_size),
          static_cast<double>(d.audio_channels),
          static_cast<double>(d.fusion_dim),
          static_cast<double>(d.model_dim),
          static_cast<double>(d.pyr_c1),
          static_cast<double>(d.pyr_c2),
          static_cast<double>(d.pyr_c3),
          static_cast<double>(d.num_queries),
          static_cast<double>(d.heads),
          static_cast<double>(d.enc_layers),
          static_cast<double>(d.dec_layers),
          static_cast<double>(d.ffn_dim),
          static_cast<double>(d.mask_channels),
          static_cast<double>(d.audio_enc_depth),
          d.audio_queries ? 1.0 : 0.0};
}

ModelDims dims_from_vector(const std::vector<double>& v) {
  if (v.size() != 17)
    throw FormatError("checkpoint: malformed " + std::string(kConfigEntry) +
                      " entry (" + std::to_string(v.size()) + " fields)");
  ModelDims d;
  size_t i = 0;
  auto next = [&]() { return static_cast<int64_t>(v[i++]); };
  d.image_size = next();
  d.frames = next();
  d.audio_size = next();
  d.audio_channels = next();
  d.fusion_dim = next();
  d.model_dim = next();
  d.pyr_c1 = next();
  d.pyr_c2 = next();
  d.pyr_c3 = next();
  d.num_queries = next();
  d.heads = next();
  d.enc_layers = next();
  d.dec_layers = next();
  d.ffn_dim = next();
  d.mask_channels = next();
  d.audio_enc_depth = next();
  d.audio_queries = v[i] != 0.0;
  return d;
}

}  // namespace

Model::Model(const ModelDims& dims, uint64_t seed) : dims_(dims) {
  Rng rng(seed);
  init_visual_encoder(params_, dims_, rng);
  init_audio_encoder(params_, dims_, rng);
  init_projections(params_, dims_, rng);
  init_avef(params_, dims_, rng);
  init_encoder(params_, dims_, rng);
  init_queries(params_, dims_, rng);
  init_decoder(params_, dims_, rng);
  init_pixel_decoder(params_, dims_, rng);
  init_kernel_head(params_, dims_, rng);
  init_sounding_head(params_, dims_, rng);
}

ForwardResult Model::forward(const VideoClip& video,
                             const AudioClip& audio) const {
  ForwardResult r;
  r.pyramid = encode_visual(video, params_, dims_);
  r.audio = encode_audio(audio, params_, dims_);
  project_features(r.pyramid, r.audio, params_, dims_, &r.pyramid_av,
                   &r.audio_av);
  r.fused = avef_fuse(r.pyramid_av, r.audio_av, params_, dims_);
  r.encoded = encode(r.fused, params_, dims_);
  r.queries = make_queries(r.audio_av, params_, dims_);
  r.decoded = decode(r.queries, r.encoded, params_, dims_);
  r.mask_features = pixel_decode(r.pyramid, r.audio_av, r.encoded, params_,
                                 dims_);
  r.kernels = generate_kernels(r.decoded, params_, dims_);
  r.mask_logits = dynamic_convolve(r.mask_features, r.kernels);
  r.scores = sounding_head(r.decoded, params_, dims_);
  return r;
}

void Model::save_checkpoint(const std::string& path) const {
  std::vector<ContainerEntry> entries;
  auto cfg = dims_to_vector(dims_);
  entries.push_back({kConfigEntry,
                     ContainerEntry::kF64,
                     {static_cast<int64_t>(cfg.size())},
                     cfg});
  for (const auto& [name, t] : params_.all())
    entries.push_back(ContainerEntry::f64(name, t));
  write_container(path, entries);
}

void Model::load_parameters(const std::string& path) {
  auto entries = read_container(path);
  const auto& cfg = find_entry(entries, kConfigEntry);
  const ModelDims file_dims = dims_from_vector(cfg.values);
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.name == kConfigEntry) continue;
    if (!params_.contains(e.name))
      throw FormatError("checkpoint " + path + ": unexpected parameter '" +
                        e.name + "'");
    Tensor& t = params_.get(e.name);
    if (t.shape() != e.shape)
      throw FormatError("checkpoint " + path + ": parameter '" + e.name +
                        "' has shape " + shape_str(e.shape) + ", expected " +
                        shape_str(t.shape()));
    t.data() = e.values;
    seen.insert(e.name);
  }
  for (const auto& [name, t] : params_.all()) {
    if (!seen.count(name))
      throw FormatError("checkpoint " + path + ": missing parameter '" +
                        name + "'");
  }
  // Parameter shapes pin most of the architecture; the dims echo covers the
  // rest (input sizes, query initialization mode).
  if (dims_to_vector(file_dims) != dims_to_vector(dims_)) {
    throw FormatError("checkpoint " + path +
                      ": architecture dims do not match this model");
  }
}

Model Model::load_checkpoint(const std::string& path) {
  auto entries = read_container(path);
  const auto& cfg = find_entry(entries, kConfigEntry);
  Model m(dims_from_vector(cfg.values), /*seed=*/0);
  m.load_parameters(path);
  return m;
}

}  // namespace autr
