#include "pillardet/decoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace pillardet {

namespace {

constexpr char kParamsMagic[8] = {'P', 'D', 'P', 'M', '0', '0', '0', '1'};

void gaussian_fill(DenseArray& a, double std_dev, uint64_t seed, const char* name) {
  Rng rng(hash_combine(seed, splitmix64(std::hash<std::string>{}(name))));
  for (double& v : a.values) v = std_dev * rng.gaussian();
}

}  // namespace

std::string tau_mode_name(TauMode m) {
  return m == TauMode::kAdaptive ? "adaptive" : "shared_learnable";
}

TauMode tau_mode_from_name(const std::string& s) {
  if (s == "adaptive") return TauMode::kAdaptive;
  if (s == "shared_learnable") return TauMode::kSharedLearnable;
  throw ConfigError("unknown tau_mode: " + s);
}

std::string distance_fn_name(DistanceFn f) {
  switch (f) {
    case DistanceFn::kLinear: return "linear";
    case DistanceFn::kSquared: return "squared";
    case DistanceFn::kSqrt: return "sqrt";
  }
  return "linear";
}

DistanceFn distance_fn_from_name(const std::string& s) {
  if (s == "linear") return DistanceFn::kLinear;
  if (s == "squared") return DistanceFn::kSquared;
  if (s == "sqrt") return DistanceFn::kSqrt;
  throw ConfigError("unknown distance_fn: " + s);
}

std::string mixing_order_name(MixingOrder m) {
  switch (m) {
    case MixingOrder::kChannelThenPoint: return "channel_then_point";
    case MixingOrder::kPointThenChannel: return "point_then_channel";
    case MixingOrder::kChannelOnly: return "channel_only";
    case MixingOrder::kPointOnly: return "point_only";
    case MixingOrder::kStatic: return "static";
    case MixingOrder::kNone: return "none";
  }
  return "channel_then_point";
}

MixingOrder mixing_order_from_name(const std::string& s) {
  if (s == "channel_then_point") return MixingOrder::kChannelThenPoint;
  if (s == "point_then_channel") return MixingOrder::kPointThenChannel;
  if (s == "channel_only") return MixingOrder::kChannelOnly;
  if (s == "point_only") return MixingOrder::kPointOnly;
  if (s == "static") return MixingOrder::kStatic;
  if (s == "none") return MixingOrder::kNone;
  throw ConfigError("unknown mixing_order: " + s);
}

void ModelConfig::validate() const {
  if (queries < 1) throw ConfigError("model.queries must be >= 1");
  if (feat_dim < 1 || heads < 1 || head_dim < 1 || head_hidden < 1)
    throw ConfigError("model dimensions must be >= 1");
  if (num_classes < 1) throw ConfigError("model.num_classes must be >= 1");
  if (channels < 1) throw ConfigError("model.channels must be >= 1");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (roi_half_extent <= 0.0) throw ConfigError("model.roi_half_extent must be > 0");
  sampling.validate();
}

ModelParams init_model_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  const std::size_t d = cfg.feat_dim;
  const std::size_t inner = cfg.heads * cfg.head_dim;
  const std::size_t c = cfg.channels;
  const std::size_t pt = cfg.sampling.total_points();
  const std::size_t ts = cfg.sampling.frames * cfg.sampling.points_per_frame;
  const std::size_t hh = cfg.head_hidden;

  p.query_embed = DenseArray({cfg.queries, d});

  p.sasa.heads = cfg.heads;
  p.sasa.head_dim = cfg.head_dim;
  p.sasa.tau_mode = cfg.tau_mode;
  p.sasa.distance_fn = cfg.distance_fn;
  p.sasa.wq = DenseArray({d, inner});
  p.sasa.bq = DenseArray({inner});
  p.sasa.wk = DenseArray({d, inner});
  p.sasa.bk = DenseArray({inner});
  p.sasa.wv = DenseArray({d, inner});
  p.sasa.bv = DenseArray({inner});
  p.sasa.wo = DenseArray({inner, d});
  p.sasa.bo = DenseArray({d});
  p.sasa.wtau = DenseArray({d, cfg.heads});
  p.sasa.btau = DenseArray({cfg.heads});
  p.sasa.shared_taus = DenseArray({cfg.heads});
  p.sasa.ln_gain = DenseArray({d});
  p.sasa.ln_shift = DenseArray({d});

  p.sampling.offset_w = DenseArray({d, ts * 3});
  p.sampling.offset_b = DenseArray({ts * 3});
  p.sampling.scalew_w = DenseArray({d, ts * cfg.sampling.levels});
  p.sampling.scalew_b = DenseArray({ts * cfg.sampling.levels});

  p.mixing.order = cfg.mixing_order;
  p.mixing.cw_w = DenseArray({d, c * c});
  p.mixing.cw_b = DenseArray({c * c});
  p.mixing.pw_w = DenseArray({d, pt * pt});
  p.mixing.pw_b = DenseArray({pt * pt});
  p.mixing.static_wc = DenseArray({c, c});
  p.mixing.static_wp = DenseArray({pt, pt});
  p.mixing.ln_channel_gain = DenseArray({c});
  p.mixing.ln_channel_shift = DenseArray({c});
  p.mixing.ln_point_gain = DenseArray({pt});
  p.mixing.ln_point_shift = DenseArray({pt});
  p.mixing.agg_w = DenseArray({pt * c, d});
  p.mixing.agg_b = DenseArray({d});
  p.mixing.ln_out_gain = DenseArray({d});
  p.mixing.ln_out_shift = DenseArray({d});
  p.mixing.reg_h_w = DenseArray({d, hh});
  p.mixing.reg_h_b = DenseArray({hh});
  p.mixing.reg_o_w = DenseArray({hh, 9});
  p.mixing.reg_o_b = DenseArray({9});
  p.mixing.cls_h_w = DenseArray({d, hh});
  p.mixing.cls_h_b = DenseArray({hh});
  p.mixing.cls_o_w = DenseArray({hh, cfg.num_classes});
  p.mixing.cls_o_b = DenseArray({cfg.num_classes});

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  gaussian_fill(p.query_embed, 1.0, seed, "query_embed");
  gaussian_fill(p.sasa.wq, inv_sqrt_d, seed, "sasa.wq");
  gaussian_fill(p.sasa.wk, inv_sqrt_d, seed, "sasa.wk");
  gaussian_fill(p.sasa.wv, inv_sqrt_d, seed, "sasa.wv");
  gaussian_fill(p.sasa.wo, 1.0 / std::sqrt(static_cast<double>(inner)), seed, "sasa.wo");
  gaussian_fill(p.sasa.wtau, 0.1 * inv_sqrt_d, seed, "sasa.wtau");
  for (double& v : p.sasa.shared_taus.values) v = 1.0;
  for (double& v : p.sasa.ln_gain.values) v = 1.0;
  gaussian_fill(p.sampling.offset_w, 0.5 * inv_sqrt_d, seed, "sampling.offset_w");
  gaussian_fill(p.sampling.scalew_w, inv_sqrt_d, seed, "sampling.scalew_w");
  gaussian_fill(p.mixing.cw_w, inv_sqrt_d, seed, "mixing.cw_w");
  gaussian_fill(p.mixing.pw_w, inv_sqrt_d, seed, "mixing.pw_w");
  gaussian_fill(p.mixing.static_wc, 1.0 / std::sqrt(static_cast<double>(c)), seed,
                "mixing.static_wc");
  gaussian_fill(p.mixing.static_wp, 1.0 / std::sqrt(static_cast<double>(pt)), seed,
                "mixing.static_wp");
  for (double& v : p.mixing.ln_channel_gain.values) v = 1.0;
  for (double& v : p.mixing.ln_point_gain.values) v = 1.0;
  gaussian_fill(p.mixing.agg_w, 1.0 / std::sqrt(static_cast<double>(pt * c)), seed,
                "mixing.agg_w");
  for (double& v : p.mixing.ln_out_gain.values) v = 1.0;
  const double inv_sqrt_hh = 1.0 / std::sqrt(static_cast<double>(hh));
  gaussian_fill(p.mixing.reg_h_w, inv_sqrt_d, seed, "mixing.reg_h_w");
  gaussian_fill(p.mixing.reg_o_w, 0.01 * inv_sqrt_hh, seed, "mixing.reg_o_w");
  gaussian_fill(p.mixing.cls_h_w, inv_sqrt_d, seed, "mixing.cls_h_w");
  gaussian_fill(p.mixing.cls_o_w, 0.01 * inv_sqrt_hh, seed, "mixing.cls_o_w");
  return p;
}

namespace {

template <typename Params, typename Fn>
void visit_params_impl(Params& p, const Fn& fn) {
  fn("query_embed", p.query_embed);
  fn("sasa.wq", p.sasa.wq);
  fn("sasa.bq", p.sasa.bq);
  fn("sasa.wk", p.sasa.wk);
  fn("sasa.bk", p.sasa.bk);
  fn("sasa.wv", p.sasa.wv);
  fn("sasa.bv", p.sasa.bv);
  fn("sasa.wo", p.sasa.wo);
  fn("sasa.bo", p.sasa.bo);
  fn("sasa.wtau", p.sasa.wtau);
  fn("sasa.btau", p.sasa.btau);
  fn("sasa.shared_taus", p.sasa.shared_taus);
  fn("sasa.ln_gain", p.sasa.ln_gain);
  fn("sasa.ln_shift", p.sasa.ln_shift);
  fn("sampling.offset_w", p.sampling.offset_w);
  fn("sampling.offset_b", p.sampling.offset_b);
  fn("sampling.scalew_w", p.sampling.scalew_w);
  fn("sampling.scalew_b", p.sampling.scalew_b);
  fn("mixing.cw_w", p.mixing.cw_w);
  fn("mixing.cw_b", p.mixing.cw_b);
  fn("mixing.pw_w", p.mixing.pw_w);
  fn("mixing.pw_b", p.mixing.pw_b);
  fn("mixing.static_wc", p.mixing.static_wc);
  fn("mixing.static_wp", p.mixing.static_wp);
  fn("mixing.ln_channel_gain", p.mixing.ln_channel_gain);
  fn("mixing.ln_channel_shift", p.mixing.ln_channel_shift);
  fn("mixing.ln_point_gain", p.mixing.ln_point_gain);
  fn("mixing.ln_point_shift", p.mixing.ln_point_shift);
  fn("mixing.agg_w", p.mixing.agg_w);
  fn("mixing.agg_b", p.mixing.agg_b);
  fn("mixing.ln_out_gain", p.mixing.ln_out_gain);
  fn("mixing.ln_out_shift", p.mixing.ln_out_shift);
  fn("mixing.reg_h_w", p.mixing.reg_h_w);
  fn("mixing.reg_h_b", p.mixing.reg_h_b);
  fn("mixing.reg_o_w", p.mixing.reg_o_w);
  fn("mixing.reg_o_b", p.mixing.reg_o_b);
  fn("mixing.cls_h_w", p.mixing.cls_h_w);
  fn("mixing.cls_h_b", p.mixing.cls_h_b);
  fn("mixing.cls_o_w", p.mixing.cls_o_w);
  fn("mixing.cls_o_b", p.mixing.cls_o_b);
}

}  // namespace

void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, DenseArray&)>& fn) {
  visit_params_impl(p, fn);
}

void visit_params(const ModelParams& p,
                  const std::function<void(const std::string&, const DenseArray&)>& fn) {
  visit_params_impl(p, fn);
}

std::vector<ParamEntry> param_manifest(const ModelParams& p) {
  std::vector<ParamEntry> manifest;
  std::size_t offset = 0;
  visit_params(p, [&](const std::string& name, const DenseArray& a) {
    manifest.push_back({name, a.shape, offset});
    offset += a.numel();
  });
  return manifest;
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  visit_params(p, [&](const std::string&, const DenseArray& a) { n += a.numel(); });
  return n;
}

std::vector<double> flatten_params(const ModelParams& p) {
  std::vector<double> flat;
  flat.reserve(param_count(p));
  visit_params(p, [&](const std::string&, const DenseArray& a) {
    flat.insert(flat.end(), a.values.begin(), a.values.end());
  });
  return flat;
}

void unflatten_params(ModelParams& p, const std::vector<double>& flat) {
  if (flat.size() != param_count(p))
    throw ConfigError("unflatten_params: flat vector has wrong length");
  std::size_t offset = 0;
  visit_params(p, [&](const std::string&, DenseArray& a) {
    std::copy(flat.begin() + offset, flat.begin() + offset + a.numel(), a.values.begin());
    offset += a.numel();
  });
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j{{"queries", cfg.queries},
                   {"feat_dim", cfg.feat_dim},
                   {"heads", cfg.heads},
                   {"head_dim", cfg.head_dim},
                   {"head_hidden", cfg.head_hidden},
                   {"num_classes", cfg.num_classes},
                   {"channels", cfg.channels},
                   {"layers", cfg.layers},
                   {"roi_half_extent", cfg.roi_half_extent},
                   {"tau_mode", tau_mode_name(cfg.tau_mode)},
                   {"distance_fn", distance_fn_name(cfg.distance_fn)},
                   {"mixing_order", mixing_order_name(cfg.mixing_order)}};
  nlohmann::json js{{"frames", cfg.sampling.frames},
                    {"points_per_frame", cfg.sampling.points_per_frame},
                    {"levels", cfg.sampling.levels},
                    {"align_ego", cfg.sampling.align_ego},
                    {"align_object", cfg.sampling.align_object}};
  nlohmann::json streams = nlohmann::json::array();
  for (const StreamSpec& s : cfg.sampling.streams)
    streams.push_back({{"frames", s.frames}, {"resolution_scale", s.resolution_scale}});
  js["streams"] = streams;
  j["sampling"] = js;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig cfg;
    cfg.queries = j.at("queries").get<std::size_t>();
    cfg.feat_dim = j.at("feat_dim").get<std::size_t>();
    cfg.heads = j.at("heads").get<std::size_t>();
    cfg.head_dim = j.at("head_dim").get<std::size_t>();
    cfg.head_hidden = j.at("head_hidden").get<std::size_t>();
    cfg.num_classes = j.at("num_classes").get<std::size_t>();
    cfg.channels = j.at("channels").get<std::size_t>();
    cfg.layers = j.at("layers").get<std::size_t>();
    cfg.roi_half_extent = j.at("roi_half_extent").get<double>();
    cfg.tau_mode = tau_mode_from_name(j.at("tau_mode").get<std::string>());
    cfg.distance_fn = distance_fn_from_name(j.at("distance_fn").get<std::string>());
    cfg.mixing_order = mixing_order_from_name(j.at("mixing_order").get<std::string>());
    const nlohmann::json& js = j.at("sampling");
    cfg.sampling.frames = js.at("frames").get<std::size_t>();
    cfg.sampling.points_per_frame = js.at("points_per_frame").get<std::size_t>();
    cfg.sampling.levels = js.at("levels").get<std::size_t>();
    cfg.sampling.align_ego = js.at("align_ego").get<bool>();
    cfg.sampling.align_object = js.at("align_object").get<bool>();
    for (const auto& s : js.at("streams")) {
      StreamSpec spec;
      spec.frames = s.at("frames").get<std::vector<std::size_t>>();
      spec.resolution_scale = s.at("resolution_scale").get<double>();
      cfg.sampling.streams.push_back(spec);
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

std::string params_to_bytes(const ModelParams& p) {
  nlohmann::json header;
  header["format"] = "pillardet-params";
  header["version"] = 1;
  header["config"] = model_config_to_json(p.config);
  nlohmann::json manifest = nlohmann::json::array();
  for (const ParamEntry& e : param_manifest(p))
    manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  header["manifest"] = manifest;
  const std::vector<double> flat = flatten_params(p);
  header["total"] = flat.size();

  const std::string header_str = header.dump();
  std::string out(kParamsMagic, sizeof(kParamsMagic));
  const uint64_t header_len = header_str.size();
  out.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.append(header_str);
  const std::size_t data_bytes = flat.size() * sizeof(double);
  const std::size_t data_start = out.size();
  out.resize(out.size() + data_bytes);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + data_start, flat.data(), data_bytes);
  } else {
    for (std::size_t i = 0; i < flat.size(); ++i) {
      uint64_t bits;
      std::memcpy(&bits, &flat[i], sizeof(bits));
      for (int b = 0; b < 8; ++b)
        out[data_start + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  return out;
}

ModelParams params_from_bytes(const std::string& bytes) {
  if (bytes.size() < sizeof(kParamsMagic) + sizeof(uint64_t) ||
      std::memcmp(bytes.data(), kParamsMagic, sizeof(kParamsMagic)) != 0)
    throw ConfigError("not a parameter file");
  uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + sizeof(kParamsMagic), sizeof(header_len));
  const std::size_t header_start = sizeof(kParamsMagic) + sizeof(uint64_t);
  if (bytes.size() < header_start + header_len) throw ConfigError("truncated parameter file");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_start, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed parameter header: ") + e.what());
  }
  if (header.value("format", "") != "pillardet-params" || header.value("version", 0) != 1)
    throw ConfigError("unsupported parameter file version");

  ModelParams p = init_model_params(model_config_from_json(header.at("config")), 0);
  const std::size_t total = header.at("total").get<std::size_t>();
  if (total != param_count(p)) throw ConfigError("parameter count does not match config");
  const std::size_t data_start = header_start + header_len;
  if (bytes.size() != data_start + total * sizeof(double))
    throw ConfigError("parameter file has wrong data length");

  std::vector<double> flat(total);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(flat.data(), bytes.data() + data_start, total * sizeof(double));
  } else {
    for (std::size_t i = 0; i < total; ++i) {
      uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<uint64_t>(
                    static_cast<unsigned char>(bytes[data_start + i * 8 + b]))
                << (8 * b);
      std::memcpy(&flat[i], &bits, sizeof(double));
    }
  }
  for (double v : flat)
    if (!std::isfinite(v)) throw ConfigError("parameter file contains non-finite values");
  unflatten_params(p, flat);
  return p;
}

void save_params(const ModelParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open parameter file for writing: " + path);
  const std::string bytes = params_to_bytes(p);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ConfigError("failed to write parameter file: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open parameter file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return params_from_bytes(bytes);
}

QuerySet decoder_layer(const QuerySet& qs, const Scene& scene, const SceneFeatures& features,
                       const ModelParams& params, LayerOutput* record) {
  const ModelConfig& cfg = params.config;
  const std::size_t n = qs.size();

  QuerySet attended;
  attended.boxes = qs.boxes;
  attended.features = sasa_layer(qs, params.sasa);

  QuerySet next;
  next.boxes.resize(n);
  next.features.resize(n);
  DenseArray scores({n, cfg.num_classes});

  parallel_for(n, [&](std::size_t i) {
    const DenseArray sampled =
        sample_spatiotemporal(attended.boxes[i], attended.features[i], features, scene.cameras,
                              scene.ego, scene.timestamps, params.sampling, cfg.sampling);
    const DenseArray mixed = mix(sampled, attended.features[i], params.mixing);
    const QueryFeature agg = aggregate(mixed, attended.features[i], params.mixing);
    const HeadOutput heads = predict_heads(agg, params.mixing);
    next.boxes[i] = apply_box_update(attended.boxes[i], heads.deltas);
    next.features[i] = agg;
    for (std::size_t c = 0; c < cfg.num_classes; ++c)
      scores(i, c) = 1.0 / (1.0 + std::exp(-heads.logits[c]));
  });

  if (record) {
    record->boxes = next.boxes;
    record->scores = std::move(scores);
  }
  return next;
}

Detections run_decoder(const ModelParams& params, const Scene& scene,
                       const SceneFeatures& features, std::size_t layers, uint64_t query_seed) {
  const ModelConfig& cfg = params.config;
  if (layers < 1) throw ConfigError("run_decoder: need at least one layer");
  if (layers > cfg.layers) throw ConfigError("run_decoder: layer count exceeds the model's maximum");
  if (cfg.channels != static_cast<std::size_t>(scene.config.channels))
    throw ConfigError("model channels do not match the scene's feature channels");

  QuerySet qs = init_queries(cfg.queries, query_seed, cfg.roi_half_extent, params.query_embed);
  Detections dets;
  dets.layers.resize(layers);
  for (std::size_t l = 0; l < layers; ++l)
    qs = decoder_layer(qs, scene, features, params, &dets.layers[l]);
  dets.final_queries = std::move(qs);
  return dets;
}

std::vector<Detection> finalize(const LayerOutput& layer, double score_threshold) {
  const std::size_t n = layer.boxes.size();
  const std::size_t classes = layer.scores.shape[1];
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (layer.scores(i, c) > layer.scores(i, best)) best = c;
    const double score = layer.scores(i, best);
    if (score >= score_threshold) out.push_back({i, layer.boxes[i], best, score});
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.query < b.query;
  });
  return out;
}

}  // namespace pillardet
