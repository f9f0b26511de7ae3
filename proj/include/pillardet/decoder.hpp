#pragma once

#include <string>

#include <json.hpp>

#include "pillardet/attention.hpp"
#include "pillardet/mixing.hpp"
#include "pillardet/sampling.hpp"

namespace pillardet {

struct ModelConfig {
  std::size_t queries = 64;
  std::size_t feat_dim = 64;  // D
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t head_hidden = 64;
  std::size_t num_classes = 4;
  std::size_t channels = 32;  // must match the scene's feature channels
  std::size_t layers = 6;     // L_max; inference may exit earlier
  double roi_half_extent = 25.0;
  TauMode tau_mode = TauMode::kAdaptive;
  DistanceFn distance_fn = DistanceFn::kLinear;
  MixingOrder mixing_order = MixingOrder::kChannelThenPoint;
  SamplingConfig sampling;

  void validate() const;
};

// Every learnable array of the decoder. One set is shared by all layers.
struct ModelParams {
  ModelConfig config;
  DenseArray query_embed;  // N x D
  SasaParams sasa;
  SamplingParams sampling;
  MixingParams mixing;
};

ModelParams init_model_params(const ModelConfig& cfg, uint64_t seed);

// Visits every parameter array in a fixed, documented order; the same order
// defines the flat vector and the serialized manifest.
void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, DenseArray&)>& fn);
void visit_params(const ModelParams& p,
                  const std::function<void(const std::string&, const DenseArray&)>& fn);

struct ParamEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset;  // in doubles, within the flat vector
};

std::vector<ParamEntry> param_manifest(const ModelParams& p);
std::size_t param_count(const ModelParams& p);
std::vector<double> flatten_params(const ModelParams& p);
void unflatten_params(ModelParams& p, const std::vector<double>& flat);

// Versioned container: magic, JSON header (config + manifest), raw doubles
// little-endian. Round trips are lossless.
std::string params_to_bytes(const ModelParams& p);
ModelParams params_from_bytes(const std::string& bytes);
void save_params(const ModelParams& p, const std::string& path);
ModelParams load_params(const std::string& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

std::string tau_mode_name(TauMode m);
TauMode tau_mode_from_name(const std::string& s);
std::string distance_fn_name(DistanceFn f);
DistanceFn distance_fn_from_name(const std::string& s);
std::string mixing_order_name(MixingOrder m);
MixingOrder mixing_order_from_name(const std::string& s);

struct LayerOutput {
  std::vector<QueryBox> boxes;
  DenseArray scores;  // N x num_classes, in [0, 1]
};

struct Detections {
  std::vector<LayerOutput> layers;  // one entry per decoder layer, in order
  QuerySet final_queries;           // refined boxes and features after the last layer
};

// One decoder block: self attention over queries, spatio-temporal sampling,
// adaptive mixing, prediction heads, box update.
QuerySet decoder_layer(const QuerySet& qs, const Scene& scene, const SceneFeatures& features,
                       const ModelParams& params, LayerOutput* record);

// Applies decoder_layer `layers` times with the same parameters. Because the
// weights are shared, layer l of a longer run is bit-identical to the output
// of an l-layer run.
Detections run_decoder(const ModelParams& params, const Scene& scene,
                       const SceneFeatures& features, std::size_t layers, uint64_t query_seed);

struct Detection {
  std::size_t query = 0;
  QueryBox box;
  std::size_t class_id = 0;
  double score = 0.0;
};

// Keeps queries whose best class score reaches the threshold; sorted by
// descending score, ties broken by ascending query index.
std::vector<Detection> finalize(const LayerOutput& layer, double score_threshold);

}  // namespace pillardet
