#include "pillardet/artifacts.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pillardet {

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".") : target.parent_path();
  const fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot open file for writing: " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw ConfigError("failed to write: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw ConfigError("failed to move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string detections_to_jsonl(const Detections& dets, double score_threshold) {
  std::string out;
  for (std::size_t l = 0; l < dets.layers.size(); ++l) {
    for (const Detection& d : finalize(dets.layers[l], score_threshold)) {
      const nlohmann::json row{{"query_id", d.query},
                               {"layer", l + 1},
                               {"box", box_to_vector(d.box)},
                               {"class", d.class_id},
                               {"score", d.score}};
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

std::string gt_to_jsonl(const Scene& scene) {
  std::string out;
  for (std::size_t t = 0; t < scene.timestamps.size(); ++t) {
    const GroundTruthFrame gt = gt_at(scene, t);
    for (const GroundTruthBox& g : gt.boxes) {
      const nlohmann::json row{
          {"frame", t}, {"object_id", g.object_id}, {"class", g.class_id}, {"box", g.box}};
      out += row.dump();
      out += '\n';
    }
  }
  return out;
}

namespace {

std::vector<nlohmann::json> parse_jsonl(const std::string& text) {
  std::vector<nlohmann::json> rows;
  std::istringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed JSONL at line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::array<double, 9> box9_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 9) throw ConfigError("box must have 9 components");
  std::array<double, 9> box{};
  std::copy(v.begin(), v.end(), box.begin());
  return box;
}

}  // namespace

std::vector<PredBox> preds_from_jsonl(const std::string& text) {
  const std::vector<nlohmann::json> rows = parse_jsonl(text);
  try {
    std::size_t max_layer = 0;
    for (const auto& row : rows)
      max_layer = std::max(max_layer, row.at("layer").get<std::size_t>());
    std::vector<PredBox> preds;
    for (const auto& row : rows) {
      if (row.at("layer").get<std::size_t>() != max_layer) continue;
      PredBox p;
      p.box = box9_from_json(row.at("box"));
      p.class_id = row.at("class").get<std::size_t>();
      p.score = row.at("score").get<double>();
      p.query = row.at("query_id").get<std::size_t>();
      preds.push_back(p);
    }
    return preds;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed detections file: ") + e.what());
  }
}

GroundTruthFrame gt_frame_from_jsonl(const std::string& text, int frame) {
  const std::vector<nlohmann::json> rows = parse_jsonl(text);
  GroundTruthFrame gt;
  try {
    for (const auto& row : rows) {
      if (row.at("frame").get<int>() != frame) continue;
      GroundTruthBox g;
      g.object_id = row.at("object_id").get<int>();
      g.class_id = row.at("class").get<int>();
      g.box = box9_from_json(row.at("box"));
      gt.boxes.push_back(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed ground-truth file: ") + e.what());
  }
  return gt;
}

std::string trace_to_csv(const std::vector<double>& trace) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, trace[i]);
    out += buf;
  }
  return out;
}

}  // namespace pillardet
