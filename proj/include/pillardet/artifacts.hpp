#pragma once

#include <string>

#include "pillardet/decoder.hpp"
#include "pillardet/metrics.hpp"

namespace pillardet {

// Writes via a temp file in the same directory, then renames into place.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// One JSON object per detection per layer:
// {"query_id", "layer", "box": [9], "class", "score"}; layers are 1-based.
std::string detections_to_jsonl(const Detections& dets, double score_threshold);

// One JSON object per (frame, object):
// {"frame", "object_id", "class", "box": [9]} in current-frame ego coords.
std::string gt_to_jsonl(const Scene& scene);

// Predictions of the highest layer present in the file.
std::vector<PredBox> preds_from_jsonl(const std::string& text);

GroundTruthFrame gt_frame_from_jsonl(const std::string& text, int frame);

// One "step,loss" line per fit step, no header.
std::string trace_to_csv(const std::vector<double>& trace);

}  // namespace pillardet
