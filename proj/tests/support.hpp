#pragma once

#include <map>
#include <string>
#include <vector>

#include "avfuse/align.hpp"
#include "avfuse/fusion.hpp"
#include "avfuse/synthgen.hpp"

namespace avfuse::testing {

struct AlignedDataset {
  std::vector<GroundTruth> ground_truth;
  std::vector<TrainingExample> examples;
};

inline std::map<std::string, std::vector<ScoreStream>> group_streams(const SyntheticData& data) {
  std::map<std::string, std::vector<ScoreStream>> out;
  for (const auto& s : data.streams) out[s.video_id].push_back(s);
  return out;
}

inline AlignedDataset align_dataset(const SyntheticData& data, const StreamLayout& layout) {
  AlignedDataset out;
  const auto by_video = group_streams(data);
  for (const auto& gt : data.ground_truth) {
    const auto a = align_video(gt, by_video.at(gt.video_id), layout);
    out.ground_truth.push_back(gt);
    out.examples.push_back({a.fused, rasterize_labels(gt, a.grid)});
  }
  return out;
}

}  // namespace avfuse::testing
