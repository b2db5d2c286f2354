#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avfuse/timeline.hpp"

namespace avfuse {

struct Proposal {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  double confidence = 0.0;

  bool operator==(const Proposal&) const = default;
};

struct DetectionResult {
  std::string video_id;
  double video_score = 0.0;
  std::vector<double> token_scores;
};

// Maximum token score.
double detect_video(std::span<const double> token_scores);

enum class RunConfidence { kMean, kMax };

struct ProposalConfig {
  std::vector<double> thresholds;  // empty is rejected
  int max_gap_tokens = 0;
  int top_k = 100;
  RunConfidence confidence = RunConfidence::kMean;
};

// 0.05, 0.10, ..., 0.95
std::vector<double> default_thresholds();

// Threshold-sweep proposals: for each threshold (descending), maximal runs of
// tokens scoring >= threshold become intervals. Runs separated by at most
// max_gap_tokens sub-threshold tokens merge. Identical intervals keep their
// best confidence. Sorted by confidence descending, ties by earlier start.
std::vector<Proposal> propose_segments(std::span<const double> token_scores, const TokenGrid& grid,
                                       const ProposalConfig& cfg);

// Token is fake iff some proposal covers part of it.
TokenLabels proposals_to_mask(std::span<const Proposal> proposals, const TokenGrid& grid);

}  // namespace avfuse
