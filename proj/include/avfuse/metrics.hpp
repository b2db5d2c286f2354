#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "avfuse/localize.hpp"
#include "avfuse/timeline.hpp"

namespace avfuse {

// ROC AUC as the Mann-Whitney statistic with midranks for ties:
// P(score_pos > score_neg) + 0.5 * P(tie). Requires both classes.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Equal error rate on the ROC convex hull, interpolated linearly between
// adjacent hull vertices where FPR == FNR.
double eer(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct LabeledScores {
  std::vector<double> scores;
  TokenLabels labels;
};

// roc_auc over all tokens of all videos pooled together.
double segment_auc(std::span<const LabeledScores> videos);

struct Interval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

double iou(const Interval& a, const Interval& b);

// Proposals and ground-truth fake intervals of one video.
struct VideoLocalization {
  std::string video_id;
  std::vector<Proposal> proposals;
  std::vector<Interval> ground_truth;
};

// Proposals are ranked globally by confidence (ties: earlier video, then
// original order) and greedily matched to the unmatched GT of their video with
// the highest IoU >= threshold (IoU ties: earlier-starting GT). AP is the area
// under the every-point interpolated precision/recall curve.
double average_precision(std::span<const VideoLocalization> videos, double iou_threshold);

// 0.50, 0.55, ..., 0.95
std::vector<double> default_ar_iou_grid();

// Per video, the top `budget` proposals are greedily matched at each IoU in
// `iou_grid`; recall is averaged over the grid, then over videos with GT.
double average_recall_at(std::span<const VideoLocalization> videos, int budget,
                         std::span<const double> iou_grid);
double average_recall_at(std::span<const VideoLocalization> videos, int budget);

struct MetricsConfig {
  std::vector<double> ap_iou_thresholds{0.5, 0.75, 0.9, 0.95};
  std::vector<int> ar_budgets{5, 10, 20, 30, 50};
  std::vector<double> ar_iou_grid = default_ar_iou_grid();
};

// Everything the evaluator needs about one video.
struct VideoEvaluation {
  std::string video_id;
  VideoLabel label = VideoLabel::kReal;
  double video_score = 0.0;
  LabeledScores tokens;
  VideoLocalization localization;
};

struct MetricsReport {
  double auc_video = 0.0;
  double auc_segment = 0.0;
  double eer = 0.0;  // segment level
  std::map<double, double> ap;
  std::map<int, double> ar;
  std::size_t num_videos = 0;
  std::size_t num_tokens = 0;
  std::size_t num_gt_segments = 0;
};

MetricsReport evaluate(std::span<const VideoEvaluation> videos, const MetricsConfig& cfg);

}  // namespace avfuse
