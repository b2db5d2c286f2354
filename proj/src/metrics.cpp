#include "avfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "avfuse/error.hpp"

namespace avfuse {

namespace {

void check_binary_input(std::span<const double> scores, std::span<const std::uint8_t> labels,
                        const char* who, std::size_t& positives, std::size_t& negatives) {
  if (scores.size() != labels.size()) {
    throw ValidationError(std::string(who) + ": scores and labels differ in length");
  }
  positives = static_cast<std::size_t>(std::ranges::count_if(labels, [](auto y) { return y != 0; }));
  negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError(std::string(who) + ": both classes must be present");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw ValidationError(std::string(who) + ": NaN score");
  }
}

std::vector<std::size_t> order_by_score_ascending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::sort(order, [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  check_binary_input(scores, labels, "roc_auc", pos, neg);
  const auto order = order_by_score_ascending(scores);
  // Sum of (1-based) midranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double eer(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  std::size_t pos = 0;
  std::size_t neg = 0;
  check_binary_input(scores, labels, "eer", pos, neg);
  auto order = order_by_score_ascending(scores);
  std::ranges::reverse(order);

  // ROC vertices as raw (false positive, true positive) counts, one per
  // distinct threshold, swept from the highest score down.
  struct Point {
    std::int64_t fp;
    std::int64_t tp;
  };
  std::vector<Point> roc{{0, 0}};
  std::int64_t fp = 0;
  std::int64_t tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] != 0 ? tp : fp) += 1;
      ++j;
    }
    roc.push_back({fp, tp});
    i = j;
  }

  // Upper convex hull; axis scaling does not change turn direction, so the
  // integer counts can be used directly.
  std::vector<Point> hull;
  for (const auto& p : roc) {
    while (hull.size() >= 2) {
      const Point& o = hull[hull.size() - 2];
      const Point& a = hull.back();
      const std::int64_t cross = (a.fp - o.fp) * (p.tp - o.tp) - (a.tp - o.tp) * (p.fp - o.fp);
      if (cross < 0) break;
      hull.pop_back();
    }
    hull.push_back(p);
  }

  const double n_pos = static_cast<double>(pos);
  const double n_neg = static_cast<double>(neg);
  auto fpr = [&](const Point& p) { return static_cast<double>(p.fp) / n_neg; };
  auto fnr = [&](const Point& p) { return 1.0 - static_cast<double>(p.tp) / n_pos; };
  for (std::size_t k = 0; k + 1 < hull.size(); ++k) {
    const double d0 = fpr(hull[k]) - fnr(hull[k]);
    const double d1 = fpr(hull[k + 1]) - fnr(hull[k + 1]);
    if (d0 <= 0.0 && d1 >= 0.0) {
      if (d1 == d0) return fpr(hull[k]);
      const double alpha = -d0 / (d1 - d0);
      return fpr(hull[k]) + alpha * (fpr(hull[k + 1]) - fpr(hull[k]));
    }
  }
  return 0.5;  // unreachable: the hull runs from d = -1 to d = +1
}

double segment_auc(std::span<const LabeledScores> videos) {
  std::vector<double> scores;
  TokenLabels labels;
  for (const auto& v : videos) {
    if (v.scores.size() != v.labels.size()) {
      throw ValidationError("segment_auc: token scores and labels differ in length");
    }
    scores.insert(scores.end(), v.scores.begin(), v.scores.end());
    labels.insert(labels.end(), v.labels.begin(), v.labels.end());
  }
  return roc_auc(scores, labels);
}

double iou(const Interval& a, const Interval& b) {
  if (a.start_ms >= a.end_ms || b.start_ms >= b.end_ms) {
    throw ValidationError("iou: degenerate interval");
  }
  const std::int64_t inter =
      std::max<std::int64_t>(0, std::min(a.end_ms, b.end_ms) - std::max(a.start_ms, b.start_ms));
  const std::int64_t uni = (a.end_ms - a.start_ms) + (b.end_ms - b.start_ms) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::size_t total_gt(std::span<const VideoLocalization> videos) {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.ground_truth.size();
  if (n == 0) throw ValidationError("localization metrics need at least one ground-truth segment");
  return n;
}

// Index of the best unmatched GT for `p`, or -1.
std::ptrdiff_t best_match(const Proposal& p, const std::vector<Interval>& gt,
                          const std::vector<bool>& used, double threshold) {
  std::ptrdiff_t best = -1;
  double best_iou = -1.0;
  const Interval query{p.start_ms, p.end_ms};
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (used[g]) continue;
    const double v = iou(query, gt[g]);
    if (v < threshold) continue;
    if (v > best_iou ||
        (v == best_iou && gt[g].start_ms < gt[static_cast<std::size_t>(best)].start_ms)) {
      best = static_cast<std::ptrdiff_t>(g);
      best_iou = v;
    }
  }
  return best;
}

std::vector<std::size_t> rank_within_video(const std::vector<Proposal>& proposals) {
  std::vector<std::size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    if (proposals[a].confidence != proposals[b].confidence) {
      return proposals[a].confidence > proposals[b].confidence;
    }
    return proposals[a].start_ms < proposals[b].start_ms;
  });
  return order;
}

}  // namespace

double average_precision(std::span<const VideoLocalization> videos, double iou_threshold) {
  const std::size_t n_gt = total_gt(videos);

  struct Ranked {
    std::size_t video;
    std::size_t index;
    double confidence;
  };
  std::vector<Ranked> ranked;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    for (std::size_t i = 0; i < videos[v].proposals.size(); ++i) {
      ranked.push_back({v, i, videos[v].proposals[i].confidence});
    }
  }
  std::ranges::stable_sort(ranked, [](const Ranked& a, const Ranked& b) {
    return a.confidence > b.confidence;
  });

  std::vector<std::vector<bool>> used(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) used[v].assign(videos[v].ground_truth.size(), false);

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(ranked.size());
  recall.reserve(ranked.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& item = ranked[r];
    const auto& video = videos[item.video];
    const auto g = best_match(video.proposals[item.index], video.ground_truth, used[item.video],
                              iou_threshold);
    if (g >= 0) {
      used[item.video][static_cast<std::size_t>(g)] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  // Every-point interpolation: precision envelope taken from the right.
  for (std::size_t r = precision.size(); r-- > 1;) {
    precision[r - 1] = std::max(precision[r - 1], precision[r]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t r = 0; r < recall.size(); ++r) {
    ap += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return ap;
}

std::vector<double> default_ar_iou_grid() {
  std::vector<double> grid;
  for (int pct = 50; pct <= 95; pct += 5) grid.push_back(pct / 100.0);
  return grid;
}

double average_recall_at(std::span<const VideoLocalization> videos, int budget,
                         std::span<const double> iou_grid) {
  total_gt(videos);
  if (budget < 0) throw ValidationError("average_recall_at: negative budget");
  if (iou_grid.empty()) throw ValidationError("average_recall_at: empty IoU grid");
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& video : videos) {
    if (video.ground_truth.empty()) continue;
    ++counted;
    auto order = rank_within_video(video.proposals);
    if (order.size() > static_cast<std::size_t>(budget)) order.resize(static_cast<std::size_t>(budget));
    double recall_sum = 0.0;
    for (double tau : iou_grid) {
      std::vector<bool> used(video.ground_truth.size(), false);
      std::size_t matched = 0;
      for (std::size_t idx : order) {
        const auto g = best_match(video.proposals[idx], video.ground_truth, used, tau);
        if (g >= 0) {
          used[static_cast<std::size_t>(g)] = true;
          ++matched;
        }
      }
      recall_sum += static_cast<double>(matched) / static_cast<double>(video.ground_truth.size());
    }
    sum += recall_sum / static_cast<double>(iou_grid.size());
  }
  return sum / static_cast<double>(counted);
}

double average_recall_at(std::span<const VideoLocalization> videos, int budget) {
  const auto grid = default_ar_iou_grid();
  return average_recall_at(videos, budget, grid);
}

MetricsReport evaluate(std::span<const VideoEvaluation> videos, const MetricsConfig& cfg) {
  if (videos.empty()) throw ValidationError("evaluate: no videos");
  MetricsReport report;
  report.num_videos = videos.size();

  std::vector<double> video_scores;
  TokenLabels video_labels;
  std::vector<LabeledScores> tokens;
  std::vector<VideoLocalization> loc;
  for (const auto& v : videos) {
    video_scores.push_back(v.video_score);
    video_labels.push_back(v.label == VideoLabel::kFake ? 1 : 0);
    tokens.push_back(v.tokens);
    loc.push_back(v.localization);
    report.num_tokens += v.tokens.scores.size();
    report.num_gt_segments += v.localization.ground_truth.size();
  }
  report.auc_video = roc_auc(video_scores, video_labels);
  report.auc_segment = segment_auc(tokens);
  {
    std::vector<double> s;
    TokenLabels l;
    for (const auto& t : tokens) {
      s.insert(s.end(), t.scores.begin(), t.scores.end());
      l.insert(l.end(), t.labels.begin(), t.labels.end());
    }
    report.eer = eer(s, l);
  }
  for (double tau : cfg.ap_iou_thresholds) report.ap[tau] = average_precision(loc, tau);
  for (int n : cfg.ar_budgets) report.ar[n] = average_recall_at(loc, n, cfg.ar_iou_grid);
  return report;
}

}  // namespace avfuse
