#pragma once

// Deliberately naive reference implementations used to cross-check the
// library. Quadratic or worse; keep inputs small.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "avfuse/metrics.hpp"

namespace avfuse::oracle {

// Fraction of (positive, negative) pairs ranked correctly, ties count half.
inline double pairwise_auc(std::span<const double> s, std::span<const std::uint8_t> y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Smallest max(FPR, FNR) reachable by mixing two ROC operating points; this
// is where the ROC convex hull meets FPR == FNR.
inline double mixture_eer(std::span<const double> s, std::span<const std::uint8_t> y) {
  struct Point {
    double fpr, fnr;
  };
  std::vector<double> cuts(s.begin(), s.end());
  cuts.push_back(std::numeric_limits<double>::infinity());
  double pos = 0, neg = 0;
  for (auto l : y) (l ? pos : neg) += 1.0;
  std::vector<Point> pts;
  for (double c : cuts) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= c) (y[i] ? tp : fp) += 1.0;
    }
    pts.push_back({fp / neg, 1.0 - tp / pos});
  }
  double best = 1.0;
  for (const auto& a : pts) {
    best = std::min(best, std::max(a.fpr, a.fnr));
    for (const auto& b : pts) {
      // fpr(l) - fnr(l) is linear in the mixing weight l.
      const double da = a.fpr - a.fnr;
      const double db = b.fpr - b.fnr;
      if (da == db) continue;
      const double l = da / (da - db);
      if (l < 0.0 || l > 1.0) continue;
      best = std::min(best, (1 - l) * a.fpr + l * b.fpr);
    }
  }
  return best;
}

inline double interval_iou(std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
  const std::int64_t inter = std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
  const std::int64_t uni = (a1 - a0) + (b1 - b0) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Index of the unmatched GT a proposal claims, or -1.
inline int claim(const Proposal& p, const std::vector<Interval>& gt, const std::vector<int>& taken,
                 double tau) {
  int pick = -1;
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (taken[g]) continue;
    const double v = interval_iou(p.start_ms, p.end_ms, gt[g].start_ms, gt[g].end_ms);
    if (v < tau) continue;
    if (pick < 0) {
      pick = static_cast<int>(g);
      continue;
    }
    const double w = interval_iou(p.start_ms, p.end_ms, gt[pick].start_ms, gt[pick].end_ms);
    if (v > w || (v == w && gt[g].start_ms < gt[pick].start_ms)) pick = static_cast<int>(g);
  }
  return pick;
}

inline double brute_ap(std::span<const VideoLocalization> videos, double tau) {
  struct Item {
    std::size_t v, i;
    double conf;
  };
  std::vector<Item> items;
  std::size_t n_gt = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    n_gt += videos[v].ground_truth.size();
    for (std::size_t i = 0; i < videos[v].proposals.size(); ++i) {
      items.push_back({v, i, videos[v].proposals[i].confidence});
    }
  }
  // Selection sort: repeatedly take the highest confidence, first seen on ties.
  std::vector<Item> ranked;
  std::vector<int> done(items.size(), 0);
  for (std::size_t k = 0; k < items.size(); ++k) {
    std::size_t best = items.size();
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (done[j]) continue;
      if (best == items.size() || items[j].conf > items[best].conf) best = j;
    }
    done[best] = 1;
    ranked.push_back(items[best]);
  }
  std::vector<std::vector<int>> taken(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) taken[v].assign(videos[v].ground_truth.size(), 0);
  std::vector<int> hit;
  for (const auto& it : ranked) {
    const int g = claim(videos[it.v].proposals[it.i], videos[it.v].ground_truth, taken[it.v], tau);
    if (g >= 0) taken[it.v][static_cast<std::size_t>(g)] = 1;
    hit.push_back(g >= 0);
  }
  // Sum over each true positive of the best precision at any later rank.
  double ap = 0.0;
  std::size_t tp_before = 0;
  for (std::size_t k = 0; k < hit.size(); ++k) {
    if (!hit[k]) continue;
    ++tp_before;
    double best_p = 0.0;
    std::size_t tp = 0;
    for (std::size_t j = 0; j < hit.size(); ++j) {
      tp += hit[j];
      if (j >= k) best_p = std::max(best_p, static_cast<double>(tp) / static_cast<double>(j + 1));
    }
    ap += best_p / static_cast<double>(n_gt);
  }
  return ap;
}

inline double brute_ar(std::span<const VideoLocalization> videos, int budget,
                       std::span<const double> grid) {
  double total = 0.0;
  int counted = 0;
  for (const auto& v : videos) {
    if (v.ground_truth.empty()) continue;
    ++counted;
    std::vector<Proposal> props = v.proposals;
    std::stable_sort(props.begin(), props.end(), [](const Proposal& a, const Proposal& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      return a.start_ms < b.start_ms;
    });
    if (props.size() > static_cast<std::size_t>(budget)) props.resize(static_cast<std::size_t>(budget));
    double acc = 0.0;
    for (double tau : grid) {
      std::vector<int> taken(v.ground_truth.size(), 0);
      int matched = 0;
      for (const auto& p : props) {
        const int g = claim(p, v.ground_truth, taken, tau);
        if (g >= 0) {
          taken[static_cast<std::size_t>(g)] = 1;
          ++matched;
        }
      }
      acc += static_cast<double>(matched) / static_cast<double>(v.ground_truth.size());
    }
    total += acc / static_cast<double>(grid.size());
  }
  return total / counted;
}

}  // namespace avfuse::oracle
