#include "avfuse/localize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>

#include "avfuse/error.hpp"

namespace avfuse {

double detect_video(std::span<const double> token_scores) {
  if (token_scores.empty()) throw ValidationError("detect_video: no token scores");
  return *std::ranges::max_element(token_scores);
}

std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int i = 1; i <= 19; ++i) out.push_back(i / 20.0);
  return out;
}

std::vector<Proposal> propose_segments(std::span<const double> token_scores, const TokenGrid& grid,
                                       const ProposalConfig& cfg) {
  if (cfg.thresholds.empty()) throw ValidationError("propose_segments: empty threshold grid");
  if (token_scores.size() != grid.num_tokens()) {
    throw ValidationError("propose_segments: " + std::to_string(token_scores.size()) +
                          " scores for a grid of " + std::to_string(grid.num_tokens()) +
                          " tokens");
  }
  for (double s : token_scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("propose_segments: score outside [0, 1]");
  }
  if (cfg.max_gap_tokens < 0 || cfg.top_k < 0) {
    throw ValidationError("propose_segments: max_gap_tokens and top_k must be >= 0");
  }

  std::vector<double> thresholds = cfg.thresholds;
  std::ranges::sort(thresholds, std::greater<>());

  // (start_token, end_token) -> best confidence
  std::map<std::pair<std::size_t, std::size_t>, double> best;
  const std::size_t n = token_scores.size();
  const auto gap = static_cast<std::size_t>(cfg.max_gap_tokens);
  for (double tau : thresholds) {
    std::size_t i = 0;
    while (i < n) {
      if (token_scores[i] < tau) {
        ++i;
        continue;
      }
      std::size_t start = i;
      std::size_t end = i + 1;  // exclusive, last above-threshold token + 1
      std::size_t j = end;
      while (j < n) {
        if (token_scores[j] >= tau) {
          end = ++j;
        } else if (j - end < gap) {
          ++j;
        } else {
          break;
        }
      }
      double conf = 0.0;
      if (cfg.confidence == RunConfidence::kMean) {
        for (std::size_t k = start; k < end; ++k) conf += token_scores[k];
        conf /= static_cast<double>(end - start);
      } else {
        conf = *std::max_element(token_scores.begin() + static_cast<std::ptrdiff_t>(start),
                                 token_scores.begin() + static_cast<std::ptrdiff_t>(end));
      }
      auto [it, inserted] = best.try_emplace({start, end}, conf);
      if (!inserted) it->second = std::max(it->second, conf);
      i = end;
    }
  }

  std::vector<Proposal> out;
  out.reserve(best.size());
  for (const auto& [span, conf] : best) {
    const std::int64_t start_ms = grid.token_start_ms(span.first);
    const std::int64_t end_ms = std::min(grid.token_end_ms(span.second - 1), grid.clip_duration_ms());
    out.push_back({start_ms, end_ms, conf});
  }
  std::ranges::stable_sort(out, [](const Proposal& a, const Proposal& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.start_ms != b.start_ms) return a.start_ms < b.start_ms;
    return a.end_ms < b.end_ms;
  });
  if (out.size() > static_cast<std::size_t>(cfg.top_k)) out.resize(static_cast<std::size_t>(cfg.top_k));
  return out;
}

TokenLabels proposals_to_mask(std::span<const Proposal> proposals, const TokenGrid& grid) {
  std::vector<FakeSegment> segments;
  segments.reserve(proposals.size());
  for (const auto& p : proposals) {
    if (p.start_ms < 0 || p.start_ms >= p.end_ms || p.end_ms > grid.clip_duration_ms()) {
      throw ValidationError("proposal [" + std::to_string(p.start_ms) + ", " +
                            std::to_string(p.end_ms) + ") outside clip of " +
                            std::to_string(grid.clip_duration_ms()) + " ms");
    }
    segments.push_back({p.start_ms, p.end_ms, Modality::kBoth});
  }
  return rasterize_labels(segments, grid);
}

}  // namespace avfuse
