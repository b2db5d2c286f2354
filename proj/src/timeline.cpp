#include "avfuse/timeline.hpp"

#include <algorithm>
#include <cmath>

#include "avfuse/error.hpp"

namespace avfuse {

TokenGrid::TokenGrid(std::int64_t clip_duration_ms, std::int64_t token_ms)
    : token_ms_(token_ms), clip_duration_ms_(clip_duration_ms), num_tokens_(0) {
  if (token_ms <= 0) {
    throw ValidationError("token_ms must be positive, got " + std::to_string(token_ms));
  }
  if (clip_duration_ms <= 0) {
    throw ValidationError("clip duration must be positive, got " +
                          std::to_string(clip_duration_ms) + " ms");
  }
  num_tokens_ = static_cast<std::size_t>((clip_duration_ms + token_ms - 1) / token_ms);
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kVisual:
      return "visual";
    case Modality::kAudio:
      return "audio";
    case Modality::kBoth:
      return "both";
  }
  return "both";
}

Modality modality_from_string(std::string_view s) {
  if (s == "visual") return Modality::kVisual;
  if (s == "audio") return Modality::kAudio;
  if (s == "both") return Modality::kBoth;
  throw ValidationError("unknown modality '" + std::string(s) + "'");
}

void GroundTruth::validate() const {
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw ValidationError(video_id + ": fps must be positive and finite");
  }
  if (clip_duration_ms <= 0) {
    throw ValidationError(video_id + ": duration_ms must be positive");
  }
  for (const auto& seg : fake_segments) {
    if (seg.start_ms < 0 || seg.start_ms >= seg.end_ms || seg.end_ms > clip_duration_ms) {
      throw ValidationError(video_id + ": fake segment [" + std::to_string(seg.start_ms) + ", " +
                            std::to_string(seg.end_ms) + ") outside clip of " +
                            std::to_string(clip_duration_ms) + " ms");
    }
  }
}

TokenLabels rasterize_labels(std::span<const FakeSegment> segments, const TokenGrid& grid,
                             std::int64_t min_overlap_ms) {
  TokenLabels labels(grid.num_tokens(), 0);
  const std::int64_t tm = grid.token_ms();
  for (const auto& seg : segments) {
    if (seg.end_ms <= seg.start_ms) continue;
    // Only tokens in [first, last] can overlap the segment.
    const auto first = static_cast<std::size_t>(std::max<std::int64_t>(seg.start_ms, 0) / tm);
    const auto last = std::min(grid.num_tokens() - 1,
                               static_cast<std::size_t>((seg.end_ms - 1) / tm));
    for (std::size_t i = first; i <= last; ++i) {
      const std::int64_t overlap = std::min(seg.end_ms, grid.token_end_ms(i)) -
                                   std::max(seg.start_ms, grid.token_start_ms(i));
      if (overlap > min_overlap_ms) labels[i] = 1;
    }
  }
  return labels;
}

TokenLabels rasterize_labels(const GroundTruth& gt, const TokenGrid& grid,
                             std::int64_t min_overlap_ms) {
  if (gt.clip_duration_ms != grid.clip_duration_ms()) {
    throw ValidationError(gt.video_id + ": ground truth duration " +
                          std::to_string(gt.clip_duration_ms) + " ms does not match grid duration " +
                          std::to_string(grid.clip_duration_ms()) + " ms");
  }
  return rasterize_labels(gt.fake_segments, grid, min_overlap_ms);
}

VideoLabel video_label_of(std::span<const std::uint8_t> labels) {
  if (labels.empty()) throw ValidationError("video_label_of: empty label sequence");
  return std::ranges::any_of(labels, [](std::uint8_t v) { return v != 0; }) ? VideoLabel::kFake
                                                                           : VideoLabel::kReal;
}

std::size_t frame_count(double fps, std::int64_t clip_duration_ms) {
  if (!(fps > 0.0)) throw ValidationError("fps must be positive");
  const double frames = static_cast<double>(clip_duration_ms) * fps / 1000.0;
  // Absorb rounding noise so e.g. 400 ms at 12.5 fps gives exactly 5 frames.
  return static_cast<std::size_t>(std::ceil(frames - 1e-9));
}

std::size_t frame_to_token(double fps, const TokenGrid& grid, std::size_t frame_index) {
  const std::size_t n = frame_count(fps, grid.clip_duration_ms());
  if (frame_index >= n) {
    throw ValidationError("frame index " + std::to_string(frame_index) + " out of range [0, " +
                          std::to_string(n) + ")");
  }
  const double midpoint_ms = (static_cast<double>(frame_index) + 0.5) * 1000.0 / fps;
  const auto token = static_cast<std::int64_t>(
      std::floor(midpoint_ms / static_cast<double>(grid.token_ms())));
  return static_cast<std::size_t>(
      std::clamp<std::int64_t>(token, 0, static_cast<std::int64_t>(grid.num_tokens()) - 1));
}

std::vector<FakeSegment> segments_affecting(const GroundTruth& gt, Modality channel) {
  std::vector<FakeSegment> out;
  for (const auto& seg : gt.fake_segments) {
    if (channel == Modality::kBoth || seg.modality == Modality::kBoth || seg.modality == channel) {
      out.push_back(seg);
    }
  }
  return out;
}

}  // namespace avfuse
