#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace avfuse {

inline constexpr std::int64_t kDefaultTokenMs = 40;
inline constexpr double kDefaultFps = 25.0;

// Common timeline that every branch is aligned onto. Token i covers the
// half-open interval [i * token_ms, (i + 1) * token_ms).
class TokenGrid {
 public:
  TokenGrid(std::int64_t clip_duration_ms, std::int64_t token_ms = kDefaultTokenMs);

  std::int64_t token_ms() const { return token_ms_; }
  std::int64_t clip_duration_ms() const { return clip_duration_ms_; }
  std::size_t num_tokens() const { return num_tokens_; }

  std::int64_t token_start_ms(std::size_t i) const { return static_cast<std::int64_t>(i) * token_ms_; }
  std::int64_t token_end_ms(std::size_t i) const { return token_start_ms(i) + token_ms_; }

  bool operator==(const TokenGrid&) const = default;

 private:
  std::int64_t token_ms_;
  std::int64_t clip_duration_ms_;
  std::size_t num_tokens_;
};

enum class Modality { kVisual, kAudio, kBoth };

std::string_view to_string(Modality m);
Modality modality_from_string(std::string_view s);

struct FakeSegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  Modality modality = Modality::kBoth;

  bool operator==(const FakeSegment&) const = default;
};

enum class VideoLabel { kReal = 0, kFake = 1 };

struct GroundTruth {
  std::string video_id;
  double fps = kDefaultFps;
  std::int64_t clip_duration_ms = 0;
  std::vector<FakeSegment> fake_segments;

  VideoLabel video_label() const {
    return fake_segments.empty() ? VideoLabel::kReal : VideoLabel::kFake;
  }

  // Throws ValidationError unless every segment lies inside the clip with
  // start < end and fps/duration are positive.
  void validate() const;

  bool operator==(const GroundTruth&) const = default;
};

// 0 = real, 1 = fake, one entry per token.
using TokenLabels = std::vector<std::uint8_t>;

// A token is fake iff its interval overlaps some fake segment by more than
// min_overlap_ms (strictly positive overlap by default); touching a boundary
// is not an overlap.
TokenLabels rasterize_labels(const GroundTruth& gt, const TokenGrid& grid,
                             std::int64_t min_overlap_ms = 0);
TokenLabels rasterize_labels(std::span<const FakeSegment> segments, const TokenGrid& grid,
                             std::int64_t min_overlap_ms = 0);

VideoLabel video_label_of(std::span<const std::uint8_t> labels);

// Number of video frames in a clip: ceil(duration * fps / 1000).
std::size_t frame_count(double fps, std::int64_t clip_duration_ms);

// Token containing the midpoint of frame `frame_index`, clamped to the grid.
std::size_t frame_to_token(double fps, const TokenGrid& grid, std::size_t frame_index);

// Segments of `gt` that forge the given channel (kBoth segments forge both).
std::vector<FakeSegment> segments_affecting(const GroundTruth& gt, Modality channel);

}  // namespace avfuse
