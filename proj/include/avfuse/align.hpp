#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "avfuse/timeline.hpp"

namespace avfuse {

// (logit_real, logit_fake) as emitted by an upstream scorer.
using Logits = std::array<double, 2>;

enum class Branch { kVisualWindow, kLmmSparse, kAudio };

std::string_view to_string(Branch b);
Branch branch_from_string(std::string_view s);

inline constexpr int kDefaultWindowFrames = 16;
inline constexpr int kDefaultSparseStride = 200;

// Raw per-branch scores with their native temporal metadata. Which metadata
// field is meaningful depends on the branch: resolution_ms for audio,
// window_len_frames for visual_window, sparse_stride_frames for lmm_sparse.
struct ScoreStream {
  std::string video_id;
  Branch branch = Branch::kAudio;
  int resolution_ms = 0;
  int window_len_frames = kDefaultWindowFrames;
  int sparse_stride_frames = kDefaultSparseStride;
  std::vector<Logits> scores;

  void validate() const;
  // Layout name of this stream: "visual", "lmm" or "audio<r>".
  std::string layout_name() const;

  bool operator==(const ScoreStream&) const = default;
};

// A stream resampled onto a TokenGrid; values.size() == grid.num_tokens().
struct AlignedStream {
  TokenGrid grid;
  std::string name;
  std::vector<Logits> values;
};

// Row-major sequence of fused frames, each of dimension 2 * K.
class FusedFrames {
 public:
  FusedFrames() = default;
  FusedFrames(std::size_t num_tokens, std::size_t dim);
  FusedFrames(std::size_t dim, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t num_tokens() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const FusedFrames&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

using StreamLayout = std::vector<std::string>;

// visual, audio160, audio320, audio640: the 8-logit layout.
StreamLayout default_layout();
// "visual" followed by "audio<r>" for each r in ascending order.
StreamLayout layout_for_resolutions(const std::set<int>& keep_res);

// Repeat each score r / token_ms times. A short source repeats its last score
// to fill the grid; a long one is truncated.
AlignedStream repeat_upsample(const ScoreStream& stream, const TokenGrid& grid);

// The audio streams whose resolution is in `keep`, sorted by ascending
// resolution. Throws if a requested resolution is absent or duplicated.
std::vector<ScoreStream> select_resolutions(std::span<const ScoreStream> streams,
                                            const std::set<int>& keep);

// Sliding window (stride 1) scores -> per-frame scores. Window j is assigned
// to its center frame j + W / 2; frames before the first center reuse the
// first score and frames after the last center reuse the last one.
std::vector<Logits> window_densify(const ScoreStream& stream, std::size_t num_frames);

// Samples at frames {0, s, 2s, ...} -> per-frame scores by nearest sample.
// Equidistant frames take the earlier sample.
std::vector<Logits> sparse_densify(const ScoreStream& stream, std::size_t num_frames);

// Per-frame scores -> per-token scores. Each token takes the frame whose
// midpoint is nearest to the token midpoint (ties -> earlier frame).
AlignedStream to_token_grid(std::span<const Logits> frame_scores, double fps,
                            const TokenGrid& grid, std::string name = "visual");

// Concatenate per-token logits in the given stream order.
FusedFrames stack_fused(std::span<const AlignedStream> streams);
FusedFrames stack_fused(const AlignedStream& visual, std::span<const AlignedStream> audio);

// Inverse of stack_fused for the k-th stream.
std::vector<Logits> unstack(const FusedFrames& frames, std::size_t k);

// Aligns one named layout entry of a video onto `grid`.
AlignedStream align_branch(const GroundTruth& gt, std::span<const ScoreStream> streams,
                           std::string_view name, const TokenGrid& grid);

struct VideoAlignment {
  TokenGrid grid;
  std::vector<AlignedStream> streams;  // in layout order
  FusedFrames fused;
};

VideoAlignment align_video(const GroundTruth& gt, std::span<const ScoreStream> streams,
                           const StreamLayout& layout, std::int64_t token_ms = kDefaultTokenMs);

}  // namespace avfuse
