#include "avfuse/align.hpp"

#include <algorithm>
#include <cmath>

#include "avfuse/error.hpp"

namespace avfuse {

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::kVisualWindow:
      return "visual_window";
    case Branch::kLmmSparse:
      return "lmm_sparse";
    case Branch::kAudio:
      return "audio";
  }
  return "audio";
}

Branch branch_from_string(std::string_view s) {
  if (s == "visual_window") return Branch::kVisualWindow;
  if (s == "lmm_sparse") return Branch::kLmmSparse;
  if (s == "audio") return Branch::kAudio;
  throw ValidationError("unknown branch '" + std::string(s) + "'");
}

void ScoreStream::validate() const {
  if (scores.empty()) {
    throw ValidationError(video_id + "/" + layout_name() + ": empty score sequence");
  }
  for (const auto& s : scores) {
    if (!std::isfinite(s[0]) || !std::isfinite(s[1])) {
      throw ValidationError(video_id + "/" + layout_name() + ": non-finite score");
    }
  }
  switch (branch) {
    case Branch::kAudio:
      if (resolution_ms <= 0 || resolution_ms % 20 != 0) {
        throw ValidationError(video_id + ": audio resolution " + std::to_string(resolution_ms) +
                              " ms is not a positive multiple of 20");
      }
      break;
    case Branch::kVisualWindow:
      if (window_len_frames < 1) {
        throw ValidationError(video_id + ": window_len_frames must be >= 1");
      }
      break;
    case Branch::kLmmSparse:
      if (sparse_stride_frames < 1) {
        throw ValidationError(video_id + ": sparse_stride_frames must be >= 1");
      }
      break;
  }
}

std::string ScoreStream::layout_name() const {
  switch (branch) {
    case Branch::kVisualWindow:
      return "visual";
    case Branch::kLmmSparse:
      return "lmm";
    case Branch::kAudio:
      return "audio" + std::to_string(resolution_ms);
  }
  return {};
}

FusedFrames::FusedFrames(std::size_t num_tokens, std::size_t dim)
    : dim_(dim), data_(num_tokens * dim, 0.0) {}

FusedFrames::FusedFrames(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw ValidationError("fused frame data of size " + std::to_string(data_.size()) +
                          " is not a multiple of dimension " + std::to_string(dim_));
  }
}

StreamLayout default_layout() { return {"visual", "audio160", "audio320", "audio640"}; }

StreamLayout layout_for_resolutions(const std::set<int>& keep_res) {
  StreamLayout layout{"visual"};
  for (int r : keep_res) layout.push_back("audio" + std::to_string(r));
  return layout;
}

AlignedStream repeat_upsample(const ScoreStream& stream, const TokenGrid& grid) {
  if (stream.scores.empty()) {
    throw ValidationError(stream.video_id + ": cannot upsample an empty score stream");
  }
  const std::int64_t r = stream.resolution_ms;
  if (r <= 0 || r % grid.token_ms() != 0) {
    throw ValidationError(stream.video_id + ": audio resolution " + std::to_string(r) +
                          " ms is not a multiple of the " + std::to_string(grid.token_ms()) +
                          " ms token");
  }
  const auto factor = static_cast<std::size_t>(r / grid.token_ms());
  AlignedStream out{grid, stream.layout_name(), {}};
  out.values.reserve(grid.num_tokens());
  for (std::size_t i = 0; i < grid.num_tokens(); ++i) {
    out.values.push_back(stream.scores[std::min(i / factor, stream.scores.size() - 1)]);
  }
  return out;
}

std::vector<ScoreStream> select_resolutions(std::span<const ScoreStream> streams,
                                            const std::set<int>& keep) {
  std::vector<ScoreStream> out;
  for (int r : keep) {
    const ScoreStream* found = nullptr;
    for (const auto& s : streams) {
      if (s.branch != Branch::kAudio || s.resolution_ms != r) continue;
      if (found != nullptr) {
        throw ValidationError(s.video_id + ": duplicate audio stream at " + std::to_string(r) +
                              " ms");
      }
      found = &s;
    }
    if (found == nullptr) {
      const std::string vid = streams.empty() ? std::string("<no streams>") : streams.front().video_id;
      throw ValidationError(vid + ": missing audio stream at resolution " + std::to_string(r) +
                            " ms");
    }
    out.push_back(*found);
  }
  return out;
}

std::vector<Logits> window_densify(const ScoreStream& stream, std::size_t num_frames) {
  const int w = stream.window_len_frames;
  if (w < 1) throw ValidationError(stream.video_id + ": window_len_frames must be >= 1");
  const auto window = static_cast<std::size_t>(w);
  if (num_frames < window || stream.scores.size() != num_frames - window + 1) {
    throw ValidationError(stream.video_id + ": visual window stream has " +
                          std::to_string(stream.scores.size()) + " scores, expected " +
                          (num_frames < window ? std::string("num_frames >= window")
                                               : std::to_string(num_frames - window + 1)) +
                          " for " + std::to_string(num_frames) + " frames and W=" +
                          std::to_string(w));
  }
  const std::size_t center = window / 2;
  const std::size_t last = stream.scores.size() - 1;
  std::vector<Logits> dense(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    const std::size_t j = i < center ? 0 : std::min(i - center, last);
    dense[i] = stream.scores[j];
  }
  return dense;
}

std::vector<Logits> sparse_densify(const ScoreStream& stream, std::size_t num_frames) {
  const int s = stream.sparse_stride_frames;
  if (s < 1) throw ValidationError(stream.video_id + ": sparse_stride_frames must be >= 1");
  const auto stride = static_cast<std::size_t>(s);
  const std::size_t expected = num_frames == 0 ? 0 : (num_frames - 1) / stride + 1;
  if (num_frames == 0 || stream.scores.size() != expected) {
    throw ValidationError(stream.video_id + ": sparse stream has " +
                          std::to_string(stream.scores.size()) + " samples, expected " +
                          std::to_string(expected) + " for " + std::to_string(num_frames) +
                          " frames at stride " + std::to_string(s));
  }
  std::vector<Logits> dense(num_frames);
  for (std::size_t i = 0; i < num_frames; ++i) {
    std::size_t k = i / stride;
    const std::size_t offset = i - k * stride;
    if (k + 1 < stream.scores.size() && stride - offset < offset) ++k;
    dense[i] = stream.scores[k];
  }
  return dense;
}

AlignedStream to_token_grid(std::span<const Logits> frame_scores, double fps,
                            const TokenGrid& grid, std::string name) {
  const std::size_t n = frame_count(fps, grid.clip_duration_ms());
  if (frame_scores.size() != n) {
    throw ValidationError("frame score count " + std::to_string(frame_scores.size()) +
                          " does not match " + std::to_string(n) + " frames for " +
                          std::to_string(grid.clip_duration_ms()) + " ms at " +
                          std::to_string(fps) + " fps");
  }
  AlignedStream out{grid, std::move(name), {}};
  out.values.reserve(grid.num_tokens());
  const double tm = static_cast<double>(grid.token_ms());
  for (std::size_t t = 0; t < grid.num_tokens(); ++t) {
    // Frame f has its midpoint at (f + 0.5) * 1000 / fps; solve for the
    // fractional frame index whose midpoint equals the token midpoint.
    const double x = (static_cast<double>(t) + 0.5) * tm * fps / 1000.0 - 0.5;
    const double lo = std::floor(x);
    double f = (x - lo) <= 0.5 + 1e-9 ? lo : lo + 1.0;
    f = std::clamp(f, 0.0, static_cast<double>(n - 1));
    out.values.push_back(frame_scores[static_cast<std::size_t>(f)]);
  }
  return out;
}

FusedFrames stack_fused(std::span<const AlignedStream> streams) {
  if (streams.empty()) throw ValidationError("stack_fused: no streams given");
  const TokenGrid& grid = streams.front().grid;
  for (const auto& s : streams) {
    if (!(s.grid == grid) || s.values.size() != grid.num_tokens()) {
      throw ValidationError("stack_fused: stream '" + s.name +
                            "' is not aligned to the shared token grid");
    }
  }
  FusedFrames out(grid.num_tokens(), 2 * streams.size());
  for (std::size_t t = 0; t < grid.num_tokens(); ++t) {
    auto row = out.row(t);
    for (std::size_t k = 0; k < streams.size(); ++k) {
      row[2 * k] = streams[k].values[t][0];
      row[2 * k + 1] = streams[k].values[t][1];
    }
  }
  return out;
}

FusedFrames stack_fused(const AlignedStream& visual, std::span<const AlignedStream> audio) {
  std::vector<AlignedStream> all;
  all.reserve(audio.size() + 1);
  all.push_back(visual);
  all.insert(all.end(), audio.begin(), audio.end());
  return stack_fused(all);
}

std::vector<Logits> unstack(const FusedFrames& frames, std::size_t k) {
  if (2 * k + 1 >= frames.dim()) {
    throw ValidationError("unstack: stream index " + std::to_string(k) + " out of range");
  }
  std::vector<Logits> out(frames.num_tokens());
  for (std::size_t t = 0; t < frames.num_tokens(); ++t) {
    out[t] = {frames.row(t)[2 * k], frames.row(t)[2 * k + 1]};
  }
  return out;
}

namespace {

const ScoreStream& find_single(const GroundTruth& gt, std::span<const ScoreStream> streams,
                               Branch branch) {
  const ScoreStream* found = nullptr;
  for (const auto& s : streams) {
    if (s.branch != branch) continue;
    if (found != nullptr) {
      throw ValidationError(gt.video_id + ": duplicate " + std::string(to_string(branch)) +
                            " stream");
    }
    found = &s;
  }
  if (found == nullptr) {
    throw ValidationError(gt.video_id + ": missing " + std::string(to_string(branch)) +
                          " stream");
  }
  return *found;
}

}  // namespace

AlignedStream align_branch(const GroundTruth& gt, std::span<const ScoreStream> streams,
                           std::string_view name, const TokenGrid& grid) {
  if (name == "visual" || name == "lmm") {
    const bool visual = name == "visual";
    const ScoreStream& s =
        find_single(gt, streams, visual ? Branch::kVisualWindow : Branch::kLmmSparse);
    const std::size_t n = frame_count(gt.fps, gt.clip_duration_ms);
    const auto dense = visual ? window_densify(s, n) : sparse_densify(s, n);
    return to_token_grid(dense, gt.fps, grid, std::string(name));
  }
  if (name.starts_with("audio")) {
    int r = 0;
    try {
      r = std::stoi(std::string(name.substr(5)));
    } catch (const std::exception&) {
      throw ValidationError("bad layout entry '" + std::string(name) + "'");
    }
    const auto selected = select_resolutions(streams, {r});
    return repeat_upsample(selected.front(), grid);
  }
  throw ValidationError("unknown layout entry '" + std::string(name) + "'");
}

VideoAlignment align_video(const GroundTruth& gt, std::span<const ScoreStream> streams,
                           const StreamLayout& layout, std::int64_t token_ms) {
  gt.validate();
  TokenGrid grid(gt.clip_duration_ms, token_ms);
  std::vector<AlignedStream> aligned;
  aligned.reserve(layout.size());
  for (const auto& name : layout) aligned.push_back(align_branch(gt, streams, name, grid));
  FusedFrames fused = stack_fused(aligned);
  return {grid, std::move(aligned), std::move(fused)};
}

}  // namespace avfuse
