#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "avfuse/align.hpp"
#include "avfuse/timeline.hpp"

namespace avfuse {

// Real/fake visual x real/fake audio.
enum class Scenario { kRVRA = 0, kFVRA = 1, kRVFA = 2, kFVFA = 3 };

std::string_view to_string(Scenario s);

struct ScenarioConfig {
  int num_videos = 100;
  std::int64_t duration_min_ms = 4000;
  std::int64_t duration_max_ms = 10000;
  // Fake segment lengths are lognormal with this mean, clipped to
  // [fake_min_ms, fake_max_ms].
  double fake_duration_mean_ms = 320.0;
  double fake_duration_log_sigma = 0.5;
  std::int64_t fake_min_ms = 80;
  std::int64_t fake_max_ms = 2000;
  int fakes_min = 1;
  int fakes_max = 3;
  // Minimum spacing between two fake segments of one clip.
  std::int64_t min_gap_ms = 200;
  // Weights over {RVRA, FVRA, RVFA, FVFA}.
  std::array<double, 4> scenario_mix{1.0, 1.0, 1.0, 1.0};
  double noise_sigma = 0.5;
  // Per (stream, fake segment) chance that the stream scores the segment as real.
  double miss_prob = 0.1;
  double logit_high = 2.0;
  double logit_low = -2.0;
  double fps = kDefaultFps;
  int window_len_frames = kDefaultWindowFrames;
  int sparse_stride_frames = kDefaultSparseStride;
  std::vector<int> audio_resolutions{40, 160, 320, 640};
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  std::vector<GroundTruth> ground_truth;  // one per video, ordered by video_id
  std::vector<ScoreStream> streams;       // per video: visual, lmm, audio ascending
};

// Each video draws from its own RNG seeded by (seed, video index), so the
// output does not depend on `threads`.
SyntheticData generate(const ScenarioConfig& cfg, int threads = 1);

Scenario scenario_of(const GroundTruth& gt);

// Native-resolution fake mask the generator used for a stream when nothing
// is missed: one entry per score, 1 where the unit overlaps a forged region
// of the stream's channel.
std::vector<std::uint8_t> native_fake_mask(const GroundTruth& gt, const ScoreStream& stream);

}  // namespace avfuse
