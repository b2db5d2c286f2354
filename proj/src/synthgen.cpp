#include "avfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <thread>

#include "avfuse/error.hpp"

namespace avfuse {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kRVRA:
      return "RVRA";
    case Scenario::kFVRA:
      return "FVRA";
    case Scenario::kRVFA:
      return "RVFA";
    case Scenario::kFVFA:
      return "FVFA";
  }
  return "RVRA";
}

void ScenarioConfig::validate() const {
  if (num_videos < 0) throw ValidationError("synth: num_videos must be >= 0");
  if (duration_min_ms <= 0 || duration_max_ms < duration_min_ms) {
    throw ValidationError("synth: invalid duration range");
  }
  if (!(fake_duration_mean_ms > 0.0) || fake_duration_log_sigma < 0.0) {
    throw ValidationError("synth: invalid fake duration distribution");
  }
  if (fake_min_ms <= 0 || fake_max_ms < fake_min_ms) {
    throw ValidationError("synth: invalid fake duration clip range");
  }
  if (fake_min_ms > duration_min_ms) {
    throw ValidationError("synth: minimum fake duration " + std::to_string(fake_min_ms) +
                          " ms exceeds the shortest clip (" + std::to_string(duration_min_ms) +
                          " ms)");
  }
  if (fakes_min < 1 || fakes_max < fakes_min) {
    throw ValidationError("synth: invalid fakes-per-video range");
  }
  if (fakes_max * fake_min_ms + (fakes_max - 1) * min_gap_ms > duration_min_ms) {
    throw ValidationError("synth: " + std::to_string(fakes_max) +
                          " fake segments cannot fit in the shortest clip");
  }
  double total = 0.0;
  for (double w : scenario_mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("synth: negative scenario weight");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("synth: scenario weights sum to zero");
  if (!(noise_sigma >= 0.0)) throw ValidationError("synth: noise sigma must be >= 0");
  if (!(miss_prob >= 0.0 && miss_prob <= 1.0)) {
    throw ValidationError("synth: miss probability must lie in [0, 1]");
  }
  if (!(fps > 0.0)) throw ValidationError("synth: fps must be positive");
  if (window_len_frames < 1 || sparse_stride_frames < 1) {
    throw ValidationError("synth: window length and sparse stride must be >= 1");
  }
  if (frame_count(fps, duration_min_ms) < static_cast<std::size_t>(window_len_frames)) {
    throw ValidationError("synth: shortest clip has fewer frames than the visual window");
  }
  for (int r : audio_resolutions) {
    if (r <= 0 || r % 20 != 0) {
      throw ValidationError("synth: audio resolution " + std::to_string(r) +
                            " ms is not a positive multiple of 20");
    }
  }
}

Scenario scenario_of(const GroundTruth& gt) {
  bool visual = false;
  bool audio = false;
  for (const auto& seg : gt.fake_segments) {
    visual |= seg.modality != Modality::kAudio;
    audio |= seg.modality != Modality::kVisual;
  }
  if (visual && audio) return Scenario::kFVFA;
  if (visual) return Scenario::kFVRA;
  if (audio) return Scenario::kRVFA;
  return Scenario::kRVRA;
}

namespace {

struct Unit {
  double start_ms;
  double end_ms;
};

Modality channel_of(Branch b) { return b == Branch::kAudio ? Modality::kAudio : Modality::kVisual; }

// Time spans covered by each score of a stream, in emission order.
std::vector<Unit> stream_units(Branch branch, int param, double fps, std::int64_t duration_ms) {
  std::vector<Unit> units;
  const double frame_ms = 1000.0 / fps;
  const std::size_t frames = frame_count(fps, duration_ms);
  switch (branch) {
    case Branch::kVisualWindow: {
      const auto w = static_cast<std::size_t>(param);
      for (std::size_t j = 0; j + w <= frames; ++j) {
        units.push_back({static_cast<double>(j) * frame_ms, static_cast<double>(j + w) * frame_ms});
      }
      break;
    }
    case Branch::kLmmSparse: {
      const auto s = static_cast<std::size_t>(param);
      for (std::size_t f = 0; f < frames; f += s) {
        units.push_back({static_cast<double>(f) * frame_ms, static_cast<double>(f + 1) * frame_ms});
      }
      break;
    }
    case Branch::kAudio: {
      const std::int64_t count = (duration_ms + param - 1) / param;
      for (std::int64_t i = 0; i < count; ++i) {
        units.push_back({static_cast<double>(i * param), static_cast<double>((i + 1) * param)});
      }
      break;
    }
  }
  return units;
}

bool overlaps_any(const Unit& u, const std::vector<FakeSegment>& segments) {
  return std::ranges::any_of(segments, [&](const FakeSegment& s) {
    return std::min(u.end_ms, static_cast<double>(s.end_ms)) -
               std::max(u.start_ms, static_cast<double>(s.start_ms)) >
           0.0;
  });
}

int stream_param(const ScoreStream& s) {
  switch (s.branch) {
    case Branch::kVisualWindow:
      return s.window_len_frames;
    case Branch::kLmmSparse:
      return s.sparse_stride_frames;
    case Branch::kAudio:
      return s.resolution_ms;
  }
  return 0;
}

std::vector<std::int64_t> sample_fake_lengths(std::mt19937_64& rng, const ScenarioConfig& cfg,
                                              int count) {
  // Lognormal with E[X] = mean: mu = ln(mean) - sigma^2 / 2.
  const double sigma = cfg.fake_duration_log_sigma;
  const double mu = std::log(cfg.fake_duration_mean_ms) - sigma * sigma / 2.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::int64_t> lengths;
  for (int i = 0; i < count; ++i) {
    const double len = std::exp(mu + sigma * normal(rng));
    lengths.push_back(std::clamp(static_cast<std::int64_t>(std::llround(len)), cfg.fake_min_ms,
                                 cfg.fake_max_ms));
  }
  return lengths;
}

std::vector<FakeSegment> place_segments(std::mt19937_64& rng, const ScenarioConfig& cfg,
                                        std::int64_t duration, Modality modality) {
  std::uniform_int_distribution<int> count_dist(cfg.fakes_min, cfg.fakes_max);
  const int count = count_dist(rng);
  const auto lengths = sample_fake_lengths(rng, cfg, count);
  std::vector<FakeSegment> placed;
  constexpr int kMaxAttempts = 1000;
  for (std::int64_t len : lengths) {
    len = std::min(len, duration);
    std::uniform_int_distribution<std::int64_t> start_dist(0, duration - len);
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      const std::int64_t start = start_dist(rng);
      ok = std::ranges::none_of(placed, [&](const FakeSegment& s) {
        return start < s.end_ms + cfg.min_gap_ms && s.start_ms < start + len + cfg.min_gap_ms;
      });
      if (ok) placed.push_back({start, start + len, modality});
    }
    if (!ok) {
      throw ValidationError("synth: could not place " + std::to_string(count) +
                            " non-overlapping fake segments in a " + std::to_string(duration) +
                            " ms clip");
    }
  }
  std::ranges::sort(placed, {}, &FakeSegment::start_ms);
  return placed;
}

ScoreStream emit_stream(std::mt19937_64& rng, const ScenarioConfig& cfg, const GroundTruth& gt,
                        Branch branch, int param) {
  ScoreStream s;
  s.video_id = gt.video_id;
  s.branch = branch;
  switch (branch) {
    case Branch::kAudio:
      s.resolution_ms = param;
      break;
    case Branch::kVisualWindow:
      s.window_len_frames = param;
      break;
    case Branch::kLmmSparse:
      s.sparse_stride_frames = param;
      break;
  }

  // One miss draw per segment keeps RNG consumption independent of modality.
  std::bernoulli_distribution miss(cfg.miss_prob);
  std::vector<FakeSegment> detected;
  const Modality channel = channel_of(branch);
  for (const auto& seg : gt.fake_segments) {
    const bool missed = miss(rng);
    const bool affects = seg.modality == Modality::kBoth || seg.modality == channel;
    if (affects && !missed) detected.push_back(seg);
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& unit : stream_units(branch, param, gt.fps, gt.clip_duration_ms)) {
    const double mean = overlaps_any(unit, detected) ? cfg.logit_high : cfg.logit_low;
    const double real = -mean + cfg.noise_sigma * normal(rng);
    const double fake = mean + cfg.noise_sigma * normal(rng);
    s.scores.push_back({real, fake});
  }
  return s;
}

std::string video_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "vid_%06d", index);
  return buf;
}

void generate_video(const ScenarioConfig& cfg, int index, GroundTruth& gt,
                    std::vector<ScoreStream>& streams) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);

  gt.video_id = video_name(index);
  gt.fps = cfg.fps;
  std::uniform_int_distribution<std::int64_t> duration_dist(cfg.duration_min_ms, cfg.duration_max_ms);
  gt.clip_duration_ms = duration_dist(rng);

  std::discrete_distribution<int> scenario_dist(cfg.scenario_mix.begin(), cfg.scenario_mix.end());
  const auto scenario = static_cast<Scenario>(scenario_dist(rng));
  gt.fake_segments.clear();
  switch (scenario) {
    case Scenario::kRVRA:
      break;
    case Scenario::kFVRA:
      gt.fake_segments = place_segments(rng, cfg, gt.clip_duration_ms, Modality::kVisual);
      break;
    case Scenario::kRVFA:
      gt.fake_segments = place_segments(rng, cfg, gt.clip_duration_ms, Modality::kAudio);
      break;
    case Scenario::kFVFA:
      gt.fake_segments = place_segments(rng, cfg, gt.clip_duration_ms, Modality::kBoth);
      break;
  }

  streams.clear();
  streams.push_back(emit_stream(rng, cfg, gt, Branch::kVisualWindow, cfg.window_len_frames));
  streams.push_back(emit_stream(rng, cfg, gt, Branch::kLmmSparse, cfg.sparse_stride_frames));
  std::vector<int> resolutions = cfg.audio_resolutions;
  std::ranges::sort(resolutions);
  for (int r : resolutions) streams.push_back(emit_stream(rng, cfg, gt, Branch::kAudio, r));
}

}  // namespace

SyntheticData generate(const ScenarioConfig& cfg, int threads) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.num_videos);
  std::vector<GroundTruth> gts(n);
  std::vector<std::vector<ScoreStream>> per_video(n);

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) {
            generate_video(cfg, static_cast<int>(i), gts[i], per_video[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SyntheticData out;
  out.ground_truth = std::move(gts);
  for (auto& v : per_video) {
    for (auto& s : v) out.streams.push_back(std::move(s));
  }
  return out;
}

std::vector<std::uint8_t> native_fake_mask(const GroundTruth& gt, const ScoreStream& stream) {
  const auto forged = segments_affecting(gt, channel_of(stream.branch));
  std::vector<std::uint8_t> mask;
  for (const auto& unit :
       stream_units(stream.branch, stream_param(stream), gt.fps, gt.clip_duration_ms)) {
    mask.push_back(overlaps_any(unit, forged) ? 1 : 0);
  }
  return mask;
}

}  // namespace avfuse
