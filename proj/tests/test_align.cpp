#include <doctest.h>

#include <cmath>
#include <random>

#include "avfuse/align.hpp"
#include "avfuse/error.hpp"

using namespace avfuse;

namespace {

Logits L(double v) { return {-v, v}; }

std::vector<Logits> ramp(std::size_t n) {
  std::vector<Logits> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(L(static_cast<double>(i) + 1.0));
  return out;
}

ScoreStream audio(int r, std::vector<Logits> scores) {
  ScoreStream s;
  s.video_id = "v";
  s.branch = Branch::kAudio;
  s.resolution_ms = r;
  s.scores = std::move(scores);
  return s;
}

ScoreStream window(int w, std::vector<Logits> scores) {
  ScoreStream s;
  s.video_id = "v";
  s.branch = Branch::kVisualWindow;
  s.window_len_frames = w;
  s.scores = std::move(scores);
  return s;
}

ScoreStream sparse(int stride, std::vector<Logits> scores) {
  ScoreStream s;
  s.video_id = "v";
  s.branch = Branch::kLmmSparse;
  s.sparse_stride_frames = stride;
  s.scores = std::move(scores);
  return s;
}

// Nearest sample by explicit distance scan, earlier sample wins ties.
std::size_t nearest_sample(std::size_t i, std::size_t stride, std::size_t count) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < count; ++k) {
    const auto d_best = static_cast<long>(i) - static_cast<long>(best * stride);
    const auto d_k = static_cast<long>(i) - static_cast<long>(k * stride);
    if (std::labs(d_k) < std::labs(d_best)) best = k;
  }
  return best;
}

}  // namespace

TEST_CASE("repeat_upsample examples") {
  const auto a = L(1), b = L(2), c = L(3);
  CHECK(repeat_upsample(audio(40, {a, b, c}), TokenGrid(120)).values == std::vector<Logits>{a, b, c});
  CHECK(repeat_upsample(audio(160, {a, b}), TokenGrid(320)).values ==
        std::vector<Logits>{a, a, a, a, b, b, b, b});
  // 9 tokens from a single 320 ms score: 8 repeats plus one tail fill.
  CHECK(repeat_upsample(audio(320, {a}), TokenGrid(360)).values == std::vector<Logits>(9, a));
  // Over-covering source is truncated.
  CHECK(repeat_upsample(audio(80, {a, b, c}), TokenGrid(120)).values == std::vector<Logits>{a, a, b});
}

TEST_CASE("repeat_upsample errors") {
  CHECK_THROWS_AS(repeat_upsample(audio(20, {L(1)}), TokenGrid(120)), ValidationError);
  CHECK_THROWS_AS(repeat_upsample(audio(60, {L(1)}), TokenGrid(120)), ValidationError);
  CHECK_THROWS_AS(repeat_upsample(audio(40, {}), TokenGrid(120)), ValidationError);
}

TEST_CASE("repeat_upsample is piecewise constant with block length r/40 and adds no values") {
  std::mt19937 rng(5);
  for (int r : {40, 80, 160, 320, 640}) {
    for (std::int64_t duration : {40, 200, 999, 2560}) {
      const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
      const auto src = ramp(m);
      const auto out = repeat_upsample(audio(r, src), TokenGrid(duration)).values;
      const std::size_t block = static_cast<std::size_t>(r / 40);
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(std::find(src.begin(), src.end(), out[i]) != src.end());
        if (i % block != 0) CHECK(out[i] == out[i - 1]);
      }
    }
  }
  // Idempotent at 40 ms.
  const auto once = repeat_upsample(audio(40, ramp(5)), TokenGrid(200));
  const auto twice = repeat_upsample(audio(40, once.values), TokenGrid(200));
  CHECK(once.values == twice.values);
}

TEST_CASE("select_resolutions") {
  std::vector<ScoreStream> streams;
  for (int r : {20, 40, 80, 160, 320, 640}) streams.push_back(audio(r, {L(r)}));
  const auto kept = select_resolutions(streams, {160, 320, 640});
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].resolution_ms == 160);
  CHECK(kept[2].resolution_ms == 640);
  CHECK(select_resolutions(streams, {20, 40, 80, 160, 320, 640}).size() == 6);

  std::vector<ScoreStream> partial{audio(320, {L(1)}), audio(640, {L(1)})};
  try {
    select_resolutions(partial, {160});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("160") != std::string::npos);
  }
}

TEST_CASE("window_densify examples") {
  const auto p = L(1), q = L(2), r = L(3);
  CHECK(window_densify(window(1, {p, q, r}), 3) == std::vector<Logits>{p, q, r});
  CHECK(window_densify(window(3, {p, q, r}), 5) == std::vector<Logits>{p, p, q, r, r});
  // c = floor(4/2) = 2: frames 2..4 carry p, q, r.
  CHECK(window_densify(window(4, {p, q, r}), 6) == std::vector<Logits>{p, p, p, q, r, r});
  CHECK_THROWS_AS(window_densify(window(3, {p, q}), 5), ValidationError);
  CHECK_THROWS_AS(window_densify(window(8, {p}), 5), ValidationError);
}

TEST_CASE("window_densify matches center enumeration") {
  for (std::size_t w = 1; w <= 9; ++w) {
    for (std::size_t frames = w; frames <= w + 12; ++frames) {
      const std::size_t m = frames - w + 1;
      const auto src = ramp(m);
      // Each window's center frame gets its score, remaining frames copy the nearest end.
      std::vector<int> owner(frames, -1);
      for (std::size_t j = 0; j < m; ++j) owner[j + w / 2] = static_cast<int>(j);
      const auto out = window_densify(window(static_cast<int>(w), src), frames);
      for (std::size_t i = 0; i < frames; ++i) {
        const std::size_t expect = owner[i] >= 0 ? static_cast<std::size_t>(owner[i])
                                   : i < w / 2   ? 0
                                                 : m - 1;
        REQUIRE(out[i] == src[expect]);
      }
    }
  }
}

TEST_CASE("window_densify keeps constants constant") {
  const auto out = window_densify(window(5, std::vector<Logits>(6, L(0.25))), 10);
  CHECK(out == std::vector<Logits>(10, L(0.25)));
}

TEST_CASE("sparse_densify examples") {
  const auto a = L(1), b = L(2);
  CHECK(sparse_densify(sparse(200, {a}), 1) == std::vector<Logits>{a});
  CHECK(sparse_densify(sparse(4, {a, b}), 8) == std::vector<Logits>{a, a, a, b, b, b, b, b});
  const auto out = sparse_densify(sparse(200, {a, b}), 400);
  for (std::size_t i = 0; i <= 100; ++i) CHECK(out[i] == a);
  for (std::size_t i = 101; i < 400; ++i) CHECK(out[i] == b);
  CHECK_THROWS_AS(sparse_densify(sparse(200, {a, b}), 200), ValidationError);
}

TEST_CASE("sparse_densify matches nearest-sample scan and is exact at samples") {
  for (std::size_t stride = 1; stride <= 9; ++stride) {
    for (std::size_t frames = 1; frames <= 40; ++frames) {
      const std::size_t count = (frames - 1) / stride + 1;
      const auto src = ramp(count);
      const auto out = sparse_densify(sparse(static_cast<int>(stride), src), frames);
      for (std::size_t i = 0; i < frames; ++i) {
        REQUIRE(out[i] == src[nearest_sample(i, stride, count)]);
      }
      for (std::size_t k = 0; k < count; ++k) CHECK(out[k * stride] == src[k]);
    }
  }
}

TEST_CASE("to_token_grid") {
  SUBCASE("identity at 25 fps") {
    const auto frames = ramp(10);
    CHECK(to_token_grid(frames, 25.0, TokenGrid(400)).values == frames);
  }
  SUBCASE("50 fps picks the earlier of two equidistant frames") {
    const auto frames = ramp(20);
    const auto out = to_token_grid(frames, 50.0, TokenGrid(400)).values;
    for (std::size_t t = 0; t < 10; ++t) CHECK(out[t] == frames[2 * t]);
  }
  SUBCASE("12.5 fps serves two tokens per frame") {
    const auto frames = ramp(5);
    const auto out = to_token_grid(frames, 12.5, TokenGrid(400)).values;
    for (std::size_t t = 0; t < 10; ++t) CHECK(out[t] == frames[t / 2]);
  }
  SUBCASE("frame count mismatch") {
    CHECK_THROWS_AS(to_token_grid(ramp(9), 25.0, TokenGrid(400)), ValidationError);
  }
  SUBCASE("matches a midpoint-distance scan at odd frame rates") {
    for (double fps : {7.0, 23.976, 29.97, 30.0, 60.0}) {
      const TokenGrid grid(1234);
      const std::size_t n = frame_count(fps, grid.clip_duration_ms());
      const auto frames = ramp(n);
      const auto out = to_token_grid(frames, fps, grid).values;
      for (std::size_t t = 0; t < grid.num_tokens(); ++t) {
        const double mid = (t + 0.5) * 40.0;
        std::size_t best = 0;
        for (std::size_t f = 1; f < n; ++f) {
          if (std::abs((f + 0.5) * 1000.0 / fps - mid) < std::abs((best + 0.5) * 1000.0 / fps - mid) - 1e-9) best = f;
        }
        CHECK(out[t] == frames[best]);
      }
    }
  }
}

TEST_CASE("stack_fused") {
  const TokenGrid one(40);
  AlignedStream v{one, "visual", {{1, 2}}};
  std::vector<AlignedStream> a{{one, "audio160", {{3, 4}}}, {one, "audio320", {{5, 6}}},
                               {one, "audio640", {{7, 8}}}};
  const auto fused = stack_fused(v, a);
  REQUIRE(fused.dim() == 8);
  CHECK(std::vector<double>(fused.row(0).begin(), fused.row(0).end()) ==
        std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});

  AlignedStream zero{one, "visual", {{0, 0}}};
  const auto zeros = stack_fused(zero, std::vector<AlignedStream>(3, zero));
  CHECK(zeros.data() == std::vector<double>(8, 0.0));

  std::vector<AlignedStream> bad{{TokenGrid(80), "audio160", {{0, 0}, {0, 0}}}};
  CHECK_THROWS_AS(stack_fused(v, bad), ValidationError);
}

TEST_CASE("stack_fused matches element indexing and unstacks bit-exactly") {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0, 3);
  for (std::size_t k = 1; k <= 5; ++k) {
    const TokenGrid grid(120);
    std::vector<AlignedStream> streams;
    for (std::size_t s = 0; s < k; ++s) {
      AlignedStream a{grid, "s" + std::to_string(s), {}};
      for (std::size_t t = 0; t < 3; ++t) a.values.push_back({n(rng), n(rng)});
      streams.push_back(a);
    }
    const auto fused = stack_fused(streams);
    CHECK(fused.dim() == 2 * k);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t j = 0; j < 2 * k; ++j) {
        CHECK(fused.data()[t * 2 * k + j] == streams[j / 2].values[t][j % 2]);
      }
    }
    for (std::size_t s = 0; s < k; ++s) CHECK(unstack(fused, s) == streams[s].values);
  }
}

TEST_CASE("align_video builds the default 8-logit layout") {
  GroundTruth gt;
  gt.video_id = "v";
  gt.clip_duration_ms = 1000;  // 25 tokens / frames
  std::vector<ScoreStream> streams{window(16, ramp(10)), sparse(200, {L(9)}),
                                   audio(160, ramp(7)), audio(320, ramp(4)), audio(640, ramp(2)),
                                   audio(20, ramp(50))};
  const auto a = align_video(gt, streams, default_layout());
  CHECK(a.grid.num_tokens() == 25);
  CHECK(a.fused.dim() == 8);
  CHECK(a.streams[1].name == "audio160");

  const auto four = align_video(gt, streams, layout_for_resolutions({320}));
  CHECK(four.fused.dim() == 4);

  std::vector<ScoreStream> missing{window(16, ramp(10)), audio(320, ramp(4)), audio(640, ramp(2))};
  try {
    align_video(gt, missing, default_layout());
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("v") != std::string::npos);
    CHECK(std::string(e.what()).find("160") != std::string::npos);
  }
}
