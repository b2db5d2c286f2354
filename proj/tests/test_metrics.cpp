#include <doctest.h>

#include <cmath>
#include <random>

#include "avfuse/error.hpp"
#include "avfuse/metrics.hpp"
#include "oracles.hpp"

using namespace avfuse;

namespace {

std::vector<VideoLocalization> random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_videos(1, 4), n_props(0, 6), n_gt(0, 4), cell(0, 9),
      width(1, 4), conf(1, 5);
  std::vector<VideoLocalization> out;
  const int videos = n_videos(rng);
  for (int v = 0; v < videos; ++v) {
    VideoLocalization loc;
    loc.video_id = "v" + std::to_string(v);
    for (int g = n_gt(rng); g > 0; --g) {
      const std::int64_t a = cell(rng) * 40;
      loc.ground_truth.push_back({a, a + width(rng) * 40});
    }
    for (int p = n_props(rng); p > 0; --p) {
      const std::int64_t a = cell(rng) * 40;
      loc.proposals.push_back({a, a + width(rng) * 40, conf(rng) / 5.0});
    }
    out.push_back(std::move(loc));
  }
  if (std::none_of(out.begin(), out.end(), [](const auto& l) { return !l.ground_truth.empty(); })) {
    out[0].ground_truth.push_back({0, 120});
  }
  return out;
}

}  // namespace

TEST_CASE("roc_auc examples") {
  CHECK(roc_auc(std::vector<double>{0.9, 0.1}, TokenLabels{1, 0}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, TokenLabels{1, 0, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.8, 0.8, 0.3}, TokenLabels{1, 0, 0}) == 0.75);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1, 0.2}, TokenLabels{1, 1}), ValidationError);
  CHECK_THROWS_AS(roc_auc(std::vector<double>{0.1}, TokenLabels{1, 0}), ValidationError);
}

TEST_CASE("roc_auc equals pairwise concordance, is anti-symmetric and rank-invariant") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 40;
    std::vector<double> s(n);
    TokenLabels y(n);
    std::uniform_int_distribution<int> level(0, 6);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) / 6.0;
      y[i] = static_cast<std::uint8_t>(level(rng) % 2);
    }
    y[0] = 1;
    y[1] = 0;
    const double auc = roc_auc(s, y);
    CHECK(std::abs(auc - oracle::pairwise_auc(s, y)) < 1e-12);
    std::vector<double> neg(n), mono(n);
    for (std::size_t i = 0; i < n; ++i) {
      neg[i] = -s[i];
      mono[i] = std::exp(3 * s[i]) - 7;
    }
    CHECK(std::abs(auc + roc_auc(neg, y) - 1.0) < 1e-12);
    CHECK(roc_auc(mono, y) == auc);
  }
}

TEST_CASE("eer examples") {
  CHECK(eer(std::vector<double>{0.9, 0.8, 0.2, 0.1}, TokenLabels{1, 1, 0, 0}) == 0.0);
  CHECK(eer(std::vector<double>{0.9, 0.6, 0.4, 0.1}, TokenLabels{1, 0, 1, 0}) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(eer(std::vector<double>{0.1, 0.2}, TokenLabels{0, 0}), ValidationError);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(20000);
  TokenLabels y(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    y[i] = u(rng) < 0.5;
  }
  CHECK(std::abs(eer(s, y) - 0.5) < 0.02);
}

TEST_CASE("eer matches the two-point mixture oracle") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + trial % 25;
    std::vector<double> s(n);
    TokenLabels y(n);
    std::uniform_int_distribution<int> level(0, 9);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng);
      y[i] = static_cast<std::uint8_t>(level(rng) % 2);
    }
    y[0] = 1;
    y[1] = 0;
    CHECK(std::abs(eer(s, y) - oracle::mixture_eer(s, y)) < 1e-12);
  }
}

TEST_CASE("segment_auc pools tokens") {
  std::vector<LabeledScores> one{{{0.1, 0.9, 0.4}, {0, 1, 0}}};
  CHECK(segment_auc(one) == 1.0);
  std::vector<LabeledScores> two{{{0.1, 0.7}, {0, 1}}, {{0.8, 0.2, 0.75}, {0, 1, 1}}};
  const std::vector<double> pooled{0.1, 0.7, 0.8, 0.2, 0.75};
  CHECK(segment_auc(two) == roc_auc(pooled, TokenLabels{0, 1, 0, 1, 1}));
  std::vector<LabeledScores> reals{{{0.1}, {0}}, {{0.2}, {0}}};
  CHECK_THROWS_AS(segment_auc(reals), ValidationError);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  LabeledScores big;
  for (int i = 0; i < 10000; ++i) {
    big.scores.push_back(u(rng));
    big.labels.push_back(u(rng) < 0.3);
  }
  CHECK(std::abs(segment_auc(std::vector<LabeledScores>{big}) - 0.5) < 0.02);
}

TEST_CASE("iou") {
  CHECK(iou({0, 100}, {0, 100}) == 1.0);
  CHECK(iou({0, 100}, {100, 200}) == 0.0);
  CHECK(iou({0, 100}, {50, 150}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(iou({10, 10}, {0, 100}), ValidationError);
}

TEST_CASE("average_precision examples") {
  std::vector<VideoLocalization> exact{{"a", {{0, 400, 0.7}}, {{0, 400}}}};
  for (double tau : {0.5, 0.75, 0.9, 0.95}) CHECK(average_precision(exact, tau) == 1.0);
  std::vector<VideoLocalization> none{{"a", {}, {{0, 400}}}};
  CHECK(average_precision(none, 0.5) == 0.0);
  // IoU 0.6 hit then a disjoint miss.
  std::vector<VideoLocalization> two{{"a", {{0, 600, 0.9}, {2000, 2100, 0.8}}, {{0, 1000}}}};
  CHECK(average_precision(two, 0.5) == 1.0);
  CHECK(average_precision(two, 0.75) == 0.0);
  std::vector<VideoLocalization> empty_gt{{"a", {{0, 10, 0.5}}, {}}};
  CHECK_THROWS_AS(average_precision(empty_gt, 0.5), ValidationError);
}

TEST_CASE("average_recall examples") {
  std::vector<VideoLocalization> exact{{"a", {{0, 400, 0.7}, {800, 1200, 0.6}}, {{0, 400}, {800, 1200}}}};
  CHECK(average_recall_at(exact, 5) == 1.0);
  CHECK(average_recall_at(exact, 0) == 0.0);
  // IoU 0.7: hits at 0.50..0.70, five of ten thresholds.
  std::vector<VideoLocalization> partial{{"a", {{0, 700, 0.9}}, {{0, 1000}}}};
  CHECK(average_recall_at(partial, 10) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("AP and AR match the brute-force oracle; monotone in tau and budget") {
  std::mt19937_64 rng(24);
  const auto grid = default_ar_iou_grid();
  for (int trial = 0; trial < 500; ++trial) {
    const auto inst = random_instance(rng);
    double prev_ap = 2.0;
    for (double tau : {0.1, 0.3, 0.5, 0.75, 0.9, 0.95}) {
      const double ap = average_precision(inst, tau);
      REQUIRE(std::abs(ap - oracle::brute_ap(inst, tau)) <= 1e-12);
      CHECK(ap <= prev_ap + 1e-15);
      prev_ap = ap;
    }
    double prev_ar = -1.0;
    for (int n : {0, 1, 2, 3, 5, 10}) {
      const double ar = average_recall_at(inst, n);
      REQUIRE(std::abs(ar - oracle::brute_ar(inst, n, grid)) <= 1e-12);
      CHECK(ar >= prev_ar - 1e-15);
      prev_ar = ar;
    }
  }
}

TEST_CASE("evaluate fills every configured key") {
  std::vector<VideoEvaluation> videos(2);
  videos[0] = {"a", VideoLabel::kFake, 0.9, {{0.2, 0.9}, {0, 1}}, {"a", {{40, 80, 0.9}}, {{40, 80}}}};
  videos[1] = {"b", VideoLabel::kReal, 0.1, {{0.1, 0.05}, {0, 0}}, {"b", {}, {}}};
  const MetricsConfig cfg;
  const auto r = evaluate(videos, cfg);
  CHECK(r.auc_video == 1.0);
  CHECK(r.auc_segment == 1.0);
  CHECK(r.eer == 0.0);
  CHECK(r.ap.size() == 4);
  CHECK(r.ar.size() == 5);
  CHECK(r.ap.at(0.95) == 1.0);
  CHECK(r.ar.at(50) == 1.0);
  CHECK(r.num_tokens == 4);
  CHECK(r.num_gt_segments == 1);
}
