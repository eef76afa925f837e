#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "evio/error.hpp"
#include "evio/features.hpp"
#include "image_oracles.hpp"

using namespace evio;

namespace {

const int kCircle[16][2] = {{0, -3}, {1, -3},  {2, -2},  {3, -1}, {3, 0},   {3, 1},
                            {2, 2},  {1, 3},   {0, 3},   {-1, 3}, {-2, 2},  {-3, 1},
                            {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// Exhaustive FAST-9: every maximal arc of same-signed differences, scored by its |diff| sum.
double segment_test(const GrayImage& img, int x, int y, double t) {
  const float c = img(x, y);
  double d[16];
  for (int i = 0; i < 16; ++i) d[i] = double(img(x + kCircle[i][0], y + kCircle[i][1])) - c;
  double best = 0.0;
  for (int sign : {1, -1}) {
    auto on = [&](int i) { return sign * d[((i % 16) + 16) % 16] > t; };
    int all = 0;
    for (int i = 0; i < 16; ++i) all += on(i);
    if (all == 16) {
      double s = 0;
      for (double v : d) s += std::abs(v);
      best = std::max(best, s);
      continue;
    }
    for (int i = 0; i < 16; ++i) {
      if (!on(i) || on(i - 1)) continue;
      int len = 0;
      double s = 0;
      while (on(i + len)) s += std::abs(d[(i + len) % 16]), ++len;
      if (len >= 9) best = std::max(best, s);
    }
  }
  return best;
}

double centroid_oracle(const GrayImage& img, int cx, int cy) {
  double m10 = 0, m01 = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > 225) continue;
      m10 += dx * img(x, y);
      m01 += dy * img(x, y);
    }
  }
  return std::atan2(m01, m10);
}

}  // namespace

TEST_CASE("fast on a constant image finds nothing") {
  CHECK(detect_fast(GrayImage(40, 40, 0.5f)).empty());
  CHECK(detect_fast(GrayImage(6, 6, 0.5f)).empty());
}

TEST_CASE("fast finds the four corners of a bright square") {
  GrayImage img(40, 40, 0.25f);
  for (int y = 15; y < 25; ++y) for (int x = 15; x < 25; ++x) img(x, y) = 0.75f;
  const auto all = detect_fast(img, kDefaultFastThreshold, false);
  // Raw responses agree with the exhaustive segment test everywhere.
  std::map<std::pair<int, int>, float> got;
  for (const auto& k : all) got[{int(k.position.x()), int(k.position.y())}] = k.response;
  for (int y = 3; y < 37; ++y) {
    for (int x = 3; x < 37; ++x) {
      const double ref = segment_test(img, x, y, kDefaultFastThreshold);
      auto it = got.find({x, y});
      CHECK((it == got.end() ? 0.0 : double(it->second)) == ref);
    }
  }
  const auto kps = detect_fast(img);
  REQUIRE(kps.size() == 4);
  const Vec2 corners[4] = {{15, 15}, {24, 15}, {15, 24}, {24, 24}};
  for (const Vec2& c : corners) {
    const bool hit = std::any_of(kps.begin(), kps.end(),
                                 [&](const Keypoint& k) { return (k.position - c).norm() <= 1.5; });
    CHECK(hit);
  }
}

TEST_CASE("fast responses match the segment test on random images") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> u(0, 8);
  GrayImage img(48, 40);
  for (float& v : img.pixels()) v = u(rng) / 8.0f;
  const auto all = detect_fast(img, 0.2, false);
  std::map<std::pair<int, int>, float> got;
  for (const auto& k : all) got[{int(k.position.x()), int(k.position.y())}] = k.response;
  int mismatches = 0, corners = 0;
  for (int y = 3; y < 37; ++y) {
    for (int x = 3; x < 45; ++x) {
      const double ref = segment_test(img, x, y, 0.2);
      auto it = got.find({x, y});
      corners += ref > 0;
      mismatches += (it == got.end() ? 0.0 : double(it->second)) != ref;
    }
  }
  CHECK(corners > 20);
  CHECK(mismatches == 0);
}

TEST_CASE("fast suppression keeps local maxima only") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> u(0, 8);
  GrayImage img(48, 40);
  for (float& v : img.pixels()) v = u(rng) / 8.0f;
  const auto all = detect_fast(img, 0.2, false);
  const auto kept = detect_fast(img, 0.2, true);
  std::map<std::pair<int, int>, float> resp;
  for (const auto& k : all) resp[{int(k.position.x()), int(k.position.y())}] = k.response;
  for (const auto& k : kept) {
    const int x = int(k.position.x()), y = int(k.position.y());
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        auto it = resp.find({x + dx, y + dy});
        if ((dx || dy) && it != resp.end()) CHECK(it->second <= k.response);
      }
    }
  }
  CHECK(!kept.empty());
  CHECK(kept.size() < all.size());
}

TEST_CASE("fast orientation is the intensity centroid angle") {
  const GrayImage img = oracle::texture_image(64, 64, 0, 0, 3);
  for (const auto& k : detect_fast(img, 0.01, false)) {
    const int x = int(k.position.x()), y = int(k.position.y());
    CHECK(std::abs(k.orientation - centroid_oracle(img, x, y)) < 1e-6);
  }
}

TEST_CASE("brief pattern is frozen") {
  const auto& p = brief_pattern();
  REQUIRE(p.size() == 256);
  for (const auto& pr : p) {
    CHECK(pr.a.norm() <= 15.0);
    CHECK(pr.b.norm() <= 15.0);
  }
  CHECK(&brief_pattern() == &p);
  // Frozen values for seed 0x5EED.
  CHECK(p[0].a.x() == doctest::Approx(-3.20334250908676).epsilon(1e-12));
  CHECK(p[0].b.y() == doctest::Approx(-1.022625820822328).epsilon(1e-12));
  CHECK(p[1].a.y() == doctest::Approx(5.1703616547134787).epsilon(1e-12));
  CHECK(p[255].b.x() == doctest::Approx(0.13438523464598645).epsilon(1e-12));
}

TEST_CASE("descriptors are deterministic and skip border keypoints") {
  const GrayImage img = oracle::texture_image(80, 80, 0, 0, 4);
  std::vector<Keypoint> kps(3);
  kps[0].position = Vec2(40, 40);
  kps[1].position = Vec2(10, 40);
  kps[2].position = Vec2(40, 61);
  std::size_t skipped = 0;
  const auto a = orb_describe(img, kps, &skipped);
  const auto b = orb_describe(img, kps);
  CHECK(skipped == 2);
  REQUIRE(a[0].has_value());
  CHECK(*a[0] == *b[0]);
  CHECK_FALSE(a[1].has_value());
  CHECK_FALSE(a[2].has_value());
}

TEST_CASE("steered descriptors survive a 90 degree rotation") {
  const int N = 81, c = 40;
  int worst = 0;
  for (std::uint64_t seed : {5, 6, 7, 8, 9}) {
    const GrayImage img = oracle::texture_image(N, N, 0, 0, seed);
    // rot(x, y) = img(y, N - 1 - x): offset (u, v) moves to (-v, u), a +90 degree turn.
    GrayImage rot(N, N);
    for (int y = 0; y < N; ++y) for (int x = 0; x < N; ++x) rot(x, y) = img(y, N - 1 - x);
    Keypoint k0, k1;
    k0.position = k1.position = Vec2(c, c);
    k0.orientation = centroid_oracle(img, c, c);
    k1.orientation = centroid_oracle(rot, c, c);
    CHECK(std::remainder(k1.orientation - k0.orientation - M_PI / 2, 2 * M_PI) == doctest::Approx(0).epsilon(1e-9));
    const auto d0 = orb_describe(img, std::vector<Keypoint>{k0});
    const auto d1 = orb_describe(rot, std::vector<Keypoint>{k1});
    worst = std::max(worst, hamming(*d0[0], *d1[0]));
  }
  CHECK(worst <= 48);
}

TEST_CASE("uncorrelated noise patches are about 128 bits apart") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<float> u(0, 1);
  double total = 0;
  for (int i = 0; i < 1000; ++i) {
    GrayImage a(41, 41), b(41, 41);
    for (float& v : a.pixels()) v = u(rng);
    for (float& v : b.pixels()) v = u(rng);
    Keypoint k;
    k.position = Vec2(20, 20);
    total += hamming(*orb_describe(a, std::vector<Keypoint>{k})[0],
                     *orb_describe(b, std::vector<Keypoint>{k})[0]);
  }
  CHECK(std::abs(total / 1000 - 128) <= 15);
}

TEST_CASE("grid_select small cases") {
  Keypoint a, b;
  a.position = Vec2(5, 5);
  a.response = 5;
  CHECK(oracle::same_keypoints(grid_select(std::vector<Keypoint>{a}, 2, 2, 20, 20), {a}));
  b.position = Vec2(6, 7);
  b.response = 7;
  CHECK(oracle::same_keypoints(grid_select(std::vector<Keypoint>{a, b}, 2, 2, 20, 20), {b}));
  b.response = 5;
  CHECK(oracle::same_keypoints(grid_select(std::vector<Keypoint>{b, a}, 2, 2, 20, 20), {a}));
  CHECK(grid_select(std::vector<Keypoint>{}, 2, 2, 20, 20).empty());
  CHECK_THROWS_AS(grid_select(std::vector<Keypoint>{a}, 0, 2, 20, 20), Error);
}

TEST_CASE("grid_select matches the brute-force argmax") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto kps = oracle::random_keypoints(rng, 500, 346, 260, trial % 2 ? 4 : 1000);
    const auto got = grid_select(kps, 8, 8, 346, 260);
    CHECK(oracle::same_keypoints(got, oracle::grid_oracle(kps, 8, 8, 346, 260)));
    std::set<int> cells;
    for (const auto& k : kps) {
      cells.insert(std::min(7, int(k.position.y() * 8 / 260)) * 8 +
                   std::min(7, int(k.position.x() * 8 / 346)));
    }
    CHECK(got.size() == cells.size());
    CHECK(got.size() <= 64);
  }
}

TEST_CASE("grid_select is invariant to positive response scaling") {
  std::mt19937_64 rng(12);
  const auto kps = oracle::random_keypoints(rng, 300, 346, 260, 6);
  const auto base = grid_select(kps, 8, 10, 346, 260);
  for (float s : {0.5f, 2.0f, 3.0f, 1000.0f}) {
    auto scaled = kps;
    for (auto& k : scaled) k.response *= s;
    const auto out = grid_select(scaled, 8, 10, 346, 260);
    REQUIRE(out.size() == base.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].position == base[i].position);
  }
}

TEST_CASE("pyramid shapes") {
  const auto pyr = build_pyramid(GrayImage(346, 260, 0.5f), 3);
  REQUIRE(pyr.levels.size() == 3);
  CHECK(pyr.levels[1].width() == 173);
  CHECK(pyr.levels[2].width() == 87);
  CHECK(pyr.levels[2].height() == 65);
  CHECK(std::abs(pyr.levels[2](40, 30) - 0.5f) < 1e-6);
}

TEST_CASE("klt with identical frames stays put") {
  const GrayImage img = oracle::texture_image(160, 120, 0, 0, 13);
  const auto pyr = build_pyramid(img, 3);
  const std::vector<Vec2> pts = {{40, 40}, {80, 60}, {120.5, 90.25}};
  for (const auto& r : klt_track(pyr, pyr, pts, {})) {
    CHECK(r.live);
  }
  const auto res = klt_track(pyr, pyr, pts, {});
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK((res[i].point - pts[i]).norm() < 1e-3);
}

TEST_CASE("klt recovers a synthetic shift") {
  const auto prev = build_pyramid(oracle::texture_image(200, 150, 0, 0, 14), 3);
  const auto next = build_pyramid(oracle::texture_image(200, 150, 3.5, 0, 14), 3);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> ux(30, 165), uy(30, 120);
  std::vector<Vec2> pts(200);
  for (auto& p : pts) p = Vec2(ux(rng), uy(rng));
  const auto res = klt_track(prev, next, pts, {});
  int good = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    good += res[i].live && (res[i].point - pts[i] - Vec2(3.5, 0)).norm() < 0.2;
  }
  CHECK(good >= 190);
}

TEST_CASE("klt uses initial guesses") {
  const auto prev = build_pyramid(oracle::texture_image(200, 150, 0, 0, 16), 1);
  const auto next = build_pyramid(oracle::texture_image(200, 150, 9, -4, 16), 1);
  const std::vector<Vec2> pts = {{60, 60}, {100, 80}};
  const std::vector<Vec2> guess = {{68.5, 56.5}, {108.5, 76.5}};
  const auto res = klt_track(prev, next, pts, {}, guess);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(res[i].live);
    CHECK((res[i].point - pts[i] - Vec2(9, -4)).norm() < 0.2);
  }
}

TEST_CASE("klt pyramid consistency") {
  // A 2^L px shift tracked on level L alone and on level L + 1 alone agrees after upscaling.
  for (int L : {0, 1}) {
    const double shift = std::pow(2.0, L);
    const auto prev = build_pyramid(oracle::texture_image(256, 192, 0, 0, 17), 3);
    const auto next = build_pyramid(oracle::texture_image(256, 192, shift, 0, 17), 3);
    KltParams p;
    p.levels = 1;
    const Vec2 pt(128, 96);
    Vec2 disp[2];
    for (int k = 0; k < 2; ++k) {
      const double s = std::pow(2.0, L + k);
      Pyramid a, b;
      a.levels = {prev.levels[L + k]};
      b.levels = {next.levels[L + k]};
      const auto r = klt_track(a, b, std::vector<Vec2>{pt / s}, p);
      REQUIRE(r[0].live);
      disp[k] = (r[0].point - pt / s) * s;
    }
    CHECK((disp[0] - disp[1]).norm() < 0.5);
    CHECK(std::abs(disp[0].x() - shift) < 0.2);
  }
}

TEST_CASE("klt marks flat regions and exits as lost") {
  GrayImage img(100, 100, 0.5f);
  for (int y = 0; y < 100; ++y) for (int x = 60; x < 100; ++x) img(x, y) = float(oracle::texture(x, y, 18));
  const auto pyr = build_pyramid(img, 3);
  const auto res = klt_track(pyr, pyr, std::vector<Vec2>{{20, 20}, {80, 50}}, {});
  CHECK_FALSE(res[0].live);
  CHECK(res[1].live);
  const auto moved = klt_track(pyr, pyr, std::vector<Vec2>{{80, 50}}, {}, std::vector<Vec2>{{500, 50}});
  CHECK_FALSE(moved[0].live);
}

TEST_CASE("tracker keeps ids stable and never resurrects lost tracks") {
  TrackerConfig cfg;
  cfg.fast_threshold = 0.02;
  FeatureTracker tr(cfg);
  std::set<int> lost;
  for (int f = 0; f < 6; ++f) {
    tr.step(oracle::texture_image(346, 260, 1.5 * f, 0.5 * f, 19));
    for (const Track& t : tr.tracks()) {
      if (lost.count(t.id)) CHECK(t.status == TrackStatus::Lost);
      if (t.status == TrackStatus::Lost) lost.insert(t.id);
      CHECK(t.frames.size() == t.positions.size());
      for (std::size_t k = 1; k < t.frames.size(); ++k) {
        CHECK(t.frames[k] == t.frames[k - 1] + 1);
        CHECK((t.positions[k] - t.positions[k - 1]).norm() < 10);
      }
    }
    if (f == 0) CHECK(tr.new_ids().size() > 20);
    for (int id : tr.new_ids()) CHECK(tr.track(id).frames.front() == f);
  }
  const auto live = tr.live_ids();
  CHECK(live.size() > 20);
  const int id = live.front();
  tr.mark_lost(id);
  tr.step(oracle::texture_image(346, 260, 9, 3, 19));
  CHECK(tr.track(id).status == TrackStatus::Lost);
  CHECK(tr.track(id).frames.back() == 5);
}
