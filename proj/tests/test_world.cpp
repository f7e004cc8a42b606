#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pva/image.hpp"
#include "pva/world.hpp"
#include "test_util.hpp"

using namespace pva;
using namespace pva::world;

static WorldConfig base_config(int obstacles = 0) {
  WorldConfig cfg;
  cfg.domains = canonical_domains();
  cfg.seen_domains = {"ClearNoon", "HardRainNoon"};
  cfg.obstacle_count = obstacles;
  return cfg;
}

TEST_CASE("render is deterministic in (state, domain, seed)") {
  World w(base_config());
  VehicleState st;
  st.position = {10.0, 0.3};
  st.heading = 0.05;
  st.speed = 3.0;
  st.lane_offset = 0.3;
  st.distance_to_goal = 30.0;
  auto& dom = w.config().domain("ClearNoon");
  auto a = w.render(st, dom, 7);
  auto b = w.render(st, dom, 7);
  CHECK(a.data == b.data);
  for (float v : a.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(a.shape == std::vector<int64_t>{3, 64, 64});
}

TEST_CASE("cloudiness sweep: mean luminance monotonically non-increasing") {
  World w(base_config());
  VehicleState st;
  st.position = {8.0, -0.2};
  st.distance_to_goal = 32.0;
  double prev = 1e9;
  for (int i = 0; i <= 10; ++i) {
    DomainSpec d{"sweep", i / 10.0, 0.3, 30.0, 200.0};
    double lum = img::mean_luminance(w.render(st, d, 5));
    CHECK(lum <= prev + 1e-7);
    prev = lum;
  }
}

TEST_CASE("seed changes affect only rain-masked pixels") {
  World w(base_config());
  VehicleState st;
  st.position = {5.0, 0.0};
  st.distance_to_goal = 35.0;
  DomainSpec d{"rainy", 0.4, 0.8, 55.0, 190.0};
  auto la = w.render_layers(st, d, 11);
  auto lb = w.render_layers(st, d, 999);
  int64_t plane = 64 * 64;
  int diff_pixels = 0;
  for (int64_t i = 0; i < plane; ++i) {
    bool differs = false;
    for (int c = 0; c < 3; ++c)
      if (la.image.at(c * plane + i) != lb.image.at(c * plane + i)) differs = true;
    if (differs) {
      ++diff_pixels;
      CHECK((la.rain_mask[size_t(i)] || lb.rain_mask[size_t(i)]));
    }
  }
  CHECK(diff_pixels > 0);  // streak placement did move
}

TEST_CASE("geometry labels are domain independent and lane lines visible") {
  World w(base_config());
  VehicleState st;
  st.position = {12.0, 0.4};
  st.heading = -0.1;
  st.distance_to_goal = 28.0;
  auto a = w.render_layers(st, w.config().domain("ClearNoon"), 3);
  auto b = w.render_layers(st, w.config().domain("SoftRainSunset"), 3);
  CHECK(a.regions == b.regions);
  int lane_pixels = 0;
  for (auto r : a.regions)
    if (r == uint8_t(Region::lane_line)) ++lane_pixels;
  CHECK(lane_pixels > 20);
}

TEST_CASE("invalid domain parameters are rejected") {
  World w(base_config());
  VehicleState st;
  DomainSpec bad{"bad", 1.4, 0.0, 75.0, 180.0};
  CHECK_THROWS_AS(w.render(st, bad, 0), Error);
}

TEST_CASE("reward equation: plain step") {
  WorldConfig cfg = base_config(0);
  World w(cfg);
  VehicleState st;
  st.position = {10.0, 0.0};
  st.speed = 5.0;
  st.distance_to_goal = 30.0;
  auto [next, res] = w.step(st, {0.0, 0.0}, cfg.domains[0], 0, 1, nullptr);
  CHECK(res.reward == doctest::Approx(4.9).epsilon(1e-12));
  CHECK(res.reason == StepReason::running);
  CHECK_FALSE(res.terminated);
  CHECK(next.speed == doctest::Approx(5.0));
}

TEST_CASE("reward equation: collision step") {
  WorldConfig cfg = base_config(3);
  World w(cfg);
  REQUIRE(!w.obstacles().empty());
  auto ob = w.obstacles()[0];
  VehicleState st;
  st.position = {ob.s - 0.2, ob.y};
  st.speed = 2.0;
  st.lane_offset = ob.y;
  st.distance_to_goal = cfg.road_length - st.position[0];
  auto [next, res] = w.step(st, {0.0, 0.0}, cfg.domains[0], 0, 1, nullptr);
  CHECK(res.reason == StepReason::collision);
  CHECK(res.terminated);
  CHECK(res.reward == doctest::Approx(2.0 - 100.0 - 0.1).epsilon(1e-12));
}

TEST_CASE("timeout and arrival") {
  WorldConfig cfg = base_config(0);
  cfg.step_budget = 3;
  Env env(cfg, cfg.domains[0], 5);
  env.reset(42);
  StepResult r;
  for (int i = 0; i < 3; ++i) r = env.step({0.5, 0.0});
  CHECK(r.terminated);
  CHECK(r.reason == StepReason::timeout);

  WorldConfig cfg2 = base_config(0);
  World w2(cfg2);
  VehicleState st;
  st.position = {cfg2.road_length - 1.05, 0.0};
  st.speed = 5.0;
  st.distance_to_goal = 1.05;
  auto [next, res] = w2.step(st, {0.0, 0.0}, cfg2.domains[0], 0, 1, nullptr);
  CHECK(res.reason == StepReason::arrived);
  CHECK(res.reward == doctest::Approx(5.0 - 0.1 + 100.0).epsilon(1e-12));
}

TEST_CASE("out-of-bound actions are clamped and counted") {
  WorldConfig cfg = base_config(0);
  Env env(cfg, cfg.domains[0], 5);
  env.reset(1);
  CHECK(env.clamp_count() == 0);
  env.step({5.0, -0.9});
  CHECK(env.clamp_count() == 1);
  env.step({0.1, 0.0});
  CHECK(env.clamp_count() == 1);
}

TEST_CASE("reward decomposition and action bounds over random steps") {
  WorldConfig cfg = base_config(3);
  cfg.step_budget = 60;
  Env env(cfg, cfg.domains[1], 17);
  Rng rng(123);
  int steps = 0;
  env.reset(rng.next_u64());
  while (steps < 2000) {
    Action a{rng.uniform(-4, 4), rng.uniform(-0.5, 0.5)};
    auto res = env.step(a);
    double v = res.observation.velocity;
    double decomp = res.reward - (cfg.lambda_v * v + cfg.step_cost);
    bool ok = std::abs(decomp) < 1e-9 || std::abs(decomp + 100) < 1e-9 ||
              std::abs(decomp + 200) < 1e-9 || std::abs(decomp - cfg.arrival_bonus) < 1e-9;
    CHECK(ok);
    CHECK(v >= 0.0);
    CHECK(v <= cfg.max_speed);
    ++steps;
    if (res.terminated) env.reset(rng.next_u64());
  }
}

TEST_CASE("episode determinism: same seed, same trajectory") {
  WorldConfig cfg = base_config(2);
  Env e1(cfg, cfg.domains[0], 7), e2(cfg, cfg.domains[0], 7);
  auto o1 = e1.reset(101), o2 = e2.reset(101);
  CHECK(o1.image.data == o2.image.data);
  for (int i = 0; i < 10; ++i) {
    auto r1 = e1.step({1.0, 0.05});
    auto r2 = e2.step({1.0, 0.05});
    CHECK(r1.reward == r2.reward);
    CHECK(r1.observation.image.data == r2.observation.image.data);
    if (r1.terminated) break;
  }
}

TEST_CASE("semantic dataset sampling") {
  World w(base_config());
  std::vector<DomainSpec> doms = {w.config().domain("ClearNoon"),
                                  w.config().domain("HardRainNoon")};
  auto ds = sample_semantic_dataset(w, doms, 100, 9);
  CHECK(ds.entries.size() == 200);
  int c0 = 0, c1 = 0;
  for (auto& e : ds.entries) (e.domain_index == 0 ? c0 : c1)++;
  CHECK(c0 == 100);
  CHECK(c1 == 100);
  CHECK_THROWS_AS(sample_semantic_dataset(w, doms, 0, 9), Error);

  auto ds2 = sample_semantic_dataset(w, doms, 100, 9);
  for (size_t i = 0; i < ds.entries.size(); ++i) {
    CHECK(ds.entries[i].image.data == ds2.entries[i].image.data);
    CHECK(ds.entries[i].caption == ds2.entries[i].caption);
  }
}

TEST_CASE("policy dataset sampling") {
  World w(base_config());
  auto ds = sample_policy_dataset(w, "ClearNoon", 500, 4);
  CHECK(ds.entries.size() == 500);
  for (auto& e : ds.entries) CHECK(e.domain_index == 0);
  auto one = sample_policy_dataset(w, "ClearNoon", 1, 4);
  CHECK(one.entries.size() == 1);
  CHECK_THROWS_AS(sample_policy_dataset(w, "NoSuchWeather", 10, 4), Error);
}

TEST_CASE("caption template") {
  DomainSpec clear_noon{"ClearNoon", 0.05, 0.0, 75.0, 180.0};
  VehicleState st;
  st.lane_offset = 0.4;  // left bin
  st.heading = 0.0;
  st.distance_to_goal = 30.0;
  CHECK(caption(st, clear_noon) == "driving on the road, clear noon, vehicle left of center, goal far");

  CHECK(caption(st, clear_noon) == caption(st, clear_noon));

  VehicleState st2 = st;
  st2.lane_offset = -0.4;  // right bin; only the offset phrase may change
  auto a = caption(st, clear_noon);
  auto b = caption(st2, clear_noon);
  CHECK(a != b);
  auto pos_a = a.find("left of center");
  auto pos_b = b.find("right of center");
  REQUIRE(pos_a != std::string::npos);
  REQUIRE(pos_b != std::string::npos);
  CHECK(a.substr(0, pos_a) == b.substr(0, pos_b));
  CHECK(a.substr(pos_a + 14) == b.substr(pos_b + 15));
}

TEST_CASE("weather phrases for the canonical domains") {
  auto doms = canonical_domains();
  CHECK(weather_phrase(doms[0]) == "clear noon");
  CHECK(weather_phrase(doms[1]) == "hard rain noon");
  CHECK(weather_phrase(doms[2]) == "clear sunset");
  CHECK(weather_phrase(doms[3]) == "wet cloudy sunset");
  CHECK(weather_phrase(doms[4]) == "soft rain sunset");
}

TEST_CASE("return upper bound on random rollouts") {
  WorldConfig cfg = base_config(2);
  Env env(cfg, cfg.domains[0], 3);
  Rng rng(5);
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(rng.next_u64());
    double ret = 0;
    while (true) {
      auto r = env.step({rng.uniform(-3, 3), rng.uniform(-0.3, 0.3)});
      ret += r.reward;
      if (r.terminated) break;
    }
    CHECK(ret <= cfg.lambda_v * cfg.max_speed * cfg.step_budget);
  }
}

TEST_CASE("png round trip") {
  World w(base_config());
  VehicleState st;
  st.position = {10, 0.2};
  st.distance_to_goal = 30;
  auto im = w.render(st, w.config().domain("SoftRainSunset"), 12);
  testutil::TempDir td("png");
  img::write_png(td.str() + "/x.png", im);
  auto back = img::read_png(td.str() + "/x.png");
  CHECK(back.shape == im.shape);
  double worst = 0;
  for (int64_t i = 0; i < im.numel(); ++i)
    worst = std::max(worst, std::abs(double(back.at(i)) - double(im.at(i))));
  CHECK(worst <= 0.5 / 255.0 + 1e-6);
}
