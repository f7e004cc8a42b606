#include "pva/world.hpp"

#include <algorithm>
#include <cmath>

namespace pva::world {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Rgb {
  float r, g, b;
};

inline Rgb lerp(Rgb a, Rgb b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline float luma(Rgb c) { return 0.299f * c.r + 0.587f * c.g + 0.114f * c.b; }

// deterministic value noise on a coarse grid
float value_noise(double x, double y, uint64_t seed) {
  auto h = [seed](int64_t ix, int64_t iy) {
    uint64_t v = fnv1a64(&ix, sizeof(ix), seed ^ 0x9e3779b97f4a7c15ULL);
    v = fnv1a64(&iy, sizeof(iy), v);
    return float(double(v >> 11) * 0x1.0p-53);
  };
  int64_t ix = int64_t(std::floor(x)), iy = int64_t(std::floor(y));
  float fx = float(x - double(ix)), fy = float(y - double(iy));
  float sx = fx * fx * (3 - 2 * fx), sy = fy * fy * (3 - 2 * fy);
  float v00 = h(ix, iy), v10 = h(ix + 1, iy), v01 = h(ix, iy + 1), v11 = h(ix + 1, iy + 1);
  return (v00 * (1 - sx) + v10 * sx) * (1 - sy) + (v01 * (1 - sx) + v11 * sx) * sy;
}

}  // namespace

void DomainSpec::validate() const {
  require(!name.empty(), ErrCode::param, "domain name empty");
  require(cloudiness >= 0 && cloudiness <= 1, ErrCode::param,
          "domain " + name + ": cloudiness out of [0,1]");
  require(precipitation >= 0 && precipitation <= 1, ErrCode::param,
          "domain " + name + ": precipitation out of [0,1]");
  require(sun_altitude >= -90 && sun_altitude <= 90, ErrCode::param,
          "domain " + name + ": sun_altitude out of [-90,90]");
  require(sun_azimuth >= 0 && sun_azimuth < 360, ErrCode::param,
          "domain " + name + ": sun_azimuth out of [0,360)");
}

const char* reason_name(StepReason r) {
  switch (r) {
    case StepReason::running: return "running";
    case StepReason::arrived: return "arrived";
    case StepReason::collision: return "collision";
    case StepReason::timeout: return "timeout";
    case StepReason::lane_exit: return "lane_exit";
  }
  return "?";
}

std::vector<DomainSpec> canonical_domains() {
  return {
      {"ClearNoon", 0.05, 0.00, 75.0, 180.0},
      {"HardRainNoon", 0.75, 0.85, 70.0, 180.0},
      {"ClearSunset", 0.10, 0.00, 6.0, 250.0},
      {"WetCloudySunset", 0.80, 0.10, 7.0, 250.0},
      {"SoftRainSunset", 0.55, 0.35, 5.0, 250.0},
  };
}

void WorldConfig::validate() const {
  require(resolution >= 16 && resolution % 2 == 0, ErrCode::config,
          "world.resolution must be even and >= 16");
  require(road_length > 4, ErrCode::config, "world.road_length too small");
  require(dt > 0 && max_speed > 0 && step_budget > 0, ErrCode::config, "world timing invalid");
  require(!domains.empty(), ErrCode::config, "world.domains empty");
  for (size_t i = 0; i < domains.size(); ++i) {
    domains[i].validate();
    for (size_t j = i + 1; j < domains.size(); ++j)
      require(domains[i].name != domains[j].name, ErrCode::config,
              "duplicate domain name " + domains[i].name);
  }
  for (auto& n : seen_domains) domain(n);
  domain(unified_domain);
}

const DomainSpec& WorldConfig::domain(const std::string& name) const {
  for (auto& d : domains)
    if (d.name == name) return d;
  fail(ErrCode::param, "domain not in registry: " + name);
}

int WorldConfig::domain_index(const std::string& name) const {
  for (size_t i = 0; i < domains.size(); ++i)
    if (domains[i].name == name) return int(i);
  fail(ErrCode::param, "domain not in registry: " + name);
}

World::World(WorldConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.world_seed);
  for (int i = 0; i < cfg_.obstacle_count; ++i) {
    Obstacle o;
    o.s = rng.uniform(8.0, std::max(9.0, cfg_.road_length - 6.0));
    double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    o.y = side * rng.uniform(0.55, 0.85) * cfg_.lane_half_width;
    o.radius = cfg_.obstacle_radius;
    obstacles_.push_back(o);
  }
}

double World::curvature(double s) const {
  return cfg_.curve_amplitude *
         std::sin(2.0 * kPi * s / cfg_.curve_wavelength + cfg_.curve_phase);
}

VehicleState World::initial_state(Rng& rng) const {
  VehicleState st;
  st.position = {0.0, rng.uniform(-cfg_.init_offset_range, cfg_.init_offset_range)};
  st.heading = rng.uniform(-cfg_.init_heading_range, cfg_.init_heading_range);
  st.speed = rng.uniform(0.0, cfg_.init_speed_max);
  st.lane_offset = st.position[1];
  st.distance_to_goal = cfg_.road_length;
  return st;
}

RenderLayers World::render_layers(const VehicleState& state, const DomainSpec& domain,
                                  uint64_t seed) const {
  domain.validate();
  const int res = cfg_.resolution;
  const int64_t plane = int64_t(res) * res;
  RenderLayers out;
  out.image = nn::Tensor({3, res, res});
  out.regions.assign(size_t(plane), uint8_t(Region::sky));
  out.rain_mask.assign(size_t(plane), 0);

  const double s0 = state.position[0];
  const double y0 = state.position[1];
  const double psi = state.heading;
  const double w = cfg_.lane_half_width;

  // projection constants
  const double hor = 0.40 * res;           // horizon row
  const double fd = 0.35 * res;            // vertical focal * camera height
  const double fh = 0.55 * res;            // horizontal focal
  const double d_max = 34.0;

  auto road_center_at = [&](double d) {
    // apparent lateral offset of the road center d units ahead, in the
    // camera frame (small-angle curvature + heading)
    return -y0 + 0.5 * curvature(s0) * d * d - psi * d;
  };

  std::vector<Rgb> pix(static_cast<size_t>(plane));
  std::vector<float> depth(size_t(plane), 1e9f);

  const Rgb sky_top{0.34f, 0.52f, 0.84f};
  const Rgb sky_hor{0.66f, 0.74f, 0.88f};
  const Rgb road_col{0.30f, 0.30f, 0.33f};
  const Rgb line_col{0.86f, 0.86f, 0.88f};
  const Rgb dash_col{0.80f, 0.66f, 0.20f};
  const Rgb grass_col{0.24f, 0.42f, 0.22f};
  const Rgb goal_col{0.88f, 0.12f, 0.12f};
  const Rgb goal_band{0.92f, 0.92f, 0.92f};
  const Rgb obst_col{0.72f, 0.44f, 0.10f};
  const Rgb sun_col{1.00f, 0.95f, 0.80f};

  // sun placement in the sky
  double az_rel = (domain.sun_azimuth - 180.0) * kPi / 180.0;
  double sun_cx = res * (0.5 + 0.42 * std::sin(az_rel));
  double alt01 = std::clamp(domain.sun_altitude / 90.0, 0.0, 1.0);
  double sun_cy = hor * (1.0 - 0.92 * alt01);
  double sun_r = res * 0.045;

  // ground + sky pass
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      int64_t idx = int64_t(r) * res + c;
      if (double(r) <= hor) {
        float t = float(std::clamp(double(r) / std::max(hor, 1.0), 0.0, 1.0));
        Rgb col = lerp(sky_top, sky_hor, t);
        // the sun disk and halo are photometry, so the region label stays sky
        double dsun = std::hypot(double(c) - sun_cx, double(r) - sun_cy);
        if (dsun < sun_r) {
          col = sun_col;
        } else {
          float halo = float(std::exp(-dsun / (res * 0.12)));
          col = lerp(col, sun_col, 0.35f * halo);
        }
        out.regions[size_t(idx)] = uint8_t(Region::sky);
        pix[size_t(idx)] = col;
        continue;
      }
      double d = fd / (double(r) - hor);
      if (d > d_max) d = d_max;
      double y_cam = (double(c) - res / 2.0) * d / fh;
      double u = y_cam - road_center_at(d);  // lateral offset from road center
      Rgb col;
      Region reg;
      double fade = float(std::clamp(d / d_max, 0.0, 1.0));
      if (std::abs(u) <= w) {
        col = road_col;
        reg = Region::road;
        // center dashes every 2.2 units
        double s_here = s0 + d;
        bool dash_on = std::fmod(std::abs(s_here), 2.2) < 1.1;
        if (std::abs(u) < 0.05 * w + 0.018 * d && dash_on) {
          col = dash_col;
          reg = Region::center_dash;
        }
      } else if (std::abs(std::abs(u) - w) < 0.06 * w + 0.02 * d) {
        col = line_col;
        reg = Region::lane_line;
      } else {
        col = grass_col;
        reg = Region::offroad;
      }
      col = lerp(col, sky_hor, float(0.45 * fade));
      pix[size_t(idx)] = col;
      out.regions[size_t(idx)] = uint8_t(reg);
      depth[size_t(idx)] = float(d);
    }
  }

  // goal post, standing on the road center at the goal distance
  double d_g = state.distance_to_goal;
  if (d_g > 0.3 && d_g < d_max) {
    double r_foot = hor + fd / d_g;
    double c_g = res / 2.0 + fh * road_center_at(d_g) / d_g;
    double h_pix = std::min(fd * 2.2 / d_g, hor * 1.6);
    double w_pix = std::max(1.0, fd * 0.18 / d_g);
    for (int r = int(std::max(0.0, r_foot - h_pix)); r <= int(std::min(double(res - 1), r_foot));
         ++r)
      for (int c = int(std::max(0.0, c_g - w_pix)); c <= int(std::min(double(res - 1), c_g + w_pix));
           ++c) {
        int64_t idx = int64_t(r) * res + c;
        if (depth[size_t(idx)] < float(d_g)) continue;  // occluded by nearer ground? keep post
        bool band = (int((r_foot - r) / std::max(1.0, h_pix / 4.0)) % 2) == 1;
        pix[size_t(idx)] = band ? goal_band : goal_col;
        out.regions[size_t(idx)] = uint8_t(Region::goal);
        depth[size_t(idx)] = float(d_g);
      }
  }

  // obstacles: boxes by the lane edge
  for (const auto& ob : obstacles_) {
    double d = ob.s - s0;
    if (d < 0.4 || d > d_max) continue;
    double r_foot = hor + fd / d;
    double c_o = res / 2.0 + fh * (ob.y + road_center_at(d)) / d;
    double h_pix = fd * 1.1 * ob.radius * 2 / d;
    double w_pix = std::max(1.0, fd * ob.radius * 2.2 / d);
    for (int r = int(std::max(0.0, r_foot - h_pix)); r <= int(std::min(double(res - 1), r_foot));
         ++r)
      for (int c = int(std::max(0.0, c_o - w_pix)); c <= int(std::min(double(res - 1), c_o + w_pix));
           ++c) {
        int64_t idx = int64_t(r) * res + c;
        if (depth[size_t(idx)] < float(d)) continue;
        pix[size_t(idx)] = obst_col;
        out.regions[size_t(idx)] = uint8_t(Region::obstacle);
        depth[size_t(idx)] = float(d);
      }
  }

  // ---- photometric modulation (geometry above never reads the domain) ----

  double alt = domain.sun_altitude;
  double warm = std::clamp((25.0 - alt) / 25.0, 0.0, 1.0);
  double br_alt = 0.55 + 0.45 * std::pow(std::clamp(alt / 60.0, 0.0, 1.0), 0.7);
  double br_p = 1.0 - 0.10 * domain.precipitation;
  double br_cloud = 1.0 - 0.30 * domain.cloudiness;
  float mul_r = float((1.0 + 0.25 * warm) * br_alt * br_p);
  float mul_g = float((1.0 - 0.06 * warm) * br_alt * br_p);
  float mul_b = float((1.0 - 0.30 * warm) * br_alt * br_p);
  double shade_dir = std::sin(az_rel);

  uint64_t domain_hash = fnv1a64(domain.name);
  {
    uint64_t ch = fnv1a64(&domain.cloudiness, sizeof(double), domain_hash);
    domain_hash = fnv1a64(&domain.sun_azimuth, sizeof(double), ch);
  }

  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) {
      int64_t idx = int64_t(r) * res + c;
      Rgb v = pix[size_t(idx)];
      // sun-side shading on ground pixels
      float shade = 1.0f;
      if (double(r) > hor)
        shade = float(1.0 + 0.10 * shade_dir * ((double(c) / res) - 0.5) * 2.0);
      v = {v.r * mul_r * shade, v.g * mul_g * shade, v.b * mul_b * shade};
      // cloud desaturation (luminance preserving)
      float l = luma(v);
      float ds = float(0.55 * domain.cloudiness);
      v = lerp(v, {l, l, l}, ds);
      // cloud cover in the sky: darkening blobs, pattern fixed per domain
      Region reg = Region(out.regions[size_t(idx)]);
      if (reg == Region::sky && domain.cloudiness > 0) {
        float n = value_noise(c * 0.09, r * 0.13, domain_hash);
        float cover = float(std::clamp((n - (0.92 - 0.75 * domain.cloudiness)) * 3.0, 0.0, 1.0));
        float lv = luma(v);
        v = lerp(v, {lv * 0.80f, lv * 0.80f, lv * 0.80f}, cover * 0.9f);
      }
      v = {v.r * float(br_cloud), v.g * float(br_cloud), v.b * float(br_cloud)};
      pix[size_t(idx)] = v;
    }

  // wet-road reflections: brighter smear under the sun column plus seeded
  // ripples; all touched pixels are recorded in rain_mask
  if (domain.precipitation > 0) {
    Rng rrng(seed ^ domain_hash ^ 0xabcdef12345ULL);
    uint64_t ripple_seed = rrng.next_u64();
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) {
        int64_t idx = int64_t(r) * res + c;
        Region reg = Region(out.regions[size_t(idx)]);
        if (reg != Region::road && reg != Region::center_dash && reg != Region::lane_line)
          continue;
        if (double(r) <= hor) continue;
        float band = float(std::exp(-std::abs(double(c) - sun_cx) / (res * 0.10)));
        float ripple = value_noise(c * 0.45, r * 0.45, ripple_seed);
        float gain = float(domain.precipitation) * (0.22f * band + 0.10f * ripple);
        if (gain > 0.003f) {
          Rgb v = pix[size_t(idx)];
          pix[size_t(idx)] = {std::min(1.0f, v.r + gain), std::min(1.0f, v.g + gain),
                              std::min(1.0f, v.b + gain)};
          out.rain_mask[size_t(idx)] = 1;
        }
      }

    // falling streaks
    int n_streaks = int(std::lround(domain.precipitation * 110.0 * (res / 64.0) * (res / 64.0)));
    Rgb streak_col{0.74f, 0.76f, 0.80f};
    for (int i = 0; i < n_streaks; ++i) {
      double x = rrng.uniform(0.0, res - 1.0);
      double y = rrng.uniform(0.0, res - 1.0);
      double len = rrng.uniform(res * 0.06, res * 0.12);
      double ang = (-75.0 + rrng.uniform(-8.0, 8.0)) * kPi / 180.0;
      double dx = std::cos(ang), dy = -std::sin(ang);
      float alpha = float(rrng.uniform(0.18, 0.34));
      for (double t = 0; t < len; t += 0.7) {
        int cx = int(std::lround(x + dx * t));
        int cy = int(std::lround(y + dy * t));
        if (cx < 0 || cx >= res || cy < 0 || cy >= res) continue;
        int64_t idx = int64_t(cy) * res + cx;
        pix[size_t(idx)] = lerp(pix[size_t(idx)], streak_col, alpha);
        out.rain_mask[size_t(idx)] = 1;
      }
    }
  }

  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) {
      int64_t idx = int64_t(r) * res + c;
      Rgb v = pix[size_t(idx)];
      out.image.at(0 * plane + idx) = std::clamp(v.r, 0.0f, 1.0f);
      out.image.at(1 * plane + idx) = std::clamp(v.g, 0.0f, 1.0f);
      out.image.at(2 * plane + idx) = std::clamp(v.b, 0.0f, 1.0f);
    }
  return out;
}

nn::Tensor World::render(const VehicleState& state, const DomainSpec& domain,
                         uint64_t seed) const {
  return render_layers(state, domain, seed).image;
}

std::pair<VehicleState, StepResult> World::step(const VehicleState& state, const Action& action,
                                                const DomainSpec& domain, int step_index,
                                                uint64_t render_seed,
                                                int64_t* clamp_counter) const {
  const double acc_lim = 3.0 * (1.0 - 1e-9);
  const double steer_lim = 0.3 * (1.0 - 1e-9);
  double acc = action.acc, steer = action.steer;
  if (acc <= -3.0 || acc >= 3.0 || steer <= -0.3 || steer >= 0.3) {
    if (clamp_counter) ++(*clamp_counter);
    acc = std::clamp(acc, -acc_lim, acc_lim);
    steer = std::clamp(steer, -steer_lim, steer_lim);
  }

  VehicleState next = state;
  double v = std::clamp(state.speed + acc * cfg_.dt, 0.0, cfg_.max_speed);
  double psi = state.heading + steer * cfg_.steer_gain * v * cfg_.dt -
               curvature(state.position[0]) * v * std::cos(state.heading) * cfg_.dt;
  double s = state.position[0] + v * std::cos(psi) * cfg_.dt;
  double y = state.position[1] + v * std::sin(psi) * cfg_.dt;
  next.position = {s, y};
  next.heading = psi;
  next.speed = v;
  next.lane_offset = y;
  next.distance_to_goal = std::max(0.0, cfg_.road_length - s);

  bool collided = false;
  for (const auto& ob : obstacles_) {
    double dd = std::hypot(ob.s - s, ob.y - y);
    if (dd < ob.radius + cfg_.vehicle_radius) collided = true;
  }
  bool out_of_lane = std::abs(y) > cfg_.lane_half_width;
  bool arrived = next.distance_to_goal <= cfg_.arrival_radius;
  bool timed_out = step_index + 1 >= cfg_.step_budget;

  StepResult res;
  double col = 0, out = 0, bonus = 0;
  if (arrived) {
    res.reason = StepReason::arrived;
    bonus = cfg_.arrival_bonus;
  } else {
    if (collided) col = -1;
    if (out_of_lane) out = -1;
    if (collided)
      res.reason = StepReason::collision;
    else if (out_of_lane)
      res.reason = StepReason::lane_exit;
    else if (timed_out)
      res.reason = StepReason::timeout;
    else
      res.reason = StepReason::running;
  }
  res.terminated = res.reason != StepReason::running;
  res.reward = cfg_.lambda_v * v + cfg_.lambda_col * col + cfg_.lambda_out * out +
               cfg_.step_cost + bonus;
  res.observation.image = render(next, domain, render_seed);
  res.observation.velocity = v;
  return {next, res};
}

Env::Env(WorldConfig cfg, DomainSpec domain, uint64_t seed)
    : world_(std::move(cfg)), domain_(std::move(domain)), episode_rng_(seed), episode_seed_(seed) {
  domain_.validate();
}

Observation Env::reset() { return reset(episode_rng_.next_u64()); }

Observation Env::reset(uint64_t seed) {
  episode_seed_ = seed;
  Rng init_rng(seed);
  state_ = world_.initial_state(init_rng);
  steps_ = 0;
  done_ = false;
  Observation obs;
  obs.image = world_.render(state_, domain_, derive_seed(episode_seed_, "render0"));
  obs.velocity = state_.speed;
  return obs;
}

StepResult Env::step(const Action& a) {
  require(!done_, ErrCode::param, "step() on terminated episode");
  uint64_t rseed = derive_seed(episode_seed_, "render" + std::to_string(steps_ + 1));
  auto [next, res] = world_.step(state_, a, domain_, steps_, rseed, &clamps_);
  state_ = next;
  ++steps_;
  done_ = res.terminated;
  return res;
}

std::string weather_phrase(const DomainSpec& d) {
  std::vector<std::string> words;
  if (d.precipitation > 0.5)
    words.push_back("hard rain");
  else if (d.precipitation > 0.15)
    words.push_back("soft rain");
  else if (d.precipitation > 0)
    words.push_back("wet");
  if (d.precipitation <= 0.15 && d.cloudiness >= 0.4) words.push_back("cloudy");
  if (words.empty()) words.push_back("clear");
  if (d.sun_altitude >= 40)
    words.push_back("noon");
  else if (d.sun_altitude >= 15)
    words.push_back("evening");
  else
    words.push_back("sunset");
  std::string out;
  for (auto& w : words) {
    if (!out.empty()) out += " ";
    out += w;
  }
  return out;
}

std::string caption(const VehicleState& st, const DomainSpec& domain, double lane_half_width) {
  std::string s = "driving on the road, " + weather_phrase(domain) + ", vehicle ";
  double u = st.lane_offset / lane_half_width;
  if (u > 0.55)
    s += "far left of center";
  else if (u > 0.15)
    s += "left of center";
  else if (u >= -0.15)
    s += "centered";
  else if (u >= -0.55)
    s += "right of center";
  else
    s += "far right of center";
  // the heading phrase is omitted for the straight bin
  double psi = st.heading;
  if (psi > 0.18)
    s += ", turning sharp left";
  else if (psi > 0.06)
    s += ", turning left";
  else if (psi < -0.18)
    s += ", turning sharp right";
  else if (psi < -0.06)
    s += ", turning right";
  double d = st.distance_to_goal;
  if (d <= 10)
    s += ", goal near";
  else if (d <= 22)
    s += ", goal mid";
  else
    s += ", goal far";
  return s;
}

static VehicleState random_state(const WorldConfig& cfg, Rng& rng) {
  VehicleState st;
  st.position = {rng.uniform(0.0, cfg.road_length - 2.0),
                 rng.uniform(-0.9, 0.9) * cfg.lane_half_width};
  st.heading = rng.uniform(-0.25, 0.25);
  st.speed = rng.uniform(0.0, cfg.max_speed);
  st.lane_offset = st.position[1];
  st.distance_to_goal = cfg.road_length - st.position[0];
  return st;
}

ImageDataset sample_semantic_dataset(const World& world, const std::vector<DomainSpec>& domains,
                                     int per_domain, uint64_t seed) {
  require(domains.size() >= 2, ErrCode::param, "semantic dataset needs >= 2 domains");
  require(per_domain >= 1, ErrCode::param, "per_domain must be >= 1");
  ImageDataset ds;
  ds.per_domain_count = per_domain;
  ds.num_domains = int(domains.size());
  Rng rng(seed);
  for (size_t k = 0; k < domains.size(); ++k) {
    domains[k].validate();
    for (int i = 0; i < per_domain; ++i) {
      DatasetEntry e;
      e.state = random_state(world.config(), rng);
      e.domain_index = int(k);
      e.domain_name = domains[k].name;
      e.image = world.render(e.state, domains[k], rng.next_u64());
      e.caption = caption(e.state, domains[k], world.config().lane_half_width);
      ds.entries.push_back(std::move(e));
    }
  }
  return ds;
}

ImageDataset sample_policy_dataset(const World& world, const std::string& domain_name, int n,
                                   uint64_t seed) {
  require(n >= 1, ErrCode::param, "policy dataset size must be >= 1");
  const DomainSpec& dom = world.config().domain(domain_name);
  ImageDataset ds;
  ds.per_domain_count = n;
  ds.num_domains = 1;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    DatasetEntry e;
    e.state = random_state(world.config(), rng);
    e.domain_index = 0;
    e.domain_name = dom.name;
    e.image = world.render(e.state, dom, rng.next_u64());
    e.caption = caption(e.state, dom, world.config().lane_half_width);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

ImageDataset sample_vlm_dataset(const World& world, int n, uint64_t seed) {
  require(n >= 1, ErrCode::param, "vlm dataset size must be >= 1");
  ImageDataset ds;
  ds.per_domain_count = n;
  ds.num_domains = 1;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    DomainSpec d;
    d.name = "random";
    d.cloudiness = rng.uniform();
    double p = rng.uniform();
    d.precipitation = p < 0.35 ? 0.0 : rng.uniform();
    d.sun_altitude = rng.uniform(0.0, 90.0);
    d.sun_azimuth = rng.uniform(0.0, 359.9);
    DatasetEntry e;
    e.state = random_state(world.config(), rng);
    e.domain_index = 0;
    e.domain_name = d.name;
    e.image = world.render(e.state, d, rng.next_u64());
    e.caption = caption(e.state, d, world.config().lane_half_width);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

}  // namespace pva::world
