#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pva/tensor.hpp"
#include "pva/util.hpp"

namespace pva::world {

// Parametric weather controlling the photometry of a render. Geometry never
// depends on it.
struct DomainSpec {
  std::string name;
  double cloudiness = 0.0;     // [0,1]
  double precipitation = 0.0;  // [0,1]
  double sun_altitude = 75.0;  // degrees, [-90,90]
  double sun_azimuth = 180.0;  // degrees, [0,360)

  void validate() const;
  bool operator==(const DomainSpec&) const = default;
};

// Vehicle pose in the road frame: position = (arclength s, lateral y),
// heading relative to the road tangent.
struct VehicleState {
  std::array<double, 2> position{0.0, 0.0};
  double heading = 0.0;
  double speed = 0.0;
  double lane_offset = 0.0;     // == position[1]
  double distance_to_goal = 0.0;
};

struct Action {
  double acc = 0.0;    // (-3, 3)
  double steer = 0.0;  // (-0.3, 0.3)
};

enum class StepReason { running, arrived, collision, timeout, lane_exit };
const char* reason_name(StepReason r);

struct Observation {
  nn::Tensor image;  // [3,H,W], values in [0,1]
  double velocity = 0.0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  StepReason reason = StepReason::running;
};

struct Obstacle {
  double s = 0.0, y = 0.0, radius = 0.35;
};

struct WorldConfig {
  int resolution = 64;
  double lane_half_width = 1.0;
  double road_length = 40.0;
  double dt = 0.1;
  double max_speed = 6.0;
  int step_budget = 400;
  double arrival_radius = 1.0;
  double arrival_bonus = 100.0;
  double lambda_v = 1.0;
  double lambda_col = 100.0;
  double lambda_out = 100.0;
  double step_cost = -0.1;
  double steer_gain = 2.2;
  double curve_amplitude = 0.02;   // road curvature kappa(s), sine profile
  double curve_wavelength = 25.0;
  double curve_phase = 0.0;
  int obstacle_count = 2;
  double obstacle_radius = 0.35;
  double vehicle_radius = 0.25;
  double init_offset_range = 0.5;
  double init_heading_range = 0.2;
  double init_speed_max = 1.0;
  uint64_t world_seed = 99;  // fixes obstacle placement

  std::vector<DomainSpec> domains;        // registry; order defines domain_index
  std::vector<std::string> seen_domains;  // subset used for D_semantic
  std::string unified_domain = "ClearNoon";

  void validate() const;
  const DomainSpec& domain(const std::string& name) const;
  int domain_index(const std::string& name) const;
};

std::vector<DomainSpec> canonical_domains();

// per-pixel geometry labels, independent of domain
enum class Region : uint8_t { sky, offroad, road, lane_line, center_dash, goal, obstacle };

struct RenderLayers {
  nn::Tensor image;                 // [3,H,W]
  std::vector<uint8_t> regions;     // H*W Region labels (before weather overlays)
  std::vector<uint8_t> rain_mask;   // pixels touched by seeded rain streaks/ripples
};

class World {
 public:
  explicit World(WorldConfig cfg);

  const WorldConfig& config() const { return cfg_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  double curvature(double s) const;

  nn::Tensor render(const VehicleState& state, const DomainSpec& domain, uint64_t seed) const;
  RenderLayers render_layers(const VehicleState& state, const DomainSpec& domain,
                             uint64_t seed) const;

  VehicleState initial_state(Rng& rng) const;

  // One kinematic step. `step_index` counts steps already taken this episode.
  std::pair<VehicleState, StepResult> step(const VehicleState& state, const Action& action,
                                           const DomainSpec& domain, int step_index,
                                           uint64_t render_seed, int64_t* clamp_counter) const;

 private:
  WorldConfig cfg_;
  std::vector<Obstacle> obstacles_;
};

// Episodic wrapper around World. Single-threaded; one actor per instance.
class Env {
 public:
  Env(WorldConfig cfg, DomainSpec domain, uint64_t seed);

  Observation reset();
  Observation reset(uint64_t seed);
  StepResult step(const Action& a);

  const VehicleState& state() const { return state_; }
  const World& world() const { return world_; }
  bool done() const { return done_; }
  int steps_taken() const { return steps_; }
  int64_t clamp_count() const { return clamps_; }

 private:
  World world_;
  DomainSpec domain_;
  Rng episode_rng_;
  uint64_t episode_seed_ = 0;
  VehicleState state_;
  bool done_ = true;
  int steps_ = 0;
  int64_t clamps_ = 0;
};

// caption pieces
std::string weather_phrase(const DomainSpec& d);
std::string caption(const VehicleState& state, const DomainSpec& domain,
                    double lane_half_width = 1.0);

struct DatasetEntry {
  nn::Tensor image;
  int domain_index = 0;
  std::string domain_name;
  VehicleState state;
  std::string caption;
};

struct ImageDataset {
  std::vector<DatasetEntry> entries;
  int per_domain_count = 0;
  int num_domains = 0;
};

ImageDataset sample_semantic_dataset(const World& world, const std::vector<DomainSpec>& domains,
                                     int per_domain, uint64_t seed);
ImageDataset sample_policy_dataset(const World& world, const std::string& domain_name, int n,
                                   uint64_t seed);
// caption–image pairs under randomized weather, for dual-encoder pretraining
ImageDataset sample_vlm_dataset(const World& world, int n, uint64_t seed);

}  // namespace pva::world
