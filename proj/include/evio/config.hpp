#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "evio/event_stream.hpp"
#include "evio/odometry.hpp"
#include "evio/simulator.hpp"

namespace evio {

/// Simulator tunables reachable from the config file.
struct SimSettings {
  TrajectoryParams trajectory;
  Pattern pattern = [] {
    Pattern p;
    p.kind = PatternKind::Blobs;
    return p;
  }();
  EventGenConfig events;
  double imu_rate = 1000.0;
  ImuNoise imu_noise;
  double groundtruth_rate = 200.0;
  double depth_rate = 20.0;
};

struct PipelineConfig {
  SensorSize sensor;
  OdometryConfig odometry;
  SimSettings sim;
};

struct ConfigKey {
  std::string name;
  std::string doc;
};

/// Every key in dump order.
const std::vector<ConfigKey>& config_keys();

/// Throws UnknownConfigKey for unknown keys and ParseError for malformed values.
void set_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const PipelineConfig& cfg, std::string_view key);

/// `key = value` lines; blank lines and '#' comments are skipped. Later lines override
/// earlier ones. Errors carry the 1-based line number.
void apply_config(std::istream& in, PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// All keys with their current values and a comment line each; re-parses to `cfg`.
void write_config(std::ostream& out, const PipelineConfig& cfg);

/// Default camera shape for the configured sensor: f = 240 px, centred principal point.
Camera sensor_camera(const SensorSize& sensor);
SimulationConfig make_simulation(const PipelineConfig& cfg);

}  // namespace evio
