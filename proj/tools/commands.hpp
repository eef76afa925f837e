#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evio/config.hpp"

namespace CLI {
class App;
}

namespace evio::cli {

/// Usage problems detected after parsing (bad flag values); exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// --config FILE and repeated --set key=value, applied in that order over the defaults.
struct ConfigArgs {
  std::string config;
  std::vector<std::string> sets;
  std::optional<int> threads;

  PipelineConfig resolve() const;
};

struct SimulateArgs {
  ConfigArgs cfg;
  std::string out;
  std::optional<std::string> trajectory;
  std::optional<double> duration;
  std::optional<std::string> pattern;
  std::optional<std::uint32_t> seed;
};

struct RunArgs {
  ConfigArgs cfg;
  std::string data;
  std::string out = "traj_est.txt";
  std::string depth_source = "gt";
  std::optional<std::string> frame_mode;
  std::optional<std::string> ref_time;
  std::optional<std::string> warp_depth;
  std::optional<std::string> predictor;
  std::optional<std::string> method;
  std::vector<int> grid;
  bool no_align = false;
  bool no_depth_prior = false;
  bool quiet = false;
};

struct EnhanceArgs {
  ConfigArgs cfg;
  std::string input;
  std::string data;
  int packet = 0;
  std::string out;
  std::string dump_stages;
  std::optional<std::string> method;
};

struct TrackArgs {
  RunArgs run;
  std::string csv;
};

struct EvalArgs {
  std::string est;
  std::string gt;
  std::string align = "se3";
  std::string csv;
  double max_dt = 0.01;
};

struct BenchArgs {
  ConfigArgs cfg;
  std::string data;
  std::size_t events = 1'000'000;
  int repeat = 5;
  std::string out;
};

struct ConfigCmdArgs {
  ConfigArgs cfg;
  bool defaults = false;
  std::string check;
};

void add_simulate(CLI::App& app, SimulateArgs& a);
void add_run(CLI::App& app, RunArgs& a);
void add_enhance(CLI::App& app, EnhanceArgs& a);
void add_track(CLI::App& app, TrackArgs& a);
void add_eval(CLI::App& app, EvalArgs& a);
void add_bench(CLI::App& app, BenchArgs& a);
void add_config(CLI::App& app, ConfigCmdArgs& a);

int cmd_simulate(const SimulateArgs& a);
int cmd_run(const RunArgs& a);
int cmd_enhance(const EnhanceArgs& a);
int cmd_track(const TrackArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_bench(const BenchArgs& a);
int cmd_config(const ConfigCmdArgs& a);

}  // namespace evio::cli
