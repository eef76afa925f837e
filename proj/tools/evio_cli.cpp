#include <cstdio>

#include <CLI11.hpp>

#include "commands.hpp"
#include "evio/error.hpp"

int main(int argc, char** argv) {
  using namespace evio::cli;
  CLI::App app{"Event-camera odometry front-end"};
  app.require_subcommand(1);
  SimulateArgs simulate;
  RunArgs run;
  EnhanceArgs enhance;
  TrackArgs track;
  EvalArgs eval;
  BenchArgs bench;
  ConfigCmdArgs config;
  add_simulate(app, simulate);
  add_run(app, run);
  add_enhance(app, enhance);
  add_track(app, track);
  add_eval(app, eval);
  add_bench(app, bench);
  add_config(app, config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "simulate") return cmd_simulate(simulate);
    if (name == "run") return cmd_run(run);
    if (name == "enhance") return cmd_enhance(enhance);
    if (name == "track") return cmd_track(track);
    if (name == "eval") return cmd_eval(eval);
    if (name == "bench") return cmd_bench(bench);
    if (name == "config") return cmd_config(config);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const evio::Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(evio::to_string(e.code())).c_str(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
