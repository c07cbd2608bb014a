// contrail <stage> --config <file> [--seed N] [--port N]

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "contrail/pipeline.hpp"
#include "contrail/server.hpp"
#include "contrail/synth.hpp"

using namespace contrail;

namespace {

pipeline::Config load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  auto cfg = pipeline::Config::load(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

void print(const pipeline::StageOutcome& o) {
  std::printf("%-11s %s", o.stage.c_str(), o.ran ? "done" : "up to date");
  if (o.ran) std::printf(" (%.2fs)", o.seconds);
  std::printf("\n");
}

int run(int argc, char** argv) {
  CLI::App app{"Claim keyword ranking, extraction and cross-community analysis"};
  app.require_subcommand(1);
  std::string config;
  std::optional<std::uint64_t> seed;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string mini_dir = "data/mini";
  std::uint64_t mini_seed = 7;

  std::vector<CLI::App*> stage_cmds;
  auto add_stage = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config, "pipeline config (JSON)")->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--port", port, "ignored outside serve");
    stage_cmds.push_back(cmd);
  };
  for (const auto& s : pipeline::stage_names()) add_stage(s, "run the " + s + " stage");
  add_stage("all", "run every stage in order");

  auto* serve = app.add_subcommand("serve", "serve the annotation API");
  serve->add_option("--config", config, "pipeline config (JSON)")->required();
  serve->add_option("--seed", seed, "override the config seed");
  serve->add_option("--port", port, "listen port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "bind address; use 0.0.0.0 to expose beyond localhost");

  auto* mini = app.add_subcommand("make-mini", "write the synthetic mini corpus");
  mini->add_option("--out", mini_dir, "target directory");
  mini->add_option("--seed", mini_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (mini->parsed()) {
    const auto counts = synth::write_mini_corpus(mini_dir, mini_seed);
    std::printf("wrote %s: %s\n", mini_dir.c_str(), counts.dump().c_str());
    return 0;
  }

  auto cfg = load_config(config, seed);
  if (serve->parsed()) {
    pipeline::Pipeline p(cfg);
    const auto& store = p.store();
    server::ServeOptions opt{host, port, cfg.candidate_mode, cfg.candidate_cap, cfg.seed};
    server::AnnotationApi api(store, p.claims(), cfg.labels_path, opt);
    std::printf("serving on http://%s:%d\n", host.c_str(), port);
    std::fflush(stdout);
    if (!api.listen()) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return 0;
  }

  pipeline::Pipeline p(cfg);
  for (auto* cmd : stage_cmds) {
    if (!cmd->parsed()) continue;
    if (cmd->get_name() == "all") {
      for (const auto& o : p.run_all()) print(o);
    } else {
      print(p.run(cmd->get_name()));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 2;
  }
}
