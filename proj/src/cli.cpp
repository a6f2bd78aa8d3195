#include "congrad/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "congrad/checkpoint.hpp"
#include "congrad/metrics_io.hpp"
#include "congrad/run_config.hpp"
#include "congrad/verify.hpp"

namespace congrad {

namespace {

std::string checkpoint_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint_%06d.bin", iteration);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

}  // namespace

int cmd_train(const std::string& config_path,
              std::optional<std::uint64_t> seed_override,
              const std::string& out_dir) {
  try {
    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.train.seed = *seed_override;
    cfg.train.validate();
    const PolicyKind kind = parse_policy_kind(cfg.policy);

    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/config_echo.json", render_config(cfg));
    const std::string metrics_path =
        out_dir + "/metrics." + (cfg.metrics_format == "jsonl" ? "jsonl" : "csv");

    if (cfg.env == "team_quadratic") {
      const TeamQuadratic env = make_quadratic(cfg);
      MetricsFileSink sink(metrics_path, env.num_agents(), cfg.metrics_format,
                           cfg.timing);
      const QuadraticTrainResult res = train_quadratic(cfg.train, env, &sink);
      save_checkpoint(out_dir + "/params_final.bin",
                      checkpoint_blocks(res.theta));
      std::printf("train complete: %d iterations, final objective %.6g, outputs in %s\n",
                  cfg.train.iterations, res.metrics.back().actor_surrogate,
                  out_dir.c_str());
      return 0;
    }

    const std::unique_ptr<StepEnv> env = make_env(cfg);
    if (kind == PolicyKind::Tabular && env->spec().obs_count < 1)
      throw ConfigError("policy 'tabular' needs enumerable observations; env '" +
                        cfg.env + "' has none");
    MetricsFileSink sink(metrics_path, env->spec().num_agents,
                         cfg.metrics_format, cfg.timing);
    SnapshotFn snap;
    if (cfg.checkpoint_interval > 0)
      snap = [&out_dir](int it, const PolicyParams& p, const CriticParams& c) {
        save_checkpoint(out_dir + "/" + checkpoint_name(it),
                        checkpoint_blocks(p, c));
      };
    const TrainResult res = train(cfg.train, *env, kind, cfg.hidden, &sink,
                                  snap, cfg.checkpoint_interval);
    save_checkpoint(out_dir + "/params_final.bin",
                    checkpoint_blocks(res.policy, res.critic));
    std::printf("train complete: %d iterations, final mean return %.6g, outputs in %s\n",
                cfg.train.iterations, res.metrics.back().mean_return,
                out_dir.c_str());
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "train failed: %s\n", e.what());
    return 1;
  }
}

int cmd_verify(const std::string& suite, int cases, std::uint64_t seed) {
  std::vector<std::string> suites;
  if (suite == "all")
    suites = verify_suite_names();
  else
    suites.push_back(suite);
  bool all_pass = true;
  try {
    for (const std::string& s : suites) {
      const VerifyReport r = run_verify_suite(s, cases, seed);
      std::printf("%s\n", format_report(r).c_str());
      all_pass = all_pass && r.pass;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "verify error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "verify failed: %s\n", e.what());
    return 1;
  }
  return all_pass ? 0 : 1;
}

}  // namespace congrad
