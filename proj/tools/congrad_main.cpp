#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "congrad/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"consensus-gradient multi-agent policy optimization"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run_out";
  std::uint64_t seed = 0;

  CLI::App* train = app.add_subcommand("train", "run a training config");
  train->add_option("--config", config_path, "JSON config file")->required();
  CLI::Option* seed_opt =
      train->add_option("--seed", seed, "override the config seed");
  train->add_option("--out", out_dir, "output directory (default run_out)");

  std::string suite;
  int cases = 200;
  std::uint64_t vseed = 12345;
  CLI::App* verify = app.add_subcommand("verify", "run a property suite");
  verify
      ->add_option("--suite", suite,
                   "qp, kkt, gamma_factor, gradcheck, gae, margin or all")
      ->required();
  verify->add_option("--cases", cases, "number of random cases (default 200)");
  verify->add_option("--seed", vseed, "rng seed (default 12345)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train->parsed()) {
    std::optional<std::uint64_t> s;
    if (seed_opt->count() > 0) s = seed;
    return congrad::cmd_train(config_path, s, out_dir);
  }
  return congrad::cmd_verify(suite, cases, vseed);
}
