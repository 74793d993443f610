// cmim: train, evaluate and verify contrastive MIM models.
//
//   cmim train       --config run.cfg --out runs/cmim
//   cmim eval        --out eval  runs/*/best.cmm
//   cmim toy2d       --seed 0 --out toy
//   cmim sensitivity --preset desk --out sens
//   cmim verify      [--corrupt-offset]
//
// Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 divergence, 5 verification
// failure, 6 I/O.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmim/experiment.hpp"
#include "cmim/idx.hpp"
#include "cmim/verify.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset = "desk";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override the configured seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--preset", f.preset, "desk or paper-shape")->check(CLI::IsMember({"desk", "paper-shape"}));
}

cmim::RunConfig resolve(const CommonFlags& f) {
  cmim::RunConfig c = cmim::preset_config(cmim::parse_preset(f.preset));
  if (!f.config_path.empty()) c = cmim::load_config(f.config_path, c);
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive Mutual Information Machine lab"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, toy_f, sens_f;
  bool corrupt_offset = false;
  std::vector<std::string> checkpoints;

  auto* train = app.add_subcommand("train", "train one model and write checkpoints");
  add_common(train, train_f);
  auto* eval = app.add_subcommand("eval", "probe checkpoints and write accuracy/z/rank reports");
  add_common(eval, eval_f);
  eval->add_option("checkpoints", checkpoints, "CMM1 checkpoint files")->required();
  auto* toy = app.add_subcommand("toy2d", "gradient descent on the contrastive term in 2D");
  add_common(toy, toy_f);
  auto* sens = app.add_subcommand("sensitivity", "batch-size sensitivity grid and t-test");
  add_common(sens, sens_f);
  auto* verify = app.add_subcommand("verify", "run the mathematical verification suite");
  verify->add_flag("--corrupt-offset", corrupt_offset, "use log B instead of log(B-1) (mutation check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? cmim::kExitOk : cmim::kExitUsage;
  }

  try {
    if (*train) {
      const auto cfg = resolve(train_f);
      std::cout << cmim::preset_banner(cfg.preset) << '\n';
      const auto best = cmim::cmd_train(cfg, cfg.out_dir);
      std::cout << "best checkpoint: " << best.string() << '\n';
    } else if (*eval) {
      const auto cfg = resolve(eval_f);
      std::cout << cmim::preset_banner(cfg.preset) << '\n';
      std::vector<std::filesystem::path> paths(checkpoints.begin(), checkpoints.end());
      const auto report = cmim::cmd_eval(paths, cfg, cfg.out_dir);
      std::cout << report.cells.size() << " report rows written to " << cfg.out_dir << '\n';
    } else if (*toy) {
      const auto cfg = resolve(toy_f);
      const auto t = cmim::cmd_toy2d(cfg, cfg.out_dir);
      for (const auto& s : t.snapshots) {
        std::cout << "step " << s.step << "  loss " << s.loss << "  R " << s.resultant_length
                  << "  radius CV " << s.radius_cv << '\n';
      }
    } else if (*sens) {
      const auto cfg = resolve(sens_f);
      std::cout << cmim::preset_banner(cfg.preset) << '\n';
      const auto res = cmim::cmd_sensitivity(cfg, cfg.out_dir);
      for (const auto& [model, st] : res.summary) {
        std::cout << model << "  mean slope " << st.mean_slope << "  t " << st.t << "  p " << st.p
                  << "  n " << st.n << '\n';
      }
    } else if (*verify) {
      cmim::VerifyOptions opts;
      opts.corrupt_offset = corrupt_offset;
      const auto rep = cmim::run_verification(opts);
      std::cout << cmim::format_report(rep);
      return rep.all_passed() ? cmim::kExitOk : cmim::kExitVerification;
    }
  } catch (const cmim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cmim::kExitConfig;
  } catch (const cmim::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return cmim::kExitData;
  } catch (const cmim::IdxError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return cmim::kExitData;
  } catch (const cmim::DivergenceError& e) {
    std::cerr << "diverged at step " << e.step() << ": " << e.what() << '\n';
    return cmim::kExitDivergence;
  } catch (const cmim::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return cmim::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cmim::kExitIo;
  }
  return cmim::kExitOk;
}
