/**
 * Copyright 2026 The aroface Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aroface/config.hpp"
#include "aroface/error.hpp"
#include "aroface/gradcheck.hpp"
#include "aroface/metrics.hpp"
#include "aroface/report.hpp"
#include "aroface/training.hpp"

namespace fs = std::filesystem;
using namespace aroface;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumerical = 2;

struct Common {
  std::string config_path;
};

// "--key value" and "--key=value" pairs left over after CLI11 parsing.
RunConfig resolve_config(const Common& common, const std::vector<std::string>& extras) {
  RunConfig cfg;
  if (!common.config_path.empty()) cfg = load_config(common.config_path);
  for (std::size_t k = 0; k < extras.size(); ++k) {
    const std::string& arg = extras[k];
    if (arg.rfind("--", 0) != 0) throw ContractError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (k + 1 >= extras.size()) throw ContractError("missing value for --" + key);
      value = extras[++k];
    }
    cfg.set(key, value);
  }
  return cfg;
}

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError(IoError::Kind::kWriteFailed, cfg.out_dir, "cannot create output directory");
  const std::string path = (fs::path(cfg.out_dir) / "config.txt").string();
  std::ofstream out(path);
  out << cfg.to_text();
  if (!out) throw IoError(IoError::Kind::kWriteFailed, path, "cannot write resolved config");
}

std::string out_file(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

void emit(const nlohmann::json& report, const RunConfig& cfg, const std::string& name) {
  const std::string text = render_text(report);
  write_report(report, text, out_file(cfg, name));
  std::cout << text;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alignment-perturbation adversarial training toolkit"};
  app.require_subcommand(1);
  Common common;

  auto add = [&](const std::string& name, const std::string& about) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("-c,--config", common.config_path, "key = value config file");
    sub->allow_extras();
    sub->footer("Any config key can be overridden with --key value (see 'aroface report --keys').");
    return sub;
  };

  CLI::App* gen = add("gen-data", "write the synthetic train/test benchmark to <out>/train and <out>/test");
  CLI::App* train_cmd = add("train", "train a recognizer; writes model.ckpt, loss_curve.csv, train_report.*");
  std::string mode_flag;
  train_cmd->add_option("--mode", mode_flag, "baseline or arofce (same as --train.mode)");
  CLI::App* eval_cmd = add("eval", "evaluate a checkpoint on aligned and perturbed test images");
  std::string checkpoint;
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint (default <out>/model.ckpt)");
  CLI::App* grad_cmd = add("gradcheck", "finite-difference checks of the warp, recognizer and their chain");
  int trials = 1000;
  grad_cmd->add_option("--trials", trials, "warp trials; recognizer and chain suites use trials/10")
      ->check(CLI::NonNegativeNumber);
  CLI::App* ablate_cmd = add("ablate", "train and evaluate one run per attacked component subset");
  std::vector<std::string> subsets{"none", "rotation", "translation", "scale", "all"};
  ablate_cmd->add_option("--subsets", subsets, "subsets such as none rotation+scale all")->delimiter(';');
  CLI::App* alpha_cmd = add("alpha-study", "fixed versus random step size, otherwise identical runs");
  CLI::App* report_cmd = app.add_subcommand("report", "print JSON reports as aligned text");
  std::vector<std::string> report_files;
  bool list_keys = false;
  report_cmd->add_option("files", report_files, "report .json files");
  report_cmd->add_flag("--keys", list_keys, "list every config key with its default value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (report_cmd->parsed()) {
      if (list_keys) std::cout << RunConfig{}.to_text();
      for (const auto& path : report_files) std::cout << "== " << path << '\n' << render_text(read_report(path));
      return kExitOk;
    }

    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg = resolve_config(common, sub->remaining());
    if (!mode_flag.empty()) cfg.set("train.mode", mode_flag);
    cfg.validate();
    prepare_out_dir(cfg);
    const auto start = std::chrono::steady_clock::now();

    if (gen->parsed()) {
      const Benchmark bench = prepare_benchmark(cfg);
      save_dataset(bench.train, out_file(cfg, "train"));
      save_dataset(bench.test, out_file(cfg, "test"));
      std::cout << "wrote " << bench.train.samples.size() << " train and " << bench.test.samples.size()
                << " test samples under " << cfg.out_dir << '\n';
    } else if (train_cmd->parsed()) {
      const Benchmark bench = prepare_benchmark(cfg);
      const TrainResult result = train(cfg, bench.train, bench.tpl, cfg.mode);
      write_train_outputs(result, cfg.out_dir);
      std::cout << train_report_text(result);
    } else if (eval_cmd->parsed()) {
      const Benchmark bench = prepare_benchmark(cfg);
      const ModelParams params = load_checkpoint(checkpoint.empty() ? out_file(cfg, "model.ckpt") : checkpoint);
      require(params.spec().input == bench.test.shape && params.spec().in_channels == bench.test.channels,
              "checkpoint input shape does not match the test images");
      const EvalReport report = evaluate(params, bench.test, cfg.eval_perturb, cfg.far_list, cfg.seed,
                                         Workers(cfg.threads));
      emit(eval_report_json(report), cfg, "eval_report");
    } else if (grad_cmd->parsed()) {
      const ModelSpec model = model_spec_for(cfg, Dataset{cfg.synth.num_classes, cfg.synth.channels, cfg.synth.shape, {}});
      const GradcheckReport report = gradcheck(GradcheckSettings::for_trials(trials, model, cfg.margin), cfg.seed);
      emit(gradcheck_json(report), cfg, "gradcheck_report");
      if (!report.pass) return kExitInvalid;
    } else if (ablate_cmd->parsed()) {
      const Benchmark bench = prepare_benchmark(cfg);
      emit(experiments_json(ablate(cfg, bench, subsets)), cfg, "ablation_report");
    } else if (alpha_cmd->parsed()) {
      const Benchmark bench = prepare_benchmark(cfg);
      emit(alpha_study_json(alpha_study(cfg, bench)), cfg, "alpha_study_report");
    }
    std::cerr << "done in " << seconds_since(start) << " s\n";
    return kExitOk;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInvalid;
  }
}
