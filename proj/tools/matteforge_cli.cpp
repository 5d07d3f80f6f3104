#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "matteforge/matteforge.hpp"

namespace fs = std::filesystem;
using namespace matteforge;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Common {
  std::optional<std::string> seed;
  std::optional<unsigned> jobs;
  std::string config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "random seed (falls back to the config file, then " +
                                        std::string(kSeedEnvVar) + ", then 0)");
  cmd->add_option("--jobs", c.jobs, "worker threads (default: logical cores)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--config", c.config, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);
}

Config resolve(const Common& c) {
  Config cfg;
  bool seed_from_file = false;
  if (!c.config.empty()) {
    const Bytes raw = read_file(c.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
      throw ContractError("config file is not valid JSON: " + std::string(e.what()));
    }
    cfg = apply_config_json(cfg, j);
    seed_from_file = j.contains("seed");
  }
  if (c.seed) {
    const auto s = parse_seed(*c.seed);
    if (!s) throw ContractError("--seed must be an unsigned 64-bit integer");
    cfg.seed = *s;
  } else if (!seed_from_file) {
    if (const auto s = env_seed()) cfg.seed = *s;
  }
  if (c.jobs) cfg.jobs = *c.jobs;
  cfg.validate();
  return cfg;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

nlohmann::ordered_json report_json(const MetricReport& r) {
  return {{"sad", r.sad}, {"mse", r.mse}, {"grad", r.grad}, {"conn", r.conn}, {"pixels_T", r.pixels_T}};
}

harness::GuidanceKind require_kind(const std::string& s) {
  const auto k = harness::parse_kind(s);
  if (!k) throw ContractError("unknown guidance kind '" + s + "'");
  return *k;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matteforge: guidance synthesis, matting metrics and evaluation harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "matteforge 1.0.0");

  Common common;
  std::string out;
  std::string fg_path, bg_path, alpha_path, trimap_path, pred_path, gt_path;
  std::string root, pred_dir, gt_dir, trimap_dir, kind_name = "scribblemap", predictor_name = "blur";
  std::optional<std::int64_t> step;
  std::optional<double> thickness;
  double diameter = kClickDiameter;
  int fg_radius = 10, bg_radius = 10;
  int count = 10, size = 128;
  int channels = 4, n_fpem = 2;
  int variants = 3;
  std::int64_t every = 10'000;
  std::string weights_prefix;

  auto* composite_cmd = app.add_subcommand("composite", "alpha-blend a foreground over a background");
  composite_cmd->add_option("--fg", fg_path, "foreground RGB PNG")->required()->check(CLI::ExistingFile);
  composite_cmd->add_option("--bg", bg_path, "background RGB PNG")->required()->check(CLI::ExistingFile);
  composite_cmd->add_option("--alpha", alpha_path, "alpha matte PNG")->required()->check(CLI::ExistingFile);
  composite_cmd->add_option("--out", out, "output RGB PNG")->required();

  auto* trimap_cmd = app.add_subcommand("trimap", "derive a trimap from an alpha matte");
  trimap_cmd->add_option("--alpha", alpha_path, "alpha matte PNG")->required()->check(CLI::ExistingFile);
  trimap_cmd->add_option("--fg-radius", fg_radius, "erosion radius of the foreground")->check(CLI::NonNegativeNumber);
  trimap_cmd->add_option("--bg-radius", bg_radius, "erosion radius of the background")->check(CLI::NonNegativeNumber);
  trimap_cmd->add_option("--out", out, "output trimap PNG")->required();

  auto* guide_cmd = app.add_subcommand("guide", "deform a trimap into a scribblemap");
  guide_cmd->add_option("--trimap", trimap_path, "trimap PNG")->required()->check(CLI::ExistingFile);
  auto* step_opt = guide_cmd->add_option("--step", step, "training step; thickness from the schedule")
                       ->check(CLI::NonNegativeNumber);
  guide_cmd->add_option("--thickness", thickness, "explicit brush thickness in pixels")
      ->check(CLI::Range(1.0, 1e6))
      ->excludes(step_opt);
  guide_cmd->add_option("--out", out, "output guidance PNG")->required();
  add_common(guide_cmd, common);

  auto* click_cmd = app.add_subcommand("clickmap", "sample click guidance from a trimap");
  click_cmd->add_option("--trimap", trimap_path, "trimap PNG")->required()->check(CLI::ExistingFile);
  click_cmd->add_option("--diameter", diameter, "click diameter in pixels")->check(CLI::Range(1.0, 1e6));
  click_cmd->add_option("--out", out, "output guidance PNG")->required();
  add_common(click_cmd, common);

  auto* sched_cmd = app.add_subcommand("schedule", "print the scribble thickness schedule");
  sched_cmd->add_option("--step", step, "print the thickness at one step")->check(CLI::NonNegativeNumber);
  sched_cmd->add_option("--every", every, "table spacing in steps")->check(CLI::PositiveNumber);
  sched_cmd->add_option("--out", out, "write the table here instead of stdout");
  add_common(sched_cmd, common);

  auto* metrics_cmd = app.add_subcommand("metrics", "SAD, MSE, Grad and Conn for one prediction");
  metrics_cmd->add_option("--pred", pred_path, "predicted alpha PNG")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--gt", gt_path, "ground-truth alpha PNG")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--trimap", trimap_path, "evaluation trimap PNG")->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("--out", out, "JSON output (default stdout)");
  add_common(metrics_cmd, common);

  auto* loss_cmd = app.add_subcommand("loss", "matting loss between two mattes");
  loss_cmd->add_option("--pred", pred_path, "predicted alpha PNG")->required()->check(CLI::ExistingFile);
  loss_cmd->add_option("--gt", gt_path, "ground-truth alpha PNG")->required()->check(CLI::ExistingFile);
  loss_cmd->add_option("--trimap", trimap_path, "trimap giving the known and transition regions")
      ->required()
      ->check(CLI::ExistingFile);
  loss_cmd->add_option("--out", out, "JSON output (default stdout)");
  add_common(loss_cmd, common);

  auto* sfm_cmd = app.add_subcommand("sfm-demo", "run the fusion block on a seeded random pyramid");
  sfm_cmd->add_option("--channels", channels, "channels per pyramid level")->check(CLI::Range(1, 64));
  sfm_cmd->add_option("--size", size, "stride-4 level extent")->check(CLI::Range(1, 512));
  sfm_cmd->add_option("--n-fpem", n_fpem, "cascaded enhancement stages")->check(CLI::Range(1, 8));
  sfm_cmd->add_option("--weights", weights_prefix, "also save weights as <prefix>.bin and <prefix>.json");
  sfm_cmd->add_option("--out", out, "JSON summary (default stdout)");
  add_common(sfm_cmd, common);

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic scenes");
  synth_cmd->add_option("--n", count, "number of scenes")->check(CLI::Range(1, 100000));
  synth_cmd->add_option("--size", size, "scene side length")->check(CLI::Range(harness::kMinSceneSize, 8192));
  synth_cmd->add_option("--out", out, "dataset root")->required();
  add_common(synth_cmd, common);

  auto* testset_cmd = app.add_subcommand("testset", "build a guidance test set for a dataset");
  testset_cmd->add_option("--root", root, "dataset root holding alpha/ and trimap/")
      ->required()
      ->check(CLI::ExistingDirectory);
  testset_cmd->add_option("--kind", kind_name, "trimap, scribblemap, clickmap or no_guidance");
  testset_cmd->add_option("--thickness", thickness, "scribble thickness (default: final schedule value)")
      ->check(CLI::Range(1.0, 1e6));
  testset_cmd->add_option("--diameter", diameter, "click diameter")->check(CLI::Range(1.0, 1e6));
  testset_cmd->add_option("--out", out, "test-set directory (default: the dataset root)");
  add_common(testset_cmd, common);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a prediction directory");
  eval_cmd->add_option("--pred", pred_dir, "prediction directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--gt", gt_dir, "ground-truth alpha directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--trimap", trimap_dir, "evaluation trimap directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--out", out, "report prefix: writes <prefix>.csv and <prefix>.json")->required();
  add_common(eval_cmd, common);

  auto* stab_cmd = app.add_subcommand("stability", "metric spread across guidance variants");
  stab_cmd->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  stab_cmd->add_option("--kind", kind_name, "guidance kind of the variants");
  stab_cmd->add_option("--variants", variants, "number of variant test sets")->check(CLI::Range(2, 1000));
  stab_cmd->add_option("--predictor", predictor_name, "blur (guidance-aware blur oracle) or gt")
      ->check(CLI::IsMember({"blur", "gt"}));
  stab_cmd->add_option("--thickness", thickness, "scribble thickness")->check(CLI::Range(1.0, 1e6));
  stab_cmd->add_option("--out", out, "JSON output (default stdout)");
  add_common(stab_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const Config cfg = resolve(common);

    if (*composite_cmd) {
      const ImageRGB img = composite(load_rgb(fg_path), load_rgb(bg_path), load_alpha(alpha_path));
      write_file_atomic(out, encode_rgb(img));
    } else if (*trimap_cmd) {
      write_file_atomic(out, encode_map(make_trimap(load_alpha(alpha_path), fg_radius, bg_radius)));
    } else if (*guide_cmd) {
      const Trimap tri = load_trimap(trimap_path);
      Rng rng(cfg.seed);
      const double t = thickness ? *thickness
                                 : thickness_at(step.value_or(cfg.schedule.total_steps()), cfg.schedule);
      write_file_atomic(out, encode_map(deform_at_thickness(tri, t, rng)));
    } else if (*click_cmd) {
      const Trimap tri = load_trimap(trimap_path);
      Rng rng(cfg.seed);
      write_file_atomic(out, encode_map(sample_clickmap(tri, diameter, rng)));
    } else if (*sched_cmd) {
      if (step) {
        emit(out, std::to_string(thickness_at(*step, cfg.schedule)) + "\n");
      } else {
        std::string table = "step,thickness\n";
        const std::int64_t last = cfg.schedule.total_steps();
        for (std::int64_t s = 0; s <= last; s += every) {
          table += std::to_string(s) + "," + std::to_string(thickness_at(s, cfg.schedule)) + "\n";
        }
        if (last % every != 0) {
          table += std::to_string(last) + "," + std::to_string(thickness_at(last, cfg.schedule)) + "\n";
        }
        emit(out, table);
      }
    } else if (*metrics_cmd) {
      const MetricReport r =
          evaluate(load_alpha(pred_path), load_alpha(gt_path), load_trimap(trimap_path), cfg.metrics);
      emit(out, report_json(r).dump(2) + "\n");
    } else if (*loss_cmd) {
      const AlphaMatte pred = load_alpha(pred_path);
      const AlphaMatte gt = load_alpha(gt_path);
      const LossBreakdown l = matting_loss(pred, gt, partition(load_trimap(trimap_path)), cfg.metrics.sigma);
      nlohmann::ordered_json j{{"l2_known", l.l2_known},
                               {"l1_transition", l.l1_transition},
                               {"grad", l.grad_term},
                               {"total", l.total}};
      emit(out, j.dump(2) + "\n");
    } else if (*sfm_cmd) {
      Rng rng(derive_seed(cfg.seed, "pyramid"));
      const auto pyr = sfm::FeaturePyramid::random(channels, size, size, rng);
      const auto w = sfm::SfmWeights::random(channels, n_fpem, derive_seed(cfg.seed, "weights"));
      const sfm::FeatureMap y = sfm::sfm_forward(pyr, w, n_fpem);
      char hex[20];
      std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(sfm::checksum(y)));
      nlohmann::ordered_json j{{"seed", cfg.seed},
                               {"channels", y.channels()},
                               {"height", y.height()},
                               {"width", y.width()},
                               {"checksum", hex}};
      if (!weights_prefix.empty()) {
        sfm::save_weights(w, weights_prefix + ".bin", weights_prefix + ".json");
      }
      emit(out, j.dump(2) + "\n");
    } else if (*synth_cmd) {
      Rng rng(cfg.seed);
      const auto scenes = harness::synth_scenes(count, size, rng, cfg.jobs);
      harness::write_scenes(out, scenes, cfg.jobs);
    } else if (*testset_cmd) {
      const auto kind = require_kind(kind_name);
      const auto scenes = harness::load_scenes(root, cfg.jobs);
      harness::TestsetParams params;
      params.scribble_thickness = thickness.value_or(cfg.schedule.t_end);
      params.click_diameter = diameter;
      const auto ts = harness::build_testset(scenes, kind, params, cfg.seed, cfg.jobs);
      harness::write_testset(out.empty() ? fs::path(root) : fs::path(out), ts, cfg.jobs);
    } else if (*eval_cmd) {
      const auto report = harness::run_eval(pred_dir, gt_dir, trimap_dir, cfg.metrics, cfg.jobs);
      const std::string csv = harness::eval_csv(report);
      const std::string json = harness::eval_json(report).dump(2) + "\n";
      write_file_atomic(out + ".csv", csv);
      write_file_atomic(out + ".json", json);
      for (const auto& row : report.rows) {
        if (!row.report) std::cerr << "error: " << row.id << ": " << row.error << "\n";
      }
      for (const auto& id : report.missing) std::cerr << "missing prediction: " << id << "\n";
      for (const auto& id : report.extra) std::cerr << "prediction without ground truth: " << id << "\n";
      if (report.partial()) return kExitData;
    } else if (*stab_cmd) {
      const auto kind = require_kind(kind_name);
      const auto scenes = harness::load_scenes(root, cfg.jobs);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < variants; ++i) seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      harness::TestsetParams params;
      params.scribble_thickness = thickness.value_or(cfg.schedule.t_end);
      const auto predictor =
          predictor_name == "gt" ? harness::ground_truth_predictor() : harness::blur_oracle_predictor();
      const auto r = harness::stability_report(scenes, kind, seeds, predictor, params, cfg.metrics, cfg.jobs);
      emit(out, harness::stability_json(r).dump(2) + "\n");
    }
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
