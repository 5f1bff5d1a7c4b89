#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "detkit/bbox_loss.hpp"
#include "detkit/box.hpp"
#include "detkit/evaluation.hpp"
#include "detkit/fitness.hpp"
#include "detkit/io.hpp"
#include "detkit/nms.hpp"
#include "detkit/parallel.hpp"
#include "detkit/rng.hpp"
#include "detkit/roi_cluster.hpp"
#include "detkit/synth.hpp"

namespace {

using detkit::Box;
using detkit::Detection;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;

/// Invalid configuration detected after parsing (maps to exit code 3).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_threads() {
  if (const char* env = std::getenv("DETKIT_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("DETKIT_THREADS must be a positive integer");
  }
  return 1;
}

/// Binds CLI flags so an optional JSON config file can supply defaults.
/// Flags given on the command line always win; unknown config keys are
/// rejected.
class Binder {
 public:
  explicit Binder(CLI::App* cmd) : cmd_(cmd) {
    cmd->add_option("--config", config_path_,
                    "JSON config file; explicit flags override its values");
  }

  template <class T>
  CLI::Option* opt(const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* o = cmd_->add_option(flag, var, desc);
    entries_[key_of(flag)] = {o, [&var](const json& j) { var = j.get<T>(); }};
    return o;
  }

  CLI::Option* flag(const std::string& flag_spec, bool& var, const std::string& desc) {
    CLI::Option* o = cmd_->add_flag(flag_spec, var, desc);
    entries_[key_of(flag_spec)] = {o, [&var](const json& j) { var = j.get<bool>(); }};
    return o;
  }

  void apply() const {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw detkit::io::ParseError("cannot open " + config_path_);
    json root;
    try {
      root = json::parse(in);
    } catch (const json::parse_error& e) {
      throw detkit::io::ParseError(config_path_ + ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError(config_path_ + ": config must be an object");
    for (const auto& [key, value] : root.items()) {
      const auto it = entries_.find(key);
      if (it == entries_.end()) {
        throw ConfigError(config_path_ + ": unknown config field '" + key + "'");
      }
      if (it->second.option->count() == 0) {
        try {
          it->second.set(value);
        } catch (const json::exception& e) {
          throw ConfigError(config_path_ + ": field '" + key + "': " + e.what());
        }
      }
    }
  }

 private:
  struct Entry {
    CLI::Option* option;
    std::function<void(const json&)> set;
  };

  static std::string key_of(const std::string& flag_spec) {
    // First long name in a spec like "-i,--input".
    const auto pos = flag_spec.find("--");
    std::string key = pos == std::string::npos ? flag_spec : flag_spec.substr(pos + 2);
    if (const auto comma = key.find(','); comma != std::string::npos) key.resize(comma);
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
  }

  CLI::App* cmd_;
  std::string config_path_;
  std::map<std::string, Entry> entries_;
};

detkit::ScoreVariant parse_variant(const std::string& name) {
  if (name == "baseline") return detkit::ScoreVariant::Baseline;
  if (name == "independent") return detkit::ScoreVariant::Independent;
  if (name == "joint") return detkit::ScoreVariant::Joint;
  throw ConfigError("unknown scoring variant '" + name +
                    "' (expected baseline, independent or joint)");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

/// Per-image, per-class suppression of a detection file. Kept detections
/// carry their final per-class scores in class_probs (zero for classes where
/// the box was suppressed); fitness and joint probabilities are dropped so
/// the output is a valid input for any downstream command.
detkit::io::DetectionFile apply_suppression(const detkit::io::DetectionFile& in,
                                            const detkit::NmsConfig& cfg, bool soft,
                                            int threads) {
  detkit::io::DetectionFile out;
  out.images.resize(in.images.size());
  detkit::parallel_for(in.images.size(), threads, [&](std::size_t img) {
    const auto& dets = in.images[img].detections;
    int classes = 0;
    for (const Detection& d : dets) {
      classes = std::max(classes, static_cast<int>(d.class_probs.size()));
    }
    std::vector<std::vector<double>> final_scores(dets.size());
    for (auto& v : final_scores) v.assign(classes, 0.0);

    auto run_class = [&](int c, const std::vector<std::size_t>& cand,
                         const std::vector<double>& scores) {
      std::vector<Box> boxes;
      boxes.reserve(cand.size());
      for (std::size_t i : cand) boxes.push_back(dets[i].box);
      if (soft) {
        for (const auto& entry : detkit::soft_nms_scores(boxes, scores, *cfg.soft)) {
          final_scores[cand[entry.index]][c] = entry.score;
        }
      } else {
        for (std::size_t k : detkit::nms_keep(boxes, scores, cfg.lambda_nms)) {
          final_scores[cand[k]][c] = scores[k];
        }
      }
    };

    if (cfg.per_class) {
      for (int c = 0; c < classes; ++c) {
        std::vector<std::size_t> cand;
        std::vector<double> scores;
        for (std::size_t i = 0; i < dets.size(); ++i) {
          if (c >= static_cast<int>(dets[i].class_probs.size())) continue;
          const double s = detkit::score(dets[i], c, cfg.scoring);
          if (s > 0.0) {
            cand.push_back(i);
            scores.push_back(s);
          }
        }
        run_class(c, cand, scores);
      }
    } else {
      // Class-agnostic: suppress on the best class score, then keep every
      // class score of the surviving boxes.
      std::vector<Box> boxes;
      std::vector<double> best;
      std::vector<int> best_class;
      for (const Detection& d : dets) {
        double b = 0.0;
        int bc = 0;
        for (int c = 0; c < static_cast<int>(d.class_probs.size()); ++c) {
          const double s = detkit::score(d, c, cfg.scoring);
          if (s > b) {
            b = s;
            bc = c;
          }
        }
        boxes.push_back(d.box);
        best.push_back(b);
        best_class.push_back(bc);
      }
      auto keep_all = [&](std::size_t i, double scale) {
        for (int c = 0; c < static_cast<int>(dets[i].class_probs.size()); ++c) {
          final_scores[i][c] = detkit::score(dets[i], c, cfg.scoring) * scale;
        }
      };
      if (soft) {
        for (const auto& entry : detkit::soft_nms_scores(boxes, best, *cfg.soft)) {
          const double scale = best[entry.index] > 0.0 ? entry.score / best[entry.index] : 0.0;
          keep_all(entry.index, scale);
        }
      } else {
        for (std::size_t k : detkit::nms_keep(boxes, best, cfg.lambda_nms)) {
          if (best[k] > 0.0) keep_all(k, 1.0);
        }
      }
    }

    detkit::io::DetectionImage image;
    image.id = in.images[img].id;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const bool kept = std::any_of(final_scores[i].begin(), final_scores[i].end(),
                                    [](double s) { return s > 0.0; });
      if (kept) {
        image.detections.push_back(
            Detection{dets[i].box, final_scores[i], std::nullopt, std::nullopt});
      }
    }
    out.images[img] = std::move(image);
  });
  return out;
}

detkit::io::DetectionFile scenes_to_detection_file(const std::vector<detkit::Scene>& scenes) {
  detkit::io::DetectionFile file;
  for (const detkit::Scene& scene : scenes) {
    file.images.push_back({scene.image_id, scene.detections});
  }
  return file;
}

detkit::io::GroundTruthFile scenes_to_gt_file(const std::vector<detkit::Scene>& scenes) {
  detkit::io::GroundTruthFile file;
  for (const detkit::Scene& scene : scenes) {
    file.images.push_back({scene.image_id, scene.gts});
  }
  return file;
}

std::vector<detkit::Scene> scenes_from_files(const detkit::io::DetectionFile& dets,
                                             const detkit::io::GroundTruthFile& gts) {
  std::map<std::string, const detkit::io::GroundTruthImage*> by_id;
  for (const auto& image : gts.images) by_id[image.id] = &image;
  std::string missing;
  for (const auto& image : dets.images) {
    if (!by_id.count(image.id)) missing += (missing.empty() ? "" : ", ") + image.id;
  }
  if (by_id.size() != dets.images.size() || !missing.empty()) {
    std::map<std::string, bool> det_ids;
    for (const auto& image : dets.images) det_ids[image.id] = true;
    for (const auto& image : gts.images) {
      if (!det_ids.count(image.id)) missing += (missing.empty() ? "" : ", ") + image.id;
    }
    throw detkit::io::DataError("image ids present on one side only: " + missing);
  }
  std::vector<detkit::Scene> scenes;
  for (const auto& image : dets.images) {
    detkit::Scene scene;
    scene.image_id = image.id;
    scene.detections = image.detections;
    scene.gts = by_id[image.id]->instances;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::string sweep_to_csv(const std::vector<detkit::SweepRow>& rows) {
  std::ostringstream out;
  out << "variant,budget,omega,lambda_nms,kept,attainable,recall\n";
  for (const detkit::SweepRow& row : rows) {
    for (const auto& [omega, rec] : row.recall_at) {
      out << row.variant << ',' << row.budget << ',' << detkit::io::format_number(omega)
          << ',' << detkit::io::format_number(row.lambda_nms) << ',' << row.kept << ','
          << (row.attainable ? 1 : 0) << ',' << detkit::io::format_number(rec) << "\n";
    }
  }
  return out.str();
}

struct SuppressArgs {
  std::string input;
  std::string output;
  double lambda_nms = 0.5;
  std::string variant = "baseline";
  int f_count = 5;
  bool per_class = true;
  int threads = 0;
  double sigma = 0.5;
  double score_floor = 0.001;
};

void add_suppress_options(Binder& b, SuppressArgs& a, bool soft) {
  b.opt("-i,--input", a.input, "Detection JSON file")->required();
  b.opt("-o,--output", a.output, "Output detection JSON file")->required();
  b.opt("--variant", a.variant, "Scoring variant: baseline, independent or joint");
  b.opt("--f-count", a.f_count, "Number of fitness bins");
  b.flag("--per-class,!--no-per-class", a.per_class,
         "Suppress per class (default) or class-agnostically");
  b.opt("--threads", a.threads, "Worker threads (default: DETKIT_THREADS or 1)");
  if (soft) {
    b.opt("--sigma", a.sigma, "Gaussian decay width");
    b.opt("--score-floor", a.score_floor, "Drop rescored boxes below this score");
  } else {
    b.opt("--lambda-nms", a.lambda_nms, "Clustering IoU threshold");
  }
}

void run_suppress(const SuppressArgs& a, bool soft) {
  detkit::NmsConfig cfg;
  cfg.lambda_nms = a.lambda_nms;
  if (!(cfg.lambda_nms >= 0.0 && cfg.lambda_nms <= 1.0)) {
    throw ConfigError("lambda-nms must be in [0, 1]");
  }
  cfg.scoring.variant = parse_variant(a.variant);
  cfg.scoring.f_count = a.f_count;
  if (cfg.scoring.f_count < 1) throw ConfigError("f-count must be >= 1");
  cfg.per_class = a.per_class;
  if (soft) {
    if (!(a.sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(a.score_floor >= 0.0)) throw ConfigError("score-floor must be >= 0");
    cfg.soft = detkit::SoftNmsParams{a.sigma, a.score_floor};
  }
  const int threads = a.threads > 0 ? a.threads : default_threads();
  const auto input = detkit::io::load_detections(a.input);
  detkit::io::save_detections(apply_suppression(input, cfg, soft, threads), a.output);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection post-processing toolkit"};
  app.require_subcommand(1);

  // nms / soft-nms
  SuppressArgs nms_args, soft_args;
  CLI::App* nms_cmd = app.add_subcommand("nms", "Hard non-max suppression over a detection file");
  Binder nms_binder(nms_cmd);
  add_suppress_options(nms_binder, nms_args, false);
  nms_cmd->callback([&] {
    nms_binder.apply();
    run_suppress(nms_args, false);
  });

  CLI::App* soft_cmd = app.add_subcommand("soft-nms", "Gaussian Soft-NMS over a detection file");
  Binder soft_binder(soft_cmd);
  add_suppress_options(soft_binder, soft_args, true);
  soft_cmd->callback([&] {
    soft_binder.apply();
    run_suppress(soft_args, true);
  });

  // eval
  struct {
    std::string detections, groundtruth, json_out, csv_out;
    std::string interp = "coco101";
    std::string variant = "detections";
  } eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Recall / mAP report for detections against groundtruth");
  Binder eval_binder(eval_cmd);
  eval_binder.opt("-d,--detections", eval_args.detections, "Detection JSON file")->required();
  eval_binder.opt("-g,--groundtruth", eval_args.groundtruth, "Groundtruth JSON file")->required();
  eval_binder.opt("--json-out", eval_args.json_out, "Write the report as JSON ('-' for stdout)");
  eval_binder.opt("--csv-out", eval_args.csv_out, "Write the report as CSV ('-' for stdout)");
  eval_binder.opt("--interp", eval_args.interp, "AP interpolation: coco101 or voc11");
  eval_binder.opt("--variant", eval_args.variant, "Variant label for the CSV rows");
  eval_cmd->callback([&] {
    eval_binder.apply();
    detkit::EvalOptions options;
    if (eval_args.interp == "coco101") {
      options.interp = detkit::ApInterp::Coco101;
    } else if (eval_args.interp == "voc11") {
      options.interp = detkit::ApInterp::Voc11;
    } else {
      throw ConfigError("interp must be coco101 or voc11");
    }
    const auto dets_file = detkit::io::load_detections(eval_args.detections);
    const auto gts_file = detkit::io::load_ground_truth(eval_args.groundtruth);
    std::vector<detkit::EvalDetection> dets;
    std::vector<detkit::EvalGroundTruth> gts;
    detkit::io::pair_for_eval(dets_file, gts_file, dets, gts);
    const detkit::EvalReport report = detkit::map_report(dets, gts, options);
    if (eval_args.json_out.empty() && eval_args.csv_out.empty()) {
      std::cout << detkit::io::report_to_json(report);
    }
    if (!eval_args.json_out.empty()) {
      write_text(eval_args.json_out, detkit::io::report_to_json(report));
    }
    if (!eval_args.csv_out.empty()) {
      write_text(eval_args.csv_out, detkit::io::report_to_csv(report, eval_args.variant));
    }
  });

  // shared synthetic-suite options
  detkit::SynthConfig synth_cfg;
  auto add_synth_options = [](Binder& b, detkit::SynthConfig& cfg) {
    b.opt("--seed", cfg.rng_seed, "RNG seed");
    b.opt("--images", cfg.images, "Number of images");
    b.opt("--gts-min", cfg.gts_min, "Minimum groundtruth boxes per image");
    b.opt("--gts-max", cfg.gts_max, "Maximum groundtruth boxes per image");
    b.opt("--candidates-per-gt", cfg.candidates_per_gt, "Jittered candidates per groundtruth");
    b.opt("--background-candidates", cfg.background_candidates, "Background boxes per image");
    b.opt("--jitter-pos-sd", cfg.jitter_pos_sd, "Center jitter sd (fraction of gt size)");
    b.opt("--jitter-size-sd", cfg.jitter_size_sd, "Size jitter sd (log scale)");
    b.opt("--omega-train", cfg.omega_train, "Training matching IoU of the simulated model");
    b.opt("--score-noise-sd", cfg.score_noise_sd, "Score noise sd");
    b.opt("--fitness-noise", cfg.fitness_noise, "Fitness mass spread (0 = point mass)");
    b.opt("--null-cutoff", cfg.null_cutoff, "Drop candidates whose best class prob is below this");
    b.opt("--classes", cfg.classes, "Number of classes");
    b.opt("--f-count", cfg.f_count, "Number of fitness bins");
    b.opt("--canvas", cfg.canvas, "Canvas side length");
  };
  auto validate_synth = [](const detkit::SynthConfig& cfg) {
    if (cfg.images < 0 || cfg.gts_min < 0 || cfg.gts_max < cfg.gts_min ||
        cfg.candidates_per_gt < 0 || cfg.background_candidates < 0) {
      throw ConfigError("image / box counts must be non-negative and gts-max >= gts-min");
    }
    if (!(cfg.omega_train > 0.0 && cfg.omega_train < 1.0)) {
      throw ConfigError("omega-train must be in (0, 1)");
    }
    if (cfg.jitter_pos_sd < 0.0 || cfg.jitter_size_sd < 0.0 || cfg.score_noise_sd < 0.0 ||
        cfg.fitness_noise < 0.0) {
      throw ConfigError("jitter / noise parameters must be >= 0");
    }
    if (cfg.classes < 1 || cfg.f_count < 1) {
      throw ConfigError("classes and f-count must be >= 1");
    }
    if (!(cfg.canvas > 0.0)) throw ConfigError("canvas must be positive");
  };

  // synth
  struct {
    std::string detections_out, groundtruth_out;
    int threads = 0;
  } synth_args;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic detection suite");
  Binder synth_binder(synth_cmd);
  add_synth_options(synth_binder, synth_cfg);
  synth_binder.opt("--detections-out", synth_args.detections_out, "Output detection JSON file")
      ->required();
  synth_binder.opt("--groundtruth-out", synth_args.groundtruth_out, "Output groundtruth JSON file")
      ->required();
  synth_binder.opt("--threads", synth_args.threads, "Worker threads (default: DETKIT_THREADS or 1)");
  synth_cmd->callback([&] {
    synth_binder.apply();
    validate_synth(synth_cfg);
    const int threads = synth_args.threads > 0 ? synth_args.threads : default_threads();
    const auto scenes = detkit::generate_scenes(synth_cfg, threads);
    detkit::io::save_detections(scenes_to_detection_file(scenes), synth_args.detections_out);
    detkit::io::save_ground_truth(scenes_to_gt_file(scenes), synth_args.groundtruth_out);
  });

  // sweep
  detkit::SynthConfig sweep_synth_cfg;
  struct {
    std::string detections, groundtruth, output;
    std::vector<long long> budgets;
    std::vector<double> omegas = {0.5, 0.75, 0.9};
    std::vector<std::string> variants = {"baseline", "independent", "joint"};
    int threads = 0;
  } sweep_args;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "Recall vs detection budget for each scoring variant");
  Binder sweep_binder(sweep_cmd);
  sweep_binder.opt("-d,--detections", sweep_args.detections,
                   "Detection JSON input (omit to generate a synthetic suite)");
  sweep_binder.opt("-g,--groundtruth", sweep_args.groundtruth, "Groundtruth JSON input");
  sweep_binder.opt("-o,--output", sweep_args.output, "Output CSV ('-' or empty for stdout)");
  sweep_binder.opt("--budgets", sweep_args.budgets, "Detection budgets (positive, increasing)")
      ->required()
      ->delimiter(',');
  sweep_binder.opt("--omegas", sweep_args.omegas, "Matching IoUs to report recall at")
      ->delimiter(',');
  sweep_binder.opt("--variants", sweep_args.variants, "Scoring variants to sweep")
      ->delimiter(',');
  sweep_binder.opt("--threads", sweep_args.threads, "Worker threads (default: DETKIT_THREADS or 1)");
  add_synth_options(sweep_binder, sweep_synth_cfg);
  sweep_cmd->callback([&] {
    sweep_binder.apply();
    if (sweep_args.detections.empty() != sweep_args.groundtruth.empty()) {
      throw ConfigError("provide both --detections and --groundtruth, or neither");
    }
    for (double omega : sweep_args.omegas) {
      if (!(omega > 0.0 && omega <= 1.0)) throw ConfigError("omegas must be in (0, 1]");
    }
    const int threads = sweep_args.threads > 0 ? sweep_args.threads : default_threads();
    std::vector<detkit::Scene> scenes;
    if (sweep_args.detections.empty()) {
      validate_synth(sweep_synth_cfg);
      scenes = detkit::generate_scenes(sweep_synth_cfg, threads);
    } else {
      scenes = scenes_from_files(detkit::io::load_detections(sweep_args.detections),
                                 detkit::io::load_ground_truth(sweep_args.groundtruth));
    }
    std::vector<detkit::SweepVariantSpec> variants;
    for (const std::string& name : sweep_args.variants) {
      detkit::FitnessParams scoring;
      scoring.variant = parse_variant(name);
      scoring.f_count = sweep_synth_cfg.f_count;
      variants.push_back({name, scoring});
    }
    const auto rows = detkit::sweep_recall(scenes, variants, sweep_args.omegas,
                                           sweep_args.budgets, threads);
    write_text(sweep_args.output, sweep_to_csv(rows));
  });

  // loss-curve
  struct {
    std::string output;
    int position_steps = 600;
    int scale_steps = 250;
  } curve_args;
  CLI::App* curve_cmd =
      app.add_subcommand("loss-curve", "CSV of regression cost curves over offset and scale");
  Binder curve_binder(curve_cmd);
  curve_binder.opt("-o,--output", curve_args.output, "Output CSV ('-' or empty for stdout)");
  curve_binder.opt("--position-steps", curve_args.position_steps,
                   "Grid resolution over dx/w_t in [-0.5, 0.5]");
  curve_binder.opt("--scale-steps", curve_args.scale_steps,
                   "Grid resolution over w/w_t in (0, 2.5] (value i maps to i/100)");
  curve_cmd->callback([&] {
    curve_binder.apply();
    if (curve_args.position_steps < 1 || curve_args.scale_steps < 1) {
      throw ConfigError("position-steps and scale-steps must be >= 1");
    }
    const Box target(0.0, 0.0, 100.0, 100.0);
    std::ostringstream out;
    out << "curve,param,bounded_cost,rcnn_cost,alt_cost,direct_iou_cost\n";
    for (int i = 0; i <= curve_args.position_steps; ++i) {
      const double f = -0.5 + static_cast<double>(i) / curve_args.position_steps;
      const Box estimate(f * target.w(), 0.0, target.w(), target.h());
      const detkit::RegressionTarget t(target, target, estimate, true);
      out << "x," << detkit::io::format_number(f) << ','
          << detkit::io::format_number(detkit::bounded_iou_cost(t).components[0]) << ','
          << detkit::io::format_number(detkit::rcnn_cost(t).components[0]) << ','
          << detkit::io::format_number(detkit::rcnn_cost_alt_position(t)) << ','
          << detkit::io::format_number(2.0 * detkit::huber(1.0 - detkit::iou(estimate, target), 1.0))
          << "\n";
    }
    for (int i = 1; i <= curve_args.scale_steps; ++i) {
      const double f = static_cast<double>(i) / 100.0;
      const Box estimate(0.0, 0.0, f * target.w(), target.h());
      const detkit::RegressionTarget t(target, target, estimate, true);
      out << "w," << detkit::io::format_number(f) << ','
          << detkit::io::format_number(detkit::bounded_iou_cost(t).components[2]) << ','
          << detkit::io::format_number(detkit::rcnn_cost(t).components[2]) << ",,"
          << detkit::io::format_number(2.0 * detkit::huber(1.0 - detkit::iou(estimate, target), 1.0))
          << "\n";
    }
    write_text(curve_args.output, out.str());
  });

  // grad-check
  struct {
    std::string output;
    int trials = 100;
    double eps = 1e-6;
    std::uint64_t seed = 42;
  } grad_args;
  CLI::App* grad_cmd = app.add_subcommand(
      "grad-check", "Finite-difference verification of the analytic loss gradients");
  Binder grad_binder(grad_cmd);
  grad_binder.opt("-o,--output", grad_args.output, "Output CSV ('-' or empty for stdout)");
  grad_binder.opt("--trials", grad_args.trials, "Random evaluation points per loss");
  grad_binder.opt("--eps", grad_args.eps, "Finite-difference step");
  grad_binder.opt("--seed", grad_args.seed, "RNG seed");
  grad_cmd->callback([&] {
    grad_binder.apply();
    if (grad_args.trials < 1) throw ConfigError("trials must be >= 1");
    struct Entry {
      const char* name;
      detkit::LossFn loss;
    };
    const std::vector<Entry> losses = {
        {"rcnn", detkit::rcnn_cost},
        {"bounded-iou", detkit::bounded_iou_cost},
        {"rcnn-alt", detkit::rcnn_cost_alt},
    };
    detkit::Rng rng(grad_args.seed);
    std::ostringstream out;
    out << "loss,trials,max_rel_error,nonsmooth_skipped\n";
    for (const Entry& entry : losses) {
      double worst = 0.0;
      long long skipped = 0;
      int done = 0;
      while (done < grad_args.trials) {
        const Box target(rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0),
                         rng.uniform(20.0, 200.0), rng.uniform(20.0, 200.0));
        const Box roi(target.cx() + rng.uniform(-0.1, 0.1) * target.w(),
                      target.cy() + rng.uniform(-0.1, 0.1) * target.h(),
                      target.w() * std::exp(rng.uniform(-0.2, 0.2)),
                      target.h() * std::exp(rng.uniform(-0.2, 0.2)));
        if (detkit::iou(roi, target) < 0.5) continue;
        const Box estimate(target.cx() + rng.uniform(-0.3, 0.3) * target.w(),
                           target.cy() + rng.uniform(-0.3, 0.3) * target.h(),
                           target.w() * std::exp(rng.uniform(-0.5, 0.5)),
                           target.h() * std::exp(rng.uniform(-0.5, 0.5)));
        const detkit::RegressionTarget t(roi, target, estimate);
        const auto check = detkit::gradient_check(entry.loss, t, grad_args.eps);
        if (check.near_nonsmooth) {
          ++skipped;
          continue;
        }
        worst = std::max(worst, check.max_rel_error);
        ++done;
      }
      out << entry.name << ',' << grad_args.trials << ','
          << detkit::io::format_number(worst) << ',' << skipped << "\n";
    }
    write_text(grad_args.output, out.str());
  });

  // corner-cluster
  struct {
    std::string input, output;
    int max_rois = 1000;
    double nms_threshold = 0.7;
    double lambda_c = -1.0;
    int m = -1;
  } corner_args;
  CLI::App* corner_cmd =
      app.add_subcommand("corner-cluster", "Corner local maxima, RoI pairing and NMS clustering");
  Binder corner_binder(corner_cmd);
  corner_binder.opt("-i,--input", corner_args.input, "Corner grid JSON file")->required();
  corner_binder.opt("-o,--output", corner_args.output, "Output JSON ('-' or empty for stdout)");
  corner_binder.opt("--max-rois", corner_args.max_rois, "Maximum candidate RoIs to keep");
  corner_binder.opt("--nms-threshold", corner_args.nms_threshold, "RoI clustering IoU threshold");
  corner_binder.opt("--lambda-c", corner_args.lambda_c, "Override the grid's corner threshold");
  corner_binder.opt("-m,--window", corner_args.m, "Override the grid's window radius");
  corner_cmd->callback([&] {
    corner_binder.apply();
    if (corner_args.max_rois < 1) throw ConfigError("max-rois must be >= 1");
    if (!(corner_args.nms_threshold > 0.0 && corner_args.nms_threshold <= 1.0)) {
      throw ConfigError("nms-threshold must be in (0, 1]");
    }
    detkit::CornerGrid grid = detkit::io::load_corner_grid(corner_args.input);
    if (corner_args.lambda_c >= 0.0) grid.lambda_c = corner_args.lambda_c;
    if (corner_args.m >= 1) grid.m = corner_args.m;
    const auto corners = detkit::corner_local_max(grid);
    std::vector<detkit::Corner> top_left, bottom_right;
    for (const detkit::Corner& c : corners) {
      if (c.k == static_cast<int>(detkit::CornerType::TopLeft)) top_left.push_back(c);
      if (c.k == static_cast<int>(detkit::CornerType::BottomRight)) bottom_right.push_back(c);
    }
    const auto rois = detkit::corners_to_rois(top_left, bottom_right, corner_args.max_rois);
    const auto clusters = detkit::roi_nms_cluster(rois, corner_args.nms_threshold);

    nlohmann::ordered_json root;
    root["corners"] = nlohmann::ordered_json::array();
    for (const detkit::Corner& c : corners) {
      root["corners"].push_back({{"k", c.k}, {"y", c.y}, {"x", c.x}, {"prob", c.prob}});
    }
    root["rois"] = nlohmann::ordered_json::array();
    for (const detkit::ScoredBox& r : rois) {
      root["rois"].push_back(
          {{"box", {r.box.cx(), r.box.cy(), r.box.w(), r.box.h()}}, {"score", r.score}});
    }
    root["clusters"] = nlohmann::ordered_json::array();
    for (const Box& b : clusters) {
      root["clusters"].push_back({b.cx(), b.cy(), b.w(), b.h()});
    }
    write_text(corner_args.output, root.dump(2) + "\n");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const detkit::io::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const detkit::io::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
