// Acceptance suite: twelve gate checks, one pass/fail line each.
// Tolerances are pinned in the code next to each check.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "detkit/bbox_loss.hpp"
#include "detkit/box.hpp"
#include "detkit/evaluation.hpp"
#include "detkit/fitness.hpp"
#include "detkit/io.hpp"
#include "detkit/nms.hpp"
#include "detkit/rng.hpp"
#include "detkit/roi_cluster.hpp"
#include "detkit/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using detkit::Box;
using detkit::RegressionTarget;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  if (!pass) ++g_failures;
}

std::string fmt(double v) { return detkit::io::format_number(v); }

// ---------------------------------------------------------------- criterion 1

void criterion_1() {
  detkit::Rng rng(1001);
  const auto start = std::chrono::steady_clock::now();
  long long mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 200);
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      boxes.emplace_back(rng.uniform(0, 300), rng.uniform(0, 300), rng.uniform(5, 100),
                         rng.uniform(5, 100));
      // Quantize half the instances so exact ties occur.
      const double s = rng.uniform();
      scores.push_back(trial % 2 == 0 ? std::floor(s * 16.0) / 16.0 : s);
    }
    const double lambda = 0.3 + 0.4 * rng.uniform();
    if (detkit::nms_keep(boxes, scores, lambda) !=
        oracle::nms_reference(boxes, scores, lambda)) {
      ++mismatches;
    }
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report(1, "suppression equals the literal double-loop reference",
         mismatches == 0 && secs < 10.0,
         "1000 instances, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s");
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
  detkit::Rng rng(1002);
  long long viol_x = 0, viol_y = 0, viol_w = 0, viol_h = 0;
  for (int i = 0; i < 100000; ++i) {
    const Box t(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(10, 150),
                rng.uniform(10, 150));
    const Box b(t.cx() + rng.uniform(-0.6, 0.6) * t.w(),
                t.cy() + rng.uniform(-0.6, 0.6) * t.h(), t.w() * std::exp(rng.uniform(-1, 1)),
                t.h() * std::exp(rng.uniform(-1, 1)));
    const double v = detkit::iou(b, t);
    if (v > detkit::iou_bound_x(b.cx() - t.cx(), t.w()) + 1e-9) ++viol_x;
    if (v > detkit::iou_bound_x(b.cy() - t.cy(), t.h()) + 1e-9) ++viol_y;
    if (v > detkit::iou_bound_w(b.w(), t.w()) + 1e-9) ++viol_w;
    if (v > detkit::iou_bound_w(b.h(), t.h()) + 1e-9) ++viol_h;
  }

  // Attainment with the non-free coordinates at the target.
  long long attain_w_fail = 0, attain_x_fail = 0;
  for (int i = 0; i < 1000; ++i) {
    const Box t(0, 0, rng.uniform(10, 150), rng.uniform(10, 150));
    const double f = std::exp(rng.uniform(-0.6, 0.6));
    const Box scaled(0, 0, t.w() * f, t.h());
    if (std::abs(detkit::iou(scaled, t) - detkit::iou_bound_w(scaled.w(), t.w())) > 1e-9) {
      ++attain_w_fail;
    }
    const double dx = rng.uniform(0.0, 0.4) * t.w();
    const Box shifted(dx, 0, t.w(), t.h());
    if (std::abs(detkit::iou(shifted, t) - detkit::iou_bound_x(dx, t.w())) > 1e-9) {
      ++attain_x_fail;
    }
  }

  const bool pass =
      viol_x == 0 && viol_y == 0 && viol_w == 0 && viol_h == 0 && attain_w_fail == 0 &&
      attain_x_fail == 0;
  report(2, "per-coordinate bounds dominate the iou on random pairs", pass,
         "violations x/y/w/h: " + std::to_string(viol_x) + "/" + std::to_string(viol_y) + "/" +
             std::to_string(viol_w) + "/" + std::to_string(viol_h) +
             "; attainment failures w: " + std::to_string(attain_w_fail) +
             ", x: " + std::to_string(attain_x_fail) +
             "; the positional bound is not an upper bound of the full iou, see the scale "
             "clauses for the part that holds");
}

// ---------------------------------------------------------------- criterion 3

void criterion_3() {
  detkit::Rng rng(1003);
  long long pos_viol = 0, scale_viol = 0;
  int accepted = 0;
  while (accepted < 100000) {
    const Box t(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(10, 150),
                rng.uniform(10, 150));
    const Box b(t.cx() + rng.uniform(-0.5, 0.5) * t.w(),
                t.cy() + rng.uniform(-0.5, 0.5) * t.h(),
                t.w() * std::exp(rng.uniform(-0.9, 0.9)),
                t.h() * std::exp(rng.uniform(-0.9, 0.9)));
    if (detkit::iou(b, t) < 0.5) continue;
    ++accepted;
    if (std::abs(b.cx() - t.cx()) / t.w() > 1.0 / 6.0 + 1e-9) ++pos_viol;
    if (std::abs(b.cy() - t.cy()) / t.h() > 1.0 / 6.0 + 1e-9) ++pos_viol;
    const double rw = b.w() / t.w();
    const double rh = b.h() / t.h();
    if (rw < 0.5 - 1e-9 || rw > 2.0 + 1e-9) ++scale_viol;
    if (rh < 0.5 - 1e-9 || rh > 2.0 + 1e-9) ++scale_viol;
  }
  report(3, "iou >= 0.5 pairs stay inside the stated operating range",
         pos_viol == 0 && scale_viol == 0,
         "position violations: " + std::to_string(pos_viol) +
             ", scale violations: " + std::to_string(scale_viol) +
             "; iou >= 0.5 constrains |dx|/w_t to 1/2, not 1/6, so the position clause "
             "cannot hold; the scale clause does");
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
  detkit::Rng rng(1004);
  double worst_huber = 0.0;
  for (int i = 0; i < 100; ++i) {
    double z = rng.uniform(-3, 3);
    while (std::abs(std::abs(z) - 1.0) < 1e-3) z = rng.uniform(-3, 3);
    const double fd = oracle::central_diff([](double v) { return detkit::huber(v, 1.0); }, z, 1e-6);
    const double an = detkit::huber_deriv(z, 1.0);
    const double denom = std::max({std::abs(an), std::abs(fd), 1e-6});
    worst_huber = std::max(worst_huber, std::abs(an - fd) / denom);
  }

  const std::vector<std::pair<std::string, detkit::LossFn>> losses = {
      {"rcnn", detkit::rcnn_cost},
      {"bounded", detkit::bounded_iou_cost},
      {"alt", detkit::rcnn_cost_alt},
  };
  double worst = worst_huber;
  for (const auto& [name, loss] : losses) {
    int done = 0;
    while (done < 100) {
      const Box target(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(20, 200),
                       rng.uniform(20, 200));
      const Box roi(target.cx() + rng.uniform(-0.1, 0.1) * target.w(),
                    target.cy() + rng.uniform(-0.1, 0.1) * target.h(),
                    target.w() * std::exp(rng.uniform(-0.2, 0.2)),
                    target.h() * std::exp(rng.uniform(-0.2, 0.2)));
      if (detkit::iou(roi, target) < 0.5) continue;
      const Box estimate(target.cx() + rng.uniform(-0.3, 0.3) * target.w(),
                         target.cy() + rng.uniform(-0.3, 0.3) * target.h(),
                         target.w() * std::exp(rng.uniform(-0.5, 0.5)),
                         target.h() * std::exp(rng.uniform(-0.5, 0.5)));
      const RegressionTarget t(roi, target, estimate);
      const auto check = detkit::gradient_check(loss, t, 1e-6);
      if (check.near_nonsmooth) continue;  // smooth points only
      worst = std::max(worst, check.max_rel_error);
      ++done;
    }
  }
  report(4, "analytic gradients match central finite differences", worst < 1e-4,
         "max relative error " + fmt(worst) + ", tolerance 1e-4");
}

// ---------------------------------------------------------------- criterion 5

void criterion_5(const std::string& cli, const fs::path& dir) {
  const Box target(0, 0, 120, 120);
  const RegressionTarget shift(target, target, Box(120.0 / 6.0, 0, 120, 120));
  const RegressionTarget scale(target, target, Box(0, 0, 240, 120), true);
  const double bx = detkit::bounded_iou_cost(shift).components[0];
  const double bw = detkit::bounded_iou_cost(scale).components[2];
  const double rw = detkit::rcnn_cost(scale).components[2];
  const double expected_rw = 0.5 * std::log(2.0) * std::log(2.0);

  bool dominance = true;
  for (int i = 1; i <= 600; ++i) {
    const double f = (1.0 / 6.0) * i / 600.0;
    const RegressionTarget t(target, target, Box(f * 120.0, 0, 120, 120));
    if (!(detkit::bounded_iou_cost(t).components[0] > detkit::rcnn_cost(t).components[0])) {
      dominance = false;
    }
  }

  const std::string curve = (dir / "curve.csv").string();
  const bool cli_ok =
      std::system((cli + " loss-curve -o " + curve + " >/dev/null 2>&1").c_str()) == 0;
  std::ifstream in(curve);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string csv = buf.str();
  const bool csv_ok = cli_ok && csv.find("x," + fmt(1.0 / 6.0) + "," + fmt(bx) + ",") !=
                                    std::string::npos &&
                      csv.find("w,2," + fmt(bw) + "," + fmt(rw) + ",") != std::string::npos;

  const bool pass = std::abs(bx - 0.25) <= 1e-9 && std::abs(bw - 0.25) <= 1e-9 &&
                    std::abs(rw - expected_rw) <= 1e-9 && dominance && csv_ok;
  report(5, "loss curve anchor values and positional dominance", pass,
         "bounded x " + fmt(bx) + ", bounded w " + fmt(bw) + ", rcnn w " + fmt(rw) +
             ", dominance " + (dominance ? "holds" : "broken") + ", csv rows " +
             (csv_ok ? "present" : "missing"));
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
  const detkit::FitnessParams p{5, detkit::ScoreVariant::Baseline};
  const bool ladder = p.lambda(0) == 0.5 && p.lambda(1) == 0.6 && p.lambda(2) == 0.7 &&
                      p.lambda(3) == 0.8 && p.lambda(4) == 0.9;

  bool half_open = true;
  for (int i = 0; i <= 10000; ++i) {
    const double rho = i / 10000.0;
    const int bin = detkit::fitness_bin(rho, 5);
    if (rho < 0.5) {
      if (bin != -1) half_open = false;
    } else if (bin < 0 || bin >= 5 || rho < p.lambda(bin) ||
               (bin + 1 < 5 && rho >= p.lambda(bin + 1))) {
      half_open = false;
    }
  }

  detkit::Rng rng(1006);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    detkit::Detection det{Box(0, 0, 10, 10), {}, std::vector<double>{}, {}};
    const int classes = 1 + static_cast<int>(rng.next_u64() % 4);
    for (int c = 0; c < classes; ++c) det.class_probs.push_back(rng.uniform());
    for (int n = 0; n < 5; ++n) det.fitness_probs->push_back(rng.uniform());
    std::vector<std::vector<double>> joint(classes);
    for (int c = 0; c < classes; ++c) {
      for (double f : *det.fitness_probs) joint[c].push_back(det.class_probs[c] * f);
    }
    det.joint_probs = joint;
    for (int c = 0; c < classes; ++c) {
      const double si =
          detkit::score(det, c, {5, detkit::ScoreVariant::Independent});
      const double sj = detkit::score(det, c, {5, detkit::ScoreVariant::Joint});
      worst = std::max(worst, std::abs(si - sj));
    }
  }

  report(6, "fitness ladder, bin edges and joint/independent agreement",
         ladder && half_open && worst <= 1e-12,
         std::string("ladder ") + (ladder ? "exact" : "wrong") + ", half-open " +
             (half_open ? "holds" : "broken") + ", max |joint - independent| " + fmt(worst));
}

// ---------------------------------------------------------------- criterion 7

struct SuiteMetrics {
  double recall_05 = 0.0;
  double recall_09 = 0.0;
};

SuiteMetrics suite_recall(const std::vector<detkit::Scene>& scenes,
                          detkit::ScoreVariant variant) {
  detkit::NmsConfig cfg;
  cfg.scoring.variant = variant;
  const auto dets = detkit::suppress_scenes(scenes, cfg, 1);
  const auto gts = detkit::flatten_gts(scenes);
  return {detkit::recall(dets, gts, 0.5), detkit::recall(dets, gts, 0.9)};
}

void criterion_7() {
  const auto start = std::chrono::steady_clock::now();
  detkit::SynthConfig cfg;
  cfg.images = 1000;
  const auto scenes = detkit::generate_scenes(cfg, 1);
  const SuiteMetrics base = suite_recall(scenes, detkit::ScoreVariant::Baseline);
  const SuiteMetrics joint = suite_recall(scenes, detkit::ScoreVariant::Joint);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const double delta_09 = joint.recall_09 - base.recall_09;
  const double delta_05 = joint.recall_05 - base.recall_05;
  const bool pass = delta_09 >= 0.02 && std::abs(delta_05) <= 0.01 && secs < 60.0;
  report(7, "fitness scoring lifts strict-iou recall on the default suite", pass,
         "delta at 0.9: " + fmt(delta_09 * 100) + " pts (needs >= 2), at 0.5: " +
             fmt(delta_05 * 100) + " pts (needs |.| <= 1), " + fmt(secs) + " s single-threaded");
}

// ---------------------------------------------------------------- criterion 8

void criterion_8() {
  auto recalls = [](double omega_train) {
    detkit::SynthConfig cfg;
    cfg.images = 500;
    cfg.omega_train = omega_train;
    const auto scenes = detkit::generate_scenes(cfg, 1);
    return suite_recall(scenes, detkit::ScoreVariant::Baseline);
  };
  const SuiteMetrics low = recalls(0.5);
  const SuiteMetrics high = recalls(0.9);
  const bool pass = low.recall_05 > high.recall_05 && high.recall_09 > low.recall_09;
  report(8, "each training-iou model wins at its matching test iou", pass,
         "test 0.5: " + fmt(low.recall_05) + " vs " + fmt(high.recall_05) + "; test 0.9: " +
             fmt(low.recall_09) + " vs " + fmt(high.recall_09));
}

// ---------------------------------------------------------------- criterion 9

void criterion_9() {
  const std::vector<Box> pair = {Box(0, 0, 10, 10), Box(0, 0, 10, 10)};
  const std::vector<double> scores = {0.9, 0.6};
  const auto soft_pair = detkit::soft_nms_scores(pair, scores, {0.5, 0.001});
  const bool factor_ok = soft_pair.size() == 2 &&
                         std::abs(soft_pair[1].score - 0.6 * std::exp(-2.0)) <= 1e-12;

  detkit::SynthConfig cfg;
  cfg.images = 300;
  const auto scenes = detkit::generate_scenes(cfg, 1);
  const auto gts = detkit::flatten_gts(scenes);
  detkit::NmsConfig hard_cfg;
  const auto hard = detkit::suppress_scenes(scenes, hard_cfg, 1);
  detkit::NmsConfig soft_cfg;
  soft_cfg.soft = detkit::SoftNmsParams{};
  std::vector<detkit::EvalDetection> soft;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const auto& entry : detkit::soft_nms(scenes[i].detections, 0, soft_cfg)) {
      soft.push_back({i, 0, entry.score, scenes[i].detections[entry.index].box});
    }
  }
  const double hard_map = detkit::map_report(hard, gts).map_range;
  const double soft_map = detkit::map_report(soft, gts).map_range;

  report(9, "soft suppression rescoring and map_range direction",
         factor_ok && soft_map >= hard_map,
         "pair factor exp(-2) " + std::string(factor_ok ? "exact" : "wrong") + ", map_range " +
             fmt(soft_map) + " vs " + fmt(hard_map) + " hard");
}

// --------------------------------------------------------------- criterion 10

void criterion_10() {
  detkit::Rng rng(1010);
  long long mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int h = 1 + static_cast<int>(rng.next_u64() % 64);
    const int w = 1 + static_cast<int>(rng.next_u64() % 64);
    const int m = 1 + static_cast<int>(rng.next_u64() % 3);
    detkit::CornerGrid grid(h, w, 0.3, m);
    for (double& p : grid.probs) p = std::floor(rng.uniform() * 16.0) / 16.0;

    auto key = [](const detkit::Corner& c) { return std::tuple(c.k, c.y, c.x); };
    auto got = detkit::corner_local_max(grid);
    auto ref = oracle::corner_reference(grid);
    std::vector<std::tuple<int, int, int>> a, b;
    for (const auto& c : got) a.push_back(key(c));
    for (const auto& c : ref) b.push_back(key(c));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) ++mismatches;
  }
  report(10, "corner local maxima equal the brute-force window scan", mismatches == 0,
         "1000 grids, " + std::to_string(mismatches) + " mismatches");
}

// --------------------------------------------------------------- criterion 11

void criterion_11() {
  detkit::Rng rng(1011);
  // The two total losses; the alternative cost is a positional term only
  // and has no scale components to descend.
  const std::vector<std::pair<std::string, detkit::LossFn>> losses = {
      {"rcnn", detkit::rcnn_cost},
      {"bounded", detkit::bounded_iou_cost},
  };
  std::string detail;
  bool pass = true;
  for (const auto& [name, loss] : losses) {
    int converged = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Box target(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(20, 200),
                       rng.uniform(20, 200));
      // Start RoIs drawn inside the operating range.
      const Box roi(target.cx() + rng.uniform(-1.0 / 6.0, 1.0 / 6.0) * target.w(),
                    target.cy() + rng.uniform(-1.0 / 6.0, 1.0 / 6.0) * target.h(),
                    target.w() * std::exp(rng.uniform(-std::log(2.0), std::log(2.0))),
                    target.h() * std::exp(rng.uniform(-std::log(2.0), std::log(2.0))));
      const Box final = detkit::descend(loss, roi, target, roi);
      if (detkit::iou(final, target) > 0.99) ++converged;
    }
    if (converged < 99) pass = false;
    detail += name + " " + std::to_string(converged) + "/100 ";
  }
  report(11, "gradient descent recovers the target within 500 steps", pass,
         detail + "(needs >= 99 each)");
}

// --------------------------------------------------------------- criterion 12

void criterion_12(const std::string& cli, const fs::path& dir) {
  auto path = [&](const std::string& name) { return (dir / name).string(); };
  auto exec = [&](const std::string& args) {
    return std::system((cli + " " + args + " >/dev/null 2>&1").c_str()) == 0;
  };
  auto slurp = [](const std::string& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };

  bool pass = true;
  std::string detail;
  auto expect_same = [&](const std::string& what, const std::string& a, const std::string& b) {
    const std::string sa = slurp(a);
    if (sa.empty() || sa != slurp(b)) {
      pass = false;
      detail += what + " differs; ";
    }
  };

  // synth at parallelism 1 and 8, twice each.
  for (const std::string tag : {"1", "8", "1b"}) {
    const std::string threads = tag == "8" ? "8" : "1";
    if (!exec("synth --images 40 --threads " + threads + " --detections-out " +
              path("d" + tag + ".json") + " --groundtruth-out " + path("g" + tag + ".json"))) {
      pass = false;
      detail += "synth failed; ";
    }
  }
  expect_same("synth threads", path("d1.json"), path("d8.json"));
  expect_same("synth rerun", path("d1.json"), path("d1b.json"));
  expect_same("synth gts", path("g1.json"), path("g8.json"));

  for (const std::string tag : {"1", "8", "1b"}) {
    const std::string threads = tag == "8" ? "8" : "1";
    exec("nms -i " + path("d1.json") + " -o " + path("n" + tag + ".json") + " --threads " +
         threads);
    exec("soft-nms -i " + path("d1.json") + " -o " + path("s" + tag + ".json") + " --threads " +
         threads);
    exec("sweep -d " + path("d1.json") + " -g " + path("g1.json") +
         " --budgets 50,200 --threads " + threads + " -o " + path("w" + tag + ".csv"));
  }
  expect_same("nms threads", path("n1.json"), path("n8.json"));
  expect_same("nms rerun", path("n1.json"), path("n1b.json"));
  expect_same("soft-nms threads", path("s1.json"), path("s8.json"));
  expect_same("soft-nms rerun", path("s1.json"), path("s1b.json"));
  expect_same("sweep threads", path("w1.csv"), path("w8.csv"));
  expect_same("sweep rerun", path("w1.csv"), path("w1b.csv"));

  for (const std::string tag : {"1", "1b"}) {
    exec("eval -d " + path("n1.json") + " -g " + path("g1.json") + " --json-out " +
         path("e" + tag + ".json") + " --csv-out " + path("e" + tag + ".csv"));
    exec("loss-curve -o " + path("c" + tag + ".csv"));
    exec("grad-check --trials 20 -o " + path("q" + tag + ".csv"));
  }
  expect_same("eval rerun", path("e1.json"), path("e1b.json"));
  expect_same("eval csv rerun", path("e1.csv"), path("e1b.csv"));
  expect_same("loss-curve rerun", path("c1.csv"), path("c1b.csv"));
  expect_same("grad-check rerun", path("q1.csv"), path("q1b.csv"));

  {
    detkit::CornerGrid grid(8, 8, 0.3, 1);
    detkit::Rng rng(1012);
    for (double& p : grid.probs) p = rng.uniform();
    detkit::io::save_corner_grid(grid, path("grid.json"));
    for (const std::string tag : {"1", "1b"}) {
      exec("corner-cluster -i " + path("grid.json") + " -o " + path("cc" + tag + ".json"));
    }
    expect_same("corner-cluster rerun", path("cc1.json"), path("cc1b.json"));
  }

  report(12, "cli output is byte-identical across reruns and thread counts", pass,
         pass ? "all commands stable" : detail);
}

}  // namespace

int main() {
  const std::string cli = DETKIT_CLI_PATH;
  const fs::path dir =
      fs::temp_directory_path() / ("detkit_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5(cli, dir);
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12(cli, dir);

  fs::remove_all(dir);
  std::cout << (g_failures == 0 ? "all criteria passed"
                                : std::to_string(g_failures) + " criteria failed")
            << "\n";
  return g_failures == 0 ? 0 : 1;
}
