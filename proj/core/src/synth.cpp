#include "detkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "detkit/parallel.hpp"

namespace detkit {

namespace {

std::string image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%06d", index);
  return buf;
}

}  // namespace

std::vector<Detection> simulate_scores(std::span<const Box> candidates,
                                       std::span<const GtInstance> gts,
                                       const SynthConfig& cfg, Rng& rng) {
  if (cfg.classes < 1 || cfg.f_count < 1) {
    throw std::invalid_argument("simulate_scores: classes and f_count must be >= 1");
  }
  std::vector<Detection> out;
  for (const Box& cand : candidates) {
    // Best overlap per class and overall.
    std::vector<double> rho_class(cfg.classes, 0.0);
    double rho = 0.0;
    for (const GtInstance& gt : gts) {
      const double ov = iou(cand, gt.box);
      rho_class[gt.class_id] = std::max(rho_class[gt.class_id], ov);
      rho = std::max(rho, ov);
    }

    std::vector<double> class_probs(cfg.classes, 0.0);
    double mass = 0.0;
    for (int c = 0; c < cfg.classes; ++c) {
      const double base = rho_class[c] >= cfg.omega_train ? 1.0 : 0.0;
      double p = base;
      if (cfg.score_noise_sd > 0.0) {
        // Truncated noise: resample instead of clamping so scores stay in
        // [0, 1] without piling up exactly at the endpoints (exact score
        // ties would disable suppression entirely).
        do {
          p = base + rng.normal(0.0, cfg.score_noise_sd);
        } while (p < 0.0 || p > 1.0);
      }
      class_probs[c] = p;
      mass += class_probs[c];
    }
    if (mass > 1.0) {
      for (double& p : class_probs) p /= mass;
    }

    const double max_prob = *std::max_element(class_probs.begin(), class_probs.end());
    if (max_prob < cfg.null_cutoff) continue;  // null candidate

    // Fitness mass around the true bin; zero everywhere for null overlap.
    std::vector<double> fitness(cfg.f_count, 0.0);
    const int bin = fitness_bin(rho, cfg.f_count);
    if (bin >= 0) {
      double sum = 0.0;
      for (int n = 0; n < cfg.f_count; ++n) {
        double w = 0.0;
        if (cfg.fitness_noise > 0.0) {
          const double d = (n - bin) / cfg.fitness_noise;
          w = std::exp(-0.5 * d * d);
          if (cfg.score_noise_sd > 0.0) {
            w *= std::exp(rng.normal(0.0, cfg.score_noise_sd));
          }
        } else if (n == bin) {
          w = 1.0;
        }
        fitness[n] = w;
        sum += w;
      }
      if (sum > 0.0) {
        for (double& w : fitness) w /= sum;
      }
    }

    std::vector<std::vector<double>> joint(cfg.classes, std::vector<double>(cfg.f_count, 0.0));
    double joint_target = 0.0;
    for (int c = 0; c < cfg.classes; ++c) {
      for (int n = 0; n < cfg.f_count; ++n) {
        joint[c][n] = class_probs[c] * fitness[n];
        joint_target += joint[c][n];
      }
    }
    if (cfg.score_noise_sd > 0.0 && joint_target > 0.0) {
      double noisy_total = 0.0;
      for (auto& row : joint) {
        for (double& v : row) {
          v *= std::exp(rng.normal(0.0, cfg.score_noise_sd));
          noisy_total += v;
        }
      }
      // Renormalize to the pre-noise mass so the <= 1 budget is preserved.
      for (auto& row : joint) {
        for (double& v : row) v *= joint_target / noisy_total;
      }
    }

    out.push_back(Detection{cand, std::move(class_probs), std::move(fitness), std::move(joint)});
  }
  return out;
}

Scene generate_scene(const SynthConfig& cfg, int image_index) {
  Rng rng = Rng(cfg.rng_seed).fork(static_cast<std::uint64_t>(image_index));
  Scene scene;
  scene.image_id = image_name(image_index);

  const int span = std::max(0, cfg.gts_max - cfg.gts_min);
  const int n_gts = cfg.gts_min + (span > 0 ? static_cast<int>(rng.next_u64() % (span + 1)) : 0);
  for (int g = 0; g < n_gts; ++g) {
    const double w = std::exp(rng.uniform(std::log(40.0), std::log(240.0)));
    const double h = std::exp(rng.uniform(std::log(40.0), std::log(240.0)));
    const double cx = rng.uniform(0.5 * w, cfg.canvas - 0.5 * w);
    const double cy = rng.uniform(0.5 * h, cfg.canvas - 0.5 * h);
    const int cls = cfg.classes > 1 ? static_cast<int>(rng.next_u64() % cfg.classes) : 0;
    scene.gts.push_back({cls, Box(cx, cy, w, h)});
  }

  for (const GtInstance& gt : scene.gts) {
    for (int i = 0; i < cfg.candidates_per_gt; ++i) {
      const double cx = gt.box.cx() + rng.normal(0.0, cfg.jitter_pos_sd) * gt.box.w();
      const double cy = gt.box.cy() + rng.normal(0.0, cfg.jitter_pos_sd) * gt.box.h();
      const double w = gt.box.w() * std::exp(rng.normal(0.0, cfg.jitter_size_sd));
      const double h = gt.box.h() * std::exp(rng.normal(0.0, cfg.jitter_size_sd));
      scene.candidates.emplace_back(cx, cy, w, h);
    }
  }
  for (int i = 0; i < cfg.background_candidates; ++i) {
    const double w = std::exp(rng.uniform(std::log(40.0), std::log(240.0)));
    const double h = std::exp(rng.uniform(std::log(40.0), std::log(240.0)));
    const double cx = rng.uniform(0.5 * w, cfg.canvas - 0.5 * w);
    const double cy = rng.uniform(0.5 * h, cfg.canvas - 0.5 * h);
    scene.candidates.emplace_back(cx, cy, w, h);
  }

  scene.detections = simulate_scores(scene.candidates, scene.gts, cfg, rng);
  return scene;
}

std::vector<Scene> generate_scenes(const SynthConfig& cfg, int threads) {
  std::vector<Scene> scenes(cfg.images);
  parallel_for(static_cast<std::size_t>(cfg.images), threads,
               [&](std::size_t i) { scenes[i] = generate_scene(cfg, static_cast<int>(i)); });
  return scenes;
}

std::vector<EvalGroundTruth> flatten_gts(std::span<const Scene> scenes) {
  std::vector<EvalGroundTruth> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const GtInstance& gt : scenes[i].gts) {
      out.push_back({i, gt.class_id, gt.box});
    }
  }
  return out;
}

std::vector<EvalDetection> suppress_scenes(std::span<const Scene> scenes,
                                           const NmsConfig& cfg, int threads) {
  const int classes = [&] {
    int c = 1;
    for (const Scene& s : scenes) {
      for (const Detection& d : s.detections) {
        c = std::max(c, static_cast<int>(d.class_probs.size()));
      }
    }
    return c;
  }();

  std::vector<std::vector<EvalDetection>> per_image(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    for (int c = 0; c < classes; ++c) {
      for (const Detection& kept : nms(scenes[i].detections, c, cfg)) {
        per_image[i].push_back({i, c, score(kept, c, cfg.scoring), kept.box});
      }
    }
  });

  std::vector<EvalDetection> out;
  for (auto& v : per_image) {
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::vector<EvalDetection> unsuppressed_scenes(std::span<const Scene> scenes,
                                               const FitnessParams& scoring) {
  std::vector<EvalDetection> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const Detection& d : scenes[i].detections) {
      for (int c = 0; c < static_cast<int>(d.class_probs.size()); ++c) {
        out.push_back({i, c, score(d, c, scoring), d.box});
      }
    }
  }
  return out;
}

std::vector<SweepRow> sweep_recall(std::span<const Scene> scenes,
                                   const std::vector<SweepVariantSpec>& variants,
                                   const std::vector<double>& omegas,
                                   const std::vector<long long>& budgets,
                                   int threads) {
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] <= budgets[i - 1]) {
      throw std::invalid_argument("sweep_recall: budgets must be positive and increasing");
    }
  }
  if (!budgets.empty() && budgets.front() <= 0) {
    throw std::invalid_argument("sweep_recall: budgets must be positive and increasing");
  }

  const std::vector<EvalGroundTruth> gts = flatten_gts(scenes);
  std::vector<SweepRow> rows;

  {
    SweepRow upper;
    upper.variant = "without-nms";
    const auto dets = unsuppressed_scenes(scenes, variants.empty() ? FitnessParams{} : variants[0].scoring);
    upper.kept = static_cast<long long>(dets.size());
    for (double omega : omegas) upper.recall_at[omega] = recall(dets, gts, omega);
    rows.push_back(std::move(upper));
  }

  for (const SweepVariantSpec& variant : variants) {
    for (long long budget : budgets) {
      auto kept_at = [&](double lambda) {
        NmsConfig cfg;
        cfg.lambda_nms = lambda;
        cfg.scoring = variant.scoring;
        return suppress_scenes(scenes, cfg, threads);
      };

      SweepRow row;
      row.variant = variant.name;
      row.budget = budget;

      // Kept count is monotone non-decreasing in lambda, so bisection applies.
      double lo = 0.0, hi = 1.0;
      std::vector<EvalDetection> best_dets = kept_at(1.0);
      double best_lambda = 1.0;
      auto gap = [&](long long kept) {
        return std::abs(static_cast<double>(kept - budget));
      };
      double best_gap = gap(static_cast<long long>(best_dets.size()));
      const long long total_at_one = static_cast<long long>(best_dets.size());

      if (total_at_one > budget) {
        for (int iter = 0; iter < 30; ++iter) {
          const double mid = 0.5 * (lo + hi);
          auto dets = kept_at(mid);
          const long long kept = static_cast<long long>(dets.size());
          if (gap(kept) < best_gap) {
            best_gap = gap(kept);
            best_dets = dets;
            best_lambda = mid;
          }
          if (kept > budget) {
            hi = mid;
          } else {
            lo = mid;
          }
          if (best_gap <= 0.02 * static_cast<double>(budget)) break;
        }
      }

      row.lambda_nms = best_lambda;
      row.kept = static_cast<long long>(best_dets.size());
      row.attainable = static_cast<double>(std::abs(row.kept - budget)) <=
                           0.02 * static_cast<double>(budget) ||
                       total_at_one <= budget;  // fewer candidates than the budget asks for
      for (double omega : omegas) row.recall_at[omega] = recall(best_dets, gts, omega);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace detkit
