#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detkit/box.hpp"
#include "detkit/evaluation.hpp"
#include "detkit/fitness.hpp"
#include "detkit/nms.hpp"
#include "detkit/rng.hpp"

namespace detkit {

/// Synthetic scene generator standing in for a detector trained at
/// omega_train: groundtruth boxes on a fixed canvas, jittered candidate
/// boxes around them, and simulated class / fitness probabilities.
struct SynthConfig {
  std::uint64_t rng_seed = 42;
  int images = 100;
  int gts_min = 1;
  int gts_max = 5;
  int candidates_per_gt = 32;
  int background_candidates = 2;
  double jitter_pos_sd = 0.15;   // fraction of gt width / height
  double jitter_size_sd = 0.2;   // log-scale sd
  double omega_train = 0.5;
  double score_noise_sd = 0.05;
  double fitness_noise = 0.1;    // bin-spread of the simulated fitness mass; 0 = exact
  double null_cutoff = 0.25;     // candidates with max class prob below this are null
  int classes = 1;
  int f_count = 5;
  double canvas = 1000.0;
};

struct Scene {
  std::string image_id;
  std::vector<GtInstance> gts;
  std::vector<Box> candidates;       // every generated candidate box
  std::vector<Detection> detections; // candidates surviving the null cutoff
};

/// Simulated detector outputs for externally supplied candidates: class
/// probability is a noisy step at rho >= omega_train, the fitness
/// distribution concentrates on the true bin of rho, and the joint matrix
/// is their (renormalized) product.
std::vector<Detection> simulate_scores(std::span<const Box> candidates,
                                       std::span<const GtInstance> gts,
                                       const SynthConfig& cfg, Rng& rng);

/// One deterministic scene; image_index selects a derived seed so images
/// can be generated in any order or in parallel.
Scene generate_scene(const SynthConfig& cfg, int image_index);

std::vector<Scene> generate_scenes(const SynthConfig& cfg, int threads = 1);

/// Flatten groundtruth for the evaluation module (image index = scene index).
std::vector<EvalGroundTruth> flatten_gts(std::span<const Scene> scenes);

/// Per-image, per-class suppression over every scene; returns flattened
/// kept detections scored by the configured variant.
std::vector<EvalDetection> suppress_scenes(std::span<const Scene> scenes,
                                           const NmsConfig& cfg, int threads = 1);

/// All candidate detections without suppression (the recall upper bound).
std::vector<EvalDetection> unsuppressed_scenes(std::span<const Scene> scenes,
                                               const FitnessParams& scoring);

struct SweepVariantSpec {
  std::string name;
  FitnessParams scoring;
};

struct SweepRow {
  std::string variant;
  long long budget = 0;           // requested detection count; 0 for the upper bound row
  double lambda_nms = 1.0;
  bool attainable = true;
  long long kept = 0;
  std::map<double, double> recall_at;
};

/// For each variant and detection budget, bisect lambda_nms until the kept
/// detection count lands within 2% of the budget, then report recall at
/// each omega. The first row is the Without-NMS upper bound.
std::vector<SweepRow> sweep_recall(std::span<const Scene> scenes,
                                   const std::vector<SweepVariantSpec>& variants,
                                   const std::vector<double>& omegas,
                                   const std::vector<long long>& budgets,
                                   int threads = 1);

}  // namespace detkit
