#pragma once

#include <optional>
#include <span>
#include <vector>

#include "detkit/box.hpp"

namespace detkit {

enum class ScoreVariant { Baseline, Independent, Joint };

/// Discretization of box fitness (estimated best IoU against groundtruth)
/// into f_count bins plus the scoring variant applied during suppression.
struct FitnessParams {
  int f_count = 5;
  ScoreVariant variant = ScoreVariant::Baseline;

  /// Lower IoU edge of bin n: 1/2 + n / (2 * f_count).
  double lambda(int n) const;
};

/// A candidate box with per-class probabilities and, when the detector
/// models localization quality, a fitness distribution:
///  - fitness_probs: Pr(f = n | b), f_count entries (Independent variant)
///  - joint_probs:   Pr(c, f = n | b), classes x f_count (Joint variant)
struct Detection {
  Box box;
  std::vector<double> class_probs;
  std::optional<std::vector<double>> fitness_probs;
  std::optional<std::vector<std::vector<double>>> joint_probs;
};

/// Map a best-overlap value rho in [0, 1] to a fitness bin.
/// Returns -1 (null, no fitness) when rho < 0.5, otherwise
/// floor(f_count * (2 rho - 1)) clamped to f_count - 1.
int fitness_bin(double rho, int f_count);

/// Sum of lambda(n) * p_n over the fitness bins.
double expected_fitness(std::span<const double> fitness_probs, const FitnessParams& params);

/// Suppression score of `det` for `class_id` under the given variant:
///   Baseline     Pr(c|b)
///   Independent  Pr(c|b) * E[f]        (fitness taken class-independent)
///   Joint        sum_n lambda(n) * Pr(c, f=n | b)
double score(const Detection& det, int class_id, const FitnessParams& params);

}  // namespace detkit
