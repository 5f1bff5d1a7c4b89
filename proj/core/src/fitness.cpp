#include "detkit/fitness.hpp"

#include <cmath>
#include <stdexcept>

namespace detkit {

double FitnessParams::lambda(int n) const {
  if (n < 0 || n >= f_count) {
    throw std::invalid_argument("FitnessParams::lambda: bin out of range");
  }
  return 0.5 + static_cast<double>(n) / (2.0 * f_count);
}

int fitness_bin(double rho, int f_count) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("fitness_bin: rho must be in [0, 1]");
  }
  if (f_count < 1) {
    throw std::invalid_argument("fitness_bin: f_count must be >= 1");
  }
  if (rho < 0.5) return -1;
  // Small epsilon keeps exact bin edges (rho == lambda_n) in bin n despite
  // the rounding of 2*rho - 1.
  const int n = static_cast<int>(std::floor(f_count * (2.0 * rho - 1.0) + 1e-9));
  return std::min(n, f_count - 1);
}

double expected_fitness(std::span<const double> fitness_probs, const FitnessParams& params) {
  if (static_cast<int>(fitness_probs.size()) != params.f_count) {
    throw std::invalid_argument("expected_fitness: length mismatch with f_count");
  }
  double e = 0.0;
  for (int n = 0; n < params.f_count; ++n) {
    e += params.lambda(n) * fitness_probs[n];
  }
  return e;
}

double score(const Detection& det, int class_id, const FitnessParams& params) {
  if (class_id < 0 || class_id >= static_cast<int>(det.class_probs.size())) {
    throw std::invalid_argument("score: class_id out of range");
  }
  switch (params.variant) {
    case ScoreVariant::Baseline:
      return det.class_probs[class_id];
    case ScoreVariant::Independent: {
      if (!det.fitness_probs) {
        throw std::invalid_argument("score: Independent variant requires fitness_probs");
      }
      return det.class_probs[class_id] * expected_fitness(*det.fitness_probs, params);
    }
    case ScoreVariant::Joint: {
      if (!det.joint_probs) {
        throw std::invalid_argument("score: Joint variant requires joint_probs");
      }
      const auto& row = (*det.joint_probs)[class_id];
      if (static_cast<int>(row.size()) != params.f_count) {
        throw std::invalid_argument("score: joint_probs row length mismatch with f_count");
      }
      double s = 0.0;
      for (int n = 0; n < params.f_count; ++n) {
        s += params.lambda(n) * row[n];
      }
      return s;
    }
  }
  throw std::logic_error("score: unknown variant");
}

}  // namespace detkit
