#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "detkit/fitness.hpp"

using detkit::Detection;
using detkit::FitnessParams;
using detkit::ScoreVariant;

TEST_CASE("lambda ladder for five bins is exact") {
  const FitnessParams p{5, ScoreVariant::Baseline};
  CHECK(p.lambda(0) == 0.5);
  CHECK(p.lambda(1) == 0.6);
  CHECK(p.lambda(2) == 0.7);
  CHECK(p.lambda(3) == 0.8);
  CHECK(p.lambda(4) == 0.9);
}

TEST_CASE("fitness_bin edges") {
  CHECK(detkit::fitness_bin(0.0, 5) == -1);
  CHECK(detkit::fitness_bin(0.49999, 5) == -1);
  CHECK(detkit::fitness_bin(0.5, 5) == 0);
  CHECK(detkit::fitness_bin(0.59, 5) == 0);
  CHECK(detkit::fitness_bin(0.6, 5) == 1);
  CHECK(detkit::fitness_bin(0.7, 5) == 2);
  CHECK(detkit::fitness_bin(0.8, 5) == 3);
  CHECK(detkit::fitness_bin(0.9, 5) == 4);
  CHECK(detkit::fitness_bin(0.95, 5) == 4);
  CHECK(detkit::fitness_bin(1.0, 5) == 4);
}

TEST_CASE("fitness_bin satisfies the half-open interval property on a dense grid") {
  const FitnessParams p{5, ScoreVariant::Baseline};
  for (int i = 0; i <= 10000; ++i) {
    const double rho = i / 10000.0;
    const int bin = detkit::fitness_bin(rho, p.f_count);
    if (rho < 0.5) {
      CHECK(bin == -1);
    } else {
      REQUIRE(bin >= 0);
      REQUIRE(bin < p.f_count);
      CHECK(rho >= p.lambda(bin));
      if (bin + 1 < p.f_count) CHECK(rho < p.lambda(bin + 1));
    }
  }
}

TEST_CASE("expected fitness is the lambda-weighted mass") {
  const FitnessParams p{5, ScoreVariant::Independent};
  const std::vector<double> probs = {0.1, 0.2, 0.3, 0.2, 0.2};
  const double expected = 0.1 * 0.5 + 0.2 * 0.6 + 0.3 * 0.7 + 0.2 * 0.8 + 0.2 * 0.9;
  CHECK(detkit::expected_fitness(probs, p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score variants") {
  Detection det{detkit::Box(0, 0, 10, 10), {0.8, 0.1}, std::nullopt, std::nullopt};

  SUBCASE("baseline is the class probability") {
    CHECK(detkit::score(det, 0, FitnessParams{5, ScoreVariant::Baseline}) == 0.8);
    CHECK(detkit::score(det, 1, FitnessParams{5, ScoreVariant::Baseline}) == 0.1);
  }

  SUBCASE("independent requires fitness data") {
    CHECK_THROWS_AS(detkit::score(det, 0, FitnessParams{5, ScoreVariant::Independent}),
                    std::invalid_argument);
  }

  SUBCASE("joint requires a joint matrix") {
    CHECK_THROWS_AS(detkit::score(det, 0, FitnessParams{5, ScoreVariant::Joint}),
                    std::invalid_argument);
  }

  SUBCASE("independent multiplies by expected fitness") {
    det.fitness_probs = std::vector<double>{0.0, 0.0, 0.0, 0.0, 1.0};
    const double s = detkit::score(det, 0, FitnessParams{5, ScoreVariant::Independent});
    CHECK(s == doctest::Approx(0.8 * 0.9).epsilon(1e-12));
  }

  SUBCASE("joint equals independent under a factorized matrix") {
    const std::vector<double> fitness = {0.05, 0.1, 0.15, 0.3, 0.4};
    det.fitness_probs = fitness;
    std::vector<std::vector<double>> joint(2);
    for (int c = 0; c < 2; ++c) {
      for (double f : fitness) joint[c].push_back(det.class_probs[c] * f);
    }
    det.joint_probs = joint;
    for (int c = 0; c < 2; ++c) {
      const double si = detkit::score(det, c, FitnessParams{5, ScoreVariant::Independent});
      const double sj = detkit::score(det, c, FitnessParams{5, ScoreVariant::Joint});
      CHECK(sj == doctest::Approx(si).epsilon(1e-12));
    }
  }
}

TEST_CASE("lambda ladder for other bin counts") {
  const FitnessParams p{4, ScoreVariant::Baseline};
  CHECK(p.lambda(0) == 0.5);
  CHECK(p.lambda(1) == doctest::Approx(0.625));
  CHECK(p.lambda(3) == doctest::Approx(0.875));
  CHECK(detkit::fitness_bin(0.874, 4) == 2);
  CHECK(detkit::fitness_bin(0.875, 4) == 3);
}
