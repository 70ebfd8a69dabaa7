// Linear soft-margin SVM over standardized quality vectors, trained by dual
// coordinate descent on the L1 hinge loss. Training is deterministic: the
// only randomness is a seeded per-epoch visiting order.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "nuggetkit/core.hpp"
#include "nuggetkit/serialize.hpp"

namespace nuggetkit::selection {

using Features = std::array<double, kNumCriteria>;

struct SvmHyperparams {
  double c = 1.0;
  int max_epochs = 100000;
  std::uint64_t seed = 0;
  // Stop once the projected-gradient spread of an epoch falls below this.
  double tolerance = 1e-8;

  void check() const;
};

struct SvmModel {
  Features weights{};
  double bias = 0.0;
  Features feature_means{};
  Features feature_scales{};
  std::string training_fingerprint;

  /// Signed decision value w . z(x) + b on the standardized vector.
  double decision(const QualityVector& x) const;
  Features standardize(const QualityVector& x) const;

  bool operator==(const SvmModel&) const = default;
};

void to_json(Json& j, const SvmModel& v);
void from_json(const Json& j, SvmModel& v);

struct Standardizer {
  Features means{};
  Features scales{};  // population standard deviation; 1 for constant dims
};

Standardizer fit_standardizer(std::span<const QualityVector> data);

struct SvmTrainingReport {
  int epochs = 0;
  bool converged = false;
  double training_accuracy = 0.0;
};

/// Throws ContractError when a class is empty or every vector is identical.
SvmModel train_svm(std::span<const QualityVector> positives, std::span<const QualityVector> negatives,
                   const SvmHyperparams& hyperparams = {}, SvmTrainingReport* report = nullptr);

}  // namespace nuggetkit::selection
