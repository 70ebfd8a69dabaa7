#include "nuggetkit/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "nuggetkit/errors.hpp"
#include "nuggetkit/hashing.hpp"

namespace nuggetkit::selection {

void SvmHyperparams::check() const {
  if (!(c > 0.0)) throw ContractError("SVM C must be positive");
  if (max_epochs < 1) throw ContractError("SVM max_epochs must be >= 1");
  if (!(tolerance > 0.0)) throw ContractError("SVM tolerance must be positive");
}

Features SvmModel::standardize(const QualityVector& x) const {
  Features z{};
  for (std::size_t d = 0; d < kNumCriteria; ++d) z[d] = (x.values[d] - feature_means[d]) / feature_scales[d];
  return z;
}

double SvmModel::decision(const QualityVector& x) const {
  auto z = standardize(x);
  double s = bias;
  for (std::size_t d = 0; d < kNumCriteria; ++d) s += weights[d] * z[d];
  return s;
}

namespace {

Json features_json(const Features& f) {
  Json j = Json::object();
  for (std::size_t d = 0; d < kNumCriteria; ++d) j[std::string(criteria_table()[d].name)] = f[d];
  return j;
}

Features features_from(const Json& j, const char* key) {
  const Json& obj = io::json_field(j, key);
  if (!obj.is_object()) throw FormatError(std::string("field '") + key + "' must be an object");
  Features f{};
  for (std::size_t d = 0; d < kNumCriteria; ++d) {
    std::string name(criteria_table()[d].name);
    f[d] = io::json_number(obj, name.c_str());
  }
  return f;
}

}  // namespace

void to_json(Json& j, const SvmModel& v) {
  j = Json{{"weights", features_json(v.weights)},
           {"bias", v.bias},
           {"feature_means", features_json(v.feature_means)},
           {"feature_scales", features_json(v.feature_scales)},
           {"training_fingerprint", v.training_fingerprint}};
}

void from_json(const Json& j, SvmModel& v) {
  v.weights = features_from(j, "weights");
  v.bias = io::json_number(j, "bias");
  v.feature_means = features_from(j, "feature_means");
  v.feature_scales = features_from(j, "feature_scales");
  v.training_fingerprint = io::json_string(j, "training_fingerprint");
  for (double s : v.feature_scales)
    if (!(s > 0.0)) throw FormatError("svm model: feature scales must be positive");
}

Standardizer fit_standardizer(std::span<const QualityVector> data) {
  if (data.empty()) throw ContractError("fit_standardizer: no data");
  Standardizer st;
  const double n = static_cast<double>(data.size());
  for (std::size_t d = 0; d < kNumCriteria; ++d) {
    double mean = 0.0;
    for (const auto& x : data) mean += x.values[d];
    mean /= n;
    double var = 0.0;
    for (const auto& x : data) var += (x.values[d] - mean) * (x.values[d] - mean);
    var /= n;
    st.means[d] = mean;
    double sd = std::sqrt(var);
    st.scales[d] = sd > 1e-12 ? sd : 1.0;
  }
  return st;
}

SvmModel train_svm(std::span<const QualityVector> positives, std::span<const QualityVector> negatives,
                   const SvmHyperparams& hp, SvmTrainingReport* report) {
  hp.check();
  if (positives.empty() || negatives.empty()) throw ContractError("train_svm needs at least one example per class");

  std::vector<QualityVector> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  if (std::all_of(all.begin(), all.end(), [&](const QualityVector& v) { return v == all.front(); }))
    throw ContractError("train_svm: every training vector is identical");

  const std::size_t n = all.size();
  constexpr std::size_t kDim = kNumCriteria + 1;  // bias as a constant feature
  auto st = fit_standardizer(all);

  std::vector<std::array<double, kDim>> x(n);
  std::vector<double> y(n), qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kNumCriteria; ++d) x[i][d] = (all[i].values[d] - st.means[d]) / st.scales[d];
    x[i][kNumCriteria] = 1.0;
    y[i] = i < positives.size() ? 1.0 : -1.0;
    double q = 0.0;
    for (double v : x[i]) q += v * v;
    qii[i] = q;
  }

  std::array<double, kDim> w{};
  std::vector<double> alpha(n, 0.0);
  std::vector<std::size_t> order(n);
  std::mt19937_64 rng(splitmix64(hp.seed));
  int epochs = 0;
  bool converged = false;
  for (; epochs < hp.max_epochs; ++epochs) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    double pg_max = -std::numeric_limits<double>::infinity();
    double pg_min = std::numeric_limits<double>::infinity();
    for (std::size_t i : order) {
      double wx = 0.0;
      for (std::size_t d = 0; d < kDim; ++d) wx += w[d] * x[i][d];
      double g = y[i] * wx - 1.0;
      double pg = g;
      if (alpha[i] == 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] == hp.c)
        pg = std::max(g, 0.0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      double old = alpha[i];
      alpha[i] = std::clamp(old - g / qii[i], 0.0, hp.c);
      double step = (alpha[i] - old) * y[i];
      for (std::size_t d = 0; d < kDim; ++d) w[d] += step * x[i][d];
    }
    if (pg_max - pg_min < hp.tolerance) {
      converged = true;
      ++epochs;
      break;
    }
  }

  SvmModel model;
  for (std::size_t d = 0; d < kNumCriteria; ++d) model.weights[d] = w[d];
  model.bias = w[kNumCriteria];
  model.feature_means = st.means;
  model.feature_scales = st.scales;

  Fingerprint fp;
  fp.add("algo", "svm-dcd-l1/1").add("c", hp.c).add("max_epochs", std::int64_t{hp.max_epochs});
  fp.add("seed", static_cast<std::int64_t>(hp.seed)).add("tolerance", hp.tolerance);
  for (std::size_t i = 0; i < n; ++i) {
    fp.add("y", y[i]);
    for (double v : all[i].values) fp.add("x", v);
  }
  model.training_fingerprint = fp.hex();

  if (report) {
    report->epochs = epochs;
    report->converged = converged;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += (model.decision(all[i]) > 0.0) == (y[i] > 0.0);
    report->training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return model;
}

}  // namespace nuggetkit::selection
