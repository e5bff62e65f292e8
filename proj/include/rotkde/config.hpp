#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotkde/model.hpp"
#include "rotkde/risk.hpp"

namespace rotkde {

/// A config value that violates the experiment schema; `path` names the key
/// (for example "model.beta").
class SchemaError : public std::invalid_argument {
 public:
  SchemaError(std::string path, const std::string &message)
      : std::invalid_argument(path + ": " + message), path_(std::move(path)) {}

  const std::string &path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Default base seed when neither the config nor ROTKDE_SEED sets one.
inline constexpr std::uint64_t kDefaultSeed = 20240607;

/// Model JSON: {marginal1, marginal2, theta (degrees), beta, L, id}. Each
/// marginal is {"kind": "gaussian", "sigma": s} or {"kind": "perturbed",
/// "eps": e}; missing fields take the default experiment model (perturbed
/// marginals with eps = 0.5, beta = 2, L = 1, theta = 30). Returns the
/// resolved JSON with every default written out.
nlohmann::json resolve_model_json(const nlohmann::json &j, const std::string &path = "model");

/// Builds (and certifies) the model described by a resolved model JSON.
Model model_from_json(const nlohmann::json &resolved);

struct Experiment {
  Model model;
  EstimatorSpec estimator;
  Point x;
  std::vector<long> n_grid;
  double p{2};
  int reps{200};
  std::uint64_t seed{kDefaultSeed};
  /// Every field with defaults filled; embedded in report headers.
  nlohmann::json resolved;
};

/// Validates an experiment JSON; `default_seed` fills a missing "seed".
Experiment experiment_from_json(const nlohmann::json &j,
                                std::uint64_t default_seed = kDefaultSeed);

/// Reads and validates an experiment file (model certification runs eagerly).
Experiment load_experiment(const std::string &path, std::uint64_t default_seed = kDefaultSeed);

}  // namespace rotkde
