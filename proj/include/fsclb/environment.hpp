#pragma once

#include <string>
#include <variant>
#include <vector>

#include "fsclb/linalg.hpp"
#include "fsclb/rng.hpp"

namespace fsclb {

struct RoundData {
  std::vector<Vector> arms;
  std::vector<double> rewards;  // realized, noise included
  std::vector<double> means;    // expected reward per arm
  double best_value = 0.0;      // max mean over this round's arms
};

struct SyntheticEnv {
  int d = 0;
  int arm_rank = 0;  // r <= d; arms live in a fixed r-dimensional subspace
  int k_arms = 0;
  double noise_r = 0.0;
  double arm_norm = 1.0;  // L
  Vector theta_star;      // ||theta*|| = S
  Matrix basis;           // d x r, orthonormal columns
};

SyntheticEnv make_synthetic_env(int d, int arm_rank, int k_arms,
                                double noise_r, double s_norm,
                                double arm_norm, Rng& rng);

RoundData env_step(const SyntheticEnv& env, long t, Rng& rng);

struct DatasetEnv {
  Matrix features;  // n x d, rows L2-normalized
  std::vector<int> labels;
  std::vector<std::string> label_names;
  int target_label = 0;  // most frequent class
  int k_arms = 0;
};

// CSV with the label in the last column; an optional header row is
// auto-detected. Rows are L2-normalized so L = 1.
DatasetEnv load_dataset_csv(const std::string& path, int k_arms);

// K sampled rows per round, resampled (bounded) until at least one carries
// the target label; reward is 1 on a target row and 0 otherwise.
RoundData env_step(const DatasetEnv& env, long t, Rng& rng);

using Environment = std::variant<SyntheticEnv, DatasetEnv>;

RoundData env_step(const Environment& env, long t, Rng& rng);

enum class ScheduleMode { UniformRandom, RoundRobin, Block };

struct Schedule {
  ScheduleMode mode = ScheduleMode::RoundRobin;
  int num_agents = 1;
  int block_len = 1;
  Rng rng{0};
};

// Exactly one active agent per round.
int schedule_next(Schedule& schedule, long t);

}  // namespace fsclb
