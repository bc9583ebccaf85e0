#include "fsclb/environment.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "fsclb/errors.hpp"

namespace fsclb {

namespace {

Vector random_unit_vector(int n, Rng& rng) {
  Vector v(n);
  double norm2;
  do {
    for (int i = 0; i < n; ++i) v[i] = rng.gaussian();
    norm2 = v.squaredNorm();
  } while (norm2 == 0.0);
  return v / std::sqrt(norm2);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& cell, double* out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return false;
  *out = v;
  return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

SyntheticEnv make_synthetic_env(int d, int arm_rank, int k_arms,
                                double noise_r, double s_norm,
                                double arm_norm, Rng& rng) {
  if (d < 1 || arm_rank < 1 || arm_rank > d || k_arms < 1) {
    throw InvalidState("make_synthetic_env: bad dimensions");
  }
  SyntheticEnv env;
  env.d = d;
  env.arm_rank = arm_rank;
  env.k_arms = k_arms;
  env.noise_r = noise_r;
  env.arm_norm = arm_norm;
  env.theta_star = s_norm * random_unit_vector(d, rng);

  Matrix g(d, arm_rank);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < arm_rank; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Matrix> qr(g);
  env.basis = qr.householderQ() * Matrix::Identity(d, arm_rank);
  return env;
}

RoundData env_step(const SyntheticEnv& env, long t, Rng& rng) {
  if (t < 1) throw InvalidState("env_step: round index must be >= 1");
  RoundData rd;
  rd.arms.reserve(env.k_arms);
  rd.rewards.resize(env.k_arms);
  rd.means.resize(env.k_arms);
  const double eta = env.noise_r * rng.gaussian();
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < env.k_arms; ++i) {
    const Vector z = random_unit_vector(env.arm_rank, rng);
    rd.arms.push_back(env.arm_norm * (env.basis * z));
    rd.means[i] = rd.arms.back().dot(env.theta_star);
    rd.rewards[i] = rd.means[i] + eta;
    best = std::max(best, rd.means[i]);
  }
  rd.best_value = best;
  return rd;
}

DatasetEnv load_dataset_csv(const std::string& path, int k_arms) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::string line;
  long line_no = 0;
  long cols = -1;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cols < 0) cols = static_cast<long>(cells.size());

    if (first_content_line) {
      first_content_line = false;
      bool numeric = cells.size() >= 2;
      for (std::size_t j = 0; numeric && j + 1 < cells.size(); ++j) {
        double v;
        numeric = parse_double(cells[j], &v);
      }
      if (!numeric) continue;  // header row
    }

    if (static_cast<long>(cells.size()) != cols) {
      throw DataError("ragged row at line " + std::to_string(line_no));
    }
    if (cols < 2) {
      throw DataError("dataset needs at least one feature and a label column");
    }
    std::vector<double> feats(cells.size() - 1);
    for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
      if (!parse_double(cells[j], &feats[j])) {
        throw DataError("non-numeric cell at line " + std::to_string(line_no) +
                        ", column " + std::to_string(j + 1));
      }
    }
    rows.push_back(std::move(feats));
    raw_labels.push_back(trim(cells.back()));
  }
  if (rows.empty()) throw DataError("empty dataset: " + path);

  DatasetEnv env;
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size());
  env.features = Matrix(n, d);
  env.labels.resize(n);
  std::map<std::string, int> codes;
  std::vector<int> counts;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) env.features(i, j) = rows[i][j];
    const double norm = env.features.row(i).norm();
    if (norm > 0.0) env.features.row(i) /= norm;
    auto [it, inserted] = codes.emplace(raw_labels[i],
                                        static_cast<int>(env.label_names.size()));
    if (inserted) {
      env.label_names.push_back(raw_labels[i]);
      counts.push_back(0);
    }
    env.labels[i] = it->second;
    counts[it->second] += 1;
  }
  env.target_label = static_cast<int>(
      std::max_element(counts.begin(), counts.end()) - counts.begin());
  env.k_arms = k_arms;
  if (k_arms < 1 || k_arms > n) {
    throw DataError("k_arms must be in [1, n]");
  }
  return env;
}

RoundData env_step(const DatasetEnv& env, long t, Rng& rng) {
  if (t < 1) throw InvalidState("env_step: round index must be >= 1");
  const int n = static_cast<int>(env.features.rows());
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    // K distinct rows
    std::vector<int> picks;
    picks.reserve(env.k_arms);
    while (static_cast<int>(picks.size()) < env.k_arms) {
      const int idx = rng.uniform_int(n);
      if (std::find(picks.begin(), picks.end(), idx) == picks.end()) {
        picks.push_back(idx);
      }
    }
    bool has_target = false;
    for (int idx : picks) has_target |= env.labels[idx] == env.target_label;
    if (!has_target) continue;

    RoundData rd;
    rd.arms.reserve(env.k_arms);
    rd.rewards.resize(env.k_arms);
    rd.means.resize(env.k_arms);
    for (int i = 0; i < env.k_arms; ++i) {
      rd.arms.push_back(env.features.row(picks[i]).transpose());
      const double r = env.labels[picks[i]] == env.target_label ? 1.0 : 0.0;
      rd.rewards[i] = r;
      rd.means[i] = r;
    }
    rd.best_value = 1.0;
    return rd;
  }
  throw DataError("env_step: no target-label instance after bounded retries");
}

RoundData env_step(const Environment& env, long t, Rng& rng) {
  return std::visit([&](const auto& e) { return env_step(e, t, rng); }, env);
}

int schedule_next(Schedule& schedule, long t) {
  if (t < 1) throw InvalidState("schedule_next: round index must be >= 1");
  switch (schedule.mode) {
    case ScheduleMode::UniformRandom:
      return schedule.rng.uniform_int(schedule.num_agents);
    case ScheduleMode::RoundRobin:
      return static_cast<int>((t - 1) % schedule.num_agents);
    case ScheduleMode::Block: {
      const long block = (t - 1) / std::max(1, schedule.block_len);
      return static_cast<int>(block % schedule.num_agents);
    }
  }
  throw InvalidState("schedule_next: unknown mode");
}

}  // namespace fsclb
