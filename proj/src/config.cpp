#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fsclb/errors.hpp"
#include "fsclb/harness.hpp"

namespace fsclb {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long to_long(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("bad integer for '" + key + "': " + value);
  }
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty()) {
    throw ConfigError("bad number for '" + key + "': " + value);
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': " + value);
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& key, const std::string& value, F conv) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(conv(key, trim(item)));
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

void apply_top_level(ExperimentConfig& cfg, const std::string& key,
                     const std::string& value) {
  if (key == "algo") {
    if (value != "fsclb" && value != "fedlinucb" && value != "random") {
      throw ConfigError("unknown algo: " + value);
    }
    cfg.algo = value;
  } else if (key == "d") {
    cfg.d = static_cast<int>(to_long(key, value));
  } else if (key == "l") {
    cfg.l = static_cast<int>(to_long(key, value));
  } else if (key == "m" || key == "agents") {
    cfg.m_agents = static_cast<int>(to_long(key, value));
  } else if (key == "k" || key == "arms") {
    cfg.k_arms = static_cast<int>(to_long(key, value));
  } else if (key == "t" || key == "rounds") {
    cfg.t_rounds = to_long(key, value);
  } else if (key == "trials") {
    cfg.trials = static_cast<int>(to_long(key, value));
  } else if (key == "alpha") {
    cfg.alpha = to_double(key, value);
  } else if (key == "lambda") {
    cfg.lambda = to_double(key, value);
  } else if (key == "noise_r" || key == "r") {
    cfg.noise_r = to_double(key, value);
  } else if (key == "s_norm") {
    cfg.s_norm = to_double(key, value);
  } else if (key == "arm_norm") {
    cfg.arm_norm = to_double(key, value);
  } else if (key == "delta_conf") {
    cfg.delta_conf = to_double(key, value);
  } else if (key == "transport") {
    if (value != "inproc" && value != "tcp") {
      throw ConfigError("unknown transport: " + value);
    }
    cfg.transport = value;
  } else if (key == "theory") {
    cfg.theory_mode = to_bool(key, value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
  } else if (key == "sketch_rule") {
    if (value == "sigma_l") {
      cfg.sketch_rule = TruncationRule::SigmaL;
    } else if (value == "sigma_l_plus_1") {
      cfg.sketch_rule = TruncationRule::SigmaLPlusOne;
    } else {
      throw ConfigError("unknown sketch_rule: " + value);
    }
  } else if (key == "host") {
    cfg.host = value;
  } else if (key == "port") {
    cfg.port = static_cast<std::uint16_t>(to_long(key, value));
  } else if (key == "jobs") {
    cfg.jobs = static_cast<int>(to_long(key, value));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

void apply_env(EnvSpec& env, const std::string& key, const std::string& value) {
  if (key == "type") {
    if (value != "synthetic" && value != "dataset") {
      throw ConfigError("unknown env type: " + value);
    }
    env.type = value;
  } else if (key == "arm_rank") {
    env.arm_rank = static_cast<int>(to_long(key, value));
  } else if (key == "path") {
    env.dataset_path = value;
  } else {
    throw ConfigError("unknown [env] key: " + key);
  }
}

void apply_schedule(ScheduleSpec& sched, const std::string& key,
                    const std::string& value) {
  if (key == "mode") {
    if (value != "uniform" && value != "round-robin" && value != "block") {
      throw ConfigError("unknown schedule mode: " + value);
    }
    sched.mode = value;
  } else if (key == "block") {
    sched.block_len = static_cast<int>(to_long(key, value));
  } else {
    throw ConfigError("unknown [schedule] key: " + key);
  }
}

void apply_sweep(SweepSpec& sweep, const std::string& key,
                 const std::string& value) {
  if (key == "d") {
    sweep.d_values = to_list<int>(key, value, [](const std::string& k, const std::string& v) {
      return static_cast<int>(to_long(k, v));
    });
  } else if (key == "l") {
    sweep.l_values = to_list<int>(key, value, [](const std::string& k, const std::string& v) {
      return static_cast<int>(to_long(k, v));
    });
  } else if (key == "alpha") {
    sweep.alpha_values = to_list<double>(key, value, to_double);
  } else {
    throw ConfigError("unknown [sweep] key: " + key);
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, SweepSpec* sweep) {
  ExperimentConfig cfg;
  std::stringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      if (section != "env" && section != "schedule" && section != "sweep") {
        throw ConfigError("unknown section [" + section + "]");
      }
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key = value at line " + std::to_string(line_no));
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      apply_top_level(cfg, key, value);
    } else if (section == "env") {
      apply_env(cfg.env, key, value);
    } else if (section == "schedule") {
      apply_schedule(cfg.schedule, key, value);
    } else if (section == "sweep") {
      if (sweep == nullptr) {
        throw ConfigError("[sweep] section not allowed here");
      }
      apply_sweep(*sweep, key, value);
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path, SweepSpec* sweep) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), sweep);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.t_rounds < 1) throw ConfigError("t_rounds must be >= 1");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.d < 1 || cfg.m_agents < 1 || cfg.k_arms < 1) {
    throw ConfigError("d, agents and arms must be >= 1");
  }
  if (cfg.algo == "fsclb") {
    if (cfg.l < 1 || cfg.l >= cfg.d) {
      throw ConfigError("fsclb requires 1 <= l < d");
    }
  }
  if (cfg.alpha <= 0.0) throw ConfigError("alpha must be > 0");
  if (cfg.lambda <= 0.0) throw ConfigError("lambda must be > 0");
  if (cfg.env.type == "synthetic") {
    if (cfg.env.arm_rank < 0 || cfg.env.arm_rank > cfg.d) {
      throw ConfigError("arm_rank must be in [0, d]");
    }
  } else if (cfg.env.dataset_path.empty()) {
    throw ConfigError("dataset env requires a path");
  }
  if (cfg.schedule.mode == "block" && cfg.schedule.block_len < 1) {
    throw ConfigError("block length must be >= 1");
  }
  if (cfg.theory_mode && cfg.transport != "inproc") {
    throw ConfigError("theory mode requires the inproc transport");
  }
  if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
}

BanditParams params_from_config(const ExperimentConfig& cfg) {
  BanditParams p;
  p.d = cfg.d;
  p.l = cfg.l;
  p.num_agents = cfg.m_agents;
  p.lambda = cfg.lambda;
  p.alpha = cfg.alpha;
  p.delta_conf = cfg.delta_conf;
  p.noise_r = cfg.noise_r;
  p.s_norm = cfg.s_norm;
  p.arm_norm = cfg.arm_norm;
  p.t_horizon = static_cast<double>(cfg.t_rounds);
  return p;
}

}  // namespace fsclb
