#include "fedq/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fedq/errors.hpp"

namespace fedq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("invalid value for " + key + ": '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kFedQHoeffding: return "fedq-hoeffding";
    case Algorithm::kFedQBernstein: return "fedq-bernstein";
    case Algorithm::kUcbH: return "ucb-h";
    case Algorithm::kUcbB: return "ucb-b";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (auto a : {Algorithm::kFedQHoeffding, Algorithm::kFedQBernstein,
                 Algorithm::kUcbH, Algorithm::kUcbB}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool is_federated(Algorithm a) {
  return a == Algorithm::kFedQHoeffding || a == Algorithm::kFedQBernstein;
}

std::size_t ExperimentConfig::effective_agents() const {
  return is_federated(algorithm) ? agents : 1;
}

BonusConfig ExperimentConfig::effective_bonus(std::size_t horizon) const {
  BonusConfig b = bonus;
  const auto M = static_cast<std::int64_t>(effective_agents());
  if (b.T0 == 0) b.T0 = static_cast<std::int64_t>(horizon) * M * episodes;
  if (b.K0 == 0) b.K0 = episodes;
  return b;
}

std::optional<SpeedProfile> ExperimentConfig::speed_profile() const {
  if (async_rates.empty()) return std::nullopt;
  return SpeedProfile{async_rates, async_latency};
}

InitialStateDistribution ExperimentConfig::initial_distribution(
    std::size_t states) const {
  if (initial_state == "uniform") return InitialStateDistribution::uniform(states);
  if (initial_state.rfind("fixed:", 0) == 0) {
    return InitialStateDistribution::fixed(
        parse_number<std::size_t>("initial_state", initial_state.substr(6)), states);
  }
  if (initial_state.rfind("custom:", 0) == 0) {
    std::vector<double> probs;
    for (const auto& p : split(initial_state.substr(7), ',')) {
      probs.push_back(parse_number<double>("initial_state", p));
    }
    if (probs.size() != states) {
      throw ConfigError("custom initial_state needs one probability per state");
    }
    return InitialStateDistribution::custom(std::move(probs));
  }
  throw ConfigError("unknown initial_state '" + initial_state + "'");
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "algorithm") {
    algorithm = parse_algorithm(v);
  } else if (key == "env.seed") {
    env_seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "env.states") {
    env_dims.states = parse_number<std::size_t>(key, v);
  } else if (key == "env.actions") {
    env_dims.actions = parse_number<std::size_t>(key, v);
  } else if (key == "env.horizon") {
    env_dims.horizon = parse_number<std::size_t>(key, v);
  } else if (key == "env.file") {
    env_file = v;
  } else if (key == "agents") {
    agents = parse_number<std::size_t>(key, v);
  } else if (key == "episodes") {
    episodes = parse_number<std::int64_t>(key, v);
  } else if (key == "c") {
    bonus.c = parse_number<double>(key, v);
  } else if (key == "c_prime") {
    bonus.c_prime = parse_number<double>(key, v);
  } else if (key == "iota") {
    if (v == "theory") {
      bonus.iota.reset();
    } else {
      bonus.iota = parse_number<double>(key, v);
    }
  } else if (key == "p") {
    bonus.p = parse_number<double>(key, v);
  } else if (key == "T0") {
    bonus.T0 = parse_number<std::int64_t>(key, v);
  } else if (key == "K0") {
    bonus.K0 = parse_number<std::int64_t>(key, v);
  } else if (key == "initial_state") {
    initial_state = v;
  } else if (key == "seeds") {
    seeds.clear();
    for (const auto& item : split(v, ',')) {
      const auto dots = item.find("..");
      if (dots == std::string::npos) {
        seeds.push_back(parse_number<std::uint64_t>(key, item));
        continue;
      }
      const auto lo = parse_number<std::uint64_t>(key, item.substr(0, dots));
      const auto hi = parse_number<std::uint64_t>(key, item.substr(dots + 2));
      if (hi < lo) throw ConfigError("empty seed range " + item);
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    }
  } else if (key == "async.rates") {
    async_rates.clear();
    for (const auto& r : split(v, ',')) async_rates.push_back(parse_number<double>(key, r));
  } else if (key == "async.latency") {
    async_latency = parse_number<double>(key, v);
  } else if (key == "broadcast_per_agent") {
    broadcast_per_agent = parse_bool(key, v);
  } else if (key == "output") {
    output = v;
  } else if (key == "jobs") {
    jobs = parse_number<std::size_t>(key, v);
  } else if (key == "snapshot_every") {
    snapshot_every = parse_number<std::int64_t>(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void ExperimentConfig::validate(const Dims& env) const {
  if (agents == 0) throw ConfigError("agents must be >= 1");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (bonus.T0 < 0 || bonus.K0 < 0) throw ConfigError("T0 and K0 must be >= 0");
  if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
  if (!async_rates.empty()) {
    if (!is_federated(algorithm)) {
      throw ConfigError("async rates only apply to federated algorithms");
    }
    if (async_rates.size() != agents) {
      throw ConfigError("async.rates needs one rate per agent");
    }
    for (double r : async_rates) {
      if (!(r > 0.0)) throw ConfigError("async rates must be positive");
    }
  }
  if (!(async_latency >= 0.0)) throw ConfigError("async.latency must be >= 0");
  (void)initial_distribution(env.states);
  (void)resolve_iota(effective_bonus(env.horizon), env.states, env.actions,
                     env.horizon, effective_agents());
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in);
}

void ExperimentConfig::write(std::ostream& out) const {
  auto join = [](const auto& xs, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ",";
      s += fmt(xs[i]);
    }
    return s;
  };
  out << "algorithm = " << to_string(algorithm) << '\n'
      << "env.seed = " << env_seed << '\n'
      << "env.states = " << env_dims.states << '\n'
      << "env.actions = " << env_dims.actions << '\n'
      << "env.horizon = " << env_dims.horizon << '\n';
  if (!env_file.empty()) out << "env.file = " << env_file << '\n';
  out << "agents = " << agents << '\n'
      << "episodes = " << episodes << '\n'
      << "c = " << format_double(bonus.c) << '\n'
      << "c_prime = " << format_double(bonus.c_prime) << '\n'
      << "iota = " << (bonus.iota ? format_double(*bonus.iota) : "theory") << '\n'
      << "p = " << format_double(bonus.p) << '\n'
      << "T0 = " << bonus.T0 << '\n'
      << "K0 = " << bonus.K0 << '\n'
      << "initial_state = " << initial_state << '\n'
      << "seeds = " << join(seeds, [](auto s) { return std::to_string(s); }) << '\n'
      << "async.rates = " << join(async_rates, format_double) << '\n'
      << "async.latency = " << format_double(async_latency) << '\n'
      << "broadcast_per_agent = " << (broadcast_per_agent ? "true" : "false") << '\n'
      << "output = " << output << '\n'
      << "jobs = " << jobs << '\n'
      << "snapshot_every = " << snapshot_every << '\n';
}

}  // namespace fedq
