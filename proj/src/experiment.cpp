#include "fedq/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "fedq/agent.hpp"
#include "fedq/baselines.hpp"
#include "fedq/errors.hpp"

namespace fedq {

namespace fs = std::filesystem;

namespace {

constexpr double kRegretTolerance = 1e-9;
constexpr double kOptimismTolerance = 1e-9;

void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

void append_number(std::string& out, std::int64_t v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <typename T>
T field(const std::string& s) {
  T out{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("malformed metrics field '" + s + "'");
  }
  return out;
}

std::int64_t count_optimism_violations(const ActionValueTable& q,
                                       const ActionValueTable& q_star) {
  std::int64_t n = 0;
  auto a = q.raw();
  auto b = q_star.raw();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - kOptimismTolerance) ++n;
  }
  return n;
}

double regret_increment(const OptimalSolution& optimal, const ValueTable& v_pi,
                        std::span<const std::int64_t> initial_counts) {
  double inc = 0.0;
  for (std::size_t x = 0; x < initial_counts.size(); ++x) {
    if (initial_counts[x] == 0) continue;
    inc += static_cast<double>(initial_counts[x]) * (optimal.v(0, x) - v_pi(0, x));
  }
  if (inc < -kRegretTolerance) {
    throw ConsistencyError("negative regret increment");
  }
  return inc;
}

// Visit caps on every report, plus existence of a tight cell.
void check_caps(const BroadcastMessage& msg, const RoundOutcome& outcome,
                std::size_t M, std::size_t H) {
  bool tight = false;
  for (const auto& r : outcome.reports) {
    for (std::size_t i = 0; i < r.visit_counts.size(); ++i) {
      const std::int64_t cap = visit_cap(msg.visit_counts[i], M, H);
      if (r.visit_counts[i] > cap) {
        std::ostringstream s;
        s << "round " << msg.round << ": agent " << r.agent << " exceeded cap "
          << cap << " with " << r.visit_counts[i] << " visits";
        throw ConsistencyError(s.str());
      }
      tight |= r.visit_counts[i] == cap;
    }
  }
  if (!tight) throw ConsistencyError("no agent met its visit cap in the round");
}

void check_step_identity(const RoundOutcome& outcome, std::size_t H,
                         std::size_t S) {
  const std::int64_t per_agent = outcome.episodes_per_agent.front();
  for (auto n : outcome.episodes_per_agent) {
    if (n != per_agent) throw ConsistencyError("lockstep agents diverged");
  }
  for (std::size_t h = 0; h < H; ++h) {
    std::int64_t total = 0;
    for (const auto& r : outcome.reports) {
      for (std::size_t x = 0; x < S; ++x) total += r.visit_counts[h * S + x];
    }
    if (total != per_agent * static_cast<std::int64_t>(outcome.reports.size())) {
      throw ConsistencyError("per-step visit totals do not match episodes");
    }
  }
}

RunResult run_federated(const ExperimentConfig& cfg, const TabularMdp& mdp,
                        const OptimalSolution& optimal, std::uint64_t seed,
                        const RunHooks* hooks) {
  const auto& dims = mdp.dims();
  const std::size_t M = cfg.effective_agents();
  const std::size_t H = dims.horizon, S = dims.states;
  const Variant variant = cfg.algorithm == Algorithm::kFedQBernstein
                              ? Variant::kBernstein
                              : Variant::kHoeffding;
  const BonusConfig bonus = cfg.effective_bonus(H);
  const double iota = resolve_iota(bonus, S, dims.actions, H, M);

  ServerState server(dims, M, variant, bonus, iota);
  std::vector<Rng> streams;
  streams.reserve(M);
  for (std::size_t m = 0; m < M; ++m) streams.emplace_back(mix_seed(seed, m + 1));
  const auto initial = cfg.initial_distribution(S);
  const auto speeds = cfg.speed_profile();
  RoundEnvironment env{&mdp, &initial, streams, variant,
                       cfg.broadcast_per_agent, cfg.keep_trajectories};

  RunResult result;
  auto& sum = result.summary;
  sum.algorithm = to_string(cfg.algorithm);
  sum.seed = seed;
  sum.dims = dims;
  sum.agents = M;
  sum.iota = iota;
  sum.synchronous = !speeds.has_value();

  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  double regret = 0.0;
  while (!should_terminate(server, steps)) {
    const BroadcastMessage msg = server.broadcast();
    const RoundOutcome outcome = speeds ? run_round_asynchronous(msg, env, *speeds)
                                        : run_round_synchronous(msg, env);
    check_caps(msg, outcome, M, H);
    if (!speeds) check_step_identity(outcome, H, S);

    regret += regret_increment(optimal, evaluate_policy(mdp, msg.policy),
                               outcome.initial_state_counts);
    const AggregatedRound agg = aggregate_round(server, outcome.reports);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t x = 0; x < S; ++x) {
        const std::size_t i = h * S + x;
        if (server.visits(h, x, msg.policy(h, x)) !=
            msg.visit_counts[i] + agg.visits[i]) {
          throw ConsistencyError("visit totals not conserved");
        }
      }
    }

    const std::int64_t round_episodes = outcome.total_episodes();
    episodes += round_episodes;
    steps += static_cast<std::int64_t>(H) * round_episodes;
    const auto agent_signals = static_cast<std::int64_t>(outcome.triggered_agents.size());

    RoundRecord rec;
    rec.round = agg.round;
    rec.n_k = static_cast<double>(round_episodes) / static_cast<double>(M);
    rec.episodes_per_agent = static_cast<double>(episodes) / static_cast<double>(M);
    rec.steps = steps;
    rec.cumulative_regret = regret;
    rec.scalars_down =
        outcome.ledger.scalars_down + outcome.ledger.signals - agent_signals;
    rec.scalars_up = outcome.ledger.scalars_up + agent_signals;
    rec.case1_updates = agg.case1_updates;
    rec.case2_updates = agg.case2_updates;
    rec.optimism_violations = count_optimism_violations(server.q(), optimal.q);
    result.records.push_back(rec);

    sum.ledger += outcome.ledger;
    sum.optimism_violations += rec.optimism_violations;
    if (cfg.snapshot_every > 0 && agg.round % cfg.snapshot_every == 0) {
      result.snapshots.push_back(server.snapshot());
    }
    if (hooks && hooks->on_round) {
      hooks->on_round(RoundObservation{msg, outcome, agg, server, rec});
    }
  }

  sum.rounds = static_cast<std::int64_t>(result.records.size());
  sum.episodes_per_agent = static_cast<double>(episodes) / static_cast<double>(M);
  sum.total_steps = steps;
  sum.final_regret = regret;
  if (sum.synchronous && sum.rounds > 0) {
    const double T = static_cast<double>(steps) / static_cast<double>(M);
    sum.round_bound = max_rounds_bound(S, dims.actions, H, M, T);
    if (static_cast<double>(sum.rounds) > *sum.round_bound) {
      std::ostringstream s;
      s << "round count " << sum.rounds << " exceeds bound " << *sum.round_bound;
      throw ConsistencyError(s.str());
    }
  }
  return result;
}

RunResult run_baseline(const ExperimentConfig& cfg, const TabularMdp& mdp,
                       const OptimalSolution& optimal, std::uint64_t seed,
                       const RunHooks* hooks) {
  const auto& dims = mdp.dims();
  const std::size_t H = dims.horizon;
  const BonusKind kind =
      cfg.algorithm == Algorithm::kUcbB ? BonusKind::kBernstein : BonusKind::kHoeffding;
  const BonusConfig bonus = cfg.effective_bonus(H);
  const double iota = resolve_iota(bonus, dims.states, dims.actions, H, 1);

  SingleAgentState state(dims, kind, bonus, iota);
  Rng rng(mix_seed(seed, 1));
  const auto initial = cfg.initial_distribution(dims.states);

  RunResult result;
  auto& sum = result.summary;
  sum.algorithm = to_string(cfg.algorithm);
  sum.seed = seed;
  sum.dims = dims;
  sum.agents = 1;
  sum.iota = iota;

  double regret = 0.0;
  result.records.reserve(static_cast<std::size_t>(cfg.episodes));
  for (std::int64_t e = 1; e <= cfg.episodes; ++e) {
    const std::size_t x1 = initial.sample(rng);
    const ValueTable v_pi = evaluate_policy(mdp, state.policy());
    const double inc = optimal.v(0, x1) - v_pi(0, x1);
    if (inc < -kRegretTolerance) throw ConsistencyError("negative regret increment");
    regret += inc;

    EpisodeTrajectory traj;
    traj.initial_state = x1;
    std::size_t x = x1;
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t a = state.policy()(h, x);
      const double r = mdp.reward(h, x, a);
      const std::size_t y = sample_next_state(mdp, h, x, a, rng);
      ucb_step(state, Transition{h, x, a, r, y});
      traj.steps.push_back({x, a, r});
      x = y;
    }
    traj.terminal_state = x;

    RoundRecord rec;
    rec.round = e;
    rec.n_k = 1.0;
    rec.episodes_per_agent = static_cast<double>(e);
    rec.steps = e * static_cast<std::int64_t>(H);
    rec.cumulative_regret = regret;
    rec.optimism_violations = count_optimism_violations(state.q(), optimal.q);
    result.records.push_back(rec);
    sum.optimism_violations += rec.optimism_violations;
    if (hooks && hooks->on_episode) hooks->on_episode(traj, rec);
  }
  sum.rounds = cfg.episodes;
  sum.episodes_per_agent = static_cast<double>(cfg.episodes);
  sum.total_steps = cfg.episodes * static_cast<std::int64_t>(H);
  sum.final_regret = regret;
  return result;
}

}  // namespace

std::string format_record(const RoundRecord& r) {
  std::string s;
  append_number(s, r.round);
  s += ',';
  append_number(s, r.n_k);
  s += ',';
  append_number(s, r.episodes_per_agent);
  s += ',';
  append_number(s, r.steps);
  s += ',';
  append_number(s, r.cumulative_regret);
  s += ',';
  append_number(s, r.scalars_down);
  s += ',';
  append_number(s, r.scalars_up);
  s += ',';
  append_number(s, r.case1_updates);
  s += ',';
  append_number(s, r.case2_updates);
  s += ',';
  append_number(s, r.optimism_violations);
  return s;
}

RoundRecord parse_record(const std::string& line) {
  std::vector<std::string> cols;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) cols.push_back(item);
  if (cols.size() != 10) throw ConfigError("metrics row needs 10 columns");
  RoundRecord r;
  r.round = field<std::int64_t>(cols[0]);
  r.n_k = field<double>(cols[1]);
  r.episodes_per_agent = field<double>(cols[2]);
  r.steps = field<std::int64_t>(cols[3]);
  r.cumulative_regret = field<double>(cols[4]);
  r.scalars_down = field<std::int64_t>(cols[5]);
  r.scalars_up = field<std::int64_t>(cols[6]);
  r.case1_updates = field<std::int64_t>(cols[7]);
  r.case2_updates = field<std::int64_t>(cols[8]);
  r.optimism_violations = field<std::int64_t>(cols[9]);
  return r;
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json j{
      {"algorithm", algorithm},
      {"seed", seed},
      {"S", dims.states},
      {"A", dims.actions},
      {"H", dims.horizon},
      {"agents", agents},
      {"rounds", rounds},
      {"episodes_per_agent", episodes_per_agent},
      {"total_steps", total_steps},
      {"final_regret", final_regret},
      {"normalized_regret", normalized_regret},
      {"scalars_down", ledger.scalars_down},
      {"scalars_up", ledger.scalars_up},
      {"signals", ledger.signals},
      {"total_scalars", ledger.total()},
      {"optimism_violations", optimism_violations},
      {"iota", iota},
      {"synchronous", synchronous},
      {"wall_time_seconds", wall_time_seconds},
  };
  if (round_bound) {
    j["round_bound"] = *round_bound;
    j["round_bound_satisfied"] = static_cast<double>(rounds) <= *round_bound;
  } else {
    j["round_bound"] = nullptr;
    j["round_bound_satisfied"] = nullptr;
  }
  return j;
}

RunSummary RunSummary::from_json(const nlohmann::json& j) {
  try {
    RunSummary s;
    s.algorithm = j.at("algorithm").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.dims = {j.at("S").get<std::size_t>(), j.at("A").get<std::size_t>(),
              j.at("H").get<std::size_t>()};
    s.agents = j.at("agents").get<std::size_t>();
    s.rounds = j.at("rounds").get<std::int64_t>();
    s.episodes_per_agent = j.at("episodes_per_agent").get<double>();
    s.total_steps = j.at("total_steps").get<std::int64_t>();
    s.final_regret = j.at("final_regret").get<double>();
    s.normalized_regret = j.at("normalized_regret").get<double>();
    s.ledger = {j.at("scalars_down").get<std::int64_t>(),
                j.at("scalars_up").get<std::int64_t>(),
                j.at("signals").get<std::int64_t>()};
    s.optimism_violations = j.at("optimism_violations").get<std::int64_t>();
    s.iota = j.at("iota").get<double>();
    s.synchronous = j.at("synchronous").get<bool>();
    if (!j.at("round_bound").is_null()) s.round_bound = j["round_bound"].get<double>();
    s.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run summary: ") + e.what());
  }
}

double max_rounds_bound(std::size_t S, std::size_t A, std::size_t H,
                        std::size_t M, double T) {
  const double s = static_cast<double>(S), a = static_cast<double>(A);
  const double h = static_cast<double>(H), m = static_cast<double>(M);
  const double burn_in = h * h * (h + 1.0) * m * s * a;
  const double growth = std::log1p(1.0 / (2.0 * m * h * (h + 1.0)));
  const double log_term = std::log(T / (h * h * (h + 1.0) * m));
  return std::max(h * s * a / growth * log_term + burn_in, burn_in);
}

TabularMdp build_environment(const ExperimentConfig& cfg) {
  if (!cfg.env_file.empty()) return TabularMdp::load(cfg.env_file);
  return generate_random_mdp(cfg.env_seed, cfg.env_dims);
}

RunResult run_single(const ExperimentConfig& cfg, const TabularMdp& mdp,
                     const OptimalSolution& optimal, std::uint64_t seed,
                     const RunHooks* hooks) {
  cfg.validate(mdp.dims());
  const auto start = std::chrono::steady_clock::now();
  RunResult r = is_federated(cfg.algorithm)
                    ? run_federated(cfg, mdp, optimal, seed, hooks)
                    : run_baseline(cfg, mdp, optimal, seed, hooks);
  auto& s = r.summary;
  const double mt = static_cast<double>(s.agents) *
                    static_cast<double>(mdp.horizon()) * s.episodes_per_agent;
  s.normalized_regret = mt > 0.0 ? s.final_regret / std::sqrt(mt) : 0.0;
  s.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void write_run(const std::string& dir, const RunResult& run) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "metrics.csv", std::ios::binary);
    if (!out) throw ConfigError("cannot write metrics in " + dir);
    std::string buf = kMetricsHeader;
    buf += '\n';
    for (const auto& r : run.records) {
      buf += format_record(r);
      buf += '\n';
    }
    out << buf;
  }
  {
    std::ofstream out(fs::path(dir) / "summary.json");
    out << run.summary.to_json().dump(2) << '\n';
  }
  if (!run.snapshots.empty()) {
    const auto snap_dir = fs::path(dir) / "snapshots";
    fs::create_directories(snap_dir);
    for (const auto& snap : run.snapshots) {
      std::ofstream out(snap_dir / ("round_" + std::to_string(snap.at("round").get<std::int64_t>()) + ".json"));
      out << snap.dump(1) << '\n';
    }
  }
}

std::vector<RunResult> run_experiment(const ExperimentConfig& cfg) {
  const TabularMdp mdp = build_environment(cfg);
  cfg.validate(mdp.dims());
  const OptimalSolution optimal = solve_optimal(mdp);

  std::vector<RunResult> results(cfg.seeds.size());
  for (std::size_t begin = 0; begin < cfg.seeds.size(); begin += cfg.jobs) {
    const std::size_t end = std::min(cfg.seeds.size(), begin + cfg.jobs);
    std::vector<std::future<RunResult>> jobs;
    for (std::size_t i = begin; i < end; ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return run_single(cfg, mdp, optimal, cfg.seeds[i]);
      }));
    }
    for (std::size_t i = begin; i < end; ++i) results[i] = jobs[i - begin].get();
  }

  if (!cfg.output.empty()) {
    const fs::path root = fs::path(cfg.output) / to_string(cfg.algorithm);
    fs::create_directories(root);
    mdp.save((root / "env.json").string());
    {
      std::ofstream out(root / "config.txt");
      cfg.write(out);
    }
    for (const auto& r : results) {
      write_run((root / ("seed_" + std::to_string(r.summary.seed))).string(), r);
    }
  }
  return results;
}

}  // namespace fedq
