#include "negbias/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

namespace negbias {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& msg) { throw Error(ErrorCode::MalformedTrace, msg); }

json nullable(const std::vector<double>& xs) {
  json out = json::array();
  for (double x : xs) out.push_back(std::isfinite(x) ? json(x) : json(nullptr));
  return out;
}

std::vector<double> from_nullable(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
  return out;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

json policy_to_json(const PolicyConfig& p) {
  json j;
  j["kind"] = to_string(p.kind);
  j["eps_greedy_epsilon"] = p.eps_greedy_epsilon;
  j["lilucb"] = {{"beta", p.lilucb.beta}, {"epsilon", p.lilucb.epsilon}, {"delta", p.lilucb.delta},
                 {"alpha", p.lilucb.alpha}};
  j["thompson_prior"] = {{"mu0", p.thompson_prior.mu0}, {"sigma0_sq", p.thompson_prior.sigma0_sq}};
  j["gumbel"] = p.gumbel ? json{{"tau", p.gumbel->tau}} : json(nullptr);
  return j;
}

PolicyConfig policy_from_json(const json& j) {
  PolicyConfig p;
  p.kind = policy_kind_from_string(j.at("kind").get<std::string>());
  p.eps_greedy_epsilon = j.value("eps_greedy_epsilon", p.eps_greedy_epsilon);
  if (auto it = j.find("lilucb"); it != j.end()) {
    p.lilucb.beta = it->value("beta", p.lilucb.beta);
    p.lilucb.epsilon = it->value("epsilon", p.lilucb.epsilon);
    p.lilucb.delta = it->value("delta", p.lilucb.delta);
    p.lilucb.alpha = it->value("alpha", p.lilucb.alpha);
  }
  if (auto it = j.find("thompson_prior"); it != j.end()) {
    p.thompson_prior.mu0 = it->value("mu0", p.thompson_prior.mu0);
    p.thompson_prior.sigma0_sq = it->value("sigma0_sq", p.thompson_prior.sigma0_sq);
  }
  if (auto it = j.find("gumbel"); it != j.end() && !it->is_null()) p.gumbel = GumbelNoise{it->at("tau").get<double>()};
  p.validate();
  return p;
}

json arms_to_json(const std::vector<ArmModel>& arms) {
  json out = json::array();
  for (const auto& a : arms) {
    json j{{"family", a.family == ArmFamily::Gaussian ? "gaussian" : "bernoulli"}, {"mean", a.mean}};
    if (a.family == ArmFamily::Gaussian) j["obs_std"] = a.obs_std;
    out.push_back(j);
  }
  return out;
}

std::vector<ArmModel> arms_from_json(const json& j) {
  std::vector<ArmModel> arms;
  for (const auto& a : j) {
    const auto family = a.at("family").get<std::string>();
    if (family == "gaussian")
      arms.push_back(ArmModel::gaussian(a.at("mean").get<double>(), a.value("obs_std", 1.0)));
    else if (family == "bernoulli")
      arms.push_back(ArmModel::bernoulli(a.at("mean").get<double>()));
    else
      throw Error(ErrorCode::InvalidConfig, "unknown arm family '" + family + "'");
  }
  return arms;
}

json trace_to_json(const Trace& t) {
  json j;
  j["schema"] = "negbias.trace";
  j["version"] = kTraceSchemaVersion;
  j["policy"] = policy_to_json(t.policy);
  j["arms"] = arms_to_json(t.arms);
  j["horizon"] = t.horizon;
  j["selections"] = t.selections;
  j["samples"] = t.samples;
  j["decision_stats"] = t.decision_stats;
  j["gumbel_draws"] = t.gumbel_draws;
  j["split"] = t.split;
  j["init_pulls"] = t.init_pulls;
  j["held_out"] = t.held_out;
  json est = json::object();
  for (const auto& [method, values] : t.estimates) est[method] = nullable(values);
  j["estimates"] = est;
  return j;
}

Trace trace_from_json(const json& j) {
  try {
    if (field(j, "schema") != "negbias.trace") malformed("not a trace document");
    const int version = field(j, "version").get<int>();
    if (version != kTraceSchemaVersion) malformed("unsupported trace schema version " + std::to_string(version));
    Trace t;
    t.policy = policy_from_json(field(j, "policy"));
    t.arms = arms_from_json(field(j, "arms"));
    t.horizon = field(j, "horizon").get<int>();
    t.selections = field(j, "selections").get<std::vector<int>>();
    t.samples = field(j, "samples").get<std::vector<std::vector<double>>>();
    t.decision_stats = j.value("decision_stats", std::vector<std::vector<double>>{});
    t.gumbel_draws = j.value("gumbel_draws", std::vector<std::vector<double>>{});
    t.split = j.value("split", false);
    t.init_pulls = j.value("init_pulls", 1);
    t.held_out = j.value("held_out", std::vector<std::vector<double>>{});
    if (auto it = j.find("estimates"); it != j.end())
      for (const auto& [method, values] : it->items()) t.estimates[method] = from_nullable(values);
    t.validate();
    return t;
  } catch (const json::exception& e) {
    malformed(std::string("trace JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedTrace) throw;
    malformed(std::string("trace JSON: ") + e.what());
  }
}

void save_trace(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << trace_to_json(trace).dump(1) << '\n';
}

Trace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    malformed(path.string() + ": " + e.what());
  }
  return trace_from_json(j);
}

json cmle_config_to_json(const CmleConfig& c) {
  return json{{"tau", c.tau},
              {"eta", c.eta},
              {"precondition", c.precondition},
              {"n_gd_iters", c.n_gd_iters},
              {"mcmc_steps_per_iter", c.mcmc_steps_per_iter},
              {"burn_in", c.burn_in},
              {"R", c.R},
              {"proposal", to_string(c.proposal)},
              {"walk_std", c.walk_std},
              {"sites_per_step", c.sites_per_step},
              {"control_variate", c.control_variate},
              {"divergence_bound", c.divergence_bound},
              {"seed", c.seed},
              {"trial_index", c.trial_index}};
}

json cmle_result_to_json(const CmleResult& r) {
  return json{{"theta", r.theta},
              {"acceptance_rate", r.acceptance_rate},
              {"final_gradient_norm", r.final_gradient_norm},
              {"iterations", static_cast<int>(r.trajectory.size()) - 1},
              {"config", cmle_config_to_json(r.config)}};
}

void write_trajectory_csv(std::ostream& out, const CmleResult& result) {
  const std::size_t K = result.theta.size();
  out << "iteration";
  for (std::size_t k = 0; k < K; ++k) out << ",theta_" << k + 1;
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    out << i;
    for (double v : result.trajectory[i]) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace negbias
