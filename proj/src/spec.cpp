#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "negbias/experiment.hpp"
#include "negbias/io.hpp"
#include "negbias/simulate.hpp"

namespace negbias {

using nlohmann::json;

namespace {

// Maps JSON pointers to the source line of the key (or value, for array
// elements and the root). Assumes the text already parsed as JSON.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) : s_(text) {
    ws();
    value("", true);
  }

  int line(std::string pointer) const {
    for (;;) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 1;
      pointer.erase(pointer.rfind('/'));
    }
  }

 private:
  void ws() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
      if (s_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  std::string str() {
    std::string out;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') out += s_[i_++];
      out += s_[i_++];
    }
    ++i_;
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& ptr, bool record) {
    if (record) lines_.emplace(ptr, line_);
    if (i_ >= s_.size()) return;
    const char c = s_[i_];
    if (c == '{') {
      ++i_;
      ws();
      while (i_ < s_.size() && s_[i_] != '}') {
        const int key_line = line_;
        const std::string child = ptr + "/" + escape(str());
        lines_.emplace(child, key_line);
        ws();
        ++i_;  // ':'
        ws();
        value(child, false);
        ws();
        if (i_ < s_.size() && s_[i_] == ',') {
          ++i_;
          ws();
        }
      }
      ++i_;
    } else if (c == '[') {
      ++i_;
      ws();
      for (int n = 0; i_ < s_.size() && s_[i_] != ']'; ++n) {
        value(ptr + "/" + std::to_string(n), true);
        ws();
        if (i_ < s_.size() && s_[i_] == ',') {
          ++i_;
          ws();
        }
      }
      ++i_;
    } else if (c == '"') {
      str();
    } else {
      while (i_ < s_.size() && !std::strchr(",]}", s_[i_]) && !std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::map<std::string, int> lines_;
};

struct Context {
  std::string source;
  LineIndex index;

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg,
                         ErrorCode code = ErrorCode::InvalidConfig) const {
    std::ostringstream os;
    os << source << ":" << index.line(ptr) << ": " << (ptr.empty() ? "" : ptr + ": ") << msg;
    throw Error(code, os.str());
  }
};

// Reads the members of one JSON object and rejects any it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const Context& ctx, const json& j, std::string ptr) : ctx_(ctx), j_(j), ptr_(std::move(ptr)) {
    if (!j.is_object()) ctx.fail(ptr_, "expected an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) ctx_.fail(ptr_ + "/" + key, "unknown key '" + key + "'");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const std::string& key) const { return ptr_ + "/" + key; }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) ctx_.fail(at(key), "expected a number");
    return v->get<double>();
  }

  int integer(const std::string& key, int fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) ctx_.fail(at(key), "expected an integer");
    const auto x = v->get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      ctx_.fail(at(key), "integer out of range");
    return static_cast<int>(x);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) ctx_.fail(at(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) ctx_.fail(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) ctx_.fail(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = find(key);
    if (!v) return {};
    if (!v->is_array()) ctx_.fail(at(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) ctx_.fail(at(key) + "/" + std::to_string(i), "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) ctx_.fail(at(key), "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer()) ctx_.fail(at(key) + "/" + std::to_string(i), "expected an integer");
      out.push_back((*v)[i].get<int>());
    }
    return out;
  }

 private:
  const Context& ctx_;
  const json& j_;
  std::string ptr_;
  std::set<std::string> seen_;
};

// Runs fn and re-raises library validation errors at the given location.
template <typename Fn>
auto located(const Context& ctx, const std::string& ptr, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.what()[0] && std::string(e.what()).rfind(ctx.source + ":", 0) == 0) throw;
    ctx.fail(ptr, e.what(), e.code());
  }
}

std::vector<ArmModel> make_arms(const Context& ctx, const std::string& ptr, const std::string& family, double sd,
                                const std::vector<double>& means) {
  if (means.empty()) ctx.fail(ptr + "/means", "at least one arm mean is required");
  return located(ctx, ptr + "/means", [&] {
    if (family == "gaussian") return gaussian_arms(means, sd);
    if (family != "bernoulli") ctx.fail(ptr + "/family", "family must be 'gaussian' or 'bernoulli'");
    return bernoulli_arms(means);
  });
}

PolicyConfig read_policy(const Context& ctx, const json& j, const std::string& ptr) {
  ObjectReader r(ctx, j, ptr);
  PolicyConfig p;
  const std::string kind = r.string("kind", "");
  if (kind.empty()) ctx.fail(ptr, "policy needs a 'kind'");
  p.kind = located(ctx, r.at("kind"), [&] { return policy_kind_from_string(kind); });
  p.eps_greedy_epsilon = r.number("eps_greedy_epsilon", p.eps_greedy_epsilon);
  if (const json* v = r.find("lilucb")) {
    ObjectReader l(ctx, *v, r.at("lilucb"));
    p.lilucb.beta = l.number("beta", p.lilucb.beta);
    p.lilucb.epsilon = l.number("epsilon", p.lilucb.epsilon);
    p.lilucb.delta = l.number("delta", p.lilucb.delta);
    p.lilucb.alpha = l.number("alpha", p.lilucb.alpha);
  }
  if (const json* v = r.find("thompson_prior")) {
    ObjectReader t(ctx, *v, r.at("thompson_prior"));
    p.thompson_prior.mu0 = t.number("mu0", p.thompson_prior.mu0);
    p.thompson_prior.sigma0_sq = t.number("sigma0_sq", p.thompson_prior.sigma0_sq);
  }
  if (const json* v = r.find("gumbel"); v && !v->is_null()) {
    ObjectReader g(ctx, *v, r.at("gumbel"));
    p.gumbel = GumbelNoise{g.number("tau", 1.0)};
  }
  located(ctx, ptr, [&] {
    p.validate();
    return 0;
  });
  return p;
}

CmleConfig read_cmle(const Context& ctx, const json& j, const std::string& ptr, CmleConfig c, double tau) {
  ObjectReader r(ctx, j, ptr);
  c.tau = r.number("tau", tau);
  c.eta = r.number("eta", c.eta);
  c.precondition = r.boolean("precondition", c.precondition);
  c.n_gd_iters = r.integer("n_gd_iters", c.n_gd_iters);
  c.mcmc_steps_per_iter = r.integer("mcmc_steps_per_iter", c.mcmc_steps_per_iter);
  c.burn_in = r.integer("burn_in", c.burn_in);
  c.R = r.integer("R", c.R);
  const std::string proposal = r.string("proposal", to_string(c.proposal));
  if (proposal == "independence")
    c.proposal = Proposal::IndependencePerSite;
  else if (proposal == "random_walk")
    c.proposal = Proposal::RandomWalkPerSite;
  else
    ctx.fail(r.at("proposal"), "proposal must be 'independence' or 'random_walk'");
  c.walk_std = r.number("walk_std", c.walk_std);
  c.sites_per_step = r.integer("sites_per_step", c.sites_per_step);
  c.control_variate = r.boolean("control_variate", c.control_variate);
  c.divergence_bound = r.number("divergence_bound", c.divergence_bound);
  c.seed = r.seed("seed", c.seed);
  located(ctx, ptr, [&] {
    c.validate();
    return 0;
  });
  return c;
}

}  // namespace

bool ExperimentSpec::wants(const std::string& estimator) const {
  return std::find(estimators.begin(), estimators.end(), estimator) != estimators.end();
}

void ExperimentSpec::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (cases.empty()) bad("spec defines no arms");
  for (const auto& c : cases) {
    const int K = static_cast<int>(c.arms.size());
    if (K < 2) bad("case '" + c.label + "' needs at least two arms");
    if (c.horizon < K) bad("case '" + c.label + "' needs horizon >= number of arms");
    for (const auto& a : c.arms) a.validate();
    for (int t : checkpoints)
      if (t < K || t > c.horizon) bad("checkpoint " + std::to_string(t) + " outside [K, T] for case '" + c.label + "'");
  }
  if (policies.empty()) bad("spec defines no policies");
  for (const auto& p : policies) p.validate();
  if (n_trials < 1) bad("n_trials must be at least 1");
  if (cmle_trials && *cmle_trials < 1) bad("cmle_trials must be at least 1");
  if (threads < 1) bad("threads must be at least 1");
  for (const auto& e : estimators)
    if (e != "naive" && e != "heldout" && e != "propensity" && e != "cmle") bad("unknown estimator '" + e + "'");
  if (!(gumbel_tau > 0.0)) bad("gumbel_tau must be positive");
  cmle.validate();
  cmle_thompson.validate();
  if (cmle.tau != gumbel_tau || cmle_thompson.tau != gumbel_tau) bad("cmle tau must equal gumbel_tau");
  if (snapshot < 1) bad("snapshot must be positive");
  if (init_pulls < 1) bad("init_pulls must be at least 1");
  if (grid.size < 1) bad("grid size must be positive");
  for (int h : grid.horizons)
    if (h < 2 || h > kMaxExactHorizon) bad("grid horizons must lie in [2, " + std::to_string(kMaxExactHorizon) + "]");
}

ExperimentSpec parse_spec(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++i)
      if (text[i] == '\n') ++line;
    throw Error(ErrorCode::InvalidConfig, source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  const Context ctx{source, LineIndex(text)};
  ExperimentSpec spec;
  {
    ObjectReader r(ctx, j, "");
    r.string("description", "");

    std::string family = "gaussian";
    double sd = 1.0;
    std::vector<ArmModel> arms;
    if (const json* v = r.find("arms")) {
      ObjectReader a(ctx, *v, "/arms");
      family = a.string("family", family);
      sd = a.number("std", sd);
      const auto means = a.numbers("means");
      if (!means.empty()) arms = make_arms(ctx, "/arms", family, sd, means);
    }
    const int horizon = r.integer("horizon", 0);
    if (const json* v = r.find("cases")) {
      if (!v->is_array() || v->empty()) ctx.fail("/cases", "expected a non-empty array of cases");
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string ptr = "/cases/" + std::to_string(i);
        ObjectReader c(ctx, (*v)[i], ptr);
        CaseSpec cs;
        cs.horizon = c.integer("horizon", horizon);
        const auto means = c.numbers("means");
        cs.arms = means.empty() ? arms : make_arms(ctx, ptr, c.string("family", family), c.number("std", sd), means);
        if (cs.arms.empty()) ctx.fail(ptr, "case has no arm means");
        cs.label = c.string("label", "T=" + std::to_string(cs.horizon) + ",K=" + std::to_string(cs.arms.size()));
        if (cs.horizon < static_cast<int>(cs.arms.size())) ctx.fail(ptr, "horizon must be at least the number of arms");
        spec.cases.push_back(std::move(cs));
      }
    } else if (!arms.empty()) {
      if (horizon < static_cast<int>(arms.size())) ctx.fail("/horizon", "horizon must be at least the number of arms");
      spec.cases.push_back({"T=" + std::to_string(horizon) + ",K=" + std::to_string(arms.size()), arms, horizon});
    }

    if (const json* v = r.find("policies")) {
      if (!v->is_array() || v->empty()) ctx.fail("/policies", "expected a non-empty array of policies");
      for (std::size_t i = 0; i < v->size(); ++i)
        spec.policies.push_back(read_policy(ctx, (*v)[i], "/policies/" + std::to_string(i)));
    }
    spec.n_trials = r.integer("n_trials", spec.n_trials);
    if (spec.n_trials < 1) ctx.fail("/n_trials", "n_trials must be at least 1");
    if (r.find("cmle_trials")) {
      spec.cmle_trials = r.integer("cmle_trials", 1);
      if (*spec.cmle_trials < 1) ctx.fail("/cmle_trials", "cmle_trials must be at least 1");
    }
    spec.checkpoints = r.integers("checkpoints", {});
    spec.master_seed = r.seed("master_seed", spec.master_seed);
    if (const json* v = r.find("estimators")) {
      if (!v->is_array()) ctx.fail("/estimators", "expected an array of estimator names");
      spec.estimators.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto& e = (*v)[i];
        const std::string ptr = "/estimators/" + std::to_string(i);
        if (!e.is_string()) ctx.fail(ptr, "expected a string");
        const auto name = e.get<std::string>();
        if (name != "naive" && name != "heldout" && name != "propensity" && name != "cmle")
          ctx.fail(ptr, "unknown estimator '" + name + "'");
        spec.estimators.push_back(name);
      }
    }
    spec.gumbel_tau = r.number("gumbel_tau", spec.gumbel_tau);
    if (!(spec.gumbel_tau > 0.0)) ctx.fail("/gumbel_tau", "gumbel_tau must be positive");
    spec.cmle.tau = spec.cmle_thompson.tau = spec.gumbel_tau;
    if (const json* v = r.find("cmle")) spec.cmle = read_cmle(ctx, *v, "/cmle", spec.cmle, spec.gumbel_tau);
    if (const json* v = r.find("cmle_thompson"))
      spec.cmle_thompson = read_cmle(ctx, *v, "/cmle_thompson", spec.cmle_thompson, spec.gumbel_tau);
    if (spec.cmle.tau != spec.gumbel_tau) ctx.fail("/cmle/tau", "cmle tau must equal gumbel_tau");
    if (spec.cmle_thompson.tau != spec.gumbel_tau) ctx.fail("/cmle_thompson/tau", "cmle tau must equal gumbel_tau");
    const std::string budget = r.string("heldout_budget", "equal");
    if (budget == "equal")
      spec.heldout_budget = HeldoutBudget::Equal;
    else if (budget == "twin")
      spec.heldout_budget = HeldoutBudget::Twin;
    else
      ctx.fail("/heldout_budget", "heldout_budget must be 'equal' or 'twin'");
    spec.init_pulls = r.integer("init_pulls", spec.init_pulls);
    if (spec.init_pulls < 1) ctx.fail("/init_pulls", "init_pulls must be at least 1");
    spec.snapshot = r.integer("snapshot", spec.snapshot);
    if (const json* v = r.find("grid")) {
      ObjectReader g(ctx, *v, "/grid");
      spec.grid.size = g.integer("size", spec.grid.size);
      spec.grid.horizons = g.integers("horizons", spec.grid.horizons);
    }
    spec.threads = r.integer("threads", spec.threads);
    spec.out_dir = r.string("out_dir", spec.out_dir.string());
  }
  if (spec.policies.empty()) spec.policies.push_back(PolicyConfig::greedy());
  try {
    spec.validate();
  } catch (const Error& e) {
    ctx.fail("", e.what(), e.code());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec(buf.str(), path.string());
}

json spec_to_json(const ExperimentSpec& spec) {
  json j;
  json cases = json::array();
  for (const auto& c : spec.cases)
    cases.push_back({{"label", c.label}, {"arms", arms_to_json(c.arms)}, {"horizon", c.horizon}});
  j["cases"] = cases;
  json policies = json::array();
  for (const auto& p : spec.policies) policies.push_back(policy_to_json(p));
  j["policies"] = policies;
  j["n_trials"] = spec.n_trials;
  j["cmle_trials"] = spec.effective_cmle_trials();
  j["checkpoints"] = spec.checkpoints;
  j["master_seed"] = spec.master_seed;
  j["estimators"] = spec.estimators;
  j["cmle"] = cmle_config_to_json(spec.cmle);
  j["cmle_thompson"] = cmle_config_to_json(spec.cmle_thompson);
  j["gumbel_tau"] = spec.gumbel_tau;
  j["heldout_budget"] = spec.heldout_budget == HeldoutBudget::Equal ? "equal" : "twin";
  j["init_pulls"] = spec.init_pulls;
  j["snapshot"] = spec.snapshot;
  j["grid"] = {{"size", spec.grid.size}, {"horizons", spec.grid.horizons}};
  return j;
}

std::string spec_hash(const ExperimentSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : spec_to_json(spec).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace negbias
