#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "negbias/estimators.hpp"
#include "negbias/experiment.hpp"
#include "negbias/io.hpp"
#include "negbias/simulate.hpp"

namespace negbias {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

enum class Collection : std::uint64_t { Heldout = 1, Gumbel = 2 };

std::uint64_t collection_seed(std::uint64_t master, Collection c) {
  return derive_seed(master, static_cast<std::uint64_t>(c), StreamPurpose::ArmDraw);
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

class CsvFile {
 public:
  CsvFile(const ExperimentSpec& spec, const std::string& command, const std::string& name, const std::string& header)
      : path_(spec.out_dir / name), out_(path_) {
    if (!out_) throw std::runtime_error("cannot write " + path_.string());
    out_ << "# negbias " << command << " spec_hash=" << spec_hash(spec) << " seed=" << spec.master_seed << '\n';
    out_ << header << '\n';
    out_ << std::setprecision(17);
  }

  template <typename... Ts>
  void row(const Ts&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << fields), ...);
    out_ << '\n';
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void prepare(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
}

std::vector<double> true_means(const std::vector<ArmModel>& arms) {
  std::vector<double> mu;
  for (const auto& a : arms) mu.push_back(a.mean);
  return mu;
}

// Per-trial estimates (rows) against the true means.
MethodSummary summarize_method(std::string method, const std::vector<std::vector<double>>& est,
                               const std::vector<double>& mu) {
  MethodSummary m;
  m.method = std::move(method);
  m.trials = static_cast<int>(est.size());
  const std::size_t K = mu.size();
  const double n = static_cast<double>(est.size());
  m.bias.assign(K, 0.0);
  m.se.assign(K, 0.0);
  m.mse.assign(K, 0.0);
  std::vector<double> pooled(est.size(), 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const double d = est[i][k] - mu[k];
      s += d;
      ss += d * d;
      pooled[i] += d / K;
    }
    m.bias[k] = s / n;
    m.mse[k] = ss / n;
    const double var = n > 1 ? (ss - n * m.bias[k] * m.bias[k]) / (n - 1) : 0.0;
    m.se[k] = std::sqrt(std::max(var, 0.0) / n);
  }
  m.pooled_bias = std::accumulate(m.bias.begin(), m.bias.end(), 0.0) / K;
  m.pooled_mse = std::accumulate(m.mse.begin(), m.mse.end(), 0.0) / K;
  double ss = 0.0;
  for (double p : pooled) ss += (p - m.pooled_bias) * (p - m.pooled_bias);
  m.pooled_bias_se = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
  return m;
}

std::string pct(double num, double den) {
  if (!std::isfinite(num) || den == 0.0) return "nan";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * num / den << "%";
  return os.str();
}

}  // namespace

const MethodSummary* DebiasCell::find(const std::string& method) const {
  for (const auto& m : methods)
    if (m.method == method) return &m;
  return nullptr;
}

CommandResult cmd_bias_curves(const ExperimentSpec& spec) {
  prepare(spec);
  CommandResult result;
  CsvFile csv(spec, "bias-curves", "bias_curves.csv", "case,policy,round,arm,bias,se,mse,n_defined");
  std::ostringstream text;
  for (const auto& c : spec.cases) {
    CampaignOptions opt;
    opt.threads = spec.threads;
    opt.init_pulls = spec.init_pulls;
    opt.checkpoints = spec.checkpoints;
    if (opt.checkpoints.empty())
      for (int t = static_cast<int>(c.arms.size()); t <= c.horizon; ++t) opt.checkpoints.push_back(t);
    for (const auto& p : spec.policies) {
      const auto report = run_campaign(c.arms, p, c.horizon, spec.n_trials, spec.master_seed, opt);
      for (const auto& cp : report.checkpoints)
        for (std::size_t k = 0; k < cp.arms.size(); ++k)
          csv.row(c.label, p.label(), cp.round, k + 1, cp.arms[k].bias, cp.arms[k].se, cp.arms[k].mse,
                  cp.arms[k].n_defined);
      const auto& last = report.checkpoints.back();
      text << c.label << " " << p.label() << " bias at T=" << last.round << ":";
      for (const auto& a : last.arms) text << " " << std::setprecision(4) << a.bias << " (" << a.se << ")";
      text << '\n';
    }
  }
  result.files.push_back(csv.path());
  result.text = text.str();
  return result;
}

CommandResult cmd_joint_bias(const ExperimentSpec& spec) {
  prepare(spec);
  CommandResult result;
  CsvFile csv(spec, "joint-bias", "joint_bias.csv", "case,policy,m,fraction");
  std::ostringstream text;
  text << std::fixed << std::setprecision(3);
  for (const auto& c : spec.cases) {
    CampaignOptions opt;
    opt.threads = spec.threads;
    opt.init_pulls = spec.init_pulls;
    opt.checkpoints = {c.horizon};
    text << c.label << ", fraction of trials with m arms below their mean\n";
    text << std::setw(24) << std::left << "policy";
    for (std::size_t m = 0; m <= c.arms.size(); ++m) text << std::setw(8) << std::right << ("m=" + std::to_string(m));
    text << '\n';
    for (const auto& p : spec.policies) {
      const auto report = run_campaign(c.arms, p, c.horizon, spec.n_trials, spec.master_seed, opt);
      const auto& f = report.checkpoints.back().joint_bias;
      text << std::setw(24) << std::left << p.label();
      for (std::size_t m = 0; m < f.size(); ++m) {
        csv.row(c.label, p.label(), m, f[m]);
        text << std::setw(8) << std::right << f[m];
      }
      text << '\n';
    }
  }
  result.files.push_back(csv.path());
  const auto txt = spec.out_dir / "joint_bias.txt";
  std::ofstream(txt) << "# negbias joint-bias spec_hash=" << spec_hash(spec) << " seed=" << spec.master_seed << '\n'
                     << text.str();
  result.files.push_back(txt);
  result.text = text.str();
  return result;
}

std::vector<DebiasCell> run_debias(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.init_pulls != 1) throw Error(ErrorCode::InvalidConfig, "debias needs init_pulls = 1");
  std::vector<DebiasCell> cells;
  for (const auto& c : spec.cases) {
    const int K = static_cast<int>(c.arms.size());
    const auto mu = true_means(c.arms);
    for (const auto& policy : spec.policies) {
      DebiasCell cell{c.label, policy, {}};
      const int n = spec.n_trials;

      std::vector<std::vector<double>> naive(n), prop;
      const bool want_prop =
          spec.wants("propensity") && (policy.kind == PolicyKind::EpsGreedy || policy.randomized());
      if (want_prop) prop.resize(n);
      parallel_for(n, spec.threads, [&](std::size_t i) {
        const Trace t = run_trial(c.arms, policy, c.horizon, spec.master_seed, i);
        naive[i] = naive_estimate(t).values;
        if (want_prop) prop[i] = propensity_estimate(t).values;
      });
      cell.methods.push_back(summarize_method("naive", naive, mu));
      if (want_prop) cell.methods.push_back(summarize_method("propensity", prop, mu));

      const int split_rounds = spec.heldout_budget == HeldoutBudget::Equal ? c.horizon / 2 : c.horizon;
      if (spec.wants("heldout") && split_rounds >= K) {
        std::vector<std::vector<double>> held(n);
        const auto seed = collection_seed(spec.master_seed, Collection::Heldout);
        parallel_for(n, spec.threads, [&](std::size_t i) {
          const Trace t = run_trial(c.arms, policy, split_rounds, seed, i, {.split = true});
          held[i] = heldout_estimate(t).values;
        });
        cell.methods.push_back(summarize_method("heldout", held, mu));
      }

      if (spec.wants("cmle")) {
        const int m = spec.effective_cmle_trials();
        const auto collected = policy.with_gumbel(spec.gumbel_tau);
        const CmleConfig base = policy.kind == PolicyKind::Thompson ? spec.cmle_thompson : spec.cmle;
        const auto seed = collection_seed(spec.master_seed, Collection::Gumbel);
        std::vector<std::vector<double>> gnaive(m), cmle(m);
        parallel_for(m, spec.threads, [&](std::size_t i) {
          const Trace t = run_trial(c.arms, collected, c.horizon, seed, i);
          gnaive[i] = naive_estimate(t).values;
          CmleConfig cfg = base;
          cfg.seed = spec.master_seed;
          cfg.trial_index = i;
          cmle[i] = cd_fit(t, cfg).theta;
        });
        cell.methods.push_back(summarize_method("naive_gumbel", gnaive, mu));
        cell.methods.push_back(summarize_method("cmle", cmle, mu));
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

CommandResult cmd_debias(const ExperimentSpec& spec) {
  prepare(spec);
  const auto cells = run_debias(spec);
  CommandResult result;
  CsvFile summary(spec, "debias", "debias_summary.csv",
                  "case,policy,method,trials,bias,bias_se,mse,bias_pct_of_naive,mse_pct_of_naive");
  CsvFile arms(spec, "debias", "debias_arms.csv", "case,policy,method,arm,bias,se,mse");
  std::ostringstream text;
  text << std::left << std::setw(12) << "case" << std::setw(24) << "policy" << std::setw(14) << "method"
       << std::setw(10) << "bias" << std::setw(10) << "bias%" << std::setw(10) << "mse" << "mse%\n";
  for (const auto& cell : cells) {
    const MethodSummary* orig = cell.find("naive");
    for (const auto& m : cell.methods) {
      const double bias_ratio = orig->pooled_bias != 0.0 ? 100.0 * m.pooled_bias / orig->pooled_bias : kNaN;
      const double mse_ratio = orig->pooled_mse != 0.0 ? 100.0 * m.pooled_mse / orig->pooled_mse : kNaN;
      summary.row(cell.case_label, cell.policy.label(), m.method, m.trials, m.pooled_bias, m.pooled_bias_se,
                  m.pooled_mse, bias_ratio, mse_ratio);
      for (std::size_t k = 0; k < m.bias.size(); ++k)
        arms.row(cell.case_label, cell.policy.label(), m.method, k + 1, m.bias[k], m.se[k], m.mse[k]);
      std::ostringstream b, e;
      b << std::fixed << std::setprecision(3) << m.pooled_bias;
      e << std::fixed << std::setprecision(3) << m.pooled_mse;
      text << std::setw(12) << cell.case_label << std::setw(24) << cell.policy.label() << std::setw(14) << m.method
           << std::setw(10) << b.str() << std::setw(10) << pct(m.pooled_bias, orig->pooled_bias) << std::setw(10)
           << e.str() << pct(m.pooled_mse, orig->pooled_mse) << '\n';
    }
  }
  result.files = {summary.path(), arms.path()};

  // One worked example per cell: trial 0's Gumbel trace, its estimates and cMLE trajectory.
  if (spec.wants("cmle")) {
    for (const auto& c : spec.cases) {
      for (const auto& policy : spec.policies) {
        Trace t = run_trial(c.arms, policy.with_gumbel(spec.gumbel_tau), c.horizon,
                            collection_seed(spec.master_seed, Collection::Gumbel), 0);
        CmleConfig cfg = policy.kind == PolicyKind::Thompson ? spec.cmle_thompson : spec.cmle;
        cfg.seed = spec.master_seed;
        cfg.trial_index = 0;
        const CmleResult fit = cd_fit(t, cfg);
        attach(t, naive_estimate(t));
        attach(t, propensity_estimate(t));
        attach(t, EstimateVector{"cmle", fit.theta, {}, {}});
        const std::string stem = slug(c.label) + "_" + slug(policy.label());
        const auto trace_path = spec.out_dir / ("trace_" + stem + ".json");
        save_trace(t, trace_path);
        const auto fit_path = spec.out_dir / ("cmle_" + stem + ".json");
        std::ofstream(fit_path) << cmle_result_to_json(fit).dump(1) << '\n';
        const auto traj_path = spec.out_dir / ("trajectory_" + stem + ".csv");
        std::ofstream traj(traj_path);
        traj << "# negbias debias spec_hash=" << spec_hash(spec) << " seed=" << spec.master_seed << '\n';
        write_trajectory_csv(traj, fit);
        result.files.insert(result.files.end(), {trace_path, fit_path, traj_path});
      }
    }
  }
  result.text = text.str();
  return result;
}

CommandResult cmd_analytic_check(const ExperimentSpec& spec) {
  prepare(spec);
  CommandResult result;
  const PolicyConfig& policy = spec.policies.front();
  const bool closed_form = policy.kind == PolicyKind::Greedy && !policy.randomized();
  const int G = spec.grid.size;
  auto grid = [G](int i) { return G == 1 ? 0.0 : static_cast<double>(i) / (G - 1); };
  CsvFile summary(spec, "analytic-check", "analytic_check.csv",
                  "horizon,points,max_abs_residual,max_bias1_interior,max_bias2_interior");
  std::ostringstream text;
  for (int h : spec.grid.horizons) {
    CsvFile heat(spec, "analytic-check", "analytic_T" + std::to_string(h) + ".csv",
                 "mu1,mu2,bias1,bias2,residual1,residual2");
    double max_res = closed_form && h == 3 ? 0.0 : kNaN;
    double max1 = -std::numeric_limits<double>::infinity(), max2 = max1;
    for (int i = 0; i < G; ++i) {
      for (int j = 0; j < G; ++j) {
        const double m1 = grid(i), m2 = grid(j);
        const ExactBias b = enumerate_bernoulli_exact(m1, m2, policy, h);
        double r1 = kNaN, r2 = kNaN;
        if (closed_form && h == 3) {
          r1 = b.bias1 - (-0.5 * m1 * (1 - m1) * m2);
          r2 = b.bias2 - (-0.5 * m2 * (1 - m2) * (1 - m1));
          max_res = std::max({max_res, std::abs(r1), std::abs(r2)});
        }
        if (m1 > 0 && m1 < 1 && m2 > 0 && m2 < 1) {
          max1 = std::max(max1, b.bias1);
          max2 = std::max(max2, b.bias2);
        }
        heat.row(m1, m2, b.bias1, b.bias2, r1, r2);
      }
    }
    summary.row(h, G * G, max_res, max1, max2);
    result.files.push_back(heat.path());
    text << "T=" << h << ": " << G * G << " grid points, max |DP - closed form| = " << max_res
         << ", max interior bias (" << max1 << ", " << max2 << ")\n";
  }
  result.files.insert(result.files.begin(), summary.path());
  result.text = text.str();
  return result;
}

CommandResult cmd_scatter(const ExperimentSpec& spec) {
  prepare(spec);
  CommandResult result;
  const auto& c = spec.cases.front();
  const auto& policy = spec.policies.front();
  if (spec.snapshot >= c.horizon)
    throw Error(ErrorCode::InvalidConfig, "snapshot must be earlier than the horizon");
  const auto points =
      future_samples_scatter(c.arms, policy, spec.snapshot, c.horizon, spec.n_trials, spec.master_seed, spec.threads,
                             spec.init_pulls);
  CsvFile csv(spec, "scatter", "scatter.csv", "trial,snapshot_bias,future_count");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < points.size(); ++i) {
    csv.row(i, points[i].snapshot_bias, points[i].future_count);
    x.push_back(points[i].snapshot_bias);
    y.push_back(points[i].future_count);
  }
  result.files.push_back(csv.path());
  std::ostringstream text;
  text << c.label << " " << policy.label() << ": " << points.size() << " trials, Pearson r = "
       << (points.size() > 1 ? pearson_correlation(x, y) : kNaN) << '\n';
  result.text = text.str();
  return result;
}

}  // namespace negbias
