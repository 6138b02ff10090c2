#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "negbias/cmle.hpp"
#include "negbias/experiment.hpp"
#include "negbias/policies.hpp"
#include "negbias/properties.hpp"
#include "negbias/simulate.hpp"

using namespace negbias;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
};

int g_threads = 1;
int g_failures = 0;

ExperimentSpec config(const std::string& name) {
  ExperimentSpec s = load_spec(fs::path(NEGBIAS_CONFIG_DIR) / name);
  s.threads = g_threads;
  return s;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

void report(const std::string& id, const std::string& title, const std::function<void(Outcome&)>& body,
            bool counted = true) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass && counted) ++g_failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << "  " << title << " |" << o.detail.str() << " ["
            << fmt(secs, 1) << " s]" << std::endl;
}

// Central differences of f at x.
std::vector<double> central_difference(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

const std::vector<double> kFiveArmMeans{1.0, 0.75, 0.5, 0.38, 0.25};

std::vector<PolicyConfig> four_policies() {
  return {PolicyConfig::greedy(), PolicyConfig::eps_greedy(0.1), PolicyConfig::lil_ucb(),
          PolicyConfig::thompson({0.0, 25.0})};
}

void analytic_exactness(Outcome& o) {
  double worst = 0.0;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const double m1 = i / 40.0, m2 = j / 40.0;
      const ExactBias b = enumerate_bernoulli_exact(m1, m2, PolicyConfig::greedy(), 3);
      worst = std::max(worst, std::abs(b.bias1 + 0.5 * m1 * (1 - m1) * m2));
      worst = std::max(worst, std::abs(b.bias2 + 0.5 * m2 * (1 - m2) * (1 - m1)));
    }
  o.pass = worst < 1e-12;
  o.detail << " max residual " << worst << " (tol 1e-12)";
}

void negative_bias(Outcome& o) {
  const auto arms = gaussian_arms(kFiveArmMeans);
  CampaignOptions opt;
  opt.threads = g_threads;
  for (const auto& p : four_policies()) {
    const auto rep = run_campaign(arms, p, 100, 10000, 20190102, opt);
    double worst_z = -1e9;
    for (const auto& a : rep.at(100).arms) worst_z = std::max(worst_z, a.bias / a.se);
    if (worst_z > 3.0) o.pass = false;
    o.detail << " " << p.label() << " max z " << fmt(worst_z, 2) << ";";
  }
}

void joint_bias_fractions(Outcome& o) {
  const ExperimentSpec s = config("joint_bias_k5.json");
  const std::vector<std::vector<double>> reference{{0.02, 0.09, 0.23, 0.34, 0.24, 0.08},
                                               {0.01, 0.05, 0.21, 0.36, 0.30, 0.08},
                                               {0.02, 0.12, 0.27, 0.33, 0.21, 0.05},
                                               {0.01, 0.08, 0.24, 0.34, 0.26, 0.07}};
  CampaignOptions opt;
  opt.threads = g_threads;
  opt.init_pulls = s.init_pulls;
  const auto& c = s.cases.at(0);
  o.detail << " init_pulls " << s.init_pulls << ";";
  for (std::size_t i = 0; i < s.policies.size(); ++i) {
    const auto rep = run_campaign(c.arms, s.policies[i], c.horizon, s.n_trials, s.master_seed, opt);
    const auto& f = rep.at(c.horizon).joint_bias;
    double dev = 0.0;
    for (std::size_t m = 0; m < f.size(); ++m) dev = std::max(dev, std::abs(f[m] - reference[i][m]));
    const bool ok = dev <= 0.03;
    o.pass = o.pass && ok;
    o.detail << " " << s.policies[i].label() << " (";
    for (std::size_t m = 0; m < f.size(); ++m) o.detail << (m ? "," : "") << fmt(f[m], 3);
    o.detail << ") dev " << fmt(dev, 3) << (ok ? "" : " OUT") << ";";
  }
}

// Reference orig values, rows T=8,K=2 / T=16,K=2 / T=20,K=5 / T=40,K=5.
double reference_orig(const std::string& policy, std::size_t row) {
  static const std::vector<double> lil{-0.26, -0.29, -0.32, -0.35}, eps{-0.25, -0.25, -0.31, -0.27},
      greedy{-0.29, -0.32, -0.35, -0.37};
  if (policy == "lil_ucb") return lil.at(row);
  if (policy.rfind("eps_greedy", 0) == 0) return eps.at(row);
  return greedy.at(row);
}

std::vector<DebiasCell> g_debias;

const std::vector<DebiasCell>& debias_cells() {
  if (g_debias.empty()) {
    ExperimentSpec s = config("debias_small_horizon.json");
    s.cmle_trials = 500;
    g_debias = run_debias(s);
  }
  return g_debias;
}

std::size_t row_of(const std::string& label) {
  static const std::vector<std::string> rows{"T=8,K=2", "T=16,K=2", "T=20,K=5", "T=40,K=5"};
  return std::find(rows.begin(), rows.end(), label) - rows.begin();
}

void naive_bias_grid(Outcome& o) {
  for (const auto& cell : debias_cells()) {
    const double ours = cell.find("naive")->pooled_bias;
    const double ref = reference_orig(cell.policy.label(), row_of(cell.case_label));
    const bool ok = std::abs(ours - ref) <= 0.03;
    o.pass = o.pass && ok;
    o.detail << " " << cell.case_label << " " << cell.policy.label() << " " << fmt(ours) << " vs " << fmt(ref, 2)
             << (ok ? "" : " OUT") << ";";
  }
}

// Mean over arms of |bias|, so per-arm errors of opposite sign do not cancel.
double mean_abs_bias(const MethodSummary& m) {
  double sum = 0.0;
  for (double b : m.bias) sum += std::abs(b);
  return sum / static_cast<double>(m.bias.size());
}

void cmle_reduction(Outcome& o) {
  for (const auto& cell : debias_cells()) {
    const double ratio = mean_abs_bias(*cell.find("cmle")) / mean_abs_bias(*cell.find("naive"));
    const bool ok = ratio <= 0.30;
    o.pass = o.pass && ok;
    o.detail << " " << cell.case_label << " " << cell.policy.label() << " " << fmt(100 * ratio, 1) << "%"
             << (ok ? "" : " OUT") << ";";
  }
  ExperimentSpec s = config("debias_greedy_t1000.json");
  s.estimators = {"naive", "cmle"};
  for (const auto& cell : run_debias(s)) {
    const auto* naive = cell.find("naive");
    const auto* cmle = cell.find("cmle");
    const double bias = mean_abs_bias(*cmle) / mean_abs_bias(*naive);
    const double mse = cmle->pooled_mse / naive->pooled_mse;
    const bool ok = bias <= 0.10 && mse <= 0.05;
    o.pass = o.pass && ok;
    o.detail << " T=1000 " << cell.case_label << " orig " << fmt(naive->pooled_bias) << " bias " << fmt(100 * bias, 1)
             << "% mse " << fmt(100 * mse, 1) << "% (" << cmle->trials << " fits)" << (ok ? "" : " OUT") << ";";
  }
}

void mse_ordering(Outcome& o) {
  for (const auto& cell : debias_cells()) {
    const double naive = cell.find("naive")->pooled_mse;
    const double held = cell.find("heldout")->pooled_mse / naive;
    const bool held_ok = held >= 0.95 && held <= 1.40;
    o.pass = o.pass && held_ok;
    o.detail << " " << cell.case_label << " " << cell.policy.label() << " held " << fmt(100 * held, 0) << "%"
             << (held_ok ? "" : " OUT");
    const bool ordered_row = cell.case_label == "T=16,K=2" || cell.case_label == "T=40,K=5";
    if (ordered_row && cell.policy.kind == PolicyKind::EpsGreedy) {
      const double cmle = cell.find("cmle")->pooled_mse, heldout = cell.find("heldout")->pooled_mse,
                   prop = cell.find("propensity")->pooled_mse;
      const bool ok = cmle < naive && naive < heldout && heldout < prop;
      o.pass = o.pass && ok;
      o.detail << " order cmle " << fmt(cmle) << " < naive " << fmt(naive) << " < held " << fmt(heldout)
               << " < prop " << fmt(prop) << (ok ? "" : " OUT");
    }
    o.detail << ";";
  }
}

void baseline_unbiasedness(Outcome& o) {
  ExperimentSpec s = config("debias_small_horizon.json");
  s.n_trials = 10000;
  s.estimators = {"naive", "heldout", "propensity"};
  int tests = 0;
  double worst = 0.0;
  std::string where;
  for (const auto& cell : run_debias(s))
    for (const char* method : {"heldout", "propensity"}) {
      const auto* m = cell.find(method);
      if (!m) continue;
      for (std::size_t k = 0; k < m->bias.size(); ++k) {
        ++tests;
        const double z = std::abs(m->bias[k]) / m->se[k];
        if (z > worst) {
          worst = z;
          where = cell.case_label + " " + cell.policy.label() + " " + method + " arm " + std::to_string(k + 1);
        }
      }
    }
  o.pass = worst < 4.0;
  o.detail << " " << tests << " per-arm z-tests, max |z| " << fmt(worst, 2) << " at " << where;
}

void gumbel_max(Outcome& o) {
  const std::vector<double> u{2.0, 1.0, 0.0};
  // Independent oracle: exp(u_k) / sum exp(u_i) evaluated directly.
  const double z = std::exp(2.0) + std::exp(1.0) + 1.0;
  const std::vector<double> oracle{std::exp(2.0) / z, std::exp(1.0) / z, 1.0 / z};
  const std::vector<double> expected{0.6652, 0.2447, 0.0900};
  const auto config = PolicyConfig::greedy().with_gumbel(1.0);
  const auto closed = selection_distribution(u, config);
  RngStream s(20190601, 0, StreamPurpose::GumbelNoise);
  const int n = 100000;
  std::vector<int> hits(3, 0);
  for (int i = 0; i < n; ++i) ++hits[select_with_noise(u, config, draw_selection_noise(config, 3, s))];
  double worst_z = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(closed[k] * (1 - closed[k]) / n);
    worst_z = std::max(worst_z, std::abs(hits[k] / double(n) - closed[k]) / se);
    if (std::abs(closed[k] - oracle[k]) > 1e-12 || std::abs(closed[k] - expected[k]) > 5e-5) o.pass = false;
  }
  o.pass = o.pass && worst_z < 4.0;
  o.detail << " closed (" << fmt(closed[0], 4) << "," << fmt(closed[1], 4) << "," << fmt(closed[2], 4)
           << "), empirical max dev " << fmt(worst_z, 2) << " SE";
}

void gradient_checks(Outcome& o) {
  double worst = 0.0;
  const std::vector<double> theta{0.4, 1.1, -0.2};
  for (const auto& p : {PolicyConfig::greedy(), PolicyConfig::eps_greedy(0.1), PolicyConfig::lil_ucb(),
                        PolicyConfig::thompson()}) {
    const Trace t = run_trial(gaussian_arms(std::vector<double>{1.0, 0.75, 0.5}), p.with_gumbel(1.0), 20, 3, 7);
    CmleConfig c;
    const auto f = [&](const std::vector<double>& th) { return conditional_loglik_unnormalized(t, th, c); };
    const auto fd = central_difference(f, theta, 1e-5);
    const auto g = p.kind == PolicyKind::Thompson ? thompson_conditional_loglik_gradient(t, theta)
                                                  : conditional_loglik_gradient(t, theta);
    for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(g[k] - fd[k]) / std::max(1.0, std::abs(fd[k])));
  }
  o.pass = worst < 1e-6;
  o.detail << " max relative error " << worst << " (tol 1e-6) over Gaussian and Thompson objectives";
}

void mh_correctness(Outcome& o) {
  // Detailed balance on three discretized values of one site.
  const Trace t = run_trial(gaussian_arms(std::vector<double>{1.0, 0.75}), PolicyConfig::eps_greedy(0.1).with_gumbel(1.0),
                            6, 12, 0);
  CmleConfig c;
  const std::vector<double> theta{0.8, 0.6};
  const std::vector<double> states{-0.7, 0.4, 1.9};
  double worst_db = 0.0;
  for (int site = 0; site < t.horizon; ++site) {
    const int k = t.selections[site];
    ConditionalSampler chain(t, c);
    chain.set_theta(theta);
    std::vector<double> pi(3), q(3);
    for (int i = 0; i < 3; ++i) {
      chain.set_value(site, states[i]);
      const double d = states[i] - theta[k];
      q[i] = std::exp(-0.5 * d * d);
      pi[i] = q[i] * std::exp(chain.log_selection_factor());
    }
    const double qz = std::accumulate(q.begin(), q.end(), 0.0), pz = std::accumulate(pi.begin(), pi.end(), 0.0);
    std::vector<std::vector<double>> P(3, std::vector<double>(3, 0.0));
    for (int i = 0; i < 3; ++i) {
      chain.set_value(site, states[i]);
      for (int j = 0; j < 3; ++j)
        if (i != j) P[i][j] = q[j] / qz * std::min(1.0, std::exp(chain.log_acceptance_ratio(site, states[j])));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) worst_db = std::max(worst_db, std::abs(pi[i] / pz * P[i][j] - pi[j] / pz * P[j][i]));
  }

  // Rejection oracle on K=2, T=4: fresh trials kept when the selection sequence matches.
  const std::vector<double> mu{1.0, 0.75};
  const auto arms = gaussian_arms(mu);
  const auto policy = PolicyConfig::greedy().with_gumbel(1.0);
  const int T = 4;
  const Trace observed = run_trial(arms, policy, T, 3, 0);
  std::vector<double> rsum(T, 0.0), rsq(T, 0.0);
  long hits = 0;
  for (long i = 0; hits < 100000; ++i) {
    const Trace r = run_trial(arms, policy, T, 11, i);
    if (r.selections != observed.selections) continue;
    ++hits;
    std::vector<int> taken(2, 0);
    for (int s = 0; s < T; ++s) {
      const int k = r.selections[s];
      const double x = r.samples[k][taken[k]++];
      rsum[s] += x;
      rsq[s] += x * x;
    }
  }
  ConditionalSampler chain(observed, c);
  chain.set_theta(mu);
  RngStream s(5, 0, StreamPurpose::Mcmc);
  for (int i = 0; i < 1000; ++i) chain.step(s);
  const int batches = 100, per_batch = 1000;
  std::vector<std::vector<double>> bm(T, std::vector<double>(batches, 0.0));
  for (int b = 0; b < batches; ++b)
    for (int i = 0; i < per_batch; ++i) {
      chain.step(s);
      for (int site = 0; site < T; ++site) bm[site][b] += chain.value(site) / per_batch;
    }
  double worst_z = 0.0;
  for (int site = 0; site < T; ++site) {
    const double rmean = rsum[site] / hits;
    const double rse2 = (rsq[site] / hits - rmean * rmean) / hits;
    const double mmean = std::accumulate(bm[site].begin(), bm[site].end(), 0.0) / batches;
    double v = 0.0;
    for (double x : bm[site]) v += (x - mmean) * (x - mmean);
    const double mse2 = v / (batches - 1) / batches;
    worst_z = std::max(worst_z, std::abs(rmean - mmean) / std::sqrt(rse2 + mse2));
  }
  o.pass = worst_db < 1e-10 && worst_z < 4.0;
  o.detail << " detailed-balance max violation " << worst_db << " (tol 1e-10); rejection vs MH max |z| "
           << fmt(worst_z, 2) << " over " << T << " sites";
}

void properties(Outcome& o) {
  InstanceGenerator gen;
  gen.seed = 20190701;
  for (const auto& p : {PolicyConfig::greedy(), PolicyConfig::eps_greedy(0.1), PolicyConfig::lil_ucb()}) {
    const auto e = check_exploit(make_selection_rule(p), gen, 10000);
    const auto i = check_iio(make_distribution_rule(p), gen, 10000);
    o.pass = o.pass && e.passed && i.passed;
    o.detail << " " << p.label() << " exploit " << e.summary() << ", iio " << i.summary() << ";";
  }
  SelectionRule lowest = [](const History& h, const SelectionNoise&) {
    int best = 0;
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
    for (int k = 1; k < static_cast<int>(h.size()); ++k)
      if (mean(h[k]) < mean(h[best])) best = k;
    return best;
  };
  DistributionRule coupled = [](const History& h) {
    std::vector<double> w(h.size());
    double total = 0.0;
    for (const auto& v : h) total += std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    for (std::size_t k = 0; k < h.size(); ++k)
      w[k] = std::exp(std::accumulate(h[k].begin(), h[k].end(), 0.0) / h[k].size()) + (k == 0 ? total * total : 0.0);
    const double z = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto& x : w) x /= z;
    return BranchLaws{w};
  };
  const bool caught = !check_exploit(lowest, gen, 10000).passed && !check_iio(coupled, gen, 10000).passed;
  o.pass = o.pass && caught;
  o.detail << " planted violators " << (caught ? "rejected" : "MISSED");
}

std::map<std::string, std::string> read_outputs(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[entry.path().filename().string()] = s.str();
  }
  return files;
}

void determinism(Outcome& o) {
  const fs::path root = fs::temp_directory_path() / "negbias_acceptance_determinism";
  fs::remove_all(root);
  struct Job {
    const char* name;
    CommandResult (*run)(const ExperimentSpec&);
    std::function<void(ExperimentSpec&)> shrink;
  };
  const std::vector<Job> jobs{
      {"bias-curves", cmd_bias_curves, [](ExperimentSpec& s) { s = config("bias_curves_lilucb.json"); s.n_trials = 200; }},
      {"joint-bias", cmd_joint_bias, [](ExperimentSpec& s) { s = config("joint_bias_k5.json"); s.n_trials = 300; }},
      {"debias", cmd_debias,
       [](ExperimentSpec& s) {
         s = config("debias_small_horizon.json");
         s.n_trials = 60;
         s.cmle_trials = 6;
         s.cmle.n_gd_iters = 50;
       }},
      {"debias-thompson", cmd_debias,
       [](ExperimentSpec& s) {
         s = config("debias_thompson.json");
         s.cases.resize(1);
         s.n_trials = 40;
         s.cmle_trials = 4;
         s.cmle_thompson.n_gd_iters = 30;
       }},
      {"analytic-check", cmd_analytic_check, [](ExperimentSpec& s) { s = config("analytic_bernoulli.json"); s.grid.size = 11; }},
      {"scatter", cmd_scatter, [](ExperimentSpec& s) { s = config("scatter_lilucb.json"); s.n_trials = 200; }},
  };
  const int many = std::max(4, g_threads);
  for (const auto& job : jobs) {
    std::map<std::string, std::string> outputs[2];
    for (int pass = 0; pass < 2; ++pass) {
      ExperimentSpec s;
      job.shrink(s);
      s.threads = pass == 0 ? 1 : many;
      s.out_dir = root / job.name / std::to_string(s.threads);
      job.run(s);
      outputs[pass] = read_outputs(s.out_dir);
    }
    const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
    o.pass = o.pass && same;
    o.detail << " " << job.name << " " << outputs[0].size() << " files " << (same ? "identical" : "DIFFER") << ";";
  }
  o.detail << " threads 1 vs " << many;
  fs::remove_all(root);
}

void thompson_debias(Outcome& o) {
  ExperimentSpec s = config("debias_thompson.json");
  s.cases.resize(1);
  s.estimators = {"naive", "cmle"};
  const auto cells = run_debias(s);
  const auto& cell = cells.at(0);
  const double orig = cell.find("naive")->pooled_bias, cmle = cell.find("cmle")->pooled_bias;
  const double ratio = mean_abs_bias(*cell.find("cmle")) / mean_abs_bias(*cell.find("naive"));
  o.pass = std::abs(orig + 0.19) <= 0.03 && ratio <= 0.5;
  o.detail << " T=24,K=2 orig " << fmt(orig) << " (reference -0.19), cMLE bias " << fmt(cmle) << " = "
           << fmt(100 * cmle / orig, 1) << "% of orig (|.| <= 50%), " << cell.find("cmle")->trials << " fits";
}

void curve_shapes(Outcome& o) {
  CampaignOptions opt;
  opt.threads = g_threads;
  for (int t = 3; t <= 500; ++t) opt.checkpoints.push_back(t);
  const ExperimentSpec a = config("bias_curves_lilucb.json");
  const auto ra = run_campaign(a.cases[0].arms, a.policies[0], 500, a.n_trials, a.master_seed, opt);
  double worst_z = -1e9;
  for (const auto& c : ra.checkpoints)
    if (c.round > 3 + 5)
      for (const auto& arm : c.arms) worst_z = std::max(worst_z, arm.bias / arm.se);
  const ExperimentSpec b = config("bias_curves_lilucb_scaled.json");
  opt.checkpoints = {500};
  const auto rb = run_campaign(b.cases[0].arms, b.policies[0], 500, b.n_trials, b.master_seed, opt);
  const double best = rb.at(500).arms[0].bias;
  const ExperimentSpec e = config("scatter_lilucb.json");
  const auto pts = future_samples_scatter(e.cases[0].arms, e.policies[0], e.snapshot, e.cases[0].horizon, e.n_trials,
                                          e.master_seed, g_threads);
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(p.snapshot_bias);
    y.push_back(p.future_count);
  }
  const double r = pearson_correlation(x, y);
  o.pass = worst_z <= 3.0 && std::abs(best) < 0.02 && r > 0.0;
  o.detail << " lil' UCB curves max z beyond K+5 " << fmt(worst_z, 2) << " (<= 3); scale-3 best-arm bias at T=500 "
           << fmt(best, 4) << " (|.| < 0.02); snapshot-bias vs future-draws r = " << fmt(r, 3)
           << " (> 0: negative bias goes with fewer future draws)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  g_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::set<std::string> only;
  bool extras = true;
  app.add_option("--threads", g_threads, "Worker threads");
  app.add_option("--only", only, "Run only these criterion ids");
  app.add_flag("!--no-extras", extras, "Skip the supplementary checks");
  CLI11_PARSE(app, argc, argv);

  auto want = [&](const std::string& id) { return only.empty() || only.count(id); };
  struct Criterion {
    std::string id, title;
    void (*body)(Outcome&);
  };
  const std::vector<Criterion> criteria{
      {"1", "analytic exactness, T=3 enumeration vs closed forms on a 41x41 grid", analytic_exactness},
      {"2", "negative bias, four policies, K=5, T=100, 10^4 trials, every arm <= +3 SE", negative_bias},
      {"3", "joint-bias fractions within 0.03 of the reference four-policy table", joint_bias_fractions},
      {"4", "naive (orig) bias within 0.03 of the reference T/K grid, 10^3 trials", naive_bias_grid},
      {"5", "cMLE keeps <= 30% of naive bias (T<=40, 500 fits) and <= 10% bias, <= 5% MSE at T=1000", cmle_reduction},
      {"6", "MSE ordering cMLE < naive < held-out < propensity; held-out within [95%, 140%] of naive", mse_ordering},
      {"7", "held-out and propensity unbiased, 4-SE z-tests, 10^4 trials", baseline_unbiasedness},
      {"8", "Gumbel-max frequencies vs softmax, 10^5 draws, stats (2,1,0)", gumbel_max},
      {"9", "analytic vs central-difference gradients, relative error < 1e-6", gradient_checks},
      {"10", "MH detailed balance (1e-10) and rejection-sampler agreement (4 SE)", mh_correctness},
      {"11", "Exploit and IIO over 10^4 instances; planted violators rejected", properties},
      {"12", "identical outputs for 1 and N threads on every command", determinism},
  };
  std::cout << "acceptance run, " << g_threads << " thread(s)" << std::endl;
  for (const auto& c : criteria)
    if (want(c.id)) report(c.id, c.title, c.body);
  if (extras) {
    if (want("thompson")) report("extra", "Thompson T=24,K=2 cMLE residual <= 50% of orig", thompson_debias, false);
    if (want("figures")) report("extra", "bias-curve shapes and snapshot correlation sign", curve_shapes, false);
  }
  std::cout << (g_failures ? std::to_string(g_failures) + " criterion/criteria failed" : "all criteria passed")
            << std::endl;
  return g_failures ? 1 : 0;
}
