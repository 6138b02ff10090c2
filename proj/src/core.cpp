#include <algorithm>
#include "negbias/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace negbias {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UndefinedMean: return "UndefinedMean";
    case ErrorCode::NonpositiveLogArgument: return "NonpositiveLogArgument";
    case ErrorCode::HardMaxUndifferentiable: return "HardMaxUndifferentiable";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::SplitMissing: return "SplitMissing";
    case ErrorCode::ZeroPropensity: return "ZeroPropensity";
    case ErrorCode::HardMaxTrace: return "HardMaxTrace";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::MissingPosteriorDraws: return "MissingPosteriorDraws";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
  }
  return "Unknown";
}

ArmModel ArmModel::gaussian(double mean, double obs_std) {
  ArmModel arm{ArmFamily::Gaussian, mean, obs_std};
  arm.validate();
  return arm;
}

ArmModel ArmModel::bernoulli(double p) {
  ArmModel arm{ArmFamily::Bernoulli, p, 0.0};
  arm.validate();
  return arm;
}

void ArmModel::validate() const {
  if (!std::isfinite(mean)) throw Error(ErrorCode::InvalidConfig, "arm mean must be finite");
  if (family == ArmFamily::Bernoulli && (mean < 0.0 || mean > 1.0))
    throw Error(ErrorCode::InvalidConfig, "Bernoulli mean must lie in [0, 1]");
  if (family == ArmFamily::Gaussian && !(obs_std > 0.0 && std::isfinite(obs_std)))
    throw Error(ErrorCode::InvalidConfig, "Gaussian obs_std must be positive");
}

std::vector<ArmModel> gaussian_arms(std::span<const double> means, double obs_std) {
  std::vector<ArmModel> arms;
  arms.reserve(means.size());
  for (double m : means) arms.push_back(ArmModel::gaussian(m, obs_std));
  return arms;
}

std::vector<ArmModel> bernoulli_arms(std::span<const double> means) {
  std::vector<ArmModel> arms;
  arms.reserve(means.size());
  for (double m : means) arms.push_back(ArmModel::bernoulli(m));
  return arms;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t trial_index, StreamPurpose purpose) {
  std::uint64_t state = master_seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ trial_index;
  h = splitmix64(state);
  state = h ^ static_cast<std::uint64_t>(purpose);
  return splitmix64(state);
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t trial_index, StreamPurpose purpose)
    : master_seed_(master_seed), trial_index_(trial_index), purpose_(purpose) {
  std::uint64_t s = derive_seed(master_seed, trial_index, purpose);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(trial_index), static_cast<std::uint32_t>(purpose)};
  engine_.seed(seq);
}

double RngStream::uniform() {
  // 53 random bits, exactly representable.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::gumbel(double tau) {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -tau * std::log(-std::log(u)) - tau * kEulerGamma;
}

int RngStream::uniform_int(int n) {
  std::uniform_int_distribution<int> dist(0, n - 1);
  return dist(engine_);
}

double draw_sample(const ArmModel& arm, RngStream& stream) {
  switch (arm.family) {
    case ArmFamily::Gaussian:
      return stream.normal(arm.mean, arm.obs_std);
    case ArmFamily::Bernoulli:
      return stream.uniform() < arm.mean ? 1.0 : 0.0;
  }
  return 0.0;
}

int Trace::count(int arm, int t) const {
  int n = 0;
  for (int r = 0; r < t && r < static_cast<int>(selections.size()); ++r)
    if (selections[r] == arm) ++n;
  return n;
}

std::vector<int> Trace::counts(int t) const {
  std::vector<int> n(arms.size(), 0);
  for (int r = 0; r < t && r < static_cast<int>(selections.size()); ++r) ++n[selections[r]];
  return n;
}

std::vector<std::vector<int>> Trace::draw_rounds() const {
  std::vector<std::vector<int>> rounds(arms.size());
  for (int r = 0; r < static_cast<int>(selections.size()); ++r) rounds[selections[r]].push_back(r + 1);
  return rounds;
}

void Trace::validate() const {
  const int K = num_arms();
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::MalformedTrace, msg); };
  if (K < 1) fail("trace has no arms");
  if (horizon < K) fail("horizon must be at least the number of arms");
  if (static_cast<int>(selections.size()) != horizon) fail("selection sequence length differs from horizon");
  if (static_cast<int>(samples.size()) != K) fail("samples must hold one list per arm");
  std::vector<int> n(K, 0);
  for (int s : selections) {
    if (s < 0 || s >= K) fail("selection index out of range");
    ++n[s];
  }
  for (int k = 0; k < K; ++k)
    if (static_cast<int>(samples[k].size()) != n[k]) fail("arm sample count differs from its selection count");
  if (init_pulls < 1) fail("init_pulls must be at least 1");
  for (int t = 0; t < std::min(horizon, K * init_pulls); ++t)
    if (selections[t] != t % K) fail("initial rounds must be round-robin");
  const std::size_t rows = static_cast<std::size_t>(horizon - K);
  if (!decision_stats.empty() && decision_stats.size() != rows) fail("decision_stats must have T - K rows");
  for (const auto& row : decision_stats)
    if (static_cast<int>(row.size()) != K) fail("decision_stats row width differs from K");
  if (!gumbel_draws.empty() && gumbel_draws.size() != rows) fail("gumbel_draws must have T - K rows");
  for (const auto& row : gumbel_draws)
    if (static_cast<int>(row.size()) != K) fail("gumbel_draws row width differs from K");
  if (split) {
    if (static_cast<int>(held_out.size()) != K) fail("held_out must hold one list per arm");
    for (int k = 0; k < K; ++k)
      if (held_out[k].size() != samples[k].size()) fail("held-out twins must pair with samples");
  }
}

double sample_mean(const Trace& trace, int arm, int t) {
  const int n = trace.count(arm, t);
  if (n == 0) {
    std::ostringstream os;
    os << "arm " << arm << " has no samples by round " << t;
    throw Error(ErrorCode::UndefinedMean, os.str());
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += trace.samples[arm][i];
  return sum / n;
}

ArmSummary summarize(const Trace& trace, int t) {
  ArmSummary s;
  s.counts = trace.counts(t);
  s.means.assign(trace.arms.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < trace.arms.size(); ++k) {
    if (s.counts[k] == 0) continue;
    double sum = 0.0;
    for (int i = 0; i < s.counts[k]; ++i) sum += trace.samples[k][i];
    s.means[k] = sum / s.counts[k];
  }
  return s;
}

}  // namespace negbias
