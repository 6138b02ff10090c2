#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "negbias/policies.hpp"

namespace negbias {

/// Per-arm sample histories Lambda_t.
using History = std::vector<std::vector<double>>;

/// A selection function f(Lambda_t, omega) with omega pinned.
using SelectionRule = std::function<int(const History&, const SelectionNoise&)>;
/// The law of f(Lambda_t, .) over arms within each branch of omega: the
/// exploit and uniform branches of epsilon-greedy, a single law otherwise.
using BranchLaws = std::vector<std::vector<double>>;
using DistributionRule = std::function<BranchLaws(const History&)>;

/// Adapters for index policies (Greedy, EpsGreedy, LilUCB, with or without Gumbel).
SelectionRule make_selection_rule(const PolicyConfig& config);
DistributionRule make_distribution_rule(const PolicyConfig& config);

/// Random history generator for the property checks.
struct InstanceGenerator {
  int min_arms = 2;
  int max_arms = 5;
  int max_samples = 6;
  double value_scale = 1.0;
  // With probability tie_fraction values are snapped to a coarse grid so ties occur.
  double tie_fraction = 0.3;
  std::uint64_t seed = 1;
};

struct Counterexample {
  int arm = 0;
  History first;
  History second;
  SelectionNoise noise;
  std::string detail;
};

struct PropertyReport {
  bool passed = true;
  int instances = 0;
  int non_vacuous = 0;  // instances where the premise held
  std::optional<Counterexample> counterexample;

  std::string summary() const;
};

/// Exploit: if arm k wins with the lower-mean history it must also win with
/// any equal-length history of higher mean, the rest of the history and omega fixed.
PropertyReport check_exploit(const SelectionRule& rule, const InstanceGenerator& gen, int n_instances);

/// IIO: P[f = i | f != k] is unchanged when only arm k's history changes,
/// checked within every branch where f != k has positive probability.
PropertyReport check_iio(const DistributionRule& rule, const InstanceGenerator& gen, int n_instances);

}  // namespace negbias
