#ifndef DMAC_INFOTHEORY_HPP
#define DMAC_INFOTHEORY_HPP

#include <span>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"

namespace dmac {

// Dense joint distribution over (X_1..X_K, Y), user 0 slowest and the
// output fastest, in linear probability domain.
struct JointDistribution {
  std::vector<int> input_sizes;
  int output_size = 0;
  std::vector<double> p;

  MixedRadix input_radix() const { return MixedRadix(input_sizes); }
  double prob(long long x_index, int y) const {
    return p.at(x_index * output_size + y);
  }
  double total_mass() const;
};

// P(x, y) = P(y | x, g0(g)) * prod_k P_{g_k}(x_k) for the option picks
// in g. Inputs are independent across users by construction.
JointDistribution build_joint(const ChannelModel& channel,
                              const CodeEnsemble& ensemble,
                              const CodeIndexVector& g);

// I(X_A; Y | X_C) in nats from the joint tensor, with 0 log 0 = 0. A and
// C must be disjoint; users outside A and C are marginalized out. Values
// are clamped to be nonnegative (tiny negative rounding residue only).
double conditional_mi(const JointDistribution& joint, UserSet a, UserSet c);

// One rate inequality sum_{k in tilde} r_k < I(X_tilde; Y | X_complement)
// examined while testing membership. slack = mutual_info - rate_sum.
struct RateInequality {
  UserSet tilde = 0;
  double rate_sum = 0.0;
  double mutual_info = 0.0;
  double slack = 0.0;
  bool holds = false;
};

// For one bound subset S: either the sub-subset that satisfied the
// inequality, or every candidate examined with its slack.
struct SubsetWitness {
  UserSet subset = 0;
  bool satisfied = false;
  RateInequality chosen;                 // valid when satisfied
  std::vector<RateInequality> rejected;  // all candidates when not
};

struct RegionVerdict {
  bool member = true;
  std::vector<SubsetWitness> witnesses;
};

// Membership of g's rate point in the region where `user` is decodable
// regardless of coordination: for every S containing the user there must
// be a sub-subset T (user in T, T ⊆ S) with sum of rates strictly below
// I(X_T; Y | X_{S complement}). `slack` tightens every inequality to
// rate_sum < mutual_info - slack.
RegionVerdict in_cd_user(const ChannelModel& channel,
                         const CodeEnsemble& ensemble,
                         const CodeIndexVector& g, int user,
                         double slack = 0.0);

// Region where the whole group s0 is decodable: for every S meeting s0
// there must be a T with (S ∩ s0) ⊆ T ⊆ S satisfying the inequality.
RegionVerdict in_cd_subset(const ChannelModel& channel,
                           const CodeEnsemble& ensemble,
                           const CodeIndexVector& g, UserSet s0,
                           double slack = 0.0);

// Same predicate computed as the intersection of the per-user regions
// over s0; kept as an independent route for cross-checking.
RegionVerdict in_cd_subset_intersection(const ChannelModel& channel,
                                        const CodeEnsemble& ensemble,
                                        const CodeIndexVector& g, UserSet s0,
                                        double slack = 0.0);

// Region where everyone is decodable: for every nonempty S, the summed
// rates of S stay strictly below I(X_S; Y | X_{S complement}).
RegionVerdict in_cd_all(const ChannelModel& channel,
                        const CodeEnsemble& ensemble,
                        const CodeIndexVector& g, double slack = 0.0);

// Classical coordinated capacity region at a fixed input product
// distribution: sum_{k in S} r_k <= I(X_S; Y | X_complement) for every
// nonempty S (non-strict boundary). No interferer: pick the g0 slice.
bool shannon_polymatroid_check(const ChannelModel& channel, int g0,
                               const std::vector<std::vector<double>>& input_dists,
                               std::span<const double> rates,
                               double slack = 0.0);

// Closed-form power-constrained region for the scalar Gaussian adder
// channel: sum_{k in S} r_k <= 0.5 log(1 + sum_{k in S} P_k / N0) nats
// for every nonempty S. Throws on N0 <= 0 or negative rates/powers.
bool gaussian_region_check(std::span<const double> powers,
                           double noise_variance,
                           std::span<const double> rates);

}  // namespace dmac

#endif
