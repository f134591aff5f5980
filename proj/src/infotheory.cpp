#include "dmac/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmac {

namespace {

// Packed mixed-radix index over the members of `subset` (ascending user
// order), evaluated for every full input vector once.
std::vector<long long> pack_table(const MixedRadix& radix,
                                  const std::vector<int>& sizes,
                                  UserSet subset, long long* packed_size) {
  std::vector<int> members = set_members(subset);
  long long total = 1;
  for (int k : members) total *= sizes[k];
  *packed_size = total;

  std::vector<long long> table(radix.size());
  std::vector<int> digits(sizes.size());
  for (long long x = 0; x < radix.size(); ++x) {
    radix.decode(x, digits);
    long long idx = 0;
    for (int k : members) idx = idx * sizes[k] + digits[k];
    table[x] = idx;
  }
  return table;
}

// All subsets t with lo ⊆ t ⊆ hi, ascending bitmask order.
std::vector<UserSet> subsets_between(UserSet lo, UserSet hi) {
  std::vector<UserSet> out;
  UserSet free = hi & ~lo;
  // enumerate submasks of `free` ascending by walking the packed counter
  int bits = set_size(free);
  std::vector<int> positions = set_members(free);
  for (UserSet c = 0; c < (UserSet{1} << bits); ++c) {
    UserSet t = lo;
    for (int i = 0; i < bits; ++i) {
      if ((c >> i) & 1u) t = set_with(t, positions[i]);
    }
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double rate_sum_over(const CodeEnsemble& ensemble, const CodeIndexVector& g,
                     UserSet t) {
  double sum = 0.0;
  for (int k : set_members(t)) sum += ensemble.option(k, g.options[k]).rate_nats;
  return sum;
}

}  // namespace

double JointDistribution::total_mass() const {
  double sum = 0.0;
  for (double v : p) sum += v;
  return sum;
}

JointDistribution build_joint(const ChannelModel& channel,
                              const CodeEnsemble& ensemble,
                              const CodeIndexVector& g) {
  require_vector_in_ensemble(ensemble, g);
  if (channel.num_users != ensemble.num_users())
    throw std::invalid_argument("channel and ensemble user counts differ");

  JointDistribution joint;
  joint.input_sizes = channel.input_alphabet_sizes;
  joint.output_size = channel.output_alphabet_size;

  MixedRadix radix = channel.input_radix();
  joint.p.assign(radix.size() * joint.output_size, 0.0);

  std::vector<int> digits(channel.num_users);
  for (long long x = 0; x < radix.size(); ++x) {
    radix.decode(x, digits);
    double px = 1.0;
    for (int k = 0; k < channel.num_users; ++k) {
      const auto& dist = ensemble.option(k, g.options[k]).input_dist;
      if (static_cast<int>(dist.size()) != channel.input_alphabet_sizes[k])
        throw std::invalid_argument(
            "input distribution length does not match channel alphabet");
      px *= dist[digits[k]];
    }
    if (px == 0.0) continue;
    const double* row = channel.row(g.interferer, x);
    for (int y = 0; y < joint.output_size; ++y)
      joint.p[x * joint.output_size + y] = px * row[y];
  }
  return joint;
}

double conditional_mi(const JointDistribution& joint, UserSet a, UserSet c) {
  if ((a & c) != 0)
    throw std::invalid_argument("subsets must be disjoint for conditional MI");
  int num_users = static_cast<int>(joint.input_sizes.size());
  UserSet full = full_set(num_users);
  if (!set_subset_of(a | c, full))
    throw std::invalid_argument("subset contains users beyond the tensor");
  if (a == 0) return 0.0;

  MixedRadix radix(joint.input_sizes);
  long long n_ac = 0, n_c = 0;
  std::vector<long long> ac_of =
      pack_table(radix, joint.input_sizes, a | c, &n_ac);
  std::vector<long long> c_of = pack_table(radix, joint.input_sizes, c, &n_c);

  int ny = joint.output_size;
  std::vector<double> m_acy(n_ac * ny, 0.0), m_ac(n_ac, 0.0);
  std::vector<double> m_cy(n_c * ny, 0.0), m_c(n_c, 0.0);
  // map each packed (a|c) cell to its packed c cell
  std::vector<long long> c_of_ac(n_ac, -1);

  for (long long x = 0; x < radix.size(); ++x) {
    long long iac = ac_of[x];
    long long ic = c_of[x];
    c_of_ac[iac] = ic;
    for (int y = 0; y < ny; ++y) {
      double v = joint.p[x * ny + y];
      if (v == 0.0) continue;
      m_acy[iac * ny + y] += v;
      m_ac[iac] += v;
      m_cy[ic * ny + y] += v;
      m_c[ic] += v;
    }
  }

  double info = 0.0;
  for (long long iac = 0; iac < n_ac; ++iac) {
    long long ic = c_of_ac[iac];
    if (ic < 0) continue;
    for (int y = 0; y < ny; ++y) {
      double v = m_acy[iac * ny + y];
      if (v == 0.0) continue;  // 0 log 0 = 0
      info += v * std::log((v * m_c[ic]) / (m_ac[iac] * m_cy[ic * ny + y]));
    }
  }
  if (info < 0.0) {
    if (info < -1e-9)
      throw std::runtime_error("conditional MI evaluated below -1e-9");
    info = 0.0;  // rounding residue only
  }
  return info;
}

namespace {

// Shared quantifier walk: for every bound subset S in `bound_subsets`,
// some candidate T from `candidates(S)` must satisfy the rate inequality
// against I(X_T; Y | X_{S complement}).
template <class CandidateFn>
RegionVerdict run_membership(const ChannelModel& channel,
                             const CodeEnsemble& ensemble,
                             const CodeIndexVector& g,
                             const std::vector<UserSet>& bound_subsets,
                             CandidateFn candidates, double slack) {
  JointDistribution joint = build_joint(channel, ensemble, g);
  UserSet full = full_set(channel.num_users);

  RegionVerdict verdict;
  for (UserSet s : bound_subsets) {
    UserSet complement = full & ~s;
    SubsetWitness w;
    w.subset = s;
    for (UserSet t : candidates(s)) {
      RateInequality ineq;
      ineq.tilde = t;
      ineq.rate_sum = rate_sum_over(ensemble, g, t);
      ineq.mutual_info = conditional_mi(joint, t, complement);
      ineq.slack = ineq.mutual_info - ineq.rate_sum;
      ineq.holds = ineq.rate_sum < ineq.mutual_info - slack;
      if (ineq.holds) {
        w.satisfied = true;
        w.chosen = ineq;
        break;
      }
      w.rejected.push_back(ineq);
    }
    if (!w.satisfied) verdict.member = false;
    verdict.witnesses.push_back(std::move(w));
  }
  return verdict;
}

}  // namespace

RegionVerdict in_cd_user(const ChannelModel& channel,
                         const CodeEnsemble& ensemble,
                         const CodeIndexVector& g, int user, double slack) {
  if (user < 0 || user >= channel.num_users)
    throw std::out_of_range("user index out of range");
  UserSet anchor = set_with(0, user);
  std::vector<UserSet> bound = subsets_containing(channel.num_users, anchor);
  auto candidates = [anchor](UserSet s) { return subsets_between(anchor, s); };
  return run_membership(channel, ensemble, g, bound, candidates, slack);
}

RegionVerdict in_cd_subset(const ChannelModel& channel,
                           const CodeEnsemble& ensemble,
                           const CodeIndexVector& g, UserSet s0, double slack) {
  UserSet full = full_set(channel.num_users);
  if (s0 == 0) throw std::invalid_argument("target subset is empty");
  if (!set_subset_of(s0, full))
    throw std::invalid_argument("target subset has users beyond the channel");
  std::vector<UserSet> bound;
  for (UserSet s : subsets_containing(channel.num_users, 0)) {
    if ((s & s0) != 0) bound.push_back(s);
  }
  auto candidates = [s0](UserSet s) { return subsets_between(s & s0, s); };
  return run_membership(channel, ensemble, g, bound, candidates, slack);
}

RegionVerdict in_cd_subset_intersection(const ChannelModel& channel,
                                        const CodeEnsemble& ensemble,
                                        const CodeIndexVector& g, UserSet s0,
                                        double slack) {
  if (s0 == 0) throw std::invalid_argument("target subset is empty");
  RegionVerdict verdict;
  for (int user : set_members(s0)) {
    RegionVerdict per_user = in_cd_user(channel, ensemble, g, user, slack);
    if (!per_user.member) verdict.member = false;
    for (auto& w : per_user.witnesses)
      verdict.witnesses.push_back(std::move(w));
  }
  return verdict;
}

RegionVerdict in_cd_all(const ChannelModel& channel,
                        const CodeEnsemble& ensemble, const CodeIndexVector& g,
                        double slack) {
  std::vector<UserSet> bound;
  for (UserSet s : subsets_containing(channel.num_users, 0)) {
    if (s != 0) bound.push_back(s);
  }
  auto candidates = [](UserSet s) { return std::vector<UserSet>{s}; };
  return run_membership(channel, ensemble, g, bound, candidates, slack);
}

bool shannon_polymatroid_check(const ChannelModel& channel, int g0,
                               const std::vector<std::vector<double>>& input_dists,
                               std::span<const double> rates, double slack) {
  if (static_cast<int>(input_dists.size()) != channel.num_users ||
      static_cast<int>(rates.size()) != channel.num_users)
    throw std::invalid_argument("need one distribution and rate per user");

  // one-option ensemble so the joint builder can be reused
  CodeEnsemble ensemble;
  ensemble.num_interferer_options = channel.num_interferer_options();
  for (int k = 0; k < channel.num_users; ++k)
    ensemble.user_options.push_back({CodeOption{0.0, input_dists[k]}});
  CodeIndexVector g;
  g.options.assign(channel.num_users, 0);
  g.interferer = g0;

  JointDistribution joint = build_joint(channel, ensemble, g);
  UserSet full = full_set(channel.num_users);
  for (UserSet s : subsets_containing(channel.num_users, 0)) {
    if (s == 0) continue;
    double rate_sum = 0.0;
    for (int k : set_members(s)) rate_sum += rates[k];
    double info = conditional_mi(joint, s, full & ~s);
    if (!(rate_sum <= info - slack)) return false;
  }
  return true;
}

bool gaussian_region_check(std::span<const double> powers,
                           double noise_variance,
                           std::span<const double> rates) {
  if (powers.size() != rates.size())
    throw std::invalid_argument("need one power per rate");
  if (powers.empty()) throw std::invalid_argument("no users given");
  if (powers.size() > static_cast<size_t>(kMaxUsers))
    throw std::invalid_argument("too many users");
  if (!(noise_variance > 0.0))
    throw std::invalid_argument("noise variance must be positive");
  for (double p : powers)
    if (!(p >= 0.0)) throw std::invalid_argument("powers must be nonnegative");
  for (double r : rates)
    if (!(r >= 0.0)) throw std::invalid_argument("rates must be nonnegative");

  int num_users = static_cast<int>(powers.size());
  for (UserSet s : subsets_containing(num_users, 0)) {
    if (s == 0) continue;
    double rate_sum = 0.0, power_sum = 0.0;
    for (int k : set_members(s)) {
      rate_sum += rates[k];
      power_sum += powers[k];
    }
    if (!(rate_sum <= 0.5 * std::log1p(power_sum / noise_variance)))
      return false;
  }
  return true;
}

}  // namespace dmac
