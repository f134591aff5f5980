#ifndef DMAC_CODE_SPACE_HPP
#define DMAC_CODE_SPACE_HPP

#include <compare>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/common.hpp"

namespace dmac {

// One entry of a user's code option list: the rate (in nats per channel
// use) and the input distribution that user's random codebooks draw from.
struct CodeOption {
  double rate_nats = 0.0;
  std::vector<double> input_dist;
};

// The per-user option lists all parties agree on ahead of time, plus the
// number of options the interfering user may be running.
struct CodeEnsemble {
  std::vector<std::vector<CodeOption>> user_options;  // [user][option]
  int num_interferer_options = 1;

  int num_users() const { return static_cast<int>(user_options.size()); }
  int num_options(int user) const {
    return static_cast<int>(user_options.at(user).size());
  }
  const CodeOption& option(int user, int idx) const {
    return user_options.at(user).at(idx);
  }
};

// Checks option lists are non-empty, rates nonnegative, distributions
// the right length (against the channel when given), entries in [0,1]
// and summing to 1 within 1e-9.
ValidationResult validate(const CodeEnsemble& ensemble,
                          const ChannelModel* channel = nullptr);
void require_valid(const CodeEnsemble& ensemble,
                   const ChannelModel* channel = nullptr);

// A full assignment of one option per user plus the interferer's option.
struct CodeIndexVector {
  std::vector<int> options;  // option index per user, user 0 first
  int interferer = 0;

  auto operator<=>(const CodeIndexVector&) const = default;
  // Rendered as "o0,o1,...|g0", e.g. "1,0|0".
  std::string to_string() const;
};

// True when the two vectors pick the same option for every user in s.
// The interferer entry is not part of any user subset.
bool options_match_on(const CodeIndexVector& a, const CodeIndexVector& b,
                      UserSet s);

// Every code index vector in the ensemble, in lexicographic order with
// user 0's option slowest and the interferer option fastest. Throws
// std::overflow_error naming the partial product if the count overflows.
std::vector<CodeIndexVector> enumerate_vectors(const CodeEnsemble& ensemble);

void require_vector_in_ensemble(const CodeEnsemble& ensemble,
                                const CodeIndexVector& g);

// A sorted, duplicate-free set of code index vectors.
class VectorSet {
 public:
  VectorSet() = default;
  explicit VectorSet(std::vector<CodeIndexVector> vectors);

  bool contains(const CodeIndexVector& g) const;
  const std::vector<CodeIndexVector>& items() const { return items_; }
  size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<CodeIndexVector> items_;
};

bool sets_disjoint(const VectorSet& a, const VectorSet& b);

// What one receiver run needs: the vectors it decodes exactly (region),
// the vectors where either decoding or a collision report is acceptable
// (margin), and which users it decodes. Region and margin must be
// disjoint; this is enforced on construction.
struct OperationConfig {
  VectorSet region;
  VectorSet margin;
  UserSet decode_set = 1;

  OperationConfig() = default;
  OperationConfig(VectorSet region_in, VectorSet margin_in, UserSet decode_in);
};

// Per-vector weight exponents alpha(g) >= 0 with sum_g exp(-N alpha(g))
// equal to 1 over the governing vector list. N is the blocklength the
// exponents are normalized against.
struct WeightAssignment {
  int blocklength = 1;
  std::map<CodeIndexVector, double> alpha;

  double alpha_of(const CodeIndexVector& g) const;
  bool has(const CodeIndexVector& g) const { return alpha.count(g) != 0; }
  double constraint_sum() const;  // sum of exp(-N alpha)
};

// alpha(g) = log(|vectors|)/N for every vector, which satisfies the
// normalization exactly.
WeightAssignment uniform_weights(std::span<const CodeIndexVector> vectors,
                                 int blocklength);

// Throws std::invalid_argument when alphas are negative or the
// normalization is off by more than tol.
void check_weight_constraint(const WeightAssignment& weights,
                             double tol = 1e-9);

}  // namespace dmac

#endif
