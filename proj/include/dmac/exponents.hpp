#ifndef DMAC_EXPONENTS_HPP
#define DMAC_EXPONENTS_HPP

#include <span>
#include <string>
#include <vector>

#include "dmac/channel.hpp"
#include "dmac/code_space.hpp"
#include "dmac/common.hpp"

namespace dmac {

// Transition law seen by a receiver that decodes only the users in
// decode_set: every non-decoded user is marginalized over the input
// distribution of its option in g, and the interferer option picks the
// tensor slice. table[x_D][y] with x_D mixed-radix over the decoded
// users in ascending order.
struct MarginalChannel {
  std::vector<int> decode_users;  // ascending
  std::vector<int> sizes;         // alphabet size per decoded user
  int output_size = 0;
  std::vector<double> table;

  MixedRadix radix() const { return MixedRadix(sizes); }
  long long num_inputs() const { return MixedRadix(sizes).size(); }
  double prob(long long x_d, int y) const {
    return table[x_d * output_size + y];
  }
};

MarginalChannel make_decode_marginal(const ChannelModel& channel,
                                     const CodeEnsemble& ensemble,
                                     const CodeIndexVector& g,
                                     UserSet decode_set);

// Which pairwise error event the exponent bounds:
//  - WrongMessage: both vectors are decoded exactly; some wrong message
//    tuple (matching on `subset`, differing elsewhere in the decode set)
//    scores at least as well as the true one.
//  - MisdetectSubset: the competitor vector requires a collision report;
//    a candidate matching it on `subset` passes the threshold test.
//    The same quantity also bounds the true candidate failing its own
//    threshold test against that competitor.
//  - MisdetectFull: same, for candidates matching on the whole decode
//    set (competitor differs only outside it).
enum class ExponentKind { WrongMessage, MisdetectSubset, MisdetectFull };

std::string to_string(ExponentKind kind);

struct ExponentQuery {
  const ChannelModel* channel = nullptr;
  const CodeEnsemble* ensemble = nullptr;
  UserSet decode_set = 0;  // D
  UserSet subset = 0;      // S; equals D exactly for MisdetectFull
  CodeIndexVector g;
  CodeIndexVector g_tilde;
  double alpha_g = 0.0;
  double alpha_g_tilde = 0.0;
  ExponentKind kind = ExponentKind::WrongMessage;
};

// Enforces: users in range, S ⊆ D, S proper for the two subset kinds and
// S == D for MisdetectFull, and g, g_tilde picking identical options on S.
void validate_query(const ExponentQuery& query);

// Raw two-parameter objectives before maximization, in nats. Domain:
// 0 < rho <= 1 and 0 <= s <= 1 (WrongMessage), 0 <= s <= 1 - rho
// (MisdetectSubset); out-of-domain arguments throw std::domain_error.
// Inner sums run in log domain so extreme powers like s/rho at tiny rho
// cannot underflow the bracket to a spurious zero.
double wrong_message_objective(const ExponentQuery& query, double rho,
                               double s);
double misdetect_subset_objective(const ExponentQuery& query, double rho,
                                  double s);
// One-parameter objective for MisdetectFull, 0 <= s <= 1.
double misdetect_full_objective(const ExponentQuery& query, double s);

struct MaximizeOptions {
  int grid_points = 101;
  int refine_rounds = 3;
  double rho_floor = 1e-6;  // open rho > 0 end approximated from above
};

struct ExponentReport {
  double value = 0.0;
  bool has_rho = false;
  double arg_rho = 0.0;  // meaningful only when has_rho
  double arg_s = 0.0;
  long long evaluations = 0;
  int refine_rounds = 0;
  bool rho_at_floor = false;
};

// Grid search over the admissible (rho, s) set followed by rounds of
// per-coordinate golden-section refinement around the best grid cell.
// The reported value is the objective re-evaluated at (arg_rho, arg_s).
// Under-maximization only weakens the resulting bound, never breaks it.
ExponentReport maximize(const ExponentQuery& query,
                        const MaximizeOptions& options = {});

}  // namespace dmac

#endif
