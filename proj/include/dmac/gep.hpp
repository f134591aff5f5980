#ifndef DMAC_GEP_HPP
#define DMAC_GEP_HPP

#include <atomic>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmac/code_space.hpp"
#include "dmac/exponents.hpp"

namespace dmac {

// Memo for maximized exponents, keyed on every field that affects the
// value. Safe for concurrent readers; racing writers both store the same
// deterministic result. Can be persisted and reloaded as JSON-friendly
// key/value pairs (see io.hpp) so repeated CLI runs skip recomputation.
class ExponentCache {
 public:
  ExponentReport get_or_compute(const ExponentQuery& query,
                                const MaximizeOptions& options);
  static std::string key(const ExponentQuery& query,
                         const MaximizeOptions& options);

  size_t size() const;
  long long hits() const { return hits_; }
  long long misses() const { return misses_; }
  std::vector<std::pair<std::string, ExponentReport>> entries() const;
  void insert(const std::string& key, const ExponentReport& report);

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, ExponentReport> map_;
  std::atomic<long long> hits_ = 0, misses_ = 0;
};

enum class GepTermKind {
  MessageInRegion,   // competitor decoded exactly, message mixup
  BoundaryMismatch,  // competitor outside the region, subset-matched
  StrictMismatch     // competitor beyond region and margin, full-matched
};

std::string to_string(GepTermKind kind);

struct GepTerm {
  CodeIndexVector g_tilde;
  UserSet subset = 0;
  GepTermKind kind = GepTermKind::MessageInRegion;
  double exponent = 0.0;
  double contribution = 0.0;  // multiplicity * exp(-N * exponent)
};

struct GepVectorBreakdown {
  CodeIndexVector g;
  double message_sum = 0.0;
  double boundary_sum = 0.0;
  double strict_sum = 0.0;
  double total = 0.0;
  std::vector<GepTerm> terms;
};

struct GepBoundReport {
  UserSet decode_set = 0;
  int blocklength = 1;
  double total = 0.0;
  std::vector<GepVectorBreakdown> per_vector;
};

// Analytic bound on the generalized error probability of the receiver
// that decodes `decode_set` exactly on `region`, tolerates `margin`, and
// must report collisions beyond both. For every region vector it sums,
// over proper subsets S of the decode set and competitors matching on S:
// exp(-N E) for in-region competitors (message terms), twice exp(-N E)
// for out-of-region competitors (boundary terms), plus twice exp(-N E)
// for beyond-margin competitors matching on the full decode set. The
// blocklength N is taken from the weight assignment.
GepBoundReport decoder_gep_bound(const ChannelModel& channel,
                                 const CodeEnsemble& ensemble,
                                 UserSet decode_set, const VectorSet& region,
                                 const VectorSet& margin,
                                 const WeightAssignment& weights,
                                 ExponentCache* cache = nullptr,
                                 const MaximizeOptions& options = {});

enum class PartitionStrategy { Exhaustive, Greedy };

// Assignment of each anchor-region vector to the decode set whose
// receiver handles it.
struct PartitionAssignment {
  std::map<CodeIndexVector, UserSet> decode_set_of;
};

struct SingleUserGepBound {
  double total = 0.0;
  PartitionAssignment assignment;
  // Reports for decode sets with a nonempty part, keyed by the set.
  std::map<UserSet, GepBoundReport> per_decoder;
  long long assignments_examined = 0;
  PartitionStrategy strategy = PartitionStrategy::Greedy;
};

// Best split of the anchor user's region across decode sets containing
// user 0. Each part R_D gets margin (region ∪ margin) minus R_D, and the
// bound is the sum of the per-part decoder bounds. Exhaustive search
// enumerates every assignment (error if the count exceeds
// exhaustive_cap); greedy starts from the full decode set everywhere and
// reassigns one vector at a time until a full pass makes no improvement
// (at most max_passes passes).
SingleUserGepBound single_user_gep_bound(
    const ChannelModel& channel, const CodeEnsemble& ensemble,
    const VectorSet& region, const VectorSet& margin,
    const WeightAssignment& weights, PartitionStrategy strategy,
    ExponentCache* cache = nullptr, const MaximizeOptions& options = {},
    long long exhaustive_cap = 1000000, int max_passes = 10);

}  // namespace dmac

#endif
