#ifndef DMAC_COMMON_HPP
#define DMAC_COMMON_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace dmac {

// Subsets of users {0, ..., K-1} kept as bitmasks, bit k = user k.
// User 0 is the anchor user (the one the receiver must always recover
// in single-user decoding contexts).
using UserSet = std::uint32_t;

inline constexpr int kMaxUsers = 16;

inline bool set_contains(UserSet s, int user) { return (s >> user) & 1u; }
inline UserSet set_with(UserSet s, int user) { return s | (UserSet{1} << user); }
inline int set_size(UserSet s) { return std::popcount(s); }
inline UserSet full_set(int num_users) {
  return num_users >= 32 ? ~UserSet{0} : (UserSet{1} << num_users) - 1u;
}
inline bool set_subset_of(UserSet a, UserSet b) { return (a & ~b) == 0; }

// Members of a set in ascending user order.
std::vector<int> set_members(UserSet s);
UserSet make_set(std::span<const int> users);
// "{0,2}" style rendering, "{}" for the empty set.
std::string format_set(UserSet s);

// All subsets S of {0..K-1} with anchor ⊆ S, listed in increasing
// bitmask order. K is capped at kMaxUsers.
std::vector<UserSet> subsets_containing(int num_users, UserSet anchor);

// Mixed-radix indexing with the first digit slowest. Used for input
// vectors (user 0 slowest) and code index vectors.
class MixedRadix {
 public:
  MixedRadix() = default;
  explicit MixedRadix(std::vector<int> sizes);

  long long size() const { return total_; }
  int digits() const { return static_cast<int>(sizes_.size()); }
  int radix(int pos) const { return sizes_[pos]; }

  long long index(std::span<const int> digit_values) const;
  void decode(long long index, std::span<int> out) const;
  std::vector<int> decode(long long index) const;

 private:
  std::vector<int> sizes_;
  std::vector<long long> strides_;
  long long total_ = 1;
};

// SplitMix64; used to derive statistically independent seeds for
// per-worker and per-trial generator streams from one base seed.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

// Uniform double in [0,1) from one 64-bit draw.
template <class Rng>
double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming log-sum-exp accumulator. add(-inf) is a no-op so terms with
// zero probability drop out; an empty accumulator reports -inf.
class LogSumExp {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  double value() const {
    return (max_ == kNegInf) ? kNegInf : max_ + std::log(sum_);
  }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

}  // namespace dmac

#endif
