#include "dmac/common.hpp"

#include <stdexcept>

namespace dmac {

std::vector<int> set_members(UserSet s) {
  std::vector<int> out;
  for (int k = 0; k < 32; ++k) {
    if (set_contains(s, k)) out.push_back(k);
  }
  return out;
}

UserSet make_set(std::span<const int> users) {
  UserSet s = 0;
  for (int u : users) {
    if (u < 0 || u >= 32) throw std::out_of_range("user index out of range");
    s = set_with(s, u);
  }
  return s;
}

std::string format_set(UserSet s) {
  std::string out = "{";
  bool first = true;
  for (int u : set_members(s)) {
    if (!first) out += ",";
    out += std::to_string(u);
    first = false;
  }
  out += "}";
  return out;
}

std::vector<UserSet> subsets_containing(int num_users, UserSet anchor) {
  if (num_users < 0 || num_users > kMaxUsers)
    throw std::out_of_range("user count must be between 0 and 16");
  UserSet full = full_set(num_users);
  if (!set_subset_of(anchor, full))
    throw std::invalid_argument("anchor contains users beyond the user count");
  std::vector<UserSet> out;
  for (UserSet s = 0; s <= full; ++s) {
    if ((s & anchor) == anchor) out.push_back(s);
    if (s == full) break;  // avoid wraparound when full == max
  }
  return out;
}

MixedRadix::MixedRadix(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  strides_.assign(sizes_.size(), 1);
  total_ = 1;
  for (int i = static_cast<int>(sizes_.size()) - 1; i >= 0; --i) {
    if (sizes_[i] <= 0) throw std::invalid_argument("radix must be positive");
    strides_[i] = total_;
    if (total_ > std::numeric_limits<long long>::max() / sizes_[i])
      throw std::overflow_error("mixed-radix size overflows 64 bits");
    total_ *= sizes_[i];
  }
}

long long MixedRadix::index(std::span<const int> digit_values) const {
  if (digit_values.size() != sizes_.size())
    throw std::invalid_argument("digit count mismatch");
  long long idx = 0;
  for (size_t i = 0; i < sizes_.size(); ++i) {
    int d = digit_values[i];
    if (d < 0 || d >= sizes_[i]) throw std::out_of_range("digit out of range");
    idx += strides_[i] * d;
  }
  return idx;
}

void MixedRadix::decode(long long index, std::span<int> out) const {
  if (index < 0 || index >= total_) throw std::out_of_range("index out of range");
  if (out.size() != sizes_.size())
    throw std::invalid_argument("digit count mismatch");
  for (size_t i = 0; i < sizes_.size(); ++i) {
    out[i] = static_cast<int>(index / strides_[i]);
    index %= strides_[i];
  }
}

std::vector<int> MixedRadix::decode(long long index) const {
  std::vector<int> out(sizes_.size());
  decode(index, std::span<int>(out));
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t p : path) s = splitmix64(s ^ p);
  return s;
}

}  // namespace dmac
