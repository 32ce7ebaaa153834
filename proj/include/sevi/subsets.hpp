#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "sevi/errors.hpp"

namespace sevi {

inline constexpr unsigned kMaxUniverseBits = 63;
// full enumeration stays cheap through here; larger sets should truncate
inline constexpr unsigned kFullEnumerationComfortLimit = 16;

inline void check_universe(unsigned universe_size) {
  if (universe_size > kMaxUniverseBits)
    throw CapacityError("subset universe of " + std::to_string(universe_size) +
                        " exceeds the supported 63 bits");
}

// Gosper's hack: the numerically next mask with the same popcount, or nullopt
// once the next mask would leave the universe.
inline std::optional<std::uint64_t> next_same_popcount(std::uint64_t mask,
                                                       unsigned universe_size) {
  if (mask == 0) throw std::invalid_argument("next_same_popcount: zero mask");
  check_universe(universe_size);
  const std::uint64_t c = mask & (~mask + 1);
  const std::uint64_t r = mask + c;
  const std::uint64_t next = r | (((mask ^ r) >> 2) / c);
  if (next >= (std::uint64_t(1) << universe_size)) return std::nullopt;
  return next;
}

// Visit every nonempty subset with at most max_cardinality elements,
// cardinality-major and in Gosper order within each cardinality, so a
// truncated alternating sum is just an early exit from the outer loop.
// Returns the number of subsets visited.
template <class Visit>
std::uint64_t for_each_subset(unsigned universe_size, unsigned max_cardinality,
                              Visit&& visit) {
  check_universe(universe_size);
  if (universe_size == 0 || max_cardinality == 0 || max_cardinality > universe_size)
    throw std::invalid_argument("for_each_subset: need 1 <= max_cardinality <= universe_size");
  const std::uint64_t limit = std::uint64_t(1) << universe_size;
  std::uint64_t visits = 0;
  for (unsigned card = 1; card <= max_cardinality; ++card) {
    std::uint64_t mask = (std::uint64_t(1) << card) - 1;
    while (mask < limit) {
      visit(mask, card);
      ++visits;
      const std::uint64_t c = mask & (~mask + 1);
      const std::uint64_t r = mask + c;
      mask = r | (((mask ^ r) >> 2) / c);
    }
  }
  return visits;
}

// binomial-sum C(u,1) + ... + C(u,m) without enumerating
inline std::uint64_t count_subsets(unsigned universe_size, unsigned max_cardinality) {
  check_universe(universe_size);
  if (universe_size == 0 || max_cardinality == 0 || max_cardinality > universe_size)
    throw std::invalid_argument("count_subsets: need 1 <= max_cardinality <= universe_size");
  long double total = 0.0L, binom = 1.0L;
  for (unsigned card = 1; card <= max_cardinality; ++card) {
    binom = binom * (universe_size - card + 1) / card;
    total += binom;
  }
  return static_cast<std::uint64_t>(total + 0.5L);
}

}  // namespace sevi
