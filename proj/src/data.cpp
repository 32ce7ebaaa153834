#include "sevi/data.hpp"

#include <bit>
#include <cmath>

#include "sevi/rng.hpp"

namespace sevi {

void DesignBatch::validate() const {
  if (n_alternatives < 2)
    throw ValidationError("a design needs at least 2 alternatives");
  if (n_coefficients < 1)
    throw ValidationError("a design needs at least 1 coefficient");
  if (static_cast<int>(coef_names.size()) != n_coefficients ||
      static_cast<int>(alt_names.size()) != n_alternatives)
    throw ValidationError("design name tables do not match its dimensions");
  for (const auto& s : obs) {
    const std::string where = "situation " + std::to_string(s.id);
    if (s.x.rows() != n_alternatives || s.x.cols() != n_coefficients)
      throw ValidationError(where + ": attribute matrix has wrong shape");
    if (std::popcount(s.available) < 2)
      throw ValidationError(where + ": fewer than 2 available alternatives");
    if (s.chosen < 0 || s.chosen >= n_alternatives)
      throw ValidationError(where + ": chosen alternative out of range");
    if (!(s.available >> s.chosen & 1u))
      throw ValidationError(where + ": chosen alternative is unavailable");
    for (int j = 0; j < n_alternatives; ++j) {
      if (!(s.available >> j & 1u)) continue;
      for (int l = 0; l < n_coefficients; ++l)
        if (!std::isfinite(s.x(j, l)))
          throw ValidationError(where + ": non-finite attribute for alternative " +
                                std::to_string(j));
    }
  }
}

UtilityVector DesignBatch::utilities(int i, const Eigen::VectorXd& beta) const {
  const ChoiceSituation& s = obs[i];
  UtilityVector v(s.x * beta, s.available);
  for (int j = 0; j < n_alternatives; ++j)
    if (v.is_available(j) && !std::isfinite(v.values[j]))
      throw NumericError("non-finite utility in situation " +
                         std::to_string(s.id) + ", alternative " +
                         std::to_string(j));
  return v;
}

std::uint64_t DesignBatch::fingerprint() const {
  std::uint64_t total =
      hash_combine(0x53564921u, static_cast<std::uint64_t>(n_alternatives));
  for (const auto& s : obs) {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(s.id));
    h = hash_combine(h, static_cast<std::uint64_t>(s.chosen));
    h = hash_combine(h, s.available);
    total += h;  // order-independent
  }
  return mix64(total + static_cast<std::uint64_t>(obs.size()));
}

}  // namespace sevi
