#include <doctest.h>

#include <bit>
#include <cstdint>
#include <set>
#include <vector>

#include "sevi/errors.hpp"
#include "sevi/subsets.hpp"

using namespace sevi;

TEST_SUITE("subsets") {

TEST_CASE("gosper step keeps the popcount and increases the mask") {
  for (unsigned u : {4u, 9u, 16u}) {
    for (std::uint64_t start : {std::uint64_t{1}, std::uint64_t{0b101},
                                std::uint64_t{0b1110}}) {
      std::uint64_t mask = start;
      const int card = std::popcount(mask);
      int steps = 0;
      while (auto next = next_same_popcount(mask, u)) {
        CHECK(*next > mask);
        CHECK(std::popcount(*next) == card);
        mask = *next;
        ++steps;
        REQUIRE(steps < 1 << 20);
      }
      CHECK((mask >> (u - 1) & 1) == 1);  // ends with the top bit set
    }
  }
  CHECK_THROWS_AS((void)next_same_popcount(0, 8), std::invalid_argument);
}

TEST_CASE("enumeration is complete, unique, and cardinality-major") {
  const unsigned u = 10;
  std::set<std::uint64_t> seen;
  unsigned last_card = 0;
  std::uint64_t last_mask = 0;
  const std::uint64_t visits =
      for_each_subset(u, u, [&](std::uint64_t mask, unsigned card) {
        CHECK(std::popcount(mask) == static_cast<int>(card));
        CHECK(mask < (std::uint64_t{1} << u));
        if (card == last_card)
          CHECK(mask > last_mask);  // Gosper order inside a layer
        else
          CHECK(card == last_card + 1);
        last_card = card;
        last_mask = mask;
        seen.insert(mask);
      });
  CHECK(visits == (std::uint64_t{1} << u) - 1);
  CHECK(seen.size() == visits);
}

TEST_CASE("truncated enumeration visits exactly the small layers") {
  const unsigned u = 12, m = 3;
  std::uint64_t by_hand = 0;
  for_each_subset(u, m, [&](std::uint64_t, unsigned card) {
    CHECK(card <= m);
    ++by_hand;
  });
  CHECK(by_hand == 12 + 66 + 220);
  CHECK(count_subsets(u, m) == by_hand);
}

TEST_CASE("subset counts match pascal sums") {
  CHECK(count_subsets(1, 1) == 1);
  CHECK(count_subsets(5, 5) == 31);
  CHECK(count_subsets(20, 2) == 20 + 190);
  CHECK(count_subsets(63, 1) == 63);
  for (unsigned u = 2; u <= 16; ++u)
    CHECK(count_subsets(u, u) == (std::uint64_t{1} << u) - 1);
}

TEST_CASE("capacity and argument guards") {
  CHECK_THROWS_AS(check_universe(64), CapacityError);
  CHECK_NOTHROW(check_universe(63));
  CHECK_THROWS_AS(for_each_subset(8, 0, [](std::uint64_t, unsigned) {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(for_each_subset(8, 9, [](std::uint64_t, unsigned) {}),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)count_subsets(0, 0), std::invalid_argument);
}

}  // TEST_SUITE
