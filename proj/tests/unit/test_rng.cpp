#include <set>

#include "doctest.h"
#include "hetree/rng.hpp"

using namespace hetree;

TEST_CASE("Philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter draws are pure and distinct") {
  const CounterRng rng(123);
  const TluSite a{5, 2, 1, 7};
  CHECK(rng.draw(a).failure_u == rng.draw(a).failure_u);
  std::set<double> values;
  for (std::uint32_t node = 0; node < 100; ++node) {
    const auto d = rng.draw({5, 2, 1, node});
    CHECK(d.failure_u >= 0.0);
    CHECK(d.failure_u < 1.0);
    values.insert(d.failure_u);
  }
  CHECK(values.size() == 100);
  CHECK(rng.draw({5, 2, 1, 7}).failure_u != rng.draw({5, 4, 1, 7}).failure_u);
  CHECK(rng.draw({5, 2, 1, 7}).failure_u != CounterRng(124).draw({5, 2, 1, 7}).failure_u);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}
