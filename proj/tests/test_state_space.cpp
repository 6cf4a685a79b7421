#include <doctest.h>

#include "natgrad/errors.hpp"
#include "natgrad/state_space.hpp"

using namespace natgrad;

TEST_SUITE("state_space") {
  TEST_CASE("config_count") {
    const StateSpace b = StateSpace::binary(2, {0});
    const std::vector<int> both{0, 1};
    CHECK(config_count(b, both) == 4);
    CHECK(config_count(b, std::vector<int>{}) == 1);
    const StateSpace m({2, 3}, {0});
    CHECK(config_count(m, both) == 6);
    CHECK_THROWS_AS(config_count(m, std::vector<int>{2}), std::out_of_range);
  }

  TEST_CASE("mixed-radix index, first unit most significant") {
    const StateSpace b = StateSpace::binary(3, {0});
    const std::vector<int> sub{1, 2};
    CHECK(config_to_index(b, sub, Config{{1, 0}}) == 2);
    CHECK(config_to_index(b, sub, Config{{0, 0}}) == 0);
    CHECK(index_to_config(b, sub, 3) == Config{{1, 1}});
    const StateSpace m({2, 3}, {0});
    CHECK(config_to_index(m, std::vector<int>{0, 1}, Config{{1, 2}}) == 5);
    CHECK_THROWS_AS(config_to_index(m, std::vector<int>{0, 1}, Config{{0, 3}}), std::out_of_range);
    CHECK_THROWS(index_to_config(m, std::vector<int>{0, 1}, 6));
  }

  TEST_CASE("round trip over a (2,3,2) space") {
    const StateSpace s({2, 3, 2}, {1});
    const auto all = s.all_units();
    for (std::int64_t i = 0; i < 12; ++i) CHECK(config_to_index(s, all, index_to_config(s, all, i)) == i);
    const auto configs = enumerate_configs(s, all);
    REQUIRE(configs.size() == 12);
    for (std::size_t i = 0; i < configs.size(); ++i) CHECK(config_to_index(s, all, configs[i]) == static_cast<std::int64_t>(i));
  }

  TEST_CASE("restrict") {
    const Config vh{{1, 0}};
    CHECK(restrict(vh, std::vector<int>{0}) == Config{{1}});
    CHECK(restrict(vh, std::vector<int>{0, 1}) == vh);
    CHECK(restrict(vh, std::vector<int>{}).size() == 0);
  }

  TEST_CASE("space invariants") {
    CHECK_THROWS(StateSpace({2, 1}, {0}));
    CHECK_THROWS(StateSpace({2, 2}, {0, 0}));
    CHECK_THROWS(StateSpace({2, 2}, {2}));
    CHECK_THROWS_AS(StateSpace::binary(27, {0}), CapacityError);
    const StateSpace s({2, 3, 2}, {2, 0});
    CHECK(s.visible() == std::vector<int>{0, 2});
    CHECK(s.hidden() == std::vector<int>{1});
    CHECK(spin(0) == -1);
    CHECK(spin(1) == 1);
  }

  TEST_CASE("subset indexer and odometer agree with config_to_index") {
    const StateSpace s({3, 2, 2}, {0});
    const std::vector<int> sub{2, 0};
    const SubsetIndexer idx(s, sub);
    CHECK(idx.count() == 6);
    Config x{{0, 0, 0}};
    const auto all = s.all_units();
    int visited = 0;
    do {
      CHECK(idx(x) == config_to_index(s, sub, restrict(x, sub)));
      ++visited;
    } while (next_config(x, all, s));
    CHECK(visited == 12);
    CHECK(x == Config{{0, 0, 0}});
  }
}
