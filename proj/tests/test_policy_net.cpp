// Copyright 2026 The marl-focal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include "catch_amalgamated.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"

using namespace marl_focal;
using Catch::Approx;

namespace {

std::vector<double> random_state(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> s(n);
  for (auto& x : s) x = d(gen);
  return s;
}

}  // namespace

TEST_CASE("zero network gives fair coins and a uniform categorical", "[policy]") {
  const std::vector<std::size_t> hidden{5};
  auto bern = make_policy_shape(HeadKind::bernoulli_branched, 3, hidden, 4);
  auto d = forward(bern, std::vector<double>{0.3, -1.0, 2.0}).dist;
  for (double p : d.probs) CHECK(p == 0.5);

  auto cat = make_policy_shape(HeadKind::categorical, 3, hidden, 4);
  auto c = forward(cat, std::vector<double>{0.3, -1.0, 2.0}).dist;
  for (double p : c.probs) CHECK(p == Approx(0.25).epsilon(1e-15));
}

TEST_CASE("forward stays finite and inside the clamp", "[policy][property]") {
  std::mt19937_64 gen(3);
  Rng rng(4);
  const std::vector<std::size_t> hidden{6, 4};
  for (int i = 0; i < 50; ++i) {
    auto p = make_policy(HeadKind::bernoulli_branched, 5, hidden, 3, rng);
    for (auto& w : p.head.weights) w *= 40.0;  // push towards saturation
    auto d = forward(p, random_state(gen, 5)).dist;
    for (double q : d.probs) {
      CHECK(q >= kProbClamp);
      CHECK(q <= 1.0 - kProbClamp);
    }
    auto c = make_policy(HeadKind::categorical, 5, hidden, 4, rng);
    for (auto& w : c.head.weights) w *= 200.0;
    auto cd = forward(c, random_state(gen, 5)).dist;
    double sum = 0.0;
    for (double q : cd.probs) sum += q;
    CHECK(sum == Approx(1.0).margin(1e-9));
    for (double lp : cd.log_probs) CHECK(std::isfinite(lp));
  }
}

TEST_CASE("forward rejects bad states", "[policy]") {
  const std::vector<std::size_t> hidden{2};
  auto p = make_policy_shape(HeadKind::categorical, 3, hidden, 2);
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, NAN, 0.0}), ContractError);
}

TEST_CASE("log prob examples", "[policy]") {
  ActionDistribution b;
  b.kind = HeadKind::bernoulli_branched;
  b.probs = {0.5, 0.5};
  CHECK(log_prob(b, std::vector<std::uint8_t>{1, 0}) == Approx(-1.386294).margin(1e-6));
  b.probs = {0.9, 0.1};
  CHECK(log_prob(b, std::vector<std::uint8_t>{1, 1}) == Approx(-2.407946).margin(1e-6));

  const std::vector<std::size_t> none;
  auto cat = make_policy_shape(HeadKind::categorical, 2, none, 4);
  auto d = forward(cat, std::vector<double>{1.0, 1.0}).dist;
  CHECK(log_prob(d, std::size_t{2}) == Approx(-1.386294).margin(1e-6));
}

TEST_CASE("single-layer bernoulli gradient in closed form", "[policy]") {
  const std::vector<std::size_t> none;
  auto p = make_policy_shape(HeadKind::bernoulli_branched, 2, none, 1);
  const std::vector<double> s{1.0, 1.0};
  auto g = backward(p, forward(p, s), Action(std::vector<std::uint8_t>{1}), 1.0);
  // d log p / dw = (1 - p) s with p = 0.5; the bias sees (1 - p)
  CHECK(g.head[0] == 0.5);
  CHECK(g.head[1] == 0.5);
  CHECK(g.head[2] == 0.5);
}

TEST_CASE("zero scale gives a zero gradient", "[policy]") {
  Rng rng(9);
  const std::vector<std::size_t> hidden{4};
  auto p = make_policy(HeadKind::categorical, 3, hidden, 3, rng);
  auto g = backward(p, forward(p, std::vector<double>{0.1, 0.2, 0.3}), Action(std::size_t{1}), 0.0);
  CHECK(g.max_abs() == 0.0);
}

TEST_CASE("analytic gradients match central differences", "[policy][gradcheck]") {
  std::mt19937_64 gen(21);
  Rng rng(22);
  for (int i = 0; i < 25; ++i) {
    const std::size_t in = 2 + gen() % 5;
    const std::vector<std::size_t> hidden = i % 3 == 0 ? std::vector<std::size_t>{} : i % 3 == 1 ? std::vector<std::size_t>{5}
                                                                                                  : std::vector<std::size_t>{4, 3};
    const auto s = random_state(gen, in);

    auto bern = make_policy(HeadKind::bernoulli_branched, in, hidden, 4, rng);
    std::vector<std::uint8_t> bits(4);
    for (auto& b : bits) b = static_cast<std::uint8_t>(gen() % 2);
    CHECK(testing_util::gradcheck(bern, s, Action(bits)) < 1e-4);

    auto cat = make_policy(HeadKind::categorical, in, hidden, 4, rng);
    CHECK(testing_util::gradcheck(cat, s, Action(std::size_t(gen() % 4))) < 1e-4);
  }
}

TEST_CASE("clamped heads get no gradient", "[policy]") {
  const std::vector<std::size_t> none;
  auto p = make_policy_shape(HeadKind::bernoulli_branched, 1, none, 1);
  p.head.bias(0) = 40.0;  // sigmoid rounds past 1 - 1e-6
  auto c = forward(p, std::vector<double>{0.0});
  REQUIRE(c.dist.clamped[0]);
  auto g = backward(p, c, Action(std::vector<std::uint8_t>{0}), 1.0);
  CHECK(g.max_abs() == 0.0);
}

TEST_CASE("apply update examples", "[policy]") {
  const std::vector<std::size_t> none;
  auto p = make_policy_shape(HeadKind::bernoulli_branched, 1, none, 1);
  p.head.weights = {0.25, -0.5};
  auto g = Gradient::zeros_like(p);

  auto before = p;
  CHECK(apply_update(p, g, 0.001));
  CHECK(p == before);

  g.head = {2.0, 0.0};
  CHECK(apply_update(p, g, 0.0));
  CHECK(p == before);

  CHECK(apply_update(p, g, 0.001));
  CHECK(p.head.weights[0] == 0.25 + 0.001 * 2.0);
  CHECK(p.head.weights[1] == -0.5);
}

TEST_CASE("non-finite gradients are skipped", "[policy]") {
  const std::vector<std::size_t> none;
  auto p = make_policy_shape(HeadKind::bernoulli_branched, 1, none, 1);
  auto g = Gradient::zeros_like(p);
  g.head[0] = INFINITY;
  auto before = p;
  log::set_level(log::Level::off);
  CHECK_FALSE(apply_update(p, g, 0.1));
  log::set_level(log::Level::warn);
  CHECK(p == before);
}

TEST_CASE("policy json round trip is bit exact", "[policy]") {
  Rng rng(5);
  const std::vector<std::size_t> hidden{7, 3};
  for (auto kind : {HeadKind::bernoulli_branched, HeadKind::categorical}) {
    auto p = make_policy(kind, 4, hidden, 3, rng);
    auto text = policy_to_json(p).dump();
    auto q = policy_from_json(nlohmann::json::parse(text));
    CHECK(q == p);
  }
  CHECK_THROWS_AS(policy_from_json(nlohmann::json{{"format", "other"}}), CheckpointError);
}

TEST_CASE("same seed and updates give identical parameters", "[policy]") {
  const std::vector<std::size_t> hidden{4};
  auto run = [&]() {
    Rng rng(77);
    auto p = make_policy(HeadKind::categorical, 3, hidden, 3, rng);
    for (int i = 0; i < 20; ++i) {
      std::vector<double> s{uniform01(rng), uniform01(rng), uniform01(rng)};
      auto g = backward(p, forward(p, s), Action(uniform_index(rng, 3)), uniform(rng, -1.0, 1.0));
      apply_update(p, g, 0.1);
    }
    return p;
  };
  CHECK(run() == run());
}
