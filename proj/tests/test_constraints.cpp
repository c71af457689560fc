#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "par/constraints.hpp"
#include "par/csv.hpp"
#include "par/discretizer.hpp"
#include "par/schema.hpp"

using namespace par;

namespace {

ConstraintSet plain_set(int d, int card = 3) {
  ConstraintSet cs;
  cs.cards.assign(d, card);
  cs.immutable.assign(d, false);
  cs.monotone.assign(d, false);
  cs.ordered.assign(d, true);
  return cs;
}

struct JointOracle {
  std::vector<std::vector<double>> p;
  std::vector<double> qc, qe;
};

JointOracle joint_oracle(const std::vector<double>& le, const std::vector<double>& lc, int fe,
                         int fc) {
  int ce = static_cast<int>(le.size()), cc = static_cast<int>(lc.size());
  JointOracle o;
  o.p.assign(cc, std::vector<double>(ce, 0.0));
  double norm = 0.0;
  for (int a = 0; a < cc; ++a)
    for (int b = 0; b < ce; ++b) {
      bool legal = (b <= fe) || (a > fc);
      if (legal) {
        o.p[a][b] = std::exp(lc[a] + le[b]);
        norm += o.p[a][b];
      }
    }
  o.qc.assign(cc, 0.0);
  o.qe.assign(ce, 0.0);
  for (int a = 0; a < cc; ++a)
    for (int b = 0; b < ce; ++b) {
      o.p[a][b] /= norm;
      o.qc[a] += o.p[a][b];
      o.qe[b] += o.p[a][b];
    }
  return o;
}

}  // namespace

TEST_CASE("joint groups collect rules sharing features, causes first") {
  ConstraintSet cs = plain_set(5);
  cs.rules = {{1, 0}, {2, 0}};  // effects 1 and 2 share cause 0
  auto groups = cs.joint_groups();
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].members == std::vector<int>{0, 1, 2});
  CHECK(groups[0].rules.size() == 2);

  // Disjoint rules stay in separate groups.
  cs.rules = {{1, 0}, {3, 2}};
  groups = cs.joint_groups();
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].members == std::vector<int>{0, 1});
  CHECK(groups[1].members == std::vector<int>{2, 3});

  // A chain merges; the middle feature counts as a cause.
  cs.rules = {{0, 1}, {1, 2}};
  groups = cs.joint_groups();
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].members == std::vector<int>{1, 2, 0});
}

TEST_CASE("joint groups skip rules touching immutable features") {
  ConstraintSet cs = plain_set(4);
  cs.immutable[0] = true;
  cs.rules = {{1, 0}, {3, 2}};
  auto groups = cs.joint_groups();
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].members == std::vector<int>{2, 3});

  cs.immutable = {true, true, true, true};
  CHECK(cs.joint_groups().empty());
}

TEST_CASE("monotone and clamp masks zero the right categories") {
  std::vector<double> logits = {1.0, 2.0, 3.0, 4.0};
  mask_monotone(logits, 2);
  CHECK(logits[0] == kMaskedLogit);
  CHECK(logits[1] == kMaskedLogit);
  CHECK(logits[2] == 3.0);
  CHECK(logits[3] == 4.0);

  logits = {1.0, 2.0, 3.0, 4.0};
  mask_causal_clamp(logits, 2);
  CHECK(logits[0] == 1.0);
  CHECK(logits[2] == 3.0);
  CHECK(logits[3] == kMaskedLogit);

  logits = {1.0, 2.0};
  CHECK_THROWS_AS(mask_monotone(logits, 2), Error);
  CHECK_THROWS_AS(mask_causal_clamp(logits, -1), Error);
}

TEST_CASE("causal joint softmax matches a brute-force enumeration") {
  Rng rng(21);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_int_distribution<int> card_pick(2, 5);
  for (int trial = 0; trial < 200; ++trial) {
    int ce = card_pick(rng), cc = card_pick(rng);
    std::vector<double> le(ce), lc(cc);
    for (double& v : le) v = unif(rng);
    for (double& v : lc) v = unif(rng);
    int fe = static_cast<int>(rng() % ce), fc = static_cast<int>(rng() % cc);

    auto res = apply_causal_joint(le, lc, fe, fc);
    auto ora = joint_oracle(le, lc, fe, fc);

    double qsum = 0.0;
    for (int a = 0; a < cc; ++a) qsum += res.q_cause[a];
    CHECK(qsum == doctest::Approx(1.0).epsilon(1e-12));
    for (int a = 0; a < cc; ++a)
      CHECK(testutil::rel_err(res.q_cause[a], ora.qc[a]) < 1e-12);
    for (int b = 0; b < ce; ++b)
      CHECK(testutil::rel_err(res.q_effect[b], ora.qe[b]) < 1e-12);
    double best = -1.0;
    for (int a = 0; a < cc; ++a)
      for (int b = 0; b < ce; ++b) {
        CHECK(testutil::rel_err(res.at(a, b), ora.p[a][b]) < 1e-12);
        if ((b <= fe) || (a > fc))
          best = std::max(best, ora.p[a][b]);
        else
          CHECK(res.at(a, b) == 0.0);
      }
    // The argmax pair is legal and carries maximal mass.
    bool legal = (res.argmax_effect <= fe) || (res.argmax_cause > fc);
    CHECK(legal);
    CHECK(res.at(res.argmax_cause, res.argmax_effect) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("causal joint keeps only non-increasing effects under a maximal cause") {
  // factual cause is the top category, so no pair with an increased effect is
  // legal.
  std::vector<double> le = {0.3, 0.9, 0.1};
  std::vector<double> lc = {0.5, 0.2};
  auto res = apply_causal_joint(le, lc, 1, 1);
  for (int a = 0; a < 2; ++a) CHECK(res.at(a, 2) == 0.0);
  CHECK(res.q_effect[2] == 0.0);
  double qsum = res.q_effect[0] + res.q_effect[1];
  CHECK(qsum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mutable hamming and budget checks ignore immutable features") {
  ConstraintSet cs = plain_set(4);
  cs.immutable[1] = true;
  DiscreteInstance a = {0, 0, 1, 2};
  DiscreteInstance b = {0, 2, 0, 0};
  CHECK(hamming_mutable(a, b, cs) == 2);
  CHECK(within_budget(a, b, cs, 2.0));
  CHECK_FALSE(within_budget(a, b, cs, 1.0));
  CHECK_THROWS_AS(hamming_mutable({0, 0}, b, cs), Error);
}

TEST_CASE("feasibility enforces immutability, monotonicity, and causal order") {
  ConstraintSet cs = plain_set(4);
  cs.immutable[0] = true;
  cs.monotone[1] = true;
  cs.rules = {{3, 2}};  // raising feature 3 requires raising feature 2
  DiscreteInstance factual = {1, 1, 1, 1};

  CHECK(feasible({1, 1, 1, 1}, factual, cs));
  CHECK_FALSE(feasible({0, 1, 1, 1}, factual, cs));  // immutable moved
  CHECK_FALSE(feasible({1, 0, 1, 1}, factual, cs));  // monotone decreased
  CHECK(feasible({1, 2, 1, 1}, factual, cs));
  CHECK_FALSE(feasible({1, 1, 1, 2}, factual, cs));  // effect raised alone
  CHECK(feasible({1, 1, 2, 2}, factual, cs));        // cause raised with it
  CHECK(feasible({1, 1, 1, 0}, factual, cs));        // lowering the effect is free
  CHECK(feasible({1, 1, 2, 1}, factual, cs));        // cause alone is free
}

TEST_CASE("constraint validation rejects inconsistent declarations") {
  ConstraintSet cs = plain_set(3);
  cs.monotone[0] = true;
  cs.ordered[0] = false;
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.rules = {{0, 0}};
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.rules = {{0, 5}};
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.ordered[1] = false;
  cs.rules = {{1, 0}};
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.cards[2] = 0;
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.budget = -1.0;
  CHECK_THROWS_AS(cs.validate(), Error);

  cs = plain_set(3);
  cs.immutable.pop_back();
  CHECK_THROWS_AS(cs.validate(), Error);
}

TEST_CASE("credit schema builds the expected constraint set") {
  Table t = read_csv("data/credit_synth.csv");
  Schema schema = Schema::load("configs/credit.schema.json");
  DiscretizerOptions opt;
  opt.bins_per_numeric = 5;
  Discretizer disc = Discretizer::fit(t, schema, opt);
  ConstraintSet cs = build_constraints(schema, disc, 4.0);

  REQUIRE(cs.num_features() == 20);
  CHECK(cs.budget == 4.0);
  int age = schema.feature_index("age");
  int employment = schema.feature_index("employment");
  int residence = schema.feature_index("residence_since");
  int status = schema.feature_index("personal_status");
  int liable = schema.feature_index("people_liable");
  int foreign = schema.feature_index("foreign_worker");
  int checking = schema.feature_index("checking_status");

  CHECK(cs.immutable[status]);
  CHECK(cs.immutable[liable]);
  CHECK(cs.immutable[foreign]);
  CHECK_FALSE(cs.immutable[age]);
  CHECK(cs.monotone[age]);
  CHECK_FALSE(cs.monotone[employment]);
  CHECK(cs.ordered[age]);
  CHECK(cs.ordered[employment]);
  CHECK_FALSE(cs.ordered[checking]);

  REQUIRE(cs.rules.size() == 2);
  CHECK(cs.rules[0].effect == residence);
  CHECK(cs.rules[0].cause == age);
  CHECK(cs.rules[1].effect == employment);
  CHECK(cs.rules[1].cause == age);

  // Both rules share the age cause, so they join into one group with the
  // cause listed first and effects in feature order.
  auto groups = cs.joint_groups();
  REQUIRE(groups.size() == 1);
  REQUIRE(groups[0].members.size() == 3);
  CHECK(groups[0].members[0] == age);
  CHECK(groups[0].members[1] == employment);
  CHECK(groups[0].members[2] == residence);
  CHECK(cs.mutable_features().size() == 17);
}
