#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "biasamp/metrics.hpp"
#include "biasamp/rng.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace biasamp;
using fixtures::rec;

namespace {

// Random record set with both groups and both classes guaranteed present.
std::vector<PredictionRecord> random_records(Rng& rng, int max_n = 100) {
  const int n = 4 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(max_n - 3)));
  std::vector<PredictionRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  records.push_back(rec(1, rng.bernoulli(0.5) ? 1 : -1, rng.uniform01(), Group::a));
  records.push_back(rec(-1, rng.bernoulli(0.5) ? 1 : -1, rng.uniform01(), Group::a));
  records.push_back(rec(1, rng.bernoulli(0.5) ? 1 : -1, rng.uniform01(), Group::b));
  records.push_back(rec(-1, rng.bernoulli(0.5) ? 1 : -1, rng.uniform01(), Group::b));
  for (int i = 4; i < n; ++i) {
    records.push_back(rec(rng.bernoulli(0.5) ? 1 : -1, rng.bernoulli(0.5) ? 1 : -1,
                          rng.uniform01(), rng.bernoulli(0.5) ? Group::a : Group::b));
  }
  return records;
}

} // namespace

TEST_CASE("conditional rates on the 20-record fixture") {
  const auto records = fixtures::twenty_records();
  const auto rates = conditional_rates(records);
  REQUIRE(rates.label_rate(Group::a, 1) == Catch::Approx(0.8).margin(1e-15));
  REQUIRE(rates.label_rate(Group::a, 0) == Catch::Approx(0.2).margin(1e-15));
  REQUIRE(rates.pred_rate(Group::a, 1) == Catch::Approx(0.9).margin(1e-15));
  REQUIRE(rates.pred_rate(Group::b, 0) == Catch::Approx(0.9).margin(1e-15));
  // binary rates within a group sum to one
  REQUIRE(rates.label_rate(Group::a, 0) + rates.label_rate(Group::a, 1) == 1.0);
  REQUIRE(rates.pred_rate(Group::b, 0) + rates.pred_rate(Group::b, 1) == 1.0);
}

TEST_CASE("conditional rates require both groups") {
  std::vector<PredictionRecord> records{rec(1, 1, 0.9, Group::a), rec(-1, 1, 0.9, Group::a)};
  REQUIRE_THROWS_AS(conditional_rates(records), DataError);
  REQUIRE_THROWS_WITH(conditional_rates(records), Catch::Matchers::ContainsSubstring("group b"));
}

TEST_CASE("all-positive group has rate one") {
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(rec(1, 1, 0.9, Group::a));
  for (int i = 0; i < 5; ++i) records.push_back(rec(-1, -1, 0.9, Group::b));
  const auto rates = conditional_rates(records);
  REQUIRE(rates.label_rate(Group::a, 1) == 1.0);
}

TEST_CASE("direction indicator on the fixture and under exact independence") {
  const auto records = fixtures::twenty_records();
  REQUIRE(direction_y(records, Group::a, 1) == 1);
  REQUIRE(direction_y(records, Group::a, 0) == 0);
  // symmetric joint table: y(a, +) == y(b, -)
  REQUIRE(direction_y(records, Group::a, 1) == direction_y(records, Group::b, 0));

  // exactly independent labels and groups -> strict inequality fails -> 0
  std::vector<PredictionRecord> indep;
  for (int t : {1, -1}) {
    for (Group g : {Group::a, Group::b}) {
      indep.push_back(rec(t, t, 0.8, g));
      indep.push_back(rec(t, t, 0.8, g));
    }
  }
  for (int t_idx : {0, 1}) {
    REQUIRE(direction_y(indep, Group::a, t_idx) == 0);
    REQUIRE(direction_y(indep, Group::b, t_idx) == 0);
  }
}

TEST_CASE("bias_amp on the 20-record fixture is 0.1") {
  const auto records = fixtures::twenty_records();
  const auto breakdown = bias_amp(records);
  REQUIRE(breakdown.cells[group_index(Group::a)][1].delta == Catch::Approx(0.1).margin(1e-15));
  REQUIRE(breakdown.aggregate == Catch::Approx(0.1).margin(1e-15));
  REQUIRE(breakdown.aggregate == oracles::oracle_bias_amp(records));
}

TEST_CASE("predictions equal to labels give exactly zero amplification") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto records = random_records(rng);
    for (auto& r : records) {
      r.predicted_class = r.true_class;
      r.correct = true;
    }
    REQUIRE(bias_amp(records).aggregate == 0.0);
  }
}

TEST_CASE("bias_amp requires both classes in the true labels") {
  std::vector<PredictionRecord> records{rec(1, 1, 0.9, Group::a), rec(1, -1, 0.9, Group::b)};
  REQUIRE_THROWS_AS(bias_amp(records), DataError);
}

TEST_CASE("bias_amp flags cells with no predicted mass") {
  // group a never predicted negative although negatives exist there
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 4; ++i) records.push_back(rec(1, 1, 0.9, Group::a));
  records.push_back(rec(-1, 1, 0.9, Group::a));
  for (int i = 0; i < 4; ++i) records.push_back(rec(-1, -1, 0.9, Group::b));
  records.push_back(rec(1, -1, 0.9, Group::b));
  const auto breakdown = bias_amp(records);
  REQUIRE(breakdown.cells[group_index(Group::a)][0].no_predicted_mass);
  REQUIRE(breakdown.cells[group_index(Group::a)][0].prediction_rate == 0.0);
  REQUIRE_FALSE(breakdown.cells[group_index(Group::a)][1].no_predicted_mass);
}

TEST_CASE("bias_amp and ece match brute-force enumeration") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const auto records = random_records(rng);
    REQUIRE(std::fabs(bias_amp(records).aggregate - oracles::oracle_bias_amp(records)) < 1e-12);
    REQUIRE(std::fabs(ece(records).ece - oracles::oracle_ece(records)) < 1e-12);
  }
}

TEST_CASE("bias_amp is invariant to duplicating the record set") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto records = random_records(rng);
    const double one = bias_amp(records).aggregate;
    auto doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    REQUIRE(bias_amp(doubled).aggregate == Catch::Approx(one).margin(1e-15));
  }
}

TEST_CASE("prediction flip negates every delta on the symmetric fixture") {
  // balanced labels per group (rate exactly 1/2), biased predictions
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 5; ++i) records.push_back(rec(1, 1, 0.9, Group::a));
  for (int i = 0; i < 3; ++i) records.push_back(rec(-1, 1, 0.9, Group::a));
  for (int i = 0; i < 2; ++i) records.push_back(rec(-1, -1, 0.9, Group::a));
  for (int i = 0; i < 5; ++i) records.push_back(rec(-1, -1, 0.9, Group::b));
  for (int i = 0; i < 3; ++i) records.push_back(rec(1, -1, 0.9, Group::b));
  for (int i = 0; i < 2; ++i) records.push_back(rec(1, 1, 0.9, Group::b));
  const auto before = bias_amp(records);
  REQUIRE(before.cells[group_index(Group::a)][1].dataset_rate == 0.5);
  for (auto& r : records) {
    r.predicted_class = static_cast<std::int8_t>(-r.predicted_class);
    r.correct = r.predicted_class == r.true_class;
  }
  const auto after = bias_amp(records);
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      REQUIRE(after.cells[g][t].delta ==
              Catch::Approx(-before.cells[g][t].delta).margin(1e-15));
    }
  }
}

TEST_CASE("delta rates per group sum to zero over the two classes") {
  Rng rng(64);
  for (int trial = 0; trial < 50; ++trial) {
    const auto breakdown = bias_amp(random_records(rng));
    for (int g = 0; g < 2; ++g) {
      REQUIRE(breakdown.cells[g][0].delta + breakdown.cells[g][1].delta ==
              Catch::Approx(0.0).margin(1e-12));
    }
  }
}

TEST_CASE("ece on the 4-record fixture is 0.1") {
  const auto records = fixtures::calibration_four();
  const auto table = ece(records);
  REQUIRE(table.ece == Catch::Approx(0.1).margin(1e-15));
  REQUIRE(table.bins.size() == 15);
  std::int64_t count = 0;
  for (const auto& bin : table.bins) count += bin.count;
  REQUIRE(count == 4);
}

TEST_CASE("ece endpoints") {
  // fully confident and always right
  std::vector<PredictionRecord> perfect;
  for (int i = 0; i < 10; ++i) perfect.push_back(rec(1, 1, 1.0, i % 2 ? Group::a : Group::b));
  REQUIRE(ece(perfect).ece == 0.0);

  // constant confidence 0.7 with 70% accuracy is calibrated
  std::vector<PredictionRecord> calibrated;
  for (int i = 0; i < 10; ++i) {
    const bool right = i < 7;
    calibrated.push_back(rec(1, right ? 1 : -1, 0.7, i % 2 ? Group::a : Group::b));
  }
  REQUIRE(ece(calibrated).ece == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("ece is order invariant and bounded") {
  Rng rng(90);
  auto records = random_records(rng);
  const double before = ece(records).ece;
  REQUIRE(before >= 0.0);
  REQUIRE(before <= 1.0);
  // rotate
  std::rotate(records.begin(), records.begin() + 3, records.end());
  REQUIRE(ece(records).ece == before);
}

TEST_CASE("disaggregated accuracy on the fixture") {
  const auto records = fixtures::twenty_records();
  const auto dis = disaggregated_accuracy(records);
  REQUIRE(*dis.cells[group_index(Group::a)][1] == 1.0);   // 8/8
  REQUIRE(*dis.cells[group_index(Group::a)][0] == 0.5);   // 1/2
  REQUIRE(*dis.cells[group_index(Group::b)][1] == 0.5);   // 1/2
  REQUIRE(*dis.cells[group_index(Group::b)][0] == 1.0);   // 8/8
  REQUIRE(dis.counts[group_index(Group::a)][1] == 8);
}

TEST_CASE("disaggregated accuracy marks empty cells undefined") {
  std::vector<PredictionRecord> records{rec(1, 1, 0.9, Group::a), rec(-1, -1, 0.9, Group::b)};
  const auto dis = disaggregated_accuracy(records);
  REQUIRE_FALSE(dis.cells[group_index(Group::a)][0].has_value());
  REQUIRE(dis.cells[group_index(Group::a)][1].has_value());
  // perfect predictor: every defined cell is 1.0
  for (int g = 0; g < 2; ++g) {
    for (int t = 0; t < 2; ++t) {
      if (dis.cells[g][t]) REQUIRE(*dis.cells[g][t] == 1.0);
    }
  }
}

TEST_CASE("confidence interval basics") {
  std::vector<double> constant(20, 3.25);
  const auto s = confidence_interval(constant);
  REQUIRE(s.mean == 3.25);
  REQUIRE(s.half_width.has_value());
  REQUIRE(*s.half_width == 0.0);
  REQUIRE(s.n == 20);

  // {0, 1}: half-width = t_{0.975,1} * (0.5 / sqrt(2)) with t = 12.706
  std::vector<double> two{0.0, 1.0};
  const auto s2 = confidence_interval(two);
  REQUIRE(s2.mean == 0.5);
  REQUIRE(*s2.half_width == Catch::Approx(12.7062047364 * 0.5 / std::sqrt(2.0)).epsilon(1e-8));
  REQUIRE(*s2.half_width == Catch::Approx(4.4923).epsilon(1e-3));

  std::vector<double> one{7.0};
  const auto s1 = confidence_interval(one);
  REQUIRE(s1.mean == 7.0);
  REQUIRE_FALSE(s1.half_width.has_value());
}

TEST_CASE("confidence interval is translation equivariant") {
  Rng rng(17);
  std::vector<double> values;
  for (int i = 0; i < 25; ++i) values.push_back(rng.normal());
  const auto base = confidence_interval(values);
  auto shifted = values;
  for (double& v : shifted) v += 5.0;
  const auto moved = confidence_interval(shifted);
  REQUIRE(moved.mean == Catch::Approx(base.mean + 5.0).margin(1e-12));
  REQUIRE(*moved.half_width == Catch::Approx(*base.half_width).margin(1e-12));
}
