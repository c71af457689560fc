// Generates the bundled credit-scoring benchmark table. The schema mirrors the
// classic German credit layout (20 attributes, good/bad label, 70/30 split)
// with the decision score concentrated on a handful of mutable features so
// that recourse within a small Hamming budget exists for nearly every row.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "par/csv.hpp"
#include "par/numeric.hpp"

using par::Rng;

namespace {

int pick(Rng& rng, const std::vector<double>& probs) {
  std::discrete_distribution<int> d(probs.begin(), probs.end());
  return d(rng);
}

double clampd(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace

int main(int argc, char** argv) {
  std::string out_path = argc > 1 ? argv[1] : "data/credit_synth.csv";
  int n = argc > 2 ? std::atoi(argv[2]) : 1000;
  unsigned long seed = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 20260815UL;
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::vector<std::string> checking = {"lt0", "0to200", "ge200", "none"};
  const std::vector<std::string> history = {"delay", "critical", "existing_paid", "all_paid",
                                            "none_taken"};
  const std::vector<std::string> purpose = {"car_new",   "car_used", "furniture", "radio_tv",
                                            "appliance", "repairs",  "education", "retraining",
                                            "business",  "other"};
  const std::vector<std::string> savings = {"lt100", "100to500", "500to1000", "ge1000", "unknown"};
  const std::vector<std::string> employment = {"unemployed", "lt1y", "1to4y", "4to7y", "ge7y"};
  const std::vector<std::string> status_sex = {"m_divorced", "f_div_married", "m_single",
                                               "m_married"};
  const std::vector<std::string> other_parties = {"none", "co_applicant", "guarantor"};
  const std::vector<std::string> property = {"real_estate", "life_insurance", "car_other",
                                             "unknown"};
  const std::vector<std::string> plans = {"bank", "stores", "none"};
  const std::vector<std::string> housing = {"rent", "own", "free"};
  const std::vector<std::string> job = {"unskilled_nonres", "unskilled_res", "skilled",
                                        "management"};
  const std::vector<std::string> telephone = {"none", "yes"};
  const std::vector<std::string> foreign = {"yes", "no"};

  par::Table t;
  t.columns = {"checking_status", "duration",        "credit_history", "purpose",
               "credit_amount",   "savings_status",  "employment",     "installment_rate",
               "personal_status", "other_parties",   "residence_since", "property_magnitude",
               "age",             "other_payment_plans", "housing",    "existing_credits",
               "job",             "people_liable",   "telephone",      "foreign_worker",
               "class"};

  struct Row {
    std::vector<std::string> cells;
    double score;
  };
  std::vector<Row> rows;
  rows.reserve(n);

  for (int i = 0; i < n; ++i) {
    bool g = unif(rng) < 0.7;

    // Class-conditional distributions are kept concentrated (skewed categories,
    // overlapping numeric mixtures) so that typical rows, and recourses built
    // from them, stay in a moderate likelihood range under a density model fit
    // to either class.
    int i_checking = g ? pick(rng, {0.10, 0.18, 0.24, 0.48}) : pick(rng, {0.50, 0.30, 0.12, 0.08});
    double dur_mix = unif(rng);
    bool dur_long = g ? dur_mix < 0.17 : dur_mix < 0.72;
    int duration = dur_long ? static_cast<int>(clampd(26 + std::abs(gauss(rng)) * 11, 18, 72))
                            : static_cast<int>(clampd(6 + std::abs(gauss(rng)) * 7, 4, 36));
    int i_history = g ? pick(rng, {0.06, 0.28, 0.52, 0.06, 0.08})
                      : pick(rng, {0.30, 0.12, 0.34, 0.14, 0.10});
    int i_purpose = pick(rng, {0.55, 0.15, 0.10, 0.06, 0.04, 0.03, 0.03, 0.02, 0.01, 0.01});
    double amt_mix = unif(rng);
    bool amt_big = g ? amt_mix < 0.18 : amt_mix < 0.70;
    double amount = amt_big ? std::exp(8.45 + 0.30 * gauss(rng)) : std::exp(7.35 + 0.32 * gauss(rng));
    int credit_amount = static_cast<int>(clampd(std::round(amount / 50.0) * 50.0, 250, 18000));
    int i_savings = g ? pick(rng, {0.15, 0.13, 0.14, 0.17, 0.41})
                      : pick(rng, {0.50, 0.22, 0.12, 0.07, 0.09});
    int i_employment = g ? pick(rng, {0.05, 0.09, 0.19, 0.26, 0.41})
                         : pick(rng, {0.15, 0.22, 0.28, 0.20, 0.15});
    int installment = pick(rng, {0.70, 0.17, 0.08, 0.05}) + 1;
    int i_status = pick(rng, {0.06, 0.16, 0.66, 0.12});
    int i_other = pick(rng, {0.90, 0.04, 0.06});
    int residence = pick(rng, {0.06, 0.14, 0.10, 0.70}) + 1;
    int i_property = pick(rng, {0.62, 0.19, 0.12, 0.07});
    double age_mix = unif(rng);
    bool age_old = g ? age_mix < 0.75 : age_mix < 0.40;
    int age = age_old ? static_cast<int>(clampd(30 + std::abs(gauss(rng)) * 10, 19, 75))
                      : static_cast<int>(clampd(21 + std::abs(gauss(rng)) * 5, 19, 75));
    int i_plans = pick(rng, {0.08, 0.04, 0.88});
    int i_housing = pick(rng, {0.12, 0.80, 0.08});
    int credits = pick(rng, {0.72, 0.24, 0.03, 0.01}) + 1;
    int i_job = pick(rng, {0.05, 0.12, 0.72, 0.11});
    int liable = pick(rng, {0.88, 0.12}) + 1;
    int i_phone = pick(rng, {0.75, 0.25});
    int i_foreign = pick(rng, {0.97, 0.03});

    // Additive decision score over a few mutable drivers; an MLP on one-hot
    // codes can represent it exactly.
    const double checking_v[4] = {-1.0, -0.3, 0.5, 1.0};
    const double savings_v[5] = {-1.0, -0.2, 0.3, 0.8, 1.0};
    const double history_v[5] = {-1.0, -0.6, 0.3, 0.6, 1.0};
    const double employ_v[5] = {-1.0, -0.4, 0.1, 0.6, 1.0};
    double duration_v = clampd((24.0 - duration) / 20.0, -1.0, 1.0);
    double amount_v = clampd((4500.0 - credit_amount) / 4000.0, -1.0, 1.0);
    double age_v = clampd((age - 32.0) / 25.0, -1.0, 1.0);
    double score = 1.2 * checking_v[i_checking] + 0.9 * savings_v[i_savings] +
                   0.8 * history_v[i_history] + 0.7 * duration_v + 0.6 * amount_v +
                   0.4 * employ_v[i_employment] + 0.3 * age_v + 0.4 * gauss(rng);

    Row r;
    r.score = score;
    r.cells = {checking[i_checking],
               std::to_string(duration),
               history[i_history],
               purpose[i_purpose],
               std::to_string(credit_amount),
               savings[i_savings],
               employment[i_employment],
               std::to_string(installment),
               status_sex[i_status],
               other_parties[i_other],
               std::to_string(residence),
               property[i_property],
               std::to_string(age),
               plans[i_plans],
               housing[i_housing],
               std::to_string(credits),
               job[i_job],
               std::to_string(liable),
               telephone[i_phone],
               foreign[i_foreign],
               ""};
    rows.push_back(std::move(r));
  }

  // Label the top 70% of scores "good" so the class prior matches the classic
  // 700/300 split exactly.
  std::vector<double> scores;
  for (const Row& r : rows) scores.push_back(r.score);
  std::nth_element(scores.begin(), scores.begin() + n * 3 / 10, scores.end());
  double cut = scores[n * 3 / 10];
  for (Row& r : rows) r.cells.back() = r.score >= cut ? "good" : "bad";

  for (Row& r : rows) t.rows.push_back(std::move(r.cells));
  par::write_csv(t, out_path);
  std::printf("wrote %d rows to %s (seed %lu)\n", n, out_path.c_str(), seed);
  return 0;
}
