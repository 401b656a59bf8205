#include <doctest.h>

#include <cmath>

#include "evnet/error.hpp"
#include "evnet/modelspec.hpp"
#include "evnet/synth.hpp"
#include "support.hpp"

using namespace evnet;
using evnet::testing::record;

namespace {

std::vector<std::string> with_const(std::vector<std::string> names) {
  names.emplace_back(kInterceptName);
  return names;
}

}  // namespace

TEST_CASE("demand design shape and column names") {
  const Panel panel = Panel::from_records(evnet::testing::small_records());
  const auto d = build_demand_design(panel);
  CHECK(d.k() == 6);
  CHECK(d.n() == panel.derived_count());
  CHECK(d.regressor_names == with_const({"ln(Charging station)", "ln(oil_price)", "ln(White Population)",
                                         "ln(Asian Population)", "EV_Burden"}));
  CHECK(d.instrument_names == with_const({"P_zt", "ln(oil_price)", "ln(White Population)", "ln(Asian Population)",
                                          "EV_Burden"}));
  CHECK(d.response_name == "ln(EV sales)");

  const auto log_form = build_demand_design(panel, ModelOptions{.burden_form = BurdenForm::Log});
  CHECK(log_form.regressor_names[4] == "ln(EV_Burden)");
  CHECK(log_form.regressors(0, 4) == doctest::Approx(std::log(d.regressors(0, 4))).epsilon(1e-14));
}

TEST_CASE("supply design shape and column names") {
  const Panel panel = Panel::from_records(evnet::testing::small_records());
  const auto d = build_supply_design(panel);
  CHECK(d.k() == 5);
  CHECK(d.regressor_names == with_const({"ln(EV Stock)", "ln(parking lot)", "Saturation", "Rebate Percentage"}));
  CHECK(d.instrument_names == with_const({"P_zt", "ln(parking lot)", "Saturation", "Rebate Percentage"}));
}

TEST_CASE("zero sales give a zero response and the row is kept") {
  auto records = evnet::testing::small_records();
  records[1].ev_sales = 0.0;
  const Panel panel = Panel::from_records(records);
  const auto d = build_demand_design(panel);
  CHECK(d.n() == 4);
  CHECK(d.response[0] == 0.0);
}

TEST_CASE("design columns match a hand recomputation") {
  const auto records = evnet::testing::small_records();
  const Panel panel = Panel::from_records(records);
  const auto demand = build_demand_design(panel);
  const auto supply = build_supply_design(panel);

  // Rows with lags are the 2021 and 2022 records of each zip, in panel order.
  const std::vector<std::size_t> rows{1, 2, 4, 5};
  double m_y = 0, m_e = 0, m_oil = 0, m_b = 0, m_q = 0, m_park = 0, m_reb = 0, m_inst = 0;
  for (std::size_t i : rows) {
    const auto& r = records[i];
    const auto& lag = records[i - 1];
    const auto& other_lag = records[i < 3 ? i + 2 : i - 4];
    m_y += std::log(1.0 + r.ev_sales);
    m_e += std::log(1.0 + r.station_stock);
    m_oil += std::log(r.oil_price);
    m_b += r.avg_ev_price / r.median_income;
    m_q += std::log(1.0 + r.ev_stock);
    m_park += std::log(1.0 + r.parking_lots);
    m_reb += r.rebate_pct;
    m_inst += r.parking_lots * other_lag.station_stock;
    CHECK(lag.zip == r.zip);
    CHECK(other_lag.zip != r.zip);
    CHECK(other_lag.year == r.year - 1);
  }
  const double n = 4.0;
  CHECK(demand.response.mean() == doctest::Approx(m_y / n).epsilon(1e-14));
  CHECK(demand.regressors.col(0).mean() == doctest::Approx(m_e / n).epsilon(1e-14));
  CHECK(demand.regressors.col(1).mean() == doctest::Approx(m_oil / n).epsilon(1e-14));
  CHECK(demand.regressors.col(4).mean() == doctest::Approx(m_b / n).epsilon(1e-14));
  CHECK(demand.instruments.col(0).mean() == doctest::Approx(m_inst / n).epsilon(1e-14));
  CHECK(supply.response.mean() == doctest::Approx(m_e / n).epsilon(1e-14));
  CHECK(supply.regressors.col(0).mean() == doctest::Approx(m_q / n).epsilon(1e-14));
  CHECK(supply.regressors.col(1).mean() == doctest::Approx(m_park / n).epsilon(1e-14));
  CHECK(supply.regressors.col(3).mean() == doctest::Approx(m_reb / n).epsilon(1e-14));
  CHECK(supply.regressors.col(4).mean() == 1.0);
}

TEST_CASE("panel without lags is a pipeline-order error") {
  const Panel panel = Panel::from_records({record("A", 2020, 1, 2, 3), record("B", 2020, 1, 2, 3)});
  try {
    build_demand_design(panel);
    FAIL("expected pipeline-order error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PipelineOrder);
  }
}

TEST_CASE("synthetic truth recovery for both equations") {
  SynthConfig cfg;
  cfg.n_zips = 200;
  cfg.seed = 11;
  const Panel panel = generate_panel(cfg);
  const auto demand = estimate_demand(panel, EstimatorKind::GMM);
  const auto supply = estimate_supply(panel, EstimatorKind::GMM);
  for (const auto& [name, truth] : cfg.true_demand_coeffs)
    CHECK_MESSAGE(std::abs(demand.coefficient(name) - truth) <= 4 * demand.std_error(name), name);
  for (const auto& [name, truth] : cfg.true_supply_coeffs)
    CHECK_MESSAGE(std::abs(supply.coefficient(name) - truth) <= 4 * supply.std_error(name), name);
  CHECK(demand.n_obs == panel.derived_count());
  CHECK(demand.metadata["equation"] == "demand");
  CHECK(demand.metadata["burden_form"] == "linear");
}

TEST_CASE("both equations are just identified, so GMM equals TSLS") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthConfig cfg;
    cfg.seed = seed;
    const Panel panel = generate_panel(cfg);
    const auto dt = estimate_demand(panel, EstimatorKind::TSLS);
    const auto dg = estimate_demand(panel, EstimatorKind::GMM);
    const auto st = estimate_supply(panel, EstimatorKind::TSLS);
    const auto sg = estimate_supply(panel, EstimatorKind::GMM);
    CHECK((dt.coefficients - dg.coefficients).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((st.coefficients - sg.coefficients).cwiseAbs().maxCoeff() < 1e-8);
    const auto spec = demand_spec();
    CHECK(spec.instruments.size() == spec.regressors.size());
    CHECK(supply_spec().instruments.size() == supply_spec().regressors.size());
  }
}

TEST_CASE("constant station stock is a singular design") {
  auto cfg = SynthConfig{};
  auto records = generate_panel(cfg).records();
  for (auto& r : records) r.station_stock = 100.0;
  const Panel panel = Panel::from_records(records);
  try {
    estimate_demand(panel, EstimatorKind::OLS);
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
    CHECK(e.context()["columns"][0] == "ln(Charging station)");
  }
}

TEST_CASE("zero rebate and degenerate saturation make the supply design singular") {
  std::vector<PanelRecord> records;
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y) {
      auto r = record("Z" + std::to_string(z), 2018 + y, 5 + z + y, 100, 10, 30 + 7 * z);
      r.ev_stock = 50.0 * (1 + z + 2 * y);
      r.station_stock = 8.0 + 3 * z + y * y;
      r.rebate_pct = 0.0;
      records.push_back(r);
    }
  // Equal raw ratios everywhere: make Q = E at the lagged year.
  for (auto& r : records) r.ev_stock = r.station_stock;
  const Panel panel = Panel::from_records(records);
  CHECK(panel.saturation_bounds().degenerate());
  try {
    estimate_supply(panel, EstimatorKind::OLS);
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
}

TEST_CASE("single-zip panel has an all-zero instrument") {
  std::vector<PanelRecord> records;
  for (int y = 0; y < 12; ++y) {
    auto r = record("A", 2010 + y, 10 + y * y, 100 + 20 * y, 10 + 3 * y);
    r.rebate_pct = 0.1 + 0.05 * (y % 5);
    records.push_back(r);
  }
  const Panel panel = Panel::from_records(records);
  const auto d = build_supply_design(panel);
  CHECK(d.instruments.col(0).cwiseAbs().maxCoeff() == 0.0);
  try {
    estimate_supply(panel, EstimatorKind::TSLS);
    FAIL("expected singular design");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
}

TEST_CASE("estimated equations report the table layout") {
  const Panel panel = generate_panel(SynthConfig{});
  const auto demand = estimate_demand(panel, EstimatorKind::GMM);
  const auto supply = estimate_supply(panel, EstimatorKind::GMM);
  CHECK(demand.names.size() == 6);
  CHECK(supply.names.size() == 5);
  const std::string table = format_table({{"GMM", &demand}}, "EV demand");
  for (const auto& name : demand_spec().regressors) CHECK(table.find(name) != std::string::npos);
  CHECK(table.find("Number of observations") != std::string::npos);
  CHECK(table.find(std::to_string(demand.n_obs)) != std::string::npos);
  const auto j = to_json(supply);
  CHECK(j["coefficients"].size() == 5);
  CHECK(j.contains("r_squared"));
  CHECK(j["n_obs"] == panel.derived_count());
}

TEST_CASE("elasticity readout of the log-log station coefficient") {
  const Panel panel = generate_panel(SynthConfig{});
  const auto r = estimate_demand(panel, EstimatorKind::OLS);
  const auto d = build_demand_design(panel);
  const double beta = r.coefficient("ln(Charging station)");
  // A large station count so that log1p is indistinguishable from log.
  const double stations = 1e9;
  for (double h : {1e-4, 1e-5, 1e-6}) {
    Eigen::RowVectorXd row = d.regressors.row(0);
    row[0] = log_count(stations);
    const double base = row.dot(r.coefficients);
    row[0] = log_count(stations * (1.0 + h));
    const double bumped = row.dot(r.coefficients);
    const double response = std::expm1(bumped - base);
    CHECK(response / h == doctest::Approx(beta).epsilon(1e-6 + std::abs(beta) * h));
  }
}

TEST_CASE("describe lists the bound columns") {
  const auto j = describe();
  CHECK(j["demand"]["regressors"].size() == 5);
  CHECK(j["supply"]["regressors"].size() == 4);
  CHECK(j["demand"]["endogenous"][0] == "ln(Charging station)");
  CHECK(j["supply"]["endogenous"][0] == "ln(EV Stock)");
  CHECK(j["conventions"]["count_log"] == "log1p");
}
