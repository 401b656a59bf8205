#include "evnet/modelspec.hpp"

#include <cmath>

#include "evnet/error.hpp"

namespace evnet {

double log_count(double count) { return std::log1p(count); }

EquationSpec demand_spec(const ModelOptions& options) {
  using namespace demand_cols;
  const char* burden = options.burden_form == BurdenForm::Linear ? kBurden : kLogBurden;
  return {"demand", kResponse, {kStations, kOil, kWhite, kAsian, burden}, {kStations},
          {kInstrumentName, kOil, kWhite, kAsian, burden}};
}

EquationSpec supply_spec() {
  using namespace supply_cols;
  return {"supply", kResponse, {kEvStock, kParking, kSaturation, kRebate}, {kEvStock},
          {kInstrumentName, kParking, kSaturation, kRebate}};
}

namespace {

std::vector<std::size_t> rows_with_lags(const Panel& panel) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < panel.size(); ++i)
    if (panel.derived()[i]) rows.push_back(i);
  if (rows.empty())
    throw Error(ErrorCode::PipelineOrder, "panel has no derived records (every zip needs a lagged year)",
                {{"records", panel.size()}});
  return rows;
}

}  // namespace

template <class Value>
static DesignMatrix build(const Panel& panel, const EquationSpec& spec, Value value) {
  const auto rows = rows_with_lags(panel);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n);
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(spec.regressors.size()));
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(spec.instruments.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = panel.records()[rows[static_cast<std::size_t>(i)]];
    const auto& der = *panel.derived()[rows[static_cast<std::size_t>(i)]];
    y[i] = value(rec, der, spec.response);
    for (std::size_t j = 0; j < spec.regressors.size(); ++j)
      x(i, static_cast<Eigen::Index>(j)) = value(rec, der, spec.regressors[j]);
    for (std::size_t j = 0; j < spec.instruments.size(); ++j)
      z(i, static_cast<Eigen::Index>(j)) = value(rec, der, spec.instruments[j]);
  }
  return DesignMatrix::make(spec.response, std::move(y), std::move(x), spec.regressors, std::move(z),
                            spec.instruments, true);
}

DesignMatrix build_demand_design(const Panel& panel, const ModelOptions& options) {
  using namespace demand_cols;
  const auto spec = demand_spec(options);
  return build(panel, spec, [](const PanelRecord& r, const DerivedRecord& d, const std::string& col) -> double {
    if (col == kResponse) return log_count(r.ev_sales);
    if (col == kStations) return log_count(r.station_stock);
    if (col == kOil) return std::log(r.oil_price);
    if (col == kWhite) return log_count(r.white_pop);
    if (col == kAsian) return log_count(r.asian_pop);
    if (col == kBurden) return d.burden;
    if (col == kLogBurden) return std::log(d.burden);
    if (col == kInstrumentName) return d.instrument;
    throw Error(ErrorCode::SpecMismatch, "unbound demand column '" + col + "'", {{"column", col}});
  });
}

DesignMatrix build_supply_design(const Panel& panel) {
  using namespace supply_cols;
  return build(panel, supply_spec(), [](const PanelRecord& r, const DerivedRecord& d, const std::string& col) -> double {
    if (col == kResponse) return log_count(r.station_stock);
    if (col == kEvStock) return log_count(r.ev_stock);
    if (col == kParking) return log_count(r.parking_lots);
    if (col == kSaturation) return d.saturation;
    if (col == kRebate) return r.rebate_pct;
    if (col == kInstrumentName) return d.instrument;
    throw Error(ErrorCode::SpecMismatch, "unbound supply column '" + col + "'", {{"column", col}});
  });
}

namespace {

EstimationResult run(const DesignMatrix& design, const EquationSpec& spec, EstimatorKind method,
                     const ModelOptions& options, const Panel& panel) {
  EstimationResult r = method == EstimatorKind::GMM ? fit_gmm(design, spec.endogenous, options.gmm_steps, options.fit)
                                                    : fit(design, method, spec.endogenous, options.fit);
  r.metadata["equation"] = spec.name;
  r.metadata["log_convention"] = "log1p for counts, log for prices";
  r.metadata["delta"] = panel.options().delta;
  return r;
}

}  // namespace

EstimationResult estimate_demand(const Panel& panel, EstimatorKind method, const ModelOptions& options) {
  auto r = run(build_demand_design(panel, options), demand_spec(options), method, options, panel);
  r.metadata["burden_form"] = options.burden_form == BurdenForm::Linear ? "linear" : "log";
  return r;
}

EstimationResult estimate_supply(const Panel& panel, EstimatorKind method, const ModelOptions& options) {
  return run(build_supply_design(panel), supply_spec(), method, options, panel);
}

nlohmann::ordered_json describe(const ModelOptions& options) {
  auto eq = [](const EquationSpec& s) {
    nlohmann::ordered_json j;
    j["response"] = s.response;
    j["regressors"] = s.regressors;
    j["endogenous"] = s.endogenous;
    j["instruments"] = s.instruments;
    j["intercept"] = kInterceptName;
    return j;
  };
  nlohmann::ordered_json j;
  j["demand"] = eq(demand_spec(options));
  j["supply"] = eq(supply_spec());
  j["conventions"] = {
      {"count_log", "log1p"},
      {"burden", options.burden_form == BurdenForm::Linear ? "linear avg_ev_price / median_income"
                                                           : "log(avg_ev_price / median_income)"},
      {"saturation", "min-max of log1p(Q[t-1]) / max(log1p(E[t-1]), epsilon) over the whole panel"},
      {"instrument", "parking_lots * sum of other zips' station_stock in t-1"}};
  return j;
}

}  // namespace evnet
