#include "evnet/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "evnet/error.hpp"
#include "evnet/format.hpp"

namespace evnet {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::OLS: return "OLS";
    case EstimatorKind::TSLS: return "TSLS";
    case EstimatorKind::GMM: return "GMM";
  }
  return "?";
}

std::string to_string(WeightMatrixKind kind) {
  switch (kind) {
    case WeightMatrixKind::Identity: return "identity";
    case WeightMatrixKind::TwoStepRobust: return "two-step-robust";
    case WeightMatrixKind::NotApplicable: return "not-applicable";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "ols") return EstimatorKind::OLS;
  if (t == "tsls" || t == "2sls" || t == "iv") return EstimatorKind::TSLS;
  if (t == "gmm") return EstimatorKind::GMM;
  throw Error(ErrorCode::Usage, "unknown estimator '" + text + "' (expected ols, tsls or gmm)", {{"method", text}});
}

DesignMatrix DesignMatrix::make(std::string response_name, Eigen::VectorXd response, Eigen::MatrixXd regressors,
                                std::vector<std::string> regressor_names, Eigen::MatrixXd instruments,
                                std::vector<std::string> instrument_names, bool include_intercept) {
  DesignMatrix d;
  d.response_name = std::move(response_name);
  d.response = std::move(response);
  d.include_intercept = include_intercept;
  const Eigen::Index n = d.response.size();
  auto append_intercept = [n](Eigen::MatrixXd m, std::vector<std::string>& names) {
    if (m.size() == 0 && names.empty()) m.resize(n, 0);
    Eigen::MatrixXd out(n, m.cols() + 1);
    out << m, Eigen::VectorXd::Ones(n);
    names.emplace_back(kInterceptName);
    return out;
  };
  if (include_intercept) {
    d.regressors = append_intercept(std::move(regressors), regressor_names);
    if (instruments.size() > 0 || !instrument_names.empty())
      d.instruments = append_intercept(std::move(instruments), instrument_names);
  } else {
    d.regressors = std::move(regressors);
    d.instruments = std::move(instruments);
  }
  d.regressor_names = std::move(regressor_names);
  d.instrument_names = std::move(instrument_names);
  return d;
}

std::ptrdiff_t DesignMatrix::regressor_index(const std::string& name) const {
  auto it = std::find(regressor_names.begin(), regressor_names.end(), name);
  return it == regressor_names.end() ? -1 : it - regressor_names.begin();
}

void DesignMatrix::validate(bool instrumental) const {
  const auto rows = response.size();
  if (regressors.rows() != rows || static_cast<std::size_t>(regressors.cols()) != regressor_names.size())
    throw Error(ErrorCode::Validation, "regressor block shape does not match response and names",
                {{"n", rows}, {"rows", regressors.rows()}, {"cols", regressors.cols()}, {"names", regressor_names.size()}});
  if (n() <= k())
    throw Error(ErrorCode::SingularDesign, "design needs more observations than regressors", {{"n", n()}, {"k", k()}});
  if (!response.allFinite()) throw Error(ErrorCode::Validation, "response contains non-finite entries", {{"column", response_name}});
  for (Eigen::Index j = 0; j < regressors.cols(); ++j) {
    const auto col = regressors.col(j);
    if (!col.allFinite())
      throw Error(ErrorCode::Validation, "regressor '" + regressor_names[j] + "' contains non-finite entries",
                  {{"column", regressor_names[j]}});
    const bool is_intercept = include_intercept && regressor_names[j] == kInterceptName;
    if (!is_intercept && (col.maxCoeff() - col.minCoeff()) == 0.0)
      throw Error(ErrorCode::SingularDesign, "regressor '" + regressor_names[j] + "' is constant",
                  {{"columns", {regressor_names[j]}}, {"reason", "constant column"}});
  }
  if (!instrumental) return;
  if (instruments.rows() != rows || static_cast<std::size_t>(instruments.cols()) != instrument_names.size())
    throw Error(ErrorCode::Validation, "instrument block shape does not match response and names",
                {{"rows", instruments.rows()}, {"cols", instruments.cols()}, {"names", instrument_names.size()}});
  if (m() < k())
    throw Error(ErrorCode::SingularDesign, "order condition fails: fewer instruments than regressors",
                {{"m", m()}, {"k", k()}});
  for (Eigen::Index j = 0; j < instruments.cols(); ++j)
    if (!instruments.col(j).allFinite())
      throw Error(ErrorCode::Validation, "instrument '" + instrument_names[j] + "' contains non-finite entries",
                  {{"column", instrument_names[j]}});
}

bool EstimationResult::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

Eigen::Index index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end())
    throw Error(ErrorCode::SpecMismatch, "coefficient '" + name + "' missing from estimation result",
                {{"missing", name}, {"available", names}});
  return it - names.begin();
}

}  // namespace

double EstimationResult::coefficient(const std::string& name) const { return coefficients[index_of(names, name)]; }
double EstimationResult::std_error(const std::string& name) const { return std_errors[index_of(names, name)]; }
void EstimationResult::set_coefficient(const std::string& name, double value) {
  coefficients[index_of(names, name)] = value;
}

double EstimationResult::p_value(const std::string& name) const {
  const double se = std_error(name);
  if (!(se > 0.0)) return coefficient(name) == 0.0 ? 1.0 : 0.0;
  return std::erfc(std::abs(coefficient(name) / se) / std::sqrt(2.0));
}

namespace {

constexpr double kRankThreshold = 1e-10;

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted_qr(const Eigen::MatrixXd& a) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(kRankThreshold);
  return qr;
}

std::vector<std::string> dependent_columns(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                                           const std::vector<std::string>& names) {
  std::vector<std::string> out;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = qr.rank(); i < perm.size(); ++i) out.push_back(names[perm[i]]);
  return out;
}

// Least squares on a full-column-rank matrix; throws naming the dependent columns otherwise.
Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                    const std::vector<std::string>& names, const nlohmann::json& extra = {}) {
  auto qr = pivoted_qr(a);
  if (qr.rank() < a.cols()) {
    nlohmann::json ctx = {{"columns", dependent_columns(qr, names)}, {"rank", qr.rank()}, {"k", a.cols()}};
    if (extra.is_object()) ctx.update(extra);
    throw Error(ErrorCode::SingularDesign, "design is rank deficient; dependent columns: " +
                                               nlohmann::json(dependent_columns(qr, names)).dump(),
                ctx);
  }
  return qr.solve(b);
}

// (H'H)^{-1} H' diag(e^2) H (H'H)^{-1}, formed from the QR factor of H so the
// normal-equation matrix is never inverted.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& h, const Eigen::VectorXd& e, CovarianceKind kind) {
  const Eigen::Index k = h.cols();
  auto qr = pivoted_qr(h);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd hp = h * qr.colsPermutation();
  // q = H P R^{-1}
  const Eigen::MatrixXd q = r.transpose().triangularView<Eigen::Lower>().solve(hp.transpose()).transpose();
  const Eigen::MatrixXd weighted = q.array().colwise() * e.array();
  const Eigen::MatrixXd meat = weighted.transpose() * weighted;
  const Eigen::MatrixXd rinv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd cov_perm = rinv * meat * rinv.transpose();
  Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
  if (kind == CovarianceKind::HC1) cov *= static_cast<double>(h.rows()) / static_cast<double>(h.rows() - k);
  return cov;
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& resid, bool centered) {
  const double ssr = resid.squaredNorm();
  const double sst = centered ? (y.array() - y.mean()).matrix().squaredNorm() : y.squaredNorm();
  if (sst == 0.0) return 0.0;
  return 1.0 - ssr / sst;
}

EstimationResult finish(EstimatorKind kind, WeightMatrixKind weight, const DesignMatrix& d, Eigen::VectorXd beta,
                        Eigen::MatrixXd cov) {
  EstimationResult r;
  r.estimator = kind;
  r.weight_matrix_kind = weight;
  r.response_name = d.response_name;
  r.names = d.regressor_names;
  const Eigen::VectorXd resid = d.response - d.regressors * beta;
  r.coefficients = std::move(beta);
  r.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.covariance = std::move(cov);
  r.r_squared = r_squared(d.response, resid, d.include_intercept);
  r.n_obs = d.n();
  r.metadata["covariance"] = "HC0";
  if (kind != EstimatorKind::OLS && r.r_squared < 0.0)
    r.warnings.push_back("negative R^2 from structural residuals (reported unclamped)");
  return r;
}

struct IvSetup {
  std::vector<Eigen::Index> endogenous;
  std::vector<Eigen::Index> included_instruments;  // exogenous regressors inside the instrument block
};

IvSetup check_iv(const DesignMatrix& d, const std::vector<std::string>& endogenous) {
  d.validate(true);
  IvSetup s;
  std::set<std::string> endo(endogenous.begin(), endogenous.end());
  for (const auto& name : endogenous) {
    auto j = d.regressor_index(name);
    if (j < 0)
      throw Error(ErrorCode::SpecMismatch, "endogenous column '" + name + "' is not a regressor", {{"column", name}});
    if (std::find(d.instrument_names.begin(), d.instrument_names.end(), name) != d.instrument_names.end())
      throw Error(ErrorCode::Validation, "endogenous column '" + name + "' appears among the instruments",
                  {{"column", name}});
    s.endogenous.push_back(j);
  }
  for (std::size_t j = 0; j < d.regressor_names.size(); ++j) {
    const auto& name = d.regressor_names[j];
    if (endo.contains(name)) continue;
    auto it = std::find(d.instrument_names.begin(), d.instrument_names.end(), name);
    if (it == d.instrument_names.end())
      throw Error(ErrorCode::Validation, "exogenous regressor '" + name + "' must also be an instrument",
                  {{"column", name}});
    s.included_instruments.push_back(it - d.instrument_names.begin());
  }
  return s;
}

// Orthogonal projection onto the column space of `basis` (rank-revealing).
Eigen::MatrixXd project(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& target) {
  if (basis.cols() == 0) return Eigen::MatrixXd::Zero(target.rows(), target.cols());
  auto qr = pivoted_qr(basis);
  const Eigen::Index rank = qr.rank();
  if (rank == 0) return Eigen::MatrixXd::Zero(target.rows(), target.cols());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(basis.rows(), rank);
  return q * (q.transpose() * target);
}

struct FirstStage {
  Eigen::MatrixXd fitted;  // P_Z X
  std::vector<FirstStageDiagnostic> diagnostics;
  std::vector<std::string> warnings;
};

FirstStage first_stage(const DesignMatrix& d, const IvSetup& s, const FitOptions& options) {
  FirstStage fs;
  fs.fitted = project(d.instruments, d.regressors);
  Eigen::MatrixXd included(d.n(), static_cast<Eigen::Index>(s.included_instruments.size()));
  for (std::size_t j = 0; j < s.included_instruments.size(); ++j)
    included.col(static_cast<Eigen::Index>(j)) = d.instruments.col(s.included_instruments[j]);
  const auto rank_z = pivoted_qr(d.instruments).rank();
  const auto rank_w = included.cols() > 0 ? pivoted_qr(included).rank() : 0;
  const double q = static_cast<double>(rank_z - rank_w);
  const double dof = static_cast<double>(static_cast<Eigen::Index>(d.n()) - rank_z);
  for (auto j : s.endogenous) {
    const Eigen::VectorXd x = d.regressors.col(j);
    const double ssr_u = (x - fs.fitted.col(j)).squaredNorm();
    const double ssr_r = (x - project(included, x)).squaredNorm();
    FirstStageDiagnostic diag;
    diag.endogenous = d.regressor_names[j];
    if (q <= 0.0 || ssr_r <= 0.0) {
      diag.f_statistic = 0.0;
    } else if (ssr_u <= 0.0) {
      diag.f_statistic = std::numeric_limits<double>::infinity();
    } else {
      diag.f_statistic = std::max(0.0, (ssr_r - ssr_u) / q) / (ssr_u / dof);
    }
    diag.partial_r_squared = ssr_r > 0.0 ? std::max(0.0, 1.0 - ssr_u / ssr_r) : 0.0;
    if (diag.f_statistic < options.weak_instrument_f) {
      std::ostringstream msg;
      msg << "weak_instrument: first-stage F for '" << diag.endogenous << "' is " << format_number(diag.f_statistic)
          << " (< " << format_number(options.weak_instrument_f) << ")";
      fs.warnings.push_back(msg.str());
    }
    fs.diagnostics.push_back(diag);
  }
  return fs;
}

nlohmann::json first_stage_json(const FirstStage& fs) {
  auto arr = nlohmann::json::array();
  for (const auto& d : fs.diagnostics)
    arr.push_back({{"endogenous", d.endogenous},
                   {"f_statistic", std::isfinite(d.f_statistic) ? nlohmann::json(d.f_statistic) : nlohmann::json("inf")}});
  return {{"first_stage", arr}, {"warnings", fs.warnings}};
}

EstimationResult tsls_core(const DesignMatrix& d, const IvSetup& s, const FitOptions& options, EstimatorKind kind,
                           WeightMatrixKind weight) {
  auto fs = first_stage(d, s, options);
  Eigen::VectorXd beta = solve_least_squares(fs.fitted, d.response, d.regressor_names, first_stage_json(fs));
  const Eigen::VectorXd resid = d.response - d.regressors * beta;
  auto r = finish(kind, weight, d, std::move(beta), sandwich(fs.fitted, resid, options.covariance));
  r.first_stage = fs.diagnostics;
  r.warnings.insert(r.warnings.begin(), fs.warnings.begin(), fs.warnings.end());
  return r;
}

void tag_covariance(EstimationResult& r, const FitOptions& options) {
  r.metadata["covariance"] = options.covariance == CovarianceKind::HC0 ? "HC0" : "HC1";
}

// Columns are rescaled to unit root-mean-square before factorisation so the
// rank threshold does not depend on units (the instrument is a product of
// levels and can be many orders of magnitude larger than the log columns).
struct Equilibrated {
  DesignMatrix design;
  Eigen::VectorXd scale;  // regressor column scales
};

Eigen::VectorXd rescale_columns(Eigen::MatrixXd& m) {
  Eigen::VectorXd f(m.cols());
  const double rows = static_cast<double>(std::max<Eigen::Index>(m.rows(), 1));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double rms = m.col(j).norm() / std::sqrt(rows);
    f[j] = rms > 0.0 && std::isfinite(rms) ? rms : 1.0;
    m.col(j) /= f[j];
  }
  return f;
}

Equilibrated equilibrate(const DesignMatrix& d) {
  Equilibrated e{d, {}};
  e.scale = rescale_columns(e.design.regressors);
  rescale_columns(e.design.instruments);
  return e;
}

EstimationResult restore(EstimationResult r, const Eigen::VectorXd& scale) {
  const Eigen::VectorXd inv = scale.cwiseInverse();
  r.coefficients = r.coefficients.cwiseProduct(inv);
  r.covariance = inv.asDiagonal() * r.covariance * inv.asDiagonal();
  r.std_errors = r.std_errors.cwiseProduct(inv);
  return r;
}

}  // namespace

static EstimationResult ols_core(const DesignMatrix& design, const FitOptions& options) {
  design.validate(false);
  Eigen::VectorXd beta = solve_least_squares(design.regressors, design.response, design.regressor_names);
  const Eigen::VectorXd resid = design.response - design.regressors * beta;
  auto r = finish(EstimatorKind::OLS, WeightMatrixKind::NotApplicable, design, std::move(beta),
                  sandwich(design.regressors, resid, options.covariance));
  tag_covariance(r, options);
  return r;
}

static EstimationResult tsls_fit_core(const DesignMatrix& design, const std::vector<std::string>& endogenous,
                               const FitOptions& options) {
  const auto setup = check_iv(design, endogenous);
  auto r = tsls_core(design, setup, options, EstimatorKind::TSLS, WeightMatrixKind::NotApplicable);
  tag_covariance(r, options);
  return r;
}

static EstimationResult gmm_core(const DesignMatrix& design, const std::vector<std::string>& endogenous, int steps,
                         const FitOptions& options) {
  if (steps != 1 && steps != 2)
    throw Error(ErrorCode::Domain, "GMM supports one or two steps", {{"steps", steps}});
  const auto setup = check_iv(design, endogenous);
  // Step one: the standard IV weight (Z'Z)^{-1}, identical to TSLS.
  auto step1 = tsls_core(design, setup, options, EstimatorKind::GMM, WeightMatrixKind::Identity);
  step1.metadata["gmm_steps"] = 1;
  if (steps == 1) {
    tag_covariance(step1, options);
    return step1;
  }

  const Eigen::MatrixXd& z = design.instruments;
  const Eigen::VectorXd e1 = design.response - design.regressors * step1.coefficients;
  const Eigen::MatrixXd ze = z.array().colwise() * e1.array();
  const Eigen::MatrixXd s = ze.transpose() * ze;  // sum e_i^2 z_i z_i'

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  const double condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(condition <= options.max_condition))
    throw Error(ErrorCode::Conditioning, "robust moment covariance is not invertible",
                {{"condition_estimate", std::isfinite(condition) ? nlohmann::json(condition) : nlohmann::json("inf")},
                 {"max_condition", options.max_condition}});

  // Whiten the moments with the Cholesky factor of S and solve by QR.
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  const Eigen::MatrixXd a = llt.matrixL().solve(z.transpose() * design.regressors);
  const Eigen::VectorXd b = llt.matrixL().solve(z.transpose() * design.response);
  Eigen::VectorXd beta = solve_least_squares(a, b, design.regressor_names);

  auto qr = pivoted_qr(a);
  const Eigen::Index k = a.cols();
  const Eigen::MatrixXd rmat = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd rinv = rmat.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd cov = qr.colsPermutation() * (rinv * rinv.transpose()) * qr.colsPermutation().transpose();
  if (options.covariance == CovarianceKind::HC1)
    cov *= static_cast<double>(design.n()) / static_cast<double>(design.n() - design.k());

  auto r = finish(EstimatorKind::GMM, WeightMatrixKind::TwoStepRobust, design, std::move(beta), std::move(cov));
  r.first_stage = step1.first_stage;
  for (const auto& w : step1.warnings)
    if (w.rfind("weak_instrument", 0) == 0) r.warnings.insert(r.warnings.begin(), w);
  r.metadata["gmm_steps"] = 2;
  r.metadata["weight_condition_estimate"] = condition;
  tag_covariance(r, options);
  return r;
}

EstimationResult fit_ols(const DesignMatrix& design, const FitOptions& options) {
  const auto e = equilibrate(design);
  return restore(ols_core(e.design, options), e.scale);
}

EstimationResult fit_tsls(const DesignMatrix& design, const std::vector<std::string>& endogenous,
                          const FitOptions& options) {
  const auto e = equilibrate(design);
  return restore(tsls_fit_core(e.design, endogenous, options), e.scale);
}

EstimationResult fit_gmm(const DesignMatrix& design, const std::vector<std::string>& endogenous, int steps,
                         const FitOptions& options) {
  if (steps != 1 && steps != 2)
    throw Error(ErrorCode::Domain, "GMM supports one or two steps", {{"steps", steps}});
  const auto e = equilibrate(design);
  return restore(gmm_core(e.design, endogenous, steps, options), e.scale);
}

EstimationResult fit(const DesignMatrix& design, EstimatorKind kind, const std::vector<std::string>& endogenous,
                     const FitOptions& options) {
  switch (kind) {
    case EstimatorKind::OLS: return fit_ols(design, options);
    case EstimatorKind::TSLS: return fit_tsls(design, endogenous, options);
    case EstimatorKind::GMM: return fit_gmm(design, endogenous, 2, options);
  }
  throw Error(ErrorCode::Usage, "unknown estimator");
}

nlohmann::ordered_json to_json(const EstimationResult& r, int digits) {
  nlohmann::ordered_json j;
  auto num = [&](double v) { return round_significant(v, digits); };
  j["estimator"] = to_string(r.estimator);
  j["weight_matrix_kind"] = to_string(r.weight_matrix_kind);
  j["response"] = r.response_name;
  nlohmann::ordered_json coefs = nlohmann::ordered_json::object(), ses = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    coefs[r.names[i]] = num(r.coefficients[static_cast<Eigen::Index>(i)]);
    ses[r.names[i]] = num(r.std_errors[static_cast<Eigen::Index>(i)]);
  }
  j["coefficients"] = coefs;
  j["std_errors"] = ses;
  j["r_squared"] = num(r.r_squared);
  j["n_obs"] = r.n_obs;
  j["warnings"] = r.warnings;
  if (!r.first_stage.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& d : r.first_stage)
      arr.push_back({{"endogenous", d.endogenous},
                     {"f_statistic", std::isfinite(d.f_statistic) ? nlohmann::ordered_json(num(d.f_statistic))
                                                                  : nlohmann::ordered_json("inf")},
                     {"partial_r_squared", num(d.partial_r_squared)}});
    j["first_stage"] = arr;
  }
  if (!r.metadata.empty()) j["metadata"] = r.metadata;
  return j;
}

namespace {

template <class Json>
EstimationResult estimation_from_json_impl(const Json& j) {
  EstimationResult r;
  try {
    if (j.contains("estimator")) r.estimator = parse_estimator(j.at("estimator").template get<std::string>());
    if (j.contains("response")) r.response_name = j.at("response").template get<std::string>();
    const auto& coefs = j.at("coefficients");
    r.coefficients.resize(static_cast<Eigen::Index>(coefs.size()));
    r.std_errors = Eigen::VectorXd::Zero(r.coefficients.size());
    Eigen::Index i = 0;
    for (const auto& [name, value] : coefs.items()) {
      r.names.push_back(name);
      r.coefficients[i] = value.template get<double>();
      if (j.contains("std_errors") && j.at("std_errors").contains(name))
        r.std_errors[i] = j.at("std_errors").at(name).template get<double>();
      ++i;
    }
    if (j.contains("r_squared")) r.r_squared = j.at("r_squared").template get<double>();
    if (j.contains("n_obs")) r.n_obs = j.at("n_obs").template get<std::size_t>();
    if (j.contains("warnings")) r.warnings = j.at("warnings").template get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("malformed estimation result: ") + e.what());
  }
  return r;
}

}  // namespace

EstimationResult estimation_from_json(const nlohmann::json& j) { return estimation_from_json_impl(j); }
EstimationResult estimation_from_json(const nlohmann::ordered_json& j) { return estimation_from_json_impl(j); }

std::string format_table(const std::vector<std::pair<std::string, const EstimationResult*>>& columns,
                         const std::string& title, int digits) {
  std::vector<std::string> rows;
  for (const auto& [label, result] : columns)
    for (const auto& name : result->names)
      if (std::find(rows.begin(), rows.end(), name) == rows.end()) rows.push_back(name);

  auto fixed = [&](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
  };
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Variable"});
  for (const auto& [label, result] : columns) cells.back().push_back(label);
  for (const auto& name : rows) {
    std::vector<std::string> line{name};
    for (const auto& [label, result] : columns) {
      if (!result->has(name)) {
        line.emplace_back("");
        continue;
      }
      std::string cell = fixed(result->coefficient(name));
      if (result->p_value(name) <= 0.05) cell += "*";
      cell += " (" + fixed(result->std_error(name)) + ")";
      line.push_back(cell);
    }
    cells.push_back(line);
  }
  std::vector<std::string> nline{"Number of observations"}, rline{"R^2"};
  for (const auto& [label, result] : columns) {
    nline.push_back(std::to_string(result->n_obs));
    rline.push_back(fixed(result->r_squared));
  }

  std::vector<std::size_t> width(columns.size() + 1, 0);
  auto measure = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  };
  for (const auto& line : cells) measure(line);
  measure(nline);
  measure(rline);

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) os << std::left << std::setw(static_cast<int>(width[i])) << line[i];
      else os << "  " << std::right << std::setw(static_cast<int>(width[i])) << line[i];
    }
    os << '\n';
  };
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  const std::string rule(total - 2, '-');
  os << title << '\n' << rule << '\n';
  emit(cells.front());
  os << rule << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  os << rule << '\n';
  emit(nline);
  emit(rline);
  os << rule << '\n';
  os << "Robust (HC0) standard errors in parentheses; * p-value <= 0.05 (normal approximation).\n";
  return os.str();
}

}  // namespace evnet
