#pragma once

#include <json.hpp>

#include "tdoa/identifiability.hpp"
#include "tdoa/likelihood.hpp"
#include "tdoa/noise_variance.hpp"
#include "tdoa/pipeline.hpp"

namespace tdoa {

using Json = nlohmann::json;

namespace detail {

inline Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Json matrix_to_json_row_major(const Matrix& m) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
  }
  return arr;
}

}  // namespace detail

inline Json to_json(const BoundsReport& report) {
  return Json{{"fisher", detail::matrix_to_json_row_major(report.fisher)},
              {"crlb", report.crlb},
              {"rcrlb", report.rcrlb}};
}

inline Json to_json(const VarianceEstimate& est) {
  return Json{{"sigma2_hat", est.sigma2_hat},
              {"roots", est.roots},
              {"accepted", est.accepted},
              {"residual", est.residual}};
}

inline Json to_json(const EstimateReport& report) {
  return Json{{"x_hat", detail::vector_to_json(report.x_hat)},
              {"sigma2_hat", report.sigma2_hat},
              {"x_be", detail::vector_to_json(report.x_be)},
              {"y_be", detail::vector_to_json(report.y_be.y)},
              {"gn_iterations", report.gn_iterations},
              {"gn_step_norms", report.gn_step_norms},
              {"crlb", report.crlb},
              {"fallbacks", report.fallbacks},
              {"wall_time", report.wall_time}};
}

inline Json to_json(const IdentifiabilityReport& report) {
  return Json{{"veronese_rank", report.veronese_rank},
              {"veronese_full", report.veronese_full},
              {"affine_rank", report.affine_rank},
              {"m_matrix_min_eig", report.m_matrix_min_eig},
              {"verdict", to_string(report.verdict)}};
}

}  // namespace tdoa
