#include <cmath>

#include "brainage/agreement.hpp"
#include "brainage/csv.hpp"
#include "brainage/error.hpp"

namespace brainage::agreement {

AgreementMatrix agreement_matrix(const std::vector<std::string>& models,
                                 const std::vector<explain::GroupImportance>& importances) {
  require(models.size() == importances.size(), ErrorCode::kLength, "one importance per model");
  require(!models.empty(), ErrorCode::kEmptyDataset, "agreement needs at least one model");
  const auto& ref = importances.front();
  for (const auto& gi : importances) {
    require(gi.kind == ref.kind && gi.groups == ref.groups, ErrorCode::kSchema,
            "models do not share the same groups");
    require(gi.scores.size() == gi.groups.size(), ErrorCode::kSchema, "group scores do not match the groups");
  }
  AgreementMatrix m;
  m.kind = ref.kind;
  m.models = models;
  const auto n = static_cast<Eigen::Index>(models.size());
  m.rho = Eigen::MatrixXd::Identity(n, n);
  m.degenerate.assign(models.size(), std::vector<bool>(models.size(), false));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto c = spearman(importances[static_cast<std::size_t>(i)].scores,
                              importances[static_cast<std::size_t>(j)].scores);
      m.rho(i, j) = m.rho(j, i) = c.rho;
      m.degenerate[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = c.degenerate;
      m.degenerate[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = c.degenerate;
    }
  }
  return m;
}

bool AgreementMatrix::symmetric_unit_diagonal(double tol) const {
  if (rho.rows() != rho.cols() || rho.rows() != static_cast<Eigen::Index>(models.size())) return false;
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    if (std::abs(rho(i, i) - 1.0) > tol) return false;
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      if (std::abs(rho(i, j) - rho(j, i)) > tol || std::abs(rho(i, j)) > 1.0 + tol) return false;
    }
  }
  return true;
}

void AgreementMatrix::write_csv(const std::filesystem::path& path) const {
  csv::Table t;
  t.header.push_back("model");
  for (const auto& m : models) t.header.push_back(m);
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::vector<std::string> row{models[i]};
    for (std::size_t j = 0; j < models.size(); ++j) {
      row.push_back(csv::format_double(rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write(path, t);
}

AgreementMatrix AgreementMatrix::read_csv(const std::filesystem::path& path, explain::GroupingKind kind) {
  const auto t = csv::read(path);
  require(!t.header.empty() && t.header.front() == "model", ErrorCode::kSchema, "agreement csv needs a model column");
  AgreementMatrix m;
  m.kind = kind;
  m.models.assign(t.header.begin() + 1, t.header.end());
  const auto n = static_cast<Eigen::Index>(m.models.size());
  require(t.rows.size() == m.models.size(), ErrorCode::kSchema, "agreement csv is not square");
  m.rho.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = t.rows[static_cast<std::size_t>(i)];
    require(row.size() == m.models.size() + 1 && row.front() == m.models[static_cast<std::size_t>(i)],
            ErrorCode::kSchema, "agreement csv row does not match the header");
    for (Eigen::Index j = 0; j < n; ++j) m.rho(i, j) = csv::parse_double(row[static_cast<std::size_t>(j) + 1]);
  }
  m.degenerate.assign(m.models.size(), std::vector<bool>(m.models.size(), false));
  return m;
}

nlohmann::json AgreementMatrix::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json flags = nlohmann::json::array();
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < rho.cols(); ++j) r.push_back(rho(i, j));
    rows.push_back(std::move(r));
    flags.push_back(degenerate[static_cast<std::size_t>(i)]);
  }
  return {{"grouping", explain::to_string(kind)}, {"models", models}, {"rho", rows}, {"degenerate", flags}};
}

}  // namespace brainage::agreement
