#include "pnr/io/model_io.hpp"

#include <cstring>
#include <fstream>

#include "pnr/errors.hpp"
#include "pnr/io/csv.hpp"

namespace pnr::io {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return out;
}

}  // namespace

json grid_to_json(const OutcomeGrid& grid) {
  return json{{"s_min", grid.s_min}, {"s_max", grid.s_max}, {"n_points", grid.n_points}};
}

OutcomeGrid grid_from_json(const json& j) {
  OutcomeGrid grid;
  grid.s_min = j.at("s_min").get<double>();
  grid.s_max = j.at("s_max").get<double>();
  grid.n_points = j.at("n_points").get<int>();
  grid.validate();
  return grid;
}

json model_to_json(const povm::GaussianMixturePovm& model) {
  json weights = json::array();
  json widths = json::array();
  for (int n = 0; n <= model.n_max; ++n) {
    json wrow = json::array(), srow = json::array();
    for (int j = 0; j <= n; ++j) {
      wrow.push_back(model.weights(n, j));
      srow.push_back(model.widths(n, j));
    }
    weights.push_back(std::move(wrow));
    widths.push_back(std::move(srow));
  }
  return json{{"n_max", model.n_max},
              {"peak_means", vector_to_json(model.peak_means)},
              {"weights", std::move(weights)},
              {"widths", std::move(widths)}};
}

povm::GaussianMixturePovm model_from_json(const json& j) {
  povm::GaussianMixturePovm model;
  model.n_max = j.at("n_max").get<int>();
  if (model.n_max < 0) throw IoError("model json: negative n_max");
  model.peak_means = vector_from_json(j.at("peak_means"));
  const int rows = model.n_max + 1;
  model.weights = Eigen::MatrixXd::Zero(rows, rows);
  model.widths = Eigen::MatrixXd::Zero(rows, rows);
  const auto& weights = j.at("weights");
  const auto& widths = j.at("widths");
  if (static_cast<int>(weights.size()) != rows || static_cast<int>(widths.size()) != rows)
    throw IoError("model json: row count mismatch");
  for (int n = 0; n < rows; ++n) {
    if (static_cast<int>(weights[n].size()) != n + 1 || static_cast<int>(widths[n].size()) != n + 1)
      throw IoError("model json: triangular row length mismatch");
    for (int col = 0; col <= n; ++col) {
      model.weights(n, col) = weights[n][col].get<double>();
      model.widths(n, col) = widths[n][col].get<double>();
    }
  }
  model.validate();
  return model;
}

void save_model(const std::filesystem::path& path, const povm::GaussianMixturePovm& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

povm::GaussianMixturePovm load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("model json parse error: " + std::string(e.what()));
  }
  return model_from_json(j);
}

void save_table(const std::filesystem::path& path, const povm::PovmTable& table) {
  Eigen::MatrixXd m(table.grid.n_points, table.n_max + 2);
  m.col(0) = table.grid.points();
  m.rightCols(table.n_max + 1) = table.theta.transpose();
  std::string header = "s";
  for (int n = 0; n <= table.n_max; ++n) header += ",theta" + std::to_string(n);
  write_matrix_csv(path, header, m);
}

povm::PovmTable load_table(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.rows() < 16 || m.cols() < 2) throw IoError("table csv too small: " + path.string());
  povm::PovmTable table;
  table.grid = OutcomeGrid{m(0, 0), m(m.rows() - 1, 0), static_cast<int>(m.rows())};
  table.grid.validate();
  table.n_max = static_cast<int>(m.cols()) - 2;
  table.theta = m.rightCols(table.n_max + 1).transpose();
  return table;
}

namespace {
constexpr char kBasisMagic[8] = {'P', 'N', 'R', 'B', 'A', 'S', 'I', 'S'};
constexpr std::uint16_t kBasisVersion = 1;
}  // namespace

void save_basis(const std::filesystem::path& path, const pca::PrincipalBasis& basis) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(kBasisMagic, sizeof(kBasisMagic));
  const std::uint16_t version = kBasisVersion;
  const auto samples = static_cast<std::uint32_t>(basis.sample_count());
  const auto comps = static_cast<std::uint32_t>(basis.n_components());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&samples), sizeof(samples));
  out.write(reinterpret_cast<const char*>(&comps), sizeof(comps));
  auto put = [&](const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  };
  put(basis.mean_trace.data(), samples);
  for (std::uint32_t j = 0; j < comps; ++j) put(basis.components.col(j).data(), samples);
  put(basis.variances.data(), comps);
  if (!out) throw IoError("write failed: " + path.string());
}

pca::PrincipalBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kBasisMagic, sizeof(magic)) != 0)
    throw IoError("basis file: bad magic");
  std::uint16_t version = 0;
  std::uint32_t samples = 0, comps = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&samples), sizeof(samples));
  in.read(reinterpret_cast<char*>(&comps), sizeof(comps));
  if (!in || version != kBasisVersion) throw IoError("basis file: unsupported version");

  pca::PrincipalBasis basis;
  basis.mean_trace.resize(samples);
  basis.components.resize(samples, comps);
  basis.variances.resize(comps);
  auto get = [&](double* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
  };
  get(basis.mean_trace.data(), samples);
  for (std::uint32_t j = 0; j < comps; ++j) get(basis.components.col(j).data(), samples);
  get(basis.variances.data(), comps);
  if (!in) throw IoError("basis file: truncated");
  return basis;
}

calib::PowerPairSeries load_power_pairs(const std::filesystem::path& path) {
  const Eigen::MatrixXd m = read_matrix_csv(path);
  if (m.cols() != 4) throw IoError("power pair csv must have columns x,x_error,y,y_error");
  calib::PowerPairSeries series(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    series[static_cast<std::size_t>(i)] = {m(i, 0), m(i, 1), m(i, 2), m(i, 3)};
  return series;
}

}  // namespace pnr::io
