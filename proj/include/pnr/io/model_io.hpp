#pragma once

#include <filesystem>
#include <json.hpp>

#include "pnr/calibration.hpp"
#include "pnr/grid.hpp"
#include "pnr/inference.hpp"
#include "pnr/pca.hpp"
#include "pnr/povm.hpp"

namespace pnr::io {

nlohmann::json grid_to_json(const OutcomeGrid& grid);
OutcomeGrid grid_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const povm::GaussianMixturePovm& model);
povm::GaussianMixturePovm model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const povm::GaussianMixturePovm& model);
povm::GaussianMixturePovm load_model(const std::filesystem::path& path);

//! POVM table as CSV (first column the grid point, one column per photon
//! number) with the grid descriptor embedded in the header line.
void save_table(const std::filesystem::path& path, const povm::PovmTable& table);
povm::PovmTable load_table(const std::filesystem::path& path);

//! Structured binary basis file: magic "PNRBASIS", version u16, sample_count
//! u32, n_components u32, then mean trace, components and variances as f64.
void save_basis(const std::filesystem::path& path, const pca::PrincipalBasis& basis);
pca::PrincipalBasis load_basis(const std::filesystem::path& path);

//! Calibration power-pair series from CSV columns x,x_error,y,y_error.
calib::PowerPairSeries load_power_pairs(const std::filesystem::path& path);

}  // namespace pnr::io
