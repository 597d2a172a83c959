#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nfm/linfactor.hpp"
#include "nfm/nlcorr.hpp"
#include "nfm/volcal.hpp"

namespace nfm::io {

/// `factor,<asset ids>` header, one row per factor.
void write_weights(const std::filesystem::path& path, const LinearFactorModel& model,
                   const std::vector<std::string>& asset_ids);
LinearFactorModel read_weights(const std::filesystem::path& path, std::vector<std::string>* asset_ids = nullptr);

/// Sectioned key = value text; vectors are comma-separated.
void write_vol_model(const std::filesystem::path& path, const VolModel& vol);
VolModel read_vol_model(const std::filesystem::path& path);

/// Date-indexed series with columns prefix1..prefixK.
void write_series(const std::filesystem::path& path, const Matrix& series, const std::string& prefix,
                  const std::vector<std::string>& dates);

/// Long layout `matrix,p,row,col,value` covering every order of the set.
void write_nlcorr(const std::filesystem::path& path, const NonlinCorrSet& set);
NonlinCorrSet read_nlcorr(const std::filesystem::path& path);

/// `date,omega0[,omega1][,omega0_factors[,omega1_factors]]`; the factor-side columns appear
/// only when the factor loadings determine the drivers.
void write_omega(const std::filesystem::path& path, const OmegaReconstruction& omega,
                 const std::vector<std::string>& dates);

/// Throws MissingArtifactError naming the file when it does not exist.
void require_artifact(const std::filesystem::path& path);

}  // namespace nfm::io
