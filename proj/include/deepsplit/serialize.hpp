#pragma once

#include <iosfwd>
#include <string>

#include "deepsplit/paths.hpp"
#include "deepsplit/trainer.hpp"

namespace deepsplit {

/// Little-endian binary dump of one trained step: shape, step index, final
/// loss, flat parameters and the running BN statistics. Layout in README.
void write_step(std::ostream& out, const TrainedStep& step);
TrainedStep read_step(std::istream& in);

void save_step(const std::string& path, const TrainedStep& step);
TrainedStep load_step(const std::string& path);

/// Noise path as CSV. A `# T=... N=... substeps=...` comment line precedes
/// the header `i,t,z1,...`; rows hold the finest stored path. Restoring
/// rebuilds the coarse path from every substeps-th row.
void write_noise_csv(std::ostream& out, const NoiseRealization& z);
NoiseRealization read_noise_csv(std::istream& in);

void save_noise_csv(const std::string& path, const NoiseRealization& z);
NoiseRealization load_noise_csv(const std::string& path);

}  // namespace deepsplit
