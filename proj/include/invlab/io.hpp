#pragma once

#include <memory>
#include <string>

#include "invlab/mlp.hpp"
#include "invlab/predictor.hpp"
#include "invlab/sampler.hpp"

namespace invlab {

// On-disk layout shared by trajectories and models: a magic line, one JSON
// header line, a "BLOB <byte count>" line, then the raw payload as
// little-endian 64-bit floats (byte-swapped on big-endian hosts).
//
//   INVLAB-TRAJ v1 | INVLAB-MODEL v1
//   {...header...}
//   BLOB <n>
//   <n bytes>
//
// Loads are strict: unknown magic/version, missing header fields, or a
// payload shorter than announced are rejected with the offending item named.

std::string hash_to_hex(std::uint64_t hash);
std::uint64_t hex_to_hash(const std::string& hex);

void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

void save_model(const GaussianMixture& model, const std::string& path);
void save_model(const LinearModel& model, const std::string& path);
void save_model(const MlpDenoiser& model, const std::string& path);

// Dispatches on the stored kind; validates the stored schedule hash against
// the given schedule for schedule-bound kinds.
std::unique_ptr<EpsilonPredictor> load_model(const std::string& path,
                                             const NoiseSchedule& schedule);

}  // namespace invlab
