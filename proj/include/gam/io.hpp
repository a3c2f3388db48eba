#pragma once

#include "gam/hamiltonian.hpp"
#include "gam/ksoperator.hpp"
#include "gam/model.hpp"
#include "gam/prufer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace gam {

inline constexpr const char* kVersion = "gamlab 1.0.0";

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

/// Writes through a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Realization as CSV rows (k, omega).
std::string realization_csv(const Realization& real);
Realization parse_realization_csv(const std::string& text, std::uint64_t seed = 0);

/// Trajectory rows (n, u, R_log2scale, phi_lifted); u carries its scale, R is given as log2.
std::string trajectory_csv(const PruferTrajectory& traj);

/// Eigenvalues and layout as JSON; vectors as raw column-major float64.
std::string eigensystem_json(const EigenSystem& sys);
std::string eigensystem_binary(const EigenSystem& sys);
EigenSystem eigensystem_from(const std::string& json_text, const std::string& binary);

/// On-disk cache of eigensystems keyed by (config hash, L, seed).
class EigenCache {
public:
    explicit EigenCache(std::filesystem::path root);
    std::filesystem::path stem(const ModelConfig& config, long L, std::uint64_t seed) const;
    std::optional<EigenSystem> load(const ModelConfig& config, long L, std::uint64_t seed) const;
    void store(const ModelConfig& config, long L, std::uint64_t seed, const EigenSystem& sys) const;
    EigenSystem get(const ModelConfig& config, long L, std::uint64_t seed) const;

private:
    std::filesystem::path root_;
};

/// Row-major float64 matrix bytes and a JSON description of the grid.
std::string kernel_binary(const KernelGrid& grid);
std::string kernel_json(const KernelGrid& grid);

}  // namespace gam
