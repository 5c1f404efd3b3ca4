#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sgmix/mixture.hpp"

namespace sgmix {

inline constexpr double kCtMin = -1024.0;
inline constexpr double kCtMax = 3071.0;
inline constexpr int kMrChannels = 4;

/// HU interval with explicit endpoint semantics, e.g. (100, 3071].
struct HuInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = false;
    bool hi_closed = false;

    bool contains(double v) const {
        const bool above = lo_closed ? v >= lo : v > lo;
        const bool below = hi_closed ? v <= hi : v < hi;
        return above && below;
    }
    std::string to_string() const;
};

/// Column-stacked voxel data for one patient: CT in HU, binary mask, four
/// MR channels. The mask is applied at load time, so held rows all carry
/// mask = 1.
struct VoxelTable {
    Eigen::VectorXd ct;
    Eigen::VectorXi mask;
    Eigen::MatrixXd mr;  // n x 4
    std::string patient_id;

    std::size_t rows() const { return static_cast<std::size_t>(ct.size()); }
    /// The stacked n x 5 matrix [ct | mr] used for model fitting.
    Eigen::MatrixXd joint() const;
};

struct LoadOptions {
    bool clamp = false;          ///< clamp CT into [-1024, 3071] instead of erroring
    bool check_ct_range = true;  ///< off when reading predicted tables
};

/// Reads a CSV with header `ct,mask,mr1,mr2,mr3,mr4`, validates every row
/// and drops mask = 0 rows. Errors carry the offending line number.
VoxelTable load_table(const std::filesystem::path& path,
                      const LoadOptions& opts = {});

/// Writes the table (all-ones mask) with 10 significant digits.
void save_table(const std::filesystem::path& path, const VoxelTable& t);

/// Rows whose CT lies in the interval, endpoint semantics exact.
VoxelTable extract_partition(const VoxelTable& t, const HuInterval& interval);

/// Concatenates tables row-wise (same schema by construction).
VoxelTable concat_tables(const std::vector<VoxelTable>& tables);

/// Planted-truth generator: component labels drawn from the mixture
/// weights, rows from the matching skew-normal. Channel 0 is CT.
struct SynthSpec {
    MixtureModel truth;
    std::size_t n = 0;
    std::uint64_t seed = 0;
};

struct SynthResult {
    VoxelTable table;
    std::vector<int> labels;  ///< true component per row
};

SynthResult synth_generate(const SynthSpec& s);

/// Sidecar labels file `<name>.labels.csv` with header `component`.
void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> load_labels(const std::filesystem::path& path);

/// Seeded desk-scale truth model with HU-like CT channel and positive MR
/// channels; used by the synth command when no model file is given.
MixtureModel example_truth_model(int K, int d, std::uint64_t seed,
                                 Variant variant = Variant::skew);

}  // namespace sgmix
