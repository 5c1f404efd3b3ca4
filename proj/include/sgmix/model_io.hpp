#pragma once

#include <cstdint>
#include <filesystem>

#include "sgmix/mixture.hpp"
#include "sgmix/predictor.hpp"

namespace sgmix {

inline constexpr int kModelFormatVersion = 1;

/// Fit provenance stored next to each serialized mixture.
struct FitMeta {
    std::uint64_t seed = 0;
    int iterations = 0;
    double final_delta = 0.0;  ///< last max |resp change|
    bool converged = true;
    int restart = 0;

    static FitMeta from_trace(const FitTrace& t, std::uint64_t seed);
};

struct StoredMixture {
    MixtureModel model;
    FitMeta meta;
};

/// Either a single mixture or the three models of the partition pipeline,
/// as a versioned plain-text file. Values are written with 17 significant
/// digits, so a load reproduces every parameter exactly; files declaring a
/// newer format version are refused.
struct ModelFile {
    bool partitioned = false;
    StoredMixture primary;  ///< the single model, or the full-data model
    StoredMixture nonbone;
    StoredMixture bone;
    PartitionSpec spec;

    PartitionedModel to_partitioned() const;
};

void save_model_file(const std::filesystem::path& path, const ModelFile& mf);
ModelFile load_model_file(const std::filesystem::path& path);

}  // namespace sgmix
