#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdsearch/accel_cost.hpp"
#include "tdsearch/distill.hpp"
#include "tdsearch/rank_search.hpp"
#include "tdsearch/shape_search.hpp"

namespace tds {

/// The toy model whose weight matrices are searched and factorized:
/// layer_dims = (d_0, ..., d_L) gives hidden matrices d_i x d_{i+1}, plus a
/// d_L x classes head. Weights come from a seeded Gaussian or weights_file.
struct ModelConfig {
    std::vector<std::size_t> layer_dims{16, 16, 16};
    std::size_t classes = 4;
    std::size_t teacher_epochs = 30;
    double teacher_lr = 0.1;
    std::string weights_file;
};

struct PipelineConfig {
    ModelConfig model;
    ClusterTaskConfig task;
    Format format = Format::cp;
    ShapeSpaceConfig shape_space = ShapeSpaceConfig::defaults_for(Format::cp);
    AcceleratorConfig accel;
    SamplerConfig sampler;
    std::size_t surrogate_samples = 2560;
    ForestConfig forest;
    EvolutionConfig evolution;
    DistillConfig distill;
    double target_compression = 0.6;
    std::size_t batch_tokens = 64;
    std::uint64_t seed = 0;
    std::string out_dir = "artifacts";
    int jobs = 1;

    void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& config, const std::string& path);

/// FNV-1a hash of the canonical JSON form; stable across platforms.
std::string config_hash(const PipelineConfig& config);

/// Flat binary weight file: u64 count, then per matrix u64 rows, u64 cols,
/// rows*cols little-endian f64 values (row-major).
void save_weights(const std::string& path, const std::vector<DenseTensor>& matrices);
std::vector<DenseTensor> load_weights(const std::string& path);

}  // namespace tds
