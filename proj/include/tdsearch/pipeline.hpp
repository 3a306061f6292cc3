#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tdsearch/config.hpp"
#include "tdsearch/supernet.hpp"

namespace tds {

/// Level-1 outcome for one distinct matrix size. Every matrix of that size
/// shares the selected shape.
struct ShapeSelection {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<ShapeCandidate> candidates;
    CostTable table;
    std::vector<std::size_t> front;  ///< indices into table.rows
    CostTableRow selected;
};

struct SurrogateArtifacts {
    SampledDataset dataset;
    double fidelity = 0.0;  ///< holdout Spearman between predicted and true accuracy
};

struct LayerReport {
    std::size_t layer = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    TensorizationShape shape;
    RankSpec ranks;
    std::size_t params = 0;
    double compression = 0.0;
    double error = 0.0;
    CostRecord cost;
};

struct DistillMetrics {
    double teacher_accuracy = 0.0;
    double projected_accuracy = 0.0;  ///< student after projection, before training
    double student_accuracy = 0.0;
    std::vector<double> stage1_curve;
    std::vector<double> stage2_curve;
};

struct SearchArtifacts {
    std::string hash;  ///< config hash the artifacts belong to
    std::vector<ShapeSelection> shapes;
    SurrogateArtifacts surrogate;
    EvolutionResult evolution;
    RankGenome best_genome;
    std::vector<LayerReport> layers;
    DistillMetrics distill;

    bool has_shapes = false;
    bool has_surrogate = false;
    bool has_evolution = false;
    bool has_distill = false;
};

struct PipelineError : std::runtime_error {
    std::string stage;
    PipelineError(std::string stage_name, const std::string& message)
        : std::runtime_error("stage " + stage_name + ": " + message),
          stage(std::move(stage_name)) {}
};

/// The teacher network and its task, deterministically rebuilt from config.
struct TeacherSetup {
    ToyNet teacher;
    ClusterTask task;
};

TeacherSetup build_teacher(const PipelineConfig& config);

/// Level 1 for every distinct hidden-matrix size.
std::vector<ShapeSelection> run_shape_search(const PipelineConfig& config, const ToyNet& teacher);

/// Level 2: supernet and rank space under the selected shapes.
std::vector<SuperNetLayer> build_supernet(const PipelineConfig& config, const ToyNet& teacher,
                                          const std::vector<ShapeSelection>& shapes);

SurrogateArtifacts run_surrogate(const PipelineConfig& config,
                                 const std::vector<SuperNetLayer>& layers);

EvolutionResult run_evolution(const PipelineConfig& config,
                              const std::vector<SuperNetLayer>& layers,
                              const SurrogateArtifacts& surrogate);

/// Per-layer rank spec of a genome entry under the layer's format.
RankSpec genome_entry_ranks(Format format, const std::vector<std::size_t>& entry);

std::vector<LayerReport> report_layers(const PipelineConfig& config, const ToyNet& teacher,
                                       const std::vector<ShapeSelection>& shapes,
                                       const RankGenome& genome);

DistillMetrics run_distill(const PipelineConfig& config, const ToyNet& teacher,
                           const ClusterTask& task, const std::vector<ShapeSelection>& shapes,
                           const RankGenome& genome);

/// Full Level 1 -> 2 -> 3 run. Artifacts are persisted to config.out_dir;
/// on a stage failure the partial artifacts are persisted and a
/// PipelineError names the stage.
SearchArtifacts run_pipeline(const PipelineConfig& config);

// Persistence. Artifact files: shape_table.json, cost_table.json,
// surrogate.json, evolution.json, genome.json, report.csv.
void save_artifacts(const SearchArtifacts& artifacts, const std::string& dir);
SearchArtifacts load_artifacts(const std::string& dir);

/// Per-layer breakdown CSV plus totals; fractions sum to 1.
void write_report_csv(const SearchArtifacts& artifacts, const std::string& path);

}  // namespace tds
