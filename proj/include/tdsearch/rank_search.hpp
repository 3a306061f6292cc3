#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tdsearch/supernet.hpp"

namespace tds {

/// Flat numeric features for the surrogate: rank entries in layer order,
/// tuples flattened.
std::vector<double> genome_features(const RankGenome& genome);

struct RankSample {
    RankGenome genome;
    double accuracy = 0.0;
};

struct SampledDataset {
    std::vector<RankSample> samples;  ///< first train_count rows train, rest hold out
    std::size_t train_count = 0;

    std::span<const RankSample> train() const {
        return {samples.data(), train_count};
    }
    std::span<const RankSample> holdout() const {
        return {samples.data() + train_count, samples.size() - train_count};
    }
};

/// n genomes scored by `evaluator`: the largest and smallest genomes first,
/// then uniformly random ones, each from its own derived seed. Records a
/// 95/5 train/holdout split.
SampledDataset sample_dataset(const RankSpace& space, std::size_t n,
                              const std::function<double(const RankGenome&)>& evaluator,
                              std::uint64_t seed, int jobs = 1);

struct ForestConfig {
    std::size_t tree_count = 100;
    std::size_t max_depth = 10;
    std::size_t min_leaf = 1;
    double bootstrap_fraction = 1.0;
    std::uint64_t seed = 0;
    int jobs = 1;  ///< trees fit in parallel; per-tree seeding keeps results identical
};

struct RegressionTree {
    struct Node {
        bool leaf = true;
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        double value = 0.0;  ///< mean of training targets in the leaf
    };
    std::vector<Node> nodes;

    double predict(std::span<const double> features) const;
};

/// Bagged regression forest with axis-aligned variance-reduction splits.
/// Prediction is the arithmetic mean over trees.
struct SurrogateForest {
    ForestConfig config;
    std::vector<RegressionTree> trees;

    double predict(std::span<const double> features) const;
    double predict(const RankGenome& genome) const { return predict(genome_features(genome)); }
};

SurrogateForest fit_forest(std::span<const RankSample> train, const ForestConfig& config);

/// Rank correlation with average ranks on ties.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// (1 - acc) * (E_tot * T_tot)^gamma; lower is better.
double objective(double acc, double e_tot, double t_tot, double gamma);

struct EvolutionConfig {
    std::size_t population = 200;
    std::size_t parent_count = 40;
    std::size_t mutation_count = 80;
    double mutation_prob = 0.5;
    std::size_t crossover_count = 80;
    std::size_t steps = 100;
    double gamma = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EvolutionStep {
    std::size_t step = 0;
    double best_objective = 0.0;
    double mean_objective = 0.0;
    double best_accuracy = 0.0;
    RankGenome best_genome;
};

struct EvolutionResult {
    RankGenome best;
    double best_objective = 0.0;
    std::vector<EvolutionStep> history;
};

/// Elitist evolutionary search over the rank grid. Each step keeps the
/// parent_count best genomes by objective, then adds mutants (each gene
/// re-sampled with mutation_prob) and uniform-crossover children of random
/// parent pairs. Accuracy comes from `predictor`; (E_tot, T_tot) from
/// `cost_fn`, evaluated exactly.
EvolutionResult evolve(const RankSpace& space,
                       const std::function<double(const RankGenome&)>& predictor,
                       const std::function<std::pair<double, double>(const RankGenome&)>& cost_fn,
                       const EvolutionConfig& config);

}  // namespace tds
