#include "tdsearch/rank_search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tdsearch/parallel.hpp"

namespace tds {

std::vector<double> genome_features(const RankGenome& genome) {
    std::vector<double> features;
    for (const auto& entry : genome.entries) {
        for (std::size_t v : entry) features.push_back(static_cast<double>(v));
    }
    return features;
}

namespace {

RankGenome uniform_random_genome(const RankSpace& space, Rng& rng) {
    RankGenome g;
    for (const auto& layer : space.grids) {
        std::vector<std::size_t> entry;
        for (const auto& grid : layer) {
            entry.push_back(grid[uniform_below(rng, grid.size())]);
        }
        g.entries.push_back(std::move(entry));
    }
    return g;
}

}  // namespace

SampledDataset sample_dataset(const RankSpace& space, std::size_t n,
                              const std::function<double(const RankGenome&)>& evaluator,
                              std::uint64_t seed, int jobs) {
    if (n < 2) throw std::invalid_argument("sample_dataset needs n >= 2");
    SampledDataset dataset;
    dataset.samples.resize(n);
    dataset.samples[0].genome = space.max_genome();
    dataset.samples[1].genome = space.min_genome();
    for (std::size_t i = 2; i < n; ++i) {
        Rng rng = make_rng(derive_seed(seed, i));
        dataset.samples[i].genome = uniform_random_genome(space, rng);
    }
    parallel_for(n, jobs, [&](std::size_t i) {
        dataset.samples[i].accuracy = evaluator(dataset.samples[i].genome);
    });
    dataset.train_count = std::max<std::size_t>(1, (n * 95 + 99) / 100);
    if (dataset.train_count >= n) dataset.train_count = n - 1;
    return dataset;
}

double RegressionTree::predict(std::span<const double> features) const {
    std::size_t at = 0;
    while (!nodes[at].leaf) {
        at = features[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                                : nodes[at].right;
    }
    return nodes[at].value;
}

double SurrogateForest::predict(std::span<const double> features) const {
    double total = 0.0;
    for (const auto& tree : trees) total += tree.predict(features);
    return total / static_cast<double>(trees.size());
}

namespace {

struct TreeBuilder {
    const std::vector<std::vector<double>>& features;  // per sample
    const std::vector<double>& targets;
    const ForestConfig& config;
    RegressionTree tree;

    double mean_of(const std::vector<std::size_t>& rows) const {
        double total = 0.0;
        for (std::size_t r : rows) total += targets[r];
        return total / static_cast<double>(rows.size());
    }

    std::size_t build(std::vector<std::size_t> rows, std::size_t depth) {
        const std::size_t id = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes[id].value = mean_of(rows);

        if (depth >= config.max_depth || rows.size() < 2 * config.min_leaf) return id;

        const std::size_t n_features = features[rows[0]].size();
        bool found = false;
        double best_sse = 0.0;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;

        std::vector<std::size_t> sorted = rows;
        for (std::size_t f = 0; f < n_features; ++f) {
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                if (features[a][f] != features[b][f]) return features[a][f] < features[b][f];
                return a < b;
            });
            double left_sum = 0.0, left_sq = 0.0;
            double right_sum = 0.0, right_sq = 0.0;
            for (std::size_t r : sorted) {
                right_sum += targets[r];
                right_sq += targets[r] * targets[r];
            }
            const auto n = static_cast<double>(sorted.size());
            for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
                const double y = targets[sorted[i]];
                left_sum += y;
                left_sq += y * y;
                right_sum -= y;
                right_sq -= y * y;
                if (features[sorted[i]][f] == features[sorted[i + 1]][f]) continue;
                const auto nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                if (nl < config.min_leaf || nr < config.min_leaf) continue;
                const double sse = (left_sq - left_sum * left_sum / nl) +
                                   (right_sq - right_sum * right_sum / nr);
                if (!found || sse < best_sse - 1e-12) {
                    found = true;
                    best_sse = sse;
                    best_feature = f;
                    best_threshold =
                        0.5 * (features[sorted[i]][f] + features[sorted[i + 1]][f]);
                }
            }
        }
        if (!found) return id;

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (features[r][best_feature] <= best_threshold ? left_rows : right_rows).push_back(r);
        }
        if (left_rows.empty() || right_rows.empty()) return id;

        tree.nodes[id].leaf = false;
        tree.nodes[id].feature = best_feature;
        tree.nodes[id].threshold = best_threshold;
        const std::size_t left_id = build(std::move(left_rows), depth + 1);
        tree.nodes[id].left = left_id;
        const std::size_t right_id = build(std::move(right_rows), depth + 1);
        tree.nodes[id].right = right_id;
        return id;
    }
};

}  // namespace

SurrogateForest fit_forest(std::span<const RankSample> train, const ForestConfig& config) {
    if (train.empty()) throw std::invalid_argument("fit_forest: empty dataset");
    std::vector<std::vector<double>> features;
    std::vector<double> targets;
    features.reserve(train.size());
    for (const auto& sample : train) {
        features.push_back(genome_features(sample.genome));
        targets.push_back(sample.accuracy);
    }

    SurrogateForest forest;
    forest.config = config;
    forest.trees.resize(config.tree_count);
    const std::size_t draw =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                     config.bootstrap_fraction * static_cast<double>(train.size()))));
    parallel_for(config.tree_count, config.jobs, [&](std::size_t t) {
        Rng rng = make_rng(derive_seed(config.seed, t));
        std::vector<std::size_t> rows(draw);
        for (std::size_t i = 0; i < draw; ++i) {
            rows[i] = static_cast<std::size_t>(uniform_below(rng, train.size()));
        }
        TreeBuilder builder{features, targets, config, {}};
        builder.build(std::move(rows), 0);
        forest.trees[t] = std::move(builder.tree);
    });
    return forest;
}

namespace {

std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (xs[a] != xs[b]) return xs[a] < xs[b];
        return a < b;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("spearman needs at least 2 points");
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);
    const auto n = static_cast<double>(xs.size());
    double mean = (n + 1.0) / 2.0;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

double objective(double acc, double e_tot, double t_tot, double gamma) {
    if (e_tot <= 0.0 || t_tot <= 0.0) {
        throw std::invalid_argument("objective: cost terms must be positive");
    }
    return (1.0 - acc) * std::pow(e_tot * t_tot, gamma);
}

void EvolutionConfig::validate() const {
    if (parent_count + mutation_count + crossover_count != population) {
        throw std::invalid_argument("population must equal parents + mutations + crossovers");
    }
    if (parent_count == 0 || population == 0) {
        throw std::invalid_argument("population and parent count must be positive");
    }
    if (mutation_prob <= 0.0 || mutation_prob > 1.0) {
        throw std::invalid_argument("mutation_prob must lie in (0, 1]");
    }
}

EvolutionResult evolve(const RankSpace& space,
                       const std::function<double(const RankGenome&)>& predictor,
                       const std::function<std::pair<double, double>(const RankGenome&)>& cost_fn,
                       const EvolutionConfig& config) {
    config.validate();
    Rng rng = make_rng(derive_seed(config.seed, 0xe701));

    const auto score = [&](const RankGenome& g) {
        const double acc = predictor(g);
        const auto [e_tot, t_tot] = cost_fn(g);
        return objective(acc, e_tot, t_tot, config.gamma);
    };

    struct Scored {
        RankGenome genome;
        double obj = 0.0;
        double acc = 0.0;
    };
    std::vector<Scored> population;
    population.reserve(config.population);
    population.push_back({space.max_genome(), 0.0, 0.0});
    if (config.population > 1) population.push_back({space.min_genome(), 0.0, 0.0});
    while (population.size() < config.population) {
        population.push_back({uniform_random_genome(space, rng), 0.0, 0.0});
    }

    const auto evaluate_all = [&]() {
        for (auto& member : population) {
            member.acc = predictor(member.genome);
            const auto [e_tot, t_tot] = cost_fn(member.genome);
            member.obj = objective(member.acc, e_tot, t_tot, config.gamma);
        }
        std::stable_sort(population.begin(), population.end(), [](const Scored& a, const Scored& b) {
            if (a.obj != b.obj) return a.obj < b.obj;
            return a.genome < b.genome;
        });
    };

    EvolutionResult result;
    for (std::size_t step = 0; step < config.steps; ++step) {
        evaluate_all();

        EvolutionStep record;
        record.step = step;
        record.best_objective = population.front().obj;
        record.best_accuracy = population.front().acc;
        record.best_genome = population.front().genome;
        double mean = 0.0;
        for (const auto& member : population) mean += member.obj;
        record.mean_objective = mean / static_cast<double>(population.size());
        result.history.push_back(record);

        if (step + 1 == config.steps) break;

        std::vector<Scored> next(population.begin(),
                                 population.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                          config.parent_count, population.size())));
        for (std::size_t m = 0; m < config.mutation_count; ++m) {
            const auto& parent = next[uniform_below(rng, config.parent_count)].genome;
            RankGenome child = parent;
            for (std::size_t l = 0; l < child.entries.size(); ++l) {
                for (std::size_t c = 0; c < child.entries[l].size(); ++c) {
                    if (uniform_real(rng) < config.mutation_prob) {
                        const auto& grid = space.grids[l][c];
                        child.entries[l][c] = grid[uniform_below(rng, grid.size())];
                    }
                }
            }
            next.push_back({std::move(child), 0.0, 0.0});
        }
        for (std::size_t x = 0; x < config.crossover_count; ++x) {
            const auto& a = next[uniform_below(rng, config.parent_count)].genome;
            const auto& b = next[uniform_below(rng, config.parent_count)].genome;
            RankGenome child = a;
            for (std::size_t l = 0; l < child.entries.size(); ++l) {
                for (std::size_t c = 0; c < child.entries[l].size(); ++c) {
                    if (uniform_real(rng) < 0.5) child.entries[l][c] = b.entries[l][c];
                }
            }
            next.push_back({std::move(child), 0.0, 0.0});
        }
        population = std::move(next);
    }

    result.best = result.history.back().best_genome;
    result.best_objective = result.history.back().best_objective;
    return result;
}

}  // namespace tds
