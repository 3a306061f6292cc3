#include "tdsearch/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tdsearch/parallel.hpp"
#include "tdsearch/serialize.hpp"

namespace tds {

namespace {

namespace fs = std::filesystem;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

std::vector<DenseTensor> teacher_matrices(const ToyNet& teacher) {
    std::vector<DenseTensor> ws;
    for (const auto& layer : teacher.hidden) ws.push_back(layer.dense);
    return ws;
}

const ShapeSelection& selection_for(const std::vector<ShapeSelection>& shapes, std::size_t rows,
                                    std::size_t cols) {
    for (const auto& sel : shapes) {
        if (sel.rows == rows && sel.cols == cols) return sel;
    }
    throw std::runtime_error("no shape selected for " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " (run shape-search first)");
}

CostRecord layer_plan_cost(const PipelineConfig& config, const TensorizationShape& shape,
                           const RankSpec& ranks) {
    const FactorizedLinear f = make_zero_factorized(config.format, shape, ranks);
    LayerEinsum layer = build_einsum(f, config.batch_tokens);
    ContractionPlan plan = optimal_path(layer.spec);
    plan = fold_static(plan, layer.is_static, layer.operands);
    assign_mem_types(plan, config.accel);
    return fused_cost(plan, config.accel);
}

}  // namespace

TeacherSetup build_teacher(const PipelineConfig& config) {
    config.validate();
    TeacherSetup setup;
    ClusterTaskConfig task_config = config.task;
    task_config.seed = derive_seed(config.seed, 0x7a51);
    setup.task = make_cluster_task(task_config);

    setup.teacher = make_dense_net(config.model.layer_dims, config.model.classes,
                                   derive_seed(config.seed, 0x7ea0));
    if (!config.model.weights_file.empty()) {
        const auto matrices = load_weights(config.model.weights_file);
        if (matrices.size() != setup.teacher.hidden.size() + 1) {
            throw std::runtime_error("weights file holds " + std::to_string(matrices.size()) +
                                     " matrices, expected " +
                                     std::to_string(setup.teacher.hidden.size() + 1));
        }
        for (std::size_t l = 0; l < setup.teacher.hidden.size(); ++l) {
            if (matrices[l].shape() != setup.teacher.hidden[l].dense.shape()) {
                throw std::runtime_error("weights file matrix " + std::to_string(l) +
                                         " has the wrong shape");
            }
            setup.teacher.hidden[l].dense = matrices[l];
        }
        if (matrices.back().shape() != setup.teacher.head.shape()) {
            throw std::runtime_error("weights file head matrix has the wrong shape");
        }
        setup.teacher.head = matrices.back();
    }
    if (config.model.teacher_epochs > 0) {
        setup.teacher = train_finetune(std::move(setup.teacher), setup.task.train,
                                       config.model.teacher_epochs, config.model.teacher_lr,
                                       config.distill.batch_size, derive_seed(config.seed, 0x7e4c))
                            .net;
    }
    return setup;
}

std::vector<ShapeSelection> run_shape_search(const PipelineConfig& config, const ToyNet& teacher) {
    std::vector<ShapeSelection> result;
    std::vector<std::pair<std::size_t, std::size_t>> sizes;
    for (const auto& layer : teacher.hidden) {
        const auto dims = std::make_pair(layer.dense.extent(0), layer.dense.extent(1));
        if (std::find(sizes.begin(), sizes.end(), dims) == sizes.end()) sizes.push_back(dims);
    }

    for (std::size_t s = 0; s < sizes.size(); ++s) {
        const auto [rows, cols] = sizes[s];
        // Every matrix of one size shares the shape; the first such matrix
        // supplies the projection errors for the table.
        const DenseTensor* w = nullptr;
        for (const auto& layer : teacher.hidden) {
            if (layer.dense.extent(0) == rows && layer.dense.extent(1) == cols) {
                w = &layer.dense;
                break;
            }
        }
        ShapeSelection sel;
        sel.rows = rows;
        sel.cols = cols;
        sel.candidates = generate_candidates(rows, cols, config.shape_space);
        if (sel.candidates.empty()) {
            throw std::runtime_error("no shape candidates for " + std::to_string(rows) + "x" +
                                     std::to_string(cols));
        }
        CostTableOptions options;
        options.batch_tokens = config.batch_tokens;
        options.seed = derive_seed(config.seed, 0x100 + s);
        options.jobs = config.jobs;
        sel.table = build_cost_table(*w, sel.candidates, config.accel, config.shape_space, options);
        if (sel.table.rows.empty()) {
            throw std::runtime_error(
                "enumerate_ranks found no admissible ranks for any candidate of " +
                std::to_string(rows) + "x" + std::to_string(cols) +
                "; widen the compression limits or change rank_multiple");
        }
        sel.front = pareto_front(sel.table);
        sel.selected = select_shape(sel.table, sel.front);
        result.push_back(std::move(sel));
    }
    return result;
}

std::vector<SuperNetLayer> build_supernet(const PipelineConfig& config, const ToyNet& teacher,
                                          const std::vector<ShapeSelection>& shapes) {
    std::vector<SuperNetLayer> layers(teacher.hidden.size());
    const auto ws = teacher_matrices(teacher);
    parallel_for(ws.size(), config.jobs, [&](std::size_t l) {
        const auto& sel = selection_for(shapes, ws[l].extent(0), ws[l].extent(1));
        SuperNetOptions options;
        options.rank_multiple = config.shape_space.rank_multiple;
        options.target_compression = config.target_compression;
        options.seed = derive_seed(config.seed, 0x200 + l);
        layers[l] = make_supernet_layer(ws[l], config.format, sel.selected.shape, options);
    });
    return layers;
}

SurrogateArtifacts run_surrogate(const PipelineConfig& config,
                                 const std::vector<SuperNetLayer>& layers) {
    const RankSpace space = space_of(layers);
    SurrogateArtifacts artifacts;
    const auto evaluator = [&](const RankGenome& genome) {
        return proxy_accuracy(genome, layers);
    };
    artifacts.dataset = sample_dataset(space, config.surrogate_samples, evaluator,
                                       derive_seed(config.seed, 0x300), config.jobs);

    ForestConfig forest_config = config.forest;
    forest_config.seed = derive_seed(config.seed, 0x301);
    forest_config.jobs = config.jobs;
    const SurrogateForest forest = fit_forest(artifacts.dataset.train(), forest_config);

    std::vector<double> predicted, actual;
    for (const auto& sample : artifacts.dataset.holdout()) {
        predicted.push_back(forest.predict(sample.genome));
        actual.push_back(sample.accuracy);
    }
    artifacts.fidelity = spearman(predicted, actual);
    return artifacts;
}

RankSpec genome_entry_ranks(Format format, const std::vector<std::size_t>& entry) {
    switch (format) {
        case Format::cp: return RankSpec::cp(entry.at(0));
        case Format::tucker: return RankSpec::tucker(entry);
        case Format::ttm: {
            std::vector<std::size_t> bonds(entry.size() + 2, 1);
            for (std::size_t k = 0; k < entry.size(); ++k) bonds[k + 1] = entry[k];
            return RankSpec::ttm(std::move(bonds));
        }
    }
    throw std::invalid_argument("bad format");
}

EvolutionResult run_evolution(const PipelineConfig& config,
                              const std::vector<SuperNetLayer>& layers,
                              const SurrogateArtifacts& surrogate) {
    const RankSpace space = space_of(layers);
    ForestConfig forest_config = config.forest;
    forest_config.seed = derive_seed(config.seed, 0x301);
    forest_config.jobs = config.jobs;
    const SurrogateForest forest = fit_forest(surrogate.dataset.train(), forest_config);

    // Per-layer plan costs depend only on the rank entry; memoize them.
    std::vector<std::map<std::vector<std::size_t>, CostRecord>> cache(layers.size());
    const auto cost_fn = [&](const RankGenome& genome) {
        std::vector<CostRecord> records;
        records.reserve(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            auto it = cache[l].find(genome.entries[l]);
            if (it == cache[l].end()) {
                const CostRecord rec =
                    layer_plan_cost(config, layers[l].max_net.shape,
                                    genome_entry_ranks(config.format, genome.entries[l]));
                it = cache[l].emplace(genome.entries[l], rec).first;
            }
            records.push_back(it->second);
        }
        const CostRecord total = model_cost(records);
        return std::make_pair(total.energy, total.latency_seconds);
    };

    EvolutionConfig evo = config.evolution;
    evo.seed = derive_seed(config.seed, 0x400);
    return evolve(
        space, [&](const RankGenome& genome) { return forest.predict(genome); }, cost_fn, evo);
}

std::vector<LayerReport> report_layers(const PipelineConfig& config, const ToyNet& teacher,
                                       const std::vector<ShapeSelection>& shapes,
                                       const RankGenome& genome) {
    const auto ws = teacher_matrices(teacher);
    if (genome.entries.size() != ws.size()) {
        throw std::invalid_argument("genome does not cover every layer");
    }
    std::vector<LayerReport> reports(ws.size());
    parallel_for(ws.size(), config.jobs, [&](std::size_t l) {
        const auto& sel = selection_for(shapes, ws[l].extent(0), ws[l].extent(1));
        const RankSpec ranks = genome_entry_ranks(config.format, genome.entries[l]);
        LayerReport& rep = reports[l];
        rep.layer = l;
        rep.rows = ws[l].extent(0);
        rep.cols = ws[l].extent(1);
        rep.shape = sel.selected.shape;
        rep.ranks = ranks;
        rep.params = param_count(config.format, rep.shape, ranks);
        rep.compression = compression_ratio(config.format, rep.shape, ranks);
        ProjectOptions popts;
        popts.seed = derive_seed(config.seed, 0x500 + l);
        rep.error = project(ws[l], config.format, rep.shape, ranks, popts).error;
        rep.cost = layer_plan_cost(config, rep.shape, ranks);
    });
    return reports;
}

DistillMetrics run_distill(const PipelineConfig& config, const ToyNet& teacher,
                           const ClusterTask& task, const std::vector<ShapeSelection>& shapes,
                           const RankGenome& genome) {
    const auto ws = teacher_matrices(teacher);
    std::vector<TensorizationShape> layer_shapes;
    std::vector<RankSpec> layer_ranks;
    for (std::size_t l = 0; l < ws.size(); ++l) {
        layer_shapes.push_back(selection_for(shapes, ws[l].extent(0), ws[l].extent(1))
                                   .selected.shape);
        layer_ranks.push_back(genome_entry_ranks(config.format, genome.entries[l]));
    }
    ProjectOptions popts;
    popts.seed = derive_seed(config.seed, 0x600);
    const ToyNet student = factorize_net(teacher, config.format, layer_shapes, layer_ranks, popts);

    DistillMetrics metrics;
    metrics.teacher_accuracy = net_accuracy(teacher, task.test);
    metrics.projected_accuracy = net_accuracy(student, task.test);

    DistillConfig distill_config = config.distill;
    distill_config.seed = derive_seed(config.seed, 0x601);
    const TrainResult trained = train_two_stage(teacher, student, task.train, distill_config);
    metrics.student_accuracy = net_accuracy(trained.net, task.test);
    metrics.stage1_curve = trained.stage1_curve;
    metrics.stage2_curve = trained.stage2_curve;
    return metrics;
}

SearchArtifacts run_pipeline(const PipelineConfig& config) {
    SearchArtifacts artifacts;
    artifacts.hash = config_hash(config);

    const auto persist_partial = [&]() {
        try {
            save_artifacts(artifacts, config.out_dir);
        } catch (...) {
        }
    };

    try {
        const TeacherSetup setup = stage("teacher", [&] { return build_teacher(config); });
        artifacts.shapes =
            stage("shape-search", [&] { return run_shape_search(config, setup.teacher); });
        artifacts.has_shapes = true;

        const std::vector<SuperNetLayer> layers = stage(
            "supernet", [&] { return build_supernet(config, setup.teacher, artifacts.shapes); });
        artifacts.surrogate = stage("surrogate", [&] { return run_surrogate(config, layers); });
        artifacts.has_surrogate = true;

        artifacts.evolution =
            stage("evolution", [&] { return run_evolution(config, layers, artifacts.surrogate); });
        artifacts.best_genome = artifacts.evolution.best;
        artifacts.has_evolution = true;
        artifacts.layers = stage("report", [&] {
            return report_layers(config, setup.teacher, artifacts.shapes, artifacts.best_genome);
        });

        artifacts.distill = stage("distill", [&] {
            return run_distill(config, setup.teacher, setup.task, artifacts.shapes,
                               artifacts.best_genome);
        });
        artifacts.has_distill = true;

        stage("persist", [&] {
            save_artifacts(artifacts, config.out_dir);
            return 0;
        });
    } catch (const PipelineError&) {
        persist_partial();
        throw;
    }
    return artifacts;
}

namespace {

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    json j;
    in >> j;
    return j;
}

}  // namespace

void save_artifacts(const SearchArtifacts& artifacts, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);

    if (artifacts.has_shapes) {
        json sizes = json::array();
        json tables = json::array();
        for (const auto& sel : artifacts.shapes) {
            sizes.push_back(sel);
            tables.push_back(json{{"rows", sel.rows},
                                  {"cols", sel.cols},
                                  {"table", sel.table.rows}});
        }
        write_json_file(base / "shape_table.json",
                        json{{"config_hash", artifacts.hash}, {"sizes", sizes}});
        write_json_file(base / "cost_table.json",
                        json{{"config_hash", artifacts.hash}, {"sizes", tables}});
    }
    if (artifacts.has_surrogate) {
        json samples = json::array();
        for (const auto& sample : artifacts.surrogate.dataset.samples) {
            samples.push_back(json{{"genome", sample.genome}, {"accuracy", sample.accuracy}});
        }
        write_json_file(base / "surrogate.json",
                        json{{"config_hash", artifacts.hash},
                             {"train_count", artifacts.surrogate.dataset.train_count},
                             {"fidelity", artifacts.surrogate.fidelity},
                             {"samples", samples}});
    }
    if (artifacts.has_evolution) {
        write_json_file(base / "evolution.json",
                        json{{"config_hash", artifacts.hash},
                             {"best_objective", artifacts.evolution.best_objective},
                             {"history", artifacts.evolution.history}});
        json genome = json{{"config_hash", artifacts.hash},
                           {"genome", artifacts.best_genome},
                           {"layers", artifacts.layers}};
        if (artifacts.has_distill) genome["distill"] = artifacts.distill;
        write_json_file(base / "genome.json", genome);
    }
    if (artifacts.has_evolution) {
        write_report_csv(artifacts, (base / "report.csv").string());
    }
}

SearchArtifacts load_artifacts(const std::string& dir) {
    const fs::path base(dir);
    SearchArtifacts artifacts;
    if (!fs::exists(base / "shape_table.json") && !fs::exists(base / "genome.json")) {
        throw std::runtime_error("no artifacts in " + dir);
    }
    if (fs::exists(base / "shape_table.json")) {
        const json j = read_json_file(base / "shape_table.json");
        artifacts.hash = j.value("config_hash", "");
        for (const auto& size : j.at("sizes")) {
            artifacts.shapes.push_back(size.get<ShapeSelection>());
        }
        artifacts.has_shapes = true;
    }
    if (fs::exists(base / "cost_table.json") && artifacts.has_shapes) {
        const json j = read_json_file(base / "cost_table.json");
        for (const auto& size : j.at("sizes")) {
            const auto rows = size.at("rows").get<std::size_t>();
            const auto cols = size.at("cols").get<std::size_t>();
            for (auto& sel : artifacts.shapes) {
                if (sel.rows == rows && sel.cols == cols) {
                    size.at("table").get_to(sel.table.rows);
                }
            }
        }
    }
    if (fs::exists(base / "surrogate.json")) {
        const json j = read_json_file(base / "surrogate.json");
        artifacts.surrogate.dataset.train_count = j.at("train_count").get<std::size_t>();
        artifacts.surrogate.fidelity = j.at("fidelity").get<double>();
        for (const auto& sample : j.at("samples")) {
            RankSample s;
            sample.at("genome").get_to(s.genome);
            sample.at("accuracy").get_to(s.accuracy);
            artifacts.surrogate.dataset.samples.push_back(std::move(s));
        }
        artifacts.has_surrogate = true;
    }
    if (fs::exists(base / "evolution.json")) {
        const json j = read_json_file(base / "evolution.json");
        j.at("best_objective").get_to(artifacts.evolution.best_objective);
        j.at("history").get_to(artifacts.evolution.history);
        if (!artifacts.evolution.history.empty()) {
            artifacts.evolution.best = artifacts.evolution.history.back().best_genome;
        }
        artifacts.has_evolution = true;
    }
    if (fs::exists(base / "genome.json")) {
        const json j = read_json_file(base / "genome.json");
        if (artifacts.hash.empty()) artifacts.hash = j.value("config_hash", "");
        j.at("genome").get_to(artifacts.best_genome);
        j.at("layers").get_to(artifacts.layers);
        if (j.contains("distill")) {
            j.at("distill").get_to(artifacts.distill);
            artifacts.has_distill = true;
        }
        artifacts.has_evolution = true;
    }
    return artifacts;
}

void write_report_csv(const SearchArtifacts& artifacts, const std::string& path) {
    if (artifacts.layers.empty()) {
        throw std::runtime_error("no per-layer reports; artifacts incomplete");
    }
    std::vector<CostRecord> records;
    for (const auto& layer : artifacts.layers) records.push_back(layer.cost);
    const CostRecord total = model_cost(records);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "layer,rows,cols,shape,ranks,params,compression,error,"
           "energy,latency_seconds,edp,energy_frac,latency_frac\n";
    for (const auto& layer : artifacts.layers) {
        out << layer.layer << ',' << layer.rows << ',' << layer.cols << ','
            << '"' << layer.shape.to_string() << '"' << ','
            << '"' << layer.ranks.to_string() << '"' << ',' << layer.params << ','
            << num(layer.compression) << ',' << num(layer.error) << ',' << num(layer.cost.energy)
            << ',' << num(layer.cost.latency_seconds) << ',' << num(layer.cost.edp) << ','
            << num(layer.cost.energy / total.energy) << ','
            << num(layer.cost.latency_seconds / total.latency_seconds) << "\n";
    }
    out << "total,,,,," << [&] {
        std::size_t params = 0;
        for (const auto& layer : artifacts.layers) params += layer.params;
        return params;
    }() << ",,," << num(total.energy) << ',' << num(total.latency_seconds) << ','
        << num(total.edp) << ",1,1\n";
}

}  // namespace tds
