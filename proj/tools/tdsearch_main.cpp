#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "tdsearch/pipeline.hpp"
#include "tdsearch/serialize.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "pipeline config file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--out", args.out_dir, "artifact directory (overrides config)");
    cmd->add_option("--seed", args.seed, "global seed (overrides config)");
    cmd->add_option("--jobs", args.jobs, "worker threads (overrides config)");
}

tds::PipelineConfig resolve_config(const CommonArgs& args) {
    tds::PipelineConfig config = tds::load_pipeline_config(args.config_path);
    if (!args.out_dir.empty()) config.out_dir = args.out_dir;
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (args.jobs > 0) config.jobs = args.jobs;
    config.validate();
    return config;
}

std::string artifacts_dir(const CommonArgs& args) {
    if (!args.out_dir.empty()) return args.out_dir;
    if (!args.config_path.empty()) return resolve_config(args).out_dir;
    throw std::runtime_error("report needs --out or --config to locate artifacts");
}

int run_shape_search(const CommonArgs& args, bool table_only) {
    const tds::PipelineConfig config = resolve_config(args);
    const tds::TeacherSetup setup = tds::build_teacher(config);

    tds::SearchArtifacts artifacts;
    artifacts.hash = tds::config_hash(config);
    artifacts.shapes = tds::run_shape_search(config, setup.teacher);
    artifacts.has_shapes = true;
    tds::save_artifacts(artifacts, config.out_dir);

    std::size_t rows = 0;
    for (const auto& sel : artifacts.shapes) rows += sel.table.rows.size();
    if (table_only) {
        std::printf("cost-table: %zu rows over %zu matrix sizes -> %s/cost_table.json\n", rows,
                    artifacts.shapes.size(), config.out_dir.c_str());
    } else {
        std::string picks;
        for (const auto& sel : artifacts.shapes) {
            if (!picks.empty()) picks += " ";
            picks += std::to_string(sel.rows) + "x" + std::to_string(sel.cols) + "->" +
                     sel.selected.shape.to_string();
        }
        std::printf("shape-search: %s (%zu table rows) -> %s/shape_table.json\n", picks.c_str(),
                    rows, config.out_dir.c_str());
    }
    return 0;
}

int run_rank_evolve(const CommonArgs& args) {
    const tds::PipelineConfig config = resolve_config(args);
    tds::SearchArtifacts artifacts = tds::load_artifacts(config.out_dir);
    if (!artifacts.has_shapes) {
        throw std::runtime_error("shape_table.json missing; run shape-search first");
    }
    const tds::TeacherSetup setup = tds::build_teacher(config);
    const auto layers = tds::build_supernet(config, setup.teacher, artifacts.shapes);
    artifacts.surrogate = tds::run_surrogate(config, layers);
    artifacts.has_surrogate = true;
    artifacts.evolution = tds::run_evolution(config, layers, artifacts.surrogate);
    artifacts.best_genome = artifacts.evolution.best;
    artifacts.has_evolution = true;
    artifacts.layers =
        tds::report_layers(config, setup.teacher, artifacts.shapes, artifacts.best_genome);
    artifacts.hash = tds::config_hash(config);
    tds::save_artifacts(artifacts, config.out_dir);
    std::printf("rank-evolve: best objective %.6g, surrogate fidelity %.4f -> %s/genome.json\n",
                artifacts.evolution.best_objective, artifacts.surrogate.fidelity,
                config.out_dir.c_str());
    return 0;
}

int run_distill_cmd(const CommonArgs& args) {
    const tds::PipelineConfig config = resolve_config(args);
    tds::SearchArtifacts artifacts = tds::load_artifacts(config.out_dir);
    if (!artifacts.has_shapes || !artifacts.has_evolution) {
        throw std::runtime_error("genome.json missing; run rank-evolve first");
    }
    const tds::TeacherSetup setup = tds::build_teacher(config);
    artifacts.distill = tds::run_distill(config, setup.teacher, setup.task, artifacts.shapes,
                                         artifacts.best_genome);
    artifacts.has_distill = true;
    tds::save_artifacts(artifacts, config.out_dir);
    std::printf("distill: teacher %.4f, projected %.4f, student %.4f -> %s/genome.json\n",
                artifacts.distill.teacher_accuracy, artifacts.distill.projected_accuracy,
                artifacts.distill.student_accuracy, config.out_dir.c_str());
    return 0;
}

int run_pipeline_cmd(const CommonArgs& args) {
    const tds::PipelineConfig config = resolve_config(args);
    const tds::SearchArtifacts artifacts = tds::run_pipeline(config);
    std::printf(
        "pipeline: best objective %.6g, fidelity %.4f, student acc %.4f -> %s\n",
        artifacts.evolution.best_objective, artifacts.surrogate.fidelity,
        artifacts.distill.student_accuracy, config.out_dir.c_str());
    return 0;
}

int run_report(const CommonArgs& args) {
    const std::string dir = artifacts_dir(args);
    const tds::SearchArtifacts artifacts = tds::load_artifacts(dir);
    const std::string path = (std::filesystem::path(dir) / "report.csv").string();
    tds::write_report_csv(artifacts, path);
    std::printf("report: %zu layers -> %s\n", artifacts.layers.size(), path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hardware-aware tensor decomposition search"};
    app.require_subcommand(1);

    CommonArgs shape_args, table_args, evolve_args, distill_args, pipeline_args, report_args;
    auto* shape_cmd =
        app.add_subcommand("shape-search", "Level 1: select Pareto-optimal tensorization shapes");
    add_common(shape_cmd, shape_args);
    auto* table_cmd =
        app.add_subcommand("cost-table", "Build the shape/rank hardware cost table");
    add_common(table_cmd, table_args);
    auto* evolve_cmd = app.add_subcommand(
        "rank-evolve", "Level 2: surrogate-guided evolutionary rank search");
    add_common(evolve_cmd, evolve_args);
    auto* distill_cmd =
        app.add_subcommand("distill", "Level 3: two-stage distillation of the best genome");
    add_common(distill_cmd, distill_args);
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Run levels 1-3 end to end");
    add_common(pipeline_cmd, pipeline_args);
    auto* report_cmd =
        app.add_subcommand("report", "Write the per-layer breakdown CSV from artifacts");
    add_common(report_cmd, report_args, /*config_required=*/false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (shape_cmd->parsed()) return run_shape_search(shape_args, false);
        if (table_cmd->parsed()) return run_shape_search(table_args, true);
        if (evolve_cmd->parsed()) return run_rank_evolve(evolve_args);
        if (distill_cmd->parsed()) return run_distill_cmd(distill_args);
        if (pipeline_cmd->parsed()) return run_pipeline_cmd(pipeline_args);
        if (report_cmd->parsed()) return run_report(report_args);
    } catch (const tds::PipelineError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
