#include "tdsearch/serialize.hpp"

namespace tds {

void to_json(json& j, const TensorizationShape& v) {
    j = json{{"row_factors", v.row_factors}, {"col_factors", v.col_factors}};
}

void from_json(const json& j, TensorizationShape& v) {
    j.at("row_factors").get_to(v.row_factors);
    j.at("col_factors").get_to(v.col_factors);
}

void to_json(json& j, const RankSpec& v) {
    j = json{{"format", format_name(v.format)}, {"ranks", v.ranks}};
}

void from_json(const json& j, RankSpec& v) {
    v.format = parse_format(j.at("format").get<std::string>());
    j.at("ranks").get_to(v.ranks);
}

void to_json(json& j, const CostRecord& v) {
    j = json{{"energy", v.energy},
             {"latency_cycles", v.latency_cycles},
             {"latency_seconds", v.latency_seconds},
             {"edp", v.edp},
             {"macs", v.macs},
             {"dram_bytes", v.dram_bytes},
             {"sram_bytes", v.sram_bytes},
             {"utilization", v.utilization}};
}

void from_json(const json& j, CostRecord& v) {
    j.at("energy").get_to(v.energy);
    j.at("latency_cycles").get_to(v.latency_cycles);
    j.at("latency_seconds").get_to(v.latency_seconds);
    j.at("edp").get_to(v.edp);
    j.at("macs").get_to(v.macs);
    j.at("dram_bytes").get_to(v.dram_bytes);
    j.at("sram_bytes").get_to(v.sram_bytes);
    j.at("utilization").get_to(v.utilization);
}

void to_json(json& j, const ShapeCandidate& v) {
    j = json{{"shape", v.shape}, {"entropy", v.entropy}};
}

void from_json(const json& j, ShapeCandidate& v) {
    j.at("shape").get_to(v.shape);
    j.at("entropy").get_to(v.entropy);
}

void to_json(json& j, const CostTableRow& v) {
    j = json{{"shape", v.shape},
             {"ranks", v.ranks},
             {"error", v.error},
             {"compression", v.compression},
             {"cost", v.cost}};
}

void from_json(const json& j, CostTableRow& v) {
    j.at("shape").get_to(v.shape);
    j.at("ranks").get_to(v.ranks);
    j.at("error").get_to(v.error);
    j.at("compression").get_to(v.compression);
    j.at("cost").get_to(v.cost);
}

void to_json(json& j, const RankGenome& v) {
    j = json{{"entries", v.entries}};
}

void from_json(const json& j, RankGenome& v) {
    j.at("entries").get_to(v.entries);
}

void to_json(json& j, const EvolutionStep& v) {
    j = json{{"step", v.step},
             {"best_objective", v.best_objective},
             {"mean_objective", v.mean_objective},
             {"best_accuracy", v.best_accuracy},
             {"best_genome", v.best_genome}};
}

void from_json(const json& j, EvolutionStep& v) {
    j.at("step").get_to(v.step);
    j.at("best_objective").get_to(v.best_objective);
    j.at("mean_objective").get_to(v.mean_objective);
    j.at("best_accuracy").get_to(v.best_accuracy);
    j.at("best_genome").get_to(v.best_genome);
}

void to_json(json& j, const ModelConfig& v) {
    j = json{{"layer_dims", v.layer_dims},
             {"classes", v.classes},
             {"teacher_epochs", v.teacher_epochs},
             {"teacher_lr", v.teacher_lr},
             {"weights_file", v.weights_file}};
}

void from_json(const json& j, ModelConfig& v) {
    v.layer_dims = j.value("layer_dims", v.layer_dims);
    v.classes = j.value("classes", v.classes);
    v.teacher_epochs = j.value("teacher_epochs", v.teacher_epochs);
    v.teacher_lr = j.value("teacher_lr", v.teacher_lr);
    v.weights_file = j.value("weights_file", v.weights_file);
}

void to_json(json& j, const ClusterTaskConfig& v) {
    j = json{{"train_count", v.train_count}, {"test_count", v.test_count},
             {"dim", v.dim},                 {"classes", v.classes},
             {"separation", v.separation},   {"noise", v.noise},
             {"seed", v.seed}};
}

void from_json(const json& j, ClusterTaskConfig& v) {
    v.train_count = j.value("train_count", v.train_count);
    v.test_count = j.value("test_count", v.test_count);
    v.dim = j.value("dim", v.dim);
    v.classes = j.value("classes", v.classes);
    v.separation = j.value("separation", v.separation);
    v.noise = j.value("noise", v.noise);
    v.seed = j.value("seed", v.seed);
}

void to_json(json& j, const ShapeSpaceConfig& v) {
    j = json{{"format", format_name(v.format)},
             {"candidate_orders", v.candidate_orders},
             {"top_k", v.top_k},
             {"rank_multiple", v.rank_multiple},
             {"c_min", v.c_min},
             {"c_max", v.c_max}};
}

void from_json(const json& j, ShapeSpaceConfig& v) {
    if (j.contains("format")) v.format = parse_format(j.at("format").get<std::string>());
    v.candidate_orders = j.value("candidate_orders", v.candidate_orders);
    v.top_k = j.value("top_k", v.top_k);
    v.rank_multiple = j.value("rank_multiple", v.rank_multiple);
    v.c_min = j.value("c_min", v.c_min);
    v.c_max = j.value("c_max", v.c_max);
}

void to_json(json& j, const AcceleratorConfig& v) {
    j = json{{"num_pes", v.num_pes},
             {"macs_per_pe", v.macs_per_pe},
             {"gb_bytes", v.gb_bytes},
             {"weight_buf_bytes", v.weight_buf_bytes},
             {"input_buf_bytes", v.input_buf_bytes},
             {"accum_buf_bytes", v.accum_buf_bytes},
             {"dram_bytes_per_cycle", v.dram_bytes_per_cycle},
             {"clock_hz", v.clock_hz},
             {"bytes_per_element", v.bytes_per_element},
             {"e_mac", v.e_mac},
             {"e_sram_byte", v.e_sram_byte},
             {"e_dram_byte", v.e_dram_byte}};
}

void from_json(const json& j, AcceleratorConfig& v) {
    v.num_pes = j.value("num_pes", v.num_pes);
    v.macs_per_pe = j.value("macs_per_pe", v.macs_per_pe);
    v.gb_bytes = j.value("gb_bytes", v.gb_bytes);
    v.weight_buf_bytes = j.value("weight_buf_bytes", v.weight_buf_bytes);
    v.input_buf_bytes = j.value("input_buf_bytes", v.input_buf_bytes);
    v.accum_buf_bytes = j.value("accum_buf_bytes", v.accum_buf_bytes);
    v.dram_bytes_per_cycle = j.value("dram_bytes_per_cycle", v.dram_bytes_per_cycle);
    v.clock_hz = j.value("clock_hz", v.clock_hz);
    v.bytes_per_element = j.value("bytes_per_element", v.bytes_per_element);
    v.e_mac = j.value("e_mac", v.e_mac);
    v.e_sram_byte = j.value("e_sram_byte", v.e_sram_byte);
    v.e_dram_byte = j.value("e_dram_byte", v.e_dram_byte);
}

void to_json(json& j, const SamplerConfig& v) {
    j = json{{"max_step", v.max_step}, {"sandwich_random_count", v.sandwich_random_count}};
}

void from_json(const json& j, SamplerConfig& v) {
    v.max_step = j.value("max_step", v.max_step);
    v.sandwich_random_count = j.value("sandwich_random_count", v.sandwich_random_count);
}

void to_json(json& j, const ForestConfig& v) {
    j = json{{"tree_count", v.tree_count},
             {"max_depth", v.max_depth},
             {"min_leaf", v.min_leaf},
             {"bootstrap_fraction", v.bootstrap_fraction}};
}

void from_json(const json& j, ForestConfig& v) {
    v.tree_count = j.value("tree_count", v.tree_count);
    v.max_depth = j.value("max_depth", v.max_depth);
    v.min_leaf = j.value("min_leaf", v.min_leaf);
    v.bootstrap_fraction = j.value("bootstrap_fraction", v.bootstrap_fraction);
}

void to_json(json& j, const EvolutionConfig& v) {
    j = json{{"population", v.population},
             {"parent_count", v.parent_count},
             {"mutation_count", v.mutation_count},
             {"mutation_prob", v.mutation_prob},
             {"crossover_count", v.crossover_count},
             {"steps", v.steps},
             {"gamma", v.gamma}};
}

void from_json(const json& j, EvolutionConfig& v) {
    v.population = j.value("population", v.population);
    v.parent_count = j.value("parent_count", v.parent_count);
    v.mutation_count = j.value("mutation_count", v.mutation_count);
    v.mutation_prob = j.value("mutation_prob", v.mutation_prob);
    v.crossover_count = j.value("crossover_count", v.crossover_count);
    v.steps = j.value("steps", v.steps);
    v.gamma = j.value("gamma", v.gamma);
}

void to_json(json& j, const DistillConfig& v) {
    j = json{{"stage1_epochs", v.stage1_epochs},
             {"stage2_epochs", v.stage2_epochs},
             {"temperature", v.temperature},
             {"learning_rate", v.learning_rate},
             {"batch_size", v.batch_size}};
}

void from_json(const json& j, DistillConfig& v) {
    v.stage1_epochs = j.value("stage1_epochs", v.stage1_epochs);
    v.stage2_epochs = j.value("stage2_epochs", v.stage2_epochs);
    v.temperature = j.value("temperature", v.temperature);
    v.learning_rate = j.value("learning_rate", v.learning_rate);
    v.batch_size = j.value("batch_size", v.batch_size);
}

void to_json(json& j, const PipelineConfig& v) {
    j = json{{"model", v.model},
             {"task", v.task},
             {"format", format_name(v.format)},
             {"shape_space", v.shape_space},
             {"accel", v.accel},
             {"sampler", v.sampler},
             {"surrogate_samples", v.surrogate_samples},
             {"forest", v.forest},
             {"evolution", v.evolution},
             {"distill", v.distill},
             {"target_compression", v.target_compression},
             {"batch_tokens", v.batch_tokens},
             {"seed", v.seed},
             {"out_dir", v.out_dir},
             {"jobs", v.jobs}};
}

void from_json(const json& j, PipelineConfig& v) {
    if (j.contains("format")) {
        v.format = parse_format(j.at("format").get<std::string>());
        v.shape_space = ShapeSpaceConfig::defaults_for(v.format);
    }
    if (j.contains("model")) j.at("model").get_to(v.model);
    if (j.contains("task")) j.at("task").get_to(v.task);
    if (j.contains("shape_space")) {
        v.shape_space.format = v.format;
        j.at("shape_space").get_to(v.shape_space);
    }
    if (j.contains("accel")) j.at("accel").get_to(v.accel);
    if (j.contains("sampler")) j.at("sampler").get_to(v.sampler);
    v.surrogate_samples = j.value("surrogate_samples", v.surrogate_samples);
    if (j.contains("forest")) j.at("forest").get_to(v.forest);
    if (j.contains("evolution")) j.at("evolution").get_to(v.evolution);
    if (j.contains("distill")) j.at("distill").get_to(v.distill);
    v.target_compression = j.value("target_compression", v.target_compression);
    v.batch_tokens = j.value("batch_tokens", v.batch_tokens);
    v.seed = j.value("seed", v.seed);
    v.out_dir = j.value("out_dir", v.out_dir);
    v.jobs = j.value("jobs", v.jobs);
}

void to_json(json& j, const ShapeSelection& v) {
    j = json{{"rows", v.rows},
             {"cols", v.cols},
             {"candidates", v.candidates},
             {"front", v.front},
             {"selected", v.selected}};
}

void from_json(const json& j, ShapeSelection& v) {
    j.at("rows").get_to(v.rows);
    j.at("cols").get_to(v.cols);
    j.at("candidates").get_to(v.candidates);
    j.at("front").get_to(v.front);
    j.at("selected").get_to(v.selected);
}

void to_json(json& j, const LayerReport& v) {
    j = json{{"layer", v.layer},
             {"rows", v.rows},
             {"cols", v.cols},
             {"shape", v.shape},
             {"ranks", v.ranks},
             {"params", v.params},
             {"compression", v.compression},
             {"error", v.error},
             {"cost", v.cost}};
}

void from_json(const json& j, LayerReport& v) {
    j.at("layer").get_to(v.layer);
    j.at("rows").get_to(v.rows);
    j.at("cols").get_to(v.cols);
    j.at("shape").get_to(v.shape);
    j.at("ranks").get_to(v.ranks);
    j.at("params").get_to(v.params);
    j.at("compression").get_to(v.compression);
    j.at("error").get_to(v.error);
    j.at("cost").get_to(v.cost);
}

void to_json(json& j, const DistillMetrics& v) {
    j = json{{"teacher_accuracy", v.teacher_accuracy},
             {"projected_accuracy", v.projected_accuracy},
             {"student_accuracy", v.student_accuracy},
             {"stage1_curve", v.stage1_curve},
             {"stage2_curve", v.stage2_curve}};
}

void from_json(const json& j, DistillMetrics& v) {
    j.at("teacher_accuracy").get_to(v.teacher_accuracy);
    j.at("projected_accuracy").get_to(v.projected_accuracy);
    j.at("student_accuracy").get_to(v.student_accuracy);
    j.at("stage1_curve").get_to(v.stage1_curve);
    j.at("stage2_curve").get_to(v.stage2_curve);
}

}  // namespace tds
