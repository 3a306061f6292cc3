#pragma once

#include <json.hpp>

#include "tdsearch/config.hpp"
#include "tdsearch/pipeline.hpp"

namespace tds {

using json = nlohmann::json;

void to_json(json& j, const TensorizationShape& v);
void from_json(const json& j, TensorizationShape& v);
void to_json(json& j, const RankSpec& v);
void from_json(const json& j, RankSpec& v);
void to_json(json& j, const CostRecord& v);
void from_json(const json& j, CostRecord& v);
void to_json(json& j, const ShapeCandidate& v);
void from_json(const json& j, ShapeCandidate& v);
void to_json(json& j, const CostTableRow& v);
void from_json(const json& j, CostTableRow& v);
void to_json(json& j, const RankGenome& v);
void from_json(const json& j, RankGenome& v);
void to_json(json& j, const EvolutionStep& v);
void from_json(const json& j, EvolutionStep& v);

void to_json(json& j, const ModelConfig& v);
void from_json(const json& j, ModelConfig& v);
void to_json(json& j, const ClusterTaskConfig& v);
void from_json(const json& j, ClusterTaskConfig& v);
void to_json(json& j, const ShapeSpaceConfig& v);
void from_json(const json& j, ShapeSpaceConfig& v);
void to_json(json& j, const AcceleratorConfig& v);
void from_json(const json& j, AcceleratorConfig& v);
void to_json(json& j, const SamplerConfig& v);
void from_json(const json& j, SamplerConfig& v);
void to_json(json& j, const ForestConfig& v);
void from_json(const json& j, ForestConfig& v);
void to_json(json& j, const EvolutionConfig& v);
void from_json(const json& j, EvolutionConfig& v);
void to_json(json& j, const DistillConfig& v);
void from_json(const json& j, DistillConfig& v);
void to_json(json& j, const PipelineConfig& v);
void from_json(const json& j, PipelineConfig& v);

void to_json(json& j, const ShapeSelection& v);
void from_json(const json& j, ShapeSelection& v);
void to_json(json& j, const LayerReport& v);
void from_json(const json& j, LayerReport& v);
void to_json(json& j, const DistillMetrics& v);
void from_json(const json& j, DistillMetrics& v);

}  // namespace tds
