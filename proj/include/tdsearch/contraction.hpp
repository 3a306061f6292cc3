#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdsearch/einsum.hpp"
#include "tdsearch/factorize.hpp"

namespace tds {

enum class MemType { unset, type1, type2, type3, type4 };

std::string mem_type_name(MemType t);

/// One pairwise contraction. Operand ids 0..leaf_count-1 refer to plan
/// leaves; leaf_count + i refers to the output of nodes[i].
struct PlanNode {
    std::size_t left = 0;
    std::size_t right = 0;
    std::string left_subs;
    std::string right_subs;
    std::string out_subs;
    std::vector<std::size_t> out_extents;
    std::uint64_t mac_count = 0;
    bool is_static = false;
    bool is_contracting = false;
    MemType mem_type = MemType::unset;
    // Byte traffic, filled by assign_mem_types.
    std::uint64_t dram_bytes = 0;
    std::uint64_t sram_bytes = 0;

    std::size_t out_size() const { return shape_product(out_extents); }
    /// Product of the extents of the indices summed by this node (1 if none).
    std::uint64_t summed_extent = 1;
};

struct PlanLeaf {
    std::string subs;
    bool is_static = false;
    /// Index into the caller-supplied operand list, or -1 for a folded
    /// constant whose value is baked into the plan.
    std::ptrdiff_t operand = -1;
    DenseTensor constant;
};

/// A binary contraction tree over an einsum spec, nodes in bottom-up order.
/// After fold_static, leaves may be precomputed constants and dynamic_macs
/// counts only the remaining nodes.
struct ContractionPlan {
    EinsumSpec spec;  ///< the original spec; execute_plan reproduces it
    std::vector<PlanLeaf> leaves;
    std::vector<PlanNode> nodes;
    std::uint64_t total_macs = 0;
    std::uint64_t dynamic_macs = 0;
    bool mac_optimal = true;

    std::size_t leaf_count() const { return leaves.size(); }
};

/// MAC-optimal binary contraction order. Up to 8 operands this is exact
/// dynamic programming over operand subsets; beyond that a greedy
/// minimum-intermediate heuristic is used and the plan is flagged
/// non-optimal. Ties break toward the smaller largest intermediate, then
/// the earlier enumeration order.
ContractionPlan optimal_path(const EinsumSpec& spec);

/// Strict left-to-right fold.
ContractionPlan naive_path(const EinsumSpec& spec);

/// Mark leaves static/dynamic and recompute node staticness flags.
void set_staticness(ContractionPlan& plan, const std::vector<bool>& leaf_static);

/// Replace every maximal all-static subtree by one precomputed constant.
/// `operands` supplies values for the static leaves; the numeric result of
/// the plan is unchanged and dynamic_macs excludes the folded work.
ContractionPlan fold_static(const ContractionPlan& plan, const std::vector<bool>& leaf_static,
                            const std::vector<DenseTensor>& operands);

/// Evaluate the plan. `operands` is indexed like the original spec; entries
/// whose leaves were folded away are ignored.
DenseTensor execute_plan(const ContractionPlan& plan, const std::vector<DenseTensor>& operands);

/// One line per node: operands, subscripts, MACs, flags.
std::string render_plan(const ContractionPlan& plan);

/// Forward einsum of a factorized layer: operand 0 is the (dynamic)
/// activation, the remaining operands are the layer's cores.
struct LayerEinsum {
    EinsumSpec spec;
    std::vector<DenseTensor> operands;       ///< operand 0 is a placeholder for x
    std::vector<bool> is_static;             ///< false exactly at operand 0
    std::vector<std::ptrdiff_t> core_index;  ///< per operand: index into f.cores, -1 for x
    std::string batch_letters;
};

LayerEinsum build_einsum(const FactorizedLinear& f, std::size_t batch_extent = 1,
                         const std::string& batch_letters = "b");

/// Plan (optimal path) and execute in one call.
DenseTensor einsum_apply(const EinsumSpec& spec, const std::vector<DenseTensor>& operands);

}  // namespace tds
