#include "tdsearch/accel_cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tds {

void AcceleratorConfig::validate() const {
    if (num_pes == 0 || macs_per_pe == 0 || gb_bytes == 0 || dram_bytes_per_cycle == 0 ||
        bytes_per_element == 0) {
        throw std::invalid_argument("accelerator config fields must be positive");
    }
    if (clock_hz <= 0 || e_mac < 0 || e_sram_byte < 0 || e_dram_byte < 0) {
        throw std::invalid_argument("accelerator config rates must be positive");
    }
    const std::size_t largest_buf =
        std::max({weight_buf_bytes, input_buf_bytes, accum_buf_bytes});
    if (gb_bytes < largest_buf) {
        throw std::invalid_argument("global buffer smaller than a PE buffer");
    }
}

void assign_mem_types(ContractionPlan& plan, const AcceleratorConfig& accel, bool fused) {
    accel.validate();
    if (plan.nodes.empty()) return;

    const std::size_t leaf_count = plan.leaf_count();
    const std::size_t last_node = plan.nodes.size() - 1;
    std::vector<bool> spilled(plan.nodes.size(), false);

    const auto id_bytes = [&](std::size_t id) -> std::uint64_t {
        std::uint64_t elems;
        if (id < leaf_count) {
            const PlanLeaf& leaf = plan.leaves[id];
            if (leaf.operand >= 0) {
                elems = shape_product(
                    plan.spec.input_shape(static_cast<std::size_t>(leaf.operand)));
            } else {
                elems = leaf.constant.size();
            }
        } else {
            elems = plan.nodes[id - leaf_count].out_size();
        }
        return elems * accel.bytes_per_element;
    };
    const auto is_raw_activation = [&](std::size_t id) {
        return id < leaf_count && !plan.leaves[id].is_static;
    };

    for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
        PlanNode& node = plan.nodes[i];
        if (node.is_static) continue;  // precomputed offline, no traffic

        const bool reads_raw = is_raw_activation(node.left) || is_raw_activation(node.right);
        const bool is_final = i == last_node;
        node.mem_type = reads_raw ? (is_final ? MemType::type4 : MemType::type1)
                                  : (is_final ? MemType::type3 : MemType::type2);

        node.dram_bytes = 0;
        node.sram_bytes = 0;
        for (std::size_t id : {node.left, node.right}) {
            const std::uint64_t bytes = id_bytes(id);
            const bool intermediate = id >= leaf_count;
            const bool from_dram = is_raw_activation(id) ||
                                   (intermediate && (!fused || spilled[id - leaf_count]));
            if (from_dram) {
                node.dram_bytes += bytes;
            } else {
                node.sram_bytes += bytes;
            }
        }
        const std::uint64_t out_bytes = id_bytes(leaf_count + i);
        if (is_final) {
            node.dram_bytes += out_bytes;
        } else if (!fused || out_bytes > accel.gb_bytes) {
            spilled[i] = true;
            node.dram_bytes += out_bytes;
        } else {
            node.sram_bytes += out_bytes;
        }
    }
}

CostRecord node_cost(const PlanNode& node, const AcceleratorConfig& accel) {
    accel.validate();
    if (node.mem_type == MemType::unset) {
        throw std::invalid_argument("node_cost: memory type not assigned");
    }
    CostRecord rec;
    rec.macs = node.mac_count;
    rec.dram_bytes = node.dram_bytes;
    rec.sram_bytes = node.sram_bytes;
    rec.utilization = std::min(1.0, static_cast<double>(node.summed_extent) /
                                        static_cast<double>(accel.macs_per_pe));

    const double macs_per_cycle =
        static_cast<double>(accel.num_pes) * static_cast<double>(accel.macs_per_pe) *
        rec.utilization;
    const double compute_cycles = std::ceil(static_cast<double>(node.mac_count) / macs_per_cycle);
    const double memory_cycles = std::ceil(static_cast<double>(node.dram_bytes) /
                                           static_cast<double>(accel.dram_bytes_per_cycle));
    rec.latency_cycles = std::max(compute_cycles, memory_cycles);
    rec.latency_seconds = rec.latency_cycles / accel.clock_hz;
    rec.energy = static_cast<double>(node.mac_count) * accel.e_mac +
                 static_cast<double>(node.sram_bytes) * accel.e_sram_byte +
                 static_cast<double>(node.dram_bytes) * accel.e_dram_byte;
    rec.edp = rec.energy * rec.latency_seconds;
    return rec;
}

CostRecord fused_cost(const ContractionPlan& plan, const AcceleratorConfig& accel) {
    CostRecord total;
    std::uint64_t util_weight = 0;
    for (const auto& node : plan.nodes) {
        if (node.is_static) continue;
        const CostRecord rec = node_cost(node, accel);
        total.energy += rec.energy;
        total.latency_cycles += rec.latency_cycles;
        total.latency_seconds += rec.latency_seconds;
        total.macs += rec.macs;
        total.dram_bytes += rec.dram_bytes;
        total.sram_bytes += rec.sram_bytes;
        total.utilization += rec.utilization * static_cast<double>(rec.macs);
        util_weight += rec.macs;
    }
    if (util_weight > 0) total.utilization /= static_cast<double>(util_weight);
    total.edp = total.energy * total.latency_seconds;
    return total;
}

CostRecord model_cost(const std::vector<CostRecord>& layer_records) {
    if (layer_records.empty()) {
        throw std::invalid_argument("model_cost: empty layer list");
    }
    CostRecord total;
    std::uint64_t util_weight = 0;
    for (const auto& rec : layer_records) {
        total.energy += rec.energy;
        total.latency_cycles += rec.latency_cycles;
        total.latency_seconds += rec.latency_seconds;
        total.macs += rec.macs;
        total.dram_bytes += rec.dram_bytes;
        total.sram_bytes += rec.sram_bytes;
        total.utilization += rec.utilization * static_cast<double>(rec.macs);
        util_weight += rec.macs;
    }
    if (util_weight > 0) total.utilization /= static_cast<double>(util_weight);
    total.edp = total.energy * total.latency_seconds;
    return total;
}

}  // namespace tds
