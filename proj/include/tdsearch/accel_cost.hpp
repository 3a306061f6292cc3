#pragma once

#include <cstdint>
#include <vector>

#include "tdsearch/contraction.hpp"

namespace tds {

/// Simba-L-like accelerator description. Capacities are bytes, clock is Hz,
/// energy constants are per MAC / per byte in relative units (the DRAM/SRAM/
/// compute ratios carry the signal, not the absolute values).
struct AcceleratorConfig {
    std::size_t num_pes = 32;
    std::size_t macs_per_pe = 1024;         ///< matrix-vector width per cycle
    std::size_t gb_bytes = 2910000;         ///< 2.91 MB global buffer
    std::size_t weight_buf_bytes = 32 * 32768;  ///< per PE: 32 x 32 KB
    std::size_t input_buf_bytes = 65536;
    std::size_t accum_buf_bytes = 32 * 384;
    std::size_t dram_bytes_per_cycle = 64;
    double clock_hz = 1e9;
    std::size_t bytes_per_element = 1;      ///< 8-bit datapath
    double e_mac = 1.0;
    double e_sram_byte = 6.0;
    double e_dram_byte = 400.0;

    void validate() const;
};

struct CostRecord {
    double energy = 0.0;
    double latency_cycles = 0.0;
    double latency_seconds = 0.0;
    double edp = 0.0;  ///< energy * latency_seconds
    std::uint64_t macs = 0;
    std::uint64_t dram_bytes = 0;
    std::uint64_t sram_bytes = 0;
    double utilization = 0.0;
};

/// Tag every non-static node with one of the four fused-einsum memory access
/// types and fill its DRAM/SRAM byte counts:
///
///   Type 1  raw activation from DRAM, weights from GB, output to GB
///   Type 2  GB only (interior node)
///   Type 3  operands from GB, final output to DRAM
///   Type 4  raw activation from DRAM and final output to DRAM
///
/// An intermediate larger than the global buffer spills: its producer writes
/// to DRAM and its consumer reads it back at DRAM cost. With fused=false,
/// every intermediate is kept in DRAM instead (the unfused baseline).
void assign_mem_types(ContractionPlan& plan, const AcceleratorConfig& accel, bool fused = true);

/// Compute-vs-memory-bound cycle model with a utilization penalty when the
/// summed extent is narrower than the PE datapath.
CostRecord node_cost(const PlanNode& node, const AcceleratorConfig& accel);

/// Componentwise sum over the plan's dynamic nodes; latency is sequential.
CostRecord fused_cost(const ContractionPlan& plan, const AcceleratorConfig& accel);

/// Whole-model totals: energies and latencies add, EDP = E_tot * T_tot.
CostRecord model_cost(const std::vector<CostRecord>& layer_records);

}  // namespace tds
