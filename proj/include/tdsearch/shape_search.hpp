#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdsearch/accel_cost.hpp"
#include "tdsearch/factorize.hpp"

namespace tds {

/// Candidate space for one decomposition format: which tensorized orders to
/// try, how many top-entropy factorizations to keep per side, the rank grid
/// step, and the admissible compression window.
struct ShapeSpaceConfig {
    Format format = Format::cp;
    std::vector<std::size_t> candidate_orders;
    std::size_t top_k = 3;
    std::size_t rank_multiple = 32;
    double c_min = 0.35;
    double c_max = 0.5;

    static ShapeSpaceConfig defaults_for(Format format);
    void validate() const;
};

struct ShapeCandidate {
    TensorizationShape shape;
    double entropy = 0.0;  ///< row entropy + column entropy
};

struct CostTableRow {
    TensorizationShape shape;
    RankSpec ranks;
    double error = 0.0;
    double compression = 0.0;
    CostRecord cost;
};

struct CostTable {
    std::vector<CostTableRow> rows;
};

/// Every ordered tuple of d integers >= 2 whose product is m. Empty when no
/// such factorization exists.
std::vector<std::vector<std::size_t>> ordered_factorizations(std::size_t m, std::size_t d);

/// H = -sum p_i ln p_i with p_i = ln(m_i)/ln(m); maximal for uniform factors.
double entropy_score(std::span<const std::size_t> factors, std::size_t m);

/// Per order: keep the top_k row and column factorizations by entropy (ties
/// lexicographic), close each side under permutation, and pair row with
/// column groups. TTM pairs equal-length sides; other formats consider every
/// row/column count split of the order.
std::vector<ShapeCandidate> generate_candidates(std::size_t m, std::size_t n,
                                                const ShapeSpaceConfig& config);

/// Rank settings on the multiple grid whose compression lies in
/// [c_min, c_max]. Multi-rank formats enumerate uniform settings clipped
/// per-axis/bond to the legal maximum.
std::vector<RankSpec> enumerate_ranks(const TensorizationShape& shape, Format format,
                                      const ShapeSpaceConfig& config);

struct CostTableOptions {
    std::size_t batch_tokens = 64;
    std::uint64_t seed = 0;
    int jobs = 1;
    ProjectOptions project;
};

/// One row per distinct (shape, admissible rank): projection error,
/// compression, and the fused-einsum cost of the MAC-optimal folded plan.
CostTable build_cost_table(const DenseTensor& w, const std::vector<ShapeCandidate>& candidates,
                           const AcceleratorConfig& accel, const ShapeSpaceConfig& config,
                           const CostTableOptions& options = {});

/// Indices of the rows not dominated in (error, compression, EDP), all
/// minimized.
std::vector<std::size_t> pareto_front(const CostTable& table);

/// Front row with minimal error; ties break by lower EDP, then lower
/// compression, then lexicographic shape.
const CostTableRow& select_shape(const CostTable& table, std::span<const std::size_t> front);

}  // namespace tds
