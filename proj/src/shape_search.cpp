#include "tdsearch/shape_search.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <stdexcept>

#include "tdsearch/parallel.hpp"
#include "tdsearch/rng.hpp"

namespace tds {

ShapeSpaceConfig ShapeSpaceConfig::defaults_for(Format format) {
    ShapeSpaceConfig config;
    config.format = format;
    switch (format) {
        case Format::ttm:
            config.candidate_orders = {6, 8, 10};
            config.rank_multiple = 32;
            break;
        case Format::tucker:
            config.candidate_orders = {4, 6, 8};
            config.rank_multiple = 8;
            break;
        case Format::cp:
            config.candidate_orders = {2, 3};
            config.rank_multiple = 32;
            break;
    }
    return config;
}

void ShapeSpaceConfig::validate() const {
    if (candidate_orders.empty()) throw std::invalid_argument("no candidate orders");
    if (top_k == 0) throw std::invalid_argument("top_k must be >= 1");
    if (rank_multiple == 0) throw std::invalid_argument("rank_multiple must be >= 1");
    if (!(c_min < c_max)) throw std::invalid_argument("compression limits must satisfy c_min < c_max");
}

std::vector<std::vector<std::size_t>> ordered_factorizations(std::size_t m, std::size_t d) {
    std::vector<std::vector<std::size_t>> result;
    if (d == 0) return result;
    std::vector<std::size_t> current;
    const std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t rest,
                                                                      std::size_t slots) {
        if (slots == 1) {
            if (rest >= 2) {
                current.push_back(rest);
                result.push_back(current);
                current.pop_back();
            }
            return;
        }
        for (std::size_t f = 2; f * 2 <= rest; ++f) {
            if (rest % f != 0) continue;
            current.push_back(f);
            recurse(rest / f, slots - 1);
            current.pop_back();
        }
    };
    recurse(m, d);
    return result;
}

double entropy_score(std::span<const std::size_t> factors, std::size_t m) {
    const double log_m = std::log(static_cast<double>(m));
    if (factors.size() <= 1 || log_m == 0.0) return 0.0;
    double h = 0.0;
    for (std::size_t f : factors) {
        const double p = std::log(static_cast<double>(f)) / log_m;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

namespace {

// Top-k factorizations of m into `parts` factors by entropy (ties
// lexicographic), closed under permutation within the group.
std::vector<std::vector<std::size_t>> top_factor_group(std::size_t m, std::size_t parts,
                                                       std::size_t top_k) {
    auto all = ordered_factorizations(m, parts);
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        const double ha = entropy_score(a, m);
        const double hb = entropy_score(b, m);
        if (ha != hb) return ha > hb;
        return a < b;
    });
    if (all.size() > top_k) all.resize(top_k);

    std::set<std::vector<std::size_t>> closed;
    for (const auto& tuple : all) {
        std::vector<std::size_t> sorted = tuple;
        std::sort(sorted.begin(), sorted.end());
        do {
            closed.insert(sorted);
        } while (std::next_permutation(sorted.begin(), sorted.end()));
    }
    return {closed.begin(), closed.end()};
}

}  // namespace

std::vector<ShapeCandidate> generate_candidates(std::size_t m, std::size_t n,
                                                const ShapeSpaceConfig& config) {
    config.validate();
    std::vector<ShapeCandidate> candidates;
    std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> seen;

    for (std::size_t order : config.candidate_orders) {
        std::vector<std::pair<std::size_t, std::size_t>> splits;
        if (config.format == Format::ttm) {
            if (order % 2 != 0) continue;
            splits.emplace_back(order / 2, order / 2);
        } else {
            for (std::size_t p = 1; p < order; ++p) splits.emplace_back(p, order - p);
        }
        for (const auto& [p, q] : splits) {
            const auto rows = top_factor_group(m, p, config.top_k);
            const auto cols = top_factor_group(n, q, config.top_k);
            for (const auto& row : rows) {
                for (const auto& col : cols) {
                    if (!seen.emplace(row, col).second) continue;
                    ShapeCandidate cand;
                    cand.shape.row_factors = row;
                    cand.shape.col_factors = col;
                    cand.entropy = entropy_score(row, m) + entropy_score(col, n);
                    candidates.push_back(std::move(cand));
                }
            }
        }
    }
    return candidates;
}

std::vector<RankSpec> enumerate_ranks(const TensorizationShape& shape, Format format,
                                      const ShapeSpaceConfig& config) {
    config.validate();
    std::vector<RankSpec> result;
    std::set<std::vector<std::size_t>> seen;
    const std::size_t step = config.rank_multiple;

    const auto admit = [&](RankSpec spec) {
        if (!seen.insert(spec.ranks).second) return;
        const double c = compression_ratio(format, shape, spec);
        if (c >= config.c_min && c <= config.c_max) result.push_back(std::move(spec));
    };

    switch (format) {
        case Format::cp: {
            const std::size_t r_max = max_cp_rank(shape);
            for (std::size_t r = step; r <= r_max; r += step) {
                const RankSpec spec = RankSpec::cp(r);
                const double c = compression_ratio(format, shape, spec);
                if (c > config.c_max) break;
                if (c >= config.c_min) result.push_back(spec);
            }
            break;
        }
        case Format::tucker: {
            const auto maxima = max_tucker_ranks(shape);
            const std::size_t cap = *std::max_element(maxima.begin(), maxima.end());
            for (std::size_t r = step; ; r += step) {
                std::vector<std::size_t> ranks(maxima.size());
                for (std::size_t k = 0; k < maxima.size(); ++k) {
                    ranks[k] = std::min(r, maxima[k]);
                }
                admit(RankSpec::tucker(std::move(ranks)));
                if (r >= cap) break;
            }
            break;
        }
        case Format::ttm: {
            const auto maxima = max_ttm_bonds(shape);
            std::size_t cap = 1;
            for (std::size_t b : maxima) cap = std::max(cap, b);
            for (std::size_t r = step; ; r += step) {
                std::vector<std::size_t> bonds(maxima.size(), 1);
                for (std::size_t k = 1; k + 1 < maxima.size(); ++k) {
                    bonds[k] = std::min(r, maxima[k]);
                }
                admit(RankSpec::ttm(std::move(bonds)));
                if (r >= cap) break;
            }
            break;
        }
    }
    return result;
}

CostTable build_cost_table(const DenseTensor& w, const std::vector<ShapeCandidate>& candidates,
                           const AcceleratorConfig& accel, const ShapeSpaceConfig& config,
                           const CostTableOptions& options) {
    if (candidates.empty()) throw std::invalid_argument("build_cost_table: no candidates");
    accel.validate();

    // Deduplicate candidate shapes, keeping first occurrence order.
    std::vector<TensorizationShape> shapes;
    {
        std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> seen;
        for (const auto& cand : candidates) {
            if (seen.emplace(cand.shape.row_factors, cand.shape.col_factors).second) {
                shapes.push_back(cand.shape);
            }
        }
    }

    struct Pending {
        TensorizationShape shape;
        RankSpec ranks;
    };
    std::vector<Pending> pending;
    for (const auto& shape : shapes) {
        for (auto& ranks : enumerate_ranks(shape, config.format, config)) {
            pending.push_back({shape, std::move(ranks)});
        }
    }

    CostTable table;
    table.rows.resize(pending.size());
    parallel_for(pending.size(), options.jobs, [&](std::size_t i) {
        const Pending& row = pending[i];
        ProjectOptions popts = options.project;
        popts.seed = derive_seed(options.seed, i);
        const Projection proj = project(w, config.format, row.shape, row.ranks, popts);

        LayerEinsum layer = build_einsum(proj.factorized, options.batch_tokens);
        ContractionPlan plan = optimal_path(layer.spec);
        plan = fold_static(plan, layer.is_static, layer.operands);
        assign_mem_types(plan, accel);

        CostTableRow& out = table.rows[i];
        out.shape = row.shape;
        out.ranks = row.ranks;
        out.error = proj.error;
        out.compression = compression_ratio(config.format, row.shape, row.ranks);
        out.cost = fused_cost(plan, accel);
    });
    return table;
}

namespace {

bool dominates(const CostTableRow& a, const CostTableRow& b) {
    const bool le = a.error <= b.error && a.compression <= b.compression && a.cost.edp <= b.cost.edp;
    const bool lt = a.error < b.error || a.compression < b.compression || a.cost.edp < b.cost.edp;
    return le && lt;
}

}  // namespace

std::vector<std::size_t> pareto_front(const CostTable& table) {
    if (table.rows.empty()) throw std::invalid_argument("pareto_front: empty table");
    const std::size_t n = table.rows.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = table.rows[a];
        const auto& rb = table.rows[b];
        if (ra.error != rb.error) return ra.error < rb.error;
        if (ra.compression != rb.compression) return ra.compression < rb.compression;
        if (ra.cost.edp != rb.cost.edp) return ra.cost.edp < rb.cost.edp;
        return a < b;
    });

    // Any dominator of a row sorts before it, so each row only needs to be
    // checked against the survivors seen so far.
    std::vector<std::size_t> front;
    for (std::size_t idx : order) {
        bool dominated = false;
        for (std::size_t kept : front) {
            if (dominates(table.rows[kept], table.rows[idx])) {
                dominated = true;
                break;
            }
        }
        if (!dominated) front.push_back(idx);
    }
    std::sort(front.begin(), front.end());
    return front;
}

const CostTableRow& select_shape(const CostTable& table, std::span<const std::size_t> front) {
    if (front.empty()) throw std::invalid_argument("select_shape: empty front");
    const std::size_t* best = &front[0];
    for (const std::size_t& idx : front.subspan(1)) {
        const CostTableRow& a = table.rows[idx];
        const CostTableRow& b = table.rows[*best];
        bool better = false;
        if (a.error != b.error) {
            better = a.error < b.error;
        } else if (a.cost.edp != b.cost.edp) {
            better = a.cost.edp < b.cost.edp;
        } else if (a.compression != b.compression) {
            better = a.compression < b.compression;
        } else if (!(a.shape == b.shape)) {
            better = lex_less(a.shape, b.shape);
        } else {
            better = a.ranks.ranks < b.ranks.ranks;
        }
        if (better) best = &idx;
    }
    return table.rows[*best];
}

}  // namespace tds
