#include "tdsearch/supernet.hpp"

#include <algorithm>
#include <stdexcept>

namespace tds {

namespace {

// Leading block of t under smaller extents.
DenseTensor slice_leading(const DenseTensor& t, std::vector<std::size_t> new_extents) {
    if (new_extents == t.shape()) return t;
    if (new_extents.size() != t.order()) {
        throw std::invalid_argument("slice_leading: order mismatch");
    }
    for (std::size_t k = 0; k < new_extents.size(); ++k) {
        if (new_extents[k] == 0 || new_extents[k] > t.extent(k)) {
            throw std::invalid_argument("slice_leading: extent out of range");
        }
    }
    DenseTensor out(new_extents);
    const auto in_strides = t.strides();
    std::vector<std::size_t> idx(new_extents.size(), 0);
    std::size_t src = 0;
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        out[flat] = t[src];
        for (std::size_t k = new_extents.size(); k-- > 0;) {
            ++idx[k];
            src += in_strides[k];
            if (idx[k] < new_extents[k]) break;
            idx[k] = 0;
            src -= in_strides[k] * new_extents[k];
        }
    }
    return out;
}

std::vector<std::size_t> grid_values(std::size_t multiple, std::size_t cap) {
    std::vector<std::size_t> values;
    for (std::size_t v = multiple; v <= cap; v += multiple) values.push_back(v);
    if (values.empty()) values.push_back(cap);
    return values;
}

}  // namespace

RankGenome RankSpace::max_genome() const {
    RankGenome g;
    for (const auto& layer : grids) {
        std::vector<std::size_t> entry;
        for (const auto& grid : layer) entry.push_back(grid.back());
        g.entries.push_back(std::move(entry));
    }
    return g;
}

RankGenome RankSpace::min_genome() const {
    RankGenome g;
    for (const auto& layer : grids) {
        std::vector<std::size_t> entry;
        for (const auto& grid : layer) entry.push_back(grid.front());
        g.entries.push_back(std::move(entry));
    }
    return g;
}

bool RankSpace::contains(const RankGenome& genome) const {
    if (genome.entries.size() != grids.size()) return false;
    for (std::size_t l = 0; l < grids.size(); ++l) {
        if (genome.entries[l].size() != grids[l].size()) return false;
        for (std::size_t c = 0; c < grids[l].size(); ++c) {
            const auto& grid = grids[l][c];
            if (!std::binary_search(grid.begin(), grid.end(), genome.entries[l][c])) return false;
        }
    }
    return true;
}

void RankSpace::check(const RankGenome& genome) const {
    if (!contains(genome)) throw std::invalid_argument("rank genome off the legal grid");
}

std::size_t RankSpace::position(std::size_t layer, std::size_t component,
                                std::size_t value) const {
    const auto& grid = grids[layer][component];
    const auto it = std::lower_bound(grid.begin(), grid.end(), value);
    if (it == grid.end() || *it != value) {
        throw std::invalid_argument("rank value not on the grid");
    }
    return static_cast<std::size_t>(it - grid.begin());
}

SuperNetLayer make_supernet_layer(const DenseTensor& teacher, Format format,
                                  const TensorizationShape& shape,
                                  const SuperNetOptions& options) {
    if (options.rank_multiple == 0) throw std::invalid_argument("rank_multiple must be >= 1");
    SuperNetLayer layer;
    layer.teacher = teacher;

    const std::size_t step = options.rank_multiple;
    const auto uniform_under_target = [&](const std::vector<std::size_t>& maxima,
                                          auto make_spec) {
        // Largest uniform multiple whose clipped setting stays at or under
        // the target compression; never below one grid step.
        std::size_t cap = step;
        for (std::size_t r = step;; r += step) {
            std::vector<std::size_t> clipped(maxima.size());
            for (std::size_t k = 0; k < maxima.size(); ++k) clipped[k] = std::min(r, maxima[k]);
            if (compression_ratio(format, shape, make_spec(clipped)) > options.target_compression) {
                break;
            }
            cap = r;
            bool all_clipped = true;
            for (std::size_t k = 0; k < maxima.size(); ++k) {
                all_clipped = all_clipped && r >= maxima[k];
            }
            if (all_clipped) break;
        }
        return cap;
    };

    switch (format) {
        case Format::cp: {
            const std::vector<std::size_t> maxima{max_cp_rank(shape)};
            const std::size_t cap = uniform_under_target(maxima, [&](std::vector<std::size_t> v) {
                return RankSpec::cp(std::min(v[0], maxima[0]));
            });
            layer.grid.push_back(grid_values(step, std::min(cap, maxima[0])));
            const RankSpec ranks = RankSpec::cp(layer.grid[0].back());
            layer.max_net = decompose_cp(teacher, shape, ranks, options.als_iters, options.seed);
            break;
        }
        case Format::tucker: {
            const auto maxima = max_tucker_ranks(shape);
            const std::size_t cap = uniform_under_target(
                maxima, [&](std::vector<std::size_t> v) { return RankSpec::tucker(std::move(v)); });
            std::vector<std::size_t> top;
            for (std::size_t k = 0; k < maxima.size(); ++k) {
                layer.grid.push_back(grid_values(step, std::min(cap, maxima[k])));
                top.push_back(layer.grid.back().back());
            }
            // HOSVD only: leading slices then coincide with lower-rank HOSVD.
            layer.max_net = decompose_tucker(teacher, shape, RankSpec::tucker(top), 0);
            break;
        }
        case Format::ttm: {
            const auto maxima = max_ttm_bonds(shape);
            std::vector<std::size_t> interior(maxima.begin() + 1, maxima.end() - 1);
            const std::size_t cap = uniform_under_target(interior, [&](std::vector<std::size_t> v) {
                std::vector<std::size_t> bonds(maxima.size(), 1);
                for (std::size_t k = 0; k < v.size(); ++k) bonds[k + 1] = v[k];
                return RankSpec::ttm(std::move(bonds));
            });
            std::vector<std::size_t> bonds(maxima.size(), 1);
            for (std::size_t k = 0; k < interior.size(); ++k) {
                layer.grid.push_back(grid_values(step, std::min(cap, interior[k])));
                bonds[k + 1] = layer.grid.back().back();
            }
            layer.max_net = decompose_ttm(teacher, shape, RankSpec::ttm(std::move(bonds)));
            break;
        }
    }
    return layer;
}

RankSpace space_of(const std::vector<SuperNetLayer>& layers) {
    RankSpace space;
    for (const auto& layer : layers) space.grids.push_back(layer.grid);
    return space;
}

FactorizedLinear slice_subnet(const SuperNetLayer& layer, const std::vector<std::size_t>& entry) {
    const FactorizedLinear& full = layer.max_net;
    if (entry.size() != layer.grid.size()) {
        throw std::invalid_argument("slice_subnet: wrong component count");
    }
    for (std::size_t c = 0; c < entry.size(); ++c) {
        const auto& grid = layer.grid[c];
        if (!std::binary_search(grid.begin(), grid.end(), entry[c])) {
            throw std::invalid_argument("slice_subnet: rank off the grid");
        }
    }

    FactorizedLinear sliced;
    sliced.format = full.format;
    sliced.shape = full.shape;
    sliced.scale = full.scale;
    const auto extents = full.shape.axis_extents();

    switch (full.format) {
        case Format::cp: {
            const std::size_t r = entry[0];
            sliced.ranks = RankSpec::cp(r);
            sliced.cores.push_back(slice_leading(full.cores[0], {r}));
            for (std::size_t k = 0; k < extents.size(); ++k) {
                sliced.cores.push_back(slice_leading(full.cores[1 + k], {extents[k], r}));
            }
            break;
        }
        case Format::tucker: {
            sliced.ranks = RankSpec::tucker(entry);
            sliced.cores.push_back(slice_leading(full.cores[0], entry));
            for (std::size_t k = 0; k < extents.size(); ++k) {
                sliced.cores.push_back(slice_leading(full.cores[1 + k], {extents[k], entry[k]}));
            }
            break;
        }
        case Format::ttm: {
            std::vector<std::size_t> bonds(entry.size() + 2, 1);
            for (std::size_t k = 0; k < entry.size(); ++k) bonds[k + 1] = entry[k];
            sliced.ranks = RankSpec::ttm(bonds);
            for (std::size_t k = 0; k < full.cores.size(); ++k) {
                sliced.cores.push_back(slice_leading(
                    full.cores[k], {bonds[k], full.shape.row_factors[k],
                                    full.shape.col_factors[k], bonds[k + 1]}));
            }
            break;
        }
    }
    return sliced;
}

DenseTensor subnet_reconstruct(const SuperNetLayer& layer, const std::vector<std::size_t>& entry) {
    const DenseTensor recon = reconstruct(slice_subnet(layer, entry));
    const VarianceScaled scaled = variance_match_scale(layer.teacher, recon);
    return scaled.tensor;
}

RankGenome sample_genome(const RankSpace& space, const RankGenome& prev,
                         const SamplerConfig& config, Rng& rng) {
    space.check(prev);
    RankGenome next = prev;
    const auto step = static_cast<std::int64_t>(config.max_step);
    for (std::size_t l = 0; l < space.grids.size(); ++l) {
        for (std::size_t c = 0; c < space.grids[l].size(); ++c) {
            const auto& grid = space.grids[l][c];
            const auto pos =
                static_cast<std::int64_t>(space.position(l, c, prev.entries[l][c]));
            const std::int64_t delta = uniform_int(rng, -step, step);
            const std::int64_t moved =
                std::clamp<std::int64_t>(pos + delta, 0, static_cast<std::int64_t>(grid.size()) - 1);
            next.entries[l][c] = grid[static_cast<std::size_t>(moved)];
        }
    }
    return next;
}

std::vector<RankGenome> sandwich_batch(const RankSpace& space, const RankGenome& prev,
                                       const SamplerConfig& config, Rng& rng) {
    std::vector<RankGenome> batch{space.max_genome(), space.min_genome()};
    for (std::size_t k = 0; k < config.sandwich_random_count; ++k) {
        batch.push_back(sample_genome(space, prev, config, rng));
    }
    return batch;
}

double proxy_accuracy(const RankGenome& genome, const std::vector<SuperNetLayer>& layers) {
    if (genome.entries.size() != layers.size()) {
        throw std::invalid_argument("proxy_accuracy: genome/layer count mismatch");
    }
    if (layers.empty()) return 1.0;
    double total = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseTensor recon = subnet_reconstruct(layers[l], genome.entries[l]);
        total += std::min(1.0, relative_error(layers[l].teacher, recon));
    }
    return 1.0 - total / static_cast<double>(layers.size());
}

}  // namespace tds
