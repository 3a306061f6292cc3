#pragma once

#include <cstdint>
#include <vector>

#include "tdsearch/factorize.hpp"
#include "tdsearch/rng.hpp"

namespace tds {

/// One rank assignment per supernet layer. An entry holds one value per rank
/// component: a single value for CP, one per axis for Tucker, one per
/// interior bond for TTM.
struct RankGenome {
    std::vector<std::vector<std::size_t>> entries;

    bool operator==(const RankGenome&) const = default;
    bool operator<(const RankGenome& other) const { return entries < other.entries; }
};

/// Legal rank grid per layer and component; values ascending.
struct RankSpace {
    std::vector<std::vector<std::vector<std::size_t>>> grids;

    std::size_t layer_count() const { return grids.size(); }
    RankGenome max_genome() const;
    RankGenome min_genome() const;
    bool contains(const RankGenome& genome) const;
    void check(const RankGenome& genome) const;
    /// Grid position of a value (value must be on the grid).
    std::size_t position(std::size_t layer, std::size_t component, std::size_t value) const;
};

/// A weight-sharing layer: cores decomposed once at maximal ranks; every
/// subnet is a leading slice of those cores. Tucker supernets use plain
/// truncated HOSVD (no HOOI) so slices nest exactly.
struct SuperNetLayer {
    FactorizedLinear max_net;
    DenseTensor teacher;
    std::vector<std::vector<std::size_t>> grid;  ///< per component, ascending
};

struct SuperNetOptions {
    std::size_t rank_multiple = 8;
    double target_compression = 0.6;
    int als_iters = 50;
    std::uint64_t seed = 0;
};

/// Build the shared-core layer for a teacher matrix under a frozen shape.
/// Maximal ranks are the largest grid point whose compression stays at or
/// under target_compression (at least one grid step).
SuperNetLayer make_supernet_layer(const DenseTensor& teacher, Format format,
                                  const TensorizationShape& shape, const SuperNetOptions& options);

RankSpace space_of(const std::vector<SuperNetLayer>& layers);

/// Truncate the shared cores to the leading `entry` components. Slicing at
/// the maximal ranks reproduces the stored cores exactly.
FactorizedLinear slice_subnet(const SuperNetLayer& layer, const std::vector<std::size_t>& entry);

/// reconstruct(slice) rescaled to match the teacher's variance.
DenseTensor subnet_reconstruct(const SuperNetLayer& layer, const std::vector<std::size_t>& entry);

struct SamplerConfig {
    std::size_t max_step = 3;  ///< largest grid-step move per component per iteration
    std::size_t sandwich_random_count = 2;
};

/// Move every component of prev by at most max_step grid positions,
/// uniformly at random, clipped to the grid.
RankGenome sample_genome(const RankSpace& space, const RankGenome& prev,
                         const SamplerConfig& config, Rng& rng);

/// [largest, smallest] plus sandwich_random_count constrained samples.
std::vector<RankGenome> sandwich_batch(const RankSpace& space, const RankGenome& prev,
                                       const SamplerConfig& config, Rng& rng);

/// Deterministic desk-scale accuracy stand-in:
/// 1 - mean over layers of min(1, relative reconstruction error).
double proxy_accuracy(const RankGenome& genome, const std::vector<SuperNetLayer>& layers);

}  // namespace tds
