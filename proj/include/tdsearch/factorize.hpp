#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdsearch/tensor.hpp"

namespace tds {

enum class Format { cp, tucker, ttm };

std::string format_name(Format format);
Format parse_format(const std::string& name);

/// Split of an M x N matrix into row factors m_1..m_p and column factors
/// n_1..n_q. The tensorized order is d = p + q; TTM additionally requires
/// p == q so row/column factors pair up.
struct TensorizationShape {
    std::vector<std::size_t> row_factors;
    std::vector<std::size_t> col_factors;

    std::size_t rows() const;
    std::size_t cols() const;
    std::size_t order() const { return row_factors.size() + col_factors.size(); }

    /// Axis extents of the plain (CP/Tucker) layout: rows then columns.
    std::vector<std::size_t> axis_extents() const;
    /// Axis extents of the TTM layout: one fused m_k * n_k extent per pair.
    std::vector<std::size_t> fused_extents() const;

    bool operator==(const TensorizationShape&) const = default;
    std::string to_string() const;
};

bool lex_less(const TensorizationShape& a, const TensorizationShape& b);

/// CP: a single rank. Tucker: one rank per tensorized axis. TTM: the full
/// bond chain r_0..r_p including the fixed boundary ones.
struct RankSpec {
    Format format = Format::cp;
    std::vector<std::size_t> ranks;

    static RankSpec cp(std::size_t r);
    static RankSpec tucker(std::vector<std::size_t> per_axis);
    static RankSpec ttm(std::vector<std::size_t> bonds);

    bool operator==(const RankSpec&) const = default;
    std::string to_string() const;
};

/// One weight matrix in factorized form.
///
/// Core layout per format:
///   CP:     [lambda (r), factor per axis (extent x r)], components ordered
///           by descending |lambda| so rank-slicing keeps the heaviest ones;
///   Tucker: [core (r_1 x .. x r_d), factor per axis (extent x r_k)];
///   TTM:    one core per row/column pair, r_{k-1} x m_k x n_k x r_k.
struct FactorizedLinear {
    Format format = Format::cp;
    TensorizationShape shape;
    RankSpec ranks;
    std::vector<DenseTensor> cores;
    double scale = 1.0;
};

/// Zero-filled cores of the right shapes for (format, shape, ranks); handy
/// for structural work (planning, cost) that never reads the values.
FactorizedLinear make_zero_factorized(Format format, const TensorizationShape& shape,
                                      const RankSpec& ranks);

std::size_t param_count(Format format, const TensorizationShape& shape, const RankSpec& ranks);
std::size_t param_count(const FactorizedLinear& f);

/// Factorized parameter count over M*N; 1 means parameter parity with dense.
double compression_ratio(Format format, const TensorizationShape& shape, const RankSpec& ranks);
double compression_ratio(const FactorizedLinear& f);

/// Reshape an M x N matrix into the higher-order tensor the format
/// decomposes: plain (rows..., cols...) for CP/Tucker, fused (m_k n_k) pairs
/// for TTM.
DenseTensor tensorize(const DenseTensor& w, const TensorizationShape& shape, Format format);
DenseTensor detensorize(const DenseTensor& t, const TensorizationShape& shape, Format format);

/// Largest admissible Tucker rank per axis (the axis extents).
std::vector<std::size_t> max_tucker_ranks(const TensorizationShape& shape);
/// Largest admissible TTM bond chain, boundaries included.
std::vector<std::size_t> max_ttm_bonds(const TensorizationShape& shape);
std::size_t max_cp_rank(const TensorizationShape& shape);
RankSpec max_ranks(Format format, const TensorizationShape& shape);

/// Tensor-train style decomposition of the fused tensor via sequential
/// truncated SVDs. Requested interior bonds must not exceed the unfolding
/// maxima.
FactorizedLinear decompose_ttm(const DenseTensor& w, const TensorizationShape& shape,
                               const RankSpec& ranks);

/// Truncated higher-order SVD plus `hooi_sweeps` alternating refinement
/// sweeps. Per-sweep errors are appended to *sweep_errors when given,
/// starting with the initial HOSVD error.
FactorizedLinear decompose_tucker(const DenseTensor& w, const TensorizationShape& shape,
                                  const RankSpec& ranks, int hooi_sweeps = 3,
                                  std::vector<double>* sweep_errors = nullptr);

/// Alternating least squares with seeded random init. Factor columns are
/// normalized into lambda each update; on return components are sorted by
/// |lambda| descending. Per-sweep errors appended to *sweep_errors if given.
FactorizedLinear decompose_cp(const DenseTensor& w, const TensorizationShape& shape,
                              const RankSpec& ranks, int als_iters = 50, std::uint64_t seed = 0,
                              std::vector<double>* sweep_errors = nullptr);

/// Dense M x N matrix this factorization represents, scale applied.
DenseTensor reconstruct(const FactorizedLinear& f);

struct ProjectOptions {
    int hooi_sweeps = 3;
    int als_iters = 50;
    std::uint64_t seed = 0;
    bool variance_scale = false;
};

struct Projection {
    FactorizedLinear factorized;
    double error = 0.0;  ///< ||W - reconstruct||_F / ||W||_F; 0 for an all-zero W
};

/// Best-effort minimum-error factorization of w under (format, shape, ranks).
Projection project(const DenseTensor& w, Format format, const TensorizationShape& shape,
                   const RankSpec& ranks, const ProjectOptions& options = {});

}  // namespace tds
