#include "tdsearch/factorize.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tdsearch/rng.hpp"

namespace tds {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> as_matrix(const DenseTensor& t, std::size_t rows, std::size_t cols) {
    return Eigen::Map<const RowMat>(t.data(), static_cast<Eigen::Index>(rows),
                                    static_cast<Eigen::Index>(cols));
}

DenseTensor from_matrix(const RowMat& m, std::vector<std::size_t> shape) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return DenseTensor(std::move(shape), std::move(data));
}

// Thin SVD, singular values descending.
void thin_svd(const RowMat& a, RowMat& u, Eigen::VectorXd& sigma, RowMat& v) {
    Eigen::BDCSVD<RowMat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    sigma = svd.singularValues();
    v = svd.matrixV();
}

// Mode-k unfolding: axis k first, remaining axes in ascending order.
DenseTensor unfold(const DenseTensor& t, std::size_t axis) {
    std::vector<std::size_t> order{axis};
    for (std::size_t k = 0; k < t.order(); ++k) {
        if (k != axis) order.push_back(k);
    }
    DenseTensor moved = permute(t, order);
    return reshape(moved, {t.extent(axis), t.size() / t.extent(axis)});
}

// Contract axis `k` of t (extent e_k) with u (out x e_k): result extent out.
DenseTensor mode_multiply(const DenseTensor& t, std::size_t axis, const RowMat& u) {
    const std::size_t d = t.order();
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < d; ++k) {
        if (k != axis) order.push_back(k);
    }
    order.push_back(axis);
    DenseTensor moved = permute(t, order);
    const std::size_t rest = t.size() / t.extent(axis);
    RowMat result = as_matrix(moved, rest, t.extent(axis)) * u.transpose();

    std::vector<std::size_t> moved_shape;
    for (std::size_t k = 0; k < d; ++k) {
        if (k != axis) moved_shape.push_back(t.extent(k));
    }
    moved_shape.push_back(static_cast<std::size_t>(u.rows()));
    DenseTensor out = from_matrix(result, std::move(moved_shape));

    std::vector<std::size_t> back(d);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < d; ++k) {
        back[k] = (k == axis) ? d - 1 : pos++;
    }
    return permute(out, back);
}

// Khatri-Rao product of factor matrices (each extent x r), first matrix
// slowest, matching the row-major unfolding column order.
RowMat khatri_rao(const std::vector<const RowMat*>& factors) {
    RowMat k = *factors.front();
    for (std::size_t i = 1; i < factors.size(); ++i) {
        const RowMat& a = *factors[i];
        RowMat next(k.rows() * a.rows(), k.cols());
        for (Eigen::Index x = 0; x < k.rows(); ++x) {
            for (Eigen::Index y = 0; y < a.rows(); ++y) {
                next.row(x * a.rows() + y) = k.row(x).cwiseProduct(a.row(y));
            }
        }
        k = std::move(next);
    }
    return k;
}

// Moore-Penrose pseudoinverse of a symmetric PSD matrix.
RowMat pinv_sym(const RowMat& v) {
    Eigen::SelfAdjointEigenSolver<RowMat> eig(v);
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(v.rows()) *
                       std::max(vals.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = vals;
    for (Eigen::Index i = 0; i < inv.size(); ++i) {
        inv[i] = vals[i] > tol ? 1.0 / vals[i] : 0.0;
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

void check_shape_matches(const DenseTensor& w, const TensorizationShape& shape) {
    if (w.order() != 2) throw std::invalid_argument("expected an order-2 weight matrix");
    if (w.extent(0) != shape.rows() || w.extent(1) != shape.cols()) {
        throw std::invalid_argument("tensorization shape does not factor the matrix: " +
                                    shape.to_string());
    }
}

void check_ranks(Format format, const TensorizationShape& shape, const RankSpec& ranks) {
    if (ranks.format != format) throw std::invalid_argument("rank spec format mismatch");
    for (std::size_t r : ranks.ranks) {
        if (r == 0) throw std::invalid_argument("ranks must be positive");
    }
    switch (format) {
        case Format::cp:
            if (ranks.ranks.size() != 1) throw std::invalid_argument("CP expects a single rank");
            break;
        case Format::tucker: {
            const auto extents = shape.axis_extents();
            if (ranks.ranks.size() != extents.size()) {
                throw std::invalid_argument("Tucker expects one rank per axis");
            }
            for (std::size_t k = 0; k < extents.size(); ++k) {
                if (ranks.ranks[k] > extents[k]) {
                    throw std::invalid_argument("Tucker rank exceeds axis extent");
                }
            }
            break;
        }
        case Format::ttm: {
            if (shape.row_factors.size() != shape.col_factors.size()) {
                throw std::invalid_argument("TTM requires equally many row and column factors");
            }
            const auto maxima = max_ttm_bonds(shape);
            if (ranks.ranks.size() != maxima.size()) {
                throw std::invalid_argument("TTM expects bonds r_0..r_p");
            }
            if (ranks.ranks.front() != 1 || ranks.ranks.back() != 1) {
                throw std::invalid_argument("TTM boundary bonds must be 1");
            }
            for (std::size_t k = 0; k < maxima.size(); ++k) {
                if (ranks.ranks[k] > maxima[k]) {
                    throw std::invalid_argument("TTM bond exceeds unfolding dimension");
                }
            }
            break;
        }
    }
}

bool is_zero(const DenseTensor& t) {
    for (double v : t.values()) {
        if (v != 0.0) return false;
    }
    return true;
}

}  // namespace

std::string format_name(Format format) {
    switch (format) {
        case Format::cp: return "cp";
        case Format::tucker: return "tucker";
        case Format::ttm: return "ttm";
    }
    return "?";
}

Format parse_format(const std::string& name) {
    if (name == "cp") return Format::cp;
    if (name == "tucker") return Format::tucker;
    if (name == "ttm") return Format::ttm;
    throw std::invalid_argument("unknown format: " + name);
}

FactorizedLinear make_zero_factorized(Format format, const TensorizationShape& shape,
                                      const RankSpec& ranks) {
    check_ranks(format, shape, ranks);
    FactorizedLinear f{format, shape, ranks, {}, 1.0};
    const auto extents = shape.axis_extents();
    switch (format) {
        case Format::cp: {
            f.cores.emplace_back(std::vector<std::size_t>{ranks.ranks[0]});
            for (std::size_t k = 0; k < extents.size(); ++k) {
                f.cores.emplace_back(std::vector<std::size_t>{extents[k], ranks.ranks[0]});
            }
            break;
        }
        case Format::tucker: {
            f.cores.emplace_back(ranks.ranks);
            for (std::size_t k = 0; k < extents.size(); ++k) {
                f.cores.emplace_back(std::vector<std::size_t>{extents[k], ranks.ranks[k]});
            }
            break;
        }
        case Format::ttm: {
            for (std::size_t k = 0; k < shape.row_factors.size(); ++k) {
                f.cores.emplace_back(std::vector<std::size_t>{
                    ranks.ranks[k], shape.row_factors[k], shape.col_factors[k],
                    ranks.ranks[k + 1]});
            }
            break;
        }
    }
    return f;
}

std::size_t TensorizationShape::rows() const {
    return shape_product(row_factors);
}

std::size_t TensorizationShape::cols() const {
    return shape_product(col_factors);
}

std::vector<std::size_t> TensorizationShape::axis_extents() const {
    std::vector<std::size_t> e = row_factors;
    e.insert(e.end(), col_factors.begin(), col_factors.end());
    return e;
}

std::vector<std::size_t> TensorizationShape::fused_extents() const {
    if (row_factors.size() != col_factors.size()) {
        throw std::invalid_argument("fused extents need paired row/column factors");
    }
    std::vector<std::size_t> e(row_factors.size());
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = row_factors[k] * col_factors[k];
    return e;
}

std::string TensorizationShape::to_string() const {
    std::ostringstream out;
    out << "(";
    for (std::size_t k = 0; k < row_factors.size(); ++k) {
        out << (k ? "," : "") << row_factors[k];
    }
    out << "|";
    for (std::size_t k = 0; k < col_factors.size(); ++k) {
        out << (k ? "," : "") << col_factors[k];
    }
    out << ")";
    return out.str();
}

bool lex_less(const TensorizationShape& a, const TensorizationShape& b) {
    if (a.row_factors != b.row_factors) return a.row_factors < b.row_factors;
    return a.col_factors < b.col_factors;
}

RankSpec RankSpec::cp(std::size_t r) {
    return RankSpec{Format::cp, {r}};
}

RankSpec RankSpec::tucker(std::vector<std::size_t> per_axis) {
    return RankSpec{Format::tucker, std::move(per_axis)};
}

RankSpec RankSpec::ttm(std::vector<std::size_t> bonds) {
    return RankSpec{Format::ttm, std::move(bonds)};
}

std::string RankSpec::to_string() const {
    std::ostringstream out;
    out << "[";
    for (std::size_t k = 0; k < ranks.size(); ++k) out << (k ? "," : "") << ranks[k];
    out << "]";
    return out.str();
}

std::size_t param_count(Format format, const TensorizationShape& shape, const RankSpec& ranks) {
    check_ranks(format, shape, ranks);
    switch (format) {
        case Format::cp: {
            const std::size_t r = ranks.ranks[0];
            std::size_t axes = 0;
            for (std::size_t e : shape.axis_extents()) axes += e;
            return r * (axes + 1);
        }
        case Format::tucker: {
            const auto extents = shape.axis_extents();
            std::size_t total = shape_product(ranks.ranks);
            for (std::size_t k = 0; k < extents.size(); ++k) {
                total += extents[k] * ranks.ranks[k];
            }
            return total;
        }
        case Format::ttm: {
            std::size_t total = 0;
            for (std::size_t k = 0; k < shape.row_factors.size(); ++k) {
                total += ranks.ranks[k] * shape.row_factors[k] * shape.col_factors[k] *
                         ranks.ranks[k + 1];
            }
            return total;
        }
    }
    return 0;
}

std::size_t param_count(const FactorizedLinear& f) {
    return param_count(f.format, f.shape, f.ranks);
}

double compression_ratio(Format format, const TensorizationShape& shape, const RankSpec& ranks) {
    return static_cast<double>(param_count(format, shape, ranks)) /
           (static_cast<double>(shape.rows()) * static_cast<double>(shape.cols()));
}

double compression_ratio(const FactorizedLinear& f) {
    return compression_ratio(f.format, f.shape, f.ranks);
}

DenseTensor tensorize(const DenseTensor& w, const TensorizationShape& shape, Format format) {
    check_shape_matches(w, shape);
    DenseTensor plain = reshape(w, shape.axis_extents());
    if (format != Format::ttm) return plain;

    // Interleave (m_1, n_1, m_2, n_2, ...) then fuse each pair.
    const std::size_t p = shape.row_factors.size();
    if (p != shape.col_factors.size()) {
        throw std::invalid_argument("TTM tensorization needs paired row/column factors");
    }
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < p; ++k) {
        order.push_back(k);
        order.push_back(p + k);
    }
    return reshape(permute(plain, order), shape.fused_extents());
}

DenseTensor detensorize(const DenseTensor& t, const TensorizationShape& shape, Format format) {
    const std::vector<std::size_t> dims{shape.rows(), shape.cols()};
    if (format != Format::ttm) {
        if (t.shape() != shape.axis_extents()) {
            throw std::invalid_argument("detensorize: unexpected tensor shape");
        }
        return reshape(t, dims);
    }
    if (t.shape() != shape.fused_extents()) {
        throw std::invalid_argument("detensorize: unexpected fused tensor shape");
    }
    const std::size_t p = shape.row_factors.size();
    std::vector<std::size_t> interleaved;
    for (std::size_t k = 0; k < p; ++k) {
        interleaved.push_back(shape.row_factors[k]);
        interleaved.push_back(shape.col_factors[k]);
    }
    DenseTensor split = reshape(t, interleaved);
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < p; ++k) order.push_back(2 * k);
    for (std::size_t k = 0; k < p; ++k) order.push_back(2 * k + 1);
    return reshape(permute(split, order), dims);
}

std::vector<std::size_t> max_tucker_ranks(const TensorizationShape& shape) {
    return shape.axis_extents();
}

std::vector<std::size_t> max_ttm_bonds(const TensorizationShape& shape) {
    const auto fused = shape.fused_extents();
    std::vector<std::size_t> bonds(fused.size() + 1, 1);
    for (std::size_t k = 1; k < fused.size(); ++k) {
        std::size_t left = 1, right = 1;
        for (std::size_t i = 0; i < k; ++i) left *= fused[i];
        for (std::size_t i = k; i < fused.size(); ++i) right *= fused[i];
        bonds[k] = std::min(left, right);
    }
    return bonds;
}

std::size_t max_cp_rank(const TensorizationShape& shape) {
    const auto extents = shape.axis_extents();
    const std::size_t total = shape_product(extents);
    std::size_t best = total;
    for (std::size_t e : extents) best = std::min(best, total / e);
    return best;
}

RankSpec max_ranks(Format format, const TensorizationShape& shape) {
    switch (format) {
        case Format::cp: return RankSpec::cp(max_cp_rank(shape));
        case Format::tucker: return RankSpec::tucker(max_tucker_ranks(shape));
        case Format::ttm: return RankSpec::ttm(max_ttm_bonds(shape));
    }
    throw std::invalid_argument("bad format");
}

FactorizedLinear decompose_ttm(const DenseTensor& w, const TensorizationShape& shape,
                               const RankSpec& ranks) {
    check_shape_matches(w, shape);
    check_ranks(Format::ttm, shape, ranks);

    FactorizedLinear f{Format::ttm, shape, ranks, {}, 1.0};
    const std::size_t p = shape.row_factors.size();
    const auto fused = shape.fused_extents();
    const auto& bonds = ranks.ranks;

    if (is_zero(w)) return make_zero_factorized(Format::ttm, shape, ranks);

    DenseTensor x = tensorize(w, shape, Format::ttm);
    // Remainder matrix, (b_k * e_{k+1}) x (product of later extents).
    RowMat c = as_matrix(x, fused[0], x.size() / fused[0]);
    std::size_t carried = 1;

    for (std::size_t k = 0; k + 1 < p; ++k) {
        RowMat u;
        Eigen::VectorXd sigma;
        RowMat v;
        thin_svd(c, u, sigma, v);
        const std::size_t avail = static_cast<std::size_t>(sigma.size());
        const std::size_t want = bonds[k + 1];
        const std::size_t keep = std::min(want, avail);

        RowMat uk = RowMat::Zero(c.rows(), static_cast<Eigen::Index>(want));
        uk.leftCols(static_cast<Eigen::Index>(keep)) = u.leftCols(static_cast<Eigen::Index>(keep));
        f.cores.push_back(from_matrix(
            uk, {carried, shape.row_factors[k], shape.col_factors[k], want}));

        RowMat rest = RowMat::Zero(static_cast<Eigen::Index>(want), c.cols());
        rest.topRows(static_cast<Eigen::Index>(keep)) =
            sigma.head(static_cast<Eigen::Index>(keep)).asDiagonal() *
            v.leftCols(static_cast<Eigen::Index>(keep)).transpose();
        carried = want;
        if (k + 2 < p) {
            c = RowMat(Eigen::Map<RowMat>(rest.data(), static_cast<Eigen::Index>(carried * fused[k + 1]),
                                          rest.cols() / static_cast<Eigen::Index>(fused[k + 1])));
        } else {
            c = rest;
        }
    }
    f.cores.push_back(from_matrix(
        c, {carried, shape.row_factors[p - 1], shape.col_factors[p - 1], std::size_t{1}}));
    return f;
}

FactorizedLinear decompose_tucker(const DenseTensor& w, const TensorizationShape& shape,
                                  const RankSpec& ranks, int hooi_sweeps,
                                  std::vector<double>* sweep_errors) {
    check_shape_matches(w, shape);
    check_ranks(Format::tucker, shape, ranks);

    const auto extents = shape.axis_extents();
    const std::size_t d = extents.size();
    FactorizedLinear f{Format::tucker, shape, ranks, {}, 1.0};

    if (is_zero(w)) return make_zero_factorized(Format::tucker, shape, ranks);

    DenseTensor x = tensorize(w, shape, Format::tucker);
    const double x_norm = frobenius_norm(x);

    const auto leading_vectors = [&](const DenseTensor& t, std::size_t axis, std::size_t r) {
        DenseTensor m = unfold(t, axis);
        RowMat u;
        Eigen::VectorXd sigma;
        RowMat v;
        thin_svd(as_matrix(m, m.extent(0), m.extent(1)), u, sigma, v);
        RowMat out = RowMat::Zero(static_cast<Eigen::Index>(t.extent(axis)),
                                  static_cast<Eigen::Index>(r));
        const auto keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(r), u.cols());
        out.leftCols(keep) = u.leftCols(keep);
        return out;
    };

    std::vector<RowMat> factors(d);
    for (std::size_t k = 0; k < d; ++k) {
        factors[k] = leading_vectors(x, k, ranks.ranks[k]).transpose();  // r_k x e_k
    }

    const auto compress = [&]() {
        DenseTensor core = x;
        for (std::size_t k = 0; k < d; ++k) core = mode_multiply(core, k, factors[k]);
        return core;
    };
    // With orthonormal factors the squared error is ||X||^2 - ||core||^2.
    const auto error_of = [&](const DenseTensor& core) {
        const double core_norm = frobenius_norm(core);
        const double sq = std::max(0.0, x_norm * x_norm - core_norm * core_norm);
        return std::sqrt(sq) / x_norm;
    };

    DenseTensor core = compress();
    if (sweep_errors) sweep_errors->push_back(error_of(core));

    for (int sweep = 0; sweep < hooi_sweeps; ++sweep) {
        for (std::size_t k = 0; k < d; ++k) {
            DenseTensor y = x;
            for (std::size_t j = 0; j < d; ++j) {
                if (j != k) y = mode_multiply(y, j, factors[j]);
            }
            factors[k] = leading_vectors(y, k, ranks.ranks[k]).transpose();
        }
        core = compress();
        if (sweep_errors) sweep_errors->push_back(error_of(core));
    }

    f.cores.push_back(core);
    for (std::size_t k = 0; k < d; ++k) {
        f.cores.push_back(from_matrix(RowMat(factors[k].transpose()),
                                      {extents[k], ranks.ranks[k]}));
    }
    return f;
}

FactorizedLinear decompose_cp(const DenseTensor& w, const TensorizationShape& shape,
                              const RankSpec& ranks, int als_iters, std::uint64_t seed,
                              std::vector<double>* sweep_errors) {
    check_shape_matches(w, shape);
    check_ranks(Format::cp, shape, ranks);
    const std::size_t r = ranks.ranks[0];
    const auto extents = shape.axis_extents();
    const std::size_t d = extents.size();

    FactorizedLinear f{Format::cp, shape, ranks, {}, 1.0};
    if (is_zero(w)) return make_zero_factorized(Format::cp, shape, ranks);

    DenseTensor x = tensorize(w, shape, Format::cp);
    const double x_norm = frobenius_norm(x);

    std::vector<DenseTensor> unfoldings;
    unfoldings.reserve(d);
    for (std::size_t k = 0; k < d; ++k) unfoldings.push_back(unfold(x, k));

    Rng rng = make_rng(derive_seed(seed, 0xcb));
    std::vector<RowMat> factors(d);
    std::vector<RowMat> grams(d);
    for (std::size_t k = 0; k < d; ++k) {
        factors[k] = RowMat(extents[k], r);
        for (Eigen::Index i = 0; i < factors[k].size(); ++i) {
            factors[k].data()[i] = normal(rng);
        }
        for (Eigen::Index col = 0; col < factors[k].cols(); ++col) {
            const double norm = factors[k].col(col).norm();
            if (norm > 0) factors[k].col(col) /= norm;
        }
        grams[k] = factors[k].transpose() * factors[k];
    }
    Eigen::VectorXd lambda = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(r));

    const auto reconstruct_error = [&]() {
        std::vector<const RowMat*> rest;
        for (std::size_t j = 1; j < d; ++j) rest.push_back(&factors[j]);
        RowMat k = khatri_rao(rest);
        RowMat recon = (factors[0] * lambda.asDiagonal()) * k.transpose();
        const auto xm = as_matrix(unfoldings[0], extents[0], x.size() / extents[0]);
        return (xm - recon).norm() / x_norm;
    };

    double prev_error = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < als_iters; ++sweep) {
        for (std::size_t k = 0; k < d; ++k) {
            RowMat v = RowMat::Ones(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
            std::vector<const RowMat*> rest;
            for (std::size_t j = 0; j < d; ++j) {
                if (j == k) continue;
                v = v.cwiseProduct(grams[j]);
                rest.push_back(&factors[j]);
            }
            const RowMat kr = khatri_rao(rest);
            const auto xm = as_matrix(unfoldings[k], extents[k], x.size() / extents[k]);
            RowMat updated = (xm * kr) * pinv_sym(v);

            for (Eigen::Index col = 0; col < updated.cols(); ++col) {
                const double norm = updated.col(col).norm();
                lambda[col] = norm;
                if (norm > 0) updated.col(col) /= norm;
            }
            factors[k] = std::move(updated);
            grams[k] = factors[k].transpose() * factors[k];
        }
        const double err = reconstruct_error();
        if (sweep_errors) sweep_errors->push_back(err);
        if (prev_error - err < 1e-7) {
            prev_error = err;
            break;
        }
        prev_error = err;
    }

    // Order components by |lambda| descending so rank slices keep the
    // heaviest ones.
    std::vector<std::size_t> order(r);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(lambda[static_cast<Eigen::Index>(a)]) >
               std::abs(lambda[static_cast<Eigen::Index>(b)]);
    });

    DenseTensor lam({r});
    for (std::size_t a = 0; a < r; ++a) lam[a] = lambda[static_cast<Eigen::Index>(order[a])];
    f.cores.push_back(lam);
    for (std::size_t k = 0; k < d; ++k) {
        RowMat sorted(extents[k], r);
        for (std::size_t a = 0; a < r; ++a) {
            sorted.col(static_cast<Eigen::Index>(a)) =
                factors[k].col(static_cast<Eigen::Index>(order[a]));
        }
        f.cores.push_back(from_matrix(sorted, {extents[k], r}));
    }
    return f;
}

DenseTensor reconstruct(const FactorizedLinear& f) {
    const auto extents = f.shape.axis_extents();
    DenseTensor result;
    switch (f.format) {
        case Format::cp: {
            const std::size_t r = f.ranks.ranks[0];
            const std::size_t d = extents.size();
            const auto lambda = as_matrix(f.cores[0], r, 1);
            std::vector<RowMat> factors(d);
            for (std::size_t k = 0; k < d; ++k) {
                factors[k] = as_matrix(f.cores[1 + k], extents[k], r);
            }
            std::vector<const RowMat*> rest;
            for (std::size_t k = 1; k < d; ++k) rest.push_back(&factors[k]);
            RowMat k = khatri_rao(rest);
            RowMat recon = (factors[0] * lambda.col(0).asDiagonal()) * k.transpose();
            result = detensorize(from_matrix(recon, extents), f.shape, Format::cp);
            break;
        }
        case Format::tucker: {
            DenseTensor t = f.cores[0];
            for (std::size_t k = 0; k < extents.size(); ++k) {
                const auto u = as_matrix(f.cores[1 + k], extents[k], f.ranks.ranks[k]);
                t = mode_multiply(t, k, RowMat(u));
            }
            result = detensorize(t, f.shape, Format::tucker);
            break;
        }
        case Format::ttm: {
            const std::size_t p = f.shape.row_factors.size();
            const auto fused = f.shape.fused_extents();
            const auto& bonds = f.ranks.ranks;
            RowMat c = as_matrix(f.cores[0], fused[0], bonds[1]);
            std::size_t covered = fused[0];
            for (std::size_t k = 1; k < p; ++k) {
                const auto g = as_matrix(f.cores[k], bonds[k], fused[k] * bonds[k + 1]);
                RowMat next = c * g;  // covered x (fused[k] * bonds[k+1])
                covered *= fused[k];
                c = RowMat(Eigen::Map<RowMat>(next.data(), static_cast<Eigen::Index>(covered),
                                              static_cast<Eigen::Index>(bonds[k + 1])));
            }
            result = detensorize(from_matrix(c, fused), f.shape, Format::ttm);
            break;
        }
    }
    if (f.scale != 1.0) {
        for (double& v : result.values()) v *= f.scale;
    }
    return result;
}

Projection project(const DenseTensor& w, Format format, const TensorizationShape& shape,
                   const RankSpec& ranks, const ProjectOptions& options) {
    Projection p;
    switch (format) {
        case Format::cp:
            p.factorized = decompose_cp(w, shape, ranks, options.als_iters, options.seed);
            break;
        case Format::tucker:
            p.factorized = decompose_tucker(w, shape, ranks, options.hooi_sweeps);
            break;
        case Format::ttm:
            p.factorized = decompose_ttm(w, shape, ranks);
            break;
    }
    if (is_zero(w)) {
        p.error = 0.0;
        return p;
    }
    DenseTensor recon = reconstruct(p.factorized);
    if (options.variance_scale) {
        const VarianceScaled scaled = variance_match_scale(w, recon);
        if (scaled.scaled) {
            p.factorized.scale *= scaled.factor;
            recon = scaled.tensor;
        }
    }
    p.error = relative_error(w, recon);
    return p;
}

}  // namespace tds
