#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxsearch/error.hpp"
#include "ctxsearch/features.hpp"
#include "ctxsearch/random.hpp"
#include "ctxsearch/scene.hpp"

namespace ctxsearch {

/// Subtracts the column means. Needs at least two rows.
inline Eigen::MatrixXd center_features(const Eigen::MatrixXd& raw) {
    if (raw.rows() < 2) throw ArgumentError("center_features: need at least 2 rows, got " + std::to_string(raw.rows()));
    return raw.rowwise() - raw.colwise().mean();
}

struct CovUpdate {
    Eigen::MatrixXd cov;
    double logdet = 0.0;
};

inline constexpr double kSingularFloor = 1e-12;

/// cov + a a^T - r r^T with its log-determinant from two applications of the
/// matrix determinant lemma. Returns nullopt when the result would be singular.
inline std::optional<CovUpdate> logdet_add_remove(const Eigen::MatrixXd& cov, double logdet,
                                                  const std::optional<Eigen::VectorXd>& add,
                                                  const std::optional<Eigen::VectorXd>& remove) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    CovUpdate out{cov, logdet};
    Eigen::VectorXd ainv_add;
    double factor_add = 1.0;
    if (add) {
        ainv_add = ldlt.solve(*add);
        factor_add = 1.0 + add->dot(ainv_add);
        if (!(factor_add > kSingularFloor)) return std::nullopt;
        out.logdet += std::log(factor_add);
        out.cov.noalias() += *add * add->transpose();
    }
    if (remove) {
        Eigen::VectorXd binv_r = ldlt.solve(*remove);
        if (add) binv_r -= ainv_add * (add->dot(binv_r) / factor_add);
        const double factor_remove = 1.0 - remove->dot(binv_r);
        if (!(factor_remove > kSingularFloor)) return std::nullopt;
        out.logdet += std::log(factor_remove);
        out.cov.noalias() -= *remove * remove->transpose();
    }
    return out;
}

/// Row-selection problem: keep every fixed row, choose the rest from the candidates
/// so that det(X_S^T X_S) is maximal.
struct SubsetProblem {
    Eigen::MatrixXd X;                    ///< n x p, mean-centered
    std::vector<std::size_t> fixed_rows;  ///< always selected (positives)
    std::size_t k = 0;                    ///< total subset size
};

struct SubsetResult {
    std::vector<std::size_t> selection;  ///< sorted row indices
    Eigen::MatrixXd cov;                 ///< X_S^T X_S + ridge I
    double logdet = 0.0;
    double ridge = 0.0;
    int exchanges = 0;
    int passes = 0;
    std::vector<double> logdet_history;  ///< after initialization and after every exchange
    std::optional<std::string> warning;
};

inline Eigen::MatrixXd selection_covariance(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (auto r : rows) cov.noalias() += X.row(static_cast<Eigen::Index>(r)).transpose() * X.row(static_cast<Eigen::Index>(r));
    return cov;
}

/// D-optimal row exchange. A pass performs up to (number of selected candidates)
/// exchanges, each the single best (selected, unselected) swap over all pairs;
/// the search stops once no swap raises the log-determinant by more than 1e-10.
inline SubsetResult select_subset(const SubsetProblem& problem, int max_passes = 20, std::uint64_t seed = 0) {
    const auto n = static_cast<std::size_t>(problem.X.rows());
    const auto p = static_cast<std::size_t>(problem.X.cols());
    const std::size_t k = problem.k;
    std::vector<bool> is_fixed(n, false);
    for (auto r : problem.fixed_rows) {
        if (r >= n) throw ArgumentError("select_subset: fixed row " + std::to_string(r) + " out of range");
        if (is_fixed[r]) throw ArgumentError("select_subset: duplicate fixed row " + std::to_string(r));
        is_fixed[r] = true;
    }
    const std::size_t n_fixed = problem.fixed_rows.size();
    if (k > n) throw ArgumentError("select_subset: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " rows");
    if (k < n_fixed + p)
        throw ArgumentError("select_subset: k = " + std::to_string(k) + " is below fixed rows + features (" +
                            std::to_string(n_fixed + p) + ")");
    if (max_passes < 0) throw ArgumentError("select_subset: max_passes must be >= 0");

    std::vector<std::size_t> candidates;
    for (std::size_t r = 0; r < n; ++r)
        if (!is_fixed[r]) candidates.push_back(r);
    Rng rng(seed);
    for (std::size_t i = candidates.size(); i > 1; --i)
        std::swap(candidates[i - 1], candidates[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
    const std::size_t n_in = k - n_fixed;
    std::vector<std::size_t> in(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_in));
    std::vector<std::size_t> out(candidates.begin() + static_cast<std::ptrdiff_t>(n_in), candidates.end());
    std::sort(in.begin(), in.end());
    std::sort(out.begin(), out.end());

    SubsetResult res;
    std::vector<std::size_t> selected = problem.fixed_rows;
    selected.insert(selected.end(), in.begin(), in.end());
    res.cov = selection_covariance(problem.X, selected);

    const Eigen::Index pi = static_cast<Eigen::Index>(p);
    Eigen::LLT<Eigen::MatrixXd> llt(res.cov);
    const double trace = res.cov.trace();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(res.cov, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (llt.info() != Eigen::Success || !(min_eig > 1e-12 * std::max(trace, 1e-300))) {
        res.ridge = trace > 0.0 ? 1e-8 * trace / static_cast<double>(p) : 1e-8;
        res.cov += res.ridge * Eigen::MatrixXd::Identity(pi, pi);
        res.warning = "covariance of the initial selection is rank deficient; added ridge " + std::to_string(res.ridge);
        llt.compute(res.cov);
    }
    const Eigen::MatrixXd L = llt.matrixL();
    res.logdet = 2.0 * L.diagonal().array().log().sum();
    res.logdet_history.push_back(res.logdet);

    auto rows_of = [&](const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), pi);
        for (std::size_t i = 0; i < idx.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = problem.X.row(static_cast<Eigen::Index>(idx[i]));
        return m;
    };

    constexpr double kTol = 1e-10;
    bool converged = in.empty() || out.empty();
    for (int pass = 0; pass < max_passes && !converged; ++pass) {
        ++res.passes;
        for (std::size_t attempt = 0; attempt < in.size(); ++attempt) {
            const Eigen::MatrixXd ainv = res.cov.ldlt().solve(Eigen::MatrixXd::Identity(pi, pi));
            const Eigen::MatrixXd Xin = rows_of(in);
            const Eigen::MatrixXd Xout = rows_of(out);
            const Eigen::MatrixXd Vin = Xin * ainv;
            const Eigen::VectorXd d_in = (Vin.array() * Xin.array()).rowwise().sum();
            const Eigen::VectorXd d_out = ((Xout * ainv).array() * Xout.array()).rowwise().sum();
            const Eigen::MatrixXd cross = Vin * Xout.transpose();

            // det ratio of swapping in-row i for out-row j (Fedorov delta)
            double best_gain = 0.0;
            std::size_t bi = 0, bj = 0;
            bool found = false;
            for (Eigen::Index i = 0; i < cross.rows(); ++i) {
                for (Eigen::Index j = 0; j < cross.cols(); ++j) {
                    const double ratio = (1.0 + d_out[j]) * (1.0 - d_in[i]) + cross(i, j) * cross(i, j);
                    if (!(ratio > 0.0)) continue;
                    const double gain = std::log(ratio);
                    if (gain > kTol && (!found || gain > best_gain)) {
                        best_gain = gain;
                        bi = static_cast<std::size_t>(i);
                        bj = static_cast<std::size_t>(j);
                        found = true;
                    }
                }
            }
            if (!found) {
                converged = true;
                break;
            }
            const Eigen::VectorXd x_add = problem.X.row(static_cast<Eigen::Index>(out[bj])).transpose();
            const Eigen::VectorXd x_remove = problem.X.row(static_cast<Eigen::Index>(in[bi])).transpose();
            auto upd = logdet_add_remove(res.cov, res.logdet, x_add, x_remove);
            if (!upd || upd->logdet <= res.logdet) {
                converged = true;
                break;
            }
            res.cov = std::move(upd->cov);
            res.logdet = upd->logdet;
            res.logdet_history.push_back(res.logdet);
            ++res.exchanges;
            std::swap(in[bi], out[bj]);
            std::sort(in.begin(), in.end());
            std::sort(out.begin(), out.end());
        }
    }

    res.selection = problem.fixed_rows;
    res.selection.insert(res.selection.end(), in.begin(), in.end());
    std::sort(res.selection.begin(), res.selection.end());
    return res;
}

/// One row per region of a corpus: the six unary features and whether the region
/// belongs to `query`.
struct UnaryDesign {
    struct Row {
        std::size_t scene_index;
        int proposal_rank;
    };
    std::vector<Row> rows;
    Eigen::MatrixXd raw;  ///< n x 6, uncentered
    std::vector<int> labels;

    std::vector<std::size_t> positive_rows() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i]) out.push_back(i);
        return out;
    }
};

inline UnaryDesign build_unary_design(const Corpus& corpus, ClassId query) {
    UnaryDesign d;
    std::size_t n = 0;
    for (const auto& s : corpus) n += s.regions.size();
    d.raw.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kUnaryDim));
    std::size_t row = 0;
    for (std::size_t si = 0; si < corpus.size(); ++si) {
        for (const auto& r : corpus[si].regions) {
            const UnaryFeatures u = unary_features(r);
            for (std::size_t f = 0; f < kUnaryDim; ++f)
                d.raw(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(f)) = u[f];
            d.rows.push_back({si, r.proposal_rank});
            d.labels.push_back(r.gt_class == query ? 1 : 0);
            ++row;
        }
    }
    return d;
}

}  // namespace ctxsearch
