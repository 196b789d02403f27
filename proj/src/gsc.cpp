#include "teffect/gsc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "teffect/ingest.hpp"

namespace teffect {

// ---------------------------------------------------------------------------
// Panel slicing
// ---------------------------------------------------------------------------

PanelMatrix panel_matrix(const PanelDataset& panel, const std::vector<std::string>& unit_ids) {
    const Eigen::Index T = static_cast<Eigen::Index>(panel.n_periods());
    const Eigen::Index N = static_cast<Eigen::Index>(unit_ids.size());
    PanelMatrix out;
    out.unit_ids = unit_ids;
    out.outcome.setConstant(T, N, missing_value());
    out.covariates.assign(panel.n_cov(), Eigen::MatrixXd::Constant(T, N, missing_value()));

    for (Eigen::Index j = 0; j < N; ++j) {
        auto it = std::lower_bound(panel.units.begin(), panel.units.end(), unit_ids[static_cast<std::size_t>(j)]);
        if (it == panel.units.end() || *it != unit_ids[static_cast<std::size_t>(j)]) {
            throw EstimationError("UnknownUnit", "unit '" + unit_ids[static_cast<std::size_t>(j)] +
                                                     "' not present in the panel");
        }
        int32_t u = static_cast<int32_t>(it - panel.units.begin());
        for (Eigen::Index t = 0; t < T; ++t) {
            int64_t r = panel.row_of(u, static_cast<int32_t>(t));
            if (r < 0) continue;
            out.outcome(t, j) = panel.outcome[static_cast<std::size_t>(r)];
            for (std::size_t c = 0; c < panel.n_cov(); ++c) {
                out.covariates[c](t, j) = panel.cov_at(static_cast<std::size_t>(r), c);
            }
        }
    }
    if (out.outcome.hasNaN()) {
        throw EstimationError("UnbalancedPanel",
                              "factor model needs a balanced panel; run imputation first");
    }
    for (const auto& slab : out.covariates) {
        if (slab.hasNaN()) {
            throw EstimationError("UnbalancedPanel",
                                  "covariate slab has missing cells; run imputation first");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Alternating least squares
// ---------------------------------------------------------------------------

namespace {

// Double-centering (within transform) for a balanced T x N matrix.
Eigen::MatrixXd within(const Eigen::MatrixXd& m) {
    Eigen::VectorXd row_mean = m.rowwise().mean();   // per period
    Eigen::RowVectorXd col_mean = m.colwise().mean();  // per unit
    double grand = m.mean();
    return ((m.colwise() - row_mean).rowwise() - col_mean).array() + grand;
}

struct TwoWayFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha;  // per unit, mean zero
    Eigen::VectorXd xi;     // per period, carries the level
};

// Least squares of R on covariates plus additive unit/time effects.
TwoWayFit fit_two_way(const Eigen::MatrixXd& R, const std::vector<Eigen::MatrixXd>& X,
                      const std::vector<Eigen::MatrixXd>& X_within) {
    const std::size_t p = X.size();
    TwoWayFit fit;
    fit.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::MatrixXd W = R;
    if (p > 0) {
        Eigen::MatrixXd Rw = within(R);
        Eigen::MatrixXd gram(p, p);
        Eigen::VectorXd rhs(p);
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = a; b < p; ++b) {
                gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                    (X_within[a].array() * X_within[b].array()).sum();
                gram(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) =
                    gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            }
            rhs(static_cast<Eigen::Index>(a)) = (X_within[a].array() * Rw.array()).sum();
        }
        fit.beta = gram.ldlt().solve(rhs);
        for (std::size_t a = 0; a < p; ++a) W -= fit.beta(static_cast<Eigen::Index>(a)) * X[a];
    }
    double grand = W.mean();
    fit.xi = W.rowwise().mean();                        // time level (includes grand mean)
    fit.alpha = (W.colwise().mean().array() - grand);   // unit effects, mean zero
    return fit;
}

// Top-r factors of E via eigendecomposition of the smaller Gram matrix.
// Factor columns are orthonormal; loadings = E' F.
void extract_factors(const Eigen::MatrixXd& E, int r, Eigen::MatrixXd& F, Eigen::MatrixXd& L) {
    const Eigen::Index T = E.rows();
    const Eigen::Index N = E.cols();
    if (r == 0) {
        F.resize(T, 0);
        L.resize(N, 0);
        return;
    }
    if (T <= N) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E * E.transpose());
        // eigenvalues ascending: take the last r columns, largest first
        F.resize(T, r);
        for (int k = 0; k < r; ++k) F.col(k) = eig.eigenvectors().col(T - 1 - k);
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(E.transpose() * E);
        Eigen::MatrixXd V(N, r);
        for (int k = 0; k < r; ++k) V.col(k) = eig.eigenvectors().col(N - 1 - k);
        F = E * V;
        for (int k = 0; k < r; ++k) {
            double norm = F.col(k).norm();
            if (norm > 1e-300) F.col(k) /= norm;
        }
    }
    L = E.transpose() * F;
}

}  // namespace

FactorModel fit_ife(const PanelMatrix& controls, int rank, double tol, int max_iter) {
    const Eigen::Index T = controls.outcome.rows();
    const Eigen::Index N = controls.outcome.cols();
    if (rank < 0) throw EstimationError("RankTooLarge", "rank must be >= 0");
    if (rank > static_cast<int>(std::min(T, N)) - 1) {
        throw EstimationError("RankTooLarge", "rank " + std::to_string(rank) +
                                                  " too large for a " + std::to_string(T) + "x" +
                                                  std::to_string(N) + " panel");
    }

    std::vector<Eigen::MatrixXd> X_within;
    X_within.reserve(controls.covariates.size());
    for (const auto& slab : controls.covariates) X_within.push_back(within(slab));

    FactorModel model;
    model.rank = rank;
    Eigen::MatrixXd F(T, 0), L(N, 0);
    double prev_obj = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iter; ++iter) {
        // (a) additive structure given factors
        Eigen::MatrixXd R = controls.outcome;
        if (rank > 0 && F.cols() > 0) R -= F * L.transpose();
        TwoWayFit tw = fit_two_way(R, controls.covariates, X_within);

        // (b) factors of the residual
        Eigen::MatrixXd E = controls.outcome;
        for (std::size_t a = 0; a < controls.covariates.size(); ++a) {
            E -= tw.beta(static_cast<Eigen::Index>(a)) * controls.covariates[a];
        }
        E.colwise() -= tw.xi;
        E.rowwise() -= tw.alpha.transpose();
        extract_factors(E, rank, F, L);

        double obj = rank > 0 ? (E - F * L.transpose()).squaredNorm() : E.squaredNorm();
        model.objective_trace.push_back(obj);
        model.beta = tw.beta;
        model.alpha = tw.alpha;
        model.xi = tw.xi;
        model.iterations = iter + 1;

        if (std::isfinite(prev_obj)) {
            double rel = (prev_obj - obj) / std::max(1.0, prev_obj);
            if (rel < tol) {
                model.converged = true;
                break;
            }
        }
        prev_obj = obj;
        if (iter == max_iter - 1) {
            model.converged = false;
            log_warn("factor model did not converge in " + std::to_string(max_iter) +
                     " iterations; returning best iterate");
        }
    }
    model.factors = F;
    model.loadings = L;
    return model;
}

// ---------------------------------------------------------------------------
// Rank selection: leave-one-period-out over the pre-treatment window
// ---------------------------------------------------------------------------

namespace {

// Residual u = Y - X beta - xi for one unit column.
Eigen::VectorXd unit_residual(const PanelMatrix& data, const FactorModel& model, Eigen::Index col) {
    Eigen::VectorXd u = data.outcome.col(col);
    for (std::size_t a = 0; a < data.covariates.size(); ++a) {
        u -= model.beta(static_cast<Eigen::Index>(a)) * data.covariates[a].col(col);
    }
    u -= model.xi;
    return u;
}

}  // namespace

int select_rank(const PanelMatrix& controls, int r_max, int pre_periods) {
    if (pre_periods < 7) {
        throw ValidationError("InsufficientPreTreatment",
                              "factor-model rank selection needs at least 7 pre-treatment periods, got " +
                                  std::to_string(pre_periods));
    }
    const Eigen::Index T = controls.outcome.rows();
    const Eigen::Index N = controls.outcome.cols();
    int cap = static_cast<int>(std::min(T, N)) - 1;
    cap = std::min(cap, pre_periods - 2);  // keep the loo regression overdetermined
    r_max = std::max(0, std::min(r_max, cap));

    std::vector<double> mspe(static_cast<std::size_t>(r_max) + 1, 0.0);
    for (int r = 0; r <= r_max; ++r) {
        FactorModel model = fit_ife(controls, r);
        const int q = r + 1;  // intercept + r factor loadings
        // Design over the pre-treatment periods: [1, f_t'].
        Eigen::MatrixXd D(pre_periods, q);
        D.col(0).setOnes();
        for (int k = 0; k < r; ++k) D.col(k + 1) = model.factors.col(k).head(pre_periods);
        Eigen::MatrixXd G = D.transpose() * D;

        double total = 0.0;
        int64_t count = 0;
        for (Eigen::Index j = 0; j < N; ++j) {
            Eigen::VectorXd u = unit_residual(controls, model, j).head(pre_periods);
            Eigen::VectorXd Du = D.transpose() * u;
            for (int s = 0; s < pre_periods; ++s) {
                // Rank-one downdate of the held-out period.
                Eigen::VectorXd d = D.row(s).transpose();
                Eigen::MatrixXd G_loo = G - d * d.transpose();
                Eigen::VectorXd b_loo = Du - d * u(s);
                Eigen::VectorXd coef = G_loo.completeOrthogonalDecomposition().solve(b_loo);
                double pred = d.dot(coef);
                double err = u(s) - pred;
                total += err * err;
                ++count;
            }
        }
        mspe[static_cast<std::size_t>(r)] = total / static_cast<double>(count);
        log_debug("rank " + std::to_string(r) + " loo mspe " + std::to_string(mspe[static_cast<std::size_t>(r)]));
    }
    double best = *std::min_element(mspe.begin(), mspe.end());
    for (int r = 0; r <= r_max; ++r) {
        if (mspe[static_cast<std::size_t>(r)] <= best * (1.0 + 1e-9) + 1e-12) return r;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// estimate_gsc
// ---------------------------------------------------------------------------

namespace {

struct TreatedInfo {
    std::string id;
    int treat_ix = 0;  // first treated grid index
};

// ATT for a fixed factor model: project each treated unit's pre-treatment
// residuals on [1, f_t], predict counterfactuals, average effects over the
// post window (relative alignment).
struct ProjectionResult {
    double att = 0.0;
    std::vector<double> att_t;                // per relative post period
    Eigen::MatrixXd predicted;                // T x n_treated counterfactuals
};

ProjectionResult project_treated(const PanelMatrix& treated, const std::vector<TreatedInfo>& info,
                                 const FactorModel& model, int pre_window, int post_window) {
    const Eigen::Index T = treated.outcome.rows();
    const Eigen::Index n = treated.outcome.cols();
    const int r = model.rank;
    ProjectionResult out;
    out.predicted.resize(T, n);
    out.att_t.assign(static_cast<std::size_t>(post_window), 0.0);

    for (Eigen::Index j = 0; j < n; ++j) {
        const int t0 = info[static_cast<std::size_t>(j)].treat_ix;
        Eigen::VectorXd u = unit_residual(treated, model, j);
        // Least squares of pre-treatment residuals on [1, f_t]; the intercept
        // plays the role of the treated unit's alpha.
        Eigen::MatrixXd D(pre_window, r + 1);
        D.col(0).setOnes();
        for (int k = 0; k < r; ++k) {
            D.col(k + 1) = model.factors.col(k).segment(t0 - pre_window, pre_window);
        }
        Eigen::VectorXd target = u.segment(t0 - pre_window, pre_window);
        Eigen::VectorXd coef = D.completeOrthogonalDecomposition().solve(target);

        Eigen::VectorXd fitted = Eigen::VectorXd::Constant(T, coef(0));
        for (int k = 0; k < r; ++k) fitted += coef(k + 1) * model.factors.col(k);
        // Back to outcome units: add xi and covariate terms.
        Eigen::VectorXd y0 = fitted + model.xi;
        for (std::size_t a = 0; a < treated.covariates.size(); ++a) {
            y0 += model.beta(static_cast<Eigen::Index>(a)) * treated.covariates[a].col(j);
        }
        out.predicted.col(j) = y0;
        for (int rel = 0; rel < post_window; ++rel) {
            out.att_t[static_cast<std::size_t>(rel)] +=
                treated.outcome(t0 + rel, j) - y0(t0 + rel);
        }
    }
    for (auto& v : out.att_t) v /= static_cast<double>(n);
    out.att = mean_of(out.att_t);
    return out;
}

}  // namespace

GscResult estimate_gsc(const PanelDataset& panel, const TreatmentTable& treatment,
                       const GscOptions& options) {
    if (panel.n_rows() > 500000) {
        throw EstimationError("TooManyEvents",
                              "panel has " + std::to_string(panel.n_rows()) +
                                  " rows; the factor model is limited to 500000 (use a DML variant)");
    }
    if (options.pre_window < 1 || options.post_window < 1) {
        throw ValidationError("InvalidConfigValue", "pre_window and post_window must be >= 1");
    }

    // Split units: treated (with on-grid dates and full windows) vs never treated.
    std::vector<TreatedInfo> treated_info;
    std::vector<std::string> control_ids;
    for (const auto& unit : panel.units) {
        auto date = treatment.date_of(unit);
        if (!date.has_value()) {
            control_ids.push_back(unit);
            continue;
        }
        int ix = treatment_grid_index(panel, *date);
        if (ix < 0) {
            log_warn("treated unit '" + unit + "' treated past the grid; excluded from the estimate");
            continue;
        }
        if (ix - options.pre_window < 0) {
            throw ValidationError("InsufficientPreTreatment",
                                  "unit '" + unit + "' has fewer than pre_window=" +
                                      std::to_string(options.pre_window) + " pre-treatment periods");
        }
        if (ix + options.post_window > static_cast<int>(panel.n_periods())) {
            throw ValidationError("WindowOutOfRange",
                                  "unit '" + unit + "' lacks post_window=" +
                                      std::to_string(options.post_window) + " post-treatment periods");
        }
        treated_info.push_back({unit, ix});
    }
    if (treated_info.empty()) throw ValidationError("NoTreatedUnits", "no usable treated units");

    PanelMatrix controls = panel_matrix(panel, control_ids);
    PanelMatrix treated;
    {
        std::vector<std::string> ids;
        for (const auto& t : treated_info) ids.push_back(t.id);
        treated = panel_matrix(panel, ids);
    }

    int earliest = treated_info.front().treat_ix;
    for (const auto& t : treated_info) earliest = std::min(earliest, t.treat_ix);

    int rank = options.rank;
    if (rank < 0) rank = select_rank(controls, options.rank_max, earliest);
    if (static_cast<int>(control_ids.size()) < rank + 1) {
        throw EstimationError("TooFewControls", "need more than rank+1 control units");
    }

    FactorModel model = fit_ife(controls, rank, options.tol, options.max_iter);
    ProjectionResult point =
        project_treated(treated, treated_info, model, options.pre_window, options.post_window);

    // Nonparametric bootstrap over control units.
    const int B = options.bootstrap_replicates;
    std::vector<double> replicate_att(static_cast<std::size_t>(B));
    const Eigen::Index Nc = controls.outcome.cols();
    parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        Rng rng(derive_seed(options.seed, 0xb007 + b));
        PanelMatrix resampled;
        resampled.outcome.resize(controls.outcome.rows(), Nc);
        resampled.covariates.assign(controls.covariates.size(),
                                    Eigen::MatrixXd(controls.outcome.rows(), Nc));
        for (Eigen::Index j = 0; j < Nc; ++j) {
            Eigen::Index pick = static_cast<Eigen::Index>(rng.uniform_int(static_cast<uint64_t>(Nc)));
            resampled.outcome.col(j) = controls.outcome.col(pick);
            for (std::size_t a = 0; a < controls.covariates.size(); ++a) {
                resampled.covariates[a].col(j) = controls.covariates[a].col(pick);
            }
        }
        FactorModel replicate = fit_ife(resampled, rank, options.tol, options.max_iter);
        replicate_att[b] =
            project_treated(treated, treated_info, replicate, options.pre_window, options.post_window)
                .att;
    });

    double se = stddev_samp(replicate_att);
    std::vector<double> sorted = replicate_att;
    std::sort(sorted.begin(), sorted.end());
    auto percentile = [&](double q) {
        if (sorted.empty()) return point.att;
        double pos = q * static_cast<double>(sorted.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        double w = pos - static_cast<double>(lo);
        return (1.0 - w) * sorted[lo] + w * sorted[hi];
    };

    GscResult result;
    result.estimate = make_estimate("gsc", point.att, se, static_cast<int>(treated_info.size()),
                                    static_cast<int>(control_ids.size()));
    result.model = std::move(model);
    result.rank = rank;
    result.percentile_lo = percentile(0.025);
    result.percentile_hi = percentile(0.975);

    // Treated-mean series for reporting.
    CounterfactualSeries& series = result.series;
    series.dates = panel.grid;
    series.treatment_marker = earliest;
    series.att_t = point.att_t;
    series.att = point.att;
    const Eigen::Index T = controls.outcome.rows();
    series.actual.resize(static_cast<std::size_t>(T));
    series.predicted_y0.resize(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
        series.actual[static_cast<std::size_t>(t)] = treated.outcome.row(t).mean();
        series.predicted_y0[static_cast<std::size_t>(t)] = point.predicted.row(t).mean();
    }
    return result;
}

}  // namespace teffect
