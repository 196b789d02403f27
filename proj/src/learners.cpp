#include "teffect/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace teffect {

const char* learner_name(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::linear: return "linear";
        case LearnerKind::forest: return "forest";
        case LearnerKind::boosted: return "boosted";
    }
    return "?";
}

LearnerSpec LearnerSpec::linear(double lambda) {
    LearnerSpec s;
    s.kind = LearnerKind::linear;
    s.ridge_lambda = lambda;
    return s;
}

LearnerSpec LearnerSpec::forest(int trees, int depth, int min_leaf, uint64_t seed) {
    LearnerSpec s;
    s.kind = LearnerKind::forest;
    s.n_trees = trees;
    s.max_depth = depth;
    s.min_leaf = min_leaf;
    s.seed = seed;
    return s;
}

LearnerSpec LearnerSpec::boosted(int rounds, double lr, int depth) {
    LearnerSpec s;
    s.kind = LearnerKind::boosted;
    s.n_rounds = rounds;
    s.learning_rate = lr;
    s.boosted_depth = depth;
    return s;
}

LearnerSpec LearnerSpec::from_hyperparameters(LearnerKind kind, const Hyperparameters& hp,
                                              uint64_t seed) {
    LearnerSpec s;
    s.kind = kind;
    s.ridge_lambda = hp.ridge_lambda;
    s.n_trees = hp.forest_trees;
    s.max_depth = hp.forest_max_depth;
    s.min_leaf = hp.forest_min_leaf;
    s.feature_subsample = hp.forest_feature_subsample;
    s.n_rounds = hp.boosted_rounds;
    s.learning_rate = hp.boosted_learning_rate;
    s.boosted_depth = hp.boosted_max_depth;
    s.seed = seed;
    return s;
}

// ---------------------------------------------------------------------------
// Linear (ridge) model
// ---------------------------------------------------------------------------

namespace {

class LinearModel : public FittedModel {
  public:
    Eigen::VectorXd beta;
    double intercept = 0.0;
    int rank = 0;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        if (X.cols() != beta.size()) {
            throw EstimationError("FeatureCountMismatch",
                                  "predict called with " + std::to_string(X.cols()) +
                                      " features, model has " + std::to_string(beta.size()));
        }
        return (X * beta).array() + intercept;
    }
};

}  // namespace

FittedPtr fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge_lambda) {
    if (X.rows() != y.size()) {
        throw EstimationError("ShapeMismatch", "X rows != y length");
    }
    if (X.rows() == 0) throw EstimationError("EmptyTrainingSet", "no rows to fit");
    if (ridge_lambda < 0.0) throw EstimationError("InvalidHyperparameter", "ridge_lambda < 0");

    auto model = std::make_shared<LinearModel>();
    const Eigen::Index p = X.cols();
    Eigen::RowVectorXd x_mean = X.colwise().mean();
    double y_mean = y.mean();
    Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    Eigen::VectorXd yc = y.array() - y_mean;

    if (ridge_lambda > 0.0) {
        Eigen::MatrixXd gram = Xc.transpose() * Xc;
        gram.diagonal().array() += ridge_lambda;
        model->beta = gram.ldlt().solve(Xc.transpose() * yc);
        model->rank = static_cast<int>(p);
    } else {
        // Minimum-norm least squares via SVD; warn when rank deficient.
        Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-12);
        model->beta = svd.solve(yc);
        model->rank = static_cast<int>(svd.rank());
        if (model->rank < p) {
            log_warn("rank-deficient design (rank " + std::to_string(model->rank) + " of " +
                     std::to_string(p) + "); returning minimum-norm solution");
        }
    }
    model->intercept = y_mean - x_mean * model->beta;
    return model;
}

LinearCoefficients linear_coefficients(const FittedPtr& model) {
    auto lm = std::dynamic_pointer_cast<const LinearModel>(model);
    if (!lm) throw EstimationError("NotALinearModel", "model is not linear");
    return {lm->beta, lm->intercept, lm->rank};
}

// ---------------------------------------------------------------------------
// CART regression trees
// ---------------------------------------------------------------------------

namespace {

struct TreeNode {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
        int n = 0;
        while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
            const TreeNode& node = nodes[static_cast<std::size_t>(n)];
            n = X(row, node.feature) <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(n)].value;
    }
};

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Best variance-reducing split over the candidate features, exact search by
// sorting the node's rows per feature. Splits only between distinct values.
SplitResult best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<int>& rows, const std::vector<int>& features,
                       int min_leaf, std::vector<std::pair<double, double>>& scratch) {
    SplitResult best;
    const int n = static_cast<int>(rows.size());
    double total_sum = 0.0, total_sq = 0.0;
    for (int r : rows) {
        total_sum += y(r);
        total_sq += y(r) * y(r);
    }
    const double parent_sse = total_sq - total_sum * total_sum / n;

    for (int f : features) {
        scratch.clear();
        for (int r : rows) scratch.emplace_back(X(r, f), y(r));
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double left_sum = 0.0, left_sq = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            left_sum += scratch[static_cast<std::size_t>(i)].second;
            left_sq += scratch[static_cast<std::size_t>(i)].second *
                       scratch[static_cast<std::size_t>(i)].second;
            if (i + 1 < min_leaf || n - i - 1 < min_leaf) continue;
            double xv = scratch[static_cast<std::size_t>(i)].first;
            double xn = scratch[static_cast<std::size_t>(i) + 1].first;
            if (xv == xn) continue;
            int nl = i + 1, nr = n - nl;
            double right_sum = total_sum - left_sum;
            double right_sq = total_sq - left_sq;
            double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
            double gain = parent_sse - sse;
            if (gain > best.gain + 1e-12) {
                best.gain = gain;
                best.feature = f;
                best.threshold = 0.5 * (xv + xn);
            }
        }
    }
    return best;
}

Tree build_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<int> rows,
                int max_depth, int min_leaf, int mtry, Rng* rng) {
    Tree tree;
    const int p = static_cast<int>(X.cols());
    std::vector<int> all_features(static_cast<std::size_t>(p));
    std::iota(all_features.begin(), all_features.end(), 0);
    std::vector<std::pair<double, double>> scratch;

    struct Pending {
        int node;
        std::vector<int> rows;
        int depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(rows), 0});

    while (!stack.empty()) {
        Pending item = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];

        double sum = 0.0;
        for (int r : item.rows) sum += y(r);
        node.value = sum / static_cast<double>(item.rows.size());

        if (item.depth >= max_depth || static_cast<int>(item.rows.size()) < 2 * min_leaf) continue;

        std::vector<int> candidates;
        if (mtry >= p || rng == nullptr) {
            candidates = all_features;
        } else {
            // partial Fisher-Yates draw of mtry distinct features
            std::vector<int> pool = all_features;
            for (int i = 0; i < mtry; ++i) {
                std::size_t j = i + static_cast<std::size_t>(rng->uniform_int(
                                        static_cast<uint64_t>(p - i)));
                std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
            }
            candidates.assign(pool.begin(), pool.begin() + mtry);
            std::sort(candidates.begin(), candidates.end());
        }

        SplitResult split = best_split(X, y, item.rows, candidates, min_leaf, scratch);
        if (split.feature < 0) continue;

        std::vector<int> left_rows, right_rows;
        for (int r : item.rows) {
            if (X(r, split.feature) <= split.threshold) left_rows.push_back(r);
            else right_rows.push_back(r);
        }
        int left_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        int right_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(item.node)];
        parent.feature = split.feature;
        parent.threshold = split.threshold;
        parent.left = left_id;
        parent.right = right_id;
        stack.push_back({left_id, std::move(left_rows), item.depth + 1});
        stack.push_back({right_id, std::move(right_rows), item.depth + 1});
    }
    return tree;
}

class ForestModel : public FittedModel {
  public:
    std::vector<Tree> trees;
    bool clip01 = false;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
        for (const auto& tree : trees) {
            for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += tree.predict_row(X, i);
        }
        out /= static_cast<double>(trees.size());
        if (clip01) out = out.cwiseMax(0.0).cwiseMin(1.0);
        return out;
    }
};

class BoostedModel : public FittedModel {
  public:
    double base = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;
    bool clip01 = false;

    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
        Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), base);
        for (const auto& tree : trees) {
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                out(i) += learning_rate * tree.predict_row(X, i);
        }
        if (clip01) out = out.cwiseMax(0.0).cwiseMin(1.0);
        return out;
    }
};

bool is_binary_target(const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y(i) != 0.0 && y(i) != 1.0) return false;
    }
    return true;
}

}  // namespace

FittedPtr fit_tree_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const LearnerSpec& spec) {
    if (X.rows() != y.size()) throw EstimationError("ShapeMismatch", "X rows != y length");
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n < 2 * spec.min_leaf && spec.kind == LearnerKind::forest) {
        throw EstimationError("TooFewRows", "need at least " + std::to_string(2 * spec.min_leaf) +
                                                " rows, got " + std::to_string(n));
    }
    if (n < 2) throw EstimationError("TooFewRows", "need at least 2 rows");

    const bool clip = is_binary_target(y);

    if (spec.kind == LearnerKind::forest) {
        auto model = std::make_shared<ForestModel>();
        model->clip01 = clip;
        model->trees.resize(static_cast<std::size_t>(spec.n_trees));
        int mtry = spec.feature_subsample > 0.0
                       ? std::max(1, static_cast<int>(std::lround(spec.feature_subsample * p)))
                       : std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(p)))));
        parallel_for(static_cast<std::size_t>(spec.n_trees), [&](std::size_t b) {
            Rng rng(derive_seed(spec.seed, b));
            std::vector<int> sample(static_cast<std::size_t>(n));
            for (auto& s : sample) s = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
            model->trees[b] =
                build_tree(X, y, std::move(sample), spec.max_depth, spec.min_leaf, mtry, &rng);
        });
        return model;
    }

    // Boosted: stagewise fit to residuals with shrinkage; deterministic
    // (full sample, all features at every split).
    auto model = std::make_shared<BoostedModel>();
    model->clip01 = clip;
    model->base = y.mean();
    model->learning_rate = spec.learning_rate;
    Eigen::VectorXd residual = y.array() - model->base;
    std::vector<int> all_rows(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const int min_leaf = std::min(spec.min_leaf, std::max(1, n / 4));
    for (int round = 0; round < spec.n_rounds; ++round) {
        Tree tree = build_tree(X, residual, all_rows, spec.boosted_depth, min_leaf, p, nullptr);
        for (int i = 0; i < n; ++i)
            residual(i) -= spec.learning_rate * tree.predict_row(X, i);
        model->trees.push_back(std::move(tree));
    }
    return model;
}

FittedPtr fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (spec.kind == LearnerKind::linear) return fit_linear(X, y, spec.ridge_lambda);
    return fit_tree_ensemble(X, y, spec);
}

// ---------------------------------------------------------------------------
// Cross-fitting
// ---------------------------------------------------------------------------

std::vector<int> crossfit_fold_map(std::size_t n_rows, int k_folds, uint64_t seed) {
    if (k_folds < 2) throw EstimationError("InvalidFoldCount", "k_folds must be >= 2");
    if (static_cast<std::size_t>(k_folds) > n_rows) {
        throw EstimationError("FoldTooSmall", "k_folds exceeds row count");
    }
    std::vector<std::size_t> order(n_rows);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x0f01d));
    rng.shuffle(order);
    std::vector<int> fold(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) fold[order[i]] = static_cast<int>(i % k_folds);
    // Balanced assignment: the smallest fold has floor(n/k) rows.
    if (n_rows / static_cast<std::size_t>(k_folds) < 2) {
        throw EstimationError("FoldTooSmall", "a fold would have fewer than 2 rows");
    }
    return fold;
}

Eigen::VectorXd crossfit_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LearnerSpec& spec, int k_folds, uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(X.rows());
    std::vector<int> fold = crossfit_fold_map(n, k_folds, seed);

    Eigen::VectorXd out(X.rows());
    std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(k_folds));
    for (std::size_t i = 0; i < n; ++i)
        fold_rows[static_cast<std::size_t>(fold[i])].push_back(static_cast<int>(i));

    parallel_for(static_cast<std::size_t>(k_folds), [&](std::size_t f) {
        const auto& test_rows = fold_rows[f];
        std::vector<int> train_rows;
        train_rows.reserve(n - test_rows.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (fold[i] != static_cast<int>(f)) train_rows.push_back(static_cast<int>(i));
        }
        Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train_rows.size()), X.cols());
        Eigen::VectorXd ytr(static_cast<Eigen::Index>(train_rows.size()));
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
            ytr(static_cast<Eigen::Index>(i)) = y(train_rows[i]);
        }
        LearnerSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, 0xc0ffee + f);
        FittedPtr model = fit_learner(fold_spec, Xtr, ytr);

        Eigen::MatrixXd Xte(static_cast<Eigen::Index>(test_rows.size()), X.cols());
        for (std::size_t i = 0; i < test_rows.size(); ++i)
            Xte.row(static_cast<Eigen::Index>(i)) = X.row(test_rows[i]);
        Eigen::VectorXd pred = model->predict(Xte);
        for (std::size_t i = 0; i < test_rows.size(); ++i) out(test_rows[i]) = pred(static_cast<Eigen::Index>(i));
    });
    return out;
}

}  // namespace teffect
