#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "teffect/common.hpp"
#include "teffect/types.hpp"

namespace teffect {

enum class LearnerKind { linear, forest, boosted };

const char* learner_name(LearnerKind kind);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::linear;
    // linear
    double ridge_lambda = 1e-6;
    // forest
    int n_trees = 200;
    int max_depth = 8;
    int min_leaf = 5;
    double feature_subsample = 0.0;  // fraction of features per split; 0 = sqrt(p)
    // boosted
    int n_rounds = 200;
    double learning_rate = 0.1;
    int boosted_depth = 3;

    uint64_t seed = 0;

    static LearnerSpec linear(double lambda = 1e-6);
    static LearnerSpec forest(int trees = 200, int depth = 8, int min_leaf = 5, uint64_t seed = 0);
    static LearnerSpec boosted(int rounds = 200, double lr = 0.1, int depth = 3);
    static LearnerSpec from_hyperparameters(LearnerKind kind, const Hyperparameters& hp,
                                            uint64_t seed);
};

class FittedModel {
  public:
    virtual ~FittedModel() = default;
    virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
};

using FittedPtr = std::shared_ptr<const FittedModel>;

// Ridge regression with unpenalized intercept. lambda == 0 falls back to the
// minimum-norm least-squares solution (with a warning when rank deficient).
FittedPtr fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double ridge_lambda);

// Access to fitted linear coefficients (tests and diagnostics).
struct LinearCoefficients {
    Eigen::VectorXd beta;
    double intercept = 0.0;
    int rank = 0;
};
LinearCoefficients linear_coefficients(const FittedPtr& model);

// Bagged CART regression trees (forest) or stagewise boosted trees, chosen by
// spec.kind. Binary {0,1} targets get predictions clipped to [0,1].
FittedPtr fit_tree_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const LearnerSpec& spec);

FittedPtr fit_learner(const LearnerSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Out-of-fold predictions: row i is predicted by a model that never saw row i.
// Fold assignment depends only on (n_rows, k_folds, seed).
Eigen::VectorXd crossfit_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const LearnerSpec& spec, int k_folds, uint64_t seed);

std::vector<int> crossfit_fold_map(std::size_t n_rows, int k_folds, uint64_t seed);

}  // namespace teffect
