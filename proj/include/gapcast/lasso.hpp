#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"

namespace gapcast {

/// L1-regularized linear regression fitted by cyclic coordinate descent on
///   J(theta) = 1/2 * sum_i (x_i . theta + b - y_i)^2 + lambda * ||theta||_1
/// with an unpenalized intercept. The squared-loss term is an unnormalized
/// sum, so lambda values are interpreted against that exact objective.
struct LassoModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double lambda = 0.0;
    std::size_t n_iter = 0;
    bool converged = false;
    std::vector<std::string> feature_names;  // optional, used by active_set and serialization
};

struct LassoOptions {
    double lambda = 0.0;
    double tol = 1e-6;          // on the largest coordinate change per sweep
    std::size_t max_iter = 10000;
};

inline double soft_threshold(double a, double threshold) {
    if (a > threshold) return a - threshold;
    if (a < -threshold) return a + threshold;
    return 0.0;
}

inline double lasso_objective(const Matrix& x, const std::vector<double>& y,
                              const std::vector<double>& weights, double intercept, double lambda) {
    double loss = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double residual = dot(x.row(r), weights) + intercept - y[r];
        loss += residual * residual;
    }
    double l1 = 0.0;
    for (double w : weights) l1 += std::abs(w);
    return 0.5 * loss + lambda * l1;
}

namespace lasso {

inline LassoModel fit(const Matrix& x, const std::vector<double>& y, const LassoOptions& opts) {
    if (x.rows == 0 || x.cols == 0 || y.empty()) fail("EmptyInput", "lasso fit on empty data");
    if (x.rows != y.size()) fail("DimensionMismatch", "row count differs from target length");
    if (opts.lambda < 0.0) fail("BadConfig", "lambda must be nonnegative");

    const std::size_t n = x.rows, d = x.cols;
    LassoModel model;
    model.lambda = opts.lambda;
    model.weights.assign(d, 0.0);
    model.intercept = mean_of(y);

    std::vector<double> residual(n);  // r_i = y_i - prediction_i
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.intercept;

    std::vector<double> col_sq(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) col_sq[j] += x(i, j) * x(i, j);

    double prev_objective = lasso_objective(x, y, model.weights, model.intercept, opts.lambda);

    for (std::size_t sweep = 0; sweep < opts.max_iter; ++sweep) {
        double max_change = 0.0;

        for (std::size_t j = 0; j < d; ++j) {
            if (col_sq[j] == 0.0) continue;  // constant column scaled to zero
            const double old_w = model.weights[j];
            double rho = 0.0;
            for (std::size_t i = 0; i < n; ++i) rho += x(i, j) * residual[i];
            rho += col_sq[j] * old_w;  // correlation with the partial residual
            const double new_w = soft_threshold(rho, opts.lambda) / col_sq[j];
            if (new_w != old_w) {
                const double delta = new_w - old_w;
                for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * x(i, j);
                model.weights[j] = new_w;
                max_change = std::max(max_change, std::abs(delta));
            }
        }

        // closed-form intercept update
        const double shift = mean_of(residual);
        if (shift != 0.0) {
            model.intercept += shift;
            for (double& r : residual) r -= shift;
            max_change = std::max(max_change, std::abs(shift));
        }

        model.n_iter = sweep + 1;

        const double objective = lasso_objective(x, y, model.weights, model.intercept, opts.lambda);
        if (objective > prev_objective + 1e-10 * (1.0 + std::abs(prev_objective)))
            fail("Diverged", "objective increased from " + format_double(prev_objective) + " to " +
                                 format_double(objective) + " at sweep " + std::to_string(sweep));
        prev_objective = objective;

        if (max_change < opts.tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

inline std::vector<double> predict(const LassoModel& model, const Matrix& x) {
    if (x.cols != model.weights.size())
        fail("DimensionMismatch", "model has " + std::to_string(model.weights.size()) +
                                      " weights, matrix has " + std::to_string(x.cols) + " columns");
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out[r] = dot(x.row(r), model.weights) + model.intercept;
    return out;
}

/// Exactly-nonzero weights sorted by |theta_j| descending.
inline std::vector<std::pair<std::string, double>> active_set(const LassoModel& model) {
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        if (model.weights[j] == 0.0) continue;
        const std::string name =
            j < model.feature_names.size() ? model.feature_names[j] : "x" + std::to_string(j);
        out.emplace_back(name, model.weights[j]);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
    return out;
}

inline nlohmann::json to_json(const LassoModel& model) {
    nlohmann::json j;
    j["lambda"] = model.lambda;
    j["intercept"] = model.intercept;
    j["n_iter"] = model.n_iter;
    j["weights"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const std::string name =
            i < model.feature_names.size() ? model.feature_names[i] : "x" + std::to_string(i);
        j["weights"].push_back({{"name", name}, {"value", model.weights[i]}});
    }
    return j;
}

inline LassoModel from_json(const nlohmann::json& j) {
    LassoModel model;
    model.lambda = j.at("lambda").get<double>();
    model.intercept = j.at("intercept").get<double>();
    model.n_iter = j.at("n_iter").get<std::size_t>();
    for (const auto& w : j.at("weights")) {
        model.feature_names.push_back(w.at("name").get<std::string>());
        model.weights.push_back(w.at("value").get<double>());
    }
    model.converged = true;
    return model;
}

}  // namespace lasso
}  // namespace gapcast
