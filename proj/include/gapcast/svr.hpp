#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapcast/common.hpp"

namespace gapcast {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

enum class KernelKind { linear, sigmoid, rbf };

inline std::string to_string(KernelKind k) {
    switch (k) {
        case KernelKind::linear: return "linear";
        case KernelKind::sigmoid: return "sigmoid";
        case KernelKind::rbf: return "rbf";
    }
    return "rbf";
}

inline KernelKind kernel_kind_from_string(const std::string& s) {
    if (s == "linear") return KernelKind::linear;
    if (s == "sigmoid") return KernelKind::sigmoid;
    if (s == "rbf") return KernelKind::rbf;
    fail("BadConfig", "unknown kernel '" + s + "'");
}

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double gamma = 0.1;  // rbf / sigmoid coefficient
    double coef0 = 0.0;  // sigmoid offset
};

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> z) {
    if (x.size() != z.size()) fail("DimensionMismatch", "kernel arguments differ in dimension");
    switch (spec.kind) {
        case KernelKind::linear: return dot(x, z);
        case KernelKind::sigmoid: return std::tanh(spec.gamma * dot(x, z) + spec.coef0);
        case KernelKind::rbf: return std::exp(-spec.gamma * squared_distance(x, z));
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// epsilon-SVR via pairwise (SMO-style) coordinate updates on the dual
// ---------------------------------------------------------------------------

struct SvrOptions {
    double C = 1.0;
    double epsilon = 0.1;
    KernelSpec kernel;
    double tol = 1e-3;            // on the worst KKT violation
    std::size_t max_passes = 200; // iteration cap in units of 2m pair updates
    std::size_t gram_cache_limit = 4000;  // full Gram kept below this row count
};

/// Fitted predictor g(x) = sum_i coef_i K(sv_i, x) + b where coef_i is the
/// net dual coefficient (alpha*_i - alpha_i) of a support vector.
struct SvrModel {
    Matrix support_vectors;
    std::vector<double> dual_coefficients;
    double bias = 0.0;
    double C = 1.0;
    double epsilon = 0.1;
    KernelSpec kernel;
    bool converged = false;
    double kkt_violation = 0.0;
    std::size_t n_iter = 0;
};

namespace svr {
namespace detail {

/// Kernel rows, fully cached for small problems and recomputed row-wise for
/// large ones.
class KernelTable {
public:
    KernelTable(const Matrix& x, const KernelSpec& spec, std::size_t cache_limit)
        : x_(x), spec_(spec), cached_(x.rows <= cache_limit) {
        if (cached_) {
            gram_.assign(x.rows * x.rows, 0.0);
            for (std::size_t i = 0; i < x.rows; ++i)
                for (std::size_t j = i; j < x.rows; ++j) {
                    const double v = kernel_eval(spec_, x_.row(i), x_.row(j));
                    gram_[i * x.rows + j] = v;
                    gram_[j * x.rows + i] = v;
                }
        } else {
            scratch_a_.resize(x.rows);
            scratch_b_.resize(x.rows);
        }
    }

    std::span<const double> row(std::size_t i, bool second_slot) {
        if (cached_) return {gram_.data() + i * x_.rows, x_.rows};
        auto& buf = second_slot ? scratch_b_ : scratch_a_;
        for (std::size_t j = 0; j < x_.rows; ++j) buf[j] = kernel_eval(spec_, x_.row(i), x_.row(j));
        return buf;
    }

    double diag(std::size_t i) {
        if (cached_) return gram_[i * x_.rows + i];
        return kernel_eval(spec_, x_.row(i), x_.row(i));
    }

private:
    const Matrix& x_;
    KernelSpec spec_;
    bool cached_;
    std::vector<double> gram_;
    std::vector<double> scratch_a_, scratch_b_;
};

}  // namespace detail

/// Solves min over alpha, alpha* in [0,C]^m of
///   1/2 (a-a*)' Q (a-a*) + eps * sum(a+a*) + sum y_i (a_i - a*_i)
/// subject to e'(a-a*) = 0, the dual whose optimum yields the predictor
/// g(x) = sum (alpha*_i - alpha_i) K(x_i, x) + b. Variables are laid out as
/// w = [alpha; alpha*] with constraint signs z = [+1; -1]; each step picks
/// the maximal KKT-violating pair (ties to the lowest index) and solves the
/// two-variable subproblem exactly.
inline SvrModel fit(const Matrix& x, const std::vector<double>& y, const SvrOptions& opts) {
    if (x.rows == 0 || y.empty()) fail("EmptyInput", "svr fit on empty data");
    if (x.rows != y.size()) fail("DimensionMismatch", "row count differs from target length");
    if (opts.C <= 0.0) fail("BadConfig", "C must be positive");
    if (opts.epsilon < 0.0) fail("BadConfig", "epsilon must be nonnegative");

    const std::size_t m = x.rows;
    const std::size_t nv = 2 * m;  // [alpha; alpha*]
    const double C = opts.C;
    constexpr double kTau = 1e-12;

    detail::KernelTable kernel(x, opts.kernel, opts.gram_cache_limit);

    std::vector<double> w(nv, 0.0);
    std::vector<double> grad(nv);
    for (std::size_t p = 0; p < m; ++p) {
        grad[p] = opts.epsilon + y[p];      // alpha side, z = +1
        grad[m + p] = opts.epsilon - y[p];  // alpha* side, z = -1
    }
    auto zsign = [m](std::size_t u) { return u < m ? 1.0 : -1.0; };
    auto point = [m](std::size_t u) { return u < m ? u : u - m; };

    const std::size_t max_iter = std::max<std::size_t>(1, opts.max_passes) * nv;
    double violation = 0.0;
    bool converged = false;
    std::size_t iter = 0;

    for (; iter < max_iter; ++iter) {
        // i: largest z*G among variables movable against their sign;
        // j: smallest z*G among variables movable along their sign
        double best_up = -std::numeric_limits<double>::infinity();
        double best_dn = std::numeric_limits<double>::infinity();
        std::size_t i = nv, j = nv;
        for (std::size_t u = 0; u < nv; ++u) {
            const double zg = zsign(u) * grad[u];
            const bool at_lower = w[u] <= 0.0;
            const bool at_upper = w[u] >= C;
            const bool can_down = zsign(u) > 0.0 ? !at_lower : !at_upper;  // move in -z
            const bool can_up = zsign(u) > 0.0 ? !at_upper : !at_lower;    // move in +z
            if (can_down && zg > best_up) {
                best_up = zg;
                i = u;
            }
            if (can_up && zg < best_dn) {
                best_dn = zg;
                j = u;
            }
        }
        violation = (i == nv || j == nv) ? 0.0 : best_up - best_dn;
        if (violation < opts.tol) {
            converged = true;
            break;
        }

        const std::size_t pi = point(i), pj = point(j);
        const auto row_i = kernel.row(pi, false);
        const auto row_j = kernel.row(pj, true);

        double curvature = kernel.diag(pi) + kernel.diag(pj) - 2.0 * row_i[pj];
        if (curvature <= kTau) curvature = kTau;  // duplicate points / indefinite sigmoid

        const double room_i = zsign(i) > 0.0 ? w[i] : C - w[i];
        const double room_j = zsign(j) > 0.0 ? C - w[j] : w[j];
        const double step = std::min({violation / curvature, room_i, room_j});
        if (step <= 0.0)
            fail("NoProgress", "stalled with KKT violation " + format_double(violation));

        w[i] -= zsign(i) * step;  // i moves against its constraint sign
        w[j] += zsign(j) * step;  // j moves along it; z'w stays 0

        for (std::size_t v = 0; v < nv; ++v) {
            const std::size_t pv = point(v);
            grad[v] += zsign(v) * step * (row_j[pv] - row_i[pv]);
        }
        if (w[i] < 0.0) w[i] = 0.0;
        if (w[i] > C) w[i] = C;
        if (w[j] < 0.0) w[j] = 0.0;
        if (w[j] > C) w[j] = C;
    }

    // bias from the stationarity window: free variables pin z*G to nu = b
    double free_sum = 0.0;
    std::size_t free_count = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u < nv; ++u) {
        const double zg = zsign(u) * grad[u];
        if (w[u] > 0.0 && w[u] < C) {
            free_sum += zg;
            ++free_count;
        } else {
            const bool at_upper = w[u] >= C;
            if ((zsign(u) > 0.0) == at_upper) {
                lower = std::max(lower, zg);  // nu >= z*G here
            } else {
                upper = std::min(upper, zg);  // nu <= z*G here
            }
        }
    }
    const double bias = free_count > 0 ? free_sum / static_cast<double>(free_count)
                                       : 0.5 * (lower + upper);

    // net coefficients with complementarity enforced exactly
    SvrModel model;
    model.C = C;
    model.epsilon = opts.epsilon;
    model.kernel = opts.kernel;
    model.bias = bias;
    model.converged = converged;
    model.kkt_violation = violation;
    model.n_iter = iter;

    std::vector<std::size_t> sv_rows;
    std::vector<double> coefs;
    for (std::size_t p = 0; p < m; ++p) {
        const double beta = w[m + p] - w[p];  // alpha* - alpha
        if (beta != 0.0) {
            sv_rows.push_back(p);
            coefs.push_back(beta);
        }
    }
    model.support_vectors = Matrix(sv_rows.size(), x.cols);
    for (std::size_t s = 0; s < sv_rows.size(); ++s) {
        const auto src = x.row(sv_rows[s]);
        std::copy(src.begin(), src.end(), model.support_vectors.row(s).begin());
    }
    model.dual_coefficients = std::move(coefs);
    return model;
}

inline std::vector<double> predict(const SvrModel& model, const Matrix& x) {
    if (model.support_vectors.rows > 0 && x.cols != model.support_vectors.cols)
        fail("DimensionMismatch", "feature width differs from the support vectors");
    std::vector<double> out(x.rows, model.bias);
    for (std::size_t r = 0; r < x.rows; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < model.support_vectors.rows; ++i)
            s += model.dual_coefficients[i] *
                 kernel_eval(model.kernel, model.support_vectors.row(i), x.row(r));
        out[r] += s;
    }
    return out;
}

inline nlohmann::json to_json(const SvrModel& model) {
    nlohmann::json j;
    j["C"] = model.C;
    j["epsilon"] = model.epsilon;
    j["kernel"] = {{"kind", to_string(model.kernel.kind)},
                   {"gamma", model.kernel.gamma},
                   {"coef0", model.kernel.coef0}};
    j["bias"] = model.bias;
    j["support"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
        const auto row = model.support_vectors.row(i);
        j["support"].push_back(
            {{"x", std::vector<double>(row.begin(), row.end())}, {"coef", model.dual_coefficients[i]}});
    }
    return j;
}

inline SvrModel from_json(const nlohmann::json& j) {
    SvrModel model;
    model.C = j.at("C").get<double>();
    model.epsilon = j.at("epsilon").get<double>();
    model.kernel.kind = kernel_kind_from_string(j.at("kernel").at("kind").get<std::string>());
    model.kernel.gamma = j.at("kernel").at("gamma").get<double>();
    model.kernel.coef0 = j.at("kernel").at("coef0").get<double>();
    model.bias = j.at("bias").get<double>();
    const auto& support = j.at("support");
    std::size_t cols = 0;
    if (!support.empty()) cols = support[0].at("x").size();
    model.support_vectors = Matrix(support.size(), cols);
    for (std::size_t i = 0; i < support.size(); ++i) {
        const auto xs = support[i].at("x").get<std::vector<double>>();
        std::copy(xs.begin(), xs.end(), model.support_vectors.row(i).begin());
        model.dual_coefficients.push_back(support[i].at("coef").get<double>());
    }
    model.converged = true;
    return model;
}

}  // namespace svr
}  // namespace gapcast
