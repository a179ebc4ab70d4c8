#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/matrix.hpp"

namespace it2mpc::fuzzy {

/// Thrown when every rule's raw firing strength vanishes at a state; this is
/// a configuration bug, not a runtime condition.
struct DegenerateMembershipError : NumericError {
    using NumericError::NumericError;
};

/// Local linear model of one IF-THEN rule:
/// x+ = A x + B u + Ad x_d + Bd u_d.
struct FuzzyRule {
    Matrix A, Ad, B, Bd;
};

/// Interval grades: lower/upper membership of the premise variable plus the
/// state-dependent weighting pair that blends them. The weights must satisfy
/// weight_lower(x) + weight_upper(x) = 1.
struct It2MembershipFn {
    std::function<double(double)> lower;
    std::function<double(double)> upper;
    std::function<double(const Vec&)> weight_lower;
    std::function<double(const Vec&)> weight_upper;
};

/// sin^2 / cos^2 weighting on one state component.
inline std::pair<std::function<double(const Vec&)>, std::function<double(const Vec&)>>
sin_squared_weights(int state_index) {
    auto lower = [state_index](const Vec& x) {
        const double s = std::sin(x[static_cast<std::size_t>(state_index)]);
        return s * s;
    };
    auto upper = [state_index](const Vec& x) {
        const double s = std::sin(x[static_cast<std::size_t>(state_index)]);
        return 1.0 - s * s;
    };
    return {lower, upper};
}

/// Gaussian interval membership: upper grade exp(-(z-c)^2 / (2 su^2)), lower
/// grade scale * exp(-(z-c)^2 / (2 sl^2)) with scale <= 1 and sl <= su, so
/// upper >= lower everywhere.
inline It2MembershipFn gaussian_it2(double center, double sigma_upper, double sigma_lower,
                                    double lower_scale, int weight_state_index) {
    if (sigma_upper <= 0.0 || sigma_lower <= 0.0)
        throw StructuralError("gaussian_it2: sigmas must be positive");
    if (lower_scale < 0.0 || lower_scale > 1.0)
        throw StructuralError("gaussian_it2: lower_scale must lie in [0,1]");
    if (sigma_lower > sigma_upper)
        throw StructuralError("gaussian_it2: sigma_lower must not exceed sigma_upper");
    It2MembershipFn mf;
    mf.upper = [center, sigma_upper](double z) {
        const double d = z - center;
        return std::exp(-d * d / (2.0 * sigma_upper * sigma_upper));
    };
    mf.lower = [center, sigma_lower, lower_scale](double z) {
        const double d = z - center;
        return lower_scale * std::exp(-d * d / (2.0 * sigma_lower * sigma_lower));
    };
    auto [wl, wu] = sin_squared_weights(weight_state_index);
    mf.weight_lower = wl;
    mf.weight_upper = wu;
    return mf;
}

/// Interval type-2 T-S plant: rule matrices, per-rule interval memberships,
/// and the premise map. Immutable after construction.
struct It2Plant {
    std::vector<FuzzyRule> rules;
    std::vector<It2MembershipFn> memberships;
    int state_dim = 0;
    int input_dim = 0;
    std::function<double(const Vec&)> premise;

    int rule_count() const { return static_cast<int>(rules.size()); }

    void validate() const {
        if (rules.empty())
            throw StructuralError("It2Plant: at least one rule required");
        if (rules.size() != memberships.size())
            throw StructuralError("It2Plant: one membership function per rule required");
        if (!premise)
            throw StructuralError("It2Plant: premise map missing");
        for (std::size_t l = 0; l < rules.size(); ++l) {
            const auto& r = rules[l];
            if (r.A.rows() != state_dim || r.A.cols() != state_dim || r.Ad.rows() != state_dim ||
                r.Ad.cols() != state_dim || r.B.rows() != state_dim || r.B.cols() != input_dim ||
                r.Bd.rows() != state_dim || r.Bd.cols() != input_dim)
                throw StructuralError("It2Plant: rule " + std::to_string(l + 1) +
                                      " has inconsistent matrix dimensions");
        }
    }
};

/// Controller rule shape: shares the premise with the plant; only the
/// memberships (and thus the blending weights) belong to the controller.
struct It2ControllerShape {
    std::vector<It2MembershipFn> memberships;
    std::function<double(const Vec&)> premise;

    int rule_count() const { return static_cast<int>(memberships.size()); }
};

namespace detail {

inline Vec normalized_strengths(const std::vector<It2MembershipFn>& mfs,
                                const std::function<double(const Vec&)>& premise, const Vec& x,
                                const char* what) {
    if (!all_finite(x))
        throw NumericError(std::string(what) + ": non-finite state");
    const double z = premise(x);
    Vec w(mfs.size());
    double sum = 0.0;
    for (std::size_t l = 0; l < mfs.size(); ++l) {
        const auto& mf = mfs[l];
        const double raw =
            mf.upper(z) * mf.weight_upper(x) + mf.lower(z) * mf.weight_lower(x);
        w[l] = raw;
        sum += raw;
    }
    if (!(sum > 1e-300))
        throw DegenerateMembershipError(std::string(what) +
                                        ": all raw firing strengths vanish at this state");
    for (double& v : w)
        v /= sum;
    return w;
}

}  // namespace detail

/// Normalized plant firing strengths at a state; nonnegative and summing to 1.
inline Vec firing_strengths(const It2Plant& p, const Vec& x) {
    return detail::normalized_strengths(p.memberships, p.premise, x, "firing_strengths");
}

/// Normalized controller strengths at a state.
inline Vec controller_strengths(const It2ControllerShape& c, const Vec& x) {
    return detail::normalized_strengths(c.memberships, c.premise, x, "controller_strengths");
}

struct BlendedMatrices {
    Matrix A, Ad, B, Bd;
};

/// Convex combination of the rule matrices under the given weights.
inline BlendedMatrices blend(const It2Plant& p, const Vec& w) {
    if (w.size() != p.rules.size())
        throw StructuralError("blend: weight vector length mismatch");
    BlendedMatrices out{Matrix(p.state_dim, p.state_dim), Matrix(p.state_dim, p.state_dim),
                        Matrix(p.state_dim, p.input_dim), Matrix(p.state_dim, p.input_dim)};
    for (std::size_t l = 0; l < w.size(); ++l) {
        out.A += p.rules[l].A * w[l];
        out.Ad += p.rules[l].Ad * w[l];
        out.B += p.rules[l].B * w[l];
        out.Bd += p.rules[l].Bd * w[l];
    }
    return out;
}

/// Closed-loop pair (Phi, Phi_d) of the double fuzzy sum
///   Phi   = sum_l sum_m w_l h_m (A_l + B_l K_m)
///   Phi_d = sum_l sum_m w_l h_m (Ad_l + Bd_l K_m)
/// computed in the factored form A_w + B_w K_h.
inline std::pair<Matrix, Matrix> closed_loop_matrices(const It2Plant& p, const Vec& w, const Vec& h,
                                                      const std::vector<Matrix>& gains) {
    if (gains.size() != p.rules.size() || h.size() != p.rules.size())
        throw StructuralError("closed_loop_matrices: per-rule gain/weight length mismatch");
    BlendedMatrices b = blend(p, w);
    Matrix k_blend(p.input_dim, p.state_dim);
    for (std::size_t m = 0; m < gains.size(); ++m) {
        if (gains[m].rows() != p.input_dim || gains[m].cols() != p.state_dim)
            throw StructuralError("closed_loop_matrices: gain " + std::to_string(m + 1) +
                                  " has wrong shape");
        k_blend += gains[m] * h[m];
    }
    return {b.A + b.B * k_blend, b.Ad + b.Bd * k_blend};
}

}  // namespace it2mpc::fuzzy
