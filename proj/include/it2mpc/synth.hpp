#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/fuzzy.hpp"
#include "it2mpc/sdp.hpp"

namespace it2mpc::synth {

/// Fixed synthesis data: stage weights Q >= 0, R > 0, the Razumikhin split
/// rho + rho_d = 1, the delay bounds, and the per-channel input limits.
class SynthConfig {
public:
    SymMatrix Q, R;
    double rho = 0.0, rho_d = 0.0;
    int state_delay_bound = 1;  // h
    int input_delay_bound = 1;  // j
    Vec u_max;

    static SynthConfig make(SymMatrix q, SymMatrix r, double rho, double rho_d,
                            int state_delay_bound, int input_delay_bound, Vec u_max) {
        SynthConfig c;
        c.Q = std::move(q);
        c.R = std::move(r);
        c.rho = rho;
        c.rho_d = rho_d;
        c.state_delay_bound = state_delay_bound;
        c.input_delay_bound = input_delay_bound;
        c.u_max = std::move(u_max);
        c.validate();
        return c;
    }

    void validate() const {
        if (std::abs(rho + rho_d - 1.0) > 1e-12)
            throw StructuralError("SynthConfig: rho + rho_d must equal 1 (got " +
                                  std::to_string(rho + rho_d) + ")");
        if (!(rho > 0.0) || !(rho_d > 0.0))
            throw StructuralError("SynthConfig: rho and rho_d must be positive");
        if (state_delay_bound < 1 || input_delay_bound < 1)
            throw StructuralError("SynthConfig: delay bounds must be >= 1");
        if (min_eig(Q) < -1e-12)
            throw StructuralError("SynthConfig: Q must be positive semidefinite");
        if (min_eig(R) <= 0.0)
            throw StructuralError("SynthConfig: R must be positive definite");
        if (u_max.size() != static_cast<std::size_t>(R.dim()))
            throw StructuralError("SynthConfig: u_max length must match the input dimension");
        for (double u : u_max)
            if (!(u > 0.0))
                throw StructuralError("SynthConfig: u_max entries must be positive");
    }
};

/// Rolling state/input history: states x(k-h)..x(k) (h+1 entries) and inputs
/// u(k-j)..u(k-1) (j entries), oldest first.
class HistoryWindow {
public:
    HistoryWindow(std::vector<Vec> states, std::vector<Vec> inputs)
        : states_(std::move(states)), inputs_(std::move(inputs)) {}

    /// Pre-time-0 convention: the state history is x0 replicated, inputs zero.
    static HistoryWindow from_initial(const Vec& x0, int state_bound, int input_bound,
                                      int input_dim) {
        std::vector<Vec> states(static_cast<std::size_t>(state_bound) + 1, x0);
        std::vector<Vec> inputs(static_cast<std::size_t>(input_bound),
                                Vec(static_cast<std::size_t>(input_dim), 0.0));
        return HistoryWindow(std::move(states), std::move(inputs));
    }

    int state_bound() const { return static_cast<int>(states_.size()) - 1; }
    int input_bound() const { return static_cast<int>(inputs_.size()); }

    const Vec& current_state() const { return states_.back(); }

    /// x(k - d), d in [0, h].
    const Vec& state_lookback(int d) const {
        if (d < 0 || d > state_bound())
            throw StructuralError("HistoryWindow: state lookback " + std::to_string(d) +
                                  " outside [0," + std::to_string(state_bound()) + "]");
        return states_[states_.size() - 1 - static_cast<std::size_t>(d)];
    }

    /// u(k - d), d in [1, j].
    const Vec& input_lookback(int d) const {
        if (d < 1 || d > input_bound())
            throw StructuralError("HistoryWindow: input lookback " + std::to_string(d) +
                                  " outside [1," + std::to_string(input_bound()) + "]");
        return inputs_[inputs_.size() - static_cast<std::size_t>(d)];
    }

    const std::vector<Vec>& states() const { return states_; }
    const std::vector<Vec>& inputs() const { return inputs_; }

    /// Records u(k) and x(k+1), sliding the window one step.
    void advance(const Vec& x_next, const Vec& u_now) {
        states_.erase(states_.begin());
        states_.push_back(x_next);
        inputs_.erase(inputs_.begin());
        inputs_.push_back(u_now);
    }

private:
    std::vector<Vec> states_;
    std::vector<Vec> inputs_;
};

/// Decision-variable values of one synthesis step plus the extracted
/// state-feedback gains K_l = H_l M^-1 and the level matrices P_l =
/// zeta * Y_l^-1. plant_weights/ctrl_weights record the membership blend the
/// step problem was posed at.
struct SynthesisSolution {
    std::vector<SymMatrix> Y;
    Matrix M;
    std::vector<Matrix> H;
    SymMatrix Z;
    double zeta = 0.0;
    std::vector<Matrix> gains;
    std::vector<SymMatrix> P;
    Vec u_max;
    Vec plant_weights, ctrl_weights;

    int rule_count() const { return static_cast<int>(Y.size()); }
};

/// Builds the per-step optimization problem: minimize zeta subject to
///   (a) the terminal-set inequality with the plant/controller blends taken
///       at the current state's firing strengths, one constraint per
///       successor rule index t (the -Y_t block);
///   (b) the input-bound blocks per (controller rule i, set rule l);
///   (c) the history containment blocks per (sample, rule);
///   plus the diagonal caps Z_mm <= u_max_m^2.
inline lmi::LmiProblem build_theorem1_lmis(const fuzzy::It2Plant& plant,
                                           const fuzzy::It2ControllerShape& ctrl,
                                           const SynthConfig& cfg, const HistoryWindow& hist) {
    plant.validate();
    cfg.validate();
    const int n = plant.state_dim;
    const int w = plant.input_dim;
    const int r = plant.rule_count();
    if (cfg.Q.dim() != n || cfg.R.dim() != w)
        throw StructuralError("build_theorem1_lmis: Q/R dimensions do not match the plant");
    if (hist.state_bound() != cfg.state_delay_bound || hist.input_bound() != cfg.input_delay_bound)
        throw StructuralError("build_theorem1_lmis: history window does not match the delay bounds");

    const Vec& xk = hist.current_state();
    const Vec wts = fuzzy::firing_strengths(plant, xk);
    const Vec hts = fuzzy::controller_strengths(ctrl, xk);
    if (hts.size() != static_cast<std::size_t>(r))
        throw StructuralError("build_theorem1_lmis: controller rule count differs from the plant");
    const fuzzy::BlendedMatrices bl = fuzzy::blend(plant, wts);

    lmi::LmiProblem p;
    std::vector<lmi::VarRef> y_vars, h_vars;
    for (int l = 0; l < r; ++l)
        y_vars.push_back(p.add_symmetric("Y" + std::to_string(l + 1), n));
    lmi::VarRef m_var = p.add_matrix("M", n, n);
    for (int l = 0; l < r; ++l)
        h_vars.push_back(p.add_matrix("H" + std::to_string(l + 1), w, n));
    lmi::VarRef z_var = p.add_symmetric("Z", w);
    lmi::VarRef zeta = p.add_scalar("zeta");
    p.set_objective(zeta);

    const Matrix In = Matrix::identity(n);
    const Matrix Iw = Matrix::identity(w);
    const Matrix Qm = cfg.Q.to_matrix();
    const Matrix Rm = cfg.R.to_matrix();

    // lambda = Y_mu - M - M^T with Y_mu = sum_l w_l Y_l.
    auto lambda_block = [&](double scale) {
        lmi::AffineBlock b(n, n);
        for (int l = 0; l < r; ++l)
            b.add_term(In * (scale * wts[static_cast<std::size_t>(l)]),
                       y_vars[static_cast<std::size_t>(l)], In);
        b.add_term(In * -scale, m_var, In);
        b.add_term(In * -scale, m_var, In, /*transposed=*/true);
        return b;
    };
    // sum_i h_i H_i^T * right (the blended-gain rows enter transposed).
    auto blended_h_transposed = [&](int rows, const Matrix& right) {
        lmi::AffineBlock b(rows, right.cols());
        for (int i = 0; i < r; ++i)
            b.add_term(Matrix::identity(rows), h_vars[static_cast<std::size_t>(i)],
                       right * hts[static_cast<std::size_t>(i)], true);
        return b;
    };

    for (int t = 0; t < r; ++t) {
        lmi::LmiConstraint c("eq22[t=" + std::to_string(t + 1) + "]",
                             lmi::Sense::negative_definite, {n, n, n, n, w});
        c.set_block(0, 0, lambda_block(cfg.rho));
        c.set_block(1, 1, lambda_block(cfg.rho_d));

        // (0,2) = chi^T = M^T A_mu^T + H_mu^T B_mu^T
        lmi::AffineBlock chi_t = blended_h_transposed(n, bl.B.transpose());
        chi_t.add_term(In, m_var, bl.A.transpose(), true);
        c.set_block(0, 2, std::move(chi_t));

        // (1,2) = chi_d^T = M^T Ad_mu^T + H_mu^T Bd_mu^T
        lmi::AffineBlock chid_t = blended_h_transposed(n, bl.Bd.transpose());
        chid_t.add_term(In, m_var, bl.Ad.transpose(), true);
        c.set_block(1, 2, std::move(chid_t));

        // (2,2) = -Y_t (successor terminal index)
        lmi::AffineBlock yt(n, n);
        yt.add_term(In * -1.0, y_vars[static_cast<std::size_t>(t)], In);
        c.set_block(2, 2, std::move(yt));

        // (0,3) = (Q M)^T, (3,3) = -zeta Q
        lmi::AffineBlock qm_t(n, n);
        qm_t.add_term(In, m_var, Qm, true);
        c.set_block(0, 3, std::move(qm_t));
        lmi::AffineBlock zq(n, n);
        zq.add_scalar_term(Qm * -1.0, zeta);
        c.set_block(3, 3, std::move(zq));

        // (0,4) = (R H_mu)^T, (4,4) = -zeta R
        c.set_block(0, 4, blended_h_transposed(n, Rm));
        lmi::AffineBlock zr(w, w);
        zr.add_scalar_term(Rm * -1.0, zeta);
        c.set_block(4, 4, std::move(zr));

        p.add_constraint(std::move(c));
    }

    // Input bounds: [[Z, H_i], [H_i^T, M^T + M - Y_l]] >= 0 per (i, l).
    for (int i = 0; i < r; ++i) {
        for (int l = 0; l < r; ++l) {
            lmi::LmiConstraint c("eq23[i=" + std::to_string(i + 1) + ",l=" + std::to_string(l + 1) + "]",
                                 lmi::Sense::positive_semidefinite, {w, n});
            lmi::AffineBlock zb(w, w);
            zb.add_term(Iw, z_var, Iw);
            c.set_block(0, 0, std::move(zb));
            lmi::AffineBlock hb(w, n);
            hb.add_term(Iw, h_vars[static_cast<std::size_t>(i)], In);
            c.set_block(0, 1, std::move(hb));
            lmi::AffineBlock mm(n, n);
            mm.add_term(In, m_var, In, true);
            mm.add_term(In, m_var, In);
            mm.add_term(In * -1.0, y_vars[static_cast<std::size_t>(l)], In);
            c.set_block(1, 1, std::move(mm));
            p.add_constraint(std::move(c));
        }
    }
    for (int m = 0; m < w; ++m) {
        lmi::ScalarBound bound;
        bound.label = "zbound[m=" + std::to_string(m + 1) + "]";
        bound.terms.push_back({z_var.id, m, m, 1.0});
        bound.rhs = cfg.u_max[static_cast<std::size_t>(m)] * cfg.u_max[static_cast<std::size_t>(m)];
        p.add_scalar_bound(std::move(bound));
    }

    // History containment: [[1, x^T], [x, Y_l]] >= 0 for every history sample.
    for (int d = hist.state_bound(); d >= 0; --d) {
        const Vec& x = hist.state_lookback(d);
        for (int l = 0; l < r; ++l) {
            lmi::LmiConstraint c("eq35[j=" + std::to_string(-d) + ",l=" + std::to_string(l + 1) + "]",
                                 lmi::Sense::positive_semidefinite, {1, n});
            c.set_block(0, 0, lmi::AffineBlock(Matrix{{1.0}}));
            c.set_block(0, 1, lmi::AffineBlock(Matrix::row(x)));
            lmi::AffineBlock yb(n, n);
            yb.add_term(In, y_vars[static_cast<std::size_t>(l)], In);
            c.set_block(1, 1, std::move(yb));
            p.add_constraint(std::move(c));
        }
    }

    return p;
}

enum class StepStatus { feasible, infeasible, no_certificate };

struct StepResult {
    StepStatus status = StepStatus::no_certificate;
    SynthesisSolution solution;
    lmi::FeasReport certificate;
    int iterations = 0;
    std::string note;
};

/// One pass of the online algorithm: solve the step problem, extract gains
/// K_l = H_l M^-1, and certify the returned point. When the previous step's
/// solution is supplied, the cost level is pinned to the previous optimum
/// (its minimum is set by the strictness floor and does not move between
/// steps) and the level sets are constrained not to shrink (Y_l >= previous
/// Y_l). Together with the previous step's certificate this makes the
/// per-step level functions pointwise non-increasing, which is the
/// successive-optimality step of the stability argument.
inline StepResult solve_step(const fuzzy::It2Plant& plant, const fuzzy::It2ControllerShape& ctrl,
                             const SynthConfig& cfg, const HistoryWindow& hist,
                             const SynthesisSolution* previous = nullptr,
                             const lmi::SolveOptions& opts = {}) {
    lmi::LmiProblem p = build_theorem1_lmis(plant, ctrl, cfg, hist);
    if (previous) {
        const int n = plant.state_dim;
        for (int l = 0; l < plant.rule_count(); ++l) {
            lmi::LmiConstraint c("ymono[l=" + std::to_string(l + 1) + "]",
                                 lmi::Sense::positive_semidefinite, {n});
            lmi::AffineBlock b(-previous->Y[static_cast<std::size_t>(l)].to_matrix());
            b.add_term(Matrix::identity(n), p.variable("Y" + std::to_string(l + 1)),
                       Matrix::identity(n));
            c.set_block(0, 0, std::move(b));
            p.add_constraint(std::move(c));
        }
    }
    lmi::SolveResult sr = previous ? lmi::solve_at_fixed_objective(p, previous->zeta, opts)
                                   : lmi::solve(p, opts);
    StepResult out;
    out.iterations = sr.iterations;
    if (sr.status == lmi::SolveStatus::infeasible) {
        out.status = StepStatus::infeasible;
        out.note = sr.note;
        return out;
    }
    if (sr.status != lmi::SolveStatus::feasible) {
        out.status = StepStatus::no_certificate;
        out.note = sr.note;
        return out;
    }

    const int r = plant.rule_count();
    SynthesisSolution sol;
    sol.u_max = cfg.u_max;
    sol.zeta = sr.objective;
    sol.plant_weights = fuzzy::firing_strengths(plant, hist.current_state());
    sol.ctrl_weights = fuzzy::controller_strengths(ctrl, hist.current_state());
    try {
        sol.M = sr.assignment.matrix(p.variable("M"));
        Matrix m_inv = invert(sol.M);
        for (int l = 0; l < r; ++l) {
            sol.Y.push_back(sr.assignment.symmetric(p.variable("Y" + std::to_string(l + 1))));
            sol.H.push_back(sr.assignment.matrix(p.variable("H" + std::to_string(l + 1))));
            sol.gains.push_back(sol.H.back() * m_inv);
            sol.P.push_back(invert(sol.Y.back()) * sol.zeta);
        }
        sol.Z = sr.assignment.symmetric(p.variable("Z"));
    } catch (const SingularMatrixError& e) {
        out.status = StepStatus::no_certificate;
        out.note = std::string("gain extraction failed: ") + e.what();
        return out;
    }

    out.certificate = lmi::check_feasible(p, sr.assignment, 1e-7);
    out.solution = std::move(sol);
    out.status = StepStatus::feasible;
    return out;
}

/// Fuzzy state feedback u = (sum_l h_l K_l) x. Saturation is applied only to
/// absorb sub-1e-9 numerical overshoot of the certified bound.
inline Vec control_input(const SynthesisSolution& sol, const fuzzy::It2ControllerShape& ctrl,
                         const Vec& x) {
    if (!all_finite(x))
        throw NumericError("control_input: non-finite state");
    Vec h = fuzzy::controller_strengths(ctrl, x);
    if (h.size() != sol.gains.size())
        throw StructuralError("control_input: controller and solution rule counts differ");
    Matrix k_blend(sol.gains[0].rows(), sol.gains[0].cols());
    for (std::size_t l = 0; l < h.size(); ++l)
        k_blend += sol.gains[l] * h[l];
    Vec u = k_blend.apply(x);
    for (std::size_t m = 0; m < u.size(); ++m) {
        const double cap = sol.u_max[m];
        if (std::abs(u[m]) > cap && std::abs(u[m]) <= cap + 1e-9)
            u[m] = u[m] > 0.0 ? cap : -cap;
    }
    return u;
}

/// x^T P_mu x with P_mu = sum_l w_l(x) * zeta * Y_l^-1; membership in the
/// terminal set is value <= zeta.
inline double terminal_set_value(const SynthesisSolution& sol, const fuzzy::It2Plant& plant,
                                 const Vec& x) {
    Vec w = fuzzy::firing_strengths(plant, x);
    double value = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l)
        value += w[l] * sol.P[l].quad_form(x);
    return value;
}

}  // namespace it2mpc::synth
