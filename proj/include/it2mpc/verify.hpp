#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/sim.hpp"
#include "it2mpc/synth.hpp"

namespace it2mpc::verify {

/// Outcome of one certification check. A failing report always carries a
/// reproducible witness description.
struct CertReport {
    std::string name;
    bool pass = false;
    double worst_margin = 0.0;
    std::string witness;
    std::string note;
};

inline std::string format(const CertReport& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS " : "FAIL ") << r.name << " worst_margin=" << r.worst_margin;
    if (!r.witness.empty())
        os << " witness={" << r.witness << "}";
    if (!r.note.empty())
        os << " note=" << r.note;
    return os.str();
}

namespace detail {

// Blended level matrix sum_l w_l P_l at the given weights.
inline SymMatrix blended_p(const synth::SynthesisSolution& sol, const Vec& w) {
    SymMatrix p(sol.P[0].dim());
    for (std::size_t l = 0; l < w.size(); ++l)
        p += sol.P[l] * w[l];
    return p;
}

inline Vec unit_direction(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec v(static_cast<std::size_t>(n));
    double nrm = 0.0;
    do {
        for (double& c : v)
            c = gauss(rng);
        nrm = norm2(v);
    } while (nrm < 1e-12);
    for (double& c : v)
        c /= nrm;
    return v;
}

}  // namespace detail

/// Razumikhin decrease along a realized trajectory:
///   V_{k+1}(x(k+1)) - max{V_k(x(k)), V_k(x_d(k))} < -x(k)^T Q x(k) + tol
/// with V_k the level function of step k's optimal solution, evaluated at the
/// current state's firing strengths. The disturbance branch of the LRF
/// definition is not exercised: the closed loop has no exogenous input.
inline CertReport check_lrf_trajectory(const sim::RunResult& rr, const fuzzy::It2Plant& plant,
                                       const synth::SynthConfig& cfg, double tol = 1e-7) {
    CertReport rep;
    rep.name = "lrf_decrease";
    rep.note = "disturbance branch not exercised";
    rep.pass = true;
    rep.worst_margin = -1e300;
    const auto& traj = rr.traj;
    for (int k = 0; k + 1 < traj.size(); ++k) {
        const Vec& x = traj.x[static_cast<std::size_t>(k)];
        const Vec& x_next = traj.x[static_cast<std::size_t>(k) + 1];
        const int d = traj.dx[static_cast<std::size_t>(k)];
        const Vec& x_d = d == 0 ? x
                                : traj.x[static_cast<std::size_t>(std::max(0, k - d))];

        SymMatrix pk = detail::blended_p(rr.solutions[static_cast<std::size_t>(k)],
                                         fuzzy::firing_strengths(plant, x));
        SymMatrix pk1 = detail::blended_p(rr.solutions[static_cast<std::size_t>(k) + 1],
                                          fuzzy::firing_strengths(plant, x_next));
        const double v_bar = std::max(pk.quad_form(x), pk.quad_form(x_d));
        const double decrease = cfg.Q.quad_form(x);
        const double margin = pk1.quad_form(x_next) - v_bar + decrease;
        if (margin > rep.worst_margin) {
            rep.worst_margin = margin;
            rep.witness = "step " + std::to_string(k);
        }
        if (!(margin < tol))
            rep.pass = false;
    }
    if (traj.size() < 2)
        rep.worst_margin = 0.0;
    if (rep.pass)
        rep.witness.clear();
    return rep;
}

/// Eigenvalue sandwich psi_min ||x||^2 <= V_k(x) <= psi_max ||x||^2 where the
/// extremes run over every per-rule level matrix of every step.
inline CertReport check_eigen_sandwich(const std::vector<synth::SynthesisSolution>& sols,
                                       const fuzzy::It2Plant& plant, int samples_per_step,
                                       std::uint64_t seed) {
    CertReport rep;
    rep.name = "eigen_sandwich";
    rep.pass = true;
    rep.worst_margin = -1e300;
    if (sols.empty()) {
        rep.note = "no solutions";
        return rep;
    }
    double psi_min = 1e300, psi_max = -1e300;
    for (const auto& sol : sols) {
        for (const auto& p : sol.P) {
            auto eig = eigh(p);
            psi_min = std::min(psi_min, eig.values.front());
            psi_max = std::max(psi_max, eig.values.back());
        }
    }
    rep.note = "psi_min=" + std::to_string(psi_min) + " psi_max=" + std::to_string(psi_max);

    std::mt19937_64 rng(seed);
    const int n = sols[0].P[0].dim();
    const double tol = 1e-9 * std::max(1.0, psi_max);
    for (std::size_t k = 0; k < sols.size(); ++k) {
        for (int s = 0; s < samples_per_step; ++s) {
            Vec x = detail::unit_direction(rng, n);
            // Moderate magnitudes: far outside the operating range the
            // membership grades underflow.
            const double scale = std::pow(10.0, -3.0 + 3.5 * (static_cast<double>(rng() % 1000) / 999.0));
            for (double& c : x)
                c *= scale;
            const double nx2 = dot(x, x);
            const double v = detail::blended_p(sols[k], fuzzy::firing_strengths(plant, x)).quad_form(x);
            const double lower_gap = v - psi_min * nx2;
            const double upper_gap = psi_max * nx2 - v;
            const double margin = -std::min(lower_gap, upper_gap);
            if (margin > rep.worst_margin) {
                rep.worst_margin = margin;
                rep.witness = "step " + std::to_string(k) + " sample " + std::to_string(s);
            }
            if (margin > tol * std::max(1.0, nx2))
                rep.pass = false;
        }
    }
    if (rep.pass)
        rep.witness.clear();
    return rep;
}

/// Samples boundary-biased pairs from the terminal set and checks that one
/// closed-loop step lands back inside, for a sampled delayed state per delay
/// index when all_delays is set. The closed loop and both membership
/// quadratics are taken at the solution's own firing strengths (the blend the
/// step certificate was posed at); the successor is measured at its own
/// strengths.
inline CertReport check_rpi_sampling(const fuzzy::It2Plant& plant,
                                     const fuzzy::It2ControllerShape& ctrl,
                                     const synth::SynthesisSolution& sol, int n_samples,
                                     bool all_delays, int delay_bound, std::uint64_t seed,
                                     double tol = 1e-7) {
    CertReport rep;
    rep.name = "rpi_sampling";
    rep.pass = true;
    rep.worst_margin = -1e300;
    std::mt19937_64 rng(seed);
    const int n = plant.state_dim;
    const double zeta = sol.zeta;

    SymMatrix p_ref = detail::blended_p(sol, sol.plant_weights);
    auto [phi, phi_d] =
        fuzzy::closed_loop_matrices(plant, sol.plant_weights, sol.ctrl_weights, sol.gains);

    // Radial rescale of a direction onto the target level of x^T P_ref x.
    auto scale_to_level = [&](std::mt19937_64& gen, double target) {
        Vec x = detail::unit_direction(gen, n);
        const double q = p_ref.quad_form(x);
        const double r = q > 0.0 ? std::sqrt(target / q) : 0.0;
        for (double& c : x)
            c *= r;
        return x;
    };

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int delays = all_delays ? delay_bound : 1;
    for (int s = 0; s < n_samples; ++s) {
        Vec x = scale_to_level(rng, zeta * (0.7 + 0.3 * std::sqrt(unif(rng))));
        for (int d = 1; d <= delays; ++d) {
            Vec xd = scale_to_level(rng, zeta * (0.7 + 0.3 * std::sqrt(unif(rng))));
            Vec x_next = phi.apply(x);
            const Vec dpart = phi_d.apply(xd);
            for (std::size_t i = 0; i < x_next.size(); ++i)
                x_next[i] += dpart[i];
            const double succ = synth::terminal_set_value(sol, plant, x_next);
            const double margin = succ - zeta;
            if (margin > rep.worst_margin) {
                rep.worst_margin = margin;
                rep.witness = "sample " + std::to_string(s) + " delay " + std::to_string(d);
            }
            if (margin > tol)
                rep.pass = false;
        }
    }
    if (rep.pass)
        rep.witness.clear();
    return rep;
}

namespace detail {

// Generic block Schur complement: eliminates the trailing rows/cols [split, n).
inline SymMatrix schur_complement(const SymMatrix& full, int split) {
    const int n = full.dim();
    const int m = n - split;
    Matrix a(split, split), b(split, m), d(m, m);
    for (int i = 0; i < split; ++i)
        for (int j = 0; j < split; ++j)
            a(i, j) = full(i, j);
    for (int i = 0; i < split; ++i)
        for (int j = 0; j < m; ++j)
            b(i, j) = full(i, split + j);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            d(i, j) = full(split + i, split + j);
    Matrix comp = a - b * invert(d) * b.transpose();
    return SymMatrix::symmetrized(comp);
}

}  // namespace detail

struct DerivationStage {
    std::string name;
    double margin = 0.0;  // violation when positive
    bool pass = false;
};

struct DerivationReport {
    CertReport summary;
    std::vector<DerivationStage> stages;
};

/// Numerically replays the terminal-inequality derivation chain at a solved
/// point for one successor rule index: the assembled inequality, the
/// congruence + matrix-lemma substitution, the level rescaling, the two
/// Schur-complement reductions (each compared entrywise against its direct
/// construction), and the scalar successor-decrease form on random state
/// pairs.
inline DerivationReport replay_derivation(const synth::SynthesisSolution& sol,
                                          const fuzzy::It2Plant& plant,
                                          const synth::SynthConfig& cfg, int successor,
                                          int n_scalar_samples = 500, std::uint64_t seed = 1,
                                          double tol = 1e-7) {
    if (successor < 0 || successor >= sol.rule_count())
        throw StructuralError("replay_derivation: successor index out of range");
    DerivationReport out;
    out.summary.name = "derivation_chain[t=" + std::to_string(successor + 1) + "]";
    out.summary.pass = true;
    out.summary.worst_margin = -1e300;

    const int n = plant.state_dim;
    const int w = plant.input_dim;
    const Vec& wts = sol.plant_weights;
    const Vec& hts = sol.ctrl_weights;
    fuzzy::BlendedMatrices bl = fuzzy::blend(plant, wts);

    Matrix h_mu(w, n);
    SymMatrix y_mu(n);
    for (std::size_t l = 0; l < wts.size(); ++l) {
        h_mu += sol.H[l] * hts[l];
        y_mu += sol.Y[l] * wts[l];
    }
    const Matrix m = sol.M;
    const Matrix m_inv = invert(m);
    const Matrix k_mu = h_mu * m_inv;
    const Matrix lambda = y_mu.to_matrix() - m - m.transpose();
    const Matrix chi = bl.A * m + bl.B * h_mu;
    const Matrix chi_d = bl.Ad * m + bl.Bd * h_mu;
    const Matrix theta = bl.A + bl.B * k_mu;
    const Matrix theta_d = bl.Ad + bl.Bd * k_mu;
    const SymMatrix y_mu_inv = invert(y_mu);
    const SymMatrix p_mu = y_mu_inv * sol.zeta;
    const SymMatrix p_t = sol.P[static_cast<std::size_t>(successor)];
    const Matrix q = cfg.Q.to_matrix();
    const Matrix r = cfg.R.to_matrix();
    const double zeta = sol.zeta;

    auto record = [&](const std::string& name, double violation) {
        DerivationStage st{name, violation, violation <= tol};
        if (violation > out.summary.worst_margin) {
            out.summary.worst_margin = violation;
            out.summary.witness = name;
        }
        out.summary.pass = out.summary.pass && st.pass;
        out.stages.push_back(std::move(st));
    };

    // Assembled terminal inequality at the solved point.
    BlockSpec spec22({n, n, n, n, w});
    spec22.set_block(0, 0, lambda * cfg.rho);
    spec22.set_block(1, 1, lambda * cfg.rho_d);
    spec22.set_block(0, 2, chi.transpose());
    spec22.set_block(1, 2, chi_d.transpose());
    spec22.set_block(2, 2, -sol.Y[static_cast<std::size_t>(successor)].to_matrix());
    spec22.set_block(0, 3, (q * m).transpose());
    spec22.set_block(3, 3, q * -zeta);
    spec22.set_block(0, 4, (r * h_mu).transpose());
    spec22.set_block(4, 4, r * -zeta);
    SymMatrix s22 = assemble_symmetric(spec22);
    record("assembled", max_eig(s22));

    // Matrix-lemma direction: M^-T lambda M^-1 >= -Y_mu^-1.
    SymMatrix lemma_gap =
        SymMatrix::symmetrized(m_inv.transpose() * lambda * m_inv + y_mu_inv.to_matrix());
    record("lemma_bound", -min_eig(lemma_gap));

    // Congruence by diag(M^-1, M^-1, I, I, I), then replace the two leading
    // diagonal blocks via the lemma.
    Matrix t_cong(4 * n + w, 4 * n + w);
    for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj) {
            t_cong(i, jj) = m_inv(i, jj);
            t_cong(n + i, n + jj) = m_inv(i, jj);
        }
    for (int i = 2 * n; i < 4 * n + w; ++i)
        t_cong(i, i) = 1.0;
    SymMatrix s24 = congruence(s22, t_cong);
    for (int i = 0; i < n; ++i)
        for (int jj = i; jj < n; ++jj) {
            s24.set(i, jj, -cfg.rho * y_mu_inv(i, jj));
            s24.set(n + i, n + jj, -cfg.rho_d * y_mu_inv(i, jj));
        }
    record("congruence_lemma", max_eig(s24));

    // Level rescaling by diag(sqrt(zeta) I, sqrt(zeta) I, I/sqrt(zeta), ...).
    Matrix t_scale(4 * n + w, 4 * n + w);
    const double rz = std::sqrt(zeta);
    for (int i = 0; i < 2 * n; ++i)
        t_scale(i, i) = rz;
    for (int i = 2 * n; i < 4 * n + w; ++i)
        t_scale(i, i) = 1.0 / rz;
    SymMatrix s25 = congruence(s24, t_scale);
    record("level_rescale", max_eig(s25));

    // First Schur reduction: eliminate the Q and R rows.
    SymMatrix s26 = detail::schur_complement(s25, 3 * n);
    BlockSpec spec26({n, n, n});
    spec26.set_block(0, 0, q + k_mu.transpose() * r * k_mu - p_mu.to_matrix() * cfg.rho);
    spec26.set_block(1, 1, p_mu.to_matrix() * -cfg.rho_d);
    spec26.set_block(0, 2, theta.transpose());
    spec26.set_block(1, 2, theta_d.transpose());
    spec26.set_block(2, 2, -invert(p_t).to_matrix());
    SymMatrix s26_direct = assemble_symmetric(spec26);
    const double s26_scale = std::max(1.0, s26_direct.max_abs());
    record("schur_qr_match",
           (s26.to_matrix() - s26_direct.to_matrix()).max_abs() / s26_scale - 1e-9);
    record("schur_qr", max_eig(s26));

    // Second Schur reduction: eliminate the successor block.
    SymMatrix s27 = detail::schur_complement(s26, 2 * n);
    Matrix stacked(n, 2 * n);
    for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj) {
            stacked(i, jj) = theta(i, jj);
            stacked(i, n + jj) = theta_d(i, jj);
        }
    Matrix s27_direct = stacked.transpose() * p_t.to_matrix() * stacked;
    for (int i = 0; i < n; ++i)
        for (int jj = 0; jj < n; ++jj) {
            s27_direct(i, jj) += q(i, jj) + (k_mu.transpose() * r * k_mu)(i, jj) -
                                 cfg.rho * p_mu(i, jj);
            s27_direct(n + i, n + jj) += -cfg.rho_d * p_mu(i, jj);
        }
    const double s27_scale = std::max(1.0, s27_direct.max_abs());
    record("schur_succ_match",
           (s27.to_matrix() - s27_direct).max_abs() / s27_scale - 1e-9);
    record("schur_succ", max_eig(s27));

    // Scalar successor-decrease form on random state pairs.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst_scalar = -1e300;
    for (int s = 0; s < n_scalar_samples; ++s) {
        Vec x(static_cast<std::size_t>(n)), xd(static_cast<std::size_t>(n));
        for (double& c : x)
            c = dist(rng);
        for (double& c : xd)
            c = dist(rng);
        Vec xn = theta.apply(x);
        const Vec xdn = theta_d.apply(xd);
        for (std::size_t i = 0; i < xn.size(); ++i)
            xn[i] += xdn[i];
        const Vec u = k_mu.apply(x);
        const double value = p_t.quad_form(xn) + cfg.Q.quad_form(x) + cfg.R.quad_form(u) -
                             cfg.rho * p_mu.quad_form(x) - cfg.rho_d * p_mu.quad_form(xd);
        worst_scalar = std::max(worst_scalar, value);
    }
    record("scalar_decrease", worst_scalar);

    if (out.summary.pass)
        out.summary.witness.clear();
    return out;
}

/// Equivalence of the full-matrix definiteness test with the pivot-plus-
/// complement reading, both for the negative-definite and positive-definite
/// senses. The trailing block [split, dim) is the pivot being eliminated.
inline CertReport schur_oracle(const SymMatrix& full, int split) {
    CertReport rep;
    rep.name = "schur_oracle";
    if (split < 1 || split >= full.dim())
        throw StructuralError("schur_oracle: split must lie strictly inside the matrix");
    const int n = full.dim();
    const int m = n - split;
    SymMatrix pivot(m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j)
            pivot.set(i, j, full(split + i, split + j));
    const double scale = std::max(1.0, full.max_abs());
    const double tol = 1e-9 * scale;
    const double piv_min = min_eig(pivot);
    const double piv_max = max_eig(pivot);
    if (piv_min < tol && piv_max > -tol) {
        rep.pass = false;
        rep.note = "inapplicable: pivot block is not sign-definite";
        rep.witness = "pivot eigs [" + std::to_string(piv_min) + "," + std::to_string(piv_max) + "]";
        return rep;
    }
    SymMatrix comp = detail::schur_complement(full, split);
    const bool full_nd = max_eig(full) < -tol;
    const bool full_pd = min_eig(full) > tol;
    const bool split_nd = piv_max < -tol && max_eig(comp) < -tol;
    const bool split_pd = piv_min > tol && min_eig(comp) > tol;
    rep.pass = (full_nd == split_nd) && (full_pd == split_pd);
    rep.worst_margin = rep.pass ? 0.0 : 1.0;
    if (!rep.pass)
        rep.witness = "full_nd=" + std::to_string(full_nd) + " split_nd=" + std::to_string(split_nd) +
                      " full_pd=" + std::to_string(full_pd) + " split_pd=" + std::to_string(split_pd);
    return rep;
}

}  // namespace it2mpc::verify
