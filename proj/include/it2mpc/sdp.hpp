#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "it2mpc/lmi.hpp"
#include "it2mpc/matrix.hpp"

namespace it2mpc::sdp {

// ---------------------------------------------------------------------------
// Standard form: minimize c^T y subject to F_b(y) = f0_b + sum_k y_k F_{b,k}
// being positive semidefinite for every block b. Negative-definite
// constraints arrive negated and shifted by -eps*I so that the strict
// inequality is representable.
// ---------------------------------------------------------------------------

struct StdBlock {
    int dim = 0;
    Matrix f0;
    std::vector<int> vars;
    std::vector<Matrix> coeff;  // parallel to vars
    std::string label;
};

struct VarLayout {
    int offset = 0;
    std::vector<std::pair<int, int>> entries;  // (i,j) per scalar; i <= j for symmetric
};

struct StdProblem {
    int nvars = 0;
    Vec c;
    std::vector<StdBlock> blocks;
    Vec var_scale;                   // original y = var_scale .* scaled y
    std::vector<VarLayout> layout;   // per LmiProblem variable; empty entries for fixed vars
    int objective_var = -1;          // LmiProblem variable id, -1 if none/fixed
    std::optional<double> fixed_objective;
};

namespace detail {

inline void add_outer(Matrix& dst, const Matrix& left, int lc, const Matrix& right, int rr,
                      int row0, int col0, double w) {
    for (int i = 0; i < left.rows(); ++i) {
        const double li = left(i, lc);
        if (li == 0.0)
            continue;
        for (int j = 0; j < right.cols(); ++j)
            dst(row0 + i, col0 + j) += w * li * right(rr, j);
    }
}

inline void place(Matrix& big, const Matrix& contrib, int row0, int col0, bool mirror) {
    for (int i = 0; i < contrib.rows(); ++i)
        for (int j = 0; j < contrib.cols(); ++j) {
            big(row0 + i, col0 + j) += contrib(i, j);
            if (mirror)
                big(col0 + j, row0 + i) += contrib(i, j);
        }
}

}  // namespace detail

/// Vectorizes the matrix variables of an LmiProblem and converts every
/// constraint into a PSD standard-form block. When fix_objective holds a
/// value, the objective variable is substituted as a constant (used by the
/// bisection solver and feasibility probes).
inline StdProblem standardize(const lmi::LmiProblem& p, std::optional<double> fix_objective,
                              bool equilibrate = true) {
    StdProblem std_p;
    std_p.fixed_objective = fix_objective;

    const auto& vars = p.variables();
    std_p.layout.resize(vars.size());
    int next = 0;
    for (const auto& v : vars) {
        if (fix_objective && v.id == p.objective())
            continue;  // substituted
        VarLayout lay;
        lay.offset = next;
        if (v.kind == lmi::VarKind::symmetric) {
            for (int i = 0; i < v.rows; ++i)
                for (int j = i; j < v.cols; ++j)
                    lay.entries.emplace_back(i, j);
        } else {
            for (int i = 0; i < v.rows; ++i)
                for (int j = 0; j < v.cols; ++j)
                    lay.entries.emplace_back(i, j);
        }
        next += static_cast<int>(lay.entries.size());
        std_p.layout[static_cast<std::size_t>(v.id)] = std::move(lay);
    }
    std_p.nvars = next;
    std_p.c.assign(static_cast<std::size_t>(next), 0.0);
    if (p.has_objective() && !fix_objective) {
        std_p.objective_var = p.objective();
        std_p.c[static_cast<std::size_t>(std_p.layout[static_cast<std::size_t>(p.objective())].offset)] =
            1.0;
    }

    auto scalar_index = [&](int var, int i, int j) -> int {
        const auto& lay = std_p.layout[static_cast<std::size_t>(var)];
        const auto& v = vars[static_cast<std::size_t>(var)];
        if (v.kind == lmi::VarKind::symmetric && i > j)
            std::swap(i, j);
        for (std::size_t k = 0; k < lay.entries.size(); ++k)
            if (lay.entries[k].first == i && lay.entries[k].second == j)
                return lay.offset + static_cast<int>(k);
        throw StructuralError("standardize: entry index out of range for variable '" + v.name + "'");
    };

    for (const auto& cons : p.constraints()) {
        const int dim = cons.dim();
        Matrix f0(dim, dim);
        Matrix f0_subst(dim, dim);    // substituted fixed-objective terms
        std::vector<Matrix> contrib;  // dense per scalar var, allocated lazily
        std::vector<int> touched;
        std::vector<int> touch_map(static_cast<std::size_t>(next), -1);
        auto accum = [&](int k) -> Matrix& {
            int& slot = touch_map[static_cast<std::size_t>(k)];
            if (slot < 0) {
                slot = static_cast<int>(contrib.size());
                touched.push_back(k);
                contrib.emplace_back(dim, dim);
            }
            return contrib[static_cast<std::size_t>(slot)];
        };

        BlockSpec layout_spec(cons.block_dims());
        for (const auto& [key, block] : cons.blocks()) {
            const auto [bi, bj] = key;
            const int r0 = layout_spec.row_offset(bi);
            const int c0 = layout_spec.col_offset(bj);
            const bool mirror = bi != bj;
            detail::place(f0, block.constant(), r0, c0, mirror);

            for (const auto& term : block.terms()) {
                const auto& v = vars[static_cast<std::size_t>(term.var)];
                const bool fixed = fix_objective && term.var == p.objective();
                if (term.scalar) {
                    if (fixed) {
                        detail::place(f0_subst, term.left * (*fix_objective), r0, c0, mirror);
                    } else {
                        const int k = std_p.layout[static_cast<std::size_t>(term.var)].offset;
                        detail::place(accum(k), term.left, r0, c0, mirror);
                    }
                    continue;
                }
                // Matrix variable: d(term)/d(v_ij) = left * E_ij * right with
                // E transposed when the term uses V^T.
                const auto& lay = std_p.layout[static_cast<std::size_t>(term.var)];
                for (std::size_t s = 0; s < lay.entries.size(); ++s) {
                    const auto [ei, ej] = lay.entries[s];
                    Matrix& dst = accum(lay.offset + static_cast<int>(s));
                    Matrix local(block.rows(), block.cols());
                    auto add_pair = [&](int a, int b) {
                        const int lc = term.transposed ? b : a;
                        const int rr = term.transposed ? a : b;
                        detail::add_outer(local, term.left, lc, term.right, rr, 0, 0, 1.0);
                    };
                    add_pair(ei, ej);
                    if (v.kind == lmi::VarKind::symmetric && ei != ej)
                        add_pair(ej, ei);
                    detail::place(dst, local, r0, c0, mirror);
                }
            }
        }

        // Symmetry of the assembled constraint must hold identically in the
        // variables: check the constant and every coefficient.
        auto check_sym = [&](const Matrix& m, const std::string& what) {
            const double scale = std::max(1.0, m.max_abs());
            if (!m.is_symmetric(1e-8 * scale))
                throw StructuralError("constraint '" + cons.label() + "': " + what +
                                      " breaks symmetry of the assembled matrix");
        };
        check_sym(f0, "constant part");
        check_sym(f0_subst, "substituted objective part");
        for (std::size_t t = 0; t < touched.size(); ++t)
            check_sym(contrib[t], "coefficient of a variable entry");

        StdBlock sb;
        sb.dim = dim;
        sb.label = cons.label();
        const double sign = cons.sense() == lmi::Sense::negative_definite ? -1.0 : 1.0;
        sb.f0 = (f0 + f0_subst) * sign;
        if (cons.sense() == lmi::Sense::negative_definite) {
            // The strictness shift is anchored to the constraint's modeled
            // constant block so that probes with a pinned objective pose the
            // same shifted family as the free problem.
            const double eps = 1e-6 * (1.0 + f0.frobenius_norm());
            for (int i = 0; i < dim; ++i)
                sb.f0(i, i) -= eps;
        }
        for (std::size_t t = 0; t < touched.size(); ++t) {
            sb.vars.push_back(touched[t]);
            sb.coeff.push_back(contrib[t] * sign);
        }
        std_p.blocks.push_back(std::move(sb));
    }

    for (const auto& bound : p.scalar_bounds()) {
        StdBlock sb;
        sb.dim = 1;
        sb.label = bound.label;
        double rhs = bound.rhs;
        std::vector<std::pair<int, double>> lin;
        for (const auto& t : bound.terms) {
            if (fix_objective && t.var == p.objective()) {
                rhs -= t.coeff * (*fix_objective);
                continue;
            }
            lin.emplace_back(scalar_index(t.var, t.row, t.col), -t.coeff);
        }
        sb.f0 = Matrix{{rhs}};
        for (auto [k, w] : lin) {
            sb.vars.push_back(k);
            sb.coeff.push_back(Matrix{{w}});
        }
        std_p.blocks.push_back(std::move(sb));
    }

    // Block equilibration (Ruiz-style, two passes) followed by variable
    // scaling. Both are congruences / reparameterizations that leave the
    // feasible set unchanged.
    if (!equilibrate) {
        std_p.var_scale.assign(static_cast<std::size_t>(next), 1.0);
        return std_p;
    }
    for (auto& b : std_p.blocks) {
        Vec d(static_cast<std::size_t>(b.dim), 1.0);
        for (int pass = 0; pass < 2; ++pass) {
            Vec rownorm(static_cast<std::size_t>(b.dim), 0.0);
            auto absorb = [&](const Matrix& m) {
                for (int i = 0; i < b.dim; ++i)
                    for (int j = 0; j < b.dim; ++j)
                        rownorm[static_cast<std::size_t>(i)] =
                            std::max(rownorm[static_cast<std::size_t>(i)], std::abs(m(i, j)));
            };
            absorb(b.f0);
            for (const auto& m : b.coeff)
                absorb(m);
            Vec s(static_cast<std::size_t>(b.dim), 1.0);
            for (int i = 0; i < b.dim; ++i) {
                double r = rownorm[static_cast<std::size_t>(i)];
                if (r > 0.0)
                    s[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(r);
                s[static_cast<std::size_t>(i)] =
                    std::clamp(s[static_cast<std::size_t>(i)], 1e-5, 1e5);
            }
            auto scale = [&](Matrix& m) {
                for (int i = 0; i < b.dim; ++i)
                    for (int j = 0; j < b.dim; ++j)
                        m(i, j) *= s[static_cast<std::size_t>(i)] * s[static_cast<std::size_t>(j)];
            };
            scale(b.f0);
            for (auto& m : b.coeff)
                scale(m);
            for (int i = 0; i < b.dim; ++i)
                d[static_cast<std::size_t>(i)] *= s[static_cast<std::size_t>(i)];
        }
    }

    std_p.var_scale.assign(static_cast<std::size_t>(next), 1.0);
    Vec colnorm(static_cast<std::size_t>(next), 0.0);
    for (const auto& b : std_p.blocks)
        for (std::size_t t = 0; t < b.vars.size(); ++t)
            colnorm[static_cast<std::size_t>(b.vars[t])] =
                std::max(colnorm[static_cast<std::size_t>(b.vars[t])], b.coeff[t].max_abs());
    for (int k = 0; k < next; ++k) {
        double g = colnorm[static_cast<std::size_t>(k)];
        std_p.var_scale[static_cast<std::size_t>(k)] = g > 0.0 ? std::clamp(1.0 / g, 1e-6, 1e6) : 1.0;
    }
    for (auto& b : std_p.blocks)
        for (std::size_t t = 0; t < b.vars.size(); ++t)
            b.coeff[t] *= std_p.var_scale[static_cast<std::size_t>(b.vars[t])];
    for (int k = 0; k < next; ++k)
        std_p.c[static_cast<std::size_t>(k)] *= std_p.var_scale[static_cast<std::size_t>(k)];

    return std_p;
}

/// Maps a scaled standard-form solution back onto the problem variables.
inline lmi::Assignment assignment_from(const lmi::LmiProblem& p, const StdProblem& std_p,
                                       const Vec& y_scaled) {
    lmi::Assignment a(static_cast<int>(p.variables().size()));
    for (const auto& v : p.variables()) {
        if (std_p.fixed_objective && v.id == p.objective()) {
            a.set(v, *std_p.fixed_objective);
            continue;
        }
        const auto& lay = std_p.layout[static_cast<std::size_t>(v.id)];
        Matrix m(v.rows, v.cols);
        for (std::size_t s = 0; s < lay.entries.size(); ++s) {
            const int k = lay.offset + static_cast<int>(s);
            const double value =
                std_p.var_scale[static_cast<std::size_t>(k)] * y_scaled[static_cast<std::size_t>(k)];
            const auto [i, j] = lay.entries[s];
            m(i, j) = value;
            if (v.kind == lmi::VarKind::symmetric && i != j)
                m(j, i) = value;
        }
        a.set(v, std::move(m));
    }
    return a;
}

// ---------------------------------------------------------------------------
// Interior-point method (Nesterov-Todd scaling, Mehrotra-style sigma)
// ---------------------------------------------------------------------------

struct IpmOptions {
    int max_iter = 200;
    double tol_gap = 1e-9;
    double tol_feas = 1e-9;
    double tau = 0.98;
    bool trace = false;
    /// Optional per-iteration early stop; receives the unscaled-by-iteration y.
    std::function<bool(const Vec&)> stop_early;
};

enum class IpmStatus { optimal, early_stop, max_iter, stalled, unbounded };

struct IpmResult {
    IpmStatus status = IpmStatus::max_iter;
    Vec y;
    double pobj = 0.0;
    int iterations = 0;
    double gap = 0.0, pinf = 0.0, dinf = 0.0;
};

namespace detail {

inline Matrix sym_part(const Matrix& m) {
    Matrix r(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            r(i, j) = 0.5 * (m(i, j) + m(j, i));
    return r;
}

struct SpectralSplit {
    Matrix half, inv_half, inv;
};

// Spectral square root family of a symmetric PD matrix, with eigenvalue
// flooring against roundoff.
inline SpectralSplit spectral_split(const Matrix& m) {
    auto eig = eigh(SymMatrix::symmetrized(m));
    const int n = m.rows();
    double lmax = 0.0;
    for (double v : eig.values)
        lmax = std::max(lmax, std::abs(v));
    const double floor_v = std::max(lmax, 1.0) * 1e-15;
    SpectralSplit out{Matrix(n, n), Matrix(n, n), Matrix(n, n)};
    for (int k = 0; k < n; ++k) {
        const double lam = std::max(eig.values[k], floor_v);
        const double rh = std::sqrt(lam);
        for (int i = 0; i < n; ++i) {
            const double uik = eig.vectors(i, k);
            for (int j = 0; j < n; ++j) {
                const double u = uik * eig.vectors(j, k);
                out.half(i, j) += rh * u;
                out.inv_half(i, j) += u / rh;
                out.inv(i, j) += u / lam;
            }
        }
    }
    return out;
}

// Largest alpha with S + alpha*D >= 0, for S > 0.
inline double max_step(const Matrix& s, const Matrix& d) {
    auto l = cholesky(SymMatrix::symmetrized(s));
    if (!l)
        return 0.0;
    const int n = s.rows();
    // B = L^-1 D L^-T
    Matrix w(n, n);
    for (int col = 0; col < n; ++col) {
        Vec b(n);
        for (int i = 0; i < n; ++i)
            b[static_cast<std::size_t>(i)] = d(i, col);
        Vec x = forward_substitute(*l, b);
        for (int i = 0; i < n; ++i)
            w(i, col) = x[static_cast<std::size_t>(i)];
    }
    Matrix wt = w.transpose();
    Matrix bmat(n, n);
    for (int col = 0; col < n; ++col) {
        Vec b(n);
        for (int i = 0; i < n; ++i)
            b[static_cast<std::size_t>(i)] = wt(i, col);
        Vec x = forward_substitute(*l, b);
        for (int i = 0; i < n; ++i)
            bmat(i, col) = x[static_cast<std::size_t>(i)];
    }
    const double lmin = eigh(SymMatrix::symmetrized(bmat.transpose())).values.front();
    if (lmin >= -1e-16)
        return std::numeric_limits<double>::infinity();
    return -1.0 / lmin;
}

}  // namespace detail

/// Infeasible-start primal-dual path following on the standard form.
inline IpmResult ipm_minimize(const StdProblem& sp, const IpmOptions& opts = {}) {
    struct Work {
        Matrix S, Z, G, Zinv;
        std::vector<Matrix> P;
        std::vector<double> coeff_norm;
        Matrix rp;
    };
    const int m = sp.nvars;
    const std::size_t nb = sp.blocks.size();
    std::vector<Work> wk(nb);
    int ntotal = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        const int d = sp.blocks[b].dim;
        ntotal += d;
        const double s0 = 1.0 + sp.blocks[b].f0.frobenius_norm();
        wk[b].S = Matrix::identity(d) * s0;
        wk[b].Z = Matrix::identity(d);
        wk[b].P.resize(sp.blocks[b].vars.size());
        for (const auto& f : sp.blocks[b].coeff)
            wk[b].coeff_norm.push_back(f.frobenius_norm());
    }

    Vec y(static_cast<std::size_t>(m), 0.0);
    double cnorm = norm2(sp.c);

    IpmResult res;
    res.y = y;

    Vec rd(static_cast<std::size_t>(m));
    Vec rhs(static_cast<std::size_t>(m));
    std::vector<Matrix> dS(nb), dZ(nb), X(nb);
    double best_merit = std::numeric_limits<double>::infinity();
    int last_progress = 0;

    for (int iter = 0; iter < opts.max_iter; ++iter) {
        res.iterations = iter;

        // Residuals, measured backward-error style: the attainable primal
        // residual floor scales with the magnitudes |y_k| * ||F_k||.
        double pinf = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& blk = sp.blocks[b];
            Matrix fy = blk.f0;
            double scale = 1.0 + blk.f0.frobenius_norm();
            for (std::size_t t = 0; t < blk.vars.size(); ++t) {
                const double w = y[static_cast<std::size_t>(blk.vars[t])];
                fy += blk.coeff[t] * w;
                scale += std::abs(w) * wk[b].coeff_norm[t];
            }
            wk[b].rp = fy - wk[b].S;
            pinf = std::max(pinf, wk[b].rp.frobenius_norm() / scale);
        }
        for (int k = 0; k < m; ++k)
            rd[static_cast<std::size_t>(k)] = sp.c[static_cast<std::size_t>(k)];
        Vec rd_scale(static_cast<std::size_t>(m), 1.0 + cnorm);
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& blk = sp.blocks[b];
            const double znorm = wk[b].Z.frobenius_norm();
            for (std::size_t t = 0; t < blk.vars.size(); ++t) {
                rd[static_cast<std::size_t>(blk.vars[t])] -= inner(blk.coeff[t], wk[b].Z);
                rd_scale[static_cast<std::size_t>(blk.vars[t])] += wk[b].coeff_norm[t] * znorm;
            }
        }
        double dinf = 0.0;
        for (int k = 0; k < m; ++k)
            dinf = std::max(dinf, std::abs(rd[static_cast<std::size_t>(k)]) /
                                      rd_scale[static_cast<std::size_t>(k)]);

        double gap = 0.0, dobj = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            gap += inner(wk[b].S, wk[b].Z);
            dobj -= inner(sp.blocks[b].f0, wk[b].Z);
        }
        const double pobj = dot(sp.c, y);
        const double mu = gap / std::max(1, ntotal);
        const double relgap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));

        res.y = y;
        res.pobj = pobj;
        res.gap = relgap;
        res.pinf = pinf;
        res.dinf = dinf;

        if (opts.trace)
            std::fprintf(stderr, "ipm %3d pobj=% .6e mu=%.3e relgap=%.3e pinf=%.3e dinf=%.3e\n",
                         iter, pobj, mu, relgap, pinf, dinf);

        if (pinf <= opts.tol_feas && dinf <= opts.tol_feas && relgap <= opts.tol_gap) {
            res.status = IpmStatus::optimal;
            return res;
        }
        if (opts.stop_early && opts.stop_early(y)) {
            res.status = IpmStatus::early_stop;
            return res;
        }
        if (pobj < -1e12 && pinf < 1e-6) {
            res.status = IpmStatus::unbounded;
            return res;
        }
        const double merit = std::max({pinf, dinf, relgap});
        if (merit < 0.75 * best_merit) {
            best_merit = merit;
            last_progress = iter;
        }
        if (iter - last_progress > 25) {
            res.status = IpmStatus::stalled;
            return res;
        }

        // Nesterov-Todd scaling point per block: G = W^-1 with W Z W = S.
        for (std::size_t b = 0; b < nb; ++b) {
            auto s_split = detail::spectral_split(wk[b].S);
            Matrix t = detail::sym_part(s_split.half * wk[b].Z * s_split.half);
            auto t_split = detail::spectral_split(t);
            wk[b].G = detail::sym_part(s_split.inv_half * t_split.half * s_split.inv_half);
            wk[b].Zinv = detail::sym_part(s_split.half * t_split.inv * s_split.half);
            const auto& blk = sp.blocks[b];
            for (std::size_t tt = 0; tt < blk.vars.size(); ++tt)
                wk[b].P[tt] = detail::sym_part(wk[b].G * blk.coeff[tt] * wk[b].G);
        }

        // Schur complement O_jk = sum_b <F_j, G F_k G>.
        SymMatrix schur(std::max(1, m));
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& blk = sp.blocks[b];
            for (std::size_t t1 = 0; t1 < blk.vars.size(); ++t1)
                for (std::size_t t2 = t1; t2 < blk.vars.size(); ++t2)
                    schur.add(blk.vars[t1], blk.vars[t2], inner(wk[b].P[t1], blk.coeff[t2]));
        }
        std::optional<Matrix> chol_l;
        double base = 0.0;
        for (int i = 0; i < m; ++i)
            base = std::max(base, std::abs(schur(i, i)));
        for (double ridge : {0.0, 1e-13, 1e-10, 1e-7}) {
            SymMatrix trial = schur;
            for (int i = 0; i < m; ++i)
                trial.add(i, i, ridge * std::max(base, 1.0));
            chol_l = cholesky(trial);
            if (chol_l)
                break;
        }
        if (!chol_l) {
            res.status = IpmStatus::stalled;
            return res;
        }

        auto solve_direction = [&](double sigma_mu, std::vector<Matrix>& dS_out,
                                   std::vector<Matrix>& dZ_out, Vec& dy_out) {
            for (std::size_t b = 0; b < nb; ++b) {
                // r_c = sigma*mu*Z^-1 - S ; X = G (r_c - r_p) G
                Matrix rc = wk[b].Zinv * sigma_mu - wk[b].S - wk[b].rp;
                X[b] = detail::sym_part(wk[b].G * rc * wk[b].G);
            }
            for (int k = 0; k < m; ++k)
                rhs[static_cast<std::size_t>(k)] = -rd[static_cast<std::size_t>(k)];
            for (std::size_t b = 0; b < nb; ++b) {
                const auto& blk = sp.blocks[b];
                for (std::size_t t = 0; t < blk.vars.size(); ++t)
                    rhs[static_cast<std::size_t>(blk.vars[t])] += inner(blk.coeff[t], X[b]);
            }
            dy_out = backward_substitute(*chol_l, forward_substitute(*chol_l, rhs));
            for (std::size_t b = 0; b < nb; ++b) {
                const auto& blk = sp.blocks[b];
                Matrix ds = wk[b].rp;
                Matrix dz = X[b];
                for (std::size_t t = 0; t < blk.vars.size(); ++t) {
                    const double w = dy_out[static_cast<std::size_t>(blk.vars[t])];
                    ds += blk.coeff[t] * w;
                    dz -= wk[b].P[t] * w;
                }
                dS_out[b] = detail::sym_part(ds);
                dZ_out[b] = detail::sym_part(dz);
            }
        };

        auto step_lengths = [&](const std::vector<Matrix>& dS_in, const std::vector<Matrix>& dZ_in) {
            double ap = 1.0, ad = 1.0;
            for (std::size_t b = 0; b < nb; ++b) {
                ap = std::min(ap, opts.tau * detail::max_step(wk[b].S, dS_in[b]));
                ad = std::min(ad, opts.tau * detail::max_step(wk[b].Z, dZ_in[b]));
            }
            return std::make_pair(std::min(ap, 1.0), std::min(ad, 1.0));
        };

        // Predictor (affine) step for the centering parameter.
        Vec dy_aff;
        solve_direction(0.0, dS, dZ, dy_aff);
        auto [apa, ada] = step_lengths(dS, dZ);
        double mu_aff = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            Matrix s_try = wk[b].S + dS[b] * apa;
            Matrix z_try = wk[b].Z + dZ[b] * ada;
            mu_aff += inner(s_try, z_try);
        }
        mu_aff = std::max(mu_aff / std::max(1, ntotal), 0.0);
        double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
        sigma = std::clamp(sigma, 1e-8, 0.9999);

        // Combined step.
        Vec dy;
        solve_direction(sigma * mu, dS, dZ, dy);
        auto [ap, ad] = step_lengths(dS, dZ);

        if (ap < 1e-8 && ad < 1e-8) {
            res.status = IpmStatus::stalled;
            return res;
        }

        for (int k = 0; k < m; ++k)
            y[static_cast<std::size_t>(k)] += ap * dy[static_cast<std::size_t>(k)];
        for (std::size_t b = 0; b < nb; ++b) {
            wk[b].S = detail::sym_part(wk[b].S + dS[b] * ap);
            wk[b].Z = detail::sym_part(wk[b].Z + dZ[b] * ad);
        }
    }

    res.status = IpmStatus::max_iter;
    return res;
}

// ---------------------------------------------------------------------------
// Phase I: maximize the margin t with F_b(y) - t I >= 0.
// ---------------------------------------------------------------------------

struct MarginResult {
    bool feasible = false;
    double margin = 0.0;  // min over blocks of lambda_min(F_b(y)), scaled units
    Vec y;                // scaled coordinates, without the margin variable
    int iterations = 0;
};

/// True margin of a candidate point on the (scaled) standard form.
inline double point_margin(const StdProblem& sp, const Vec& y) {
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& blk : sp.blocks) {
        Matrix fy = blk.f0;
        for (std::size_t t = 0; t < blk.vars.size(); ++t)
            fy += blk.coeff[t] * y[static_cast<std::size_t>(blk.vars[t])];
        margin = std::min(margin, eigh(SymMatrix::symmetrized(fy)).values.front());
    }
    return margin;
}

/// Phase-I feasibility probe. feasibility_threshold is the margin above which
/// the problem is declared strictly feasible; iteration may stop early as
/// soon as such a point is seen.
inline MarginResult max_margin(const StdProblem& sp, double feasibility_threshold = 1e-9,
                               bool allow_early_stop = true, int max_iter = 200) {
    StdProblem aug = sp;
    const int tvar = aug.nvars;
    aug.nvars += 1;
    aug.c.assign(static_cast<std::size_t>(aug.nvars), 0.0);
    aug.c[static_cast<std::size_t>(tvar)] = -1.0;  // maximize t
    aug.var_scale.push_back(1.0);
    for (auto& blk : aug.blocks) {
        Matrix mt = Matrix::identity(blk.dim) * -1.0;
        blk.vars.push_back(tvar);
        blk.coeff.push_back(std::move(mt));
    }
    StdBlock cap;
    cap.dim = 1;
    cap.label = "_margin_cap";
    cap.f0 = Matrix{{1e6}};
    cap.vars.push_back(tvar);
    cap.coeff.push_back(Matrix{{-1.0}});
    aug.blocks.push_back(std::move(cap));
    // Box caps on the decision variables. The margin objective leaves flat
    // directions (variables that only help feasibility by growing); unbounded
    // drift along them wrecks the attainable residual floor. The box is far
    // outside any sensible solution and does not change the verdict.
    for (int k = 0; k < sp.nvars; ++k) {
        const double box = 1e7;
        StdBlock lo, hi;
        lo.dim = hi.dim = 1;
        lo.label = hi.label = "_box";
        lo.f0 = Matrix{{box}};
        lo.vars.push_back(k);
        lo.coeff.push_back(Matrix{{1.0}});
        hi.f0 = Matrix{{box}};
        hi.vars.push_back(k);
        hi.coeff.push_back(Matrix{{-1.0}});
        aug.blocks.push_back(std::move(lo));
        aug.blocks.push_back(std::move(hi));
    }

    IpmOptions opts;
    opts.max_iter = max_iter;
    // Modest accuracy suffices for a feasibility verdict.
    opts.tol_gap = 1e-10;
    opts.tol_feas = 1e-10;
    MarginResult out;
    if (allow_early_stop) {
        opts.stop_early = [&](const Vec& y) {
            if (y[static_cast<std::size_t>(tvar)] <= 2.0 * feasibility_threshold)
                return false;
            Vec trimmed(y.begin(), y.end() - 1);
            return point_margin(sp, trimmed) > feasibility_threshold;
        };
    }
    IpmResult r = ipm_minimize(aug, opts);
    out.iterations = r.iterations;
    out.y.assign(r.y.begin(), r.y.end() - 1);
    out.margin = point_margin(sp, out.y);
    out.feasible = out.margin > feasibility_threshold;
    return out;
}

}  // namespace it2mpc::sdp

namespace it2mpc::lmi {

struct SolveOptions {
    int max_iter = 200;
    double tol_gap = 1e-9;
    double tol_feas = 1e-9;
    double feasibility_threshold = 1e-9;
};

enum class SolveStatus { feasible, infeasible, no_certificate };

struct SolveResult {
    SolveStatus status = SolveStatus::no_certificate;
    Assignment assignment;
    double objective = 0.0;
    int iterations = 0;
    std::string note;
};

/// Minimizes the scalar objective subject to the problem's matrix
/// inequalities (or finds a strictly feasible point when no objective is
/// set). Deterministic; infeasibility is decided by a max-margin phase I.
inline SolveResult solve(const LmiProblem& p, const SolveOptions& opts = {}) {
    p.validate();
    sdp::StdProblem sp = sdp::standardize(p, std::nullopt);
    SolveResult out;

    if (!p.has_objective()) {
        auto mm = sdp::max_margin(sp, opts.feasibility_threshold, true, opts.max_iter);
        out.iterations = mm.iterations;
        if (!mm.feasible) {
            out.status = SolveStatus::infeasible;
            out.note = "phase-I margin " + std::to_string(mm.margin);
            return out;
        }
        out.status = SolveStatus::feasible;
        out.assignment = sdp::assignment_from(p, sp, mm.y);
        return out;
    }

    sdp::IpmOptions iopts;
    iopts.max_iter = opts.max_iter;
    iopts.tol_gap = opts.tol_gap;
    iopts.tol_feas = opts.tol_feas;
    sdp::IpmResult r = sdp::ipm_minimize(sp, iopts);
    out.iterations = r.iterations;
    if (r.status == sdp::IpmStatus::optimal) {
        out.status = SolveStatus::feasible;
        out.assignment = sdp::assignment_from(p, sp, r.y);
        out.objective = out.assignment.scalar(p.variable(p.objective()));
        return out;
    }
    if (r.status == sdp::IpmStatus::unbounded) {
        out.status = SolveStatus::no_certificate;
        out.note = "objective appears unbounded below";
        return out;
    }

    auto mm = sdp::max_margin(sp, opts.feasibility_threshold, false, opts.max_iter);
    out.iterations += mm.iterations;
    if (!mm.feasible) {
        out.status = SolveStatus::infeasible;
        out.note = "phase-I margin " + std::to_string(mm.margin);
        return out;
    }
    out.status = SolveStatus::no_certificate;
    out.note = "interior point did not converge on a feasible problem";
    return out;
}

/// Solves the problem with the scalar objective pinned to a constant,
/// returning a centered feasibility witness at that level.
inline SolveResult solve_at_fixed_objective(const LmiProblem& p, double value,
                                            const SolveOptions& opts = {}) {
    p.validate();
    if (!p.has_objective())
        throw StructuralError("solve_at_fixed_objective: problem has no scalar objective");
    sdp::StdProblem sp = sdp::standardize(p, value);
    auto mm = sdp::max_margin(sp, opts.feasibility_threshold, true, opts.max_iter);
    SolveResult out;
    out.iterations = mm.iterations;
    if (!mm.feasible) {
        out.status = SolveStatus::infeasible;
        out.note = "phase-I margin " + std::to_string(mm.margin) + " at pinned objective";
        return out;
    }
    out.status = SolveStatus::feasible;
    out.objective = value;
    out.assignment = sdp::assignment_from(p, sp, mm.y);
    return out;
}

/// Independent oracle for scalar-objective problems: bisects the objective,
/// deciding each trial value with the phase-I feasibility probe.
inline SolveResult solve_bisection(const LmiProblem& p, double lo, double hi,
                                   const SolveOptions& opts = {}) {
    p.validate();
    if (!p.has_objective())
        throw StructuralError("solve_bisection: problem has no scalar objective");
    if (!(lo < hi))
        throw StructuralError("solve_bisection: need lo < hi");

    auto probe = [&](double value) -> std::optional<std::pair<sdp::StdProblem, Vec>> {
        sdp::StdProblem sp = sdp::standardize(p, value);
        auto mm = sdp::max_margin(sp, opts.feasibility_threshold, true, opts.max_iter);
        if (!mm.feasible)
            return std::nullopt;
        return std::make_pair(std::move(sp), std::move(mm.y));
    };

    SolveResult out;
    auto at_hi = probe(hi);
    if (!at_hi) {
        out.status = SolveStatus::infeasible;
        out.note = "infeasible at the upper end of the bracket";
        return out;
    }

    double flo = lo, fhi = hi;
    auto witness = std::move(*at_hi);
    if (auto at_lo = probe(lo)) {
        fhi = lo;
        witness = std::move(*at_lo);
    } else {
        const double tol = (hi - lo) * std::pow(2.0, -32);
        while (fhi - flo > tol) {
            const double mid = 0.5 * (flo + fhi);
            if (auto w = probe(mid)) {
                fhi = mid;
                witness = std::move(*w);
            } else {
                flo = mid;
            }
        }
    }

    out.status = SolveStatus::feasible;
    out.objective = fhi;
    out.assignment = sdp::assignment_from(p, witness.first, witness.second);
    return out;
}

}  // namespace it2mpc::lmi
