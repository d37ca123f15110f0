// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/tca.hpp"

#include <algorithm>
#include <cmath>

namespace umda {

// ---------------------------------------------------------------------------
// Confidence distributions and cost maps
// ---------------------------------------------------------------------------

ConfidenceBatch confidence_batch(const std::vector<double>& scores, int n, int grid_h, int grid_w,
                                 const std::optional<std::vector<int>>& anchor,
                                 ConfidenceSource source) {
    const int hw = grid_h * grid_w;
    if (n < 1) throw ValidationError("confidence_batch: empty batch");
    if (static_cast<int>(scores.size()) != n * hw)
        throw DimensionError("confidence_batch: score length mismatch");
    if (anchor && static_cast<int>(anchor->size()) != n)
        throw ValidationError("confidence_batch: anchor length mismatch");

    ConfidenceBatch cb;
    cb.grid_h = grid_h;
    cb.grid_w = grid_w;
    cb.source = source;
    cb.scores.resize(static_cast<std::size_t>(n));
    cb.values.resize(static_cast<std::size_t>(n));
    cb.cells.resize(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
        int cell;
        if (anchor) {
            cell = (*anchor)[static_cast<std::size_t>(i)];
            if (cell < 0 || cell >= hw) throw ValidationError("confidence_batch: anchor cell out of range");
        } else {
            cell = 0;
            double best = scores[static_cast<std::size_t>(i) * hw];
            for (int p = 1; p < hw; ++p) {
                const double v = scores[static_cast<std::size_t>(i) * hw + p];
                if (v > best) { // strict: ties keep the smallest flat index
                    best = v;
                    cell = p;
                }
            }
        }
        const double s = scores[static_cast<std::size_t>(i) * hw + cell];
        if (!std::isfinite(s)) throw NumericError("confidence_batch: non-finite score");
        cb.cells[static_cast<std::size_t>(i)] = cell;
        cb.scores[static_cast<std::size_t>(i)] = s;
        cb.values[static_cast<std::size_t>(i)] = std::exp(s);
    }
    return cb;
}

CostMatrix cost_map(const ConfidenceBatch& student, const ConfidenceBatch& teacher) {
    const int n = student.size();
    if (n == 0) throw ValidationError("cost_map: empty batch");
    if (teacher.size() != n) throw DimensionError("cost_map: batch sizes differ");
    if (student.grid_w != teacher.grid_w || student.grid_h != teacher.grid_h)
        throw DimensionError("cost_map: grid mismatch");

    CostMatrix cm;
    cm.n = n;
    cm.conf.assign(static_cast<std::size_t>(n) * n, 0.0);
    cm.pos.assign(static_cast<std::size_t>(n) * n, 0.0);
    cm.total.assign(static_cast<std::size_t>(n) * n, 0.0);

    // A single pair has no cross-pair scale; both components degenerate to 0.
    if (n > 1) {
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const double dconf =
                    std::abs(student.scores[static_cast<std::size_t>(i)] - teacher.scores[static_cast<std::size_t>(j)]);
                if (dconf > cm.conf_max) {
                    cm.conf_max = dconf;
                    cm.conf_max_i = i;
                    cm.conf_max_j = j;
                }
                const int sr = student.cells[static_cast<std::size_t>(i)] / student.grid_w;
                const int sc = student.cells[static_cast<std::size_t>(i)] % student.grid_w;
                const int tr = teacher.cells[static_cast<std::size_t>(j)] / teacher.grid_w;
                const int tc = teacher.cells[static_cast<std::size_t>(j)] % teacher.grid_w;
                const double dpos = std::hypot(static_cast<double>(sr - tr), static_cast<double>(sc - tc));
                cm.pos_max = std::max(cm.pos_max, dpos);
                cm.conf[static_cast<std::size_t>(i) * n + j] = dconf;
                cm.pos[static_cast<std::size_t>(i) * n + j] = dpos;
            }
        }
        for (auto& v : cm.conf) v = cm.conf_max > 0.0 ? v / cm.conf_max : 0.0;
        for (auto& v : cm.pos) v = cm.pos_max > 0.0 ? v / cm.pos_max : 0.0;
        for (std::size_t k = 0; k < cm.total.size(); ++k) cm.total[k] = cm.conf[k] + cm.pos[k];
    }
    return cm;
}

// ---------------------------------------------------------------------------
// Entropic optimal transport
// ---------------------------------------------------------------------------

namespace {

void check_marginals(const std::vector<double>& a, const std::vector<double>& b, int n,
                     const char* where) {
    if (n < 1) throw ValidationError(std::string(where) + ": empty marginals");
    double sa = 0.0, sb = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(a[static_cast<std::size_t>(i)] > 0.0) || !(b[static_cast<std::size_t>(i)] > 0.0))
            throw ValidationError(std::string(where) + ": marginals must be positive");
        sa += a[static_cast<std::size_t>(i)];
        sb += b[static_cast<std::size_t>(i)];
    }
    if (std::abs(sa - 1.0) > 1e-6 || std::abs(sb - 1.0) > 1e-6)
        throw ValidationError(std::string(where) + ": marginals must sum to 1");
}

double log_sum_exp(const double* x, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += std::exp(x[i] - mx);
    return mx + std::log(s);
}

} // namespace

SinkhornResult sinkhorn(const std::vector<double>& cost, const std::vector<double>& a,
                        const std::vector<double>& b, double epsilon, int max_iter, double tol) {
    const int n = static_cast<int>(a.size());
    if (static_cast<int>(b.size()) != n) throw DimensionError("sinkhorn: marginal lengths differ");
    if (static_cast<int>(cost.size()) != n * n) throw DimensionError("sinkhorn: cost must be n x n");
    if (!(epsilon > 0.0)) throw ValidationError("sinkhorn: epsilon must be positive");
    if (max_iter < 1) throw ValidationError("sinkhorn: max_iter must be positive");
    check_marginals(a, b, n, "sinkhorn");
    for (double c : cost)
        if (!std::isfinite(c)) throw NumericError("sinkhorn: non-finite cost");

    std::vector<double> f(static_cast<std::size_t>(n), 0.0), g(static_cast<std::size_t>(n), 0.0);
    std::vector<double> loga(static_cast<std::size_t>(n)), logb(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        loga[static_cast<std::size_t>(i)] = std::log(a[static_cast<std::size_t>(i)]);
        logb[static_cast<std::size_t>(i)] = std::log(b[static_cast<std::size_t>(i)]);
    }

    std::vector<double> scratch(static_cast<std::size_t>(n));
    SinkhornResult res;
    res.epsilon = epsilon;

    int it = 0;
    double residual = 0.0;
    for (it = 1; it <= max_iter; ++it) {
        // f_i = eps*(log a_i - LSE_j((g_j - C_ij)/eps))
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                scratch[static_cast<std::size_t>(j)] =
                    (g[static_cast<std::size_t>(j)] - cost[static_cast<std::size_t>(i) * n + j]) / epsilon;
            f[static_cast<std::size_t>(i)] =
                epsilon * (loga[static_cast<std::size_t>(i)] - log_sum_exp(scratch.data(), n));
        }
        // g_j = eps*(log b_j - LSE_i((f_i - C_ij)/eps))
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i)
                scratch[static_cast<std::size_t>(i)] =
                    (f[static_cast<std::size_t>(i)] - cost[static_cast<std::size_t>(i) * n + j]) / epsilon;
            g[static_cast<std::size_t>(j)] =
                epsilon * (logb[static_cast<std::size_t>(j)] - log_sum_exp(scratch.data(), n));
        }
        // After the g-update column sums are exact; the row defect measures
        // convergence.
        residual = 0.0;
        for (int i = 0; i < n; ++i) {
            double rs = 0.0;
            for (int j = 0; j < n; ++j)
                rs += std::exp((f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] -
                                cost[static_cast<std::size_t>(i) * n + j]) /
                               epsilon);
            residual += std::abs(rs - a[static_cast<std::size_t>(i)]);
        }
        if (residual < tol) {
            res.converged = true;
            break;
        }
    }
    res.iterations = std::min(it, max_iter);
    res.residual = residual;

    // Gauge: shift so mean(mu) = 0; the complementary shift on nu leaves the
    // plan and the dual value (mass-1 marginals) unchanged.
    double mf = 0.0;
    for (double v : f) mf += v;
    mf /= n;
    for (auto& v : f) v -= mf;
    for (auto& v : g) v += mf;

    res.mu = f;
    res.nu = g;
    res.plan.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            res.plan[static_cast<std::size_t>(i) * n + j] =
                std::exp((f[static_cast<std::size_t>(i)] + g[static_cast<std::size_t>(j)] -
                          cost[static_cast<std::size_t>(i) * n + j]) /
                         epsilon);
    return res;
}

double transport_cost(const std::vector<double>& plan, const std::vector<double>& cost, int n) {
    if (static_cast<int>(plan.size()) != n * n || static_cast<int>(cost.size()) != n * n)
        throw DimensionError("transport_cost: size mismatch");
    double s = 0.0;
    for (std::size_t k = 0; k < plan.size(); ++k) s += plan[k] * cost[k];
    return s;
}

double dual_value(const SinkhornResult& r, const std::vector<double>& a, const std::vector<double>& b) {
    const int n = r.n();
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        s += r.mu[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(i)] +
             r.nu[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
    return s;
}

double primal_dual_gap(const SinkhornResult& r, const std::vector<double>& cost,
                       const std::vector<double>& a, const std::vector<double>& b) {
    const int n = r.n();
    // Regularized primal: <P,C> + eps * sum P (log P - 1), with log P taken
    // from the potentials so vanishing entries stay well-defined.
    double primal = 0.0;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * n + j;
            const double logp =
                (r.mu[static_cast<std::size_t>(i)] + r.nu[static_cast<std::size_t>(j)] - cost[k]) / r.epsilon;
            const double p = r.plan[k];
            primal += p * cost[k] + r.epsilon * p * (logp - 1.0);
            mass += p;
        }
    }
    const double dual = dual_value(r, a, b) - r.epsilon * mass;
    return primal - dual;
}

// ---------------------------------------------------------------------------
// Exact LP oracle (two-phase simplex with Bland's rule)
// ---------------------------------------------------------------------------

namespace {

constexpr double kPivTol = 1e-11;
constexpr double kCostTol = 1e-10;

struct Simplex {
    int rows = 0;
    int cols = 0; // variable columns (objective and rhs kept separately)
    std::vector<std::vector<double>> t; // rows x (cols + 1), last entry rhs
    std::vector<double> obj;            // reduced costs, cols entries
    std::vector<int> basis;

    double& rhs(int r) { return t[static_cast<std::size_t>(r)][static_cast<std::size_t>(cols)]; }

    void pivot(int pr, int pc) {
        auto& prow = t[static_cast<std::size_t>(pr)];
        const double pv = prow[static_cast<std::size_t>(pc)];
        for (auto& v : prow) v /= pv;
        for (int r = 0; r < rows; ++r) {
            if (r == pr) continue;
            auto& row = t[static_cast<std::size_t>(r)];
            const double factor = row[static_cast<std::size_t>(pc)];
            if (factor == 0.0) continue;
            for (int c = 0; c <= cols; ++c)
                row[static_cast<std::size_t>(c)] -= factor * prow[static_cast<std::size_t>(c)];
        }
        const double ofac = obj[static_cast<std::size_t>(pc)];
        if (ofac != 0.0) {
            for (int c = 0; c < cols; ++c) obj[static_cast<std::size_t>(c)] -= ofac * prow[static_cast<std::size_t>(c)];
            obj_rhs -= ofac * prow[static_cast<std::size_t>(cols)];
        }
        basis[static_cast<std::size_t>(pr)] = pc;
    }

    // Bland's rule: entering = smallest improving column, leaving = minimum
    // ratio with ties broken by the smallest basis variable. Returns false at
    // optimality.
    bool step(int usable_cols) {
        int pc = -1;
        for (int c = 0; c < usable_cols; ++c) {
            if (obj[static_cast<std::size_t>(c)] < -kCostTol) {
                pc = c;
                break;
            }
        }
        if (pc < 0) return false;
        int pr = -1;
        double best = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double coef = t[static_cast<std::size_t>(r)][static_cast<std::size_t>(pc)];
            if (coef > kPivTol) {
                const double ratio = rhs(r) / coef;
                if (pr < 0 || ratio < best - kPivTol ||
                    (std::abs(ratio - best) <= kPivTol &&
                     basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(pr)])) {
                    pr = r;
                    best = ratio;
                }
            }
        }
        if (pr < 0) throw NumericError("lp_oracle: unbounded subproblem");
        pivot(pr, pc);
        return true;
    }

    double obj_rhs = 0.0; // negated objective value
};

} // namespace

LpSolution lp_oracle(const std::vector<double>& cost, const std::vector<double>& a,
                     const std::vector<double>& b) {
    const int n = static_cast<int>(a.size());
    if (n > 6) throw ValidationError("lp_oracle: refuses instances with N > 6");
    if (static_cast<int>(b.size()) != n) throw DimensionError("lp_oracle: marginal lengths differ");
    if (static_cast<int>(cost.size()) != n * n) throw DimensionError("lp_oracle: cost must be n x n");
    check_marginals(a, b, n, "lp_oracle");

    const int nv = n * n;
    const int m = 2 * n - 1; // all row sums + first n-1 column sums (last is implied)

    Simplex sx;
    sx.rows = m;
    sx.cols = nv + m; // original variables + artificials
    sx.t.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(sx.cols + 1), 0.0));
    sx.basis.resize(static_cast<std::size_t>(m));

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) sx.t[static_cast<std::size_t>(i)][static_cast<std::size_t>(i * n + j)] = 1.0;
        sx.rhs(i) = a[static_cast<std::size_t>(i)];
    }
    for (int j = 0; j < n - 1; ++j) {
        const int r = n + j;
        for (int i = 0; i < n; ++i) sx.t[static_cast<std::size_t>(r)][static_cast<std::size_t>(i * n + j)] = 1.0;
        sx.rhs(r) = b[static_cast<std::size_t>(j)];
    }
    for (int r = 0; r < m; ++r) {
        sx.t[static_cast<std::size_t>(r)][static_cast<std::size_t>(nv + r)] = 1.0;
        sx.basis[static_cast<std::size_t>(r)] = nv + r;
    }

    // Phase 1: minimize the artificial mass.
    sx.obj.assign(static_cast<std::size_t>(sx.cols), 0.0);
    sx.obj_rhs = 0.0;
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < nv; ++c) sx.obj[static_cast<std::size_t>(c)] -= sx.t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        sx.obj_rhs -= sx.rhs(r);
    }
    while (sx.step(sx.cols)) {}
    if (-sx.obj_rhs > 1e-7) throw NumericError("lp_oracle: infeasible marginals");

    // Drive any artificial still basic (at zero) out of the basis.
    for (int r = 0; r < m; ++r) {
        if (sx.basis[static_cast<std::size_t>(r)] < nv) continue;
        int pc = -1;
        for (int c = 0; c < nv; ++c) {
            if (std::abs(sx.t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) > kPivTol) {
                pc = c;
                break;
            }
        }
        if (pc < 0) throw NumericError("lp_oracle: unexpected redundant constraint");
        sx.pivot(r, pc);
    }

    // Phase 2: minimize the transport cost over the original columns.
    sx.obj.assign(static_cast<std::size_t>(sx.cols), 0.0);
    for (int c = 0; c < nv; ++c) sx.obj[static_cast<std::size_t>(c)] = cost[static_cast<std::size_t>(c)];
    sx.obj_rhs = 0.0;
    for (int r = 0; r < m; ++r) {
        const int bvar = sx.basis[static_cast<std::size_t>(r)];
        const double cb = cost[static_cast<std::size_t>(bvar)];
        if (cb == 0.0) continue;
        for (int c = 0; c < nv; ++c)
            sx.obj[static_cast<std::size_t>(c)] -= cb * sx.t[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        sx.obj_rhs -= cb * sx.rhs(r);
    }
    while (sx.step(nv)) {} // artificial columns may not re-enter

    LpSolution sol;
    sol.plan.assign(static_cast<std::size_t>(nv), 0.0);
    for (int r = 0; r < m; ++r) {
        const int bvar = sx.basis[static_cast<std::size_t>(r)];
        if (bvar < nv) sol.plan[static_cast<std::size_t>(bvar)] = std::max(0.0, sx.rhs(r));
    }
    sol.cost = transport_cost(sol.plan, cost, n);
    return sol;
}

// ---------------------------------------------------------------------------
// PSOT loss
// ---------------------------------------------------------------------------

PsotResult psot_loss(const Tensor& student_scores, const Tensor& teacher_scores, int grid_h,
                     int grid_w, const PsotConfig& cfg) {
    const int hw = grid_h * grid_w;
    if (hw < 1) throw ValidationError("psot_loss: bad grid");
    if (student_scores.size() != teacher_scores.size())
        throw DimensionError("psot_loss: batch sizes differ");
    if (student_scores.size() % hw != 0) throw DimensionError("psot_loss: score length not divisible by grid");
    const int n = student_scores.size() / hw;

    PsotResult out;
    out.teacher = confidence_batch(teacher_scores.data(), n, grid_h, grid_w, std::nullopt,
                                   ConfidenceSource::Teacher);
    std::optional<std::vector<int>> anchor;
    if (cfg.anchor_student_at_teacher) anchor = out.teacher.cells;
    out.student =
        confidence_batch(student_scores.data(), n, grid_h, grid_w, anchor, ConfidenceSource::Student);
    out.costs = cost_map(out.student, out.teacher);

    // Flat per-sample gather indices for the selected cells.
    std::vector<int> s_idx(static_cast<std::size_t>(n)), t_idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        s_idx[static_cast<std::size_t>(i)] = i * hw + out.student.cells[static_cast<std::size_t>(i)];
        t_idx[static_cast<std::size_t>(i)] = i * hw + out.teacher.cells[static_cast<std::size_t>(i)];
    }

    const Tensor s_at = gather(student_scores, s_idx);
    const Tensor t_at = gather(teacher_scores, t_idx);
    const Tensor d_s = exp_elem(s_at);
    const Tensor d_t = exp_elem(t_at);
    const Tensor one = Tensor::scalar(1.0);
    const Tensor marg_a = scale_by(d_s, div_elem(one, sum(d_s)));
    const Tensor marg_b = scale_by(d_t, div_elem(one, sum(d_t)));

    if (n == 1) {
        // Degenerate single-atom problem: zero cost, zero potentials.
        out.ot = sinkhorn(out.costs.total, {1.0}, {1.0}, cfg.epsilon, cfg.max_iter, cfg.tol);
        out.converged = out.ot.converged;
        out.loss = add(dot(Tensor({1}, out.ot.mu), marg_a), dot(Tensor({1}, out.ot.nu), marg_b));
        return out;
    }

    out.ot = sinkhorn(out.costs.total, marg_a.data(), marg_b.data(), cfg.epsilon, cfg.max_iter, cfg.tol);
    out.converged = out.ot.converged;

    const Tensor mu_const(std::vector<int>{n}, out.ot.mu);
    const Tensor nu_const(std::vector<int>{n}, out.ot.nu);
    Tensor loss = add(dot(mu_const, marg_a), dot(nu_const, marg_b));

    // Value-preserving cost coupling: <P, C(r)> - <P, C(r0)> is zero at the
    // evaluation point but carries the plan-weighted derivative of the cost
    // entries, completing the local derivative of the converged dual value.
    if (out.costs.conf_max > 0.0) {
        const Tensor ones_row(std::vector<int>{1, n}, std::vector<double>(static_cast<std::size_t>(n), 1.0));
        const Tensor ones_col(std::vector<int>{n, 1}, std::vector<double>(static_cast<std::size_t>(n), 1.0));
        const Tensor s_mat = matmul(reshape(s_at, {n, 1}), ones_row);
        const Tensor t_mat = matmul(ones_col, reshape(t_at, {1, n}));
        const Tensor diff = abs_elem(sub(s_mat, t_mat));
        const Tensor norm_s = gather(s_at, {out.costs.conf_max_i});
        const Tensor norm_t = gather(t_at, {out.costs.conf_max_j});
        const Tensor denom = abs_elem(sub(norm_s, norm_t));
        const Tensor conf_expr = scale_by(diff, div_elem(one, denom));
        const Tensor plan_const(std::vector<int>{n, n}, out.ot.plan);
        const Tensor coupling = dot(plan_const, conf_expr);
        loss = add(loss, sub(coupling, coupling.detached()));
    }

    out.loss = loss;
    return out;
}

} // namespace umda
