// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <optional>
#include <vector>

#include "umda/tensor.hpp"

namespace umda {

// ---------------------------------------------------------------------------
// Confidence distributions and cost maps
// ---------------------------------------------------------------------------

enum class ConfidenceSource { Student, Teacher };

/// Per-sample peak confidences: the response value at the selected cell and
/// its exponential. Cells are flat indices into the H'xW' grid.
struct ConfidenceBatch {
    std::vector<double> scores; // response value at the cell
    std::vector<double> values; // exp(score), always > 0
    std::vector<int> cells;
    int grid_h = 0;
    int grid_w = 0;
    ConfidenceSource source = ConfidenceSource::Student;

    int size() const { return static_cast<int>(values.size()); }
};

/// Builds the confidence batch from flat per-sample response scores
/// (`scores` has n * grid_h * grid_w entries, sample-major). When `anchor`
/// is given the scores are read at those cells; otherwise each sample's own
/// argmax is used, ties broken by the smallest flat index.
ConfidenceBatch confidence_batch(const std::vector<double>& scores, int n, int grid_h, int grid_w,
                                 const std::optional<std::vector<int>>& anchor = std::nullopt,
                                 ConfidenceSource source = ConfidenceSource::Student);

/// N x N transport cost: max-normalized confidence discrepancy plus
/// max-normalized grid distance. Either component collapses to zero when its
/// normalizer is zero.
struct CostMatrix {
    int n = 0;
    std::vector<double> total; // conf + pos, row-major
    std::vector<double> conf;
    std::vector<double> pos;
    int conf_max_i = -1; // argmax pair of the confidence normalizer
    int conf_max_j = -1;
    double conf_max = 0.0;
    double pos_max = 0.0;

    double at(int i, int j) const { return total[static_cast<std::size_t>(i) * n + j]; }
};

CostMatrix cost_map(const ConfidenceBatch& student, const ConfidenceBatch& teacher);

// ---------------------------------------------------------------------------
// Entropic optimal transport
// ---------------------------------------------------------------------------

/// Log-domain Sinkhorn outcome. Potentials are gauge-fixed so mean(mu) = 0;
/// mu pairs with the row marginal a, nu with the column marginal b.
struct SinkhornResult {
    std::vector<double> plan; // n x n, row-major
    std::vector<double> mu;
    std::vector<double> nu;
    int iterations = 0;
    double residual = 0.0; // L1 marginal defect at exit
    bool converged = false;
    double epsilon = 0.0;

    int n() const { return static_cast<int>(mu.size()); }
};

/// Alternating log-domain scaling on K = exp(-C/epsilon) until the L1
/// marginal residual drops below tol or max_iter is exhausted. A
/// non-convergent run is returned with converged = false and the residual
/// filled in; the caller decides what to do with it.
SinkhornResult sinkhorn(const std::vector<double>& cost, const std::vector<double>& a,
                        const std::vector<double>& b, double epsilon, int max_iter = 1000,
                        double tol = 1e-9);

double transport_cost(const std::vector<double>& plan, const std::vector<double>& cost, int n);

/// Dual objective <mu, a> + <nu, b>.
double dual_value(const SinkhornResult& r, const std::vector<double>& a, const std::vector<double>& b);

/// Entropy-corrected primal minus dual; vanishes at convergence.
double primal_dual_gap(const SinkhornResult& r, const std::vector<double>& cost,
                       const std::vector<double>& a, const std::vector<double>& b);

/// Exact discrete Monge-Kantorovich optimum for n <= 6, via a two-phase
/// dense simplex over the transportation polytope. Independent of the
/// Sinkhorn path; used as its validation oracle.
struct LpSolution {
    double cost = 0.0;
    std::vector<double> plan; // n x n, row-major
};

LpSolution lp_oracle(const std::vector<double>& cost, const std::vector<double>& a,
                     const std::vector<double>& b);

// ---------------------------------------------------------------------------
// PSOT loss
// ---------------------------------------------------------------------------

struct PsotConfig {
    double epsilon = 0.05;
    int max_iter = 1000;
    double tol = 1e-9;
    /// When set, the student confidences are read at the teacher's argmax
    /// cells instead of the student's own.
    bool anchor_student_at_teacher = false;
};

struct PsotResult {
    Tensor loss;
    SinkhornResult ot;
    ConfidenceBatch student;
    ConfidenceBatch teacher;
    CostMatrix costs;
    bool converged = true;
};

/// Position-sensitive optimal-transport loss between student and teacher
/// response scores (`[N, H*W]` or `[N, 1, H, W]` tensors of post-sigmoid
/// scores). The dual potentials and transport plan are constants of the
/// backward pass; gradients reach the inputs through the confidence
/// marginals and through the cost entries at the solved plan, which together
/// are the exact local derivative of the converged dual value.
PsotResult psot_loss(const Tensor& student_scores, const Tensor& teacher_scores, int grid_h,
                     int grid_w, const PsotConfig& cfg = {});

} // namespace umda
