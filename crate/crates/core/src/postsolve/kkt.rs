//! KKT residuals of a primal-dual pair on the original problem.
//!
//! Sign convention: `c - A'y_eq - C'y_ineq - z = 0` with `z = gamma - phi`,
//! `gamma, phi >= 0`; an inequality dual is nonnegative at its lower bound
//! and nonpositive at its upper bound.

use serde::{Deserialize, Serialize};

use crate::model::LpProblem;

use super::PrimalDualSolution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub objective_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity).max(self.objective_gap)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

fn scaled(v: f64, reference: f64) -> f64 {
    v / (1.0 + reference.abs())
}

/// Largest violation of each condition, each scaled by `1 + |reference|`.
pub fn kkt_residuals(lp: &LpProblem, s: &PrimalDualSolution) -> KktReport {
    let mut rep = KktReport::default();
    let n = lp.n_cols();
    let n_eq = lp.n_eq();
    let act_eq = lp.eq.mul_vec(&s.x);
    let act_in = lp.ineq.mul_vec(&s.x);
    let mut dual_obj = lp.obj_offset;
    for i in 0..n_eq {
        let b = lp.eq_rhs[i];
        rep.primal = rep.primal.max(scaled((act_eq[i] - b).abs(), b));
        dual_obj += b * s.y[i];
    }
    for i in 0..lp.n_ineq() {
        let (d, f, y, a) = (lp.ineq_lower[i], lp.ineq_upper[i], s.y[n_eq + i], act_in[i]);
        if d.is_finite() {
            rep.primal = rep.primal.max(scaled((d - a).max(0.0), d));
        }
        if f.is_finite() {
            rep.primal = rep.primal.max(scaled((a - f).max(0.0), f));
        }
        if y > 0.0 {
            if d.is_finite() {
                rep.complementarity = rep.complementarity.max(scaled(y * (a - d).abs(), d));
                dual_obj += d * y;
            } else {
                rep.dual = rep.dual.max(y);
            }
        } else if y < 0.0 {
            if f.is_finite() {
                rep.complementarity = rep.complementarity.max(scaled(-y * (f - a).abs(), f));
                dual_obj += f * y;
            } else {
                rep.dual = rep.dual.max(-y);
            }
        }
    }
    let at = [lp.eq.transpose().mul_vec(&s.y[..n_eq]), lp.ineq.transpose().mul_vec(&s.y[n_eq..])];
    let mut primal_obj = lp.obj_offset;
    for j in 0..n {
        let v = &lp.vars[j];
        let (x, z) = (s.x[j], s.z[j]);
        primal_obj += v.cost * x;
        if v.lower.is_finite() {
            rep.primal = rep.primal.max(scaled((v.lower - x).max(0.0), v.lower));
        }
        if v.upper.is_finite() {
            rep.primal = rep.primal.max(scaled((x - v.upper).max(0.0), v.upper));
        }
        let stat = v.cost - at[0][j] - at[1][j] - z;
        rep.dual = rep.dual.max(scaled(stat.abs(), v.cost));
        if z > 0.0 {
            if v.lower.is_finite() {
                rep.complementarity = rep.complementarity.max(scaled(z * (x - v.lower).abs(), v.lower));
                dual_obj += z * v.lower;
            } else {
                rep.dual = rep.dual.max(z);
            }
        } else if z < 0.0 {
            if v.upper.is_finite() {
                rep.complementarity = rep.complementarity.max(scaled(-z * (v.upper - x).abs(), v.upper));
                dual_obj += z * v.upper;
            } else {
                rep.dual = rep.dual.max(-z);
            }
        }
    }
    rep.primal_objective = primal_obj;
    rep.dual_objective = dual_obj;
    rep.objective_gap = scaled((primal_obj - dual_obj).abs(), primal_obj);
    rep
}
