//! Local improvement of a lattice argmin off the lattice.
//!
//! Moves transfer mass between two cells along the direction `e_b - e_a`
//! projected onto the null space of the marginal-equality constraints, so
//! every step keeps the `(U, X)`/`(U, Y)` marginals fixed. A move is taken
//! only if the new point is a distribution, stays in the constraint set and
//! strictly lowers the objective.

use nalgebra::{DMatrix, DVector};

use super::lattice::Kind;
use super::measures::{baseline_constraints_hold, baseline_objective, branch_constraints_hold, branch_objective};
use super::{ExponentResult, InputLaw, RatePair, SolverSpec};
use crate::error::Result;
use crate::prob::{axis, projection_map, Channel, JointDist, EQ_TOL};

fn objective(kind: Kind, v: &JointDist, w: &Channel, p: &InputLaw, rates: RatePair, spec: &SolverSpec) -> Result<f64> {
    match kind {
        Kind::Expurgated(b) => branch_objective(b, v, w, p, rates, spec.divergence_weighting),
        Kind::Baseline(b) => baseline_objective(b, v, w, p, rates, spec.divergence_weighting),
    }
}

fn feasible(kind: Kind, v: &JointDist, p: &InputLaw, rates: RatePair, delta: f64, tol: f64) -> Result<bool> {
    match kind {
        Kind::Expurgated(b) => branch_constraints_hold(b, v, p, rates, delta, tol),
        Kind::Baseline(b) => baseline_constraints_hold(b, v, p, rates, delta, tol),
    }
}

/// Rows of the marginal-equality system `A v = b`.
fn marginal_system(v: &JointDist, p: &InputLaw) -> (DMatrix<f64>, DVector<f64>) {
    let labels = v.labels();
    let shape = v.shape();
    let cells = v.probs().len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let upos = labels.iter().position(|&l| l == axis::U).expect("U axis");
    for (pos, &l) in labels.iter().enumerate() {
        let is_x = match l {
            axis::X | axis::X_TILDE => true,
            axis::Y | axis::Y_TILDE => false,
            _ => continue,
        };
        let kept = [shape[upos], shape[pos]];
        let map = projection_map(&shape, &[upos, pos], &kept);
        for u in 0..kept[0] {
            for a in 0..kept[1] {
                let target = if is_x { p.p_ux(u, a) } else { p.p_uy(u, a) };
                let g = u * kept[1] + a;
                rows.push((0..cells).map(|c| if map[c] == g { 1.0 } else { 0.0 }).collect());
                rhs.push(target);
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), cells, |r, c| rows[r][c]);
    (a, DVector::from_vec(rhs))
}

pub(crate) fn refine(
    kind: Kind,
    result: &mut ExponentResult,
    w: &Channel,
    p: &InputLaw,
    rates: RatePair,
    delta: f64,
    spec: &SolverSpec,
) -> Result<()> {
    let Some(start) = result.argmin.clone() else {
        return Ok(());
    };
    if !result.value.is_finite() {
        return Ok(());
    }
    let (a, b) = marginal_system(&start, p);
    let aat_pinv = (&a * a.transpose())
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse of a symmetric matrix");
    let correction = a.transpose() * &aat_pinv;
    let null = DMatrix::identity(a.ncols(), a.ncols()) - &correction * &a;

    let lattice_tol = 0.5 / spec.lattice_denominator as f64 + 1e-9;
    let mut current = DVector::from_column_slice(start.probs());
    let mut value = result.value;
    let mut tol = lattice_tol;
    let build = |x: &DVector<f64>| -> Option<JointDist> {
        if x.iter().any(|&q| q < -1e-15) {
            return None;
        }
        let probs: Vec<f64> = x.iter().map(|&q| q.max(0.0)).collect();
        JointDist::new(start.axes().to_vec(), probs).ok()
    };

    // snap onto the exact marginals when that keeps the point admissible and no worse
    let snapped = &current - &correction * (&a * &current - &b);
    if let Some(v) = build(&snapped) {
        if feasible(kind, &v, p, rates, delta, EQ_TOL)? {
            let f = objective(kind, &v, w, p, rates, spec)?;
            if f <= value {
                current = DVector::from_column_slice(v.probs());
                value = f;
                tol = EQ_TOL;
            }
        }
    }

    let cells = current.len();
    let mut step = 1.0 / (4.0 * spec.lattice_denominator as f64);
    let mut moved = false;
    for _ in 0..spec.refine_steps {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for i in 0..cells {
            if current[i] <= 0.0 {
                continue;
            }
            for j in 0..cells {
                if i == j {
                    continue;
                }
                let dir = null.column(j) - null.column(i);
                if dir.norm() < 1e-12 {
                    continue;
                }
                let cand = &current + step * dir;
                let Some(v) = build(&cand) else { continue };
                if !feasible(kind, &v, p, rates, delta, tol)? {
                    continue;
                }
                let f = objective(kind, &v, w, p, rates, spec)?;
                if f < value - 1e-15 && best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                    best = Some((f, DVector::from_column_slice(v.probs())));
                }
            }
        }
        match best {
            Some((f, x)) => {
                value = f;
                current = x;
                moved = true;
            }
            None => step /= 2.0,
        }
    }

    if moved || value < result.value {
        let v = JointDist::new(start.axes().to_vec(), current.iter().copied().collect())?;
        result.value = objective(kind, &v, w, p, rates, spec)?;
        result.argmin = Some(v);
        result.refined = true;
    }
    Ok(())
}
