//! Float-path evaluation of the packing functions, the decoding statistic and
//! the realizability constraints on joint types.
//!
//! Everything here works on a [`JointDist`] and selects variables by axis
//! label, so the same routines serve the refinement step, the codebook audit
//! and the cross-checks against the lattice solver.

use serde::Serialize;

use super::{Branch, DivergenceWeighting, InputLaw, RatePair};
use crate::error::{Error, Result};
use crate::prob::{axis, conditional_entropy, conditional_mutual_information, Channel, JointDist, EQ_TOL};

use axis::{U, X, X_TILDE as XT, Y, Y_TILDE as YT, Z};

fn mi(v: &JointDist, a: &[&str], b: &[&str], c: &[&str]) -> Result<f64> {
    conditional_mutual_information(v, a, b, c)
}

/// `F(V) = I(X ∧ Y | U)`.
pub fn f_value(v: &JointDist) -> Result<f64> {
    mi(v, &[X], &[Y], &[U])
}

/// `F_X(V) = I(X∧Y|U) + I(X~∧Y|U) + I(X~∧X|UY) - R_X`; needs axes `U, X, Y, X~`.
pub fn f_x_value(v: &JointDist, r_x: f64) -> Result<f64> {
    Ok(mi(v, &[X], &[Y], &[U])? + mi(v, &[XT], &[Y], &[U])? + mi(v, &[XT], &[X], &[U, Y])? - r_x)
}

/// `F_Y(V) = I(X∧Y|U) + I(X∧Y~|U) + I(Y~∧Y|UX) - R_Y`; needs axes `U, X, Y, Y~`.
pub fn f_y_value(v: &JointDist, r_y: f64) -> Result<f64> {
    Ok(mi(v, &[X], &[Y], &[U])? + mi(v, &[X], &[YT], &[U])? + mi(v, &[YT], &[Y], &[U, X])? - r_y)
}

/// `F_XY(V) = I(X∧Y|U) + I(X~∧Y~|U) + I(X~Y~∧XY|U) - R_X - R_Y`.
pub fn f_xy_value(v: &JointDist, rates: RatePair) -> Result<f64> {
    Ok(mi(v, &[X], &[Y], &[U])? + mi(v, &[XT], &[YT], &[U])? + mi(v, &[XT, YT], &[X, Y], &[U])?
        - rates.sum())
}

/// The four packing functions of one joint type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FValues {
    pub f: f64,
    pub f_x: f64,
    pub f_y: f64,
    pub f_xy: f64,
}

/// All four packing functions of `v` over `U, X, Y, X~, Y~`.
pub fn f_functions(v: &JointDist, rates: RatePair) -> Result<FValues> {
    let vx = v.marginalize(&[U, X, Y, XT])?;
    let vy = v.marginalize(&[U, X, Y, YT])?;
    Ok(FValues {
        f: f_value(v)?,
        f_x: f_x_value(&vx, rates.r_x)?,
        f_y: f_y_value(&vy, rates.r_y)?,
        f_xy: f_xy_value(v, rates)?,
    })
}

/// `α(V_{UXYZ}) = H(XY | ZU)`.
pub fn alpha_value(v: &JointDist) -> Result<f64> {
    alpha_of(v, X, Y)
}

/// `H(AB | ZU)` for the input pair labelled `(a, b)`, e.g. `(X~, Y)`.
pub fn alpha_of(v: &JointDist, a: &str, b: &str) -> Result<f64> {
    conditional_entropy(v, &[a, b], &[Z, U])
}

/// One realizability condition on a joint type `V_{U X Y X~ Y~}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Lemma4Constraint {
    MarginalX,
    MarginalXTilde,
    MarginalY,
    MarginalYTilde,
    /// `I(X∧Y|U) ≤ m + 3δ`, with `m = min(R_X, R_Y)`.
    PairXY,
    PairXYTilde,
    PairXTildeY,
    PairXTildeYTilde,
    /// `I(X∧Y|U) + I(X~∧Y|U) + I(X~∧X|UY) ≤ R_X + m + 4δ`.
    TripleXTildeY,
    /// `I(X∧Y~|U) + I(X~∧Y~|U) + I(X~∧X|UY~) ≤ R_X + m + 4δ`.
    TripleXTildeYTilde,
    /// `I(X∧Y|U) + I(X∧Y~|U) + I(Y~∧Y|UX) ≤ R_Y + m + 4δ`.
    TripleYTildeX,
    /// `I(X~∧Y|U) + I(X~∧Y~|U) + I(Y~∧Y|UX~) ≤ R_Y + m + 4δ`.
    TripleYTildeXTilde,
    /// `I(X∧Y|U) + I(X~∧Y~|U) + I(X~Y~∧XY|U) ≤ R_X + R_Y + m + 5δ`.
    Quad,
    /// `I(X~∧Y|U) + I(X∧Y~|U) + I(XY~∧X~Y|U) ≤ R_X + R_Y + m + 5δ`.
    QuadCross,
}

impl Lemma4Constraint {
    pub const ALL: [Lemma4Constraint; 14] = [
        Lemma4Constraint::MarginalX,
        Lemma4Constraint::MarginalXTilde,
        Lemma4Constraint::MarginalY,
        Lemma4Constraint::MarginalYTilde,
        Lemma4Constraint::PairXY,
        Lemma4Constraint::PairXYTilde,
        Lemma4Constraint::PairXTildeY,
        Lemma4Constraint::PairXTildeYTilde,
        Lemma4Constraint::TripleXTildeY,
        Lemma4Constraint::TripleXTildeYTilde,
        Lemma4Constraint::TripleYTildeX,
        Lemma4Constraint::TripleYTildeXTilde,
        Lemma4Constraint::Quad,
        Lemma4Constraint::QuadCross,
    ];

    /// Constraints expressible over a branch's variables.
    pub fn for_branch(branch: Branch) -> &'static [Lemma4Constraint] {
        use Lemma4Constraint::*;
        match branch {
            Branch::X => &[MarginalX, MarginalXTilde, MarginalY, PairXY, PairXTildeY, TripleXTildeY],
            Branch::Y => &[MarginalX, MarginalY, MarginalYTilde, PairXY, PairXYTilde, TripleYTildeX],
            Branch::XY => &Self::ALL,
        }
    }

    pub fn is_marginal(&self) -> bool {
        use Lemma4Constraint::*;
        matches!(self, MarginalX | MarginalXTilde | MarginalY | MarginalYTilde)
    }

    /// Only meaningful when the two `X` codewords differ.
    pub fn needs_distinct_x(&self) -> bool {
        use Lemma4Constraint::*;
        matches!(self, TripleXTildeY | TripleXTildeYTilde | Quad | QuadCross)
    }

    /// Only meaningful when the two `Y` codewords differ.
    pub fn needs_distinct_y(&self) -> bool {
        use Lemma4Constraint::*;
        matches!(self, TripleYTildeX | TripleYTildeXTilde | Quad | QuadCross)
    }

    pub fn name(&self) -> &'static str {
        use Lemma4Constraint::*;
        match self {
            MarginalX => "V_XU = P_XU",
            MarginalXTilde => "V_X~U = P_XU",
            MarginalY => "V_YU = P_YU",
            MarginalYTilde => "V_Y~U = P_YU",
            PairXY => "I(X;Y|U)",
            PairXYTilde => "I(X;Y~|U)",
            PairXTildeY => "I(X~;Y|U)",
            PairXTildeYTilde => "I(X~;Y~|U)",
            TripleXTildeY => "I(X;Y|U)+I(X~;Y|U)+I(X~;X|UY)",
            TripleXTildeYTilde => "I(X;Y~|U)+I(X~;Y~|U)+I(X~;X|UY~)",
            TripleYTildeX => "I(X;Y|U)+I(X;Y~|U)+I(Y~;Y|UX)",
            TripleYTildeXTilde => "I(X~;Y|U)+I(X~;Y~|U)+I(Y~;Y|UX~)",
            Quad => "I(X;Y|U)+I(X~;Y~|U)+I(X~Y~;XY|U)",
            QuadCross => "I(X~;Y|U)+I(X;Y~|U)+I(XY~;X~Y|U)",
        }
    }

    /// Right-hand side of an information constraint; `0` for marginal equalities.
    pub fn rhs(&self, rates: RatePair, delta: f64) -> f64 {
        use Lemma4Constraint::*;
        let m = rates.min();
        match self {
            MarginalX | MarginalXTilde | MarginalY | MarginalYTilde => 0.0,
            PairXY | PairXYTilde | PairXTildeY | PairXTildeYTilde => m + 3.0 * delta,
            TripleXTildeY | TripleXTildeYTilde => rates.r_x + m + 4.0 * delta,
            TripleYTildeX | TripleYTildeXTilde => rates.r_y + m + 4.0 * delta,
            Quad | QuadCross => rates.sum() + m + 5.0 * delta,
        }
    }

    /// Left-hand side. For marginal equalities this is the largest cell deviation from `P`.
    pub fn lhs(&self, v: &JointDist, p: &InputLaw) -> Result<f64> {
        use Lemma4Constraint::*;
        Ok(match self {
            MarginalX => marginal_gap(v, X, p, true)?,
            MarginalXTilde => marginal_gap(v, XT, p, true)?,
            MarginalY => marginal_gap(v, Y, p, false)?,
            MarginalYTilde => marginal_gap(v, YT, p, false)?,
            PairXY => mi(v, &[X], &[Y], &[U])?,
            PairXYTilde => mi(v, &[X], &[YT], &[U])?,
            PairXTildeY => mi(v, &[XT], &[Y], &[U])?,
            PairXTildeYTilde => mi(v, &[XT], &[YT], &[U])?,
            TripleXTildeY => mi(v, &[X], &[Y], &[U])? + mi(v, &[XT], &[Y], &[U])? + mi(v, &[XT], &[X], &[U, Y])?,
            TripleXTildeYTilde => {
                mi(v, &[X], &[YT], &[U])? + mi(v, &[XT], &[YT], &[U])? + mi(v, &[XT], &[X], &[U, YT])?
            }
            TripleYTildeX => mi(v, &[X], &[Y], &[U])? + mi(v, &[X], &[YT], &[U])? + mi(v, &[YT], &[Y], &[U, X])?,
            TripleYTildeXTilde => {
                mi(v, &[XT], &[Y], &[U])? + mi(v, &[XT], &[YT], &[U])? + mi(v, &[YT], &[Y], &[U, XT])?
            }
            Quad => mi(v, &[X], &[Y], &[U])? + mi(v, &[XT], &[YT], &[U])? + mi(v, &[XT, YT], &[X, Y], &[U])?,
            QuadCross => {
                mi(v, &[XT], &[Y], &[U])? + mi(v, &[X], &[YT], &[U])? + mi(v, &[X, YT], &[XT, Y], &[U])?
            }
        })
    }
}

impl std::fmt::Display for Lemma4Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn marginal_gap(v: &JointDist, label: &str, p: &InputLaw, is_x: bool) -> Result<f64> {
    let m = v.marginalize(&[U, label])?;
    let (ku, ka) = (m.shape()[0], m.shape()[1]);
    let want = if is_x { p.x_size() } else { p.y_size() };
    if ku != p.u_size() || ka != want {
        return Err(Error::usage(format!("axis {label:?} does not match the input law")));
    }
    let mut gap: f64 = 0.0;
    for u in 0..ku {
        for a in 0..ka {
            let target = if is_x { p.p_ux(u, a) } else { p.p_uy(u, a) };
            gap = gap.max((m.get(&[u, a]) - target).abs());
        }
    }
    Ok(gap)
}

/// A failed constraint with the values that failed it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma4Violation {
    pub constraint: Lemma4Constraint,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma4Report {
    pub feasible: bool,
    pub violations: Vec<Lemma4Violation>,
}

/// Checks `constraints` on `v`. Marginal equalities pass when every cell is within
/// `marginal_tol` of `P`; information inequalities get an [`EQ_TOL`] slack.
pub fn lemma4_check(
    v: &JointDist,
    p: &InputLaw,
    rates: RatePair,
    delta: f64,
    constraints: &[Lemma4Constraint],
    marginal_tol: f64,
) -> Result<Lemma4Report> {
    let mut violations = Vec::new();
    for &c in constraints {
        let lhs = c.lhs(v, p)?;
        let (rhs, ok) = if c.is_marginal() {
            (marginal_tol, lhs <= marginal_tol)
        } else {
            let rhs = c.rhs(rates, delta);
            (rhs, lhs <= rhs + EQ_TOL)
        };
        if !ok {
            violations.push(Lemma4Violation { constraint: c, lhs, rhs });
        }
    }
    Ok(Lemma4Report {
        feasible: violations.is_empty(),
        violations,
    })
}

/// All realizability conditions on `V_{U X Y X~ Y~}` (marginals within [`EQ_TOL`]).
pub fn lemma4_feasible(v: &JointDist, p: &InputLaw, rates: RatePair, delta: f64) -> Result<Lemma4Report> {
    lemma4_check(v, p, rates, delta, &Lemma4Constraint::ALL, EQ_TOL)
}

/// `D(V_{Z|XYU} ‖ W | ·)` under the chosen weighting; `v` carries `U, X, Y, Z`.
pub(crate) fn divergence(v: &JointDist, w: &Channel, p: &InputLaw, weighting: DivergenceWeighting) -> Result<f64> {
    let m = v.marginalize(&[U, X, Y, Z])?;
    let (ku, kx, ky, kz) = (p.u_size(), p.x_size(), p.y_size(), w.z_size());
    if m.shape() != [ku, kx, ky, kz] {
        return Err(Error::usage("joint does not match the input law and channel alphabets"));
    }
    let mut total = 0.0;
    for u in 0..ku {
        for x in 0..kx {
            for y in 0..ky {
                let row: Vec<f64> = (0..kz).map(|z| m.get(&[u, x, y, z])).collect();
                let mass: f64 = row.iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                let weight = match weighting {
                    DivergenceWeighting::V => mass,
                    DivergenceWeighting::P => p.joint().get(&[u, x, y]),
                };
                if weight <= 0.0 {
                    continue;
                }
                let wr = w.row(x, y);
                let mut d = 0.0;
                for z in 0..kz {
                    if row[z] > 0.0 {
                        if wr[z] <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        d += (row[z] / mass) * (row[z] / (mass * wr[z])).log2();
                    }
                }
                total += weight * d;
            }
        }
    }
    Ok(total)
}

fn positive_part(t: f64) -> f64 {
    t.max(0.0)
}

/// The expurgated branch objective at `v` (branch axes, including `Z`).
pub fn branch_objective(
    branch: Branch,
    v: &JointDist,
    w: &Channel,
    p: &InputLaw,
    rates: RatePair,
    weighting: DivergenceWeighting,
) -> Result<f64> {
    let d = divergence(v, w, p, weighting)?;
    let ixy = mi(v, &[X], &[Y], &[U])?;
    let bracket = match branch {
        Branch::X => mi(v, &[XT], &[X, Z], &[Y, U])? + mi(v, &[XT], &[Y], &[U])? - rates.r_x,
        Branch::Y => mi(v, &[YT], &[Y, Z], &[X, U])? + mi(v, &[X], &[YT], &[U])? - rates.r_y,
        Branch::XY => mi(v, &[XT, YT], &[X, Y, Z], &[U])? + mi(v, &[XT], &[YT], &[U])? - rates.sum(),
    };
    Ok(d + ixy + positive_part(bracket))
}

/// Membership of `v` in the branch constraint set: relevant realizability
/// conditions (marginals within `marginal_tol`) and the decoding condition.
pub fn branch_constraints_hold(
    branch: Branch,
    v: &JointDist,
    p: &InputLaw,
    rates: RatePair,
    delta: f64,
    marginal_tol: f64,
) -> Result<bool> {
    let base: Vec<&str> = branch.labels()[..branch.labels().len() - 1].to_vec();
    let vb = v.marginalize(&base)?;
    if !lemma4_check(&vb, p, rates, delta, Lemma4Constraint::for_branch(branch), marginal_tol)?.feasible {
        return Ok(false);
    }
    let truth = alpha_value(v)?;
    let rival = match branch {
        Branch::X => alpha_of(v, XT, Y)?,
        Branch::Y => alpha_of(v, X, YT)?,
        Branch::XY => alpha_of(v, XT, YT)?,
    };
    Ok(truth >= rival - EQ_TOL)
}

/// The relaxed baseline objective at `v` over `U, X, Y, Z`.
pub fn baseline_objective(
    branch: Branch,
    v: &JointDist,
    w: &Channel,
    p: &InputLaw,
    rates: RatePair,
    weighting: DivergenceWeighting,
) -> Result<f64> {
    let d = divergence(v, w, p, weighting)?;
    let ixy = mi(v, &[X], &[Y], &[U])?;
    let bracket = match branch {
        Branch::X => mi(v, &[X], &[Y, Z], &[U])? - rates.r_x,
        Branch::Y => mi(v, &[Y], &[X, Z], &[U])? - rates.r_y,
        Branch::XY => mi(v, &[X, Y], &[Z], &[U])? + ixy - rates.sum(),
    };
    Ok(d + ixy + positive_part(bracket))
}

/// Baseline constraint set: input marginals within `marginal_tol` and
/// `I(X∧Y|U)` no larger than the branch rate plus `3δ`.
pub fn baseline_constraints_hold(
    branch: Branch,
    v: &JointDist,
    p: &InputLaw,
    rates: RatePair,
    delta: f64,
    marginal_tol: f64,
) -> Result<bool> {
    if marginal_gap(v, X, p, true)? > marginal_tol || marginal_gap(v, Y, p, false)? > marginal_tol {
        return Ok(false);
    }
    Ok(mi(v, &[X], &[Y], &[U])? <= branch.rate(&rates) + 3.0 * delta + EQ_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Dist};

    fn binary(label: &str) -> Alphabet {
        Alphabet::new(label, 2).unwrap()
    }

    fn product5() -> JointDist {
        let u = Dist::new(Alphabet::new(U, 1).unwrap(), vec![1.0]).unwrap();
        let x = Dist::new(binary(X), vec![0.5, 0.5]).unwrap();
        let y = Dist::new(binary(Y), vec![0.5, 0.5]).unwrap();
        let xt = Dist::new(binary(XT), vec![0.5, 0.5]).unwrap();
        let yt = Dist::new(binary(YT), vec![0.5, 0.5]).unwrap();
        JointDist::product(&[&u, &x, &y, &xt, &yt]).unwrap()
    }

    #[test]
    fn product_with_fresh_copies_is_feasible_at_zero_rate() {
        let v = product5();
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let report = lemma4_feasible(&v, &p, RatePair::new(0.0, 0.0).unwrap(), 0.0).unwrap();
        assert!(report.feasible, "{:?}", report.violations);
        let f = f_functions(&v, RatePair::new(0.25, 0.5).unwrap()).unwrap();
        assert!(f.f.abs() < 1e-12);
        assert!((f.f_x + 0.25).abs() < 1e-12);
        assert!((f.f_y + 0.5).abs() < 1e-12);
        assert!((f.f_xy + 0.75).abs() < 1e-12);
    }

    #[test]
    fn copied_codeword_breaks_the_triple_constraint() {
        // X~ = X: I(X~ ∧ X | UY) = H(X) = 1 bit.
        let axes = vec![
            Alphabet::new(U, 1).unwrap(),
            binary(X),
            binary(Y),
            binary(XT),
            binary(YT),
        ];
        let mut probs = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                for yt in 0..2 {
                    probs[x * 8 + y * 4 + x * 2 + yt] = 0.125;
                }
            }
        }
        let v = JointDist::new(axes, probs).unwrap();
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let report = lemma4_feasible(&v, &p, RatePair::new(0.3, 0.3).unwrap(), 0.0).unwrap();
        let failed: Vec<_> = report.violations.iter().map(|v| v.constraint).collect();
        assert!(failed.contains(&Lemma4Constraint::TripleXTildeY));
        assert!(failed.contains(&Lemma4Constraint::TripleXTildeYTilde));
        assert!(failed.iter().all(|c| c.needs_distinct_x()));
    }

    #[test]
    fn marginal_mismatch_is_reported_first() {
        let axes = vec![Alphabet::new(U, 1).unwrap(), binary(X), binary(Y), binary(XT), binary(YT)];
        let mut probs = vec![0.0; 16];
        probs[0] = 1.0;
        let v = JointDist::new(axes, probs).unwrap();
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let report = lemma4_feasible(&v, &p, RatePair::new(1.0, 1.0).unwrap(), 0.0).unwrap();
        assert!(!report.feasible);
        assert_eq!(report.violations[0].constraint, Lemma4Constraint::MarginalX);
        assert!((report.violations[0].lhs - 0.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_is_conditional_entropy_given_output() {
        let w = Channel::binary_adder().unwrap();
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let joint = p.with_channel(&w).unwrap();
        // Given Z = X + Y, only Z = 1 leaves one bit of uncertainty.
        assert!((alpha_value(&joint).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_the_true_channel_is_zero() {
        let w = Channel::xor_bsc(0.1).unwrap();
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let joint = p.with_channel(&w).unwrap();
        for wt in [DivergenceWeighting::V, DivergenceWeighting::P] {
            assert!(divergence(&joint, &w, &p, wt).unwrap().abs() < 1e-15);
        }
    }
}
