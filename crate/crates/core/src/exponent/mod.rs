//! Expurgated error exponents for the two-user DM-MAC.
//!
//! The exponent `E_ex = min(E_X, E_Y, E_XY)` is a minimum of three constrained
//! divergence-plus-information problems over joint distributions of
//! `(U, X, Y, X~, Y~, Z)`. Each branch is minimized exactly over the lattice
//! of joint types with a fixed denominator `d` (see [`lattice`]), optionally
//! followed by a local refinement ([`refine`]). The relaxed baseline exponent
//! that the expurgated one dominates is computed on the same lattice.

mod lattice;
mod measures;
mod refine;
mod region;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{axis, Alphabet, Channel, Dist, JointDist, EQ_TOL};

pub use measures::{
    alpha_of, alpha_value, baseline_constraints_hold, baseline_objective, branch_constraints_hold,
    branch_objective, f_functions, f_value, f_x_value, f_xy_value, f_y_value, lemma4_check,
    lemma4_feasible, FValues, Lemma4Constraint, Lemma4Report, Lemma4Violation,
};
pub use region::{capacity_pentagon, region_contains, region_search, Pentagon, RegionSearch};

/// A pair of rates in bits per channel use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r_x: f64,
    pub r_y: f64,
}

impl RatePair {
    pub fn new(r_x: f64, r_y: f64) -> Result<Self> {
        if !(r_x >= 0.0 && r_y >= 0.0 && r_x.is_finite() && r_y.is_finite()) {
            return Err(Error::usage(format!("rates must be finite and nonnegative, got ({r_x}, {r_y})")));
        }
        Ok(RatePair { r_x, r_y })
    }

    pub fn min(&self) -> f64 {
        self.r_x.min(self.r_y)
    }

    pub fn sum(&self) -> f64 {
        self.r_x + self.r_y
    }
}

/// Which error event an exponent branch bounds. Ordering is the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    X,
    Y,
    XY,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::X, Branch::Y, Branch::XY];

    pub fn name(&self) -> &'static str {
        match self {
            Branch::X => "X",
            Branch::Y => "Y",
            Branch::XY => "XY",
        }
    }

    /// Axes of the branch's optimization variable, `Z` last.
    pub fn labels(&self) -> &'static [&'static str] {
        use axis::*;
        match self {
            Branch::X => &[U, X, Y, X_TILDE, Z],
            Branch::Y => &[U, X, Y, Y_TILDE, Z],
            Branch::XY => &[U, X, Y, X_TILDE, Y_TILDE, Z],
        }
    }

    /// The rate that the branch's `|·|^+` term subtracts.
    pub fn rate(&self, rates: &RatePair) -> f64 {
        match self {
            Branch::X => rates.r_x,
            Branch::Y => rates.r_y,
            Branch::XY => rates.sum(),
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Input law `P_{UXY} = P_U P_{X|U} P_{Y|U}` on axes `(U, X, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputLaw {
    joint: JointDist,
}

impl InputLaw {
    /// Validates that `X - U - Y` holds within [`EQ_TOL`]; axes are matched by label.
    pub fn new(joint: JointDist) -> Result<Self> {
        let joint = joint.reorder(&[axis::U, axis::X, axis::Y])?;
        let (ku, kx, ky) = (joint.shape()[0], joint.shape()[1], joint.shape()[2]);
        let pu = joint.marginalize(&[axis::U])?;
        let pux = joint.marginalize(&[axis::U, axis::X])?;
        let puy = joint.marginalize(&[axis::U, axis::Y])?;
        for u in 0..ku {
            let m = pu.probs()[u];
            for x in 0..kx {
                for y in 0..ky {
                    let p = joint.get(&[u, x, y]);
                    let factored = if m > 0.0 {
                        pux.get(&[u, x]) * puy.get(&[u, y]) / m
                    } else {
                        0.0
                    };
                    if (p - factored).abs() > EQ_TOL {
                        return Err(Error::invalid(format!(
                            "X-U-Y violated at cell (u={u}, x={x}, y={y}): P = {p}, P(u)P(x|u)P(y|u) = {factored}"
                        )));
                    }
                }
            }
        }
        Ok(InputLaw { joint })
    }

    /// Builds `P_U(u) P_{X|U}(x|u) P_{Y|U}(y|u)` from its factors.
    pub fn from_conditionals(p_u: &[f64], x_given_u: &[Vec<f64>], y_given_u: &[Vec<f64>]) -> Result<Self> {
        let ku = p_u.len();
        if x_given_u.len() != ku || y_given_u.len() != ku || ku == 0 {
            return Err(Error::usage("one conditional row per auxiliary symbol is required"));
        }
        let kx = x_given_u[0].len();
        let ky = y_given_u[0].len();
        let ua = Alphabet::new(axis::U, ku)?;
        let xa = Alphabet::new(axis::X, kx)?;
        let ya = Alphabet::new(axis::Y, ky)?;
        Dist::new(ua.clone(), p_u.to_vec())?;
        let mut probs = Vec::with_capacity(ku * kx * ky);
        for u in 0..ku {
            let px = Dist::new(xa.clone(), x_given_u[u].clone())?;
            let py = Dist::new(ya.clone(), y_given_u[u].clone())?;
            for &a in px.probs() {
                for &b in py.probs() {
                    probs.push(p_u[u] * a * b);
                }
            }
        }
        InputLaw::new(JointDist::new(vec![ua, xa, ya], probs)?)
    }

    /// Uniform `U`, `X`, `Y`, mutually independent.
    pub fn uniform(u_size: usize, x_size: usize, y_size: usize) -> Result<Self> {
        InputLaw::from_conditionals(
            &vec![1.0 / u_size as f64; u_size],
            &vec![vec![1.0 / x_size as f64; x_size]; u_size],
            &vec![vec![1.0 / y_size as f64; y_size]; u_size],
        )
    }

    pub fn joint(&self) -> &JointDist {
        &self.joint
    }

    pub fn u_size(&self) -> usize {
        self.joint.shape()[0]
    }

    pub fn x_size(&self) -> usize {
        self.joint.shape()[1]
    }

    pub fn y_size(&self) -> usize {
        self.joint.shape()[2]
    }

    /// `P_{UX}(u, x)`.
    pub fn p_ux(&self, u: usize, x: usize) -> f64 {
        (0..self.y_size()).map(|y| self.joint.get(&[u, x, y])).sum()
    }

    /// `P_{UY}(u, y)`.
    pub fn p_uy(&self, u: usize, y: usize) -> f64 {
        (0..self.x_size()).map(|x| self.joint.get(&[u, x, y])).sum()
    }

    /// Full joint `P_{UXY}(u,x,y) W(z|x,y)` on axes `(U, X, Y, Z)`.
    pub fn with_channel(&self, w: &Channel) -> Result<JointDist> {
        self.check_channel(w)?;
        let (ku, kx, ky, kz) = (self.u_size(), self.x_size(), self.y_size(), w.z_size());
        let mut probs = Vec::with_capacity(ku * kx * ky * kz);
        for u in 0..ku {
            for x in 0..kx {
                for y in 0..ky {
                    let p = self.joint.get(&[u, x, y]);
                    probs.extend(w.row(x, y).iter().map(|&q| p * q));
                }
            }
        }
        let mut axes = self.joint.axes().to_vec();
        axes.push(w.z_alphabet().clone());
        JointDist::new(axes, probs)
    }

    pub fn check_channel(&self, w: &Channel) -> Result<()> {
        if w.x_size() != self.x_size() || w.y_size() != self.y_size() {
            return Err(Error::usage(format!(
                "channel inputs are {}x{}, input law is over {}x{}",
                w.x_size(),
                w.y_size(),
                self.x_size(),
                self.y_size()
            )));
        }
        Ok(())
    }
}

/// How the divergence term `D(V_{Z|XYU} ‖ W | ·)` weights its conditioning cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DivergenceWeighting {
    /// Weight by `V_{XYU}` (the operational form used when bounding the error).
    #[default]
    V,
    /// Weight by the input law `P_{XYU}`.
    P,
}

/// Lattice minimization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub lattice_denominator: u32,
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub refine_steps: u32,
    #[serde(default)]
    pub divergence_weighting: DivergenceWeighting,
    /// Worker threads for lattice evaluation; not part of the serialized form.
    #[serde(skip, default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

impl SolverSpec {
    pub fn lattice(d: u32) -> Self {
        SolverSpec {
            lattice_denominator: d,
            refine: false,
            refine_steps: 0,
            divergence_weighting: DivergenceWeighting::V,
            threads: 1,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(2..=lattice::MAX_DENOMINATOR).contains(&self.lattice_denominator) {
            return Err(Error::usage(format!(
                "lattice denominator must lie in 2..={}, got {}",
                lattice::MAX_DENOMINATOR,
                self.lattice_denominator
            )));
        }
        Ok(())
    }
}

/// Outcome of one minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentResult {
    /// Minimum value in bits; `+∞` when the constraint set has no lattice point.
    pub value: f64,
    pub branch: Branch,
    /// Minimizing distribution on the branch axes (`None` when the set is empty).
    pub argmin: Option<JointDist>,
    pub lattice_denominator: u32,
    pub delta: f64,
    /// Set when no lattice point satisfies the constraints.
    pub empty: bool,
    /// Set when local refinement moved the argmin off the lattice.
    pub refined: bool,
}

impl ExponentResult {
    pub fn is_unbounded(&self) -> bool {
        self.empty
    }
}

/// All three expurgated branches together with their minimum.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentBreakdown {
    pub x: ExponentResult,
    pub y: ExponentResult,
    pub xy: ExponentResult,
}

impl ExponentBreakdown {
    pub fn get(&self, b: Branch) -> &ExponentResult {
        match b {
            Branch::X => &self.x,
            Branch::Y => &self.y,
            Branch::XY => &self.xy,
        }
    }

    /// Minimum over branches, ties resolved `X < Y < XY`.
    pub fn combined(&self) -> ExponentResult {
        min_branch([&self.x, &self.y, &self.xy])
    }
}

fn min_branch(results: [&ExponentResult; 3]) -> ExponentResult {
    let mut best = results[0];
    for r in &results[1..] {
        if r.value < best.value {
            best = r;
        }
    }
    best.clone()
}

/// Reusable minimizer for one input law and lattice.
///
/// The lattice of each branch depends only on the input law and the
/// denominator, so it is enumerated once and then evaluated for any number of
/// channels, rate pairs and slack values.
pub struct ExponentSolver {
    law: InputLaw,
    spec: SolverSpec,
    cache: Mutex<HashMap<(lattice::Kind, usize), Arc<lattice::PreparedLattice>>>,
}

impl ExponentSolver {
    pub fn new(law: InputLaw, spec: SolverSpec) -> Result<Self> {
        spec.validate()?;
        Ok(ExponentSolver {
            law,
            spec,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn law(&self) -> &InputLaw {
        &self.law
    }

    pub fn spec(&self) -> &SolverSpec {
        &self.spec
    }

    fn prepared(&self, kind: lattice::Kind, z_size: usize) -> Result<Arc<lattice::PreparedLattice>> {
        let mut cache = self.cache.lock().expect("lattice cache poisoned");
        if let Some(l) = cache.get(&(kind, z_size)) {
            return Ok(l.clone());
        }
        let l = Arc::new(lattice::PreparedLattice::prepare(
            kind,
            &self.law,
            self.spec.lattice_denominator,
            z_size,
            self.spec.threads,
        )?);
        cache.insert((kind, z_size), l.clone());
        Ok(l)
    }

    fn solve(&self, kind: lattice::Kind, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentResult> {
        self.law.check_channel(w)?;
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::usage(format!("delta must be finite and nonnegative, got {delta}")));
        }
        let lattice = self.prepared(kind, w.z_size())?;
        let mut result = lattice.evaluate(w, &self.law, rates, delta, self.spec.divergence_weighting, self.spec.threads)?;
        if self.spec.refine && self.spec.refine_steps > 0 {
            refine::refine(kind, &mut result, w, &self.law, rates, delta, &self.spec)?;
        }
        Ok(result)
    }

    /// `E_β` for one branch of the expurgated exponent.
    pub fn branch(&self, branch: Branch, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentResult> {
        self.solve(lattice::Kind::Expurgated(branch), w, rates, delta)
    }

    pub fn breakdown(&self, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentBreakdown> {
        Ok(ExponentBreakdown {
            x: self.branch(Branch::X, w, rates, delta)?,
            y: self.branch(Branch::Y, w, rates, delta)?,
            xy: self.branch(Branch::XY, w, rates, delta)?,
        })
    }

    /// `E_ex = min_β E_β`.
    pub fn expurgated(&self, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentResult> {
        Ok(self.breakdown(w, rates, delta)?.combined())
    }

    /// One branch of the relaxed baseline exponent.
    pub fn baseline_branch(&self, branch: Branch, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentResult> {
        self.solve(lattice::Kind::Baseline(branch), w, rates, delta)
    }

    /// Minimum over the three relaxed baseline branches.
    pub fn baseline(&self, w: &Channel, rates: RatePair, delta: f64) -> Result<ExponentResult> {
        let x = self.baseline_branch(Branch::X, w, rates, delta)?;
        let y = self.baseline_branch(Branch::Y, w, rates, delta)?;
        let xy = self.baseline_branch(Branch::XY, w, rates, delta)?;
        Ok(min_branch([&x, &y, &xy]))
    }
}

/// `E_β(R_X, R_Y, W, P_{XYU})` minimized over the denominator-`d` lattice.
pub fn branch_exponent(
    branch: Branch,
    rates: RatePair,
    w: &Channel,
    p: &InputLaw,
    delta: f64,
    solver: &SolverSpec,
) -> Result<ExponentResult> {
    ExponentSolver::new(p.clone(), solver.clone())?.branch(branch, w, rates, delta)
}

/// `E_ex = min over β ∈ {X, Y, XY}` of [`branch_exponent`].
pub fn expurgated_exponent(
    rates: RatePair,
    w: &Channel,
    p: &InputLaw,
    delta: f64,
    solver: &SolverSpec,
) -> Result<ExponentResult> {
    ExponentSolver::new(p.clone(), solver.clone())?.expurgated(w, rates, delta)
}

/// Relaxed random-coding baseline on the same lattice.
pub fn baseline_exponent(
    rates: RatePair,
    w: &Channel,
    p: &InputLaw,
    delta: f64,
    solver: &SolverSpec,
) -> Result<ExponentResult> {
    ExponentSolver::new(p.clone(), solver.clone())?.baseline(w, rates, delta)
}
