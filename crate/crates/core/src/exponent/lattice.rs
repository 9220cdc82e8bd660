//! Exact minimization over the lattice of joint types with denominator `d`.
//!
//! Points are integer count tensors summing to `d`. Enumeration happens in two
//! stages: "bases" over the input axes (everything except `Z`) that meet the
//! marginal constraints, then every split of each base cell across `Z`.
//! Everything that does not depend on the channel or the rates is computed
//! once per point during preparation; evaluation then costs one dot product
//! per point plus the `|·|^+` term.

use std::thread;

use super::{Branch, DivergenceWeighting, ExponentResult, InputLaw, Lemma4Constraint, RatePair};
use crate::error::{Error, Result};
use crate::prob::{axis, projection_map, Alphabet, Channel, JointDist, EQ_TOL};
use crate::types::{composition_count, Compositions};

pub(crate) const MAX_DENOMINATOR: u32 = 255;
/// Upper limit on stored lattice points (before the decoding condition is applied).
pub(crate) const MAX_POINTS: u128 = 40_000_000;
/// Upper limit on input-cell compositions examined while enumerating bases.
pub(crate) const MAX_BASE_SEARCH: u128 = 20_000_000_000;

/// Which minimization a lattice is prepared for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Kind {
    Expurgated(Branch),
    Baseline(Branch),
}

impl Kind {
    pub(crate) fn branch(&self) -> Branch {
        match self {
            Kind::Expurgated(b) | Kind::Baseline(b) => *b,
        }
    }

    /// Axis labels of the optimization variable, `Z` last.
    pub(crate) fn labels(&self) -> &'static [&'static str] {
        match self {
            Kind::Expurgated(b) => b.labels(),
            Kind::Baseline(_) => &[axis::U, axis::X, axis::Y, axis::Z],
        }
    }
}

/// Projection of a count tensor onto a subset of its axes.
#[derive(Clone, Debug)]
struct Proj {
    map: Vec<usize>,
    size: usize,
}

impl Proj {
    fn new(shape: &[usize], labels: &[&str], keep: &[&str]) -> Proj {
        let positions: Vec<usize> = keep
            .iter()
            .map(|k| labels.iter().position(|l| l == k).expect("axis present"))
            .collect();
        let kept: Vec<usize> = positions.iter().map(|&p| shape[p]).collect();
        Proj {
            map: projection_map(shape, &positions, &kept),
            size: kept.iter().product(),
        }
    }

    fn apply(&self, counts: &[u32], out: &mut Vec<u32>) {
        out.clear();
        out.resize(self.size, 0);
        for (&c, &m) in counts.iter().zip(&self.map) {
            out[m] += c;
        }
    }
}

/// `I(A ∧ B | C)` evaluated on integer counts.
#[derive(Clone, Debug)]
struct MiTerm {
    abc: Proj,
    ac: Proj,
    bc: Proj,
    c: Proj,
}

impl MiTerm {
    fn new(shape: &[usize], labels: &[&str], a: &[&str], b: &[&str], c: &[&str]) -> MiTerm {
        let abc_labels: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
        let abc_shape: Vec<usize> = abc_labels
            .iter()
            .map(|l| shape[labels.iter().position(|x| x == l).expect("axis present")])
            .collect();
        let ac: Vec<&str> = a.iter().chain(c).copied().collect();
        let bc: Vec<&str> = b.iter().chain(c).copied().collect();
        MiTerm {
            abc: Proj::new(shape, labels, &abc_labels),
            ac: Proj::new(&abc_shape, &abc_labels, &ac),
            bc: Proj::new(&abc_shape, &abc_labels, &bc),
            c: Proj::new(&abc_shape, &abc_labels, c),
        }
    }

    /// Value in bits for a tensor summing to `d`. Cells whose ratio is exactly one add nothing.
    fn eval(&self, counts: &[u32], d: f64, s: &mut Scratch) -> f64 {
        self.abc.apply(counts, &mut s.abc);
        s.ac.clear();
        s.ac.resize(self.ac.size, 0);
        s.bc.clear();
        s.bc.resize(self.bc.size, 0);
        s.c.clear();
        s.c.resize(self.c.size, 0);
        for (i, &n) in s.abc.iter().enumerate() {
            s.ac[self.ac.map[i]] += n;
            s.bc[self.bc.map[i]] += n;
            s.c[self.c.map[i]] += n;
        }
        let mut total = 0.0;
        for (i, &n) in s.abc.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let num = n as u64 * s.c[self.c.map[i]] as u64;
            let den = s.ac[self.ac.map[i]] as u64 * s.bc[self.bc.map[i]] as u64;
            if num != den {
                total += n as f64 * (num as f64 / den as f64).log2();
            }
        }
        total / d
    }
}

#[derive(Default)]
struct Scratch {
    abc: Vec<u32>,
    ac: Vec<u32>,
    bc: Vec<u32>,
    c: Vec<u32>,
    proj: Vec<u32>,
}

/// `Σ n log2 n` over a projection.
#[derive(Clone, Debug)]
struct STerm(Proj);

impl STerm {
    fn eval(&self, counts: &[u32], nlogn: &[f64], s: &mut Scratch) -> f64 {
        self.0.apply(counts, &mut s.proj);
        s.proj.iter().map(|&n| nlogn[n as usize]).sum()
    }
}

/// A sum of mutual informations, evaluated on counts.
type MiSum = Vec<MiTerm>;

fn mi_sum(shape: &[usize], labels: &[&str], terms: &[(&[&str], &[&str], &[&str])]) -> MiSum {
    terms.iter().map(|(a, b, c)| MiTerm::new(shape, labels, a, b, c)).collect()
}

fn eval_sum(terms: &MiSum, counts: &[u32], d: f64, s: &mut Scratch) -> f64 {
    terms.iter().map(|t| t.eval(counts, d, s)).sum()
}

/// Information-constraint left-hand sides over the base axes.
fn base_constraint_terms(kind: Kind, shape: &[usize], labels: &[&str]) -> (Vec<Lemma4Constraint>, Vec<MiSum>) {
    use axis::{U, X, X_TILDE as XT, Y, Y_TILDE as YT};
    use Lemma4Constraint::*;
    let constraints: Vec<Lemma4Constraint> = match kind {
        Kind::Expurgated(b) => Lemma4Constraint::for_branch(b)
            .iter()
            .copied()
            .filter(|c| !c.is_marginal())
            .collect(),
        // the baseline's single constraint shares the shape of PairXY with a different right-hand side
        Kind::Baseline(_) => vec![PairXY],
    };
    let sums = constraints
        .iter()
        .map(|c| {
            let t: Vec<(&[&str], &[&str], &[&str])> = match c {
                PairXY => vec![(&[X], &[Y], &[U])],
                PairXYTilde => vec![(&[X], &[YT], &[U])],
                PairXTildeY => vec![(&[XT], &[Y], &[U])],
                PairXTildeYTilde => vec![(&[XT], &[YT], &[U])],
                TripleXTildeY => vec![(&[X], &[Y], &[U]), (&[XT], &[Y], &[U]), (&[XT], &[X], &[U, Y])],
                TripleXTildeYTilde => vec![(&[X], &[YT], &[U]), (&[XT], &[YT], &[U]), (&[XT], &[X], &[U, YT])],
                TripleYTildeX => vec![(&[X], &[Y], &[U]), (&[X], &[YT], &[U]), (&[YT], &[Y], &[U, X])],
                TripleYTildeXTilde => vec![(&[XT], &[Y], &[U]), (&[XT], &[YT], &[U]), (&[YT], &[Y], &[U, XT])],
                Quad => vec![(&[X], &[Y], &[U]), (&[XT], &[YT], &[U]), (&[XT, YT], &[X, Y], &[U])],
                QuadCross => vec![(&[XT], &[Y], &[U]), (&[X], &[YT], &[U]), (&[X, YT], &[XT, Y], &[U])],
                _ => unreachable!("marginals are enforced by enumeration"),
            };
            mi_sum(shape, labels, &t)
        })
        .collect();
    (constraints, sums)
}

/// Rate-free part of the `|·|^+` argument, over the full axes.
fn bracket_terms(kind: Kind, shape: &[usize], labels: &[&str]) -> MiSum {
    use axis::{U, X, X_TILDE as XT, Y, Y_TILDE as YT, Z};
    let t: Vec<(&[&str], &[&str], &[&str])> = match kind {
        Kind::Expurgated(Branch::X) => vec![(&[XT], &[X, Z], &[Y, U]), (&[XT], &[Y], &[U])],
        Kind::Expurgated(Branch::Y) => vec![(&[YT], &[Y, Z], &[X, U]), (&[X], &[YT], &[U])],
        Kind::Expurgated(Branch::XY) => vec![(&[XT, YT], &[X, Y, Z], &[U]), (&[XT], &[YT], &[U])],
        Kind::Baseline(Branch::X) => vec![(&[X], &[Y, Z], &[U])],
        Kind::Baseline(Branch::Y) => vec![(&[Y], &[X, Z], &[U])],
        Kind::Baseline(Branch::XY) => vec![(&[X, Y], &[Z], &[U]), (&[X], &[Y], &[U])],
    };
    mi_sum(shape, labels, &t)
}

/// Per-point data that does not depend on the channel or the rates.
struct Points {
    /// `U, X, Y, Z` counts of each point, `stride` entries per point.
    uxyz: Vec<u8>,
    /// `Σ n log2(n / n_uxy) / d + I(X∧Y|U)`.
    const_v: Vec<f64>,
    /// `Σ_uxy P(uxy)/n_uxy Σ_z n log2(n / n_uxy) + I(X∧Y|U)`.
    const_p: Vec<f64>,
    bracket: Vec<f64>,
    base: Vec<u32>,
}

impl Points {
    fn new() -> Self {
        Points {
            uxyz: Vec::new(),
            const_v: Vec::new(),
            const_p: Vec::new(),
            bracket: Vec::new(),
            base: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.base.len()
    }

    fn append(&mut self, mut other: Points) {
        self.uxyz.append(&mut other.uxyz);
        self.const_v.append(&mut other.const_v);
        self.const_p.append(&mut other.const_p);
        self.bracket.append(&mut other.bracket);
        self.base.append(&mut other.base);
    }
}

/// Everything needed to evaluate one minimization for any channel with a given output size.
pub(crate) struct PreparedLattice {
    kind: Kind,
    d: u32,
    axes: Vec<Alphabet>,
    z_size: usize,
    bases: Vec<Vec<u32>>,
    base_start: Vec<usize>,
    constraints: Vec<Lemma4Constraint>,
    /// Constraint left-hand sides, `constraints.len()` per base.
    base_lhs: Vec<f64>,
    points: Points,
    /// `(u, x, y)` cell of each `uxyz` cell, and the `(x, y)` channel row.
    uxy_of: Vec<usize>,
    xy_of: Vec<usize>,
    p_uxy: Vec<f64>,
}

/// Input-cell structure shared by preparation and argmin reconstruction.
struct Geometry {
    labels: Vec<&'static str>,
    full_shape: Vec<usize>,
    base_shape: Vec<usize>,
    z_size: usize,
    to_uxyz: Proj,
    to_uxy: Proj,
    alpha_truth: STerm,
    alpha_rival: Option<STerm>,
    bracket: MiSum,
    ixy: MiTerm,
}

impl Geometry {
    fn new(kind: Kind, law: &InputLaw, z_size: usize) -> Geometry {
        use axis::*;
        let labels: Vec<&'static str> = kind.labels().to_vec();
        let full_shape: Vec<usize> = labels
            .iter()
            .map(|&l| match l {
                U => law.u_size(),
                X | X_TILDE => law.x_size(),
                Y | Y_TILDE => law.y_size(),
                _ => z_size,
            })
            .collect();
        let base_shape = full_shape[..full_shape.len() - 1].to_vec();
        let rival: Option<&[&str]> = match kind {
            Kind::Expurgated(Branch::X) => Some(&[U, X_TILDE, Y, Z]),
            Kind::Expurgated(Branch::Y) => Some(&[U, X, Y_TILDE, Z]),
            Kind::Expurgated(Branch::XY) => Some(&[U, X_TILDE, Y_TILDE, Z]),
            Kind::Baseline(_) => None,
        };
        Geometry {
            to_uxyz: Proj::new(&full_shape, &labels, &[U, X, Y, Z]),
            to_uxy: Proj::new(&full_shape, &labels, &[U, X, Y]),
            alpha_truth: STerm(Proj::new(&full_shape, &labels, &[U, X, Y, Z])),
            alpha_rival: rival.map(|r| STerm(Proj::new(&full_shape, &labels, r))),
            bracket: bracket_terms(kind, &full_shape, &labels),
            ixy: MiTerm::new(&full_shape, &labels, &[X], &[Y], &[U]),
            labels,
            full_shape,
            base_shape,
            z_size,
        }
    }

    /// Calls `f` for every split of `base` across `Z`, in a fixed order.
    fn expand(&self, base: &[u32], full: &mut Vec<u32>, mut f: impl FnMut(&[u32])) {
        let kz = self.z_size;
        let splits: Vec<(usize, Vec<Vec<u32>>)> = base
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(cell, &c)| (cell, Compositions::new(c, kz).collect()))
            .collect();
        full.clear();
        full.resize(base.len() * kz, 0);
        let mut odo = vec![0usize; splits.len()];
        for (k, (cell, opts)) in splits.iter().enumerate() {
            full[cell * kz..(cell + 1) * kz].copy_from_slice(&opts[odo[k]]);
        }
        loop {
            f(full);
            // advance the odometer, last cell fastest
            let mut k = splits.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                let (cell, opts) = &splits[k];
                odo[k] += 1;
                if odo[k] < opts.len() {
                    full[cell * kz..(cell + 1) * kz].copy_from_slice(&opts[odo[k]]);
                    break;
                }
                odo[k] = 0;
                full[cell * kz..(cell + 1) * kz].copy_from_slice(&opts[0]);
            }
        }
    }

    /// The decoding condition `α(truth) ≥ α(rival)`, i.e. `S_rival ≥ S_truth`.
    fn alpha_ok(&self, full: &[u32], d: f64, nlogn: &[f64], s: &mut Scratch) -> bool {
        match &self.alpha_rival {
            None => true,
            Some(rival) => {
                let truth = self.alpha_truth.eval(full, nlogn, s);
                let other = rival.eval(full, nlogn, s);
                (other - truth) / d >= -EQ_TOL
            }
        }
    }
}

fn nlogn_table(d: u32) -> Vec<f64> {
    (0..=d).map(|n| if n == 0 { 0.0 } else { n as f64 * (n as f64).log2() }).collect()
}

/// Integer ranges `[lo, hi]` for the `(u, a)` marginal cells.
fn marginal_range(target: f64, d: u32) -> (u32, u32) {
    let c = target * d as f64;
    let lo = (c - 0.5 - 1e-9).ceil().max(0.0) as u32;
    let hi = (c + 0.5 + 1e-9).floor().max(0.0) as u32;
    (lo, hi.min(d))
}

struct MarginalGroup {
    /// For each base cell, the group cell it contributes to.
    of_cell: Vec<usize>,
    lo: Vec<u32>,
    hi: Vec<u32>,
    /// Last base cell contributing to each group cell.
    last: Vec<usize>,
}

fn marginal_groups(law: &InputLaw, shape: &[usize], labels: &[&str], d: u32) -> Vec<MarginalGroup> {
    use axis::*;
    let mut groups = Vec::new();
    for &l in labels {
        let is_x = match l {
            X | X_TILDE => true,
            Y | Y_TILDE => false,
            _ => continue,
        };
        let proj = Proj::new(shape, labels, &[U, l]);
        let ka = if is_x { law.x_size() } else { law.y_size() };
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for u in 0..law.u_size() {
            for a in 0..ka {
                let p = if is_x { law.p_ux(u, a) } else { law.p_uy(u, a) };
                let (l, h) = marginal_range(p, d);
                lo.push(l);
                hi.push(h);
            }
        }
        let mut last = vec![0; proj.size];
        for (cell, &g) in proj.map.iter().enumerate() {
            last[g] = cell;
        }
        groups.push(MarginalGroup {
            of_cell: proj.map,
            lo,
            hi,
            last,
        });
    }
    groups
}

/// All input-cell count vectors summing to `d` whose marginals are within range, lex ascending.
fn enumerate_bases(groups: &[MarginalGroup], cells: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(
        cell: usize,
        remaining: u32,
        current: &mut Vec<u32>,
        sums: &mut [Vec<u32>],
        groups: &[MarginalGroup],
        out: &mut Vec<Vec<u32>>,
    ) {
        let cells = current.len();
        let first = if cell + 1 == cells { remaining } else { 0 };
        for c in first..=remaining {
            let mut ok = true;
            for (g, s) in groups.iter().zip(sums.iter_mut()) {
                let gc = g.of_cell[cell];
                s[gc] += c;
                if s[gc] > g.hi[gc] || (g.last[gc] == cell && s[gc] < g.lo[gc]) {
                    ok = false;
                }
            }
            if ok {
                current[cell] = c;
                if cell + 1 == cells {
                    out.push(current.clone());
                } else {
                    rec(cell + 1, remaining - c, current, sums, groups, out);
                }
            }
            for (g, s) in groups.iter().zip(sums.iter_mut()) {
                s[g.of_cell[cell]] -= c;
            }
            if !ok && groups.iter().zip(sums.iter()).any(|(g, s)| {
                let gc = g.of_cell[cell];
                s[gc] + c > g.hi[gc]
            }) {
                // larger counts only overshoot further
                break;
            }
        }
        current[cell] = 0;
    }
    let mut out = Vec::new();
    let mut current = vec![0; cells];
    let mut sums: Vec<Vec<u32>> = groups.iter().map(|g| vec![0; g.lo.len()]).collect();
    rec(0, d, &mut current, &mut sums, groups, &mut out);
    out
}

impl PreparedLattice {
    pub(crate) fn prepare(kind: Kind, law: &InputLaw, d: u32, z_size: usize, threads: usize) -> Result<Self> {
        if !(2..=MAX_DENOMINATOR).contains(&d) {
            return Err(Error::usage(format!("lattice denominator must lie in 2..={MAX_DENOMINATOR}")));
        }
        let geo = Geometry::new(kind, law, z_size);
        let labels = geo.labels.clone();
        let base_labels = &labels[..labels.len() - 1];
        let base_cells: usize = geo.base_shape.iter().product();
        let search = composition_count(d, base_cells);
        if search > MAX_BASE_SEARCH {
            return Err(Error::guard("lattice base enumeration", search, MAX_BASE_SEARCH));
        }
        let groups = marginal_groups(law, &geo.base_shape, base_labels, d);
        let bases = enumerate_bases(&groups, base_cells, d);
        let raw_points: u128 = bases
            .iter()
            .map(|b| {
                b.iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| composition_count(c, z_size))
                    .fold(1u128, |a, x| a.saturating_mul(x))
            })
            .fold(0u128, |a, x| a.saturating_add(x));
        if raw_points > MAX_POINTS {
            return Err(Error::guard("lattice points", raw_points, MAX_POINTS));
        }

        let (constraints, lhs_terms) = base_constraint_terms(kind, &geo.base_shape, base_labels);
        let df = d as f64;
        let nlogn = nlogn_table(d);
        let p_uxy: Vec<f64> = law.joint().probs().to_vec();

        let threads = threads.max(1).min(bases.len().max(1));
        let chunk = bases.len().div_ceil(threads).max(1);
        let parts: Vec<(Vec<f64>, Points)> = thread::scope(|scope| {
            let handles: Vec<_> = bases
                .chunks(chunk)
                .enumerate()
                .map(|(ci, chunk_bases)| {
                    let geo = &geo;
                    let lhs_terms = &lhs_terms;
                    let nlogn = &nlogn;
                    let p_uxy = &p_uxy;
                    scope.spawn(move || {
                        let mut s = Scratch::default();
                        let mut lhs = Vec::new();
                        let mut pts = Points::new();
                        let mut full = Vec::new();
                        let mut uxyz = Vec::new();
                        let mut uxy = Vec::new();
                        for (bi, base) in chunk_bases.iter().enumerate() {
                            let index = (ci * chunk + bi) as u32;
                            for t in lhs_terms {
                                lhs.push(eval_sum(t, base, df, &mut s));
                            }
                            geo.expand(base, &mut full, |full| {
                                if !geo.alpha_ok(full, df, nlogn, &mut s) {
                                    return;
                                }
                                geo.to_uxyz.apply(full, &mut uxyz);
                                geo.to_uxy.apply(full, &mut uxy);
                                let kz = geo.z_size;
                                let mut self_v = 0.0;
                                let mut self_p = 0.0;
                                for (cell, &m) in uxy.iter().enumerate() {
                                    if m == 0 {
                                        continue;
                                    }
                                    let row: f64 = uxyz[cell * kz..(cell + 1) * kz]
                                        .iter()
                                        .map(|&n| nlogn[n as usize])
                                        .sum::<f64>()
                                        - nlogn[m as usize];
                                    self_v += row;
                                    self_p += p_uxy[cell] * row / m as f64;
                                }
                                let ixy = geo.ixy.eval(full, df, &mut s);
                                pts.const_v.push(self_v / df + ixy);
                                pts.const_p.push(self_p + ixy);
                                pts.bracket.push(eval_sum(&geo.bracket, full, df, &mut s));
                                pts.uxyz.extend(uxyz.iter().map(|&n| n as u8));
                                pts.base.push(index);
                            });
                        }
                        (lhs, pts)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("lattice worker panicked")).collect()
        });

        let mut base_lhs = Vec::new();
        let mut points = Points::new();
        for (lhs, pts) in parts {
            base_lhs.extend(lhs);
            points.append(pts);
        }
        let mut base_start = vec![0usize; bases.len() + 1];
        for &b in &points.base {
            base_start[b as usize + 1] += 1;
        }
        for i in 0..bases.len() {
            base_start[i + 1] += base_start[i];
        }

        let (ku, kx, ky) = (law.u_size(), law.x_size(), law.y_size());
        let mut uxy_of = Vec::with_capacity(ku * kx * ky * z_size);
        let mut xy_of = Vec::with_capacity(ku * kx * ky * z_size);
        for _u in 0..ku {
            for x in 0..kx {
                for y in 0..ky {
                    for _z in 0..z_size {
                        uxy_of.push(uxy_of.len() / z_size);
                        xy_of.push(x * ky + y);
                    }
                }
            }
        }

        let axes = labels
            .iter()
            .zip(&geo.full_shape)
            .map(|(l, &s)| Alphabet::new(*l, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedLattice {
            kind,
            d,
            axes,
            z_size,
            bases,
            base_start,
            constraints,
            base_lhs,
            points,
            uxy_of,
            xy_of,
            p_uxy,
        })
    }

    #[cfg(test)]
    pub(crate) fn point_count(&self) -> usize {
        self.points.len()
    }

    fn rhs(&self, rates: RatePair, delta: f64) -> Vec<f64> {
        match self.kind {
            Kind::Expurgated(_) => self.constraints.iter().map(|c| c.rhs(rates, delta)).collect(),
            Kind::Baseline(b) => vec![b.rate(&rates) + 3.0 * delta],
        }
    }

    pub(crate) fn evaluate(
        &self,
        w: &Channel,
        law: &InputLaw,
        rates: RatePair,
        delta: f64,
        weighting: DivergenceWeighting,
        threads: usize,
    ) -> Result<ExponentResult> {
        if w.z_size() != self.z_size {
            return Err(Error::usage("channel output size differs from the prepared lattice"));
        }
        let branch = self.kind.branch();
        let rhs = self.rhs(rates, delta);
        let nc = self.constraints.len();
        let base_ok: Vec<bool> = (0..self.bases.len())
            .map(|b| {
                self.base_lhs[b * nc..(b + 1) * nc]
                    .iter()
                    .zip(&rhs)
                    .all(|(&l, &r)| l <= r + EQ_TOL)
            })
            .collect();
        let rate = branch.rate(&rates);
        let df = self.d as f64;
        let stride = self.uxy_of.len();
        // -log2 W per (u, x, y, z) cell
        let neg_log_w: Vec<f64> = (0..stride)
            .map(|cell| {
                let z = cell % self.z_size;
                -w.kernel().row(self.xy_of[cell])[z].log2()
            })
            .collect();
        let coef_v: Vec<f64> = neg_log_w.iter().map(|&c| c / df).collect();
        let pts = &self.points;
        let value_at = |i: usize| -> f64 {
            let counts = &pts.uxyz[i * stride..(i + 1) * stride];
            let (constant, channel) = match weighting {
                DivergenceWeighting::V => {
                    let mut acc = 0.0;
                    for (cell, &n) in counts.iter().enumerate() {
                        if n > 0 {
                            acc += n as f64 * coef_v[cell];
                        }
                    }
                    (pts.const_v[i], acc)
                }
                DivergenceWeighting::P => {
                    let kz = self.z_size;
                    let mut acc = 0.0;
                    for (row, chunk) in counts.chunks(kz).enumerate() {
                        let m: u32 = chunk.iter().map(|&n| n as u32).sum();
                        if m == 0 {
                            continue;
                        }
                        let weight = self.p_uxy[row] / m as f64;
                        for (z, &n) in chunk.iter().enumerate() {
                            if n > 0 {
                                acc += weight * n as f64 * neg_log_w[row * kz + z];
                            }
                        }
                    }
                    (pts.const_p[i], acc)
                }
            };
            constant + channel + (pts.bracket[i] - rate).max(0.0)
        };

        let n = pts.len();
        let threads = threads.max(1);
        let chunk = n.div_ceil(threads).max(1);
        let best: Option<(f64, usize)> = thread::scope(|scope| {
            let handles: Vec<_> = (0..n)
                .step_by(chunk)
                .map(|start| {
                    let value_at = &value_at;
                    let base_ok = &base_ok;
                    scope.spawn(move || {
                        let mut best: Option<(f64, usize)> = None;
                        for i in start..(start + chunk).min(n) {
                            if !base_ok[pts.base[i] as usize] {
                                continue;
                            }
                            let v = value_at(i);
                            if best.is_none_or(|(b, _)| v < b) {
                                best = Some((v, i));
                            }
                        }
                        best
                    })
                })
                .collect();
            let mut best: Option<(f64, usize)> = None;
            for h in handles {
                if let Some((v, i)) = h.join().expect("lattice worker panicked") {
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, i));
                    }
                }
            }
            best
        });

        Ok(match best {
            None => ExponentResult {
                value: f64::INFINITY,
                branch,
                argmin: None,
                lattice_denominator: self.d,
                delta,
                empty: true,
                refined: false,
            },
            Some((value, i)) => ExponentResult {
                value,
                branch,
                argmin: Some(self.point_dist(law, i)?),
                lattice_denominator: self.d,
                delta,
                empty: false,
                refined: false,
            },
        })
    }

    /// Recovers the full count tensor of point `i` by replaying its base's expansion.
    fn point_counts(&self, law: &InputLaw, i: usize) -> Vec<u32> {
        let b = self.points.base[i] as usize;
        let local = i - self.base_start[b];
        let geo = Geometry::new(self.kind, law, self.z_size);
        let nlogn = nlogn_table(self.d);
        let mut s = Scratch::default();
        let mut full = Vec::new();
        let mut seen = 0usize;
        let mut found = None;
        geo.expand(&self.bases[b], &mut full, |f| {
            if found.is_some() || !geo.alpha_ok(f, self.d as f64, &nlogn, &mut s) {
                return;
            }
            if seen == local {
                found = Some(f.to_vec());
            }
            seen += 1;
        });
        found.expect("point index within its base")
    }

    fn point_dist(&self, law: &InputLaw, i: usize) -> Result<JointDist> {
        let counts = self.point_counts(law, i);
        JointDist::from_counts(self.axes.clone(), &counts, self.d)
    }

    #[cfg(test)]
    pub(crate) fn all_points(&self, law: &InputLaw) -> Vec<JointDist> {
        (0..self.point_count()).map(|i| self.point_dist(law, i).unwrap()).collect()
    }
}
