//! Exact tallies of joint types realized by codeword pairs, triples and quadruples.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::CodebookPair;
use crate::error::{Error, Result};
use crate::exponent::{f_value, f_x_value, f_xy_value, f_y_value, RatePair};
use crate::prob::{axis, conditional_mutual_information, Alphabet, JointDist};
use crate::types::{Sequence, TypeVector};

/// Upper limit on `n · (M_X M_Y)^2` symbol visits for one tally.
pub const MAX_TALLY_WORK: u128 = 400_000_000;

/// One of the four packing inequalities, named by the extra codewords it sums over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Family {
    /// `(u, x_i, y_j)`; bounded through `F`.
    Pair,
    /// `(u, x_i, y_j, y_l)`, `l ≠ j`; bounded through `F_Y`.
    YTilde,
    /// `(u, x_i, y_j, x_k)`, `k ≠ i`; bounded through `F_X`.
    XTilde,
    /// `(u, x_i, y_j, x_k, y_l)`, `k ≠ i`, `l ≠ j`; bounded through `F_XY`.
    XYTilde,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Pair, Family::YTilde, Family::XTilde, Family::XYTilde];

    pub fn labels(&self) -> &'static [&'static str] {
        use axis::*;
        match self {
            Family::Pair => &[U, X, Y],
            Family::YTilde => &[U, X, Y, Y_TILDE],
            Family::XTilde => &[U, X, Y, X_TILDE],
            Family::XYTilde => &[U, X, Y, X_TILDE, Y_TILDE],
        }
    }

    /// `δ` multiplier in the averaged (code-wide) inequality.
    pub fn k_average(&self) -> f64 {
        match self {
            Family::Pair => 2.0,
            Family::YTilde | Family::XTilde => 3.0,
            Family::XYTilde => 4.0,
        }
    }

    /// `δ` multiplier in the per-pair inequality that holds after expurgation.
    pub fn k_expurgated(&self) -> f64 {
        self.k_average() + 1.0
    }

    /// The packing function bounding this family.
    pub fn f(&self, v: &JointDist, rates: RatePair) -> Result<f64> {
        match self {
            Family::Pair => f_value(v),
            Family::YTilde => f_y_value(v, rates.r_y),
            Family::XTilde => f_x_value(v, rates.r_x),
            Family::XYTilde => f_xy_value(v, rates),
        }
    }

    fn uses_x_tilde(&self) -> bool {
        matches!(self, Family::XTilde | Family::XYTilde)
    }

    fn uses_y_tilde(&self) -> bool {
        matches!(self, Family::YTilde | Family::XYTilde)
    }
}

/// Which inequality the report's `achieved_delta` refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PackingMode {
    /// Code-wide averages against `2^{-n[F − kδ]}`, `k = 2, 3, 3, 4`.
    Average,
    /// Per-pair maxima against `2^{-n[F − R_X − R_Y − kδ]}`, `k = 2, 3, 3, 4`.
    PerPair,
    /// Per-pair maxima against `2^{-n[F − min(R_X, R_Y) − kδ]}`, `k = 3, 4, 4, 5`.
    Expurgated,
}

impl PackingMode {
    fn k(&self, f: Family) -> f64 {
        match self {
            PackingMode::Average | PackingMode::PerPair => f.k_average(),
            PackingMode::Expurgated => f.k_expurgated(),
        }
    }

    fn offset(&self, rates: RatePair) -> f64 {
        match self {
            PackingMode::Average => 0.0,
            PackingMode::PerPair => rates.sum(),
            PackingMode::Expurgated => rates.min(),
        }
    }
}

/// Tally of one realized joint type.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeEntry {
    pub family: Family,
    pub joint_type: TypeVector,
    /// `F_•(V)` at the report's rates.
    pub f: f64,
    /// Number of index tuples realizing the type.
    pub total: u64,
    /// `total / (M_X M_Y)`.
    pub average: f64,
    /// Largest count for a single `(i, j)`.
    pub max_per_pair: u64,
    /// Smallest `δ ≥ 0` for which this type's inequality (per the report mode) holds.
    pub achieved_delta: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilySummary {
    pub family: Family,
    pub k: f64,
    pub types: usize,
    pub achieved_delta: f64,
    pub holds: bool,
    /// No tuple contributes (e.g. the `k ≠ i` sum of a one-codeword book).
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackingReport {
    pub mode: PackingMode,
    pub n: usize,
    pub m_x: usize,
    pub m_y: usize,
    pub rates: RatePair,
    pub delta: f64,
    pub families: Vec<FamilySummary>,
    /// Worst family.
    pub achieved_delta: f64,
    pub holds: bool,
    pub entries: Vec<TypeEntry>,
}

/// Per-type counts for every `(i, j)`: `counts[a * |ys| + b]`.
pub(crate) struct FamilyTally {
    pub nx: usize,
    pub ny: usize,
    pub types: BTreeMap<Vec<u32>, Vec<u32>>,
}

pub(crate) fn guard_tally(c: &CodebookPair, nx: usize, ny: usize) -> Result<()> {
    let work = c.n() as u128 * (nx as u128 * ny as u128).pow(2);
    if work > MAX_TALLY_WORK {
        return Err(Error::guard("codeword tuple tally", work, MAX_TALLY_WORK));
    }
    Ok(())
}

/// Flat cell of `(u, x, y[, x~][, y~])` at every position.
fn cell_digits(seqs: &[&Sequence], n: usize) -> Vec<usize> {
    (0..n)
        .map(|t| seqs.iter().fold(0, |acc, s| acc * s.alphabet().size() + s.symbols()[t]))
        .collect()
}

pub(crate) fn tally_family(c: &CodebookPair, family: Family, xs: &[usize], ys: &[usize]) -> Result<FamilyTally> {
    guard_tally(c, xs.len(), ys.len())?;
    let n = c.n();
    let (kx, ky) = (c.law().x_size(), c.law().y_size());
    let cells = c.law().u_size() * kx * ky * if family.uses_x_tilde() { kx } else { 1 } * if family.uses_y_tilde() { ky } else { 1 };
    let (nx, ny) = (xs.len(), ys.len());
    let mut map: HashMap<Vec<u32>, Vec<u32>> = HashMap::new();
    let mut counts = vec![0u32; cells];
    let mut record = |counts: &[u32], a: usize, b: usize| {
        map.entry(counts.to_vec()).or_insert_with(|| vec![0; nx * ny])[a * ny + b] += 1;
    };
    let xs_opt = |skip: usize| xs.iter().copied().filter(move |&k| k != skip);
    let ys_opt = |skip: usize| ys.iter().copied().filter(move |&l| l != skip);
    for (a, &i) in xs.iter().enumerate() {
        for (b, &j) in ys.iter().enumerate() {
            let base = cell_digits(&[c.u(), &c.cx()[i], &c.cy()[j]], n);
            let mut fill = |extra: &[&Sequence]| {
                counts.iter_mut().for_each(|v| *v = 0);
                for t in 0..n {
                    let cell = extra.iter().fold(base[t], |acc, s| acc * s.alphabet().size() + s.symbols()[t]);
                    counts[cell] += 1;
                }
                record(&counts, a, b);
            };
            match family {
                Family::Pair => fill(&[]),
                Family::YTilde => {
                    for l in ys_opt(j) {
                        fill(&[&c.cy()[l]]);
                    }
                }
                Family::XTilde => {
                    for k in xs_opt(i) {
                        fill(&[&c.cx()[k]]);
                    }
                }
                Family::XYTilde => {
                    for k in xs_opt(i) {
                        for l in ys_opt(j) {
                            fill(&[&c.cx()[k], &c.cy()[l]]);
                        }
                    }
                }
            }
        }
    }
    Ok(FamilyTally {
        nx,
        ny,
        types: map.into_iter().collect(),
    })
}

pub(crate) fn family_axes(c: &CodebookPair, family: Family) -> Vec<Alphabet> {
    use axis::*;
    family
        .labels()
        .iter()
        .map(|&l| {
            let k = match l {
                U => c.law().u_size(),
                X | X_TILDE => c.law().x_size(),
                _ => c.law().y_size(),
            };
            Alphabet::new(l, k).expect("nonempty alphabet")
        })
        .collect()
}

/// Smallest `δ ≥ 0` with `stat ≤ 2^{-n[F − offset − kδ]}`.
pub(crate) fn needed_delta(stat: f64, f: f64, offset: f64, k: f64, n: usize) -> f64 {
    let n = n as f64;
    ((stat.log2() + n * (f - offset)) / (n * k)).max(0.0)
}

/// Tallies all four families on the whole code and evaluates them per `mode`.
pub fn packing_report(c: &CodebookPair, rates: RatePair, delta: f64, mode: PackingMode) -> Result<PackingReport> {
    let xs: Vec<usize> = (0..c.m_x()).collect();
    let ys: Vec<usize> = (0..c.m_y()).collect();
    let pairs = (c.m_x() * c.m_y()) as f64;
    let n = c.n();
    let offset = mode.offset(rates);
    let mut entries = Vec::new();
    let mut families = Vec::new();
    for family in Family::ALL {
        let tally = tally_family(c, family, &xs, &ys)?;
        let axes = family_axes(c, family);
        let k = mode.k(family);
        let mut worst: f64 = 0.0;
        let mut holds = true;
        for (key, per_pair) in &tally.types {
            let total: u64 = per_pair.iter().map(|&v| v as u64).sum();
            let max = per_pair.iter().copied().max().unwrap_or(0) as u64;
            let t = TypeVector::new(&axes, key.clone())?;
            let f = family.f(&t.to_dist(), rates)?;
            let average = total as f64 / pairs;
            let stat = match mode {
                PackingMode::Average => average,
                PackingMode::PerPair | PackingMode::Expurgated => max as f64,
            };
            let achieved = needed_delta(stat, f, offset, k, n);
            let ok = achieved <= delta + 1e-12;
            worst = worst.max(achieved);
            holds &= ok;
            entries.push(TypeEntry {
                family,
                joint_type: t,
                f,
                total,
                average,
                max_per_pair: max,
                achieved_delta: achieved,
                holds: ok,
            });
        }
        families.push(FamilySummary {
            family,
            k,
            types: tally.types.len(),
            achieved_delta: worst,
            holds,
            empty: tally.types.is_empty(),
        });
    }
    let achieved_delta = families.iter().map(|f| f.achieved_delta).fold(0.0, f64::max);
    Ok(PackingReport {
        mode,
        n,
        m_x: c.m_x(),
        m_y: c.m_y(),
        rates,
        delta,
        holds: families.iter().all(|f| f.holds),
        families,
        achieved_delta,
        entries,
    })
}

/// Code-wide averaged packing inequalities.
pub fn packing_averages(c: &CodebookPair, rates: RatePair, delta: f64) -> Result<PackingReport> {
    packing_report(c, rates, delta, PackingMode::Average)
}

/// Per-pair counts against the bounds obtained by scaling the averages by `M_X M_Y`.
pub fn per_pair_maxima(c: &CodebookPair, rates: RatePair, delta: f64) -> Result<PackingReport> {
    packing_report(c, rates, delta, PackingMode::PerPair)
}

/// One pair type `P_{XX~}` of a single-user codebook.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairTypeEntry {
    pub joint_type: TypeVector,
    pub mutual_information: f64,
    /// `Σ_i Σ_{k≠i} 1[(x_i, x_k) ∈ T]`.
    pub total: u64,
    pub max_per_codeword: u64,
    /// `n(R − I) − log2(total / M)`; the averaged inequality holds iff nonnegative.
    pub average_slack: f64,
    /// `n(2R − I) − log2(max_per_codeword)`.
    pub per_codeword_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingleUserReport {
    pub n: usize,
    pub m: usize,
    pub rate: f64,
    pub entries: Vec<PairTypeEntry>,
    pub average_holds: bool,
    pub per_codeword_holds: bool,
    pub min_average_slack: f64,
    pub min_per_codeword_slack: f64,
}

/// Averaged and per-codeword pair-type packing for one codebook in a single type class.
pub fn single_user_packing_check(codebook: &[Sequence], rate: f64, n: usize) -> Result<SingleUserReport> {
    let m = codebook.len();
    if m == 0 {
        return Err(Error::usage("empty codebook"));
    }
    let k = codebook[0].alphabet().size();
    if codebook.iter().any(|s| s.len() != n || s.alphabet().size() != k) {
        return Err(Error::usage("codewords must share the alphabet and have length n"));
    }
    let first = crate::types::empirical_type(&[&codebook[0]])?;
    if codebook.iter().any(|s| crate::types::empirical_type(&[s]).map(|t| t.counts() != first.counts()).unwrap_or(true)) {
        return Err(Error::usage("codewords must lie in one type class"));
    }
    let work = (m as u128).pow(2) * n as u128;
    if work > MAX_TALLY_WORK {
        return Err(Error::guard("single-user pair tally", work, MAX_TALLY_WORK));
    }
    let axes = [Alphabet::new(axis::X, k)?, Alphabet::new(axis::X_TILDE, k)?];
    let mut map: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
    for (i, xi) in codebook.iter().enumerate() {
        for (j, xk) in codebook.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut counts = vec![0u32; k * k];
            for t in 0..n {
                counts[xi.symbols()[t] * k + xk.symbols()[t]] += 1;
            }
            map.entry(counts).or_insert_with(|| vec![0; m])[i] += 1;
        }
    }
    let nf = n as f64;
    let mut entries = Vec::new();
    for (key, per) in map {
        let t = TypeVector::new(&axes, key)?;
        let mi = conditional_mutual_information(&t.to_dist(), &[axis::X], &[axis::X_TILDE], &[])?;
        let total: u64 = per.iter().sum();
        let max = per.iter().copied().max().unwrap_or(0);
        entries.push(PairTypeEntry {
            joint_type: t,
            mutual_information: mi,
            total,
            max_per_codeword: max,
            average_slack: nf * (rate - mi) - (total as f64 / m as f64).log2(),
            per_codeword_slack: nf * (2.0 * rate - mi) - (max as f64).log2(),
        });
    }
    let min_a = entries.iter().map(|e| e.average_slack).fold(f64::INFINITY, f64::min);
    let min_p = entries.iter().map(|e| e.per_codeword_slack).fold(f64::INFINITY, f64::min);
    Ok(SingleUserReport {
        n,
        m,
        rate,
        average_holds: min_a >= -1e-12,
        per_codeword_holds: min_p >= -1e-12,
        min_average_slack: min_a,
        min_per_codeword_slack: min_p,
        entries,
    })
}
