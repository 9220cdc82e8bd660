//! Codeword expurgation on one book and the realizability audit of the result.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::packing::{family_axes, guard_tally, tally_family, Family, PackingMode, PackingReport};
use super::{packing_report, CodebookPair};
use crate::error::Result;
use crate::exponent::{lemma4_check, Lemma4Constraint, Lemma4Report, RatePair};
use crate::prob::{axis, Alphabet, EQ_TOL};
use crate::types::TypeVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Book {
    X,
    Y,
}

/// One half-selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpurgationStep {
    pub family: Family,
    pub before: usize,
    /// Codewords already meeting every per-pair bound of this family.
    pub compliant: usize,
    pub after: usize,
    /// Indices into the input book of the codewords dropped here.
    pub removed: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expurgation {
    pub code: CodebookPair,
    pub book: Book,
    pub steps: Vec<ExpurgationStep>,
    /// Indices into the input books of the surviving codewords.
    pub kept_x: Vec<usize>,
    pub kept_y: Vec<usize>,
    /// `16 |C*_X| |C*_Y| ≥ |C_X| |C_Y|`.
    pub product_bound_holds: bool,
    /// Smallest `δ` for which every post-expurgation per-pair bound holds.
    pub achieved_delta: f64,
    /// Per-pair report of the output at `achieved_delta`.
    pub report: PackingReport,
    pub notes: Vec<String>,
}

fn ceil_half(m: usize) -> usize {
    m.div_ceil(2)
}

/// Drops codewords of one book in four passes (one per packing family). Each
/// pass keeps every codeword whose pairs meet the family's per-pair bound at
/// `delta` and tops up to half the book with the lowest-scoring rest, where a
/// codeword's score is its worst per-type average excess over the other book.
/// `C_Y` is expurgated when `R_X ≤ R_Y`, `C_X` otherwise.
pub fn expurgate(c: &CodebookPair, rates: RatePair, delta: f64) -> Result<Expurgation> {
    let book = if rates.r_x <= rates.r_y { Book::Y } else { Book::X };
    let mut xs: Vec<usize> = (0..c.m_x()).collect();
    let mut ys: Vec<usize> = (0..c.m_y()).collect();
    guard_tally(c, xs.len(), ys.len())?;
    let n = c.n();
    let nf = n as f64;
    let m = rates.min();
    let mut steps = Vec::new();
    let mut notes = Vec::new();

    let size = match book {
        Book::X => c.m_x(),
        Book::Y => c.m_y(),
    };
    if size < 2 {
        notes.push(format!("{book:?} book has {size} codeword(s); nothing to expurgate"));
    } else {
        let mut f_cache: HashMap<(Family, Vec<u32>), f64> = HashMap::new();
        for family in Family::ALL {
            let tally = tally_family(c, family, &xs, &ys)?;
            let axes = family_axes(c, family);
            let (own, other) = match book {
                Book::X => (tally.nx, tally.ny),
                Book::Y => (tally.ny, tally.nx),
            };
            let mut score = vec![f64::NEG_INFINITY; own];
            let mut compliant = vec![true; own];
            for (key, per_pair) in &tally.types {
                let f = match f_cache.get(&(family, key.clone())) {
                    Some(&f) => f,
                    None => {
                        let f = family.f(&TypeVector::new(&axes, key.clone())?.to_dist(), rates)?;
                        f_cache.insert((family, key.clone()), f);
                        f
                    }
                };
                for a in 0..own {
                    let mut sum = 0u64;
                    for b in 0..other {
                        let cnt = match book {
                            Book::X => per_pair[a * tally.ny + b],
                            Book::Y => per_pair[b * tally.ny + a],
                        };
                        if cnt == 0 {
                            continue;
                        }
                        sum += cnt as u64;
                        if (cnt as f64).log2() + nf * (f - m - family.k_expurgated() * delta) > 1e-9 {
                            compliant[a] = false;
                        }
                    }
                    if sum > 0 {
                        let s = (sum as f64 / other as f64).log2() + nf * (f - family.k_average() * delta);
                        score[a] = score[a].max(s);
                    }
                }
            }
            let mut keep: Vec<usize> = (0..own).filter(|&a| compliant[a]).collect();
            let n_compliant = keep.len();
            let mut rest: Vec<usize> = (0..own).filter(|&a| !compliant[a]).collect();
            rest.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
            let need = ceil_half(own).saturating_sub(keep.len());
            keep.extend(rest.iter().take(need));
            keep.sort_unstable();
            let current = match book {
                Book::X => &mut xs,
                Book::Y => &mut ys,
            };
            let removed: Vec<usize> = (0..own).filter(|a| keep.binary_search(a).is_err()).map(|a| current[a]).collect();
            let next: Vec<usize> = keep.iter().map(|&a| current[a]).collect();
            steps.push(ExpurgationStep {
                family,
                before: own,
                compliant: n_compliant,
                after: next.len(),
                removed,
            });
            *current = next;
        }
    }

    let code = c.select(&xs, &ys)?;
    let probe = packing_report(&code, rates, 0.0, PackingMode::Expurgated)?;
    let achieved_delta = probe.achieved_delta;
    let report = packing_report(&code, rates, achieved_delta, PackingMode::Expurgated)?;
    Ok(Expurgation {
        product_bound_holds: 16 * code.m_x() * code.m_y() >= c.m_x() * c.m_y(),
        code,
        book,
        steps,
        kept_x: xs,
        kept_y: ys,
        achieved_delta,
        report,
        notes,
    })
}

/// A realized `V_{U X Y X~ Y~}` type with the tuples producing it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditEntry {
    pub joint_type: TypeVector,
    /// `k ≠ i`.
    pub distinct_x: bool,
    /// `l ≠ j`.
    pub distinct_y: bool,
    pub occurrences: u64,
    pub report: Lemma4Report,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma4Audit {
    pub rates: RatePair,
    pub delta: f64,
    pub types_checked: usize,
    pub feasible: bool,
    /// Entries with at least one violation.
    pub violations: Vec<AuditEntry>,
}

/// Checks every realized type of `(u, x_i, y_j, x_k, y_l)`. Conditions that
/// only hold for distinct indices are skipped when `k = i` or `l = j`.
pub fn audit_lemma4(c: &CodebookPair, rates: RatePair, delta: f64) -> Result<Lemma4Audit> {
    guard_tally(c, c.m_x(), c.m_y())?;
    let n = c.n();
    let (ku, kx, ky) = (c.law().u_size(), c.law().x_size(), c.law().y_size());
    let axes = [
        Alphabet::new(axis::U, ku)?,
        Alphabet::new(axis::X, kx)?,
        Alphabet::new(axis::Y, ky)?,
        Alphabet::new(axis::X_TILDE, kx)?,
        Alphabet::new(axis::Y_TILDE, ky)?,
    ];
    let u = c.u().symbols();
    let mut found: BTreeMap<(Vec<u32>, bool, bool), u64> = BTreeMap::new();
    let mut counts = vec![0u32; ku * kx * ky * kx * ky];
    for (i, x) in c.cx().iter().enumerate() {
        for (j, y) in c.cy().iter().enumerate() {
            for (k, xt) in c.cx().iter().enumerate() {
                for (l, yt) in c.cy().iter().enumerate() {
                    counts.iter_mut().for_each(|v| *v = 0);
                    for t in 0..n {
                        let cell = (((u[t] * kx + x.symbols()[t]) * ky + y.symbols()[t]) * kx + xt.symbols()[t]) * ky
                            + yt.symbols()[t];
                        counts[cell] += 1;
                    }
                    *found.entry((counts.clone(), k != i, l != j)).or_insert(0) += 1;
                }
            }
        }
    }
    let types_checked = found.len();
    let mut violations = Vec::new();
    for ((key, dx, dy), occurrences) in found {
        let constraints: Vec<Lemma4Constraint> = Lemma4Constraint::ALL
            .into_iter()
            .filter(|c| (dx || !c.needs_distinct_x()) && (dy || !c.needs_distinct_y()))
            .collect();
        let t = TypeVector::new(&axes, key)?;
        let report = lemma4_check(&t.to_dist(), c.law(), rates, delta, &constraints, EQ_TOL)?;
        if !report.feasible {
            violations.push(AuditEntry {
                joint_type: t,
                distinct_x: dx,
                distinct_y: dy,
                occurrences,
                report,
            });
        }
    }
    Ok(Lemma4Audit {
        rates,
        delta,
        types_checked,
        feasible: violations.is_empty(),
        violations,
    })
}

/// Worst per-pair requirement of one family at `offset`, `k` (helper for tests).
#[cfg(test)]
pub(crate) fn family_requirement(c: &CodebookPair, family: Family, rates: RatePair, offset: f64, k: f64) -> f64 {
    use super::packing::needed_delta;
    let xs: Vec<usize> = (0..c.m_x()).collect();
    let ys: Vec<usize> = (0..c.m_y()).collect();
    let tally = tally_family(c, family, &xs, &ys).unwrap();
    let axes = family_axes(c, family);
    tally
        .types
        .iter()
        .map(|(key, per)| {
            let f = family.f(&TypeVector::new(&axes, key.clone()).unwrap().to_dist(), rates).unwrap();
            let max = per.iter().copied().max().unwrap() as f64;
            needed_delta(max, f, offset, k, c.n())
        })
        .fold(0.0, f64::max)
}
