//! Constant-conditional-composition codebooks and the counting audits run on them.
//!
//! A [`CodebookPair`] fixes a time-sharing sequence `u` and draws every
//! codeword from the conditional type classes `T_{P_{X|U}}(u)` and
//! `T_{P_{Y|U}}(u)`. [`packing`] tallies how often each joint type of
//! codeword pairs, triples and quadruples occurs; [`expurgate()`] removes
//! codewords from one book until every remaining pair satisfies per-pair
//! bounds; [`audit_lemma4`] checks the realized joint types of the result.

mod expurgate;
mod packing;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{InputLaw, RatePair};
use crate::prob::{axis, Alphabet, JointDist};
use crate::types::{empirical_type, sample_conditional_with, type_class_size, Sequence, TypeVector};

pub use expurgate::{audit_lemma4, expurgate, AuditEntry, Book, Expurgation, ExpurgationStep, Lemma4Audit};
pub use packing::{
    packing_averages, packing_report, per_pair_maxima, single_user_packing_check, Family, FamilySummary,
    PackingMode, PackingReport, PairTypeEntry, SingleUserReport, TypeEntry, MAX_TALLY_WORK,
};

/// Time-sharing sequence plus one codebook per user.
#[derive(Clone, Debug, PartialEq)]
pub struct CodebookPair {
    u: Sequence,
    cx: Vec<Sequence>,
    cy: Vec<Sequence>,
    law: InputLaw,
}

/// `n·P` as an integer, if it is one.
fn integral_count(p: f64, n: usize) -> Option<u32> {
    let c = p * n as f64;
    let r = c.round();
    ((c - r).abs() <= 1e-9 && r >= 0.0).then_some(r as u32)
}

/// `(u, a)` counts `n·P_{UA}` for the `X` (`is_x`) or `Y` input.
fn conditional_counts(law: &InputLaw, n: usize, is_x: bool) -> Result<TypeVector> {
    let ka = if is_x { law.x_size() } else { law.y_size() };
    let label = if is_x { axis::X } else { axis::Y };
    let mut counts = Vec::with_capacity(law.u_size() * ka);
    for u in 0..law.u_size() {
        for a in 0..ka {
            let p = if is_x { law.p_ux(u, a) } else { law.p_uy(u, a) };
            counts.push(integral_count(p, n).ok_or_else(|| {
                Error::construction(format!(
                    "n·P_U{label}(u={u}, {label}={a}) = {} is not an integer at n = {n}",
                    p * n as f64
                ))
            })?);
        }
    }
    TypeVector::new(
        &[Alphabet::new(axis::U, law.u_size())?, Alphabet::new(label, ka)?],
        counts,
    )
}

/// The sorted sequence `0…0 1…1 …` of type `n·P_U`.
pub fn time_sharing_sequence(law: &InputLaw, n: usize) -> Result<Sequence> {
    if n == 0 {
        return Err(Error::usage("blocklength must be at least 1"));
    }
    let pu = law.joint().marginalize(&[axis::U])?;
    let mut symbols = Vec::with_capacity(n);
    for (u, &p) in pu.probs().iter().enumerate() {
        let c = integral_count(p, n)
            .ok_or_else(|| Error::construction(format!("n·P_U({u}) = {} is not an integer at n = {n}", p * n as f64)))?;
        symbols.extend(std::iter::repeat_n(u, c as usize));
    }
    Sequence::new(Alphabet::new(axis::U, law.u_size())?, symbols)
}

impl CodebookPair {
    /// Validates conditional types (exact counts) and distinctness within each book.
    pub fn new(u: Sequence, cx: Vec<Sequence>, cy: Vec<Sequence>, law: InputLaw) -> Result<Self> {
        let n = u.len();
        if u.alphabet().size() != law.u_size() {
            return Err(Error::usage("u alphabet does not match the input law"));
        }
        let u = u.relabel(axis::U);
        let tx = conditional_counts(&law, n, true)?;
        let ty = conditional_counts(&law, n, false)?;
        let check = |book: &[Sequence], t: &TypeVector, label: &str| -> Result<Vec<Sequence>> {
            let mut out = Vec::with_capacity(book.len());
            for (i, s) in book.iter().enumerate() {
                let s = s.relabel(label);
                if s.alphabet().size() != t.shape()[1] {
                    return Err(Error::usage(format!("{label} codeword {i} has the wrong alphabet")));
                }
                if s.len() != n {
                    return Err(Error::usage(format!("{label} codeword {i} has length {}, u has {n}", s.len())));
                }
                if empirical_type(&[&u, &s])?.counts() != t.counts() {
                    return Err(Error::construction(format!(
                        "{label} codeword {i} is not in the conditional type class"
                    )));
                }
                if out.contains(&s) {
                    return Err(Error::construction(format!("{label} codeword {i} repeats an earlier one")));
                }
                out.push(s);
            }
            Ok(out)
        };
        let cx = check(&cx, &tx, axis::X)?;
        let cy = check(&cy, &ty, axis::Y)?;
        if cx.is_empty() || cy.is_empty() {
            return Err(Error::usage("both codebooks need at least one codeword"));
        }
        Ok(CodebookPair { u, cx, cy, law })
    }

    pub fn u(&self) -> &Sequence {
        &self.u
    }

    pub fn cx(&self) -> &[Sequence] {
        &self.cx
    }

    pub fn cy(&self) -> &[Sequence] {
        &self.cy
    }

    pub fn law(&self) -> &InputLaw {
        &self.law
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn m_x(&self) -> usize {
        self.cx.len()
    }

    pub fn m_y(&self) -> usize {
        self.cy.len()
    }

    /// `(log2 M_X / n, log2 M_Y / n)`.
    pub fn nominal_rates(&self) -> RatePair {
        let n = self.n() as f64;
        RatePair {
            r_x: (self.m_x() as f64).log2() / n,
            r_y: (self.m_y() as f64).log2() / n,
        }
    }

    /// Keeps the listed codewords (in the given order).
    pub fn select(&self, xs: &[usize], ys: &[usize]) -> Result<CodebookPair> {
        let pick = |book: &[Sequence], idx: &[usize]| -> Result<Vec<Sequence>> {
            idx.iter()
                .map(|&i| book.get(i).cloned().ok_or_else(|| Error::usage(format!("codeword index {i} out of range"))))
                .collect()
        };
        CodebookPair::new(self.u.clone(), pick(&self.cx, xs)?, pick(&self.cy, ys)?, self.law.clone())
    }

    /// Applies one permutation to the positions of `u` and every codeword.
    pub fn permute_positions(&self, perm: &[usize]) -> CodebookPair {
        CodebookPair {
            u: self.u.permute_positions(perm),
            cx: self.cx.iter().map(|s| s.permute_positions(perm)).collect(),
            cy: self.cy.iter().map(|s| s.permute_positions(perm)).collect(),
            law: self.law.clone(),
        }
    }

    pub fn to_file(&self) -> CodebookFile {
        let j = self.law.joint();
        CodebookFile {
            n: self.n(),
            u: self.u.symbols().to_vec(),
            cx: self.cx.iter().map(|s| s.symbols().to_vec()).collect(),
            cy: self.cy.iter().map(|s| s.symbols().to_vec()).collect(),
            input_law_ref: LawFile {
                u_size: self.law.u_size(),
                x_size: self.law.x_size(),
                y_size: self.law.y_size(),
                probs: j.probs().to_vec(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("codebook serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("codebook file, line {} column {}: {e}", e.line(), e.column()))
        })?;
        file.into_codebook()
    }
}

/// Joint input law `P_{UXY}` as stored in files: row-major `(u, x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub u_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub probs: Vec<f64>,
}

impl LawFile {
    pub fn into_law(&self) -> Result<InputLaw> {
        let axes = vec![
            Alphabet::new(axis::U, self.u_size)?,
            Alphabet::new(axis::X, self.x_size)?,
            Alphabet::new(axis::Y, self.y_size)?,
        ];
        InputLaw::new(JointDist::new(axes, self.probs.clone())?)
    }
}

/// On-disk codebook document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookFile {
    pub n: usize,
    pub u: Vec<usize>,
    pub cx: Vec<Vec<usize>>,
    pub cy: Vec<Vec<usize>>,
    pub input_law_ref: LawFile,
}

impl CodebookFile {
    pub fn into_codebook(self) -> Result<CodebookPair> {
        let law = self.input_law_ref.into_law()?;
        if self.u.len() != self.n {
            return Err(Error::Parse(format!("field u has length {}, n = {}", self.u.len(), self.n)));
        }
        let seq = |label: &str, k: usize, s: Vec<usize>, field: String| -> Result<Sequence> {
            Sequence::new(Alphabet::new(label, k)?, s).map_err(|e| Error::Parse(format!("field {field}: {e}")))
        };
        let u = seq(axis::U, law.u_size(), self.u, "u".into())?;
        let cx = self
            .cx
            .into_iter()
            .enumerate()
            .map(|(i, s)| seq(axis::X, law.x_size(), s, format!("cx[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let cy = self
            .cy
            .into_iter()
            .enumerate()
            .map(|(i, s)| seq(axis::Y, law.y_size(), s, format!("cy[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        CodebookPair::new(u, cx, cy, law)
    }
}

/// Draws attempted per requested codeword before giving up on distinctness.
const DRAWS_PER_CODEWORD: usize = 1000;

/// Uniform i.i.d. draws from the conditional type classes, rejection-resampled
/// until the codewords of each book are distinct.
pub fn generate_codebooks(p: &InputLaw, u: &Sequence, m_x: usize, m_y: usize, seed: u64) -> Result<CodebookPair> {
    if m_x == 0 || m_y == 0 {
        return Err(Error::usage("codebook sizes must be positive"));
    }
    if u.alphabet().size() != p.u_size() {
        return Err(Error::usage("u alphabet does not match the input law"));
    }
    let n = u.len();
    let u = u.relabel(axis::U);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |is_x: bool, m: usize| -> Result<Vec<Sequence>> {
        let t = conditional_counts(p, n, is_x)?;
        let class = conditional_class_size(&t);
        if class < BigUint::from(m) {
            return Err(Error::construction(format!(
                "conditional type class has {class} sequences, {m} distinct codewords requested"
            )));
        }
        let mut out: Vec<Sequence> = Vec::with_capacity(m);
        let mut draws = 0;
        while out.len() < m {
            draws += 1;
            if draws > DRAWS_PER_CODEWORD * m {
                return Err(Error::construction("could not draw enough distinct codewords"));
            }
            let s = sample_conditional_with(&t, &u, &mut rng)?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Ok(out)
    };
    let cx = draw(true, m_x)?;
    let cy = draw(false, m_y)?;
    CodebookPair::new(u, cx, cy, p.clone())
}

/// `|T_{P_{A|U}}(u)| = Π_u n_u! / Π_a n_{ua}!`.
fn conditional_class_size(t: &TypeVector) -> BigUint {
    let (ku, ka) = (t.shape()[0], t.shape()[1]);
    let mut total = BigUint::from(1u32);
    for u in 0..ku {
        let row = t.counts()[u * ka..(u + 1) * ka].to_vec();
        if row.iter().all(|&c| c == 0) {
            continue;
        }
        let axes = [Alphabet::new("A", ka).expect("nonempty alphabet")];
        total *= type_class_size(&TypeVector::new(&axes, row).expect("row sums positive"));
    }
    total
}
