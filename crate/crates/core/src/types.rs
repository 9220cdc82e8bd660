//! Exact combinatorics of types.
//!
//! A type is an integer count tensor with a denominator `n`; equality of
//! types is integer equality, never float comparison. Enumeration streams are
//! lazy and emit count tensors in ascending lexicographic order.

use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{cell_count, flat_index, Alphabet, JointDist};

/// Largest product alphabet (in cells) enumerated for joint types over four or more axes.
pub const MAX_JOINT_CELLS: usize = 32;
/// Largest blocklength enumerated for joint types over four or more axes.
pub const MAX_JOINT_N: u32 = 12;

/// A finite sequence over one alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequence {
    alphabet: Alphabet,
    symbols: Vec<usize>,
}

impl Sequence {
    pub fn new(alphabet: Alphabet, symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::usage("sequences must have length at least 1"));
        }
        if let Some(s) = symbols.iter().find(|&&s| s >= alphabet.size()) {
            return Err(Error::usage(format!(
                "symbol {s} outside alphabet {:?} of size {}",
                alphabet.label(),
                alphabet.size()
            )));
        }
        Ok(Sequence { alphabet, symbols })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Same symbols under a different axis label.
    pub fn relabel(&self, label: &str) -> Sequence {
        Sequence {
            alphabet: self.alphabet.relabel(label),
            symbols: self.symbols.clone(),
        }
    }

    /// Reorder positions: output position `t` carries input position `perm[t]`.
    pub fn permute_positions(&self, perm: &[usize]) -> Sequence {
        Sequence {
            alphabet: self.alphabet.clone(),
            symbols: perm.iter().map(|&p| self.symbols[p]).collect(),
        }
    }
}

/// Integer occurrence counts over a product of alphabets, with denominator `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeVector {
    labels: Vec<String>,
    shape: Vec<usize>,
    counts: Vec<u32>,
    n: u32,
}

impl TypeVector {
    pub fn new(axes: &[Alphabet], counts: Vec<u32>) -> Result<Self> {
        if counts.len() != cell_count(axes) {
            return Err(Error::usage("count tensor does not match the axes"));
        }
        let n: u64 = counts.iter().map(|&c| c as u64).sum();
        if n == 0 {
            return Err(Error::usage("a type needs a positive denominator"));
        }
        Ok(TypeVector {
            labels: axes.iter().map(|a| a.label().to_string()).collect(),
            shape: axes.iter().map(|a| a.size()).collect(),
            counts,
            n: n as u32,
        })
    }

    pub fn axes(&self) -> Vec<Alphabet> {
        self.labels
            .iter()
            .zip(&self.shape)
            .map(|(l, &s)| Alphabet::new(l.clone(), s).expect("validated at construction"))
            .collect()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn count(&self, index: &[usize]) -> u32 {
        self.counts[flat_index(&self.shape, index)]
    }

    pub fn to_dist(&self) -> JointDist {
        JointDist::from_counts(self.axes(), &self.counts, self.n).expect("a type is a distribution")
    }

    /// Counts of the marginal over the axes named in `keep`, in that order.
    pub fn marginal(&self, keep: &[&str]) -> Result<TypeVector> {
        let positions: Vec<usize> = keep
            .iter()
            .map(|l| {
                self.labels
                    .iter()
                    .position(|m| m == l)
                    .ok_or_else(|| Error::usage(format!("no axis labelled {l:?}")))
            })
            .collect::<Result<_>>()?;
        let kept: Vec<usize> = positions.iter().map(|&p| self.shape[p]).collect();
        let map = crate::prob::projection_map(&self.shape, &positions, &kept);
        let mut counts = vec![0u32; kept.iter().product()];
        for (cell, &c) in self.counts.iter().enumerate() {
            counts[map[cell]] += c;
        }
        Ok(TypeVector {
            labels: keep.iter().map(|s| s.to_string()).collect(),
            shape: kept,
            counts,
            n: self.n,
        })
    }
}

/// Joint type of equally long sequences; axes follow the sequences' alphabets.
pub fn empirical_type(seqs: &[&Sequence]) -> Result<TypeVector> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::usage("empirical_type needs at least one sequence"))?;
    let n = first.len();
    if seqs.iter().any(|s| s.len() != n) {
        return Err(Error::usage("sequences have different lengths"));
    }
    let axes: Vec<Alphabet> = seqs.iter().map(|s| s.alphabet.clone()).collect();
    let shape: Vec<usize> = axes.iter().map(|a| a.size()).collect();
    let mut counts = vec![0u32; cell_count(&axes)];
    for t in 0..n {
        let cell = seqs
            .iter()
            .zip(&shape)
            .fold(0, |acc, (s, &k)| acc * k + s.symbols[t]);
        counts[cell] += 1;
    }
    TypeVector::new(&axes, counts)
}

/// Lazy stream of all compositions of `total` into `parts` nonnegative parts,
/// in ascending lexicographic order.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Vec<u32>,
    done: bool,
}

impl Compositions {
    pub fn new(total: u32, parts: usize) -> Self {
        if parts == 0 {
            return Compositions {
                current: Vec::new(),
                done: total != 0,
            };
        }
        let mut current = vec![0; parts];
        current[parts - 1] = total;
        Compositions {
            current,
            done: false,
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // rightmost nonzero entry past the first position
        match (1..k).rev().find(|&p| self.current[p] > 0) {
            Some(p) => {
                let rest: u32 = self.current[p..].iter().sum();
                self.current[p - 1] += 1;
                for c in &mut self.current[p..] {
                    *c = 0;
                }
                self.current[k - 1] = rest - 1;
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// `C(total + parts - 1, parts - 1)`, saturating.
pub fn composition_count(total: u32, parts: usize) -> u128 {
    if parts == 0 {
        return (total == 0) as u128;
    }
    let (n, k) = (total as u128 + parts as u128 - 1, parts as u128 - 1);
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn guard_joint(n: u32, axes: &[Alphabet]) -> Result<()> {
    if axes.len() >= 4 {
        let cells = cell_count(axes);
        if cells > MAX_JOINT_CELLS {
            return Err(Error::guard(
                "joint type enumeration (cells)",
                cells as u128,
                MAX_JOINT_CELLS as u128,
            ));
        }
        if n > MAX_JOINT_N {
            return Err(Error::guard(
                "joint type enumeration (n)",
                n as u128,
                MAX_JOINT_N as u128,
            ));
        }
    }
    Ok(())
}

/// All types with denominator `n` over the product of `axes`, each exactly once.
pub fn enumerate_types(n: u32, axes: &[Alphabet]) -> Result<impl Iterator<Item = TypeVector>> {
    if n == 0 {
        return Err(Error::usage("n must be at least 1"));
    }
    guard_joint(n, axes)?;
    let axes = axes.to_vec();
    Ok(Compositions::new(n, cell_count(&axes))
        .map(move |c| TypeVector::new(&axes, c).expect("compositions sum to n")))
}

/// Rational joint distributions with denominator `d`: the types of [`enumerate_types`] as distributions.
pub fn enumerate_lattice(d: u32, axes: &[Alphabet]) -> Result<impl Iterator<Item = JointDist>> {
    Ok(enumerate_types(d, axes)?.map(|t| t.to_dist()))
}

/// `|T_P| = n! / Π counts!`.
pub fn type_class_size(t: &TypeVector) -> BigUint {
    // product of binomials C(c_1 + .. + c_i, c_i)
    let mut acc = BigUint::from(1u32);
    let mut running = 0u64;
    for &c in &t.counts {
        for j in 1..=c as u64 {
            acc *= running + j;
            acc /= j;
        }
        running += c as u64;
    }
    acc
}

/// Whether the joint type of `seqs` is exactly `t`.
pub fn in_type_class(t: &TypeVector, seqs: &[&Sequence]) -> bool {
    match empirical_type(seqs) {
        Ok(e) => e.counts == t.counts && e.shape == t.shape && e.n == t.n,
        Err(_) => false,
    }
}

/// Uniform draw from the conditional type class `T_{P_{X|U}}(u)`.
///
/// `joint` holds the `(u, x)` counts `n·P_{UX}`; its first axis is `U`, the
/// second is the alphabet of the returned sequence.
pub fn sample_conditional_type_class(joint: &TypeVector, u: &Sequence, seed: u64) -> Result<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_conditional_with(joint, u, &mut rng)
}

/// As [`sample_conditional_type_class`], drawing from a caller-owned generator.
pub fn sample_conditional_with<R: Rng + ?Sized>(
    joint: &TypeVector,
    u: &Sequence,
    rng: &mut R,
) -> Result<Sequence> {
    if joint.shape.len() != 2 {
        return Err(Error::usage("conditional type must have exactly two axes (U, X)"));
    }
    let (ku, kx) = (joint.shape[0], joint.shape[1]);
    if u.alphabet.size() != ku {
        return Err(Error::usage("u lives on a different alphabet than the type's U axis"));
    }
    if u.len() != joint.n as usize {
        return Err(Error::construction(format!(
            "u has length {}, type has denominator {}",
            u.len(),
            joint.n
        )));
    }
    let mut sections: Vec<Vec<usize>> = vec![Vec::new(); ku];
    for (t, &s) in u.symbols.iter().enumerate() {
        sections[s].push(t);
    }
    let out_alphabet = Alphabet::new(joint.labels[1].clone(), kx)?;
    let mut symbols = vec![0usize; u.len()];
    for (a, positions) in sections.iter().enumerate() {
        let row = &joint.counts[a * kx..(a + 1) * kx];
        let row_total: u32 = row.iter().sum();
        if row_total as usize != positions.len() {
            return Err(Error::construction(format!(
                "u has {} positions with symbol {a}, the type prescribes {row_total}",
                positions.len()
            )));
        }
        let mut pool: Vec<usize> = row
            .iter()
            .enumerate()
            .flat_map(|(x, &c)| std::iter::repeat_n(x, c as usize))
            .collect();
        pool.shuffle(rng);
        for (&t, x) in positions.iter().zip(pool) {
            symbols[t] = x;
        }
    }
    Sequence::new(out_alphabet, symbols)
}
