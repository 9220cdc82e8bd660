//! Finite-alphabet probability objects and the information measures built on them.
//!
//! All logarithms are base 2, so every entropy, divergence and mutual
//! information returned here is in bits. Distributions are dense `f64`
//! tensors over labelled axes; measures select axes by label, which lets the
//! exponent code talk about `I(X~ ∧ XZ | YU)` without index bookkeeping.
//!
//! Conventions: `0·log 0 = 0`, `0·log(0/0) = 0`, and `p·log(p/0) = +∞`
//! (returned as [`f64::INFINITY`], never as an overflowed float).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries of a validated distribution sum to one within this tolerance.
pub const SUM_TOL: f64 = 1e-12;
/// Tolerance for equalities between computed real quantities.
pub const EQ_TOL: f64 = 1e-10;
/// Inputs whose mass is within this distance of one are renormalized; others are rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Conventional axis labels.
pub mod axis {
    pub const U: &str = "U";
    pub const X: &str = "X";
    pub const Y: &str = "Y";
    pub const X_TILDE: &str = "X~";
    pub const Y_TILDE: &str = "Y~";
    pub const Z: &str = "Z";
}

/// A finite alphabet `{0, .., size-1}` with a short label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
    label: String,
}

impl Alphabet {
    pub fn new(label: impl Into<String>, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::usage("alphabet size must be at least 1"));
        }
        Ok(Alphabet {
            size,
            label: label.into(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Same alphabet under a different label.
    pub fn relabel(&self, label: impl Into<String>) -> Self {
        Alphabet {
            size: self.size,
            label: label.into(),
        }
    }
}

/// `p·log2 p` with the `0·log 0 = 0` convention.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

fn check_mass(probs: &mut [f64], what: &str) -> Result<()> {
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::invalid(format!("{what}: entry {i} is {p}")));
    }
    let total: f64 = probs.iter().sum();
    let gap = (total - 1.0).abs();
    if gap <= SUM_TOL {
        Ok(())
    } else if gap <= RENORMALIZE_TOL {
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: mass {total} is not 1")))
    }
}

/// A probability distribution on a single alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Dist {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl Dist {
    pub fn new(alphabet: Alphabet, mut probs: Vec<f64>) -> Result<Self> {
        if probs.len() != alphabet.size() {
            return Err(Error::usage(format!(
                "{} probabilities for an alphabet of size {}",
                probs.len(),
                alphabet.size()
            )));
        }
        check_mass(&mut probs, alphabet.label())?;
        Ok(Dist { alphabet, probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let k = alphabet.size();
        Dist {
            alphabet,
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn to_joint(&self) -> JointDist {
        JointDist {
            axes: vec![self.alphabet.clone()],
            probs: self.probs.clone(),
        }
    }
}

/// Dense probability tensor over an ordered product of labelled alphabets.
///
/// Storage is row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDist {
    axes: Vec<Alphabet>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Alphabet>, mut probs: Vec<f64>) -> Result<Self> {
        check_labels(&axes)?;
        let cells = cell_count(&axes);
        if probs.len() != cells {
            return Err(Error::usage(format!(
                "{} probabilities for a product of {cells} cells",
                probs.len()
            )));
        }
        check_mass(&mut probs, "joint distribution")?;
        Ok(JointDist { axes, probs })
    }

    /// Exact rational distribution `counts / denominator`.
    pub fn from_counts(axes: Vec<Alphabet>, counts: &[u32], denominator: u32) -> Result<Self> {
        check_labels(&axes)?;
        if counts.len() != cell_count(&axes) {
            return Err(Error::usage("count tensor does not match the axes"));
        }
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if denominator == 0 || total != denominator as u64 {
            return Err(Error::invalid(format!(
                "counts sum to {total}, denominator is {denominator}"
            )));
        }
        let d = denominator as f64;
        Ok(JointDist {
            axes,
            probs: counts.iter().map(|&c| c as f64 / d).collect(),
        })
    }

    /// Product of independent single-axis distributions, in the given order.
    pub fn product(factors: &[&Dist]) -> Result<Self> {
        let axes: Vec<Alphabet> = factors.iter().map(|d| d.alphabet.clone()).collect();
        check_labels(&axes)?;
        let mut probs = vec![1.0];
        for f in factors {
            probs = probs
                .iter()
                .flat_map(|&p| f.probs.iter().map(move |&q| p * q))
                .collect();
        }
        Ok(JointDist { axes, probs })
    }

    pub fn axes(&self) -> &[Alphabet] {
        &self.axes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.label()).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size()).collect()
    }

    pub fn axis_position(&self, label: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.label() == label)
            .ok_or_else(|| Error::usage(format!("no axis labelled {label:?}")))
    }

    pub fn axis(&self, label: &str) -> Result<&Alphabet> {
        Ok(&self.axes[self.axis_position(label)?])
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        flat_index(&self.shape(), index)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.probs[self.flat_index(index)]
    }

    /// Sum out every axis not in `keep`; the result's axes follow the order of `keep`.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointDist> {
        let positions = self.positions(keep)?;
        let shape = self.shape();
        let kept_axes: Vec<Alphabet> = positions.iter().map(|&p| self.axes[p].clone()).collect();
        let kept_shape: Vec<usize> = kept_axes.iter().map(|a| a.size()).collect();
        let map = projection_map(&shape, &positions, &kept_shape);
        let mut probs = vec![0.0; cell_count(&kept_axes)];
        for (cell, &p) in self.probs.iter().enumerate() {
            probs[map[cell]] += p;
        }
        Ok(JointDist {
            axes: kept_axes,
            probs,
        })
    }

    /// Permute the axes into the order given by `labels` (which must name every axis).
    pub fn reorder(&self, labels: &[&str]) -> Result<JointDist> {
        if labels.len() != self.axes.len() {
            return Err(Error::usage("reorder must name every axis exactly once"));
        }
        self.marginalize(labels)
    }

    /// Rename axes; `renames` maps old label to new label.
    pub fn relabel(&self, renames: &[(&str, &str)]) -> Result<JointDist> {
        let mut axes = self.axes.clone();
        for (from, to) in renames {
            let p = self.axis_position(from)?;
            axes[p] = axes[p].relabel(*to);
        }
        check_labels(&axes)?;
        Ok(JointDist {
            axes,
            probs: self.probs.clone(),
        })
    }

    /// Shannon entropy of the marginal on `labels`.
    pub fn entropy_of(&self, labels: &[&str]) -> Result<f64> {
        let m = self.marginalize(labels)?;
        Ok(-m.probs.iter().map(|&p| plogp(p)).sum::<f64>())
    }

    /// Largest absolute entry-wise difference to another distribution on the same axes.
    pub fn max_abs_diff(&self, other: &JointDist) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::usage("distributions live on different axes"));
        }
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.axis_position(l)?;
            if out.contains(&p) {
                return Err(Error::usage(format!("axis {l:?} named twice")));
            }
            out.push(p);
        }
        Ok(out)
    }
}

fn check_labels(axes: &[Alphabet]) -> Result<()> {
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.label() == a.label()) {
            return Err(Error::usage(format!("duplicate axis label {:?}", a.label())));
        }
    }
    Ok(())
}

pub(crate) fn cell_count(axes: &[Alphabet]) -> usize {
    axes.iter().map(|a| a.size()).product()
}

pub(crate) fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    debug_assert_eq!(shape.len(), index.len());
    index
        .iter()
        .zip(shape)
        .fold(0, |acc, (&i, &s)| acc * s + i)
}

/// Decompose a flat row-major index into per-axis digits.
pub(crate) fn unflatten(shape: &[usize], mut flat: usize, out: &mut [usize]) {
    for (slot, &s) in out.iter_mut().zip(shape).rev() {
        *slot = flat % s;
        flat /= s;
    }
}

/// For every cell of `shape`, the flat index of its projection onto `positions`.
pub(crate) fn projection_map(shape: &[usize], positions: &[usize], kept: &[usize]) -> Vec<usize> {
    let cells: usize = shape.iter().product();
    let mut digits = vec![0; shape.len()];
    let mut sub = vec![0; positions.len()];
    (0..cells)
        .map(|cell| {
            unflatten(shape, cell, &mut digits);
            for (s, &p) in sub.iter_mut().zip(positions) {
                *s = digits[p];
            }
            flat_index(kept, &sub)
        })
        .collect()
}

fn disjoint(sets: &[&[&str]]) -> Result<()> {
    let mut seen: Vec<&str> = Vec::new();
    for set in sets {
        for l in *set {
            if seen.contains(l) {
                return Err(Error::usage(format!("axis {l:?} appears in more than one set")));
            }
            seen.push(l);
        }
    }
    Ok(())
}

/// `H(d) = -Σ p log2 p`.
pub fn entropy(d: &Dist) -> f64 {
    -d.probs.iter().map(|&p| plogp(p)).sum::<f64>()
}

/// `H(target | given) = H(target, given) - H(given)`.
pub fn conditional_entropy(j: &JointDist, target: &[&str], given: &[&str]) -> Result<f64> {
    disjoint(&[target, given])?;
    let both: Vec<&str> = target.iter().chain(given).copied().collect();
    let h = j.entropy_of(&both)? - j.entropy_of(given)?;
    Ok(h.max(0.0))
}

/// `I(A ∧ B | C)`, evaluated term by term as `Σ p(abc) log2 [p(abc) p(c) / (p(ac) p(bc))]`.
pub fn conditional_mutual_information(
    j: &JointDist,
    a: &[&str],
    b: &[&str],
    c: &[&str],
) -> Result<f64> {
    disjoint(&[a, b, c])?;
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let abc: Vec<&str> = a.iter().chain(b).chain(c).copied().collect();
    let m = j.marginalize(&abc)?;
    let shape = m.shape();
    let na = a.len();
    let nb = b.len();
    let pos_ac: Vec<usize> = (0..na).chain(na + nb..abc.len()).collect();
    let pos_bc: Vec<usize> = (na..abc.len()).collect();
    let pos_c: Vec<usize> = (na + nb..abc.len()).collect();
    let sub = |pos: &[usize]| -> Vec<usize> { pos.iter().map(|&p| shape[p]).collect() };
    let (s_ac, s_bc, s_c) = (sub(&pos_ac), sub(&pos_bc), sub(&pos_c));
    let map_ac = projection_map(&shape, &pos_ac, &s_ac);
    let map_bc = projection_map(&shape, &pos_bc, &s_bc);
    let map_c = projection_map(&shape, &pos_c, &s_c);
    let mut p_ac = vec![0.0; s_ac.iter().product()];
    let mut p_bc = vec![0.0; s_bc.iter().product()];
    let mut p_c = vec![0.0; s_c.iter().product()];
    for (cell, &p) in m.probs.iter().enumerate() {
        p_ac[map_ac[cell]] += p;
        p_bc[map_bc[cell]] += p;
        p_c[map_c[cell]] += p;
    }
    let mut total = 0.0;
    for (cell, &p) in m.probs.iter().enumerate() {
        if p > 0.0 {
            let ratio = (p * p_c[map_c[cell]]) / (p_ac[map_ac[cell]] * p_bc[map_bc[cell]]);
            total += p * ratio.log2();
        }
    }
    Ok(total)
}

/// `D(P‖Q) = Σ P log2(P/Q)`; `+∞` when `P` charges a symbol `Q` does not.
pub fn kl_divergence(p: &Dist, q: &Dist) -> Result<f64> {
    if p.alphabet.size() != q.alphabet.size() {
        return Err(Error::usage(format!(
            "alphabet sizes differ: {} vs {}",
            p.alphabet.size(),
            q.alphabet.size()
        )));
    }
    Ok(kl_rows(&p.probs, &q.probs))
}

pub(crate) fn kl_rows(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            total += a * (a / b).log2();
        }
    }
    total
}

/// A stochastic matrix from a product of input alphabets to one output alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    inputs: Vec<Alphabet>,
    output: Alphabet,
    rows: Vec<f64>,
}

impl Kernel {
    pub fn new(inputs: Vec<Alphabet>, output: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut labels = inputs.clone();
        labels.push(output.clone());
        check_labels(&labels)?;
        let n_rows = cell_count(&inputs);
        if rows.len() != n_rows {
            return Err(Error::usage(format!(
                "{} rows supplied, {n_rows} input combinations",
                rows.len()
            )));
        }
        let mut flat = Vec::with_capacity(n_rows * output.size());
        for (r, mut row) in rows.into_iter().enumerate() {
            if row.len() != output.size() {
                return Err(Error::usage(format!(
                    "row {r} has {} entries, output alphabet has {}",
                    row.len(),
                    output.size()
                )));
            }
            check_mass(&mut row, &format!("row {r}"))?;
            flat.extend(row);
        }
        Ok(Kernel {
            inputs,
            output,
            rows: flat,
        })
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    /// Output distribution for the input cell with flat index `input`.
    pub fn row(&self, input: usize) -> &[f64] {
        let k = self.output.size();
        &self.rows[input * k..(input + 1) * k]
    }
}

/// `D(V‖W|P) = Σ_c P(c) D(V(·|c) ‖ W(·|c))`.
///
/// `p` lives on the inputs of `v`. `w` may condition on a subset of those
/// inputs (matched by label), in which case its rows are looked up through the
/// projection; a channel `W(z|x,y)` compared against `V(z|x,y,u)` is the usual case.
pub fn conditional_kl_divergence(v: &Kernel, w: &Kernel, p: &JointDist) -> Result<f64> {
    if v.output.size() != w.output.size() {
        return Err(Error::usage("kernels have different output alphabets"));
    }
    if p.axes() != v.inputs() {
        return Err(Error::usage(
            "conditioning distribution must live on the inputs of the first kernel",
        ));
    }
    let v_shape: Vec<usize> = v.inputs.iter().map(|a| a.size()).collect();
    let mut positions = Vec::with_capacity(w.inputs.len());
    for a in &w.inputs {
        let pos = v
            .inputs
            .iter()
            .position(|b| b.label() == a.label())
            .ok_or_else(|| Error::usage(format!("input {:?} missing from V", a.label())))?;
        if v.inputs[pos].size() != a.size() {
            return Err(Error::usage(format!("input {:?} has mismatched size", a.label())));
        }
        positions.push(pos);
    }
    let w_shape: Vec<usize> = w.inputs.iter().map(|a| a.size()).collect();
    let map = projection_map(&v_shape, &positions, &w_shape);
    let mut total = 0.0;
    for (cell, &weight) in p.probs().iter().enumerate() {
        if weight > 0.0 {
            let d = kl_rows(v.row(cell), w.row(map[cell]));
            if d.is_infinite() {
                return Ok(f64::INFINITY);
            }
            total += weight * d;
        }
    }
    Ok(total)
}

/// A two-user discrete memoryless multiple-access channel `W(z | x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    kernel: Kernel,
}

impl Channel {
    /// `rows` holds one output distribution per `(x, y)`, `x` outer and `y` inner.
    pub fn new(x_size: usize, y_size: usize, z_size: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let kernel = Kernel::new(
            vec![
                Alphabet::new(axis::X, x_size)?,
                Alphabet::new(axis::Y, y_size)?,
            ],
            Alphabet::new(axis::Z, z_size)?,
            rows,
        )?;
        Ok(Channel { kernel })
    }

    /// Builds a channel from a per-input-pair rule.
    pub fn from_fn(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        f: impl Fn(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let rows = (0..x_size)
            .flat_map(|x| (0..y_size).map(move |y| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Channel::new(x_size, y_size, z_size, rows)
    }

    /// `Z = X ⊕ Y` passed through a binary symmetric channel with crossover `eps`.
    pub fn xor_bsc(eps: f64) -> Result<Self> {
        Channel::from_fn(2, 2, 2, |x, y| {
            if x ^ y == 0 {
                vec![1.0 - eps, eps]
            } else {
                vec![eps, 1.0 - eps]
            }
        })
    }

    /// Noiseless `Z = (X, Y)` with `Z = 2X + Y`.
    pub fn identity_binary() -> Result<Self> {
        Channel::from_fn(2, 2, 4, |x, y| {
            let mut row = vec![0.0; 4];
            row[2 * x + y] = 1.0;
            row
        })
    }

    /// Binary adder `Z = X + Y ∈ {0, 1, 2}`.
    pub fn binary_adder() -> Result<Self> {
        Channel::from_fn(2, 2, 3, |x, y| {
            let mut row = vec![0.0; 3];
            row[x + y] = 1.0;
            row
        })
    }

    /// Output independent of the inputs.
    pub fn useless(x_size: usize, y_size: usize, output: &[f64]) -> Result<Self> {
        Channel::from_fn(x_size, y_size, output.len(), |_, _| output.to_vec())
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.kernel.inputs[0]
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.kernel.inputs[1]
    }

    pub fn z_alphabet(&self) -> &Alphabet {
        &self.kernel.output
    }

    pub fn x_size(&self) -> usize {
        self.x_alphabet().size()
    }

    pub fn y_size(&self) -> usize {
        self.y_alphabet().size()
    }

    pub fn z_size(&self) -> usize {
        self.z_alphabet().size()
    }

    /// `W(·|x,y)`.
    pub fn row(&self, x: usize, y: usize) -> &[f64] {
        self.kernel.row(x * self.y_size() + y)
    }

    /// `W(z|x,y)`.
    pub fn prob(&self, z: usize, x: usize, y: usize) -> f64 {
        self.row(x, y)[z]
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// The same channel with output symbols permuted: new symbol `perm[z]` carries old `z`.
    pub fn permute_outputs(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.z_size() {
            return Err(Error::usage("permutation length differs from |Z|"));
        }
        Channel::from_fn(self.x_size(), self.y_size(), self.z_size(), |x, y| {
            let mut row = vec![0.0; perm.len()];
            for (z, &p) in self.row(x, y).iter().enumerate() {
                row[perm[z]] = p;
            }
            row
        })
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            x_size: self.x_size(),
            y_size: self.y_size(),
            z_size: self.z_size(),
            rows: (0..self.x_size())
                .flat_map(|x| (0..self.y_size()).map(move |y| (x, y)))
                .map(|(x, y)| self.row(x, y).to_vec())
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!(
                "channel file, line {} column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        file.into_channel()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_file()).expect("channel serializes");
        s.push('\n');
        s
    }
}

/// On-disk channel description: rows in `(x outer, y inner)` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub x_size: usize,
    pub y_size: usize,
    pub z_size: usize,
    pub rows: Vec<Vec<f64>>,
}

impl ChannelFile {
    pub fn into_channel(self) -> Result<Channel> {
        let expected = self.x_size * self.y_size;
        if self.rows.len() != expected {
            return Err(Error::Parse(format!(
                "field `rows`: {} rows, expected x_size*y_size = {expected}",
                self.rows.len()
            )));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.z_size {
                return Err(Error::Parse(format!(
                    "field `rows[{r}]`: {} entries, expected z_size = {}",
                    row.len(),
                    self.z_size
                )));
            }
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite()) || (s - 1.0).abs() > RENORMALIZE_TOL
            {
                return Err(Error::Parse(format!(
                    "field `rows[{r}]` (x={}, y={}): not a probability vector (sum {s})",
                    r / self.y_size.max(1),
                    r % self.y_size.max(1)
                )));
            }
        }
        Channel::new(self.x_size, self.y_size, self.z_size, self.rows)
    }
}

/// `W^n(z|x,y) = Π_i W(z_i | x_i, y_i)`.
pub fn product_channel_likelihood(w: &Channel, x: &[usize], y: &[usize], z: &[usize]) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() || x.len() != z.len() {
        return Err(Error::usage(format!(
            "sequence lengths {} / {} / {} must be equal and positive",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    let mut p = 1.0;
    for ((&a, &b), &c) in x.iter().zip(y).zip(z) {
        if a >= w.x_size() || b >= w.y_size() || c >= w.z_size() {
            return Err(Error::usage("symbol outside its alphabet"));
        }
        p *= w.prob(c, a, b);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(label: &str) -> Alphabet {
        Alphabet::new(label, 2).unwrap()
    }

    fn h_direct(p: &[f64]) -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
    }

    #[test]
    fn entropy_examples() {
        let point = Dist::new(bits("X"), vec![1.0, 0.0]).unwrap();
        assert_eq!(entropy(&point), 0.0);
        assert_eq!(entropy(&Dist::uniform(bits("X"))), 1.0);
        let skew = Dist::new(bits("X"), vec![0.75, 0.25]).unwrap();
        let oracle = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((entropy(&skew) - oracle).abs() < 1e-15);
        assert!((entropy(&skew) - 0.811_278_124_459_132_8).abs() < 1e-15);
    }

    #[test]
    fn constructor_renormalizes_only_near_one() {
        let d = Dist::new(bits("X"), vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(Dist::new(bits("X"), vec![0.5, 0.6]).is_err());
        assert!(Dist::new(bits("X"), vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn conditional_entropy_examples() {
        let xs = bits("X");
        let ys = bits("Y");
        let zs = bits("Z");
        // Z = X xor Y, uniform inputs
        let mut probs = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                probs[flat_index(&[2, 2, 2], &[x, y, x ^ y])] = 0.25;
            }
        }
        let j = JointDist::new(vec![xs.clone(), ys.clone(), zs.clone()], probs).unwrap();
        assert_eq!(conditional_entropy(&j, &["Z"], &["X", "Y"]).unwrap(), 0.0);
        // Z independent of X, uniform
        let ind = JointDist::product(&[&Dist::uniform(xs.clone()), &Dist::uniform(zs.clone())])
            .unwrap();
        assert_eq!(conditional_entropy(&ind, &["Z"], &["X"]).unwrap(), 1.0);
        // XOR-BSC(0.1)
        let w = Channel::xor_bsc(0.1).unwrap();
        let mut probs = vec![0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    probs[flat_index(&[2, 2, 2], &[x, y, z])] = 0.25 * w.prob(z, x, y);
                }
            }
        }
        let j = JointDist::new(vec![xs, ys, zs], probs).unwrap();
        let oracle = h_direct(&[0.1, 0.9]);
        let h = conditional_entropy(&j, &["Z"], &["X", "Y"]).unwrap();
        assert!((h - oracle).abs() < 1e-12);
        assert!(conditional_entropy(&j, &["Z"], &["Z"]).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let u = Alphabet::new("U", 2).unwrap();
        let indep = JointDist::product(&[
            &Dist::new(u, vec![0.3, 0.7]).unwrap(),
            &Dist::new(bits("X"), vec![0.2, 0.8]).unwrap(),
            &Dist::new(bits("Y"), vec![0.6, 0.4]).unwrap(),
        ])
        .unwrap();
        let i = conditional_mutual_information(&indep, &["X"], &["Y"], &["U"]).unwrap();
        assert!(i.abs() < 1e-15);

        let same = JointDist::new(vec![bits("X"), bits("Y")], vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert_eq!(conditional_mutual_information(&same, &["X"], &["Y"], &[]).unwrap(), 1.0);
        assert!(conditional_mutual_information(&same, &["X"], &["X"], &[]).is_err());

        // dense 2x2x2 joint, oracle by entropy decomposition
        let probs = vec![0.05, 0.1, 0.15, 0.2, 0.08, 0.12, 0.17, 0.13];
        let j = JointDist::new(vec![bits("A"), bits("B"), bits("C")], probs.clone()).unwrap();
        let marg = |keep: &[usize]| -> Vec<f64> {
            let mut out = std::collections::BTreeMap::new();
            for (cell, &p) in probs.iter().enumerate() {
                let d = [cell >> 2 & 1, cell >> 1 & 1, cell & 1];
                let key: Vec<usize> = keep.iter().map(|&k| d[k]).collect();
                *out.entry(key).or_insert(0.0) += p;
            }
            out.into_values().collect()
        };
        let oracle = h_direct(&marg(&[0, 2])) + h_direct(&marg(&[1, 2]))
            - h_direct(&marg(&[0, 1, 2]))
            - h_direct(&marg(&[2]));
        let i = conditional_mutual_information(&j, &["A"], &["B"], &["C"]).unwrap();
        assert!((i - oracle).abs() < 1e-14, "{i} vs {oracle}");
    }

    #[test]
    fn kl_examples() {
        let p = Dist::new(bits("X"), vec![0.3, 0.7]).unwrap();
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let point = Dist::new(bits("X"), vec![1.0, 0.0]).unwrap();
        assert_eq!(kl_divergence(&point, &Dist::uniform(bits("X"))).unwrap(), 1.0);
        let half = Dist::uniform(bits("X"));
        let q = Dist::new(bits("X"), vec![0.25, 0.75]).unwrap();
        let oracle = 0.5 * (0.5f64 / 0.25).log2() + 0.5 * (0.5f64 / 0.75).log2();
        assert!((kl_divergence(&half, &q).unwrap() - oracle).abs() < 1e-15);
        assert!(kl_divergence(&half, &point).unwrap().is_infinite());
        let three = Dist::uniform(Alphabet::new("X", 3).unwrap());
        assert!(kl_divergence(&half, &three).is_err());
    }

    #[test]
    fn conditional_kl_examples() {
        let w = Channel::xor_bsc(0.1).unwrap();
        let p = JointDist::product(&[&Dist::uniform(bits("X")), &Dist::uniform(bits("Y"))]).unwrap();
        assert_eq!(conditional_kl_divergence(w.kernel(), w.kernel(), &p).unwrap(), 0.0);

        let v = Channel::xor_bsc(0.2).unwrap();
        let oracle = 0.8 * (0.8f64 / 0.9).log2() + 0.2 * (0.2f64 / 0.1).log2();
        let d = conditional_kl_divergence(v.kernel(), w.kernel(), &p).unwrap();
        assert!((d - oracle).abs() < 1e-14);

        // V differs from W only where P is zero
        let v = Channel::from_fn(2, 2, 2, |x, y| {
            if (x, y) == (1, 1) {
                vec![0.5, 0.5]
            } else {
                w.row(x, y).to_vec()
            }
        })
        .unwrap();
        let p = JointDist::new(vec![bits("X"), bits("Y")], vec![0.5, 0.25, 0.25, 0.0]).unwrap();
        assert_eq!(conditional_kl_divergence(v.kernel(), w.kernel(), &p).unwrap(), 0.0);

        // V conditioned additionally on U, W looked up through (x, y)
        let u = Alphabet::new("U", 2).unwrap();
        let rows: Vec<Vec<f64>> = (0..8).map(|c| if c < 4 { vec![0.9, 0.1] } else { vec![0.1, 0.9] }).collect();
        let vu = Kernel::new(vec![u.clone(), bits("X"), bits("Y")], bits("Z"), rows).unwrap();
        let pu = JointDist::product(&[
            &Dist::uniform(u),
            &Dist::uniform(bits("X")),
            &Dist::uniform(bits("Y")),
        ])
        .unwrap();
        let d = conditional_kl_divergence(&vu, w.kernel(), &pu).unwrap();
        // half the rows agree with W, the other half are swapped
        assert!((d - 0.5 * oracle_swap()).abs() < 1e-14);
    }

    fn oracle_swap() -> f64 {
        0.9 * (0.9f64 / 0.1).log2() + 0.1 * (0.1f64 / 0.9).log2()
    }

    #[test]
    fn product_likelihood_examples() {
        let w = Channel::xor_bsc(0.1).unwrap();
        assert_eq!(product_channel_likelihood(&w, &[1], &[0], &[0]).unwrap(), w.prob(0, 1, 0));
        let noiseless = Channel::xor_bsc(0.0).unwrap();
        let x = [0, 1, 1, 0];
        let y = [1, 1, 0, 0];
        let z: Vec<usize> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        assert_eq!(product_channel_likelihood(&noiseless, &x, &y, &z).unwrap(), 1.0);
        let p = product_channel_likelihood(&w, &[0, 0, 1], &[0, 1, 1], &[0, 1, 1]).unwrap();
        assert!((p - 0.1 * 0.9 * 0.9).abs() < 1e-15);
        assert!(product_channel_likelihood(&w, &[0], &[0, 1], &[0]).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let j = JointDist::product(&[
            &Dist::new(bits("X"), vec![0.2, 0.8]).unwrap(),
            &Dist::new(bits("Y"), vec![0.6, 0.4]).unwrap(),
        ])
        .unwrap();
        assert_eq!(j.marginalize(&["X", "Y"]).unwrap(), j);
        let none = j.marginalize(&[]).unwrap();
        assert!(none.axes().is_empty());
        assert!((none.probs()[0] - 1.0).abs() < 1e-15);
        let y = j.marginalize(&["Y"]).unwrap();
        assert!((y.probs()[0] - 0.6).abs() < 1e-15);
        assert!(j.marginalize(&["Q"]).is_err());
        let swapped = j.reorder(&["Y", "X"]).unwrap();
        assert_eq!(swapped.get(&[1, 0]), j.get(&[0, 1]));
    }

    #[test]
    fn channel_file_round_trip_and_errors() {
        let w = Channel::xor_bsc(0.1).unwrap();
        let text = w.to_json();
        let back = Channel::from_json(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.to_json(), text);

        let bad = r#"{"x_size": 2, "y_size": 2, "z_size": 2, "rows": [[0.5,0.5],[0.5,0.5],[0.5,0.5],[0.9,0.2]]}"#;
        let err = Channel::from_json(bad).unwrap_err().to_string();
        assert!(err.contains("rows[3]"), "{err}");
        let malformed = "{\"x_size\": 2,\n \"y_size\": }";
        let err = Channel::from_json(malformed).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
