//! Minimum-equivocation decoding and evaluation of the average error probability.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::code::CodebookPair;
use crate::error::{Error, Result};
use crate::exponent::ExponentResult;
use crate::prob::Channel;
use crate::types::Sequence;

/// Two candidates whose `α` values differ by at most this are tied.
pub const ALPHA_TIE_TOL: f64 = 1e-12;
/// Largest `|Z|^n` enumerated by [`error_prob_exact`].
pub const MAX_EXACT_OUTPUTS: u128 = 1 << 22;
/// Largest `|Z|^n · M_X M_Y · n` accepted by [`error_prob_exact`].
pub const MAX_EXACT_WORK: u128 = 8_000_000_000;
/// Monte Carlo trials per independently seeded block.
pub const MC_BLOCK: u64 = 4096;
const EXACT_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Decoded {
    Pair(usize, usize),
    Ambiguous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecodeOutcome {
    pub decoded: Decoded,
    /// Smallest `H(XY|ZU)` over all pairs, in bits.
    pub alpha_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub exact: bool,
    /// Probability (exact) or fraction (Monte Carlo) of tied outcomes; included in `value`.
    pub ambiguous: f64,
}

fn xlog2x(c: u32) -> f64 {
    if c == 0 {
        0.0
    } else {
        let c = c as f64;
        c * c.log2()
    }
}

/// Precomputed cell offsets for the `(u, x, y, z)` tally.
struct Decoder<'a> {
    c: &'a CodebookPair,
    kx: usize,
    ky: usize,
    kz: usize,
}

impl<'a> Decoder<'a> {
    fn new(c: &'a CodebookPair, kz: usize) -> Self {
        Decoder {
            c,
            kx: c.law().x_size(),
            ky: c.law().y_size(),
            kz,
        }
    }

    fn decode(&self, z: &[usize], counts: &mut Vec<u32>, uz: &mut Vec<u32>) -> DecodeOutcome {
        let n = z.len();
        let u = self.c.u().symbols();
        let ku = self.c.law().u_size();
        uz.clear();
        uz.resize(ku * self.kz, 0);
        for t in 0..n {
            uz[u[t] * self.kz + z[t]] += 1;
        }
        let s_uz: f64 = uz.iter().map(|&c| xlog2x(c)).sum();
        let cells = ku * self.kx * self.ky * self.kz;
        let mut best = f64::INFINITY;
        let mut best_pair = Decoded::Ambiguous;
        let mut tied = false;
        for (i, x) in self.c.cx().iter().enumerate() {
            for (j, y) in self.c.cy().iter().enumerate() {
                counts.clear();
                counts.resize(cells, 0);
                let (xs, ys) = (x.symbols(), y.symbols());
                for t in 0..n {
                    counts[((u[t] * self.kx + xs[t]) * self.ky + ys[t]) * self.kz + z[t]] += 1;
                }
                let s: f64 = counts.iter().map(|&c| xlog2x(c)).sum();
                let alpha = ((s_uz - s) / n as f64).max(0.0);
                if alpha < best - ALPHA_TIE_TOL {
                    best = alpha;
                    best_pair = Decoded::Pair(i, j);
                    tied = false;
                } else if alpha <= best + ALPHA_TIE_TOL {
                    tied = true;
                    best = best.min(alpha);
                }
            }
        }
        DecodeOutcome {
            decoded: if tied { Decoded::Ambiguous } else { best_pair },
            alpha_min: best,
        }
    }
}

/// Returns the pair minimizing the empirical `H(XY|ZU)`, or `Ambiguous` on a tie.
pub fn alpha_decode(c: &CodebookPair, z: &Sequence) -> Result<DecodeOutcome> {
    if z.len() != c.n() {
        return Err(Error::usage(format!("output has length {}, codewords have {}", z.len(), c.n())));
    }
    let dec = Decoder::new(c, z.alphabet().size());
    Ok(dec.decode(z.symbols(), &mut Vec::new(), &mut Vec::new()))
}

fn check_channel(c: &CodebookPair, w: &Channel) -> Result<()> {
    if w.x_size() != c.law().x_size() || w.y_size() != c.law().y_size() {
        return Err(Error::usage("channel input alphabets do not match the codebooks"));
    }
    Ok(())
}

/// `W^n(z | x, y)`.
pub fn output_probability(w: &Channel, x: &Sequence, y: &Sequence, z: &[usize]) -> f64 {
    z.iter()
        .enumerate()
        .map(|(t, &zt)| w.prob(zt, x.symbols()[t], y.symbols()[t]))
        .product()
}

fn unrank(mut index: u64, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (index % base as u64) as usize;
        index /= base as u64;
    }
}

/// Exact average error over all messages and all `|Z|^n` outputs; ties count as errors.
pub fn error_prob_exact(c: &CodebookPair, w: &Channel, threads: usize) -> Result<ErrorEstimate> {
    check_channel(c, w)?;
    let n = c.n();
    let kz = w.z_size();
    let outputs = (kz as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if outputs > MAX_EXACT_OUTPUTS {
        return Err(Error::guard("output sequences for exact evaluation (use Monte Carlo)", outputs, MAX_EXACT_OUTPUTS));
    }
    let work = outputs * (c.m_x() * c.m_y()) as u128 * n as u128;
    if work > MAX_EXACT_WORK {
        return Err(Error::guard("exact evaluation work (use Monte Carlo)", work, MAX_EXACT_WORK));
    }
    let outputs = outputs as u64;
    let chunks = outputs.div_ceil(EXACT_CHUNK);
    let dec = Decoder::new(c, kz);
    let threads = threads.clamp(1, chunks as usize);
    // per-chunk (correct mass, ambiguous mass), summed afterwards in chunk order
    let mut parts: Vec<(u64, f64, f64)> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let dec = &dec;
                scope.spawn(move || {
                    let mut out = Vec::new();
                    let (mut counts, mut uz) = (Vec::new(), Vec::new());
                    let mut z = vec![0usize; n];
                    let mut chunk = t as u64;
                    while chunk < chunks {
                        let (mut correct, mut ambiguous) = (0.0, 0.0);
                        for index in chunk * EXACT_CHUNK..((chunk + 1) * EXACT_CHUNK).min(outputs) {
                            unrank(index, kz, &mut z);
                            match dec.decode(&z, &mut counts, &mut uz).decoded {
                                Decoded::Pair(i, j) => correct += output_probability(w, &c.cx()[i], &c.cy()[j], &z),
                                Decoded::Ambiguous => {
                                    for x in c.cx() {
                                        for y in c.cy() {
                                            ambiguous += output_probability(w, x, y, &z);
                                        }
                                    }
                                }
                            }
                        }
                        out.push((chunk, correct, ambiguous));
                        chunk += threads as u64;
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    parts.sort_by_key(|p| p.0);
    let pairs = (c.m_x() * c.m_y()) as f64;
    let correct: f64 = parts.iter().map(|p| p.1).sum::<f64>() / pairs;
    let ambiguous: f64 = parts.iter().map(|p| p.2).sum::<f64>() / pairs;
    Ok(ErrorEstimate {
        value: (1.0 - correct).clamp(0.0, 1.0),
        stderr: 0.0,
        trials: outputs,
        exact: true,
        ambiguous: ambiguous.clamp(0.0, 1.0),
    })
}

fn sample(row: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if r < acc {
            return k;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Monte Carlo estimate with uniformly drawn messages. Trials run in blocks of
/// [`MC_BLOCK`]; block `b` draws from ChaCha8 seeded with `seed` on stream `b`,
/// so the estimate does not depend on `threads`.
pub fn error_prob_mc(c: &CodebookPair, w: &Channel, trials: u64, seed: u64, threads: usize) -> Result<ErrorEstimate> {
    check_channel(c, w)?;
    if trials == 0 {
        return Err(Error::usage("trials must be at least 1"));
    }
    let n = c.n();
    let blocks = trials.div_ceil(MC_BLOCK);
    let dec = Decoder::new(c, w.z_size());
    let threads = threads.clamp(1, blocks as usize);
    let (errors, ambiguous) = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let dec = &dec;
                scope.spawn(move || {
                    let (mut errors, mut ambiguous) = (0u64, 0u64);
                    let (mut counts, mut uz) = (Vec::new(), Vec::new());
                    let mut z = vec![0usize; n];
                    let mut block = t as u64;
                    while block < blocks {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(block);
                        let len = MC_BLOCK.min(trials - block * MC_BLOCK);
                        for _ in 0..len {
                            let i = rng.gen_range(0..c.m_x());
                            let j = rng.gen_range(0..c.m_y());
                            let (x, y) = (c.cx()[i].symbols(), c.cy()[j].symbols());
                            for pos in 0..n {
                                z[pos] = sample(w.row(x[pos], y[pos]), rng.gen::<f64>());
                            }
                            match dec.decode(&z, &mut counts, &mut uz).decoded {
                                Decoded::Pair(a, b) if (a, b) == (i, j) => {}
                                Decoded::Pair(..) => errors += 1,
                                Decoded::Ambiguous => {
                                    errors += 1;
                                    ambiguous += 1;
                                }
                            }
                        }
                        block += threads as u64;
                    }
                    (errors, ambiguous)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    });
    let p = errors as f64 / trials as f64;
    Ok(ErrorEstimate {
        value: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        exact: false,
        ambiguous: ambiguous as f64 / trials as f64,
    })
}

/// `min(1, 2^{-n(E − δ)})` for each blocklength.
pub fn bound_curve(exponent: &ExponentResult, n_list: &[usize], delta: f64) -> Vec<(usize, f64)> {
    n_list
        .iter()
        .map(|&n| {
            let e = exponent.value - delta;
            let b = if e == f64::INFINITY { 0.0 } else { (-(n as f64) * e).exp2().min(1.0) };
            (n, b)
        })
        .collect()
}

/// One line of the simulation CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationRow {
    pub n: usize,
    pub m_x: usize,
    pub m_y: usize,
    pub rate_x: f64,
    pub rate_y: f64,
    pub trials: u64,
    pub error: f64,
    pub stderr: f64,
    pub bound: f64,
    pub exponent: f64,
    pub branch: String,
}

impl SimulationRow {
    pub const HEADER: &'static str = "n,m_x,m_y,rate_x,rate_y,trials,error,stderr,bound,exponent,branch";

    /// Floats are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:?},{:?},{},{:?},{:?},{:?},{:?},{}",
            self.n,
            self.m_x,
            self.m_y,
            self.rate_x,
            self.rate_y,
            self.trials,
            self.error,
            self.stderr,
            self.bound,
            self.exponent,
            self.branch
        )
    }
}
