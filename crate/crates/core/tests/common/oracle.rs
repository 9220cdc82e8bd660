//! Brute-force exponent values on the lattice `(1/d)ℤ`, written without the
//! library's measures: every count vector is visited (last cell first), the
//! constraint set is tested with entropies computed from scratch and the
//! objective is summed directly.
#![allow(dead_code)]

/// Channel rows indexed `x * ky + y`, law indexed `(u * kx + x) * ky + y`.
pub struct Setup<'a> {
    pub ku: usize,
    pub kx: usize,
    pub ky: usize,
    pub kz: usize,
    pub law: &'a [f64],
    pub w: &'a [Vec<f64>],
    pub rx: f64,
    pub ry: f64,
    pub delta: f64,
    pub d: u32,
}

const TOL: f64 = 1e-10;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Which {
    X,
    Y,
    XY,
}

// variable slots in the joint
const U: usize = 0;
const X: usize = 1;
const Y: usize = 2;

struct Joint {
    sizes: Vec<usize>,
    counts: Vec<u32>,
    d: f64,
}

impl Joint {
    fn digits(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            out[k] = cell % self.sizes[k];
            cell /= self.sizes[k];
        }
        out
    }

    fn entropy(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        let mut m = std::collections::HashMap::new();
        for (cell, &c) in self.counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let dg = self.digits(cell);
            let key: Vec<usize> = vars.iter().map(|&v| dg[v]).collect();
            *m.entry(key).or_insert(0u32) += c;
        }
        let mut h = 0.0;
        for &c in m.values() {
            let p = c as f64 / self.d;
            h -= p * p.log2();
        }
        h
    }

    fn cmi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        let bc: Vec<usize> = b.iter().chain(c).copied().collect();
        let abc: Vec<usize> = a.iter().chain(b).chain(c).copied().collect();
        self.entropy(&ac) + self.entropy(&bc) - self.entropy(&abc) - self.entropy(c)
    }

    fn cond_entropy(&self, a: &[usize], c: &[usize]) -> f64 {
        let ac: Vec<usize> = a.iter().chain(c).copied().collect();
        self.entropy(&ac) - self.entropy(c)
    }

    fn pair_counts(&self, var: usize) -> Vec<Vec<u32>> {
        let mut m = vec![vec![0u32; self.sizes[var]]; self.sizes[U]];
        for (cell, &c) in self.counts.iter().enumerate() {
            let dg = self.digits(cell);
            m[dg[U]][dg[var]] += c;
        }
        m
    }
}

fn p_ux(s: &Setup, u: usize, x: usize) -> f64 {
    (0..s.ky).map(|y| s.law[(u * s.kx + x) * s.ky + y]).sum()
}

fn p_uy(s: &Setup, u: usize, y: usize) -> f64 {
    (0..s.kx).map(|x| s.law[(u * s.kx + x) * s.ky + y]).sum()
}

fn marginal_ok(s: &Setup, j: &Joint, var: usize, is_x: bool) -> bool {
    let m = j.pair_counts(var);
    for u in 0..s.ku {
        for a in 0..m[u].len() {
            let target = if is_x { p_ux(s, u, a) } else { p_uy(s, u, a) } * s.d as f64;
            if (m[u][a] as f64 - target).abs() > 0.5 + 1e-9 {
                return false;
            }
        }
    }
    true
}

fn divergence(s: &Setup, j: &Joint, z: usize) -> f64 {
    // Σ V(u,x,y,z) log V(z|u,x,y)/W(z|x,y)
    let mut row_mass = std::collections::HashMap::new();
    let mut cells = Vec::new();
    for (cell, &c) in j.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let dg = j.digits(cell);
        let key = (dg[U], dg[X], dg[Y]);
        *row_mass.entry(key).or_insert(0u32) += c;
        cells.push((key, dg[z], c));
    }
    let mut acc = std::collections::HashMap::new();
    for (key, zz, c) in cells {
        *acc.entry((key, zz)).or_insert(0u32) += c;
    }
    let mut total = 0.0;
    for (&((u, x, y), zz), &c) in &acc {
        let wz = s.w[x * s.ky + y][zz];
        if wz == 0.0 {
            return f64::INFINITY;
        }
        let cond = c as f64 / row_mass[&(u, x, y)] as f64;
        total += c as f64 / j.d * (cond / wz).log2();
        let _ = u;
    }
    total
}

fn for_each_composition(total: u32, cells: usize, f: &mut dyn FnMut(&[u32])) {
    fn rec(rest: u32, pos: usize, v: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
        if pos == 0 {
            v[0] = rest;
            f(v);
            return;
        }
        for c in 0..=rest {
            v[pos] = c;
            rec(rest - c, pos - 1, v, f);
        }
        v[pos] = 0;
    }
    let mut v = vec![0; cells];
    rec(total, cells - 1, &mut v, f);
}

/// Expurgated branch value; `+∞` when no lattice point is admissible.
pub fn branch(s: &Setup, which: Which) -> f64 {
    let m = s.rx.min(s.ry);
    let (sizes, xt, yt): (Vec<usize>, Option<usize>, Option<usize>) = match which {
        Which::X => (vec![s.ku, s.kx, s.ky, s.kx, s.kz], Some(3), None),
        Which::Y => (vec![s.ku, s.kx, s.ky, s.ky, s.kz], None, Some(3)),
        Which::XY => (vec![s.ku, s.kx, s.ky, s.kx, s.ky, s.kz], Some(3), Some(4)),
    };
    let z = sizes.len() - 1;
    let cells: usize = sizes.iter().product();
    let mut best = f64::INFINITY;
    let d = s.d;
    for_each_composition(d, cells, &mut |counts| {
        let j = Joint {
            sizes: sizes.clone(),
            counts: counts.to_vec(),
            d: d as f64,
        };
        if !marginal_ok(s, &j, X, true) || !marginal_ok(s, &j, Y, false) {
            return;
        }
        if let Some(a) = xt {
            if !marginal_ok(s, &j, a, true) {
                return;
            }
        }
        if let Some(b) = yt {
            if !marginal_ok(s, &j, b, false) {
                return;
            }
        }
        let ixy = j.cmi(&[X], &[Y], &[U]);
        let mut ok = ixy <= m + 3.0 * s.delta + TOL;
        if let Some(a) = xt {
            ok &= j.cmi(&[a], &[Y], &[U]) <= m + 3.0 * s.delta + TOL;
            ok &= ixy + j.cmi(&[a], &[Y], &[U]) + j.cmi(&[a], &[X], &[U, Y]) <= s.rx + m + 4.0 * s.delta + TOL;
        }
        if let Some(b) = yt {
            ok &= j.cmi(&[X], &[b], &[U]) <= m + 3.0 * s.delta + TOL;
            ok &= ixy + j.cmi(&[X], &[b], &[U]) + j.cmi(&[b], &[Y], &[U, X]) <= s.ry + m + 4.0 * s.delta + TOL;
        }
        if let (Some(a), Some(b)) = (xt, yt) {
            let pair = j.cmi(&[a], &[b], &[U]);
            ok &= pair <= m + 3.0 * s.delta + TOL;
            ok &= j.cmi(&[a], &[Y], &[U]) + pair + j.cmi(&[b], &[Y], &[U, a]) <= s.ry + m + 4.0 * s.delta + TOL;
            ok &= j.cmi(&[X], &[b], &[U]) + pair + j.cmi(&[a], &[X], &[U, b]) <= s.rx + m + 4.0 * s.delta + TOL;
            ok &= ixy + pair + j.cmi(&[a, b], &[X, Y], &[U]) <= s.rx + s.ry + m + 5.0 * s.delta + TOL;
            ok &= j.cmi(&[a], &[Y], &[U]) + j.cmi(&[X], &[b], &[U]) + j.cmi(&[X, b], &[a, Y], &[U])
                <= s.rx + s.ry + m + 5.0 * s.delta + TOL;
        }
        if !ok {
            return;
        }
        let truth = j.cond_entropy(&[X, Y], &[z, U]);
        let (rival, bracket) = match which {
            Which::X => {
                let a = 3;
                (
                    j.cond_entropy(&[a, Y], &[z, U]),
                    j.cmi(&[a], &[X, z], &[Y, U]) + j.cmi(&[a], &[Y], &[U]) - s.rx,
                )
            }
            Which::Y => {
                let b = 3;
                (
                    j.cond_entropy(&[X, b], &[z, U]),
                    j.cmi(&[b], &[Y, z], &[X, U]) + j.cmi(&[X], &[b], &[U]) - s.ry,
                )
            }
            Which::XY => (
                j.cond_entropy(&[3, 4], &[z, U]),
                j.cmi(&[3, 4], &[X, Y, z], &[U]) + j.cmi(&[3], &[4], &[U]) - s.rx - s.ry,
            ),
        };
        if truth < rival - TOL {
            return;
        }
        let value = divergence(s, &j, z) + ixy + bracket.max(0.0);
        if value < best {
            best = value;
        }
    });
    best
}

pub fn expurgated(s: &Setup) -> f64 {
    branch(s, Which::X).min(branch(s, Which::Y)).min(branch(s, Which::XY))
}

/// Relaxed baseline branch over `(u, x, y, z)`.
pub fn baseline_branch(s: &Setup, which: Which) -> f64 {
    let sizes = vec![s.ku, s.kx, s.ky, s.kz];
    let cells: usize = sizes.iter().product();
    let rate = match which {
        Which::X => s.rx,
        Which::Y => s.ry,
        Which::XY => s.rx + s.ry,
    };
    let mut best = f64::INFINITY;
    let d = s.d;
    for_each_composition(d, cells, &mut |counts| {
        let j = Joint {
            sizes: sizes.clone(),
            counts: counts.to_vec(),
            d: d as f64,
        };
        if !marginal_ok(s, &j, X, true) || !marginal_ok(s, &j, Y, false) {
            return;
        }
        let ixy = j.cmi(&[X], &[Y], &[U]);
        if ixy > rate + 3.0 * s.delta + TOL {
            return;
        }
        let bracket = match which {
            Which::X => j.cmi(&[X], &[Y, 3], &[U]) - s.rx,
            Which::Y => j.cmi(&[Y], &[X, 3], &[U]) - s.ry,
            Which::XY => j.cmi(&[X, Y], &[3], &[U]) + ixy - s.rx - s.ry,
        };
        let value = divergence(s, &j, 3) + ixy + bracket.max(0.0);
        if value < best {
            best = value;
        }
    });
    best
}

pub fn baseline(s: &Setup) -> f64 {
    baseline_branch(s, Which::X)
        .min(baseline_branch(s, Which::Y))
        .min(baseline_branch(s, Which::XY))
}

/// `a == b` for infinities, otherwise `|a − b| ≤ tol`.
pub fn same(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        a == b
    } else {
        (a - b).abs() <= tol
    }
}
