//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use macex_core::code::{
    audit_lemma4, expurgate, generate_codebooks, packing_report, time_sharing_sequence, CodebookPair, PackingMode,
};
use macex_core::prob::{conditional_entropy, conditional_mutual_information, kl_divergence};
use macex_core::sim::{error_prob_exact, error_prob_mc};
use macex_core::types::{enumerate_types, type_class_size};
use macex_core::{Alphabet, Branch, Channel, Dist, ExponentSolver, InputLaw, JointDist, RatePair, SolverSpec};
use num_bigint::BigUint;
use oracle::{Setup, Which};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_rows(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..4)
        .map(|_| {
            let p = rng.gen_range(0.02..0.98);
            vec![p, 1.0 - p]
        })
        .collect()
}

fn solver(d: u32) -> ExponentSolver {
    ExponentSolver::new(InputLaw::uniform(1, 2, 2).unwrap(), SolverSpec::lattice(d)).unwrap()
}

fn rates(x: f64, y: f64) -> RatePair {
    RatePair::new(x, y).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let s4 = solver(4);
    let law = InputLaw::uniform(1, 2, 2).unwrap();
    let mut compared = 0;
    let mut finite = 0;
    for _ in 0..5 {
        let rows = random_rows(&mut rng);
        let w = Channel::new(2, 2, 2, rows.clone()).map_err(|e| e.to_string())?;
        for (rx, ry) in [(0.3, 0.6), (0.5, 0.5), (1.0, 0.7), (2.0, 2.0)] {
            let s = Setup { ku: 1, kx: 2, ky: 2, kz: 2, law: law.joint().probs(), w: &rows, rx, ry, delta: 0.0, d: 4 };
            let b = s4.breakdown(&w, rates(rx, ry), 0.0).map_err(|e| e.to_string())?;
            for (branch, which) in [(Branch::X, Which::X), (Branch::Y, Which::Y), (Branch::XY, Which::XY)] {
                let (got, want) = (b.get(branch).value, oracle::branch(&s, which));
                check(oracle::same(got, want, 1e-12), format!("{branch:?} at ({rx}, {ry}): {got} vs {want}"))?;
                finite += want.is_finite() as usize;
                compared += 1;
            }
            let (got, want) = (b.combined().value, oracle::expurgated(&s));
            check(oracle::same(got, want, 1e-12), format!("E_ex at ({rx}, {ry}): {got} vs {want}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} values match, {finite} finite branch values"))
}

fn dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let s6 = solver(6);
    let grid = [0.1, 0.5, 1.2];
    let mut worst = f64::INFINITY;
    let mut both = 0;
    for _ in 0..20 {
        let w = Channel::new(2, 2, 2, random_rows(&mut rng)).map_err(|e| e.to_string())?;
        for rx in grid {
            for ry in grid {
                let r = rates(rx, ry);
                let ex = s6.expurgated(&w, r, 0.0).map_err(|e| e.to_string())?.value;
                let base = s6.baseline(&w, r, 0.0).map_err(|e| e.to_string())?.value;
                check(ex >= base - 1e-9, format!("({rx}, {ry}): {ex} < {base}"))?;
                if base.is_finite() && ex.is_finite() {
                    both += 1;
                    worst = worst.min(ex - base);
                }
            }
        }
    }
    Ok(format!("180 points, {both} with both finite, smallest finite gap {worst:.3e}"))
}

fn high_rate_zero() -> Outcome {
    // the product point P x W lies on the lattice only when every W(z|x,y) is a multiple of 4/d
    let half = Channel::from_fn(2, 2, 2, |x, y| if x == y { vec![1.0, 0.0] } else { vec![0.5, 0.5] }).unwrap();
    let cases = [
        ("adder", Channel::binary_adder().unwrap(), 4),
        ("identity", Channel::identity_binary().unwrap(), 4),
        ("noiseless xor", Channel::xor_bsc(0.0).unwrap(), 4),
        ("half-erasing", half, 8),
    ];
    for (name, w, d) in &cases {
        let e = solver(*d).expurgated(w, rates(2.0, 2.0), 0.0).map_err(|e| e.to_string())?;
        check(e.value == 0.0, format!("{name}: {}", e.value))?;
    }
    Ok(format!("{} channels give exactly 0", cases.len()))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let s6 = solver(6);
    let grid = [0.1, 0.4, 0.8, 1.5];
    for c in 0..5 {
        let w = Channel::new(2, 2, 2, random_rows(&mut rng)).map_err(|e| e.to_string())?;
        let mut e = [[0.0; 4]; 4];
        for (i, &rx) in grid.iter().enumerate() {
            for (j, &ry) in grid.iter().enumerate() {
                e[i][j] = s6.expurgated(&w, rates(rx, ry), 0.0).map_err(|e| e.to_string())?.value;
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                if i + 1 < 4 {
                    check(e[i + 1][j] <= e[i][j] + 1e-9, format!("channel {c}: R_X step at ({i}, {j})"))?;
                }
                if j + 1 < 4 {
                    check(e[i][j + 1] <= e[i][j] + 1e-9, format!("channel {c}: R_Y step at ({i}, {j})"))?;
                }
            }
        }
    }
    Ok("5 channels on a 4x4 grid".into())
}

fn expurgation_audit() -> Outcome {
    let law = InputLaw::uniform(1, 2, 2).unwrap();
    let u = time_sharing_sequence(&law, 8).map_err(|e| e.to_string())?;
    let c = generate_codebooks(&law, &u, 8, 8, 5).map_err(|e| e.to_string())?;
    let r = c.nominal_rates();
    let e = expurgate(&c, r, 0.0).map_err(|e| e.to_string())?;
    let product = e.code.m_x() * e.code.m_y();
    check(16 * product >= 64, format!("kept {product} of 64 pairs"))?;
    let report = packing_report(&e.code, r, e.achieved_delta, PackingMode::Expurgated).map_err(|e| e.to_string())?;
    check(report.holds, "per-pair inequalities fail at the achieved delta")?;
    let audit = audit_lemma4(&e.code, r, e.achieved_delta).map_err(|e| e.to_string())?;
    check(audit.violations.is_empty(), format!("{} audit violations", audit.violations.len()))?;
    Ok(format!(
        "kept {}x{}, achieved delta {:.4}, {} joint types audited",
        e.code.m_x(),
        e.code.m_y(),
        e.achieved_delta,
        audit.types_checked
    ))
}

fn counting() -> Outcome {
    for k in 1..=3usize {
        let axes = [Alphabet::new("A", k).unwrap()];
        for n in 1..=10u32 {
            let total: BigUint = enumerate_types(n, &axes).map_err(|e| e.to_string())?.map(|t| type_class_size(&t)).sum();
            check(total == BigUint::from(k).pow(n), format!("|A| = {k}, n = {n}"))?;
        }
    }
    Ok("|A| <= 3, n <= 10".into())
}

/// `(x_k, y_l)` is a symbolwise function of `(x_i, y_j)` for some other pair.
fn has_functional_rival(c: &CodebookPair) -> bool {
    let pairs: Vec<(usize, usize)> = (0..c.m_x()).flat_map(|i| (0..c.m_y()).map(move |j| (i, j))).collect();
    pairs.iter().any(|&(i, j)| {
        pairs.iter().any(|&(k, l)| {
            (k, l) != (i, j) && {
                let mut map = std::collections::HashMap::new();
                (0..c.n()).all(|t| {
                    let from = (c.cx()[i].symbols()[t], c.cy()[j].symbols()[t]);
                    let to = (c.cx()[k].symbols()[t], c.cy()[l].symbols()[t]);
                    *map.entry(from).or_insert(to) == to
                })
            }
        })
    })
}

fn decoder_soundness() -> Outcome {
    let id = Channel::identity_binary().unwrap();
    let law = InputLaw::uniform(1, 2, 2).unwrap();
    let u = time_sharing_sequence(&law, 6).map_err(|e| e.to_string())?;
    let mut clean = 0;
    let mut rivals = 0;
    for seed in 0..20 {
        let c = generate_codebooks(&law, &u, 2, 2, seed).map_err(|e| e.to_string())?;
        // ties between functionally related pairs are unavoidable on a noiseless channel
        if has_functional_rival(&c) {
            rivals += 1;
            continue;
        }
        let e = error_prob_exact(&c, &id, 1).map_err(|e| e.to_string())?;
        check(e.value == 0.0, format!("identity channel, seed {seed}: {}", e.value))?;
        clean += 1;
    }
    check(clean > 0, "no code without functional rivals")?;

    let law3 = InputLaw::from_conditionals(&[1.0], &[vec![1.0 / 3.0, 2.0 / 3.0]], &[vec![2.0 / 3.0, 1.0 / 3.0]])
        .map_err(|e| e.to_string())?;
    let u3 = time_sharing_sequence(&law3, 3).map_err(|e| e.to_string())?;
    let c = generate_codebooks(&law3, &u3, 2, 2, 8).map_err(|e| e.to_string())?;
    let w = Channel::xor_bsc(0.1).unwrap();
    let exact = error_prob_exact(&c, &w, 1).map_err(|e| e.to_string())?;
    let mc = error_prob_mc(&c, &w, 100_000, 42, 4).map_err(|e| e.to_string())?;
    let gap = (exact.value - mc.value).abs();
    check(gap <= 3.0 * mc.stderr, format!("exact {} vs MC {} ± {}", exact.value, mc.value, mc.stderr))?;
    Ok(format!(
        "identity: {clean} codes error-free ({rivals} skipped with functional rivals); XOR-BSC n=3: |exact - MC| = {gap:.2e}, stderr {:.2e}",
        mc.stderr
    ))
}

fn information_measures() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let sizes = [2usize, 2, 3, 2];
    let axes: Vec<Alphabet> =
        ["U", "X", "Y", "X~"].iter().zip(sizes).map(|(l, k)| Alphabet::new(*l, k).unwrap()).collect();
    let cells: usize = sizes.iter().product();
    for case in 0..1000 {
        let raw: Vec<f64> = (0..cells)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.01..1.0) })
            .collect();
        let s: f64 = raw.iter().sum();
        if s == 0.0 {
            continue;
        }
        let v = JointDist::new(axes.clone(), raw.iter().map(|r| r / s).collect()).map_err(|e| e.to_string())?;
        let mi = |a: &[&str], b: &[&str], c: &[&str]| conditional_mutual_information(&v, a, b, c).unwrap();
        let h = |t: &[&str], g: &[&str]| conditional_entropy(&v, t, g).unwrap();
        let y = v.marginalize(&["Y"]).map_err(|e| e.to_string())?;
        let py = Dist::new(Alphabet::new("Y", 3).unwrap(), y.probs().to_vec()).map_err(|e| e.to_string())?;
        check(kl_divergence(&py, &py).map_err(|e| e.to_string())? == 0.0, format!("case {case}: D(P||P)"))?;
        for (a, b, c) in [
            (&["X"][..], &["Y"][..], &["U"][..]),
            (&["X~"][..], &["X", "Y"][..], &["U"][..]),
            (&["X"][..], &["X~"][..], &[][..]),
        ] {
            check(mi(a, b, c) >= -1e-12, format!("case {case}: negative information"))?;
        }
        check(h(&["Y"], &["X", "U"]) <= h(&["Y"], &["U"]) + 1e-12, format!("case {case}: conditioning"))?;
        let lhs = mi(&["X~"], &["Y"], &["U"]) + mi(&["X~"], &["X"], &["U", "Y"]);
        check((lhs - mi(&["X~"], &["X", "Y"], &["U"])).abs() <= 1e-10, format!("case {case}: chain rule"))?;
    }
    Ok("1000 random joints".into())
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_macex"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let d = dir.path();
    std::fs::write(d.join("bsc.json"), Channel::xor_bsc(0.1).unwrap().to_json()).map_err(|e| e.to_string())?;
    let law = InputLaw::uniform(1, 2, 2).unwrap();
    let u = time_sharing_sequence(&law, 6).map_err(|e| e.to_string())?;
    let code = generate_codebooks(&law, &u, 2, 2, 9).map_err(|e| e.to_string())?;
    std::fs::write(d.join("code.json"), code.to_json()).map_err(|e| e.to_string())?;
    std::fs::write(
        d.join("sweep.toml"),
        "channel = \"bsc.json\"\n[rates]\nr_x = [0.1, 0.6]\nr_y = [0.2, 0.9]\n[solver]\nlattice_denominator = 6\n",
    )
    .map_err(|e| e.to_string())?;
    let commands: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("exponent", vec!["exponent", "--config", "sweep.toml"], vec![]),
        ("verify-packing", vec!["--seed", "3", "verify-packing", "--n", "8", "--mx", "8", "--my", "8"], vec![]),
        ("expurgate", vec!["--seed", "3", "expurgate", "--n", "8", "--mx", "8", "--my", "8"], vec![".report.json"]),
        (
            "simulate",
            vec!["--channel", "bsc.json", "--seed", "9", "simulate", "--codebook", "code.json", "--exact", "--trials", "5000"],
            vec![],
        ),
        ("region", vec!["--channel", "bsc.json", "region", "--rx", "0.2", "--ry", "0.3"], vec![]),
    ];
    for (name, args, extra) in &commands {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = format!("{name}.{run}.out");
            let mut full = vec!["--out", out.as_str()];
            full.extend(args.iter().copied());
            run_cli(d, &full)?;
            let mut bytes = std::fs::read(d.join(&out)).map_err(|e| e.to_string())?;
            for suffix in extra {
                bytes.extend(std::fs::read(d.join(format!("{out}{suffix}"))).map_err(|e| e.to_string())?);
            }
            outputs.push(bytes);
        }
        check(outputs[0] == outputs[1], format!("{name} output differs between runs"))?;
        check(!outputs[0].is_empty(), format!("{name} wrote nothing"))?;
    }
    Ok(format!("{} commands byte-identical across reruns", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 oracle equivalence", oracle_equivalence),
        ("2 expurgated dominates baseline", dominance),
        ("3 high-rate zero", high_rate_zero),
        ("4 monotonicity", monotonicity),
        ("5 expurgation audit", expurgation_audit),
        ("6 counting exactness", counting),
        ("7 decoder soundness", decoder_soundness),
        ("8 information measures", information_measures),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
