//! Capacity pentagon for a fixed input law and a grid search over time-sharing laws.

use serde::Serialize;

use super::{InputLaw, RatePair};
use crate::error::{Error, Result};
use crate::prob::{axis, conditional_mutual_information, Channel, EQ_TOL};
use crate::types::Compositions;

/// `(I(X∧Z|YU), I(Y∧Z|XU), I(XY∧Z|U))` for one input law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Pentagon {
    pub i_x: f64,
    pub i_y: f64,
    pub i_xy: f64,
}

impl Pentagon {
    /// Smallest margin among the three rate constraints (negative when outside).
    pub fn slack(&self, rates: RatePair) -> f64 {
        (self.i_x - rates.r_x)
            .min(self.i_y - rates.r_y)
            .min(self.i_xy - rates.sum())
    }

    pub fn contains(&self, rates: RatePair) -> bool {
        self.slack(rates) >= -EQ_TOL
    }
}

pub fn capacity_pentagon(p: &InputLaw, w: &Channel) -> Result<Pentagon> {
    use axis::{U, X, Y, Z};
    let joint = p.with_channel(w)?;
    Ok(Pentagon {
        i_x: conditional_mutual_information(&joint, &[X], &[Z], &[Y, U])?,
        i_y: conditional_mutual_information(&joint, &[Y], &[Z], &[X, U])?,
        i_xy: conditional_mutual_information(&joint, &[X, Y], &[Z], &[U])?,
    })
}

/// Outcome of [`region_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSearch {
    pub contains: bool,
    /// The law whose pentagon contains the rates, or the best one seen.
    pub law: InputLaw,
    pub pentagon: Pentagon,
    pub slack: f64,
    /// Set when the combination budget ran out before the grid was exhausted.
    pub truncated: bool,
}

/// Largest `|U|` searched.
pub const MAX_TIME_SHARING: usize = 4;
/// Budget on evaluated (weights, items) combinations.
pub const MAX_REGION_COMBINATIONS: u64 = 5_000_000;

struct Item {
    px: Vec<f64>,
    py: Vec<f64>,
    pent: Pentagon,
}

fn grid_points(size: usize, resolution: u32) -> Vec<Vec<f64>> {
    Compositions::new(resolution, size)
        .map(|c| c.iter().map(|&k| k as f64 / resolution as f64).collect())
        .collect()
}

fn dominated(a: &Pentagon, b: &Pentagon) -> bool {
    b.i_x >= a.i_x && b.i_y >= a.i_y && b.i_xy >= a.i_xy && (b.i_x > a.i_x || b.i_y > a.i_y || b.i_xy > a.i_xy)
}

/// Searches `|U| ≤ 4` time-sharing laws whose weights and per-`u` input
/// distributions lie on a grid of resolution `u_grid`. An inner approximation:
/// `contains == false` means "not found on the grid".
pub fn region_search(rates: RatePair, w: &Channel, u_grid: u32) -> Result<RegionSearch> {
    if u_grid == 0 {
        return Err(Error::usage("u_grid must be at least 1"));
    }
    let xs = grid_points(w.x_size(), u_grid);
    let ys = grid_points(w.y_size(), u_grid);
    let mut items = Vec::with_capacity(xs.len() * ys.len());
    for px in &xs {
        for py in &ys {
            let law = InputLaw::from_conditionals(&[1.0], std::slice::from_ref(px), std::slice::from_ref(py))?;
            items.push(Item {
                px: px.clone(),
                py: py.clone(),
                pent: capacity_pentagon(&law, w)?,
            });
        }
    }
    let items: Vec<Item> = {
        let pents: Vec<Pentagon> = items.iter().map(|i| i.pent).collect();
        items
            .into_iter()
            .enumerate()
            .filter(|(k, it)| {
                !pents
                    .iter()
                    .enumerate()
                    .any(|(j, other)| dominated(&it.pent, other) || (j < *k && *other == it.pent))
            })
            .map(|(_, it)| it)
            .collect()
    };

    let mut best: Option<(f64, Vec<u32>, Vec<usize>, Pentagon)> = None;
    let mut evaluated: u64 = 0;
    let mut truncated = false;
    'outer: for k in 1..=MAX_TIME_SHARING.min(u_grid as usize) {
        // weights: compositions of u_grid into k positive parts
        let weights: Vec<Vec<u32>> = Compositions::new(u_grid - k as u32, k)
            .map(|c| c.iter().map(|&v| v + 1).collect())
            .collect();
        let mut pick = vec![0usize; k];
        loop {
            for wts in &weights {
                evaluated += 1;
                if evaluated > MAX_REGION_COMBINATIONS {
                    truncated = true;
                    break 'outer;
                }
                let mut pent = Pentagon {
                    i_x: 0.0,
                    i_y: 0.0,
                    i_xy: 0.0,
                };
                for (&i, &wt) in pick.iter().zip(wts) {
                    let f = wt as f64 / u_grid as f64;
                    pent.i_x += f * items[i].pent.i_x;
                    pent.i_y += f * items[i].pent.i_y;
                    pent.i_xy += f * items[i].pent.i_xy;
                }
                let s = pent.slack(rates);
                if best.as_ref().is_none_or(|(b, ..)| s > *b) {
                    best = Some((s, wts.clone(), pick.clone(), pent));
                }
            }
            // next nondecreasing tuple of item indices
            match (0..k).rev().find(|&q| pick[q] + 1 < items.len()) {
                Some(pos) => {
                    pick[pos] += 1;
                    for q in pos + 1..k {
                        pick[q] = pick[pos];
                    }
                }
                None => break,
            }
        }
        // finish the level so the witness is the best law of the smallest |U|
        if best.as_ref().is_some_and(|(b, ..)| *b >= -EQ_TOL) {
            break;
        }
    }

    let (slack, wts, pick, pentagon) = best.expect("the grid always has at least one point");
    let p_u: Vec<f64> = wts.iter().map(|&w| w as f64 / u_grid as f64).collect();
    let law = InputLaw::from_conditionals(
        &p_u,
        &pick.iter().map(|&i| items[i].px.clone()).collect::<Vec<_>>(),
        &pick.iter().map(|&i| items[i].py.clone()).collect::<Vec<_>>(),
    )?;
    Ok(RegionSearch {
        contains: slack >= -EQ_TOL,
        law,
        pentagon,
        slack,
        truncated,
    })
}

/// Approximate membership test: true iff [`region_search`] finds a containing pentagon.
pub fn region_contains(rates: RatePair, w: &Channel, u_grid: u32) -> Result<bool> {
    Ok(region_search(rates, w, u_grid)?.contains)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn identity_channel_pentagon() {
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let pent = capacity_pentagon(&p, &Channel::identity_binary().unwrap()).unwrap();
        assert!(close(pent.i_x, 1.0) && close(pent.i_y, 1.0) && close(pent.i_xy, 2.0));
    }

    #[test]
    fn adder_pentagon() {
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let pent = capacity_pentagon(&p, &Channel::binary_adder().unwrap()).unwrap();
        assert!(close(pent.i_x, 1.0) && close(pent.i_y, 1.0) && close(pent.i_xy, 1.5));
    }

    #[test]
    fn useless_channel_pentagon_is_zero() {
        let p = InputLaw::uniform(1, 2, 2).unwrap();
        let w = Channel::useless(2, 2, &[0.3, 0.7]).unwrap();
        let pent = capacity_pentagon(&p, &w).unwrap();
        assert!(pent.i_x.abs() < 1e-12 && pent.i_y.abs() < 1e-12 && pent.i_xy.abs() < 1e-12);
    }

    #[test]
    fn region_search_on_the_adder() {
        let w = Channel::binary_adder().unwrap();
        assert!(region_contains(RatePair::new(0.0, 0.0).unwrap(), &w, 4).unwrap());
        let r = region_search(RatePair::new(0.7, 0.7).unwrap(), &w, 8).unwrap();
        assert!(r.contains);
        assert!(close(r.pentagon.i_xy, 1.5));
        assert!(!region_contains(RatePair::new(1.01, 0.1).unwrap(), &w, 8).unwrap());
        assert!(!region_contains(RatePair::new(0.8, 0.8).unwrap(), &w, 4).unwrap());
    }
}
