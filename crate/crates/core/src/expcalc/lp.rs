//! Tiny dense simplex for the region tests.
//!
//! Regions here have at most a handful of variables and a few dozen
//! constraints, so a dense tableau with Bland's rule is both adequate and
//! much cheaper than a general sparse solver.

const PIVOT_EPS: f64 = 1e-12;
const MAX_ITERS: usize = 10_000;

/// Largest `t ≤ 1` such that some `x` satisfies `aᵢ·x + bᵢ ≥ t` for every
/// row `(aᵢ, bᵢ)`. Rows should be normalised so `t` is a distance.
pub(crate) fn max_slack(rows: &[(&[f64], f64)], nvars: usize) -> f64 {
    if rows.is_empty() {
        return 1.0;
    }
    // Substitute t = tau - shift so the origin (x = 0, tau = 0) is feasible:
    //   -a·x + tau <= b + shift,   tau <= 1 + shift.
    let min_b = rows.iter().map(|(_, b)| *b).fold(f64::INFINITY, f64::min);
    let shift = (-min_b).max(0.0) + 1.0;
    // Columns: x⁺ (nvars), x⁻ (nvars), tau.
    let ncols = 2 * nvars + 1;
    let mut m: Vec<Vec<f64>> = Vec::with_capacity(rows.len() + 1);
    let mut d: Vec<f64> = Vec::with_capacity(rows.len() + 1);
    for (a, b) in rows {
        let mut row = vec![0.0; ncols];
        for j in 0..nvars {
            row[j] = -a[j];
            row[nvars + j] = a[j];
        }
        row[2 * nvars] = 1.0;
        m.push(row);
        d.push(b + shift);
    }
    let mut cap = vec![0.0; ncols];
    cap[2 * nvars] = 1.0;
    m.push(cap);
    d.push(1.0 + shift);
    let mut c = vec![0.0; ncols];
    c[2 * nvars] = 1.0;
    match simplex_max(&m, &d, &c) {
        Some(obj) => obj - shift,
        None => 1.0,
    }
}

/// Maximises `c·y` subject to `M y ≤ d`, `y ≥ 0`, with `d ≥ 0`.
/// Returns `None` if the objective is unbounded.
fn simplex_max(m: &[Vec<f64>], d: &[f64], c: &[f64]) -> Option<f64> {
    let rows = m.len();
    let ncols = c.len();
    let width = ncols + rows + 1;
    let mut tab = vec![0.0; (rows + 1) * width];
    let at = |r: usize, k: usize| r * width + k;
    for r in 0..rows {
        for k in 0..ncols {
            tab[at(r, k)] = m[r][k];
        }
        tab[at(r, ncols + r)] = 1.0;
        tab[at(r, width - 1)] = d[r];
    }
    // Objective row holds reduced costs (negated for the standard max form).
    for k in 0..ncols {
        tab[at(rows, k)] = -c[k];
    }
    let mut basis: Vec<usize> = (ncols..ncols + rows).collect();

    for _ in 0..MAX_ITERS {
        let entering = (0..ncols + rows).find(|&k| tab[at(rows, k)] < -PIVOT_EPS);
        let Some(e) = entering else {
            return Some(tab[at(rows, width - 1)]);
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let coef = tab[at(r, e)];
            if coef > PIVOT_EPS {
                let ratio = tab[at(r, width - 1)] / coef;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-15 || (ratio <= lratio + 1e-15 && basis[r] < basis[lr]) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
        }
        let (lr, _) = leave?;
        let piv = tab[at(lr, e)];
        for k in 0..width {
            tab[at(lr, k)] /= piv;
        }
        for r in 0..=rows {
            if r == lr {
                continue;
            }
            let f = tab[at(r, e)];
            if f != 0.0 {
                for k in 0..width {
                    tab[at(r, k)] -= f * tab[at(lr, k)];
                }
            }
        }
        basis[lr] = e;
    }
    Some(tab[at(rows, width - 1)])
}
