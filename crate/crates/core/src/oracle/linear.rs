use crate::expcalc::{LinExpr, VarId, ZERO_EPS};
use crate::{Error, Result};

/// Eliminates `eliminate` from the system `eqs = 0` and returns the one
/// equation left, scaled so its highest-numbered variable has coefficient 1.
/// Needs exactly one more equation than eliminated variables.
pub fn solve_linear_system(eqs: &[LinExpr], eliminate: &[VarId]) -> Result<LinExpr> {
    if eqs.len() != eliminate.len() + 1 {
        return Err(Error::DomainMismatch(format!(
            "{} equations cannot eliminate {} variables to one equation",
            eqs.len(),
            eliminate.len()
        )));
    }
    let mut rows: Vec<LinExpr> = eqs.to_vec();
    let mut used = vec![false; rows.len()];
    for &v in eliminate {
        let pivot = (0..rows.len())
            .filter(|&i| !used[i])
            .max_by(|&a, &b| rows[a].coeff(v).abs().total_cmp(&rows[b].coeff(v).abs()))
            .expect("more rows than eliminated variables");
        let a = rows[pivot].coeff(v);
        if a.abs() < ZERO_EPS {
            return Err(Error::NonInvertibleEquation(v.to_string()));
        }
        used[pivot] = true;
        let p = rows[pivot].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != pivot {
                let k = row.coeff(v) / a;
                if k != 0.0 {
                    *row = row.sub(&p.scale(k)).without(v);
                }
            }
        }
    }
    let last = (0..rows.len()).find(|&i| !used[i]).expect("one row remains");
    let out = &rows[last];
    let Some(&(_, head)) = out.coeffs().iter().rev().find(|(_, c)| c.abs() >= ZERO_EPS) else {
        return Err(Error::NonInvertibleEquation(
            "the remaining equation has no variables".into(),
        ));
    };
    Ok(out.scale(1.0 / head))
}
