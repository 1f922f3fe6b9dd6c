use hybrid_mte::expcalc::{ExpPolyTerm, LinExpr, Piece, PiecewiseFn, Region, VarId};
use hybrid_mte::model::{make_normal_mte, standard_normal_mte};
use hybrid_mte::oracle::solve_linear_system;
use hybrid_mte::potential::{
    combine, marg_density_det, marg_det_pair, marginalize, restrict, DeterministicPotential, Entry, Equation, Factor,
    MixedPotential, Observation,
};

use super::support::{close, det, ensure, eq, equations_of, lin, same_deltas};
use super::Outcome;

const Y1: VarId = VarId(0);
const Y2: VarId = VarId(1);
const Z1: VarId = VarId(10);
const Z2: VarId = VarId(11);
const Z3: VarId = VarId(12);
const Z4: VarId = VarId(13);
const X: VarId = VarId(20);
const X1: VarId = VarId(21);
const Y: VarId = VarId(2);

const EQ_TOL: f64 = 1e-9;
const MASS_TOL: f64 = 1e-12;

type Check = fn() -> Result<(), String>;

pub fn ledger() -> Outcome {
    let checks: [(&str, Check); 11] = [
        ("masses times equations", masses_times_equations),
        ("densities times masses", densities_times_masses),
        ("sum out discrete", sum_out_discrete),
        ("pairwise equations", pairwise_equations),
        ("density through equations", density_through_equations),
        ("restrict state", restrict_state),
        ("restrict at point mass", restrict_at_point_mass),
        ("restrict child density", restrict_child_density),
        ("restrict to masses", restrict_to_masses),
        ("restrict equation variable", restrict_equation_variable),
        ("restrict to point equations", restrict_to_point_equations),
    ];
    for (name, f) in checks {
        f().map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!(
        "{} worked cases reproduced (equations 1e-9, masses 1e-12)",
        checks.len()
    ))
}

/// A positive test density on the unit box.
fn box_density(rate: f64, vars: &[VarId]) -> PiecewiseFn {
    let bounds: Vec<(VarId, f64, f64)> = vars.iter().map(|&v| (v, 0.0, 1.0)).collect();
    PiecewiseFn::new(
        vars.iter().copied(),
        vec![Piece::new(
            Region::cube(&bounds),
            vec![ExpPolyTerm::new(
                1.0,
                [],
                LinExpr::new(vars.iter().map(|&v| (v, rate)), 0.0),
            )],
        )],
    )
    .unwrap()
}

fn only_det(e: &Entry) -> Result<&DeterministicPotential, String> {
    match e.factors.as_slice() {
        [Factor::Deterministic(d)] => Ok(d),
        other => Err(format!("expected one deterministic factor, got {other:?}")),
    }
}

fn masses_times_equations() -> Result<(), String> {
    let eta = MixedPotential::from_masses(vec![(Y1, 2)], vec![0.6, 0.4]).unwrap();
    let xi1 = MixedPotential::new(
        vec![(Y1, 2)],
        vec![X1, Z1],
        vec![
            Entry::new(
                vec![],
                vec![Factor::deterministic(DeterministicPotential::single(eq(
                    &[(X1, 1.0), (Z1, -2.0)],
                    1.0,
                )))],
            ),
            Entry::new(
                vec![],
                vec![Factor::deterministic(DeterministicPotential::single(eq(
                    &[(X1, 1.0), (Z1, -0.25)],
                    -1.0,
                )))],
            ),
        ],
    )
    .unwrap();
    let m = marginalize(&combine(&eta, &xi1).unwrap(), Y1).map_err(|e| e.to_string())?;
    ensure(m.entries().len() == 1 && m.discrete().is_empty(), || format!("{m:?}"))?;
    let d = only_det(&m.entries()[0])?;
    let want = [
        (0.6, eq(&[(X1, 1.0), (Z1, -2.0)], 1.0)),
        (0.4, eq(&[(X1, 1.0), (Z1, -0.25)], -1.0)),
    ];
    ensure(d.factors().len() == 2, || format!("{d:?}"))?;
    for (got, (w, e)) in d.factors().iter().zip(&want) {
        ensure((got.weight - w).abs() <= MASS_TOL, || {
            format!("weight {} vs {w}", got.weight)
        })?;
        ensure(got.lhs().approx_eq(e.lhs(), EQ_TOL), || {
            format!("{} vs {}", got.lhs(), e.lhs())
        })?;
    }
    Ok(())
}

fn densities_times_masses() -> Result<(), String> {
    let phi1 = Factor::density(box_density(0.5, &[Z1, Z2]));
    let phi2 = Factor::density(box_density(-1.0, &[Z1]));
    let a1 = [0.3, 0.7];
    let a2 = [0.1, 0.2, 0.3, 0.4];
    let zeta1 = MixedPotential::new(
        vec![(Y1, 2)],
        vec![Z1, Z2],
        a1.iter().map(|&m| Entry::new(vec![m], vec![phi1.clone()])).collect(),
    )
    .unwrap();
    let zeta2 = MixedPotential::new(
        vec![(Y1, 2), (Y2, 2)],
        vec![Z1],
        a2.iter().map(|&m| Entry::new(vec![m], vec![phi2.clone()])).collect(),
    )
    .unwrap();
    let z = combine(&zeta1, &zeta2).map_err(|e| e.to_string())?;
    ensure(z.vars() == vec![Y1, Y2, Z1, Z2], || format!("domain {:?}", z.vars()))?;
    for y1 in 0..2 {
        for y2 in 0..2 {
            let e = z.entry_at(&[(Y1, y1), (Y2, y2)]).unwrap();
            ensure(e.masses == vec![a1[y1], a2[2 * y1 + y2]], || {
                format!("masses {:?}", e.masses)
            })?;
            ensure(
                e.factors.len() == 2 && e.factors[0].same(&phi1) && e.factors[1].same(&phi2),
                || "density parts were not kept apart".into(),
            )?;
        }
    }
    Ok(())
}

fn sum_out_discrete() -> Result<(), String> {
    let alpha = MixedPotential::from_masses(vec![(Y1, 2)], vec![0.7, 0.3]).unwrap();
    let beta = MixedPotential::from_masses(vec![(Y1, 2), (Y2, 2)], vec![0.6, 0.4, 0.2, 0.8]).unwrap();
    let phis: Vec<Factor> = (0..4)
        .map(|i| Factor::density(box_density(0.1 * (i + 1) as f64, &[Z1])))
        .collect();
    let phi = MixedPotential::new(
        vec![(Y1, 2), (Y2, 2)],
        vec![Z1],
        phis.iter().map(|f| Entry::new(vec![], vec![f.clone()])).collect(),
    )
    .unwrap();
    let zeta = combine(&combine(&alpha, &beta).unwrap(), &phi).unwrap();
    let m = marginalize(&zeta, Y1).map_err(|e| e.to_string())?;
    // φ_{i,j} sits at index 2i + j.
    let expect = [[(0.42, 0), (0.06, 2)], [(0.28, 1), (0.24, 3)]];
    for (y2, want) in expect.iter().enumerate() {
        let e = m.entry_at(&[(Y2, y2)]).unwrap();
        let [Factor::Mixture(mix)] = e.factors.as_slice() else {
            return Err(format!("expected a weighted set, got {:?}", e.factors));
        };
        ensure(mix.components().len() == 2, || format!("{mix:?}"))?;
        for (c, (w, k)) in mix.components().iter().zip(want) {
            ensure((c.weight * e.mass() - w).abs() <= MASS_TOL, || {
                format!("weight {} vs {w}", c.weight * e.mass())
            })?;
            ensure(Factor::Density(c.densities[0].clone()).same(&phis[*k]), || {
                format!("wrong density for weight {w}")
            })?;
        }
    }
    Ok(())
}

fn pairwise_inputs() -> (DeterministicPotential, DeterministicPotential) {
    (
        det(&[
            (0.7, eq(&[(Z1, -2.0), (Z2, 1.0)], -1.0)),
            (0.3, eq(&[(Z1, 3.0), (Z2, 1.0)], -2.0)),
        ]),
        det(&[
            (0.1, eq(&[(Z1, -3.0), (Z2, -2.0), (Z3, 1.0)], -1.0)),
            (0.9, eq(&[(Z1, 3.0), (Z2, -2.0), (Z3, 1.0)], 2.0)),
        ]),
    )
}

fn pairwise_equations() -> Result<(), String> {
    let (d1, d2) = pairwise_inputs();
    let out = marg_det_pair(&d1, &d2, Z2).map_err(|e| e.to_string())?;
    let got: Vec<(f64, LinExpr)> = out.factors().iter().map(|f| (f.weight, f.lhs().clone())).collect();
    let printed = [
        (0.07, lin(&[(Z1, -7.0), (Z3, 1.0)], -3.0)),
        (0.63, lin(&[(Z1, -1.0), (Z3, 1.0)], 0.0)),
    ];
    for (w, e) in &printed {
        let hit = got
            .iter()
            .any(|(gw, g)| (gw - w).abs() <= MASS_TOL && g.proportional_to(e, EQ_TOL));
        ensure(hit, || format!("no factor {w}·[{e} = 0] in {got:?}"))?;
    }
    Ok(())
}

pub fn linear_solve() -> Outcome {
    let (d1, d2) = pairwise_inputs();
    let out = marg_det_pair(&d1, &d2, Z2).map_err(|e| e.to_string())?;
    ensure(out.factors().len() == 4, || format!("{} factors", out.factors().len()))?;
    let mut k = 0;
    for a in d1.factors() {
        for b in d2.factors() {
            let solved = solve_linear_system(&[a.lhs().clone(), b.lhs().clone()], &[Z2]).map_err(|e| e.to_string())?;
            let f = &out.factors()[k];
            ensure(f.lhs().proportional_to(&solved, EQ_TOL), || {
                format!("factor {k}: {} vs solve {}", f.lhs(), solved)
            })?;
            ensure((f.weight - a.weight * b.weight).abs() <= MASS_TOL, || {
                format!("factor {k}: weight {}", f.weight)
            })?;
            k += 1;
        }
    }
    // The last two printed factors disagree with the substitution; the
    // derived ones are what the solve gives.
    let derived = [
        (0.03, lin(&[(Z1, 3.0), (Z3, 1.0)], -5.0)),
        (0.27, lin(&[(Z1, 9.0), (Z3, 1.0)], -2.0)),
    ];
    let printed = [
        lin(&[(Z1, -11.0), (Z3, 1.0)], -3.0),
        lin(&[(Z1, -3.0), (Z3, 1.0)], -2.0),
    ];
    for (i, ((w, want), shown)) in derived.iter().zip(&printed).enumerate() {
        let f = &out.factors()[2 + i];
        ensure(
            (f.weight - w).abs() <= MASS_TOL && f.lhs().proportional_to(want, EQ_TOL),
            || format!("factor {}: {}·[{} = 0]", 3 + i, f.weight, f.lhs()),
        )?;
        ensure(!f.lhs().proportional_to(shown, 1e-6), || {
            format!("factor {} unexpectedly matches the printed form", 3 + i)
        })?;
    }
    Ok(
        "all 4 factors match the solve; factors 3-4 are 0.03·[3z1+z3-5=0], 0.27·[9z1+z3-2=0], not the printed forms"
            .into(),
    )
}

fn density_through_equations() -> Result<(), String> {
    let phi = make_normal_mte(Z1, &lin(&[(Z3, 0.5)], 0.0), 1.0).unwrap();
    let d = det(&[
        (0.6, eq(&[(Z1, -0.5), (Z3, 0.25), (Z4, 1.0)], 0.0)),
        (0.4, eq(&[(Z1, -3.0), (Z3, 2.0), (Z4, 1.0)], 0.0)),
    ]);
    let out = marg_density_det(&phi, &d, Z1).map_err(|e| e.to_string())?;
    ensure(out.vars() == [Z3, Z4], || format!("domain {:?}", out.vars()))?;
    for i in 0..40 {
        let z3 = -3.0 + 0.15 * i as f64;
        let z4 = 2.0 - 0.11 * i as f64;
        let f = |z1: f64| phi.evaluate(&[(Z1, z1), (Z3, z3)]).unwrap();
        let want = 0.6 / 0.5 * f((-0.25 * z3 - z4) / -0.5) + 0.4 / 3.0 * f((-2.0 * z3 - z4) / -3.0);
        let got = out.evaluate(&[(Z3, z3), (Z4, z4)]).map_err(|e| e.to_string())?;
        ensure(close(got, want, EQ_TOL), || format!("at ({z3}, {z4}): {got} vs {want}"))?;
    }
    Ok(())
}

fn two_branch(phi_y: PiecewiseFn, phi_ny: PiecewiseFn, masses: [f64; 2], cont: Vec<VarId>) -> MixedPotential {
    MixedPotential::new(
        vec![(Y1, 2)],
        cont,
        vec![
            Entry::new(vec![masses[0]], vec![Factor::density(phi_y)]),
            Entry::new(vec![masses[1]], vec![Factor::density(phi_ny)]),
        ],
    )
    .unwrap()
}

fn restrict_state() -> Result<(), String> {
    let p = two_branch(
        box_density(1.0, &[Z1, Z2]),
        box_density(-1.0, &[Z1, Z2]),
        [0.6, 0.4],
        vec![Z1, Z2],
    );
    let r = restrict(&p, Y1, Observation::State(1)).map_err(|e| e.to_string())?;
    ensure(r.discrete().is_empty() && r.continuous() == [Z1, Z2], || {
        format!("domain {:?}", r.vars())
    })?;
    ensure(r.entries()[0] == p.entries()[1], || format!("{:?}", r.entries()[0]))?;
    ensure(r.entries()[0].mass() == 0.4, || "mass is not 0.4".into())
}

fn restrict_at_point_mass() -> Result<(), String> {
    let phi = make_normal_mte(X, &lin(&[(Z1, 1.0)], 0.0), 1.0).unwrap();
    let p = MixedPotential::new(
        vec![(Y, 3)],
        vec![X, Z1],
        vec![
            Entry::new(
                vec![0.5],
                vec![Factor::deterministic(DeterministicPotential::single(Equation::point(
                    X, 1.0,
                )))],
            ),
            Entry::new(
                vec![],
                vec![Factor::deterministic(DeterministicPotential::single(eq(
                    &[(X, 1.0), (Z1, -1.0)],
                    0.0,
                )))],
            ),
            Entry::new(vec![], vec![Factor::density(phi)]),
        ],
    )
    .unwrap();
    let r = restrict(&p, X, Observation::Value(1.0)).map_err(|e| e.to_string())?;
    ensure(r.entries()[0] == Entry::new(vec![0.5], vec![]), || {
        format!("Y=1: {:?}", r.entries()[0])
    })?;
    ensure(r.entries()[1].is_zero() && r.entries()[2].is_zero(), || {
        "unobserved states kept their weight".into()
    })
}

fn restrict_child_density() -> Result<(), String> {
    let fy = make_normal_mte(Z2, &lin(&[(Z1, 0.3)], 4.5), 1.0).unwrap();
    let fny = make_normal_mte(Z2, &lin(&[(Z1, -0.2)], 5.0), 2.0).unwrap();
    let p = two_branch(fy.clone(), fny.clone(), [0.6, 0.4], vec![Z1, Z2]);
    let r = restrict(&p, Z2, Observation::Value(5.0)).map_err(|e| e.to_string())?;
    ensure(r.continuous() == [Z1] && r.discrete() == [(Y1, 2)], || {
        format!("domain {:?}", r.vars())
    })?;
    for (i, (f, m)) in [(&fy, 0.6), (&fny, 0.4)].into_iter().enumerate() {
        let e = &r.entries()[i];
        ensure((e.mass() - m).abs() <= MASS_TOL, || format!("mass {}", e.mass()))?;
        for k in 0..30 {
            let z1 = -4.0 + 0.27 * k as f64;
            let got = e.density_value(&[(Z1, z1)]).map_err(|e| e.to_string())? / m;
            let want = f.evaluate(&[(Z1, z1), (Z2, 5.0)]).unwrap();
            ensure(close(got, want, EQ_TOL), || format!("z1={z1}: {got} vs {want}"))?;
        }
    }
    Ok(())
}

fn restrict_to_masses() -> Result<(), String> {
    let gy = standard_normal_mte(Z1);
    let gny = make_normal_mte(Z1, &LinExpr::constant(1.0), 1.0).unwrap();
    let q = two_branch(gy.clone(), gny.clone(), [0.2, 0.8], vec![Z1]);
    let r = restrict(&q, Z1, Observation::Value(0.0)).map_err(|e| e.to_string())?;
    ensure(r.continuous().is_empty(), || format!("domain {:?}", r.vars()))?;
    let want = [
        0.2 * gy.evaluate(&[(Z1, 0.0)]).unwrap(),
        0.8 * gny.evaluate(&[(Z1, 0.0)]).unwrap(),
    ];
    for (e, w) in r.entries().iter().zip(want) {
        ensure(e.factors.is_empty(), || "density part is not the identity".into())?;
        ensure((e.mass() - w).abs() <= MASS_TOL, || format!("mass {} vs {w}", e.mass()))?;
    }
    Ok(())
}

fn restrict_equation_variable() -> Result<(), String> {
    let p = MixedPotential::new(
        vec![(Y1, 2)],
        vec![Z1, Z2, Z3],
        vec![
            Entry::new(
                vec![],
                vec![Factor::deterministic(det(&[
                    (0.2, eq(&[(Z1, -2.0), (Z2, -0.75), (Z3, 1.0)], 0.0)),
                    (0.8, eq(&[(Z1, -3.0), (Z2, -1.0), (Z3, 1.0)], 0.0)),
                ]))],
            ),
            Entry::new(
                vec![],
                vec![Factor::deterministic(det(&[
                    (0.9, eq(&[(Z1, -5.0), (Z2, -0.2), (Z3, 1.0)], 0.0)),
                    (0.1, eq(&[(Z1, -0.4), (Z2, -0.1), (Z3, 1.0)], 0.0)),
                ]))],
            ),
        ],
    )
    .unwrap();
    let r = restrict(&p, Z1, Observation::Value(2.0)).map_err(|e| e.to_string())?;
    let want = [
        [
            (0.2, lin(&[(Z2, -0.75), (Z3, 1.0)], -4.0)),
            (0.8, lin(&[(Z2, -1.0), (Z3, 1.0)], -6.0)),
        ],
        [
            (0.9, lin(&[(Z2, -0.2), (Z3, 1.0)], -10.0)),
            (0.1, lin(&[(Z2, -0.1), (Z3, 1.0)], -0.8)),
        ],
    ];
    for (e, want) in r.entries().iter().zip(&want) {
        ensure(e.mass() == 1.0, || format!("mass {}", e.mass()))?;
        let d = only_det(e)?;
        ensure(d.factors().len() == 2, || format!("{d:?}"))?;
        for (got, (w, lhs)) in d.factors().iter().zip(want) {
            ensure((got.weight - w).abs() <= MASS_TOL, || format!("weight {}", got.weight))?;
            ensure(got.lhs().approx_eq(lhs, EQ_TOL), || format!("{} vs {lhs}", got.lhs()))?;
        }
    }
    Ok(())
}

fn restrict_to_point_equations() -> Result<(), String> {
    let p = MixedPotential::new(
        vec![(Y1, 2)],
        vec![Z1, Z2],
        vec![
            Entry::new(
                vec![0.6],
                vec![Factor::deterministic(det(&[(1.0, eq(&[(Z1, 2.0), (Z2, -3.0)], 2.0))]))],
            ),
            Entry::new(
                vec![0.4],
                vec![Factor::deterministic(det(&[(1.0, eq(&[(Z1, 3.0), (Z2, 5.0)], 2.0))]))],
            ),
        ],
    )
    .unwrap();
    let r = restrict(&p, Z2, Observation::Value(0.0)).map_err(|e| e.to_string())?;
    for (e, (mass, at)) in r.entries().iter().zip([(0.6 / 2.0, -1.0), (0.4 / 3.0, -2.0 / 3.0)]) {
        let got = equations_of(e)?;
        ensure(got.len() == 1, || format!("{got:?}"))?;
        ensure((e.mass() - mass).abs() <= MASS_TOL, || {
            format!("mass {} vs {mass}", e.mass())
        })?;
        same_deltas(&got, &[(mass, lin(&[(Z1, 1.0)], -at))], EQ_TOL)?;
    }
    Ok(())
}
