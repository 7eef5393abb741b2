//! End-to-end acceptance checks, one line per criterion.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twobundle::builtins::{self, classical_reduction, coherent_cm4, decorated, decorated_cm1_pair};
use twobundle::bundle2::{
    check_coherence, extract_pseudo, grothendieck_roundtrip, make_ch, pseudo_roundtrip, quasi_decorate, theta_e, Classification,
    E0Point, E1Point, HmFn, HuFn, PrincipalGBundleOverGroupoid, PseudoPrincipalBundle, Principal2Bundle, QuasiConnection,
};
use twobundle::connection::{pullback_connection, trivial_connection, StrictConnection};
use twobundle::crossed_module::{check_peiffer, Arrow, CrossedModule};
use twobundle::groupoid::{self, discrete_groupoid, Chart, GroupoidMorphism};
use twobundle::hpath::{make_lazy_path, move_add_constant, random_lazy_path, LazyPath, SampledPath, DEFAULT_GRID, DEFAULT_PLATEAU};
use twobundle::matlie::{j2, rot2, Mat, Pt};
use twobundle::transport::{
    fiber_point, functor_suite, invariance_suite, lazy_transport, lift_identities, naturality_suite, pullback_suite, quotient_equal,
    smoothness_probe, TorsorMap, Transform, TransportData,
};
use twobundle::vbassoc::{associate, linear_cleavage, vb_transport, TwoGroupLinearAction, TwoVectorSpace};

type Outcome = Result<String, String>;

fn pt(v: &[f64]) -> Pt {
    Pt::from_row_slice(v)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn line(a: &Pt, b: &Pt, k: usize) -> SampledPath {
    let (a, b) = (a.clone(), b.clone());
    SampledPath::from_fn(move |s| &a * (1.0 - s) + &b * s, k, k / 16).unwrap()
}

fn with_potential(b: Principal2Bundle, c: QuasiConnection, name: &str, strength: f64) -> (Principal2Bundle, QuasiConnection, StrictConnection) {
    let omega = trivial_connection(&b, builtins::potential(name, b.g(), strength).unwrap()).unwrap();
    (b, c, omega)
}

fn constant_cm1(strength: f64) -> (Principal2Bundle, QuasiConnection, StrictConnection) {
    let (b, c) = decorated_cm1_pair();
    with_potential(b, c, "constant", strength)
}

fn flat_cm1() -> (Principal2Bundle, QuasiConnection, StrictConnection) {
    let (b, c) = decorated_cm1_pair();
    with_potential(b, c, "zero", 1.0)
}

/// The discrete 2-group of SO(2) over `pair:2`: H is trivial, so equality in
/// the quotient is strict equality.
fn discrete_so2(cocycle: &str, potential: &str, strength: f64) -> (Principal2Bundle, QuasiConnection, StrictConnection) {
    let (b, c) = decorated("discrete:SO2", "pair:2", cocycle).unwrap();
    with_potential(b, c, potential, strength)
}

fn c1_peiffer() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["CM1", "CM1:SO3", "CM2", "CM3", "CM4"] {
        let r = check_peiffer(&CrossedModule::by_name(name).unwrap(), 500, 1).max();
        ensure(r < 1e-12, || format!("{name}: {r:.3e}"))?;
        worst = worst.max(r);
    }
    let corrupt = check_peiffer(&CrossedModule::by_name("corrupt:CM1").unwrap(), 500, 1).max();
    ensure(corrupt > 0.1, || format!("corrupted module only reaches {corrupt:.3e}"))?;
    Ok(format!("max residual {worst:.2e}, corrupted {corrupt:.2e}"))
}

fn c2_decorated_groupoid() -> Outcome {
    let (b, _) = decorated_cm1_pair();
    let rep = b.check_structure(200, 2);
    for label in ["associativity", "left_unit", "right_unit", "left_inverse", "right_inverse"] {
        let v = rep.get(label).ok_or(format!("no {label} residual"))?;
        ensure(v < 1e-10, || format!("{label}: {v:.3e}"))?;
    }
    ensure(rep.max() < 1e-10, || format!("{rep}"))?;
    Ok(format!("max residual {:.2e}", rep.max()))
}

fn hx(v: f64) -> Mat {
    let mut m = Mat::identity(2, 2);
    m[(0, 1)] = v;
    m
}

/// Coboundary pseudo data of `f` on CM2 over `pair:1`.
fn cm2_coboundary() -> PseudoPrincipalBundle {
    let cm = Arc::new(CrossedModule::cm2());
    let base = groupoid::pair_groupoid(1, Chart::default());
    let f = |g: &Pt| 0.3 * (g[0] - 2.0 * g[1]).sin() + 0.2 * g[0] * g[1] + 0.1;
    let (b2, b3) = (base.clone(), base.clone());
    let hu: HuFn = Arc::new(move |p: &E0Point| hx(f(&b2.unit(&p.x))));
    let hm: HmFn = Arc::new(move |g2: &Pt, g1: &Pt| hx(f(g2) + f(g1) - f(&b3.compose(g2, g1))));
    PseudoPrincipalBundle::new(PrincipalGBundleOverGroupoid::trivial(base, cm.g.clone()), cm, hu, hm)
}

fn c3_coherence() -> Outcome {
    let (b, _) = decorated_cm1_pair();
    let strict = b.pseudo().clone();
    let mut worst = 0.0f64;
    for (name, pb) in [("trivial", strict), ("coherent_cm4", coherent_cm4()), ("cm2_coboundary", cm2_coboundary())] {
        let rep = check_coherence(&pb, 200, 3);
        ensure(rep.entries().len() == 11, || format!("{name}: {} labels", rep.entries().len()))?;
        ensure(rep.max() < 1e-9, || format!("{name}: {rep}"))?;
        worst = worst.max(rep.max());
    }
    let bad = check_coherence(&builtins::associator_counterexample(), 200, 3);
    let failing: Vec<&str> = bad.entries().iter().filter(|(_, v)| !(*v < 1e-9)).map(|(l, _)| l.as_str()).collect();
    ensure(failing == ["(j)"], || format!("counterexample fails at {failing:?}"))?;
    Ok(format!("max residual {worst:.2e}, counterexample fails only at (j) ({:.2e})", bad.get("(j)").unwrap()))
}

fn c4_grothendieck() -> Outcome {
    let (b1, c1) = decorated_cm1_pair();
    let ch = make_ch(&b1, &c1, Arc::new(|g: &Pt, _p: &E0Point| rot2(0.3 * g[0].sin() + 0.1 * g[3]))).unwrap();
    let cm1_pseudo = extract_pseudo(&b1, &ch).unwrap();
    let mut cases: Vec<(&str, PseudoPrincipalBundle, Principal2Bundle, QuasiConnection)> = vec![("CM1", cm1_pseudo, b1, ch)];
    for (name, pb) in [("CM2", cm2_coboundary()), ("CM4", coherent_cm4())] {
        let (b, c) = quasi_decorate(&pb).unwrap();
        cases.push((name, pb, b, c));
    }
    let mut worst = 0.0f64;
    for (name, pb, b, c) in &cases {
        let round = pseudo_roundtrip(pb, 100, 4).map_err(|e| e.to_string())?;
        ensure(round.max() < 1e-9, || format!("{name} pseudo round trip: {round}"))?;
        let theta = grothendieck_roundtrip(b, c, 100, 4).map_err(|e| e.to_string())?;
        ensure(theta.max() < 1e-9, || format!("{name} theta_E: {theta}"))?;
        worst = worst.max(round.max()).max(theta.max());
    }
    Ok(format!("max residual {worst:.2e} on CM1, CM2, CM4"))
}

fn classical_error(strength: f64, k: usize) -> f64 {
    let (b, c, omega) = classical_reduction(strength);
    let base = b.base();
    let (x, y) = (pt(&[-0.3, 0.2]), pt(&[0.9, -0.4]));
    let alpha = SampledPath::waypoints(&[x.clone(), pt(&[0.4, 0.5]), y.clone()], k, k / 16).unwrap();
    let g = make_lazy_path(base, vec![base.unit(&x), base.unit(&y)], vec![alpha]).unwrap();
    let t = lazy_transport(&b, &c, &omega, &g).unwrap();
    let a = rot2(0.7);
    let end = t.apply0(&E0Point::new(x.clone(), a.clone())).unwrap().a;
    let exact = rot2(-strength * (y[0] - x[0])) * &a;
    (end - &exact).norm() / exact.norm()
}

fn c5_classical_reduction() -> Outcome {
    let strength = PI / 2.0;
    let err = classical_error(strength, 128);
    ensure(err < 1e-6, || format!("relative error {err:.3e} at K = 128"))?;
    let grids = [64usize, 128, 256, 512];
    let pts: Vec<(f64, f64)> = grids.iter().map(|&k| ((1.0 / k as f64).ln(), classical_error(strength, k).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    ensure((3.8..=4.2).contains(&slope), || format!("slope {slope:.3}"))?;
    Ok(format!("relative error {err:.2e} at K = 128, log-log slope {slope:.3} over K = 64..512"))
}

fn c6_lift_identities() -> Outcome {
    let (b, _, omega) = constant_cm1(0.8);
    let base = b.base();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let k = 256;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        // short chords: the RK4 error of the E1 lift grows with the fifth power of the chord
        let g0 = base.sample_mor(&mut rng);
        let g1 = &g0 + (base.sample_mor(&mut rng) - &g0) * 0.2;
        let zeta = line(&g0, &g1, k);
        let d0 = E1Point::new(g0.clone(), fiber_point(&b, &base.source(&g0), &mut rng), b.cm().h.random_element(&mut rng, 1.0));
        let rep = lift_identities(&omega, &zeta, &d0).map_err(|e| e.to_string())?;
        ensure(rep.max() < 1e-7, || format!("{rep}"))?;
        worst = worst.max(rep.max());
    }
    Ok(format!("max residual {worst:.2e} over 100 lifts (K = {k})"))
}

fn invariance_cases(b: &Principal2Bundle, c: &QuasiConnection, omega: &StrictConnection, rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let base = b.base();
    let k = DEFAULT_GRID;
    let p = DEFAULT_PLATEAU;
    let x = pt(&[0.1, -0.2]);
    let g = random_lazy_path(base, &x, 2, k, p, rng).map_err(|e| e.to_string())?;
    let mut cases: Vec<(&str, LazyPath, Transform)> = Vec::new();

    // move (1), removing a constant path that was inserted first
    let added = move_add_constant(base, &g, 1, k, p).map_err(|e| e.to_string())?;
    cases.push(("move 1", added, Transform::RemoveConstant(1)));

    // move (2) needs a unit between two paths
    let alpha1 = g.paths[0].clone();
    let m = alpha1.end().clone();
    let beta = SampledPath::waypoints(&[m.clone(), pt(&[0.3, 0.4]), pt(&[-0.2, 0.5])], k, p).map_err(|e| e.to_string())?;
    let last = base.sample_from(beta.end(), rng);
    let units = make_lazy_path(base, vec![g.arrows[0].clone(), base.unit(&m), last], vec![alpha1, beta]).map_err(|e| e.to_string())?;
    cases.push(("move 2", units, Transform::RemoveIdentity(1)));

    // move (3); on a pair groupoid the target path is nonconstant
    let pair = base.mor_dim == 2 * base.obj_dim;
    let alpha = g.paths[0].clone();
    let zeta = if pair {
        let y0 = base.target(&g.arrows[0]);
        let beta = SampledPath::from_fn(|s| &y0 + pt(&[0.3 * s, -0.2 * s * s]), k, p).map_err(|e| e.to_string())?;
        let joined = beta.samples().iter().zip(alpha.samples()).map(|(t, s)| Pt::from_iterator(4, t.iter().chain(s.iter()).cloned()));
        SampledPath::new(joined.collect(), p).map_err(|e| e.to_string())?
    } else {
        alpha.map(|x| base.unit(x))
    };
    cases.push(("move 3", g.clone(), Transform::Conjugate { path: 1, zeta }));

    // thin deformation: the outer ζ keep the endpoints of Γ fixed, so on a
    // pair groupoid (target then source coordinates) they move one factor
    // and on a discrete groupoid they stay constant
    let last = g.arrows.len() - 1;
    let n = base.mor_dim;
    let zetas: Vec<SampledPath> = g
        .arrows
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let d = Pt::from_iterator(n, (0..n).map(|j| {
                let moves = if pair { (j < 2 && i != last) || (j >= 2 && i != 0) } else { i != 0 && i != last };
                if moves { rng.random_range(-0.2..0.2) } else { 0.0 }
            }));
            line(a, &(a + d), k)
        })
        .collect();
    cases.push(("thin deformation", g.clone(), Transform::ThinDeform(zetas)));

    let phi: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(|t| t + 0.15 * (2.0 * PI * t).sin() / (2.0 * PI) * (PI * t).sin().powi(2));
    cases.push(("reparametrization", g.clone(), Transform::Reparametrize { path: 2, phi }));

    let mut worst = 0.0f64;
    for (name, path, tr) in &cases {
        let rep = invariance_suite(b, c, omega, path, tr).map_err(|e| format!("{name}: {e}"))?;
        let d = rep.residuals.get("tau_distance").unwrap_or(f64::NAN);
        ensure(rep.pass && d < 1e-6, || format!("{name}: {}", rep.residuals))?;
        worst = worst.max(d);
    }
    Ok((cases.len(), worst))
}

fn c7_thin_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    let scenarios = [
        ("flat CM1", flat_cm1()),
        ("constant-A CM1", constant_cm1(0.8)),
        ("flat discrete SO(2)", discrete_so2("gauge", "gauge", 1.0)),
        ("constant-A classical reduction", classical_reduction(0.8)),
    ];
    for (name, (b, c, omega)) in scenarios {
        let strict = twobundle::connection::validate_strict(&omega, 20, 7).max();
        ensure(strict < 1e-8, || format!("{name}: connection residual {strict:.3e}"))?;
        let (n, w) = invariance_cases(&b, &c, &omega, &mut rng).map_err(|e| format!("{name}: {e}"))?;
        count += n;
        worst = worst.max(w);
    }
    Ok(format!("{count} cases on flat and constant-A scenarios, max divider distance {worst:.2e}"))
}

fn c8_functoriality() -> Outcome {
    let (b, c, omega) = discrete_so2("gauge", "gauge", 1.0);
    let base = b.base().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let x = base.sample_obj(&mut rng);
        let g = random_lazy_path(&base, &x, 2, DEFAULT_GRID, DEFAULT_PLATEAU, &mut rng).map_err(|e| e.to_string())?;
        let g2 = random_lazy_path(&base, &g.target(&base), 1, DEFAULT_GRID, DEFAULT_PLATEAU, &mut rng).map_err(|e| e.to_string())?;
        let rep = functor_suite(&b, &c, &omega, &g, &g2).map_err(|e| e.to_string())?;
        ensure(rep.pass, || format!("pair {i}: {}", rep.residuals))?;
        worst = worst.max(rep.residuals.max());
    }
    Ok(format!("10 pairs pass, max divider distance {worst:.2e}"))
}

fn c9_naturality_pullback() -> Outcome {
    let (b, c, omega) = constant_cm1(0.6);
    let base = b.base().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = random_lazy_path(&base, &pt(&[0.1, 0.1]), 2, DEFAULT_GRID, DEFAULT_PLATEAU, &mut rng).map_err(|e| e.to_string())?;
    let ch = make_ch(&b, &c, Arc::new(|g: &Pt, _p: &E0Point| rot2(0.3 * g[0].sin() + 0.1 * g[3]))).unwrap();
    let pb = extract_pseudo(&b, &ch).map_err(|e| e.to_string())?;
    let (bq, cq) = quasi_decorate(&pb).map_err(|e| e.to_string())?;
    let theta = theta_e(&b, &ch);
    let pulled = pullback_connection(&theta, &bq, &omega);
    let src = TransportData { bundle: &bq, cleavage: &cq, omega: &pulled };
    let dst = TransportData { bundle: &b, cleavage: &ch, omega: &omega };
    let nat = naturality_suite(&theta, &src, &dst, &g, 3, 9, 1e-7).map_err(|e| e.to_string())?;
    ensure(nat.pass, || format!("naturality: {}", nat.residuals))?;

    let y = discrete_groupoid(2, Chart::default());
    let f = GroupoidMorphism::unit_inclusion(&base);
    let gy = random_lazy_path(&y, &pt(&[0.3, -0.2]), 2, DEFAULT_GRID, DEFAULT_PLATEAU, &mut rng).map_err(|e| e.to_string())?;
    let data = TransportData { bundle: &b, cleavage: &ch, omega: &omega };
    let pull = pullback_suite(&f, &y, &data, &gy, 3, 9, 1e-7).map_err(|e| e.to_string())?;
    ensure(pull.pass, || format!("pullback: {}", pull.residuals))?;
    Ok(format!("naturality max {:.2e}, pullback max {:.2e}", nat.residuals.max(), pull.residuals.max()))
}

fn translation_map(b: &Principal2Bundle, x: &Pt, v: [f64; 2]) -> TorsorMap {
    let mut g = Mat::identity(3, 3);
    g[(0, 2)] = v[0];
    g[(1, 2)] = v[1];
    let (b1, g1) = (b.clone(), g.clone());
    let e = b.cm().h.identity();
    TorsorMap::new(
        x.clone(),
        x.clone(),
        Arc::new(move |p| Ok(p.act(&g))),
        Arc::new(move |d| Ok(b1.act1(d, &Arrow::new(e.clone(), g1.clone())))),
    )
}

fn c10_quotient_cm4() -> Outcome {
    let (b, _) = decorated("CM4", "pair:2", "trivial").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = pt(&[0.2, -0.1]);
    let (mut equal, mut distinct) = (0, 0);
    for i in 0..20 {
        let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let along = rng.random_range(-2.0..2.0);
        let off = if i % 2 == 0 { 0.0 } else { rng.random_range(0.05..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 } };
        let f = translation_map(&b, &x, w);
        let f2 = translation_map(&b, &x, [w[0] + along, w[1] + off]);
        let q = quotient_equal(&b, &f, &f2).map_err(|e| e.to_string())?;
        let expected = off == 0.0;
        ensure(q.equal == expected, || format!("pair {i}: offset {off} classified as {}", q.equal))?;
        if q.equal {
            equal += 1;
        } else {
            distinct += 1;
        }
    }
    ensure(equal == 10 && distinct == 10, || format!("{equal} equal, {distinct} distinct"))?;
    Ok("20 pairs classified correctly (10 equal, 10 distinct)".into())
}

fn c11_vb_groupoid() -> Outcome {
    let (b, c) = decorated_cm1_pair();
    let v = TwoVectorSpace::pair(2);
    let assoc = associate(&b, &TwoGroupLinearAction::defining(b.cm_arc(), &v).unwrap(), &v).map_err(|e| e.to_string())?;
    let interchange = assoc.check_interchange(200, 11).map_err(|e| e.to_string())?;
    ensure(interchange < 1e-10, || format!("interchange {interchange:.3e}"))?;
    let adj = TwoGroupLinearAction::adjoint(b.cm_arc());
    let lie2 = TwoVectorSpace::lie2(b.cm());
    let assoc_adj = associate(&b, &adj, &lie2).map_err(|e| e.to_string())?;
    let interchange_adj = assoc_adj.check_interchange(200, 11).map_err(|e| e.to_string())?;
    ensure(interchange_adj < 1e-10, || format!("adjoint interchange {interchange_adj:.3e}"))?;

    ensure(c.classification == Classification::Categorical, || format!("cleavage is {}", c.classification))?;
    let cv = linear_cleavage(&assoc, &c).check(100, 11).map_err(|e| e.to_string())?;
    ensure(cv.max() < 1e-10, || format!("linear cleavage: {cv}"))?;

    let (bd, cd) = decorated("CM1", "discrete:2", "trivial").unwrap();
    let strength = 0.9;
    let omega = trivial_connection(&bd, builtins::potential("constant", bd.g(), strength).unwrap()).unwrap();
    let assoc = associate(&bd, &TwoGroupLinearAction::defining(bd.cm_arc(), &v).unwrap(), &v).map_err(|e| e.to_string())?;
    let (x, y) = (pt(&[-0.4, 0.2]), pt(&[0.8, 0.5]));
    let base = bd.base();
    let g = make_lazy_path(base, vec![base.unit(&x), base.unit(&y)], vec![line(&x, &y, DEFAULT_GRID)]).map_err(|e| e.to_string())?;
    let tr = vb_transport(&assoc, &cd, &omega, &g).map_err(|e| e.to_string())?;
    let lazy = lazy_transport(&bd, &cd, &omega, &g).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut consistency = 0.0f64;
    for _ in 0..20 {
        let a = bd.g().random_element(&mut rng, 1.0);
        let q = lazy.apply0(&E0Point::new(x.clone(), a.clone())).map_err(|e| e.to_string())?;
        let hol = &q.a * bd.g().inverse(&a);
        consistency = consistency.max((&tr.m0 - (assoc.action.rho0)(&hol)).norm());
    }
    ensure(consistency < 1e-9, || format!("fiber map vs rho(holonomy): {consistency:.3e}"))?;
    let inter = tr.intertwining(&assoc).max();
    ensure(inter < 1e-9, || format!("intertwining {inter:.3e}"))?;
    Ok(format!(
        "interchange {:.2e}, cleavage {:.2e}, consistency {consistency:.2e}, intertwining {inter:.2e}",
        interchange.max(interchange_adj),
        cv.max()
    ))
}

fn c12_smoothness() -> Outcome {
    let c0 = 1.1;
    let (b, cc) = decorated("CM1", "pair:2", "trivial").unwrap();
    let omega = trivial_connection(&b, builtins::potential("constant", b.g(), c0).unwrap()).unwrap();
    let base = b.base().clone();
    let x = pt(&[0.1, 0.2]);
    let family = |u: f64| {
        let y = &x + pt(&[u, 0.0]);
        let back = Pt::from_iterator(4, x.iter().chain(y.iter()).cloned());
        make_lazy_path(&base, vec![base.unit(&x), back], vec![line(&x, &y, DEFAULT_GRID)])
    };
    let g0 = rot2(0.2);
    let probe = E0Point::new(x.clone(), g0.clone());
    let mut worst = 0.0f64;
    for u0 in [0.3, 0.7, 1.2] {
        let h = 1e-3;
        let rep = smoothness_probe(&b, &cc, &omega, &family, &[u0 - h, u0, u0 + h], &probe).map_err(|e| e.to_string())?;
        let exact = j2() * j2() * rot2(-c0 * u0) * &g0 * (c0 * c0);
        let dev = (&rep.second[0] - exact).norm();
        ensure(dev < 1e-5, || format!("u = {u0}: {dev:.3e}"))?;
        worst = worst.max(dev);
    }
    Ok(format!("second divided difference within {worst:.2e} of the analytic value"))
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("crossed-module axioms", 1, c1_peiffer),
        ("decorated groupoid axioms", 2, c2_decorated_groupoid),
        ("coherence (a)-(k)", 2, c3_coherence),
        ("Grothendieck round trip", 5, c4_grothendieck),
        ("classical reduction", 5, c5_classical_reduction),
        ("lift identities", 5, c6_lift_identities),
        ("thin-homotopy invariance", 20, c7_thin_invariance),
        ("functoriality", 20, c8_functoriality),
        ("naturality and pullback", 10, c9_naturality_pullback),
        ("CM4 quotient law", 1, c10_quotient_cm4),
        ("associated VB-groupoid", 5, c11_vb_groupoid),
        ("smoothness probe", 5, c12_smoothness),
    ];
    let optimized = !cfg!(debug_assertions);
    let mut failures = 0;
    for (i, (title, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (pass, text) = match outcome {
            Ok(t) if optimized && over => (false, format!("{t}; runtime {:.2} s exceeds {budget} s", elapsed.as_secs_f64())),
            Ok(t) => (true, t),
            Err(e) => (false, e),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {title}: {text} [{:.2} s, budget {budget} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if !optimized {
        println!("runtime budgets are enforced in optimized builds only");
    }
    if failures > 0 {
        println!("{failures} of 12 criteria failed");
        std::process::exit(1);
    }
    println!("all 12 criteria pass");
}
