//! The named check suites a scenario can request.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twobundle::bundle2::{
    check_coherence, check_torsor, classify_connection, extract_pseudo, grothendieck_roundtrip, pseudo_roundtrip, quasi_decorate,
    theta_e, E0Point, E1Point,
};
use twobundle::connection::{pullback_connection, validate_strict};
use twobundle::crossed_module::check_peiffer;
use twobundle::groupoid::{self, discrete_groupoid, Chart, GroupoidMorphism};
use twobundle::hpath::{groupoid_invert, random_lazy_path, LazyPath, SampledPath};
use twobundle::report::ResidualReport;
use twobundle::transport::{
    fiber_point, functor_suite, invariance_suite, lazy_transport, lift_identities, naturality_suite, pullback_suite, Transform,
    TransportData,
};
use twobundle::vbassoc::{linear_cleavage, vb_transport};

use crate::build::World;
use crate::scenario::CheckSpec;

/// Every suite name with its default tolerance and sample count.
pub const SUITES: &[(&str, f64, usize)] = &[
    ("peiffer", 1e-12, 500),
    ("groupoid_axioms", 1e-10, 200),
    ("bundle_structure", 1e-9, 100),
    ("torsor", 1e-9, 100),
    ("coherence", 1e-9, 100),
    ("pseudo_roundtrip", 1e-9, 50),
    ("grothendieck", 1e-9, 50),
    ("classify", 1e-8, 50),
    ("connection", 1e-8, 50),
    ("lift_identities", 1e-7, 20),
    ("classical_oracle", 1e-6, 1),
    ("invariance", 1e-6, 1),
    ("functor", 1e-6, 1),
    ("naturality", 1e-7, 2),
    ("pullback", 1e-7, 3),
    ("vb", 1e-9, 20),
];

const INTERCHANGE_TOL: f64 = 1e-10;

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// The outcome of one suite.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: String,
    pub pass: bool,
    pub residuals: ResidualReport,
    pub details: Vec<String>,
}

/// Why a suite could not produce an outcome.
#[derive(Debug)]
pub enum SuiteError {
    /// The scenario lacks or cannot build something the suite needs.
    Build(String),
}

impl From<String> for SuiteError {
    fn from(s: String) -> Self {
        SuiteError::Build(s)
    }
}

struct Ctx<'a> {
    world: &'a World,
    n: usize,
    seed: u64,
    tol: f64,
}

impl SuiteOutcome {
    fn from_report(name: &str, residuals: ResidualReport, tol: f64) -> Self {
        let failing: Vec<String> = residuals
            .entries()
            .iter()
            .filter(|(_, v)| !(*v < tol))
            .map(|(l, v)| format!("{l}: {v:.3e} >= {tol:.1e}"))
            .collect();
        SuiteOutcome { name: name.into(), pass: failing.is_empty(), residuals, details: failing }
    }

    fn failed(name: &str, residuals: ResidualReport, detail: String) -> Self {
        SuiteOutcome { name: name.into(), pass: false, residuals, details: vec![detail] }
    }
}

/// Runs one requested check. Library errors inside a suite count as a
/// failure of that suite; missing scenario parts are build errors.
pub fn run(world: &World, check: &CheckSpec, seed: u64, tolerances: &BTreeMap<String, f64>) -> Result<SuiteOutcome, SuiteError> {
    let name = check.suite.as_str();
    let &(_, default_tol, default_n) = SUITES
        .iter()
        .find(|s| s.0 == name)
        .ok_or_else(|| SuiteError::Build(format!("unknown suite {name}")))?;
    let tol = check.tol.or_else(|| tolerances.get(name).copied()).unwrap_or(default_tol);
    let ctx = Ctx { world, n: check.samples.unwrap_or(default_n), seed, tol };
    let result = match name {
        "peiffer" => Ok(SuiteOutcome::from_report(name, check_peiffer(&world.cm, ctx.n, seed), tol)),
        "groupoid_axioms" => Ok(SuiteOutcome::from_report(name, groupoid::check_axioms(&world.base, ctx.n, seed), tol)),
        "bundle_structure" => Ok(SuiteOutcome::from_report(name, world.bundle()?.bundle.check_structure(ctx.n, seed), tol)),
        "torsor" => check_torsor(&world.bundle()?.bundle, ctx.n, seed).map(|r| SuiteOutcome::from_report(name, r, tol)),
        "coherence" => Ok(SuiteOutcome::from_report(name, check_coherence(world.pseudo()?, ctx.n, seed), tol)),
        "pseudo_roundtrip" => pseudo_roundtrip(world.pseudo()?, ctx.n, seed).map(|r| SuiteOutcome::from_report(name, r, tol)),
        "grothendieck" => {
            let b = world.bundle()?;
            grothendieck_roundtrip(&b.bundle, &b.cleavage, ctx.n, seed).map(|r| SuiteOutcome::from_report(name, r, tol))
        }
        "classify" => classify(&ctx)?,
        "connection" => Ok(SuiteOutcome::from_report(name, validate_strict(&world.connection()?.omega, ctx.n, seed), tol)),
        "lift_identities" => lifts(&ctx)?,
        "classical_oracle" => classical_oracle(&ctx)?,
        "invariance" => invariance(&ctx)?,
        "functor" => functor(&ctx)?,
        "naturality" => naturality(&ctx)?,
        "pullback" => pullback(&ctx)?,
        "vb" => vb(&ctx)?,
        _ => unreachable!("suite table and dispatch disagree on {name}"),
    };
    Ok(result.unwrap_or_else(|e| SuiteOutcome::failed(name, ResidualReport::new(), format!("error: {e}"))))
}

type SuiteResult = twobundle::Result<SuiteOutcome>;

fn classify(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let b = ctx.world.bundle()?;
    Ok(classify_connection(&b.bundle, &b.cleavage, ctx.n, ctx.seed).map(|(class, residuals)| {
        let mut details = vec![format!("classification: {class}")];
        let pass = match b.expected_class {
            Some(expected) if expected != class => {
                details.push(format!("expected {expected}"));
                false
            }
            _ => true,
        };
        SuiteOutcome { name: "classify".into(), pass, residuals, details }
    }))
}

fn lifts(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let omega = &ctx.world.connection()?.omega;
    let b = omega.bundle();
    let base = b.base();
    let k = ctx.world.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut residuals = ResidualReport::new();
    let mut run = || -> twobundle::Result<()> {
        for _ in 0..ctx.n.max(1) {
            // short chords: the RK4 error of the E1 lift grows with the fifth power of the chord
            let g0 = base.sample_mor(&mut rng);
            let g1 = &g0 + (base.sample_mor(&mut rng) - &g0) * 0.2;
            let (a, z) = (g0.clone(), g1.clone());
            let zeta = SampledPath::from_fn(move |s| &a * (1.0 - s) + &z * s, k, ctx.world.plateau())?;
            let p = fiber_point(b, &base.source(&g0), &mut rng);
            let d0 = E1Point::new(g0, p, b.cm().h.random_element(&mut rng, 1.0));
            residuals.merge("", &lift_identities(omega, &zeta, &d0)?);
        }
        Ok(())
    };
    let outcome = run();
    Ok(outcome.map(|_| SuiteOutcome::from_report("lift_identities", residuals, ctx.tol)))
}

fn classical_oracle(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let conn = w.connection()?;
    let b = w.bundle()?;
    let name = "classical_oracle";
    if conn.potential != "constant" || w.cm.g.algebra_dim() != 1 {
        return Ok(Ok(SuiteOutcome::failed(
            name,
            ResidualReport::new(),
            "needs a constant potential on a one-dimensional group".into(),
        )));
    }
    if w.paths.is_empty() {
        return Err(SuiteError::Build("classical_oracle: scenario has no paths".into()));
    }
    let g = &w.cm.g;
    let e1 = g.generators()[0].clone();
    let base = &w.base;
    let mut residuals = ResidualReport::new();
    let mut details = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    for (i, path) in w.paths.iter().enumerate() {
        if let Some(a) = path.arrows.iter().find(|a| base.identity_defect(a) > 1e-12) {
            details.push(format!("path {i}: arrow {a:?} is not a unit"));
            residuals.record("relative_error", f64::NAN);
            continue;
        }
        let mut run = || -> twobundle::Result<f64> {
            let t = lazy_transport(&b.bundle, &b.cleavage, &conn.omega, path)?;
            let dx: f64 = path.paths.iter().map(|p| p.end()[0] - p.start()[0]).sum();
            let hol = g.exp(&(&e1 * (-conn.strength * dx)))?;
            let p = fiber_point(&b.bundle, &path.source(base), &mut rng);
            let expected = &hol * &p.a;
            Ok((t.apply0(&p)?.a - &expected).norm() / expected.norm())
        };
        match run() {
            Ok(v) => residuals.record("relative_error", v),
            Err(e) => return Ok(Err(e)),
        }
    }
    let mut out = SuiteOutcome::from_report(name, residuals, ctx.tol);
    out.details.extend(details);
    Ok(Ok(out))
}

fn paths(ctx: &Ctx, suite: &str) -> Result<(), SuiteError> {
    if ctx.world.paths.is_empty() {
        return Err(SuiteError::Build(format!("{suite}: scenario has no paths")));
    }
    Ok(())
}

/// The moves applied to every scenario path, with a label each; moves that do
/// not apply to a path are skipped.
fn moves(w: &World, g: &LazyPath, rng: &mut ChaCha8Rng) -> Vec<(&'static str, Transform)> {
    let base = &w.base;
    let mut out = vec![("add_constant", Transform::AddConstant { index: 0, grid: w.grid, plateau: w.plateau() })];
    if let Some(alpha) = g.paths.first() {
        let anchor = base.sample_from(alpha.start(), rng);
        let zeta = alpha.map(|x| base.with_source(&anchor, x));
        out.push(("conjugate", Transform::Conjugate { path: 1, zeta }));
        out.push(("reparametrize", Transform::Reparametrize { path: 1, phi: Arc::new(|t| t + 0.1 * (2.0 * PI * t).sin()) }));
    }
    if g.order() >= 2 && base.identity_defect(&g.arrows[1]) < 1e-12 {
        out.push(("remove_identity", Transform::RemoveIdentity(1)));
    }
    out
}

fn invariance(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let (b, conn) = (w.bundle()?, w.connection()?);
    paths(ctx, "invariance")?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut residuals = ResidualReport::new();
    let mut details = Vec::new();
    let mut pass = true;
    for (i, g) in w.paths.iter().enumerate() {
        for (label, t) in moves(w, g, &mut rng) {
            match invariance_suite(&b.bundle, &b.cleavage, &conn.omega, g, &t) {
                Ok(rep) => {
                    let d = rep.residuals.get("tau_distance").unwrap_or(f64::NAN);
                    residuals.record(&format!("{label}.tau_distance"), d);
                    if !rep.pass || !(d < ctx.tol) {
                        pass = false;
                        details.push(format!("path {i}: {label} changes the class ({d:.3e})"));
                    }
                }
                Err(e) => {
                    pass = false;
                    details.push(format!("path {i}: {label}: {e}"));
                }
            }
        }
    }
    Ok(Ok(SuiteOutcome { name: "invariance".into(), pass, residuals, details }))
}

fn functor(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let (b, conn) = (w.bundle()?, w.connection()?);
    paths(ctx, "functor")?;
    let mut residuals = ResidualReport::new();
    let mut details = Vec::new();
    let mut pass = true;
    for (i, g) in w.paths.iter().enumerate() {
        let next = w
            .paths
            .get(i + 1)
            .filter(|g2| (g2.source(&w.base) - g.target(&w.base)).norm() < 1e-9)
            .cloned()
            .unwrap_or_else(|| groupoid_invert(&w.base, g));
        match functor_suite(&b.bundle, &b.cleavage, &conn.omega, g, &next) {
            Ok(rep) => {
                residuals.merge("", &rep.residuals);
                if !rep.pass || !rep.residuals.passes(ctx.tol) {
                    pass = false;
                    details.push(format!("path {i}: {}", rep.residuals));
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("path {i}: {e}"));
            }
        }
    }
    Ok(Ok(SuiteOutcome { name: "functor".into(), pass, residuals, details }))
}

fn naturality(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let (b, conn) = (w.bundle()?, w.connection()?);
    paths(ctx, "naturality")?;
    let run = || -> SuiteResult {
        let pb = extract_pseudo(&b.bundle, &b.cleavage)?;
        let (bq, cq) = quasi_decorate(&pb)?;
        let theta = theta_e(&b.bundle, &b.cleavage);
        let pulled = pullback_connection(&theta, &bq, &conn.omega);
        let src = TransportData { bundle: &bq, cleavage: &cq, omega: &pulled };
        let dst = TransportData { bundle: &b.bundle, cleavage: &b.cleavage, omega: &conn.omega };
        let mut residuals = ResidualReport::new();
        for g in &w.paths {
            residuals.merge("", &naturality_suite(&theta, &src, &dst, g, ctx.n, ctx.seed, ctx.tol)?.residuals);
        }
        Ok(SuiteOutcome::from_report("naturality", residuals, ctx.tol))
    };
    Ok(run())
}

fn pullback(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let (b, conn) = (w.bundle()?, w.connection()?);
    let run = || -> SuiteResult {
        let y = discrete_groupoid(w.base.obj_dim, Chart::default());
        let f = GroupoidMorphism::unit_inclusion(&w.base);
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
        let x = y.sample_obj(&mut rng);
        let g = random_lazy_path(&y, &x, 2, w.grid, w.plateau(), &mut rng)?;
        let data = TransportData { bundle: &b.bundle, cleavage: &b.cleavage, omega: &conn.omega };
        let rep = pullback_suite(&f, &y, &data, &g, ctx.n, ctx.seed, ctx.tol)?;
        Ok(SuiteOutcome::from_report("pullback", rep.residuals, ctx.tol))
    };
    Ok(run())
}

fn vb(ctx: &Ctx) -> Result<SuiteResult, SuiteError> {
    let w = ctx.world;
    let assoc = w.vb()?;
    let b = w.bundle()?;
    let conn = w.connection().ok();
    let run = || -> SuiteResult {
        let mut residuals = ResidualReport::new();
        let mut details = Vec::new();
        let interchange = assoc.check_interchange(ctx.n, ctx.seed)?;
        residuals.record("interchange", interchange);
        if !(interchange < INTERCHANGE_TOL) {
            details.push(format!("interchange: {interchange:.3e} >= {INTERCHANGE_TOL:.1e}"));
        }

        // the linear cleavage inherits flatness and unitality from C
        let (class, _) = classify_connection(&b.bundle, &b.cleavage, ctx.n, ctx.seed)?;
        let cv = linear_cleavage(assoc, &b.cleavage).check(ctx.n, ctx.seed)?;
        let (flat, unital) = (cv.get("flat").unwrap_or(f64::NAN), cv.get("unital").unwrap_or(f64::NAN));
        residuals.record("cleavage_flat", flat);
        residuals.record("cleavage_unital", unital);
        use twobundle::bundle2::Classification::*;
        let (want_flat, want_unital) = match class {
            Categorical => (true, true),
            Unital => (false, true),
            Quasi => (false, false),
        };
        if want_flat && !(flat < ctx.tol) {
            details.push(format!("categorical cleavage but flat residual {flat:.3e}"));
        }
        if want_unital && !(unital < ctx.tol) {
            details.push(format!("unital cleavage but unital residual {unital:.3e}"));
        }

        if let Some(conn) = conn {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x7b);
            let base = &w.base;
            for g in &w.paths {
                let tr = vb_transport(assoc, &b.cleavage, &conn.omega, g)?;
                let lazy = lazy_transport(&b.bundle, &b.cleavage, &conn.omega, g)?;
                let x = g.source(base);
                for _ in 0..ctx.n.max(1) {
                    let a = w.cm.g.random_element(&mut rng, 1.0);
                    let q = lazy.apply0(&E0Point::new(x.clone(), a.clone()))?;
                    let hol = &q.a * w.cm.g.inverse(&a);
                    residuals.record("holonomy", (&tr.m0 - (assoc.action.rho0)(&hol)).norm());
                }
                residuals.merge("intertwining_", &tr.intertwining(assoc));
            }
        }
        let checked: ResidualReport = {
            let mut r = ResidualReport::new();
            for (l, v) in residuals.entries() {
                if l.starts_with("holonomy") || l.starts_with("intertwining_") {
                    r.record(l, *v);
                }
            }
            r
        };
        let mut out = SuiteOutcome::from_report("vb", checked, ctx.tol);
        out.residuals = residuals;
        out.details.extend(details);
        out.pass = out.details.is_empty();
        Ok(out)
    };
    Ok(run())
}
