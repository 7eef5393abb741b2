//! Parallel transport on principal 2-bundles.
//!
//! Transport along a lazy path `(γ0, α1, ..., αn, γn)` composes cartesian
//! transports `T_C(γ⁻¹)` with horizontal-lift transports along the `αi`. The
//! results are [`TorsorMap`]s between fibers, compared either pointwise or in
//! the quotient by τ(H).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bundle2::{BundleMorphism, E0Point, E1Point, Principal2Bundle, PseudoPrincipalBundle, QuasiConnection};
use crate::connection::{from_phi, phi_of, StrictConnection};
use crate::crossed_module::{Arrow, ArrowTangent};
use crate::error::{Error, Result};
use crate::groupoid::{GroupoidMorphism, GroupoidPresentation};
use crate::hpath::{
    groupoid_compose, groupoid_invert, groupoid_unit, move_add_constant, move_add_identity, move_conjugate,
    move_remove_constant, move_remove_identity, thin_deform, LazyPath, SampledPath,
};
use crate::matlie::{Mat, Pt, TOL_MATCH};
use crate::report::ResidualReport;

type ObjFn = Arc<dyn Fn(&E0Point) -> Result<E0Point> + Send + Sync>;
type MorFn = Arc<dyn Fn(&E1Point) -> Result<E1Point> + Send + Sync>;

/// Number of probe points used by [`quotient_equal`].
pub const QUOTIENT_PROBES: usize = 3;

/// An equivariant functor between the fibers over two base objects.
///
/// Fiber objects are E0 points over `x`; fiber arrows are E1 points over `1_x`.
#[derive(Clone)]
pub struct TorsorMap {
    pub source_fiber: Pt,
    pub target_fiber: Pt,
    obj: ObjFn,
    mor: MorFn,
}

impl std::fmt::Debug for TorsorMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorsorMap")
            .field("source_fiber", &self.source_fiber.as_slice())
            .field("target_fiber", &self.target_fiber.as_slice())
            .finish()
    }
}

fn check_fiber(x: &Pt, expected: &Pt, what: &str) -> Result<()> {
    let d = (x - expected).norm();
    if d > TOL_MATCH {
        return Err(Error::FiberMismatch(format!("{what}: point off the fiber by {d:.3e}")));
    }
    Ok(())
}

impl TorsorMap {
    pub fn new(source_fiber: Pt, target_fiber: Pt, obj: ObjFn, mor: MorFn) -> Self {
        TorsorMap { source_fiber, target_fiber, obj, mor }
    }

    pub fn identity(x: &Pt) -> Self {
        TorsorMap {
            source_fiber: x.clone(),
            target_fiber: x.clone(),
            obj: Arc::new(|p| Ok(p.clone())),
            mor: Arc::new(|d| Ok(d.clone())),
        }
    }

    pub fn apply0(&self, p: &E0Point) -> Result<E0Point> {
        check_fiber(&p.x, &self.source_fiber, "object")?;
        (self.obj)(p)
    }

    pub fn apply1(&self, d: &E1Point) -> Result<E1Point> {
        check_fiber(&d.p.x, &self.source_fiber, "arrow")?;
        (self.mor)(d)
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &TorsorMap) -> Result<TorsorMap> {
        let gap = (&self.target_fiber - &next.source_fiber).norm();
        if gap > TOL_MATCH {
            return Err(Error::FiberMismatch(format!("composition gap {gap:.3e}")));
        }
        let (f, g) = (self.clone(), next.clone());
        let (f2, g2) = (self.clone(), next.clone());
        Ok(TorsorMap {
            source_fiber: self.source_fiber.clone(),
            target_fiber: next.target_fiber.clone(),
            obj: Arc::new(move |p| g.apply0(&f.apply0(p)?)),
            mor: Arc::new(move |d| g2.apply1(&f2.apply1(d)?)),
        })
    }

    /// Equivariance and functoriality residuals on sampled fiber data.
    pub fn check(&self, b: &Principal2Bundle, n_samples: usize, seed: u64) -> Result<ResidualReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = ResidualReport::new();
        let cm = b.cm();
        for _ in 0..n_samples.max(1) {
            let p = fiber_point(b, &self.source_fiber, &mut rng);
            let d1 = fiber_arrow(b, &p, &mut rng);
            let d2 = fiber_arrow(b, &b.target(&d1), &mut rng);
            let a = cm.random_arrow(&mut rng, 0.7);
            let fp = self.apply0(&p)?;
            let fd1 = self.apply1(&d1)?;
            let fd2 = self.apply1(&d2)?;
            rep.record("fiber", (&fp.x - &self.target_fiber).norm());
            rep.record("equivariance0", self.apply0(&p.act(&a.g))?.dist(&fp.act(&a.g)));
            rep.record("equivariance1", self.apply1(&b.act1(&d1, &a))?.dist(&b.act1(&fd1, &a)));
            rep.record("functor_source", b.source(&fd1).dist(&fp));
            rep.record("functor_target", b.target(&fd1).dist(&self.apply0(&b.target(&d1))?));
            rep.record("functor_unit", self.apply1(&b.unit(&p))?.dist(&b.unit(&fp)));
            let lhs = self.apply1(&b.compose_unchecked(&d2, &d1))?;
            rep.record("functor_compose", lhs.dist(&b.compose_unchecked(&fd2, &fd1)));
        }
        Ok(rep)
    }
}

/// A random fiber object over `x`.
pub fn fiber_point(b: &Principal2Bundle, x: &Pt, rng: &mut ChaCha8Rng) -> E0Point {
    E0Point::new(x.clone(), b.g().random_element(rng, 1.0))
}

/// A random fiber arrow out of `p`, lying over `1_x`.
pub fn fiber_arrow(b: &Principal2Bundle, p: &E0Point, rng: &mut ChaCha8Rng) -> E1Point {
    E1Point::new(b.base().unit(&p.x), p.clone(), b.cm().h.random_element(rng, 0.7))
}

/// Cartesian transport `T_C(γ)` from the fiber over `t(γ)` to the fiber over `s(γ)`:
/// `p ↦ μ_C(γ⁻¹, p)` and `ζ ↦ C(γ⁻¹, q) ∘ ζ ∘ C(γ⁻¹, p)⁻¹`.
pub fn cartesian_transport(b: &Principal2Bundle, c: &QuasiConnection, gamma: &Pt) -> TorsorMap {
    let base = b.base();
    let gi = base.inverse(gamma);
    let (b0, c0, g0) = (b.clone(), c.clone(), gi.clone());
    let (b1, c1, g1) = (b.clone(), c.clone(), gi);
    TorsorMap {
        source_fiber: base.target(gamma),
        target_fiber: base.source(gamma),
        obj: Arc::new(move |p| Ok(b0.target(&c0.eval(&g0, p)))),
        mor: Arc::new(move |z| {
            let into = c1.eval(&g1, &b1.source(z));
            let out = c1.eval(&g1, &b1.target(z));
            Ok(b1.compose_unchecked(&out, &b1.compose_unchecked(z, &b1.inverse(&into))))
        }),
    }
}

/// Components of a natural isomorphism between fiber maps.
#[derive(Clone)]
pub struct NaturalIso {
    pub component: Arc<dyn Fn(&E0Point) -> E1Point + Send + Sync>,
}

impl NaturalIso {
    pub fn at(&self, p: &E0Point) -> E1Point {
        (self.component)(p)
    }
}

/// `I_x(p) = C(1_x, p)⁻¹ : T_C(1_x)(p) -> p`.
pub fn pseudofunctor_unitor(b: &Principal2Bundle, c: &QuasiConnection, x: &Pt) -> NaturalIso {
    let (b, c) = (b.clone(), c.clone());
    let u = b.base().unit(x);
    NaturalIso { component: Arc::new(move |p| b.inverse(&c.eval(&u, p))) }
}

/// `α_{γ1,γ2}(p) = C(γ1⁻¹ ∘ γ2⁻¹, p) ∘ C(γ2⁻¹, p)⁻¹ ∘ C(γ1⁻¹, μ_C(γ2⁻¹, p))⁻¹`,
/// an arrow `T_C(γ1) T_C(γ2)(p) -> T_C(γ2 ∘ γ1)(p)`.
pub fn pseudofunctor_compositor(b: &Principal2Bundle, c: &QuasiConnection, g1: &Pt, g2: &Pt) -> Result<NaturalIso> {
    let base = b.base();
    let gap = (base.target(g1) - base.source(g2)).norm();
    if gap > TOL_MATCH {
        return Err(Error::NotComposable(gap));
    }
    let i1 = base.inverse(g1);
    let i2 = base.inverse(g2);
    let i12 = base.compose(&i1, &i2);
    let (b, c) = (b.clone(), c.clone());
    Ok(NaturalIso {
        component: Arc::new(move |p| {
            let step2 = c.eval(&i2, p);
            let step1 = c.eval(&i1, &b.target(&step2));
            let back = b.compose_unchecked(&b.inverse(&step2), &b.inverse(&step1));
            b.compose_unchecked(&c.eval(&i12, p), &back)
        }),
    })
}

/// Naturality squares of the unitor and compositor and the unit and
/// associativity coherence of `T_C` on sampled composable triples.
pub fn pseudofunctor_coherence(b: &Principal2Bundle, c: &QuasiConnection, n_samples: usize, seed: u64) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    let base = b.base();
    let t = |g: &Pt| cartesian_transport(b, c, g);
    for _ in 0..n_samples.max(1) {
        let g1 = base.sample_mor(&mut rng);
        let g2 = base.sample_from(&base.target(&g1), &mut rng);
        let g3 = base.sample_from(&base.target(&g2), &mut rng);
        let (x, y, z) = (base.source(&g1), base.target(&g1), base.target(&g2));
        let w = base.target(&g3);

        // unitor naturality at an arrow ζ: p -> q over y
        let p = fiber_point(b, &y, &mut rng);
        let zeta = fiber_arrow(b, &p, &mut rng);
        let unitor = pseudofunctor_unitor(b, c, &y);
        let ty = t(&base.unit(&y));
        let lhs = b.compose_unchecked(&unitor.at(&b.target(&zeta)), &ty.apply1(&zeta)?);
        let rhs = b.compose_unchecked(&zeta, &unitor.at(&p));
        rep.record("unitor_naturality", lhs.dist(&rhs));

        // compositor naturality at ζ over z
        let p = fiber_point(b, &z, &mut rng);
        let zeta = fiber_arrow(b, &p, &mut rng);
        let comp = pseudofunctor_compositor(b, c, &g1, &g2)?;
        let t12 = t(&g2).then(&t(&g1))?;
        let t21 = t(&base.compose(&g2, &g1));
        let lhs = b.compose_unchecked(&comp.at(&b.target(&zeta)), &t12.apply1(&zeta)?);
        let rhs = b.compose_unchecked(&t21.apply1(&zeta)?, &comp.at(&p));
        rep.record("compositor_naturality", lhs.dist(&rhs));

        // unit coherence
        let p = fiber_point(b, &y, &mut rng);
        let left = pseudofunctor_compositor(b, c, &base.unit(&x), &g1)?.at(&p);
        let ux = pseudofunctor_unitor(b, c, &x);
        rep.record("left_unit", left.dist(&ux.at(&t(&g1).apply0(&p)?)));
        let right = pseudofunctor_compositor(b, c, &g1, &base.unit(&y))?.at(&p);
        let uy = pseudofunctor_unitor(b, c, &y);
        rep.record("right_unit", right.dist(&t(&g1).apply1(&uy.at(&p))?));

        // associativity: two arrows T1 T2 T3 (p) -> T(γ3 γ2 γ1)(p)
        let p = fiber_point(b, &w, &mut rng);
        let g32 = base.compose(&g3, &g2);
        let g21 = base.compose(&g2, &g1);
        let a23 = pseudofunctor_compositor(b, c, &g2, &g3)?.at(&p);
        let a1_32 = pseudofunctor_compositor(b, c, &g1, &g32)?.at(&p);
        let path1 = b.compose_unchecked(&a1_32, &t(&g1).apply1(&a23)?);
        let p3 = t(&g3).apply0(&p)?;
        let a12 = pseudofunctor_compositor(b, c, &g1, &g2)?.at(&p3);
        let a21_3 = pseudofunctor_compositor(b, c, &g21, &g3)?.at(&p);
        let path2 = b.compose_unchecked(&a21_3, &a12);
        rep.record("associativity", path1.dist(&path2));
    }
    Ok(rep)
}

/// Positions and velocities at the samples and the interval midpoints of a
/// path: node `2i` is sample `i`, node `2i + 1` the midpoint after it.
/// Midpoint positions are cubic Hermite, midpoint velocities four-point
/// Lagrange interpolants of the stencil velocities.
fn stage_nodes(path: &SampledPath) -> (Vec<Pt>, Vec<Pt>) {
    let xs = path.samples();
    let v = path.velocities();
    let k = path.grid();
    let h = 1.0 / k as f64;
    let mut pos = Vec::with_capacity(2 * k + 1);
    let mut vel = Vec::with_capacity(2 * k + 1);
    for i in 0..k {
        pos.push(xs[i].clone());
        vel.push(v[i].clone());
        pos.push((&xs[i] + &xs[i + 1]) * 0.5 + (&v[i] - &v[i + 1]) * (h / 8.0));
        let mid = if i == 0 {
            &v[0] * 5.0 + &v[1] * 15.0 - &v[2] * 5.0 + &v[3]
        } else if i == k - 1 {
            &v[k - 3] - &v[k - 2] * 5.0 + &v[k - 1] * 15.0 + &v[k] * 5.0
        } else {
            -&v[i - 1] + &v[i] * 9.0 + &v[i + 1] * 9.0 - &v[i + 2]
        };
        vel.push(mid / 16.0);
    }
    pos.push(xs[k].clone());
    vel.push(v[k].clone());
    (pos, vel)
}

/// Classic RK4 over `k` nodes with step `2/k`, using nodes `2j`, `2j+1`,
/// `2j+2` as the stages. Returns the state at every even node.
fn rk4_on_grid<S, D>(
    s0: S,
    k: usize,
    f: impl Fn(usize, &S) -> Result<D>,
    axpy: impl Fn(&S, &[(&D, f64)]) -> S,
    finite: impl Fn(&S) -> bool,
) -> Result<Vec<S>> {
    if k % 2 != 0 {
        return Err(Error::Invalid(format!("grid K = {k} must be even")));
    }
    let h = 2.0 / k as f64;
    let mut out = Vec::with_capacity(k / 2 + 1);
    out.push(s0);
    for j in 0..k / 2 {
        let s = &out[j];
        let k1 = f(2 * j, s)?;
        let k2 = f(2 * j + 1, &axpy(s, &[(&k1, h / 2.0)]))?;
        let k3 = f(2 * j + 1, &axpy(s, &[(&k2, h / 2.0)]))?;
        let k4 = f(2 * j + 2, &axpy(s, &[(&k3, h)]))?;
        let next = axpy(s, &[(&k1, h / 6.0), (&k2, h / 3.0), (&k3, h / 3.0), (&k4, h / 6.0)]);
        if !finite(&next) {
            return Err(Error::NonFiniteState(j + 1));
        }
        out.push(next);
    }
    Ok(out)
}

fn check_chart(in_chart: impl Fn(&Pt) -> bool, path: &SampledPath) -> Result<()> {
    match path.samples().iter().position(|x| !in_chart(x)) {
        Some(i) => Err(Error::OutOfChart(format!("path sample {i}"))),
        None => Ok(()),
    }
}

/// The horizontal lift of `alpha` through `p0`, at every sample.
/// The last point is `Tr_ω^α(p0)`, with its group part projected onto G.
pub fn horizontal_lift(omega: &StrictConnection, alpha: &SampledPath, p0: &E0Point) -> Result<Vec<E0Point>> {
    let b = omega.bundle();
    check_fiber(&p0.x, alpha.start(), "lift start")?;
    check_chart(|x| b.base().in_obj_chart(x), alpha)?;
    let (xs, vel) = stage_nodes(alpha);
    let states = rk4_on_grid(
        p0.a.clone(),
        2 * alpha.grid(),
        |i, a: &Mat| Ok(omega.lift0_velocity(&E0Point::new(xs[i].clone(), a.clone()), &vel[i])),
        |a, terms| terms.iter().fold(a.clone(), |acc, (d, c)| acc + *d * *c),
        |a| a.iter().all(|v| v.is_finite()),
    )?;
    let n = states.len();
    Ok(states
        .into_iter()
        .enumerate()
        .map(|(j, a)| {
            let a = if j + 1 == n && a != p0.a { b.g().project(&a) } else { a };
            E0Point::new(xs[2 * j].clone(), a)
        })
        .collect())
}

/// The horizontal lift in E1 of a path `zeta` in X1 through `d0`; returns the endpoint.
pub fn horizontal_lift1(omega: &StrictConnection, zeta: &SampledPath, d0: &E1Point) -> Result<E1Point> {
    let b = omega.bundle();
    let cm = b.cm();
    let gap = (&d0.gamma - zeta.start()).norm();
    if gap > TOL_MATCH {
        return Err(Error::FiberMismatch(format!("E1 lift start off by {gap:.3e}")));
    }
    check_chart(|g| b.base().in_mor_chart(g), zeta)?;
    let (gs, vel) = stage_nodes(zeta);
    let states = rk4_on_grid(
        phi_of(cm, d0),
        2 * zeta.grid(),
        |i, phi: &Arrow| Ok(omega.lift1_velocity(&gs[i], phi, &vel[i])),
        |phi, terms: &[(&ArrowTangent, f64)]| {
            let mut out = phi.clone();
            for (d, c) in terms {
                out.h += &d.dh * *c;
                out.g += &d.dg * *c;
            }
            out
        },
        |phi| phi.h.iter().chain(phi.g.iter()).all(|v| v.is_finite()),
    )?;
    let first = &states[0];
    let last = states.last().expect("at least one state");
    let phi = if last == first { last.clone() } else { Arrow::new(cm.h.project(&last.h), cm.g.project(&last.g)) };
    Ok(from_phi(b, zeta.end(), &phi))
}

/// `T_ω^α`: objects by the E0 lift along `α`, arrows by the E1 lift along `u ∘ α`.
pub fn path_transport(omega: &StrictConnection, alpha: &SampledPath) -> Result<TorsorMap> {
    let b = omega.bundle();
    check_chart(|x| b.base().in_obj_chart(x), alpha)?;
    let base = b.base().clone();
    let units = alpha.map(|x| base.unit(x));
    let (o0, a0) = (omega.clone(), alpha.clone());
    let o1 = omega.clone();
    Ok(TorsorMap {
        source_fiber: alpha.start().clone(),
        target_fiber: alpha.end().clone(),
        obj: Arc::new(move |p| Ok(horizontal_lift(&o0, &a0, p)?.pop().expect("non-empty lift"))),
        mor: Arc::new(move |d| horizontal_lift1(&o1, &units, d)),
    })
}

/// Residuals of the source, target and unit identities for E1 lifts along
/// `zeta` through `d0` and the unit lift along `s ∘ zeta`.
pub fn lift_identities(omega: &StrictConnection, zeta: &SampledPath, d0: &E1Point) -> Result<ResidualReport> {
    let b = omega.bundle();
    let base = b.base();
    let mut rep = ResidualReport::new();
    let end = horizontal_lift1(omega, zeta, d0)?;
    let s_path = zeta.map(|g| base.source(g));
    let t_path = zeta.map(|g| base.target(g));
    let s_lift = horizontal_lift(omega, &s_path, &b.source(d0))?.pop().expect("non-empty lift");
    let t_lift = horizontal_lift(omega, &t_path, &b.target(d0))?.pop().expect("non-empty lift");
    rep.record("source", s_lift.dist(&b.source(&end)));
    rep.record("target", t_lift.dist(&b.target(&end)));
    let p = b.source(d0);
    let u_path = s_path.map(|x| base.unit(x));
    let u_lift = horizontal_lift1(omega, &u_path, &b.unit(&p))?;
    rep.record("unit", u_lift.dist(&b.unit(&s_lift)));
    Ok(rep)
}

/// `T_C(γn⁻¹) ∘ T_ω^{αn} ∘ ... ∘ T_ω^{α1} ∘ T_C(γ0⁻¹)`.
pub fn lazy_transport(b: &Principal2Bundle, c: &QuasiConnection, omega: &StrictConnection, g: &LazyPath) -> Result<TorsorMap> {
    let base = b.base();
    let stage = |i: usize, acc: TorsorMap, next: TorsorMap| {
        acc.then(&next).map_err(|e| match e {
            Error::FiberMismatch(m) => Error::FiberMismatch(format!("stage {i}: {m}")),
            other => other,
        })
    };
    let mut acc = cartesian_transport(b, c, &base.inverse(&g.arrows[0]));
    for (i, alpha) in g.paths.iter().enumerate() {
        acc = stage(2 * i + 1, acc, path_transport(omega, alpha)?)?;
        acc = stage(2 * i + 2, acc, cartesian_transport(b, c, &base.inverse(&g.arrows[i + 1])))?;
    }
    Ok(acc)
}

/// The divider `g` with `F(z) g = F′(z)` at one probe.
#[derive(Clone, Debug)]
pub struct QuotientClassWitness {
    pub divider: Mat,
    pub tau_distance: f64,
}

/// Outcome of a quotient comparison over all probes.
#[derive(Clone, Debug)]
pub struct QuotientComparison {
    pub equal: bool,
    pub witnesses: Vec<QuotientClassWitness>,
}

impl QuotientComparison {
    /// Largest distance of a divider to τ(H).
    pub fn max_distance(&self) -> f64 {
        self.witnesses.iter().map(|w| w.tau_distance).fold(0.0, f64::max)
    }
}

/// Compares `F` and `F′` in the quotient by τ(H) at three probes of the
/// source fiber. The probes must agree on membership.
pub fn quotient_equal(b: &Principal2Bundle, f: &TorsorMap, f2: &TorsorMap) -> Result<QuotientComparison> {
    let gap = (&f.source_fiber - &f2.source_fiber).norm() + (&f.target_fiber - &f2.target_fiber).norm();
    if gap > TOL_MATCH {
        return Err(Error::FiberMismatch(format!("maps between different fibers ({gap:.3e})")));
    }
    let cm = b.cm();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    let mut witnesses = Vec::with_capacity(QUOTIENT_PROBES);
    for i in 0..QUOTIENT_PROBES {
        let z = if i == 0 { E0Point::new(f.source_fiber.clone(), b.g().identity()) } else { fiber_point(b, &f.source_fiber, &mut rng) };
        let divider = b.divide0(&f.apply0(&z)?, &f2.apply0(&z)?)?;
        let tau_distance = cm.tau_h_distance(&divider);
        witnesses.push(QuotientClassWitness { divider, tau_distance });
    }
    let tol = cm.membership_tol();
    let votes: Vec<bool> = witnesses.iter().map(|w| w.tau_distance < tol).collect();
    if votes.iter().any(|v| *v != votes[0]) {
        return Err(Error::ProbeDisagreement);
    }
    Ok(QuotientComparison { equal: votes[0], witnesses })
}

/// Largest pointwise distance of two maps' object parts at the quotient probes.
pub fn pointwise_distance(b: &Principal2Bundle, f: &TorsorMap, f2: &TorsorMap) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37);
    let mut worst = 0.0f64;
    for i in 0..QUOTIENT_PROBES {
        let z = if i == 0 { E0Point::new(f.source_fiber.clone(), b.g().identity()) } else { fiber_point(b, &f.source_fiber, &mut rng) };
        worst = worst.max(f.apply0(&z)?.dist(&f2.apply0(&z)?));
    }
    Ok(worst)
}

/// A residual report with a verdict.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub residuals: ResidualReport,
    pub pass: bool,
}

/// A thin-homotopy transformation of a lazy path.
#[derive(Clone)]
pub enum Transform {
    RemoveConstant(usize),
    AddConstant { index: usize, grid: usize, plateau: usize },
    RemoveIdentity(usize),
    AddIdentity { path: usize, sample: usize },
    Conjugate { path: usize, zeta: SampledPath },
    ThinDeform(Vec<SampledPath>),
    /// Reparametrizes path `path` (1-based) by `φ`.
    Reparametrize { path: usize, phi: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl Transform {
    pub fn apply(&self, gp: &GroupoidPresentation, g: &LazyPath) -> Result<LazyPath> {
        match self {
            Transform::RemoveConstant(i) => move_remove_constant(gp, g, *i),
            Transform::AddConstant { index, grid, plateau } => move_add_constant(gp, g, *index, *grid, *plateau),
            Transform::RemoveIdentity(i) => move_remove_identity(gp, g, *i),
            Transform::AddIdentity { path, sample } => move_add_identity(gp, g, *path, *sample),
            Transform::Conjugate { path, zeta } => move_conjugate(gp, g, *path, zeta),
            Transform::ThinDeform(zetas) => thin_deform(gp, g, zetas),
            Transform::Reparametrize { path, phi } => {
                if *path == 0 || *path > g.paths.len() {
                    return Err(Error::Invalid(format!("no path {path}")));
                }
                let mut out = g.clone();
                out.paths[path - 1] = g.paths[path - 1].reparametrize(|t| phi(t))?;
                Ok(out)
            }
        }
    }
}

/// Transports along `Γ` and its transform and compares the classes.
/// Residuals: `tau_distance` of the dividers and the informational `pointwise`.
pub fn invariance_suite(
    b: &Principal2Bundle,
    c: &QuasiConnection,
    omega: &StrictConnection,
    g: &LazyPath,
    transform: &Transform,
) -> Result<SuiteReport> {
    let g2 = transform.apply(b.base(), g)?;
    let t1 = lazy_transport(b, c, omega, g)?;
    let t2 = lazy_transport(b, c, omega, &g2)?;
    let q = quotient_equal(b, &t1, &t2)?;
    let mut residuals = ResidualReport::new();
    residuals.record("tau_distance", q.max_distance());
    residuals.record("pointwise", pointwise_distance(b, &t1, &t2)?);
    Ok(SuiteReport { residuals, pass: q.equal })
}

/// Composition, unit and inverse laws of lazy transport at the quotient level.
pub fn functor_suite(
    b: &Principal2Bundle,
    c: &QuasiConnection,
    omega: &StrictConnection,
    g: &LazyPath,
    g2: &LazyPath,
) -> Result<SuiteReport> {
    let base = b.base();
    let t1 = lazy_transport(b, c, omega, g)?;
    let t2 = lazy_transport(b, c, omega, g2)?;
    let t21 = lazy_transport(b, c, omega, &groupoid_compose(base, g2, g)?)?;
    let composition = quotient_equal(b, &t21, &t1.then(&t2)?)?;

    let x = g.source(base);
    let grid = g.paths.first().map(|p| p.grid()).unwrap_or(crate::hpath::DEFAULT_GRID);
    let unit_path = groupoid_unit(base, &x, grid, crate::hpath::DEFAULT_PLATEAU);
    let unit = quotient_equal(b, &lazy_transport(b, c, omega, &unit_path)?, &TorsorMap::identity(&x))?;

    let inv = lazy_transport(b, c, omega, &groupoid_invert(base, g))?;
    let inverse = quotient_equal(b, &t1.then(&inv)?, &TorsorMap::identity(&x))?;

    let mut residuals = ResidualReport::new();
    residuals.record("composition", composition.max_distance());
    residuals.record("unit", unit.max_distance());
    residuals.record("inverse", inverse.max_distance());
    Ok(SuiteReport { residuals, pass: composition.equal && unit.equal && inverse.equal })
}

fn map_distance(
    lhs: &TorsorMap,
    rhs: &TorsorMap,
    pre: &BundleMorphism,
    post: &BundleMorphism,
    src: &Principal2Bundle,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    // compares post ∘ lhs with rhs ∘ pre on one object and one arrow
    let p = fiber_point(src, &lhs.source_fiber, rng);
    let d = fiber_arrow(src, &p, rng);
    let obj = (post.f0)(&lhs.apply0(&p)?).dist(&rhs.apply0(&(pre.f0)(&p))?);
    let mor = (post.f1)(&lhs.apply1(&d)?).dist(&rhs.apply1(&(pre.f1)(&d))?);
    Ok((obj, mor))
}

/// One side of a naturality comparison: a bundle with its quasi connection and
/// strict connection.
#[derive(Clone)]
pub struct TransportData<'a> {
    pub bundle: &'a Principal2Bundle,
    pub cleavage: &'a QuasiConnection,
    pub omega: &'a StrictConnection,
}

/// Squares `F ∘ T_src = T_dst ∘ F` for a bundle morphism `F: src -> dst`, for
/// the cartesian transport of each arrow, the path transport of each path and
/// the full lazy transport of `Γ`.
pub fn naturality_suite(
    f: &BundleMorphism,
    src: &TransportData<'_>,
    dst: &TransportData<'_>,
    g: &LazyPath,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = ResidualReport::new();
    let base = src.bundle.base();
    for _ in 0..n_samples.max(1) {
        for gamma in &g.arrows {
            let gi = base.inverse(gamma);
            let l = cartesian_transport(src.bundle, src.cleavage, &gi);
            let r = cartesian_transport(dst.bundle, dst.cleavage, &gi);
            let (o, m) = map_distance(&l, &r, f, f, src.bundle, &mut rng)?;
            residuals.record("cartesian_obj", o);
            residuals.record("cartesian_mor", m);
        }
        for alpha in &g.paths {
            let l = path_transport(src.omega, alpha)?;
            let r = path_transport(dst.omega, alpha)?;
            let (o, m) = map_distance(&l, &r, f, f, src.bundle, &mut rng)?;
            residuals.record("classical_obj", o);
            residuals.record("classical_mor", m);
        }
        let l = lazy_transport(src.bundle, src.cleavage, src.omega, g)?;
        let r = lazy_transport(dst.bundle, dst.cleavage, dst.omega, g)?;
        let (o, m) = map_distance(&l, &r, f, f, src.bundle, &mut rng)?;
        residuals.record("lazy_obj", o);
        residuals.record("lazy_mor", m);
    }
    let pass = residuals.passes(tol);
    Ok(SuiteReport { residuals, pass })
}

/// The pullback of pseudo data along a base functor `f: Y -> X`.
pub fn pullback_pseudo(f: &GroupoidMorphism, y: &GroupoidPresentation, pb: &PseudoPrincipalBundle) -> PseudoPrincipalBundle {
    let under = &pb.underlying;
    let (c, fm) = (under.c.clone(), f.mor.clone());
    let cocycle = Arc::new(move |g: &Pt| c(&fm(g)));
    let (hu, fo) = (pb.hu.clone(), f.obj.clone());
    let hm = pb.hm.clone();
    let fm = f.mor.clone();
    PseudoPrincipalBundle::new(
        crate::bundle2::PrincipalGBundleOverGroupoid::new(y.clone(), under.g.clone(), cocycle),
        pb.cm.clone(),
        Arc::new(move |p: &E0Point| hu(&E0Point::new(fo(&p.x), p.a.clone()))),
        Arc::new(move |g2: &Pt, g1: &Pt| hm(&fm(g2), &fm(g1))),
    )
}

/// The canonical projection `pr2` of the pullback bundle onto the original.
pub fn pullback_projection(f: &GroupoidMorphism) -> BundleMorphism {
    let (fo, fo1, fm) = (f.obj.clone(), f.obj.clone(), f.mor.clone());
    BundleMorphism {
        f0: Arc::new(move |p| E0Point::new(fo(&p.x), p.a.clone())),
        f1: Arc::new(move |d| E1Point::new(fm(&d.gamma), E0Point::new(fo1(&d.p.x), d.p.a.clone()), d.k.clone())),
    }
}

/// The image `f(Γ)` of a lazy path under a base functor.
pub fn push_lazy_path(f: &GroupoidMorphism, g: &LazyPath) -> LazyPath {
    LazyPath {
        arrows: g.arrows.iter().map(|a| (f.mor)(a)).collect(),
        paths: g.paths.iter().map(|p| p.map(|x| (f.obj)(x))).collect(),
    }
}

/// Pulls `(b, C, ω)` back along `f: Y -> X` and compares transport along a
/// lazy path `Γ′` in `Y` with transport along `f(Γ′)` through `pr2`:
/// `obj` and `mor` components.
pub fn pullback_suite(
    f: &GroupoidMorphism,
    y: &GroupoidPresentation,
    data: &TransportData<'_>,
    g: &LazyPath,
    n_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SuiteReport> {
    let pb = pullback_pseudo(f, y, data.bundle.pseudo());
    let (by, _) = crate::bundle2::quasi_decorate(&pb)?;
    let pr2 = pullback_projection(f);
    let (c, fo, fm) = (data.cleavage.clone(), f.obj.clone(), f.mor.clone());
    let cy = QuasiConnection::new(
        Arc::new(move |gamma: &Pt, p: &E0Point| {
            let d = c.eval(&fm(gamma), &E0Point::new(fo(&p.x), p.a.clone()));
            E1Point::new(gamma.clone(), p.clone(), d.k)
        }),
        data.cleavage.classification,
    );
    let oy = crate::connection::pullback_connection(&pr2, &by, data.omega);
    let g = crate::hpath::make_lazy_path(y, g.arrows.clone(), g.paths.clone())?;
    let lhs = lazy_transport(&by, &cy, &oy, &g)?;
    let rhs = lazy_transport(data.bundle, data.cleavage, data.omega, &push_lazy_path(f, &g))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let (o, m) = map_distance(&lhs, &rhs, &pr2, &pr2, &by, &mut rng)?;
        residuals.record("obj", o);
        residuals.record("mor", m);
    }
    let pass = residuals.passes(tol);
    Ok(SuiteReport { residuals, pass })
}

/// Endpoint group parts over a uniform parameter grid with their divided differences.
#[derive(Clone, Debug)]
pub struct SmoothnessReport {
    pub params: Vec<f64>,
    pub values: Vec<Mat>,
    pub first: Vec<Mat>,
    pub second: Vec<Mat>,
}

impl SmoothnessReport {
    pub fn max_first(&self) -> f64 {
        self.first.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn max_second(&self) -> f64 {
        self.second.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn residuals(&self) -> ResidualReport {
        let mut r = ResidualReport::new();
        r.record("first_divided", self.max_first());
        r.record("second_divided", self.max_second());
        r
    }
}

/// Evaluates `u ↦ T_{family(u)}(probe)` on a uniform grid `params` and forms
/// first and second divided differences of the group part.
pub fn smoothness_probe(
    b: &Principal2Bundle,
    c: &QuasiConnection,
    omega: &StrictConnection,
    family: &dyn Fn(f64) -> Result<LazyPath>,
    params: &[f64],
    probe: &E0Point,
) -> Result<SmoothnessReport> {
    if params.len() < 3 {
        return Err(Error::Invalid("need at least three parameter values".into()));
    }
    let h = params[1] - params[0];
    let mut values = Vec::with_capacity(params.len());
    for &u in params {
        let g = family(u)?;
        let x = g.source(b.base());
        let gap = (&x - &probe.x).norm();
        if gap > TOL_MATCH {
            return Err(Error::FiberMismatch(format!("family member at u = {u} starts off the probe fiber")));
        }
        values.push(lazy_transport(b, c, omega, &g)?.apply0(probe)?.a);
    }
    let first: Vec<Mat> = values.windows(2).map(|w| (&w[1] - &w[0]) / h).collect();
    let second: Vec<Mat> = values.windows(3).map(|w| (&w[2] - &w[1] * 2.0 + &w[0]) / (h * h)).collect();
    Ok(SmoothnessReport { params: params.to_vec(), values, first, second })
}
