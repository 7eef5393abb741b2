//! Strict connections on principal 2-bundles in a global trivialization.
//!
//! A connection is stored as a base potential `A0(x, v)` with values in L(G);
//! the forms ω0 on E0 and ω1 on E1 are derived from it. On E1 the
//! trivialization `δ = σ(γ) φ` with `σ(γ) = (γ, (s γ, e), e)` is used, and the
//! H-part of the base potential on X1 solves `dτ(Y) = D` for the defect
//! `D = Ad_{c⁻¹} A0(t γ, t_* γ̇) + c⁻¹ ċ - A0(s γ, s_* γ̇)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle2::{
    decorate, BundleMorphism, E0Point, E1Point, PrincipalGBundleOverGroupoid, Principal2Bundle, QuasiConnection,
};
use crate::crossed_module::{Alg2, Arrow, ArrowTangent, CrossedModule};
use crate::error::{Error, Result};
use crate::matlie::{Mat, Pt};
use crate::report::ResidualReport;

/// Base potential `A0(x, v)`, linear in `v`.
pub type PotentialFn = Arc<dyn Fn(&Pt, &Pt) -> Mat + Send + Sync>;

/// Finite-difference step for pushforwards, relative to the direction norm.
pub const FD_STEP: f64 = 1e-5;
/// Threshold for the hypothesis `s*ω = t*ω` of the decorated connection.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

/// A tangent vector to E0 in coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct E0Tangent {
    pub dx: Pt,
    pub da: Mat,
}

impl E0Tangent {
    pub fn norm(&self) -> f64 {
        (self.dx.norm_squared() + self.da.norm_squared()).sqrt()
    }

    pub fn scale(&self, s: f64) -> E0Tangent {
        E0Tangent { dx: &self.dx * s, da: &self.da * s }
    }
}

/// A tangent vector to E1 in coordinates `(γ, x, a, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct E1Tangent {
    pub dgamma: Pt,
    pub dx: Pt,
    pub da: Mat,
    pub dk: Mat,
}

impl E1Tangent {
    pub fn norm(&self) -> f64 {
        (self.dgamma.norm_squared() + self.dx.norm_squared() + self.da.norm_squared() + self.dk.norm_squared()).sqrt()
    }

    pub fn scale(&self, s: f64) -> E1Tangent {
        E1Tangent { dgamma: &self.dgamma * s, dx: &self.dx * s, da: &self.da * s, dk: &self.dk * s }
    }
}

fn shift0(p: &E0Point, v: &E0Tangent, s: f64) -> E0Point {
    E0Point::new(&p.x + &v.dx * s, &p.a + &v.da * s)
}

fn shift1(d: &E1Point, v: &E1Tangent, s: f64) -> E1Point {
    E1Point::new(&d.gamma + &v.dgamma * s, shift0(&d.p, &E0Tangent { dx: v.dx.clone(), da: v.da.clone() }, s), &d.k + &v.dk * s)
}

fn diff0(a: &E0Point, b: &E0Point, inv: f64) -> E0Tangent {
    E0Tangent { dx: (&a.x - &b.x) * inv, da: (&a.a - &b.a) * inv }
}

fn diff1(a: &E1Point, b: &E1Point, inv: f64) -> E1Tangent {
    E1Tangent {
        dgamma: (&a.gamma - &b.gamma) * inv,
        dx: (&a.p.x - &b.p.x) * inv,
        da: (&a.p.a - &b.p.a) * inv,
        dk: (&a.k - &b.k) * inv,
    }
}

/// Central difference along `t ↦ f(t)` at 0 with step `h`.
fn central<T, U>(f: impl Fn(f64) -> T, h: f64, diff: impl Fn(&T, &T, f64) -> U) -> U {
    let plus = f(h);
    let minus = f(-h);
    diff(&plus, &minus, 1.0 / (2.0 * h))
}

fn step_for(norm: f64) -> Option<f64> {
    (norm > 0.0).then(|| FD_STEP / norm)
}

/// Pushforward of a tangent of E0 along `f: E0 -> E0`.
pub fn push00(f: &dyn Fn(&E0Point) -> E0Point, p: &E0Point, v: &E0Tangent) -> E0Tangent {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&shift0(p, v, s)), h, diff0),
        None => diff0(&f(p), &f(p), 0.0),
    }
}

/// Pushforward of a tangent of E1 along `f: E1 -> E1`.
pub fn push11(f: &dyn Fn(&E1Point) -> E1Point, d: &E1Point, v: &E1Tangent) -> E1Tangent {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&shift1(d, v, s)), h, diff1),
        None => diff1(&f(d), &f(d), 0.0),
    }
}

/// Pushforward of a tangent of E1 along `f: E1 -> E0`.
pub fn push10(f: &dyn Fn(&E1Point) -> E0Point, d: &E1Point, v: &E1Tangent) -> E0Tangent {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&shift1(d, v, s)), h, diff0),
        None => diff0(&f(d), &f(d), 0.0),
    }
}

/// Pushforward of a tangent of E0 along `f: E0 -> E1`.
pub fn push01(f: &dyn Fn(&E0Point) -> E1Point, p: &E0Point, v: &E0Tangent) -> E1Tangent {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&shift0(p, v, s)), h, diff1),
        None => diff1(&f(p), &f(p), 0.0),
    }
}

/// Directional derivative of a point-valued map on a chart.
pub fn push_pt(f: &dyn Fn(&Pt) -> Pt, at: &Pt, v: &Pt) -> Pt {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&(at + v * s)), h, |a, b, inv| (a - b) * inv),
        None => f(at) * 0.0,
    }
}

/// Directional derivative of a matrix-valued map on a chart.
pub fn push_mat(f: &dyn Fn(&Pt) -> Mat, at: &Pt, v: &Pt) -> Mat {
    match step_for(v.norm()) {
        Some(h) => central(|s| f(&(at + v * s)), h, |a, b, inv| (a - b) * inv),
        None => f(at) * 0.0,
    }
}

#[derive(Clone)]
enum Kind {
    /// ω0 = Ad_{a⁻¹} A0 + a⁻¹ da; ω1 through the semidirect trivialization.
    Trivial { a0: PotentialFn },
    /// ω1(γ, p, k) = Ad_{(k, e)}(s*ω0) - dk k⁻¹.
    Decorated { a0: PotentialFn },
    Pullback { f: BundleMorphism, target: Box<StrictConnection> },
    Scaled { factor: f64, inner: Box<StrictConnection> },
}

/// A strict connection `(ω1, ω0)` on a principal 2-bundle.
#[derive(Clone)]
pub struct StrictConnection {
    bundle: Principal2Bundle,
    kind: Kind,
}

impl fmt::Debug for StrictConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Trivial { .. } => "trivial",
            Kind::Decorated { .. } => "decorated",
            Kind::Pullback { .. } => "pullback",
            Kind::Scaled { .. } => "scaled",
        };
        f.debug_struct("StrictConnection").field("kind", &kind).field("bundle", &self.bundle).finish()
    }
}

/// `σ(γ) = (γ, (s γ, e), e)`.
pub fn sigma(b: &Principal2Bundle, gamma: &Pt) -> E1Point {
    E1Point::new(gamma.clone(), E0Point::new(b.base().source(gamma), b.g().identity()), b.cm().h.identity())
}

/// The arrow `φ` with `δ = σ(γ) φ`, namely `(α_a(k⁻¹), a)`.
pub fn phi_of(cm: &CrossedModule, d: &E1Point) -> Arrow {
    Arrow::new(cm.alpha(&d.p.a, &cm.h.inverse(&d.k)), d.p.a.clone())
}

/// The inverse of [`phi_of`]: `σ(γ) φ`.
pub fn from_phi(b: &Principal2Bundle, gamma: &Pt, phi: &Arrow) -> E1Point {
    b.act1(&sigma(b, gamma), phi)
}

fn ad(g: &Mat, x: &Mat, g_inv: &Mat) -> Mat {
    g * x * g_inv
}

fn check_potential(b: &Principal2Bundle, a0: &PotentialFn) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..32 {
        let x = b.base().sample_obj(&mut rng);
        let v = Pt::from_iterator(x.len(), (0..x.len()).map(|_| rng.random_range(-1.0..1.0)));
        worst = worst.max(b.g().span_residual(&a0(&x, &v)));
    }
    if worst > 1e-9 {
        return Err(Error::SpanViolation(worst));
    }
    Ok(())
}

/// The connection induced by a base potential on a globally trivialized bundle.
pub fn trivial_connection(b: &Principal2Bundle, a0: PotentialFn) -> Result<StrictConnection> {
    check_potential(b, &a0)?;
    Ok(StrictConnection { bundle: b.clone(), kind: Kind::Trivial { a0 } })
}

/// The decorated bundle of `pg` with the connection `(ω^dec, ω)`, after checking
/// the hypothesis `s*ω = t*ω` on samples.
pub fn decorated_connection(
    pg: &PrincipalGBundleOverGroupoid,
    cm: Arc<CrossedModule>,
    a0: PotentialFn,
) -> Result<(Principal2Bundle, QuasiConnection, StrictConnection)> {
    let (b, c) = decorate(pg, cm)?;
    check_potential(&b, &a0)?;
    let probe = StrictConnection { bundle: b.clone(), kind: Kind::Trivial { a0: a0.clone() } };
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut worst = 0.0f64;
    for _ in 0..64 {
        let d = b.sample_e1(&mut rng);
        let v = random_vec(&mut rng, b.base().mor_dim);
        worst = worst.max(probe.defect(&d.gamma, &v).norm());
    }
    if !(worst < HYPOTHESIS_TOL) {
        return Err(Error::HypothesisFailure(worst));
    }
    Ok((b.clone(), c, StrictConnection { bundle: b, kind: Kind::Decorated { a0 } }))
}

/// The pullback `F*ω` to the source bundle `b` of a bundle morphism `F`.
pub fn pullback_connection(f: &BundleMorphism, b: &Principal2Bundle, omega: &StrictConnection) -> StrictConnection {
    StrictConnection { bundle: b.clone(), kind: Kind::Pullback { f: f.clone(), target: Box::new(omega.clone()) } }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Pt {
    Pt::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)))
}

impl StrictConnection {
    pub fn bundle(&self) -> &Principal2Bundle {
        &self.bundle
    }

    /// `ω0` scaled by `factor` and `ω1` unchanged; not a connection unless factor is 1.
    pub fn scaled(&self, factor: f64) -> StrictConnection {
        StrictConnection { bundle: self.bundle.clone(), kind: Kind::Scaled { factor, inner: Box::new(self.clone()) } }
    }

    /// The base potential, if this connection is given by one.
    pub fn potential(&self) -> Option<&PotentialFn> {
        match &self.kind {
            Kind::Trivial { a0 } | Kind::Decorated { a0 } => Some(a0),
            _ => None,
        }
    }

    /// The defect `D(γ, γ̇)` of the base potential along a morphism tangent.
    pub fn defect(&self, gamma: &Pt, dgamma: &Pt) -> Mat {
        let a0 = self.potential().expect("defect needs a base potential");
        let b = &self.bundle;
        let base = b.base();
        let c = b.cocycle(gamma);
        let c_inv = b.g().inverse(&c);
        let s_dot = push_pt(&|g: &Pt| base.source(g), gamma, dgamma);
        let t_dot = push_pt(&|g: &Pt| base.target(g), gamma, dgamma);
        let c_dot = push_mat(&|g: &Pt| b.cocycle(g), gamma, dgamma);
        ad(&c_inv, &a0(&base.target(gamma), &t_dot), &c) + &c_inv * c_dot - a0(&base.source(gamma), &s_dot)
    }

    fn a1(&self, a0: &PotentialFn, gamma: &Pt, dgamma: &Pt, dx: &Pt) -> Alg2 {
        let (y, _) = self.bundle.cm().solve_d_tau(&self.defect(gamma, dgamma));
        Alg2::new(y, a0(&self.bundle.base().source(gamma), dx))
    }

    /// `ω0` at `p` on `v`.
    pub fn omega0(&self, p: &E0Point, v: &E0Tangent) -> Mat {
        match &self.kind {
            Kind::Trivial { a0 } | Kind::Decorated { a0 } => {
                let a_inv = self.bundle.g().inverse(&p.a);
                ad(&a_inv, &a0(&p.x, &v.dx), &p.a) + &a_inv * &v.da
            }
            Kind::Pullback { f, target } => {
                let q = (f.f0)(p);
                target.omega0(&q, &push00(&*f.f0, p, v))
            }
            Kind::Scaled { factor, inner } => inner.omega0(p, v) * *factor,
        }
    }

    /// `ω1` at `δ` on `v`.
    pub fn omega1(&self, d: &E1Point, v: &E1Tangent) -> Alg2 {
        let cm = self.bundle.cm();
        match &self.kind {
            Kind::Trivial { a0 } => {
                let phi = phi_of(cm, d);
                let k_inv = cm.h.inverse(&d.k);
                let dk_inv = -(&k_inv * &v.dk * &k_inv);
                let dphi = ArrowTangent { dh: cm.alpha_tangent(&d.p.a, &v.da, &k_inv, &dk_inv), dg: v.da.clone() };
                let a1 = self.a1(a0, &d.gamma, &v.dgamma, &v.dx);
                cm.ad_inv(&phi, &a1).add(&cm.left_mc(&phi, &dphi))
            }
            Kind::Decorated { a0: _ } => {
                let w = self.omega0(&d.p, &E0Tangent { dx: v.dx.clone(), da: v.da.clone() });
                let k_inv = cm.h.inverse(&d.k);
                let conj = cm.ad_inv(&Arrow::new(k_inv.clone(), cm.g.identity()), &Alg2::new(cm.h.zero_algebra(), w));
                conj.add(&Alg2::new(-(&v.dk * &k_inv), cm.g.zero_algebra()))
            }
            Kind::Pullback { f, target } => {
                let e = (f.f1)(d);
                target.omega1(&e, &push11(&*f.f1, d, v))
            }
            Kind::Scaled { inner, .. } => inner.omega1(d, v),
        }
    }

    /// Velocity `ȧ` of the horizontal lift through `p` over a base velocity `dx`.
    pub fn lift0_velocity(&self, p: &E0Point, dx: &Pt) -> Mat {
        let w = self.omega0(p, &E0Tangent { dx: dx.clone(), da: self.bundle.g().zero_algebra() });
        -(&p.a * w)
    }

    /// Velocity of `φ` for the horizontal lift of `δ = σ(γ) φ` over a morphism
    /// velocity `dgamma`.
    pub fn lift1_velocity(&self, gamma: &Pt, phi: &Arrow, dgamma: &Pt) -> ArrowTangent {
        let b = &self.bundle;
        let cm = b.cm();
        let d = from_phi(b, gamma, phi);
        let dx = push_pt(&|g: &Pt| b.base().source(g), gamma, dgamma);
        let v = E1Tangent { dgamma: dgamma.clone(), dx, da: cm.g.zero_algebra(), dk: cm.h.zero_algebra() };
        let w = self.omega1(&d, &v);
        cm.left_translate(phi, &w.scale(-1.0))
    }
}

/// Random tangent to E0 at `p`.
fn random_t0(omega: &StrictConnection, p: &E0Point, rng: &mut ChaCha8Rng) -> E0Tangent {
    let g = omega.bundle.g();
    E0Tangent { dx: random_vec(rng, p.x.len()), da: &p.a * g.random_algebra(rng, 1.0) }
}

/// Random tangent to E1 at `d` with `dx = s_* dγ`.
fn random_t1(omega: &StrictConnection, d: &E1Point, rng: &mut ChaCha8Rng) -> E1Tangent {
    let b = &omega.bundle;
    let dgamma = random_vec(rng, b.base().mor_dim);
    let dx = push_pt(&|g: &Pt| b.base().source(g), &d.gamma, &dgamma);
    E1Tangent { dgamma, dx, da: &d.p.a * b.g().random_algebra(rng, 1.0), dk: &d.k * b.cm().h.random_algebra(rng, 1.0) }
}

/// Residuals of vertical normalization, equivariance and functoriality on samples.
pub fn validate_strict(omega: &StrictConnection, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    let b = &omega.bundle;
    let cm = b.cm();
    let base = b.base();
    for _ in 0..n_samples.max(1) {
        let d1 = b.sample_e1(&mut rng);
        let p = d1.p.clone();

        let xi = b.g().random_algebra(&mut rng, 1.0);
        let vert = E0Tangent { dx: Pt::zeros(p.x.len()), da: &p.a * &xi };
        rep.record("vertical0", (omega.omega0(&p, &vert) - &xi).norm());
        let y = cm.h.random_algebra(&mut rng, 1.0);
        let xg = cm.g.random_algebra(&mut rng, 1.0);
        let vert1 = central(
            |s| {
                let a = Arrow::new(cm.h.exp(&(&y * s)).expect("exp"), cm.g.exp(&(&xg * s)).expect("exp"));
                b.act1(&d1, &a)
            },
            FD_STEP,
            diff1,
        );
        rep.record("vertical1", omega.omega1(&d1, &vert1).dist(&Alg2::new(y, xg)));

        let v0 = random_t0(omega, &p, &mut rng);
        let v1 = random_t1(omega, &d1, &mut rng);
        let arrow = cm.random_arrow(&mut rng, 0.7);
        let g = arrow.g.clone();
        let g_inv = cm.g.inverse(&g);
        let lhs = omega.omega0(&p.act(&g), &E0Tangent { dx: v0.dx.clone(), da: &v0.da * &g });
        rep.record("equivariance0", (lhs - ad(&g_inv, &omega.omega0(&p, &v0), &g)).norm());
        let moved = push11(&|d: &E1Point| b.act1(d, &arrow), &d1, &v1);
        let lhs = omega.omega1(&b.act1(&d1, &arrow), &moved);
        let rhs = cm.ad_inv(&arrow, &omega.omega1(&d1, &v1));
        rep.record("equivariance1", lhs.dist(&rhs));

        let w1 = omega.omega1(&d1, &v1);
        let s_dot = push10(&|d: &E1Point| b.source(d), &d1, &v1);
        rep.record("functor_source", (cm.alg_source(&w1) - omega.omega0(&b.source(&d1), &s_dot)).norm());
        let t_dot = push10(&|d: &E1Point| b.target(d), &d1, &v1);
        rep.record("functor_target", (cm.alg_target(&w1) - omega.omega0(&b.target(&d1), &t_dot)).norm());
        let u_dot = push01(&|q: &E0Point| b.unit(q), &p, &v0);
        let lhs = omega.omega1(&b.unit(&p), &u_dot);
        rep.record("functor_unit", lhs.dist(&cm.alg_unit(&omega.omega0(&p, &v0))));

        // a composable tangent pair (v2 at δ2, v1 at δ1) with s_* v2 = t_* v1
        let q = b.target(&d1);
        let gamma2 = base.sample_from(&q.x, &mut rng);
        let d2 = b.sample_e1_from(&q, &mut rng);
        let d2 = E1Point::new(gamma2.clone(), d2.p, d2.k);
        let w = random_vec(&mut rng, base.mor_dim);
        let dgamma2 = push_pt(&|g: &Pt| base.with_source(g, &q.x), &gamma2, &w)
            + push_pt(&|x: &Pt| base.with_source(&gamma2, x), &q.x, &t_dot.dx);
        let v2 = E1Tangent {
            dgamma: dgamma2,
            dx: t_dot.dx.clone(),
            da: t_dot.da.clone(),
            dk: &d2.k * cm.h.random_algebra(&mut rng, 1.0),
        };
        let comp_dot = central(
            |s| b.compose_unchecked(&shift1(&d2, &v2, s), &shift1(&d1, &v1, s)),
            FD_STEP / v1.norm().max(v2.norm()).max(1e-300),
            diff1,
        );
        let lhs = omega.omega1(&b.compose_unchecked(&d2, &d1), &comp_dot);
        let rhs = cm.alg_compose(&omega.omega1(&d2, &v2), &w1);
        rep.record("functor_compose", lhs.dist(&rhs));

        let dx = random_vec(&mut rng, p.x.len());
        let h0 = E0Tangent { dx: dx.clone(), da: omega.lift0_velocity(&p, &dx) };
        rep.record("horizontal0", omega.omega0(&p, &h0).norm());
    }
    rep
}
