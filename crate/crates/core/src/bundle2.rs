//! Principal 2-bundles over Lie groupoids in a global trivialization.
//!
//! Objects of the total groupoid are points `(x, a)` of X0 x G and morphisms
//! are triples `(γ, p, k)` with `p` over the source of `γ` and `k` in H. Every
//! bundle here is quasi-decorated: a quasi action of the base given by a map
//! `c: X1 -> G`, together with the pseudo data `Hu`, `Hm`. The decorated case
//! is `Hu = Hm = e` with `c` a cocycle.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crossed_module::{Arrow, CrossedModule};
use crate::error::{Error, Result};
use crate::groupoid::GroupoidPresentation;
use crate::matlie::{Mat, MatrixGroup, Pt};
use crate::report::ResidualReport;

/// Residual threshold for classification and coherence.
pub const CLASSIFY_TOL: f64 = 1e-8;
/// Samples used by constructors that validate their input.
const VALIDATION_SAMPLES: usize = 64;

/// `c(γ)` with `μ(γ, (x, a)) = (t(γ), c(γ) a)`.
pub type CocycleFn = Arc<dyn Fn(&Pt) -> Mat + Send + Sync>;
pub type HuFn = Arc<dyn Fn(&E0Point) -> Mat + Send + Sync>;
/// `Hm(γ2, γ1)` for composable `γ2`, `γ1`.
pub type HmFn = Arc<dyn Fn(&Pt, &Pt) -> Mat + Send + Sync>;
pub type ConnectionFn = Arc<dyn Fn(&Pt, &E0Point) -> E1Point + Send + Sync>;
/// Map `s*E0 -> H` used to twist a connection.
pub type TwistFn = Arc<dyn Fn(&Pt, &E0Point) -> Mat + Send + Sync>;

/// A point of E0 = X0 x G.
#[derive(Clone, Debug, PartialEq)]
pub struct E0Point {
    pub x: Pt,
    pub a: Mat,
}

impl E0Point {
    pub fn new(x: Pt, a: Mat) -> Self {
        E0Point { x, a }
    }

    /// Right action `(x, a) g = (x, a g)`.
    pub fn act(&self, g: &Mat) -> E0Point {
        E0Point::new(self.x.clone(), &self.a * g)
    }

    pub fn dist(&self, o: &E0Point) -> f64 {
        (&self.x - &o.x).norm() + (&self.a - &o.a).norm()
    }
}

/// A morphism `(γ, p, k)` of the total groupoid.
#[derive(Clone, Debug, PartialEq)]
pub struct E1Point {
    pub gamma: Pt,
    pub p: E0Point,
    pub k: Mat,
}

impl E1Point {
    pub fn new(gamma: Pt, p: E0Point, k: Mat) -> Self {
        E1Point { gamma, p, k }
    }

    pub fn dist(&self, o: &E1Point) -> f64 {
        (&self.gamma - &o.gamma).norm() + self.p.dist(&o.p) + (&self.k - &o.k).norm()
    }
}

/// A principal G-bundle over a groupoid, trivialized as X0 x G.
#[derive(Clone)]
pub struct PrincipalGBundleOverGroupoid {
    pub base: GroupoidPresentation,
    pub g: MatrixGroup,
    pub c: CocycleFn,
}

impl fmt::Debug for PrincipalGBundleOverGroupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrincipalGBundleOverGroupoid")
            .field("base", &self.base.name())
            .field("g", &self.g.name())
            .finish()
    }
}

impl PrincipalGBundleOverGroupoid {
    pub fn new(base: GroupoidPresentation, g: MatrixGroup, c: CocycleFn) -> Self {
        PrincipalGBundleOverGroupoid { base, g, c }
    }

    /// The bundle with `c ≡ e`.
    pub fn trivial(base: GroupoidPresentation, g: MatrixGroup) -> Self {
        let e = g.identity();
        Self::new(base, g, Arc::new(move |_| e.clone()))
    }

    pub fn mu(&self, gamma: &Pt, p: &E0Point) -> E0Point {
        E0Point::new(self.base.target(gamma), (self.c)(gamma) * &p.a)
    }

    /// Residuals of the unit, multiplicativity and equivariance axioms.
    pub fn check_axioms(&self, n_samples: usize, seed: u64) -> ResidualReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = ResidualReport::new();
        for _ in 0..n_samples.max(1) {
            let x = self.base.sample_obj(&mut rng);
            let p = E0Point::new(x.clone(), self.g.random_element(&mut rng, 1.0));
            let g1 = self.base.sample_from(&x, &mut rng);
            let g2 = self.base.sample_from(&self.base.target(&g1), &mut rng);
            rep.record("unit", self.mu(&self.base.unit(&x), &p).dist(&p));
            let lhs = self.mu(&self.base.compose(&g2, &g1), &p);
            let rhs = self.mu(&g2, &self.mu(&g1, &p));
            rep.record("multiplicativity", lhs.dist(&rhs));
            let g = self.g.random_element(&mut rng, 1.0);
            let eq = self.mu(&g1, &p.act(&g)).dist(&self.mu(&g1, &p).act(&g));
            rep.record("equivariance", eq);
        }
        rep
    }
}

/// A quasi-principal G-bundle with pseudo data `Hu`, `Hm` for a crossed module.
#[derive(Clone)]
pub struct PseudoPrincipalBundle {
    pub underlying: PrincipalGBundleOverGroupoid,
    pub cm: Arc<CrossedModule>,
    pub hu: HuFn,
    pub hm: HmFn,
}

impl fmt::Debug for PseudoPrincipalBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PseudoPrincipalBundle")
            .field("underlying", &self.underlying)
            .field("cm", &self.cm.name())
            .finish()
    }
}

impl PseudoPrincipalBundle {
    pub fn new(underlying: PrincipalGBundleOverGroupoid, cm: Arc<CrossedModule>, hu: HuFn, hm: HmFn) -> Self {
        PseudoPrincipalBundle { underlying, cm, hu, hm }
    }

    /// Pseudo data `Hu ≡ e`, `Hm ≡ e`.
    pub fn strict(underlying: PrincipalGBundleOverGroupoid, cm: Arc<CrossedModule>) -> Self {
        let e = cm.h.identity();
        let e2 = e.clone();
        Self::new(underlying, cm, Arc::new(move |_| e.clone()), Arc::new(move |_, _| e2.clone()))
    }

    pub fn hu(&self, p: &E0Point) -> Mat {
        (self.hu)(p)
    }

    pub fn hm(&self, g2: &Pt, g1: &Pt) -> Mat {
        (self.hm)(g2, g1)
    }
}

/// Connection classes, weakest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Classification {
    Quasi,
    Unital,
    Categorical,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Quasi => "quasi",
            Classification::Unital => "unital",
            Classification::Categorical => "categorical",
        })
    }
}

impl std::str::FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quasi" => Ok(Classification::Quasi),
            "unital" => Ok(Classification::Unital),
            "categorical" => Ok(Classification::Categorical),
            _ => Err(Error::Invalid(format!("unknown connection class {s}"))),
        }
    }
}

/// A principal [H ⋊ G ⇉ G]-bundle in quasi-decorated coordinates.
#[derive(Clone)]
pub struct Principal2Bundle {
    pseudo: PseudoPrincipalBundle,
}

impl fmt::Debug for Principal2Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Principal2Bundle").field("pseudo", &self.pseudo).finish()
    }
}

/// A section `C: s*E0 -> E1` with its class.
#[derive(Clone)]
pub struct QuasiConnection {
    map: ConnectionFn,
    pub classification: Classification,
}

impl fmt::Debug for QuasiConnection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuasiConnection").field("classification", &self.classification).finish()
    }
}

impl QuasiConnection {
    pub fn new(map: ConnectionFn, classification: Classification) -> Self {
        QuasiConnection { map, classification }
    }

    pub fn eval(&self, gamma: &Pt, p: &E0Point) -> E1Point {
        (self.map)(gamma, p)
    }

    pub fn map(&self) -> &ConnectionFn {
        &self.map
    }
}

impl Principal2Bundle {
    pub fn pseudo(&self) -> &PseudoPrincipalBundle {
        &self.pseudo
    }

    pub fn base(&self) -> &GroupoidPresentation {
        &self.pseudo.underlying.base
    }

    pub fn cm(&self) -> &CrossedModule {
        &self.pseudo.cm
    }

    pub fn cm_arc(&self) -> &Arc<CrossedModule> {
        &self.pseudo.cm
    }

    pub fn g(&self) -> &MatrixGroup {
        &self.pseudo.underlying.g
    }

    pub fn cocycle(&self, gamma: &Pt) -> Mat {
        (self.pseudo.underlying.c)(gamma)
    }

    /// The quasi action `μ(γ, p)`.
    pub fn mu(&self, gamma: &Pt, p: &E0Point) -> E0Point {
        self.pseudo.underlying.mu(gamma, p)
    }

    pub fn source(&self, d: &E1Point) -> E0Point {
        d.p.clone()
    }

    /// `t(γ, p, k) = μ(γ, p) τ(k⁻¹)`.
    pub fn target(&self, d: &E1Point) -> E0Point {
        let cm = self.cm();
        self.mu(&d.gamma, &d.p).act(&cm.tau(&cm.h.inverse(&d.k)))
    }

    pub fn unit(&self, p: &E0Point) -> E1Point {
        E1Point::new(self.base().unit(&p.x), p.clone(), self.pseudo.hu(p))
    }

    /// `δ2 ∘ δ1` without a composability check.
    pub fn compose_unchecked(&self, d2: &E1Point, d1: &E1Point) -> E1Point {
        let hm = self.pseudo.hm(&d2.gamma, &d1.gamma);
        let k = &d2.k * &d1.k * self.cm().h.inverse(&hm);
        E1Point::new(self.base().compose(&d2.gamma, &d1.gamma), d1.p.clone(), k)
    }

    pub fn compose(&self, d2: &E1Point, d1: &E1Point) -> Result<E1Point> {
        let mismatch = self.source(d2).dist(&self.target(d1));
        if mismatch > crate::matlie::TOL_MATCH {
            return Err(Error::NotComposable(mismatch));
        }
        Ok(self.compose_unchecked(d2, d1))
    }

    pub fn inverse(&self, d: &E1Point) -> E1Point {
        let h = &self.cm().h;
        let gi = self.base().inverse(&d.gamma);
        let k = self.pseudo.hu(&d.p) * self.pseudo.hm(&gi, &d.gamma) * h.inverse(&d.k);
        E1Point::new(gi, self.target(d), k)
    }

    pub fn act0(&self, p: &E0Point, g: &Mat) -> E0Point {
        p.act(g)
    }

    /// `(γ, p, k)(h′, g) = (γ, p g, α_{g⁻¹}(h′⁻¹ k))`.
    pub fn act1(&self, d: &E1Point, a: &Arrow) -> E1Point {
        let cm = self.cm();
        let gi = cm.g.inverse(&a.g);
        let k = cm.alpha(&gi, &(cm.h.inverse(&a.h) * &d.k));
        E1Point::new(d.gamma.clone(), d.p.act(&a.g), k)
    }

    pub fn project0(&self, p: &E0Point) -> Pt {
        p.x.clone()
    }

    pub fn project1(&self, d: &E1Point) -> Pt {
        d.gamma.clone()
    }

    /// The unique `g` with `p g = q`.
    pub fn divide0(&self, p: &E0Point, q: &E0Point) -> Result<Mat> {
        let dx = (&p.x - &q.x).norm();
        if dx > crate::matlie::TOL_MATCH {
            return Err(Error::DivisionFailure(format!("E0 points in different fibers ({dx:.3e})")));
        }
        Ok(self.g().inverse(&p.a) * &q.a)
    }

    /// The unique arrow `(h′, g)` with `δ (h′, g) = δ′`.
    pub fn divide1(&self, d: &E1Point, d2: &E1Point) -> Result<Arrow> {
        let dg = (&d.gamma - &d2.gamma).norm();
        if dg > crate::matlie::TOL_MATCH {
            return Err(Error::DivisionFailure(format!("E1 points in different fibers ({dg:.3e})")));
        }
        let g = self.divide0(&d.p, &d2.p)?;
        let cm = self.cm();
        let h = &d.k * cm.h.inverse(&cm.alpha(&g, &d2.k));
        Ok(Arrow::new(h, g))
    }

    pub fn sample_e0(&self, rng: &mut dyn RngCore) -> E0Point {
        let x = self.base().sample_obj(rng);
        E0Point::new(x, self.g().random_element(rng, 1.0))
    }

    /// Random morphism with source `p`.
    pub fn sample_e1_from(&self, p: &E0Point, rng: &mut dyn RngCore) -> E1Point {
        let gamma = self.base().sample_from(&p.x, rng);
        E1Point::new(gamma, p.clone(), self.cm().h.random_element(rng, 0.7))
    }

    pub fn sample_e1(&self, rng: &mut dyn RngCore) -> E1Point {
        let p = self.sample_e0(rng);
        self.sample_e1_from(&p, rng)
    }

    /// Groupoid axioms, projection functoriality and action functoriality on samples.
    pub fn check_structure(&self, n_samples: usize, seed: u64) -> ResidualReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = ResidualReport::new();
        let cm = self.cm();
        let base = self.base();
        for _ in 0..n_samples.max(1) {
            let d1 = self.sample_e1(&mut rng);
            let d2 = self.sample_e1_from(&self.target(&d1), &mut rng);
            let d3 = self.sample_e1_from(&self.target(&d2), &mut rng);
            let p = d1.p.clone();
            let u = self.unit(&p);
            rep.record("unit_source", self.source(&u).dist(&p));
            rep.record("unit_target", self.target(&u).dist(&p));
            let d21 = self.compose_unchecked(&d2, &d1);
            rep.record("compose_source", self.source(&d21).dist(&d1.p));
            rep.record("compose_target", self.target(&d21).dist(&self.target(&d2)));
            let l = self.compose_unchecked(&d3, &d21);
            let r = self.compose_unchecked(&self.compose_unchecked(&d3, &d2), &d1);
            rep.record("associativity", l.dist(&r));
            rep.record("right_unit", self.compose_unchecked(&d1, &u).dist(&d1));
            let ut = self.unit(&self.target(&d1));
            rep.record("left_unit", self.compose_unchecked(&ut, &d1).dist(&d1));
            let inv = self.inverse(&d1);
            rep.record("left_inverse", self.compose_unchecked(&inv, &d1).dist(&u));
            rep.record("right_inverse", self.compose_unchecked(&d1, &inv).dist(&ut));
            let pi = (base.compose(&d2.gamma, &d1.gamma) - self.project1(&d21)).norm();
            rep.record("projection_functor", pi);

            let a1 = cm.random_arrow(&mut rng, 0.7);
            let a2_src = cm.arrow_target(&a1);
            let h2 = cm.h.random_element(&mut rng, 0.7);
            let a2 = Arrow::new(h2, a2_src);
            let lhs = self.compose_unchecked(&self.act1(&d2, &a2), &self.act1(&d1, &a1));
            let rhs = self.act1(&d21, &cm.arrow_compose_unchecked(&a2, &a1));
            rep.record("action_compose", lhs.dist(&rhs));
            rep.record("action_target", self.target(&self.act1(&d1, &a1)).dist(&self.target(&d1).act(&cm.arrow_target(&a1))));
            let g = a1.g.clone();
            rep.record("action_unit", self.act1(&u, &cm.arrow_unit(&g)).dist(&self.unit(&p.act(&g))));
        }
        rep
    }
}

/// The decorated bundle of a principal G-bundle and its categorical connection
/// `(γ, p) ↦ (γ, p, e)`.
pub fn decorate(pg: &PrincipalGBundleOverGroupoid, cm: Arc<CrossedModule>) -> Result<(Principal2Bundle, QuasiConnection)> {
    if pg.g.name() != cm.g.name() {
        return Err(Error::GroupMismatch(format!("bundle group {} vs crossed module group {}", pg.g.name(), cm.g.name())));
    }
    let rep = pg.check_axioms(VALIDATION_SAMPLES, 0);
    if let Some(label) = rep.first_failing(CLASSIFY_TOL) {
        return Err(Error::IncoherentData(format!("principal bundle axiom {label}")));
    }
    let b = Principal2Bundle { pseudo: PseudoPrincipalBundle::strict(pg.clone(), cm) };
    let c = canonical_connection(&b, Classification::Categorical);
    Ok((b, c))
}

fn canonical_connection(b: &Principal2Bundle, class: Classification) -> QuasiConnection {
    let e = b.cm().h.identity();
    QuasiConnection::new(Arc::new(move |g, p| E1Point::new(g.clone(), p.clone(), e.clone())), class)
}

/// The quasi-decorated bundle of coherent pseudo data with the quasi connection
/// `(γ, p) ↦ (γ, p, e)`.
pub fn quasi_decorate(pb: &PseudoPrincipalBundle) -> Result<(Principal2Bundle, QuasiConnection)> {
    if pb.underlying.g.name() != pb.cm.g.name() {
        return Err(Error::GroupMismatch(format!(
            "bundle group {} vs crossed module group {}",
            pb.underlying.g.name(),
            pb.cm.g.name()
        )));
    }
    let rep = check_coherence(pb, VALIDATION_SAMPLES, 0);
    if let Some(label) = rep.first_failing(CLASSIFY_TOL) {
        return Err(Error::IncoherentData(label.to_string()));
    }
    let b = Principal2Bundle { pseudo: pb.clone() };
    let mut c = canonical_connection(&b, Classification::Quasi);
    c.classification = classify_connection(&b, &c, VALIDATION_SAMPLES, 0)?.0;
    Ok((b, c))
}

/// Residuals of the coherence properties (a) to (k) on composable samples.
pub fn check_coherence(pb: &PseudoPrincipalBundle, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    let base = &pb.underlying.base;
    let g = &pb.underlying.g;
    let cm = &pb.cm;
    let h = &cm.h;
    let mu = |gamma: &Pt, p: &E0Point| pb.underlying.mu(gamma, p);
    for _ in 0..n_samples.max(1) {
        let x = base.sample_obj(&mut rng);
        let p = E0Point::new(x.clone(), g.random_element(&mut rng, 1.0));
        let g1 = base.sample_from(&x, &mut rng);
        let g2 = base.sample_from(&base.target(&g1), &mut rng);
        let g3 = base.sample_from(&base.target(&g2), &mut rng);
        let gg = g.random_element(&mut rng, 1.0);
        let hh = h.random_element(&mut rng, 1.0);
        let hu = pb.hu(&p);
        let hm21 = pb.hm(&g2, &g1);

        rep.record("(a)", mu(&base.unit(&x), &p).dist(&p.act(&cm.tau(&hu))));
        let lhs = mu(&g2, &mu(&g1, &p));
        let rhs = mu(&base.compose(&g2, &g1), &p).act(&cm.tau(&hm21));
        rep.record("(b)", lhs.dist(&rhs));
        rep.record("(c)", (pb.hm(&g1, &base.unit(&x)) - &hu).norm());
        let q = mu(&g1, &p);
        rep.record("(d)", (pb.hm(&base.unit(&q.x), &g1) - pb.hu(&q)).norm());
        rep.record("(e)", (pb.hu(&p.act(&gg)) - &hu).norm());
        let ginv = g.inverse(&gg);
        rep.record("(f)", (cm.alpha(&ginv, &hu) - &hu).norm());
        rep.record("(g)", (&hu * &hh - &hh * &hu).norm());
        let hm_inv = h.inverse(&hm21);
        rep.record("(h)", (cm.alpha(&ginv, &hm_inv) - &hm_inv).norm());
        rep.record("(i)", (&hm21 * &hh - &hh * &hm21).norm());
        let g32 = base.compose(&g3, &g2);
        let g21 = base.compose(&g2, &g1);
        let lhs = h.inverse(&pb.hm(&g3, &g2)) * h.inverse(&pb.hm(&g32, &g1));
        let rhs = h.inverse(&hm21) * h.inverse(&pb.hm(&g3, &g21));
        rep.record("(j)", (lhs - rhs).norm());
        let gi = base.inverse(&g1);
        let lhs = pb.hm(&gi, &g1) * h.inverse(&pb.hm(&g1, &gi));
        let rhs = h.inverse(&hu) * pb.hu(&q);
        rep.record("(k)", (lhs - rhs).norm());
    }
    rep
}

/// Residuals of the section property and of equivariance along the unit.
pub fn section_residuals(b: &Principal2Bundle, c: &QuasiConnection, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let d = b.sample_e1(&mut rng);
        let cv = c.eval(&d.gamma, &d.p);
        rep.record("section_source", b.source(&cv).dist(&d.p));
        rep.record("section_projection", (b.project1(&cv) - &d.gamma).norm());
        let g = b.g().random_element(&mut rng, 1.0);
        let lhs = c.eval(&d.gamma, &d.p.act(&g));
        let rhs = b.act1(&cv, &b.cm().arrow_unit(&g));
        rep.record("equivariance", lhs.dist(&rhs));
    }
    rep
}

fn check_section(b: &Principal2Bundle, c: &QuasiConnection, n_samples: usize, seed: u64) -> Result<()> {
    let rep = section_residuals(b, c, n_samples, seed);
    let worst = rep.get("section_source").unwrap_or(0.0).max(rep.get("section_projection").unwrap_or(0.0));
    if !(worst < CLASSIFY_TOL) {
        return Err(Error::NotASection(worst));
    }
    Ok(())
}

/// Classifies `c` by the unit and composition residuals on samples.
pub fn classify_connection(
    b: &Principal2Bundle,
    c: &QuasiConnection,
    n_samples: usize,
    seed: u64,
) -> Result<(Classification, ResidualReport)> {
    check_section(b, c, n_samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1a55);
    let mut rep = ResidualReport::new();
    let base = b.base();
    for _ in 0..n_samples.max(1) {
        let p = b.sample_e0(&mut rng);
        rep.record("unit", c.eval(&base.unit(&p.x), &p).dist(&b.unit(&p)));
        let g1 = base.sample_from(&p.x, &mut rng);
        let c1 = c.eval(&g1, &p);
        let g2 = base.sample_from(&base.target(&g1), &mut rng);
        let c2 = c.eval(&g2, &b.target(&c1));
        let lhs = c.eval(&base.compose(&g2, &g1), &p);
        rep.record("composition", lhs.dist(&b.compose_unchecked(&c2, &c1)));
    }
    let unit_ok = rep.get("unit").is_some_and(|v| v < CLASSIFY_TOL);
    let comp_ok = rep.get("composition").is_some_and(|v| v < CLASSIFY_TOL);
    let class = match (unit_ok, comp_ok) {
        (true, true) => Classification::Categorical,
        (true, false) => Classification::Unital,
        _ => Classification::Quasi,
    };
    Ok((class, rep))
}

/// Divides `base_arrow` into `other`, requiring a pure H factor `(h, e)`.
fn h_factor(b: &Principal2Bundle, base_arrow: &E1Point, other: &E1Point) -> Result<Mat> {
    let a = b.divide1(base_arrow, other)?;
    let dev = (&a.g - b.g().identity()).norm();
    if dev > CLASSIFY_TOL {
        return Err(Error::DivisionFailure(format!("G component {dev:.3e} away from identity")));
    }
    Ok(a.h)
}

/// The pseudo data `(μ_C, H_{u,C}, H_{m,C})` of a quasi connection.
pub fn extract_pseudo(b: &Principal2Bundle, c: &QuasiConnection) -> Result<PseudoPrincipalBundle> {
    check_section(b, c, VALIDATION_SAMPLES, 1)?;
    let e_g = b.g().identity();
    let cocycle: CocycleFn = {
        let b = b.clone();
        let c = c.clone();
        let e_g = e_g.clone();
        Arc::new(move |gamma: &Pt| {
            let p = E0Point::new(b.base().source(gamma), e_g.clone());
            b.target(&c.eval(gamma, &p)).a
        })
    };
    let hu: HuFn = {
        let b = b.clone();
        let c = c.clone();
        Arc::new(move |p: &E0Point| {
            let cv = c.eval(&b.base().unit(&p.x), p);
            b.divide1(&b.unit(p), &cv).map(|a| a.h).unwrap_or_else(|_| b.cm().h.identity() * f64::NAN)
        })
    };
    let hm: HmFn = {
        let b = b.clone();
        let c = c.clone();
        let e_g = e_g.clone();
        Arc::new(move |g2: &Pt, g1: &Pt| {
            let p = E0Point::new(b.base().source(g1), e_g.clone());
            let c1 = c.eval(g1, &p);
            let c2 = c.eval(g2, &b.target(&c1));
            let lhs = b.compose_unchecked(&c2, &c1);
            let rhs = c.eval(&b.base().compose(g2, g1), &p);
            b.divide1(&rhs, &lhs).map(|a| a.h).unwrap_or_else(|_| b.cm().h.identity() * f64::NAN)
        })
    };
    // the divisions must have trivial G part
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let base = b.base();
    for _ in 0..VALIDATION_SAMPLES {
        let p = b.sample_e0(&mut rng);
        h_factor(b, &b.unit(&p), &c.eval(&base.unit(&p.x), &p))?;
        let g1 = base.sample_from(&p.x, &mut rng);
        let g2 = base.sample_from(&base.target(&g1), &mut rng);
        let c1 = c.eval(&g1, &p);
        let c2 = c.eval(&g2, &b.target(&c1));
        h_factor(b, &c.eval(&base.compose(&g2, &g1), &p), &b.compose_unchecked(&c2, &c1))?;
    }
    let underlying = PrincipalGBundleOverGroupoid::new(base.clone(), b.g().clone(), cocycle);
    Ok(PseudoPrincipalBundle::new(underlying, b.cm_arc().clone(), hu, hm))
}

/// Twists a categorical connection: `C_H(γ, p) = C(γ, p)(H(γ, p), e)`.
pub fn make_ch(b: &Principal2Bundle, c: &QuasiConnection, hmap: TwistFn) -> Result<QuasiConnection> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cm = b.cm();
    let mut worst = 0.0f64;
    for _ in 0..VALIDATION_SAMPLES {
        let d = b.sample_e1(&mut rng);
        let g = b.g().random_element(&mut rng, 1.0);
        let lhs = cm.alpha(&g, &hmap(&d.gamma, &d.p.act(&g)));
        worst = worst.max((lhs - hmap(&d.gamma, &d.p)).norm());
    }
    if !(worst < CLASSIFY_TOL) {
        return Err(Error::EquivarianceFailure(worst));
    }
    let map: ConnectionFn = {
        let b = b.clone();
        let c = c.clone();
        Arc::new(move |gamma: &Pt, p: &E0Point| {
            let arrow = Arrow::new(hmap(gamma, p), b.g().identity());
            b.act1(&c.eval(gamma, p), &arrow)
        })
    };
    let mut ch = QuasiConnection::new(map, Classification::Quasi);
    ch.classification = classify_connection(b, &ch, VALIDATION_SAMPLES, 0)?.0;
    Ok(ch)
}

/// A pair of maps `F0: E0 -> E0′`, `F1: E1 -> E1′`.
#[derive(Clone)]
pub struct BundleMorphism {
    pub f0: Arc<dyn Fn(&E0Point) -> E0Point + Send + Sync>,
    pub f1: Arc<dyn Fn(&E1Point) -> E1Point + Send + Sync>,
}

impl BundleMorphism {
    pub fn identity() -> Self {
        BundleMorphism { f0: Arc::new(|p| p.clone()), f1: Arc::new(|d| d.clone()) }
    }
}

/// Residuals of a morphism of quasi-principal 2-bundles `(b, c) -> (b2, c2)`.
pub fn bundle_morphism_check(
    f: &BundleMorphism,
    b: &Principal2Bundle,
    b2: &Principal2Bundle,
    c: &QuasiConnection,
    c2: &QuasiConnection,
    n_samples: usize,
    seed: u64,
) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    let cm = b.cm();
    for _ in 0..n_samples.max(1) {
        let d1 = b.sample_e1(&mut rng);
        let d2 = b.sample_e1_from(&b.target(&d1), &mut rng);
        let fd1 = (f.f1)(&d1);
        rep.record("source", b2.source(&fd1).dist(&(f.f0)(&b.source(&d1))));
        rep.record("target", b2.target(&fd1).dist(&(f.f0)(&b.target(&d1))));
        let p = d1.p.clone();
        rep.record("unit", (f.f1)(&b.unit(&p)).dist(&b2.unit(&(f.f0)(&p))));
        let lhs = (f.f1)(&b.compose_unchecked(&d2, &d1));
        rep.record("compose", lhs.dist(&b2.compose_unchecked(&(f.f1)(&d2), &fd1)));
        let a = cm.random_arrow(&mut rng, 0.7);
        rep.record("equivariance0", (f.f0)(&p.act(&a.g)).dist(&(f.f0)(&p).act(&a.g)));
        rep.record("equivariance1", (f.f1)(&b.act1(&d1, &a)).dist(&b2.act1(&fd1, &a)));
        rep.record("projection0", (b2.project0(&(f.f0)(&p)) - b.project0(&p)).norm());
        rep.record("projection1", (b2.project1(&fd1) - b.project1(&d1)).norm());
        let lhs = (f.f1)(&c.eval(&d1.gamma, &p));
        rep.record("connection", lhs.dist(&c2.eval(&d1.gamma, &(f.f0)(&p))));
    }
    rep
}

/// The comparison map θ_E from the quasi-decorated bundle of the extracted
/// pseudo data back to `b`: `(γ, p, h) ↦ C(γ, p)(h⁻¹, e)` and `p ↦ p`.
pub fn theta_e(b: &Principal2Bundle, c: &QuasiConnection) -> BundleMorphism {
    let b = b.clone();
    let c = c.clone();
    BundleMorphism {
        f0: Arc::new(|p| p.clone()),
        f1: Arc::new(move |d: &E1Point| {
            let arrow = Arrow::new(b.cm().h.inverse(&d.k), b.g().identity());
            b.act1(&c.eval(&d.gamma, &d.p), &arrow)
        }),
    }
}

/// Builds the quasi-decorated bundle of `extract_pseudo(b, c)` and reports how
/// well θ_E is a morphism of quasi-principal 2-bundles onto `(b, c)`.
pub fn grothendieck_roundtrip(
    b: &Principal2Bundle,
    c: &QuasiConnection,
    n_samples: usize,
    seed: u64,
) -> Result<ResidualReport> {
    let pb = extract_pseudo(b, c)?;
    let (bq, cq) = quasi_decorate(&pb)?;
    let theta = theta_e(b, c);
    let mut rep = bundle_morphism_check(&theta, &bq, b, &cq, c, n_samples, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e7a);
    for _ in 0..n_samples.max(1) {
        let p = b.sample_e0(&mut rng);
        rep.record("object_identity", (theta.f0)(&p).dist(&p));
    }
    Ok(rep)
}

/// Compares `extract_pseudo(quasi_decorate(pb))` with `pb` on samples.
pub fn pseudo_roundtrip(pb: &PseudoPrincipalBundle, n_samples: usize, seed: u64) -> Result<ResidualReport> {
    let (b, c) = quasi_decorate(pb)?;
    let back = extract_pseudo(&b, &c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let d1 = b.sample_e1(&mut rng);
        let g2 = b.base().sample_from(&b.base().target(&d1.gamma), &mut rng);
        rep.record("mu", back.underlying.mu(&d1.gamma, &d1.p).dist(&pb.underlying.mu(&d1.gamma, &d1.p)));
        rep.record("hu", (back.hu(&d1.p) - pb.hu(&d1.p)).norm());
        rep.record("hm", (back.hm(&g2, &d1.gamma) - pb.hm(&g2, &d1.gamma)).norm());
    }
    Ok(rep)
}

/// Free and transitive fiber actions: divisions recover the acting element.
pub fn check_torsor(b: &Principal2Bundle, n_samples: usize, seed: u64) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    let cm = b.cm();
    for _ in 0..n_samples.max(1) {
        let d = b.sample_e1(&mut rng);
        let a = cm.random_arrow(&mut rng, 0.7);
        rep.record("e0_division", (b.divide0(&d.p, &d.p.act(&a.g))? - &a.g).norm());
        rep.record("e1_division", b.divide1(&d, &b.act1(&d, &a))?.dist(&a));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{associator_counterexample, coherent_cm4};
    use crate::groupoid::{discrete_groupoid, pair_groupoid, Chart};
    use crate::matlie::rot2;

    fn so2_bundle() -> PrincipalGBundleOverGroupoid {
        let theta = |x: &Pt| 0.7 * x[0] - 0.3 * x[1];
        PrincipalGBundleOverGroupoid::new(
            pair_groupoid(2, Chart::default()),
            MatrixGroup::so2(),
            Arc::new(move |g: &Pt| rot2(theta(&g.rows(0, 2).into_owned()) - theta(&g.rows(2, 2).into_owned()))),
        )
    }

    fn decorated_cm1() -> (Principal2Bundle, QuasiConnection) {
        decorate(&so2_bundle(), Arc::new(CrossedModule::conjugation(MatrixGroup::so2()))).unwrap()
    }

    #[test]
    fn decorated_structure_maps() {
        let (b, c) = decorated_cm1();
        assert_eq!(c.classification, Classification::Categorical);
        let p = E0Point::new(Pt::from_vec(vec![0.2, 0.4]), rot2(0.3));
        let u = b.unit(&p);
        assert_eq!(u, E1Point::new(Pt::from_vec(vec![0.2, 0.4, 0.2, 0.4]), p.clone(), Mat::identity(2, 2)));
        let d1 = E1Point::new(Pt::from_vec(vec![1.0, 0.0, 0.2, 0.4]), p.clone(), rot2(0.5));
        let d2 = E1Point::new(Pt::from_vec(vec![-1.0, 1.0, 1.0, 0.0]), b.target(&d1), rot2(-0.2));
        let d21 = b.compose(&d2, &d1).unwrap();
        assert_eq!(d21.gamma, Pt::from_vec(vec![-1.0, 1.0, 0.2, 0.4]));
        assert!((d21.k.clone() - rot2(0.3)).norm() < 1e-15);
        assert!(b.check_structure(200, 5).max() < 1e-10);
        assert!(b.compose(&d1, &d1).is_err());
    }

    #[test]
    fn decorate_rejects_group_mismatch() {
        let r = decorate(&so2_bundle(), Arc::new(CrossedModule::cm4()));
        assert!(matches!(r, Err(Error::GroupMismatch(_))));
    }

    #[test]
    fn decorated_extraction_is_trivial() {
        let (b, c) = decorated_cm1();
        let pb = extract_pseudo(&b, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let d = b.sample_e1(&mut rng);
            let g2 = b.base().sample_from(&b.base().target(&d.gamma), &mut rng);
            assert!((pb.hu(&d.p) - Mat::identity(2, 2)).norm() < 1e-12);
            assert!((pb.hm(&g2, &d.gamma) - Mat::identity(2, 2)).norm() < 1e-12);
        }
        assert!(grothendieck_roundtrip(&b, &c, 100, 1).unwrap().max() < 1e-10);
    }

    #[test]
    fn coherent_pseudo_data_round_trip() {
        let pb = coherent_cm4();
        assert!(check_coherence(&pb, 200, 4).max() < 1e-9);
        let (b, c) = quasi_decorate(&pb).unwrap();
        assert_eq!(c.classification, Classification::Quasi);
        assert!(b.check_structure(200, 6).max() < 1e-9);
        assert!(pseudo_roundtrip(&pb, 200, 7).unwrap().max() < 1e-9);
        let rep = grothendieck_roundtrip(&b, &c, 100, 8).unwrap();
        assert!(rep.max() < 1e-9, "{rep}");
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let p = b.sample_e0(&mut rng);
        let mu1 = b.mu(&b.base().unit(&p.x), &p);
        assert!(mu1.dist(&p.act(&b.cm().tau(&pb.hu(&p)))) < 1e-9);
    }

    #[test]
    fn trivial_pseudo_data_reproduces_decorate() {
        let (bd, _) = decorated_cm1();
        let pb = PseudoPrincipalBundle::strict(so2_bundle(), bd.cm_arc().clone());
        let (bq, cq) = quasi_decorate(&pb).unwrap();
        assert_eq!(cq.classification, Classification::Categorical);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d1 = bd.sample_e1(&mut rng);
            let d2 = bd.sample_e1_from(&bd.target(&d1), &mut rng);
            assert_eq!(bd.unit(&d1.p), bq.unit(&d1.p));
            assert_eq!(bd.target(&d1), bq.target(&d1));
            assert_eq!(bd.inverse(&d1), bq.inverse(&d1));
            assert_eq!(bd.compose_unchecked(&d2, &d1), bq.compose_unchecked(&d2, &d1));
        }
    }

    #[test]
    fn associator_counterexample_fails_exactly_at_j() {
        let pb = associator_counterexample();
        let rep = check_coherence(&pb, 200, 12);
        assert_eq!(rep.first_failing(1e-9), Some("(j)"));
        assert!(rep.get("(j)").unwrap() > 0.1);
        for (label, v) in rep.entries() {
            if label != "(j)" {
                assert!(*v < 1e-12, "{label} {v}");
            }
        }
        match quasi_decorate(&pb) {
            Err(Error::IncoherentData(l)) => assert_eq!(l, "(j)"),
            other => panic!("{other:?}"),
        }
        let pt = |a: f64, b: f64| Pt::from_vec(vec![a, b]);
        let hm = |g2: &Pt, g1: &Pt| pb.hm(g2, g1)[(0, 1)];
        let base = &pb.underlying.base;
        let (g1, g2, g3) = (pt(1.0, 0.0), pt(2.0, 1.0), pt(3.0, 2.0));
        let lhs = hm(&g3, &g2) + hm(&base.compose(&g3, &g2), &g1);
        let rhs = hm(&g2, &g1) + hm(&g3, &base.compose(&g2, &g1));
        assert_eq!((lhs, rhs), (10.0, 14.0));
    }

    #[test]
    fn twisted_connections_classify() {
        let cm = Arc::new(CrossedModule::cm2());
        let pg = PrincipalGBundleOverGroupoid::trivial(pair_groupoid(2, Chart::default()), cm.g.clone());
        let (b, c) = decorate(&pg, cm.clone()).unwrap();
        let mut h = Mat::identity(2, 2);
        h[(0, 1)] = 1.0;
        let ch = make_ch(&b, &c, Arc::new(move |_, _| h.clone())).unwrap();
        assert_eq!(ch.classification, Classification::Quasi);
        let same = make_ch(&b, &c, Arc::new(|_, _| Mat::identity(2, 2))).unwrap();
        assert_eq!(same.classification, Classification::Categorical);

        // discrete base, central h
        let cm1 = Arc::new(CrossedModule::conjugation(MatrixGroup::so2()));
        let pg = PrincipalGBundleOverGroupoid::trivial(discrete_groupoid(2, Chart::default()), MatrixGroup::so2());
        let (b, c) = decorate(&pg, cm1).unwrap();
        let ch = make_ch(&b, &c, Arc::new(|_, _| rot2(0.4))).unwrap();
        assert_eq!(ch.classification, Classification::Quasi);
        assert!(grothendieck_roundtrip(&b, &ch, 100, 2).unwrap().max() < 1e-9);

        // SO(3) conjugation has no invariant non-identity element
        let cm3 = Arc::new(CrossedModule::conjugation(MatrixGroup::so3()));
        let pg = PrincipalGBundleOverGroupoid::trivial(discrete_groupoid(2, Chart::default()), MatrixGroup::so3());
        let (b, c) = decorate(&pg, cm3.clone()).unwrap();
        let h0 = cm3.h.exp(&cm3.h.generators()[0].scale(0.5)).unwrap();
        assert!(matches!(make_ch(&b, &c, Arc::new(move |_, _| h0.clone())), Err(Error::EquivarianceFailure(_))));
    }

    #[test]
    fn unital_but_not_categorical() {
        let cm = Arc::new(CrossedModule::cm2());
        let base = pair_groupoid(1, Chart::default());
        let b3 = base.clone();
        let f = |g: &Pt| (g[0] - g[1]) * (1.0 + 0.5 * g[1].sin());
        let mut pb = PseudoPrincipalBundle::strict(PrincipalGBundleOverGroupoid::trivial(base, cm.g.clone()), cm);
        pb.hm = Arc::new(move |g2: &Pt, g1: &Pt| {
            let mut m = Mat::identity(2, 2);
            m[(0, 1)] = f(g2) + f(g1) - f(&b3.compose(g2, g1));
            m
        });
        assert!(check_coherence(&pb, 100, 3).max() < 1e-12);
        let (_, c) = quasi_decorate(&pb).unwrap();
        assert_eq!(c.classification, Classification::Unital);
    }

    #[test]
    fn morphism_checks() {
        let cm = Arc::new(CrossedModule::conjugation(MatrixGroup::so3()));
        let pg = PrincipalGBundleOverGroupoid::trivial(pair_groupoid(2, Chart::default()), MatrixGroup::so3());
        let (b, c) = decorate(&pg, cm.clone()).unwrap();
        let id = bundle_morphism_check(&BundleMorphism::identity(), &b, &b, &c, &c, 50, 1);
        assert_eq!(id.max(), 0.0);
        let g0 = cm.g.exp(&(cm.g.generators()[0].scale(0.8) + cm.g.generators()[2].scale(0.3))).unwrap();
        let g1 = g0.clone();
        let broken = BundleMorphism {
            f0: Arc::new(move |p| p.act(&g0)),
            f1: Arc::new(move |d| E1Point::new(d.gamma.clone(), d.p.act(&g1), d.k.clone())),
        };
        let rep = bundle_morphism_check(&broken, &b, &b, &c, &c, 50, 1);
        assert!(rep.get("equivariance0").unwrap() > 0.1);
    }

    #[test]
    fn torsor_divisions() {
        let (b, _) = decorated_cm1();
        assert!(check_torsor(&b, 200, 3).unwrap().max() < 1e-10);
        let pb = coherent_cm4();
        let (b, _) = quasi_decorate(&pb).unwrap();
        assert!(check_torsor(&b, 200, 3).unwrap().max() < 1e-10);
    }

    #[test]
    fn extraction_rejects_non_section() {
        let (b, _) = decorated_cm1();
        let bad = QuasiConnection::new(
            Arc::new(|g: &Pt, p: &E0Point| E1Point::new(g.clone(), p.act(&rot2(0.5)), Mat::identity(2, 2))),
            Classification::Quasi,
        );
        assert!(matches!(extract_pseudo(&b, &bad), Err(Error::NotASection(_))));
        assert!(matches!(classify_connection(&b, &bad, 10, 0), Err(Error::NotASection(_))));
    }
}
