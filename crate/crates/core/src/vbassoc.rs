//! Associated VB-groupoids `(E × V)/G` of a principal 2-bundle, their linear
//! cleavage `C^V` and the induced transport.
//!
//! Classes are stored through canonical representatives of the global
//! trivialization: `[(x, a), v]` becomes the vector `ρ0(a) v` at `(x, e)` and
//! `[σ(γ) φ, ζ]` becomes `ρ1(φ) ζ` at `σ(γ)`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle2::{E0Point, E1Point, Principal2Bundle, QuasiConnection};
use crate::connection::{phi_of, sigma, StrictConnection};
use crate::crossed_module::{Arrow, CrossedModule};
use crate::hpath::LazyPath;
use crate::matlie::{Mat, Pt};
use crate::report::ResidualReport;
use crate::transport::lazy_transport;
use crate::{Error, Result};

const ACTION_TOL: f64 = 1e-9;
const VALIDATION_SAMPLES: usize = 32;

/// Named 2-vector-space structures accepted by [`TwoVectorSpace::preset`].
pub const SPACE_PRESETS: &[&str] = &["discrete", "pair", "lie2"];

/// A category internal to Vect, `[V1 ⇉ V0]`.
///
/// Composition is determined by the other structure maps:
/// `z2 ∘ z1 = z2 + z1 − u(t(z1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoVectorSpace {
    pub name: String,
    pub v0_dim: usize,
    pub v1_dim: usize,
    /// `V1 → V0`.
    pub s: Mat,
    /// `V1 → V0`.
    pub t: Mat,
    /// `V0 → V1`.
    pub u: Mat,
}

impl TwoVectorSpace {
    /// Validates `s u = t u = id`.
    pub fn new(name: &str, s: Mat, t: Mat, u: Mat) -> Result<Self> {
        let (n0, n1) = (s.nrows(), s.ncols());
        if t.shape() != (n0, n1) || u.shape() != (n1, n0) {
            return Err(Error::Invalid(format!("2-vector space {name}: inconsistent structure map shapes")));
        }
        let id = Mat::identity(n0, n0);
        let res = (&s * &u - &id).norm().max((&t * &u - &id).norm());
        if res > 1e-12 {
            return Err(Error::Invalid(format!("2-vector space {name}: units are not sections ({res:.3e})")));
        }
        Ok(TwoVectorSpace { name: name.to_string(), v0_dim: n0, v1_dim: n1, s, t, u })
    }

    /// `[V ⇉ V]` with only identity arrows.
    pub fn discrete(n: usize) -> Self {
        let id = Mat::identity(n, n);
        Self::new("discrete", id.clone(), id.clone(), id).expect("discrete 2-vector space")
    }

    /// The pair groupoid of `R^n`; an arrow `(v, w)` runs from `v` to `v + w`.
    pub fn pair(n: usize) -> Self {
        let id = Mat::identity(n, n);
        let zero = Mat::zeros(n, n);
        let s = stack_h(&id, &zero);
        let t = stack_h(&id, &id);
        let u = stack_v(&id, &zero);
        Self::new("pair", s, t, u).expect("pair 2-vector space")
    }

    /// `L(𝔾) = [L(H) ⊕ L(G) ⇉ L(G)]` in generator coordinates `(Y, X)`.
    pub fn lie2(cm: &CrossedModule) -> Self {
        let kg = cm.g.algebra_dim();
        let kh = cm.h.algebra_dim();
        let id = Mat::identity(kg, kg);
        let s = stack_h(&Mat::zeros(kg, kh), &id);
        let t = stack_h(&cm.d_tau_matrix(), &id);
        let u = stack_v(&Mat::zeros(kh, kg), &id);
        Self::new("lie2", s, t, u).expect("Lie 2-algebra")
    }

    /// A named preset; `lie2` ignores `v0_dim` and `v1_dim` beyond a consistency check.
    pub fn preset(name: &str, v0_dim: usize, v1_dim: usize, cm: &CrossedModule) -> Result<Self> {
        let v = match name {
            "discrete" => Self::discrete(v0_dim),
            "pair" => Self::pair(v0_dim),
            "lie2" => Self::lie2(cm),
            _ => return Err(Error::Invalid(format!("unknown 2-vector space preset {name}"))),
        };
        if (v.v0_dim, v.v1_dim) != (v0_dim, v1_dim) {
            return Err(Error::Invalid(format!(
                "2-vector space {name} has dimensions ({}, {}), not ({v0_dim}, {v1_dim})",
                v.v0_dim, v.v1_dim
            )));
        }
        Ok(v)
    }

    pub fn source(&self, z: &Pt) -> Pt {
        &self.s * z
    }

    pub fn target(&self, z: &Pt) -> Pt {
        &self.t * z
    }

    pub fn unit(&self, v: &Pt) -> Pt {
        &self.u * v
    }

    pub fn compose(&self, z2: &Pt, z1: &Pt) -> Result<Pt> {
        let gap = (self.target(z1) - self.source(z2)).norm();
        if gap > 1e-9 * (1.0 + z1.norm() + z2.norm()) {
            return Err(Error::NotComposable(gap));
        }
        Ok(self.compose_unchecked(z2, z1))
    }

    pub fn compose_unchecked(&self, z2: &Pt, z1: &Pt) -> Pt {
        z2 + z1 - self.unit(&self.target(z1))
    }

    pub fn inverse(&self, z: &Pt) -> Pt {
        self.unit(&self.source(z)) + self.unit(&self.target(z)) - z
    }

    /// A random arrow with source `v`.
    pub fn arrow_from(&self, v: &Pt, rng: &mut dyn rand::RngCore) -> Pt {
        let r = random_pt(rng, self.v1_dim);
        self.unit(v) + &r - self.unit(&self.source(&r))
    }

    /// Groupoid axioms on sampled vectors: `source`, `target`, `left_unit`,
    /// `right_unit`, `associativity`, `inverse`.
    pub fn check_axioms(&self, n_samples: usize, seed: u64) -> ResidualReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = ResidualReport::new();
        for _ in 0..n_samples.max(1) {
            let z1 = random_pt(&mut rng, self.v1_dim);
            let z2 = self.arrow_from(&self.target(&z1), &mut rng);
            let z3 = self.arrow_from(&self.target(&z2), &mut rng);
            let c21 = self.compose_unchecked(&z2, &z1);
            rep.record("source", (self.source(&c21) - self.source(&z1)).norm());
            rep.record("target", (self.target(&c21) - self.target(&z2)).norm());
            rep.record("left_unit", (self.compose_unchecked(&self.unit(&self.target(&z1)), &z1) - &z1).norm());
            rep.record("right_unit", (self.compose_unchecked(&z1, &self.unit(&self.source(&z1))) - &z1).norm());
            let a = self.compose_unchecked(&z3, &c21);
            let b = self.compose_unchecked(&self.compose_unchecked(&z3, &z2), &z1);
            rep.record("associativity", (a - b).norm());
            let inv = self.inverse(&z1);
            rep.record("inverse", (self.compose_unchecked(&inv, &z1) - self.unit(&self.source(&z1))).norm());
        }
        rep
    }
}

fn stack_h(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

fn stack_v(a: &Mat, b: &Mat) -> Mat {
    let mut m = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

fn random_pt(rng: &mut dyn rand::RngCore, n: usize) -> Pt {
    Pt::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)))
}

/// Linear representations `ρ0` of `G` on `V0` and `ρ1` of `H ⋊ G` on `V1`.
#[derive(Clone)]
pub struct TwoGroupLinearAction {
    pub name: String,
    pub rho0: Arc<dyn Fn(&Mat) -> Mat + Send + Sync>,
    pub rho1: Arc<dyn Fn(&Arrow) -> Mat + Send + Sync>,
}

impl std::fmt::Debug for TwoGroupLinearAction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TwoGroupLinearAction").field("name", &self.name).finish()
    }
}

impl TwoGroupLinearAction {
    pub fn trivial(v: &TwoVectorSpace) -> Self {
        let (n0, n1) = (v.v0_dim, v.v1_dim);
        TwoGroupLinearAction {
            name: "trivial".into(),
            rho0: Arc::new(move |_| Mat::identity(n0, n0)),
            rho1: Arc::new(move |_| Mat::identity(n1, n1)),
        }
    }

    /// `Ad` on `L(𝔾)`, to be paired with [`TwoVectorSpace::lie2`].
    pub fn adjoint(cm: &Arc<CrossedModule>) -> Self {
        let (c0, c1) = (cm.clone(), cm.clone());
        TwoGroupLinearAction {
            name: "adjoint".into(),
            rho0: Arc::new(move |g| c0.g.adjoint_matrix(g)),
            rho1: Arc::new(move |a| c1.ad_inv_matrix(&c1.tensor_inverse(a))),
        }
    }

    /// The defining representation of `G ∈ {SO2, SO3}` on `V0 = R^n`.
    ///
    /// On the pair space an arrow `v → v + w` goes to `g v → τ(h) g (v + w)`;
    /// on the discrete space `ρ1(h, g) = g`, which is a functor only when τ is trivial.
    pub fn defining(cm: &Arc<CrossedModule>, v: &TwoVectorSpace) -> Result<Self> {
        let n = match cm.g.name() {
            "SO2" => 2,
            "SO3" => 3,
            other => return Err(Error::Invalid(format!("no defining representation for {other}"))),
        };
        if v.v0_dim != n {
            return Err(Error::Invalid(format!("defining representation needs V0 = R^{n}")));
        }
        let rho1: Arc<dyn Fn(&Arrow) -> Mat + Send + Sync> = match v.name.as_str() {
            "pair" => {
                let cm = cm.clone();
                Arc::new(move |a: &Arrow| {
                    let tg = cm.tau(&a.h) * &a.g;
                    let mut m = Mat::zeros(2 * n, 2 * n);
                    m.view_mut((0, 0), (n, n)).copy_from(&a.g);
                    m.view_mut((n, 0), (n, n)).copy_from(&(&tg - &a.g));
                    m.view_mut((n, n), (n, n)).copy_from(&tg);
                    m
                })
            }
            "discrete" => Arc::new(|a: &Arrow| a.g.clone()),
            other => return Err(Error::Invalid(format!("defining representation on a {other} 2-vector space"))),
        };
        Ok(TwoGroupLinearAction { name: "defining".into(), rho0: Arc::new(|g| g.clone()), rho1 })
    }

    /// A builtin action by name.
    pub fn by_name(name: &str, cm: &Arc<CrossedModule>, v: &TwoVectorSpace) -> Result<Self> {
        match name {
            "trivial" => Ok(Self::trivial(v)),
            "adjoint" => Ok(Self::adjoint(cm)),
            "defining" => Self::defining(cm, v),
            _ => Err(Error::Invalid(format!("unknown action {name}"))),
        }
    }
}

/// Sampled action axioms: `hom0`, `hom1`, `source`, `target`, `unit`, `compose`.
pub fn check_action(cm: &CrossedModule, act: &TwoGroupLinearAction, v: &TwoVectorSpace, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let (g1, g2) = (cm.g.random_element(&mut rng, 1.0), cm.g.random_element(&mut rng, 1.0));
        let r0 = (act.rho0)(&(&g1 * &g2));
        if r0.shape() != (v.v0_dim, v.v0_dim) {
            rep.record("hom0", f64::INFINITY);
            return rep;
        }
        rep.record("hom0", (r0 - (act.rho0)(&g1) * (act.rho0)(&g2)).norm());
        let (a1, a2) = (cm.random_arrow(&mut rng, 1.0), cm.random_arrow(&mut rng, 1.0));
        let r1 = (act.rho1)(&cm.arrow_tensor(&a1, &a2));
        if r1.shape() != (v.v1_dim, v.v1_dim) {
            rep.record("hom1", f64::INFINITY);
            return rep;
        }
        rep.record("hom1", (r1 - (act.rho1)(&a1) * (act.rho1)(&a2)).norm());

        let z = random_pt(&mut rng, v.v1_dim);
        let gz = (act.rho1)(&a1) * &z;
        let src = (act.rho0)(&cm.arrow_source(&a1)) * v.source(&z);
        rep.record("source", (v.source(&gz) - src).norm());
        let tgt = (act.rho0)(&cm.arrow_target(&a1)) * v.target(&z);
        rep.record("target", (v.target(&gz) - tgt).norm());
        let x = random_pt(&mut rng, v.v0_dim);
        let ux = (act.rho1)(&cm.arrow_unit(&g1)) * v.unit(&x);
        rep.record("unit", (ux - v.unit(&((act.rho0)(&g1) * &x))).norm());

        // φ2 ∘ φ1 acting on z2 ∘ z1 against the composite of the images.
        let b2 = Arrow::new(cm.h.random_element(&mut rng, 1.0), cm.arrow_target(&a1));
        let z2 = v.arrow_from(&v.target(&z), &mut rng);
        let lhs = (act.rho1)(&cm.arrow_compose_unchecked(&b2, &a1)) * v.compose_unchecked(&z2, &z);
        let rhs = v.compose_unchecked(&((act.rho1)(&b2) * &z2), &gz);
        rep.record("compose", (lhs - rhs).norm());
    }
    rep
}

/// A class `[p, v]` in `(E0 × V0)/G0`.
#[derive(Clone, Debug, PartialEq)]
pub struct VbPoint0 {
    pub p: E0Point,
    pub v: Pt,
}

/// A class `[δ, ζ]` in `(E1 × V1)/G1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VbPoint1 {
    pub d: E1Point,
    pub z: Pt,
}

/// The associated VB-groupoid `(E × V)/𝔾 → X`.
#[derive(Clone, Debug)]
pub struct AssociatedVb {
    pub bundle: Principal2Bundle,
    pub action: TwoGroupLinearAction,
    pub space: TwoVectorSpace,
}

/// Builds the associated VB-groupoid after validating the action.
pub fn associate(b: &Principal2Bundle, act: &TwoGroupLinearAction, v: &TwoVectorSpace) -> Result<AssociatedVb> {
    let rep = check_action(b.cm(), act, v, VALIDATION_SAMPLES, 0);
    let worst = rep.max();
    if !(worst < ACTION_TOL) {
        return Err(Error::ActionInvalid(worst));
    }
    Ok(AssociatedVb { bundle: b.clone(), action: act.clone(), space: v.clone() })
}

impl AssociatedVb {
    /// The representative at `(x, e)`.
    pub fn canonical0(&self, q: &VbPoint0) -> VbPoint0 {
        let b = &self.bundle;
        VbPoint0 { p: E0Point::new(q.p.x.clone(), b.g().identity()), v: (self.action.rho0)(&q.p.a) * &q.v }
    }

    /// The representative at `σ(γ)`.
    pub fn canonical1(&self, q: &VbPoint1) -> VbPoint1 {
        let b = &self.bundle;
        let phi = phi_of(b.cm(), &q.d);
        VbPoint1 { d: sigma(b, &q.d.gamma), z: (self.action.rho1)(&phi) * &q.z }
    }

    /// Fiber coordinates of a class over its base object.
    pub fn coords0(&self, q: &VbPoint0) -> Pt {
        self.canonical0(q).v
    }

    /// Fiber coordinates of a class over its base arrow.
    pub fn coords1(&self, q: &VbPoint1) -> Pt {
        self.canonical1(q).z
    }

    pub fn point0(&self, x: &Pt, v: Pt) -> VbPoint0 {
        VbPoint0 { p: E0Point::new(x.clone(), self.bundle.g().identity()), v }
    }

    pub fn point1(&self, gamma: &Pt, z: Pt) -> VbPoint1 {
        VbPoint1 { d: sigma(&self.bundle, gamma), z }
    }

    pub fn source(&self, q: &VbPoint1) -> VbPoint0 {
        VbPoint0 { p: self.bundle.source(&q.d), v: self.space.source(&q.z) }
    }

    pub fn target(&self, q: &VbPoint1) -> VbPoint0 {
        VbPoint0 { p: self.bundle.target(&q.d), v: self.space.target(&q.z) }
    }

    pub fn unit(&self, q: &VbPoint0) -> VbPoint1 {
        VbPoint1 { d: self.bundle.unit(&q.p), z: self.space.unit(&q.v) }
    }

    /// `[δ2, ζ2] ∘ [δ1, ζ1]`, re-representing the left factor so that the
    /// total-space arrows compose.
    pub fn compose(&self, q2: &VbPoint1, q1: &VbPoint1) -> Result<VbPoint1> {
        let b = &self.bundle;
        let cm = b.cm();
        let g = b.divide0(&b.source(&q2.d), &b.target(&q1.d))?;
        let phi = cm.arrow_unit(&g);
        let d2 = b.act1(&q2.d, &phi);
        let z2 = (self.action.rho1)(&cm.tensor_inverse(&phi)) * &q2.z;
        let d = b.compose(&d2, &q1.d)?;
        let z = self.space.compose(&z2, &q1.z)?;
        Ok(VbPoint1 { d, z })
    }

    /// Fiberwise sum of two classes over the same arrow.
    pub fn add1(&self, q1: &VbPoint1, q2: &VbPoint1) -> Result<VbPoint1> {
        let gap = (&q1.d.gamma - &q2.d.gamma).norm();
        if gap > crate::matlie::TOL_MATCH {
            return Err(Error::FiberMismatch(format!("sum over different arrows ({gap:.3e})")));
        }
        Ok(self.point1(&q1.d.gamma, self.coords1(q1) + self.coords1(q2)))
    }

    /// A random class over `gamma` whose source is `from`.
    fn arrow_over(&self, gamma: &Pt, from: &Pt, rng: &mut dyn rand::RngCore) -> VbPoint1 {
        // The canonical source representative is (sγ, e), so coordinates pass through.
        self.point1(gamma, self.space.arrow_from(from, rng))
    }

    /// Maximum residual of `(ζ3∘ζ1) + (ζ4∘ζ2) = (ζ3 + ζ4)∘(ζ1 + ζ2)` over sampled squares.
    pub fn check_interchange(&self, n_samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = self.bundle.base();
        let mut worst = 0.0f64;
        for _ in 0..n_samples.max(1) {
            let g1 = base.sample_mor(&mut rng);
            let g2 = base.sample_from(&base.target(&g1), &mut rng);
            let v1 = random_pt(&mut rng, self.space.v0_dim);
            let v2 = random_pt(&mut rng, self.space.v0_dim);
            let z1 = self.arrow_over(&g1, &v1, &mut rng);
            let z2 = self.arrow_over(&g1, &v2, &mut rng);
            let z3 = self.arrow_over(&g2, &self.coords0(&self.target(&z1)), &mut rng);
            let z4 = self.arrow_over(&g2, &self.coords0(&self.target(&z2)), &mut rng);
            let lhs = self.add1(&self.compose(&z3, &z1)?, &self.compose(&z4, &z2)?)?;
            let rhs = self.compose(&self.add1(&z3, &z4)?, &self.add1(&z1, &z2)?)?;
            worst = worst.max((self.coords1(&lhs) - self.coords1(&rhs)).norm());
        }
        Ok(worst)
    }

    /// The fiber 2-vector space over `x` in canonical coordinates.
    pub fn fiber(&self, x: &Pt) -> TwoVectorSpace {
        let unit_arrow = self.bundle.base().unit(x);
        let (n0, n1) = (self.space.v0_dim, self.space.v1_dim);
        let mut s = Mat::zeros(n0, n1);
        let mut t = Mat::zeros(n0, n1);
        let mut u = Mat::zeros(n1, n0);
        for j in 0..n1 {
            let q = self.point1(&unit_arrow, unit_vec(n1, j));
            s.set_column(j, &self.coords0(&self.source(&q)));
            t.set_column(j, &self.coords0(&self.target(&q)));
        }
        for j in 0..n0 {
            u.set_column(j, &self.coords1(&self.unit(&self.point0(x, unit_vec(n0, j)))));
        }
        TwoVectorSpace { name: format!("fiber at {x:?}"), v0_dim: n0, v1_dim: n1, s, t, u }
    }
}

fn unit_vec(n: usize, j: usize) -> Pt {
    let mut e = Pt::zeros(n);
    e[j] = 1.0;
    e
}

/// `C^V(γ, [p, v]) = [C(γ, p), 1_v]`.
#[derive(Clone, Debug)]
pub struct LinearCleavage {
    pub assoc: AssociatedVb,
    pub cleavage: QuasiConnection,
}

pub fn linear_cleavage(assoc: &AssociatedVb, c: &QuasiConnection) -> LinearCleavage {
    LinearCleavage { assoc: assoc.clone(), cleavage: c.clone() }
}

impl LinearCleavage {
    pub fn eval(&self, gamma: &Pt, q: &VbPoint0) -> VbPoint1 {
        VbPoint1 { d: self.cleavage.eval(gamma, &q.p), z: self.assoc.space.unit(&q.v) }
    }

    /// Residuals of flatness, `C^V(γ2∘γ1, ξ) = C^V(γ2, tC^V(γ1, ξ)) ∘ C^V(γ1, ξ)`,
    /// and unitality, `C^V(1_x, ξ) = 1_ξ`, on sampled data.
    pub fn check(&self, n_samples: usize, seed: u64) -> Result<ResidualReport> {
        let a = &self.assoc;
        let base = a.bundle.base();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rep = ResidualReport::new();
        for _ in 0..n_samples.max(1) {
            let g1 = base.sample_mor(&mut rng);
            let g2 = base.sample_from(&base.target(&g1), &mut rng);
            let p = a.bundle.sample_e0(&mut rng);
            let p = E0Point::new(base.source(&g1), p.a);
            let xi = VbPoint0 { p, v: random_pt(&mut rng, a.space.v0_dim) };
            let c1 = self.eval(&g1, &xi);
            let c2 = self.eval(&g2, &a.target(&c1));
            let lhs = self.eval(&base.compose(&g2, &g1), &xi);
            let rhs = a.compose(&c2, &c1)?;
            rep.record("flat", (a.coords1(&lhs) - a.coords1(&rhs)).norm());
            let unit = self.eval(&base.unit(&xi.p.x), &xi);
            rep.record("unital", (a.coords1(&unit) - a.coords1(&a.unit(&xi))).norm());
        }
        Ok(rep)
    }
}

/// The induced transport between fiber 2-vector spaces, as matrices in
/// canonical coordinates: `m0` on objects and `m1` on arrows over units.
#[derive(Clone, Debug)]
pub struct VbTransport {
    pub source: Pt,
    pub target: Pt,
    pub m0: Mat,
    pub m1: Mat,
}

impl VbTransport {
    pub fn apply0(&self, v: &Pt) -> Pt {
        &self.m0 * v
    }

    pub fn apply1(&self, z: &Pt) -> Pt {
        &self.m1 * z
    }

    /// Residuals of `m0 s = s′ m1`, `m0 t = t′ m1` and `m1 u = u′ m0`.
    pub fn intertwining(&self, assoc: &AssociatedVb) -> ResidualReport {
        let (fx, fy) = (assoc.fiber(&self.source), assoc.fiber(&self.target));
        let mut rep = ResidualReport::new();
        rep.record("source", (&self.m0 * &fx.s - &fy.s * &self.m1).norm());
        rep.record("target", (&self.m0 * &fx.t - &fy.t * &self.m1).norm());
        rep.record("unit", (&self.m1 * &fx.u - &fy.u * &self.m0).norm());
        rep
    }
}

/// `[p, v] ↦ [T(p), v]` and `[δ, ζ] ↦ [T(δ), ζ]` for the lazy transport `T` along `g`.
pub fn vb_transport(
    assoc: &AssociatedVb,
    c: &QuasiConnection,
    omega: &StrictConnection,
    g: &LazyPath,
) -> Result<VbTransport> {
    let b = &assoc.bundle;
    let base = b.base();
    let tr = lazy_transport(b, c, omega, g)?;
    let (x, y) = (g.source(base), g.target(base));
    let p = E0Point::new(x.clone(), b.g().identity());
    let q = tr.apply0(&p)?;
    let m0 = (assoc.action.rho0)(&q.a);
    let d = tr.apply1(&sigma(b, &base.unit(&x)))?;
    let m1 = (assoc.action.rho1)(&phi_of(b.cm(), &d));
    Ok(VbTransport { source: x, target: y, m0, m1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{self, decorated, decorated_cm1_pair};
    use crate::bundle2::make_ch;
    use crate::connection::trivial_connection;
    use crate::hpath::{make_lazy_path, SampledPath, DEFAULT_GRID, DEFAULT_PLATEAU};
    use crate::matlie::rot2;

    fn pt(v: &[f64]) -> Pt {
        Pt::from_row_slice(v)
    }

    fn cm1_defining() -> (Principal2Bundle, QuasiConnection, AssociatedVb) {
        let (b, c) = decorated_cm1_pair();
        let v = TwoVectorSpace::pair(2);
        let act = TwoGroupLinearAction::defining(b.cm_arc(), &v).unwrap();
        let assoc = associate(&b, &act, &v).unwrap();
        (b, c, assoc)
    }

    #[test]
    fn presets_are_categories() {
        let cm = CrossedModule::by_name("CM1:SO3").unwrap();
        for v in [TwoVectorSpace::discrete(3), TwoVectorSpace::pair(2), TwoVectorSpace::lie2(&cm)] {
            assert!(v.check_axioms(20, 1).max() < 1e-14, "{}", v.name);
        }
        assert_eq!(TwoVectorSpace::lie2(&cm).v1_dim, 6);
        assert!(TwoVectorSpace::preset("pair", 2, 3, &cm).is_err());
        assert!(TwoVectorSpace::new("bad", Mat::identity(2, 2), Mat::identity(2, 2) * 2.0, Mat::identity(2, 2)).is_err());
    }

    #[test]
    fn builtin_actions_validate() {
        for name in ["CM1", "CM1:SO3", "CM3", "CM4", "discrete:SO2"] {
            let cm = Arc::new(CrossedModule::by_name(name).unwrap());
            let v = TwoVectorSpace::lie2(&cm);
            let rep = check_action(&cm, &TwoGroupLinearAction::adjoint(&cm), &v, 20, 2);
            assert!(rep.max() < 1e-9, "{name}: {rep}");
            let rep = check_action(&cm, &TwoGroupLinearAction::trivial(&v), &v, 20, 2);
            assert!(rep.max() < 1e-12, "{name}: {rep}");
        }
        let cm = Arc::new(CrossedModule::by_name("CM1").unwrap());
        let pair = TwoVectorSpace::pair(2);
        let rep = check_action(&cm, &TwoGroupLinearAction::defining(&cm, &pair).unwrap(), &pair, 20, 3);
        assert!(rep.max() < 1e-12, "{rep}");
        let flat = Arc::new(CrossedModule::by_name("discrete:SO2").unwrap());
        let disc = TwoVectorSpace::discrete(2);
        let rep = check_action(&flat, &TwoGroupLinearAction::defining(&flat, &disc).unwrap(), &disc, 20, 3);
        assert!(rep.max() < 1e-12, "{rep}");
    }

    #[test]
    fn defining_action_on_discrete_space_needs_trivial_tau() {
        let (b, _) = decorated_cm1_pair();
        let v = TwoVectorSpace::discrete(2);
        let act = TwoGroupLinearAction::defining(b.cm_arc(), &v).unwrap();
        assert!(matches!(associate(&b, &act, &v), Err(Error::ActionInvalid(r)) if r > 0.1));
        let cm4 = Arc::new(CrossedModule::cm4());
        assert!(TwoGroupLinearAction::defining(&cm4, &TwoVectorSpace::pair(2)).is_err());
    }

    #[test]
    fn trivial_action_gives_product() {
        let (b, c) = decorated_cm1_pair();
        let v = TwoVectorSpace::pair(2);
        let assoc = associate(&b, &TwoGroupLinearAction::trivial(&v), &v).unwrap();
        let x = pt(&[0.4, -0.3]);
        assert_eq!(assoc.fiber(&x).s, v.s);
        assert_eq!(assoc.fiber(&x).t, v.t);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = b.sample_e0(&mut rng);
        let q = VbPoint0 { p: p.clone(), v: pt(&[1.0, 2.0]) };
        assert_eq!(assoc.coords0(&q), q.v);
        let lc = linear_cleavage(&assoc, &c);
        assert!(lc.check(20, 5).unwrap().max() < 1e-12);
    }

    #[test]
    fn interchange_law() {
        let (_, _, assoc) = cm1_defining();
        assert!(assoc.check_interchange(100, 6).unwrap() < 1e-10);
        let (b, _) = decorated("CM1:SO3", "pair:2", "trivial").unwrap();
        let v = TwoVectorSpace::lie2(b.cm());
        let assoc = associate(&b, &TwoGroupLinearAction::adjoint(b.cm_arc()), &v).unwrap();
        assert!(assoc.check_interchange(100, 7).unwrap() < 1e-10);
    }

    #[test]
    fn adjoint_fibers_are_the_lie_2_algebra() {
        let (b, _) = decorated("CM1:SO3", "pair:2", "twisted").unwrap();
        let v = TwoVectorSpace::lie2(b.cm());
        let assoc = associate(&b, &TwoGroupLinearAction::adjoint(b.cm_arc()), &v).unwrap();
        let fiber = assoc.fiber(&pt(&[0.7, 0.1]));
        for (m, n) in [(&fiber.s, &v.s), (&fiber.t, &v.t), (&fiber.u, &v.u)] {
            assert!((m - n).norm() < 1e-12);
        }
        // Changing the representative by g acts by Ad_g on the coordinates.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = b.g().random_element(&mut rng, 1.0);
        let x = b.cm().g.random_algebra(&mut rng, 1.0);
        let q = VbPoint0 { p: E0Point::new(pt(&[0.7, 0.1]), g.clone()), v: b.g().coords(&x) };
        let expected = b.g().coords(&(&g * &x * b.g().inverse(&g)));
        assert!((assoc.coords0(&q) - expected).norm() < 1e-12);
    }

    #[test]
    fn linear_cleavage_flatness_follows_the_cleavage() {
        let (b, c, assoc) = cm1_defining();
        let rep = linear_cleavage(&assoc, &c).check(50, 9).unwrap();
        assert!(rep.max() < 1e-10, "{rep}");

        let twist: crate::bundle2::TwistFn = Arc::new(|g: &Pt, _: &E0Point| rot2(0.3 * (g[0] - g[2]) + 0.5 * (g[1] - g[3]).powi(2)));
        let ch = make_ch(&b, &c, twist.clone()).unwrap();
        let lc = linear_cleavage(&assoc, &ch);
        let rep = lc.check(50, 9).unwrap();
        assert!(rep.get("unital").unwrap() < 1e-12);
        assert!(rep.get("flat").unwrap() > 1e-3);

        // Direct evaluation of the defect: C_H(γ2∘γ1) differs from the composite by
        // ψ = (H(γ2∘γ1) H(γ1)⁻¹ H(γ2)⁻¹, e), acting on 1_v through ρ1.
        let base = b.base();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let g1 = base.sample_mor(&mut rng);
            let g2 = base.sample_from(&base.target(&g1), &mut rng);
            let g21 = base.compose(&g2, &g1);
            let xi = assoc.point0(&base.source(&g1), random_pt(&mut rng, 2));
            let c1 = lc.eval(&g1, &xi);
            let lhs = lc.eval(&g21, &xi);
            let rhs = assoc.compose(&lc.eval(&g2, &assoc.target(&c1)), &c1).unwrap();
            let defect = (assoc.coords1(&lhs) - assoc.coords1(&rhs)).norm();
            let p = &xi.p;
            let h = twist(&g21, p) * b.cm().h.inverse(&twist(&g1, p)) * b.cm().h.inverse(&twist(&g2, p));
            let psi = Arrow::new(h, b.g().identity());
            let uv = assoc.space.unit(&xi.v);
            let direct = ((assoc.action.rho1)(&psi) * &uv - &uv).norm();
            assert!((defect - direct).abs() < 1e-10, "{defect} vs {direct}");
        }
    }

    #[test]
    fn transport_is_rho_of_the_holonomy() {
        let (b, c) = decorated("CM1", "discrete:2", "trivial").unwrap();
        let strength = 0.9;
        let omega = trivial_connection(&b, builtins::potential("constant", b.g(), strength).unwrap()).unwrap();
        let v = TwoVectorSpace::pair(2);
        let assoc = associate(&b, &TwoGroupLinearAction::defining(b.cm_arc(), &v).unwrap(), &v).unwrap();
        let (x, y) = (pt(&[-0.4, 0.2]), pt(&[0.8, 0.5]));
        let alpha = SampledPath::from_fn(|s| &x * (1.0 - s) + &y * s, DEFAULT_GRID, DEFAULT_PLATEAU).unwrap();
        let base = b.base();
        let g = make_lazy_path(base, vec![base.unit(&x), base.unit(&y)], vec![alpha]).unwrap();
        let tr = vb_transport(&assoc, &c, &omega, &g).unwrap();

        let lazy = lazy_transport(&b, &c, &omega, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let a = b.g().random_element(&mut rng, 1.0);
            let q = lazy.apply0(&E0Point::new(x.clone(), a.clone())).unwrap();
            let hol = &q.a * b.g().inverse(&a);
            assert!((&tr.m0 - (assoc.action.rho0)(&hol)).norm() < 1e-9);
        }
        let closed = rot2(-strength * (y[0] - x[0]));
        assert!((&tr.m0 - closed).norm() < 1e-6);
        assert!(tr.intertwining(&assoc).max() < 1e-9);
        let (v1, v2) = (pt(&[0.3, -1.0]), pt(&[2.0, 0.5]));
        assert!((tr.apply0(&(&v1 + &v2)) - tr.apply0(&v1) - tr.apply0(&v2)).norm() < 1e-14);
    }

    #[test]
    fn trivial_action_transport_is_identity() {
        let (b, c, omega) = builtins::classical_reduction(0.7);
        let v = TwoVectorSpace::discrete(2);
        let assoc = associate(&b, &TwoGroupLinearAction::trivial(&v), &v).unwrap();
        let (x, y) = (pt(&[0.0, 0.0]), pt(&[1.0, 1.0]));
        let alpha = SampledPath::from_fn(|s| &x * (1.0 - s) + &y * s, DEFAULT_GRID, DEFAULT_PLATEAU).unwrap();
        let base = b.base();
        let g = make_lazy_path(base, vec![base.unit(&x), base.unit(&y)], vec![alpha]).unwrap();
        let tr = vb_transport(&assoc, &c, &omega, &g).unwrap();
        assert_eq!(tr.m0, Mat::identity(2, 2));
        assert_eq!(tr.m1, Mat::identity(2, 2));
    }
}
