//! Lie crossed modules (G, H, tau, alpha) and the Lie 2-group [H x_alpha G => G].
//!
//! Arrows of the 2-group are pairs (h, g) with source g and target tau(h) g.
//! The semidirect product H x_alpha G is also used as the structure group of
//! morphism spaces, so this module carries the matching Lie-algebra helpers.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matlie::{rot2, Mat, MatrixGroup, Pt, TOL_MATCH};
use crate::report::ResidualReport;

pub type TauFn = Arc<dyn Fn(&Mat) -> Mat + Send + Sync>;
pub type AlphaFn = Arc<dyn Fn(&Mat, &Mat) -> Mat + Send + Sync>;
/// Distance of a G element from the image subgroup tau(H).
pub type TauDistanceFn = Arc<dyn Fn(&Mat) -> f64 + Send + Sync>;
/// Derivative of alpha along a curve: (g, dg, h, dh) -> d/dt alpha(g(t), h(t)).
pub type AlphaTangentFn = Arc<dyn Fn(&Mat, &Mat, &Mat, &Mat) -> Mat + Send + Sync>;
/// Derivative of tau along a curve: (h, dh) -> d/dt tau(h(t)).
pub type TauTangentFn = Arc<dyn Fn(&Mat, &Mat) -> Mat + Send + Sync>;

/// Default distance below which a G element counts as a member of tau(H).
pub const TAU_H_TOL: f64 = 1e-6;

const FD_STEP: f64 = 1e-5;

/// A Lie crossed module over matrix groups.
#[derive(Clone)]
pub struct CrossedModule {
    name: String,
    pub g: MatrixGroup,
    pub h: MatrixGroup,
    tau: TauFn,
    alpha: AlphaFn,
    tau_h_distance: TauDistanceFn,
    alpha_tangent: Option<AlphaTangentFn>,
    tau_tangent: Option<TauTangentFn>,
    membership_tol: f64,
}

impl fmt::Debug for CrossedModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CrossedModule")
            .field("name", &self.name)
            .field("G", &self.g.name())
            .field("H", &self.h.name())
            .finish()
    }
}

/// An arrow (h, g) of the 2-group, i.e. an element of H x_alpha G.
#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    pub h: Mat,
    pub g: Mat,
}

impl Arrow {
    pub fn new(h: Mat, g: Mat) -> Self {
        Arrow { h, g }
    }

    /// Frobenius distance in both components.
    pub fn dist(&self, other: &Arrow) -> f64 {
        (&self.h - &other.h).norm().max((&self.g - &other.g).norm())
    }
}

/// Element (Y, X) of the Lie algebra L(H) x L(G) of the semidirect product.
#[derive(Clone, Debug, PartialEq)]
pub struct Alg2 {
    pub y: Mat,
    pub x: Mat,
}

impl Alg2 {
    pub fn new(y: Mat, x: Mat) -> Self {
        Alg2 { y, x }
    }

    pub fn add(&self, o: &Alg2) -> Alg2 {
        Alg2::new(&self.y + &o.y, &self.x + &o.x)
    }

    pub fn scale(&self, s: f64) -> Alg2 {
        Alg2::new(&self.y * s, &self.x * s)
    }

    pub fn dist(&self, o: &Alg2) -> f64 {
        (&self.y - &o.y).norm().max((&self.x - &o.x).norm())
    }
}

/// Tangent vector (dh, dg) at an arrow, as matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrowTangent {
    pub dh: Mat,
    pub dg: Mat,
}

impl CrossedModule {
    /// Builds a crossed module from callables. Use the `with_*` methods to attach
    /// analytic derivatives; otherwise central differences are used.
    pub fn new(
        name: &str,
        g: MatrixGroup,
        h: MatrixGroup,
        tau: TauFn,
        alpha: AlphaFn,
        tau_h_distance: TauDistanceFn,
    ) -> Self {
        CrossedModule {
            name: name.to_string(),
            g,
            h,
            tau,
            alpha,
            tau_h_distance,
            alpha_tangent: None,
            tau_tangent: None,
            membership_tol: TAU_H_TOL,
        }
    }

    pub fn with_alpha_tangent(mut self, f: AlphaTangentFn) -> Self {
        self.alpha_tangent = Some(f);
        self
    }

    pub fn with_tau_tangent(mut self, f: TauTangentFn) -> Self {
        self.tau_tangent = Some(f);
        self
    }

    pub fn with_membership_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    /// The conjugation module (G, G, id, conj).
    pub fn conjugation(g: MatrixGroup) -> Self {
        let name = if g.name() == "SO2" {
            "CM1".to_string()
        } else {
            format!("CM1:{}", g.name())
        };
        let gg = g.clone();
        let alpha: AlphaFn = Arc::new(move |a: &Mat, h: &Mat| a * h * gg.inverse(a));
        let gg = g.clone();
        let alpha_t: AlphaTangentFn = Arc::new(move |a: &Mat, da: &Mat, h: &Mat, dh: &Mat| {
            let ai = gg.inverse(a);
            da * h * &ai + a * dh * &ai - a * h * &ai * da * &ai
        });
        CrossedModule::new(
            &name,
            g.clone(),
            g,
            Arc::new(|h: &Mat| h.clone()),
            alpha,
            Arc::new(|_: &Mat| 0.0),
        )
        .with_alpha_tangent(alpha_t)
        .with_tau_tangent(Arc::new(|_: &Mat, dh: &Mat| dh.clone()))
    }

    /// CM2 = ({e}, R, trivial, id).
    pub fn cm2() -> Self {
        let g = MatrixGroup::trivial();
        let h = MatrixGroup::translations(1);
        CrossedModule::new(
            "CM2",
            g,
            h,
            Arc::new(|_: &Mat| Mat::identity(1, 1)),
            Arc::new(|_: &Mat, h: &Mat| h.clone()),
            Arc::new(|g: &Mat| (g - Mat::identity(1, 1)).norm()),
        )
        .with_alpha_tangent(trivial_alpha_tangent())
        .with_tau_tangent(Arc::new(|_: &Mat, _: &Mat| Mat::zeros(1, 1)))
    }

    /// CM3 = (SO(2), R, x -> R(x), trivial action).
    pub fn cm3() -> Self {
        CrossedModule::new(
            "CM3",
            MatrixGroup::so2(),
            MatrixGroup::translations(1),
            Arc::new(|h: &Mat| rot2(h[(0, 1)])),
            Arc::new(|_: &Mat, h: &Mat| h.clone()),
            Arc::new(|_: &Mat| 0.0),
        )
        .with_alpha_tangent(trivial_alpha_tangent())
        .with_tau_tangent(Arc::new(|h: &Mat, dh: &Mat| {
            crate::matlie::j2() * rot2(h[(0, 1)]) * dh[(0, 1)]
        }))
    }

    /// CM4 = (R^2, R, x -> (x, 0), trivial action).
    pub fn cm4() -> Self {
        CrossedModule::new(
            "CM4",
            MatrixGroup::translations(2),
            MatrixGroup::translations(1),
            Arc::new(|h: &Mat| {
                let mut m = Mat::identity(3, 3);
                m[(0, 2)] = h[(0, 1)];
                m
            }),
            Arc::new(|_: &Mat, h: &Mat| h.clone()),
            Arc::new(|g: &Mat| g[(1, 2)].abs()),
        )
        .with_alpha_tangent(trivial_alpha_tangent())
        .with_tau_tangent(Arc::new(|_: &Mat, dh: &Mat| {
            let mut m = Mat::zeros(3, 3);
            m[(0, 2)] = dh[(0, 1)];
            m
        }))
    }

    /// The discrete 2-group [G => G], i.e. (G, {e}, trivial, trivial).
    pub fn discrete(g: MatrixGroup) -> Self {
        let name = format!("discrete:{}", g.name());
        let n = g.dim();
        CrossedModule::new(
            &name,
            g,
            MatrixGroup::trivial(),
            Arc::new(move |_: &Mat| Mat::identity(n, n)),
            Arc::new(|_: &Mat, h: &Mat| h.clone()),
            Arc::new(move |a: &Mat| (a - Mat::identity(n, n)).norm()),
        )
        .with_alpha_tangent(trivial_alpha_tangent())
        .with_tau_tangent(Arc::new(move |_: &Mat, _: &Mat| Mat::zeros(n, n)))
    }

    /// The conjugation module over SO(3) with alpha replaced by (g, h) -> h g,
    /// which violates the Peiffer identities.
    pub fn corrupted() -> Self {
        let g = MatrixGroup::so3();
        CrossedModule::new(
            "corrupt:CM1",
            g.clone(),
            g,
            Arc::new(|h: &Mat| h.clone()),
            Arc::new(|a: &Mat, h: &Mat| h * a),
            Arc::new(|_: &Mat| 0.0),
        )
        .with_alpha_tangent(Arc::new(|a: &Mat, da: &Mat, h: &Mat, dh: &Mat| dh * a + h * da))
        .with_tau_tangent(Arc::new(|_: &Mat, dh: &Mat| dh.clone()))
    }

    /// Looks a builtin crossed module up by its scenario identifier.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "CM1" => Ok(Self::conjugation(MatrixGroup::so2())),
            "CM1:SO3" => Ok(Self::conjugation(MatrixGroup::so3())),
            "CM2" => Ok(Self::cm2()),
            "CM3" => Ok(Self::cm3()),
            "CM4" => Ok(Self::cm4()),
            "corrupt:CM1" => Ok(Self::corrupted()),
            _ => {
                if let Some(g) = name.strip_prefix("discrete:") {
                    Ok(Self::discrete(MatrixGroup::by_name(g)?))
                } else {
                    Err(Error::Invalid(format!("unknown crossed module {name}")))
                }
            }
        }
    }

    /// Identifiers accepted by [`Self::by_name`].
    pub fn builtin_names() -> Vec<&'static str> {
        vec![
            "CM1",
            "CM1:SO3",
            "CM2",
            "CM3",
            "CM4",
            "discrete:SO2",
            "discrete:SO3",
            "corrupt:CM1",
        ]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tau(&self, h: &Mat) -> Mat {
        (self.tau)(h)
    }

    pub fn alpha(&self, g: &Mat, h: &Mat) -> Mat {
        (self.alpha)(g, h)
    }

    /// Distance of `g` from tau(H) under the builtin membership metric.
    pub fn tau_h_distance(&self, g: &Mat) -> f64 {
        (self.tau_h_distance)(g)
    }

    /// Analytic membership test for the normal subgroup tau(H).
    pub fn tau_h_member(&self, g: &Mat) -> bool {
        self.tau_h_distance(g) < self.membership_tol
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    /// d/dt alpha(g(t), h(t)) for a curve with velocity (dg, dh).
    pub fn alpha_tangent(&self, g: &Mat, dg: &Mat, h: &Mat, dh: &Mat) -> Mat {
        if let Some(f) = &self.alpha_tangent {
            return f(g, dg, h, dh);
        }
        let scale = (dg.norm().powi(2) + dh.norm().powi(2)).sqrt();
        if scale == 0.0 {
            return Mat::zeros(h.nrows(), h.ncols());
        }
        let e = FD_STEP / scale;
        let plus = self.alpha(&(g + dg * e), &(h + dh * e));
        let minus = self.alpha(&(g - dg * e), &(h - dh * e));
        (plus - minus) / (2.0 * e)
    }

    /// d/dt tau(h(t)) for a curve with velocity dh.
    pub fn tau_tangent(&self, h: &Mat, dh: &Mat) -> Mat {
        if let Some(f) = &self.tau_tangent {
            return f(h, dh);
        }
        let scale = dh.norm();
        if scale == 0.0 {
            return self.g.zero_algebra();
        }
        let e = FD_STEP / scale;
        (self.tau(&(h + dh * e)) - self.tau(&(h - dh * e))) / (2.0 * e)
    }

    /// Differential of alpha_g at the identity of H.
    pub fn d_alpha_g(&self, g: &Mat, y: &Mat) -> Mat {
        self.alpha_tangent(g, &self.g.zero_algebra(), &self.h.identity(), y)
    }

    /// Derivative of g -> alpha(g, h) at g = e in direction x.
    pub fn d_alpha_x(&self, x: &Mat, h: &Mat) -> Mat {
        self.alpha_tangent(&self.g.identity(), x, h, &self.h.zero_algebra())
    }

    /// Differential of tau at the identity.
    pub fn d_tau(&self, y: &Mat) -> Mat {
        self.tau_tangent(&self.h.identity(), y)
    }

    /// Matrix of d tau in generator coordinates (dim L(G) x dim L(H)).
    pub fn d_tau_matrix(&self) -> Mat {
        let m = self.g.algebra_dim();
        let k = self.h.algebra_dim();
        let mut t = Mat::zeros(m, k);
        for (j, y) in self.h.generators().iter().enumerate() {
            t.set_column(j, &self.g.coords(&self.d_tau(y)));
        }
        t
    }

    /// Least-squares solution Y of d tau(Y) = d, with the residual norm.
    pub fn solve_d_tau(&self, d: &Mat) -> (Mat, f64) {
        let k = self.h.algebra_dim();
        if k == 0 {
            return (self.h.zero_algebra(), d.norm());
        }
        let t = self.d_tau_matrix();
        let pinv = t.clone().pseudo_inverse(1e-12).expect("pseudo-inverse");
        let dc = self.g.coords(d);
        let yc: Pt = &pinv * &dc;
        let y = self.h.from_coords(&yc);
        let res = (self.d_tau(&y) - d).norm();
        (y, res)
    }

    // --- 2-group arrows ---

    pub fn arrow_source(&self, a: &Arrow) -> Mat {
        a.g.clone()
    }

    pub fn arrow_target(&self, a: &Arrow) -> Mat {
        self.tau(&a.h) * &a.g
    }

    /// Unit arrow 1_g = (e, g).
    pub fn arrow_unit(&self, g: &Mat) -> Arrow {
        Arrow::new(self.h.identity(), g.clone())
    }

    /// Identity (e, e) of the group H x_alpha G.
    pub fn arrow_identity(&self) -> Arrow {
        Arrow::new(self.h.identity(), self.g.identity())
    }

    /// Vertical composition (h2, g2) o (h1, g1) = (h2 h1, g1).
    pub fn arrow_compose(&self, a2: &Arrow, a1: &Arrow) -> Result<Arrow> {
        let mismatch = (self.arrow_source(a2) - self.arrow_target(a1)).norm();
        if mismatch > TOL_MATCH {
            return Err(Error::NotComposable(mismatch));
        }
        Ok(self.arrow_compose_unchecked(a2, a1))
    }

    pub fn arrow_compose_unchecked(&self, a2: &Arrow, a1: &Arrow) -> Arrow {
        Arrow::new(&a2.h * &a1.h, a1.g.clone())
    }

    /// Inverse for vertical composition, (h^-1, tau(h) g).
    pub fn arrow_inverse(&self, a: &Arrow) -> Arrow {
        Arrow::new(self.h.inverse(&a.h), self.arrow_target(a))
    }

    /// Group product (h2 alpha(g2, h1), g2 g1).
    pub fn arrow_tensor(&self, a2: &Arrow, a1: &Arrow) -> Arrow {
        Arrow::new(&a2.h * self.alpha(&a2.g, &a1.h), &a2.g * &a1.g)
    }

    /// Group inverse (alpha(g^-1, h^-1), g^-1).
    pub fn tensor_inverse(&self, a: &Arrow) -> Arrow {
        let gi = self.g.inverse(&a.g);
        Arrow::new(self.alpha(&gi, &self.h.inverse(&a.h)), gi)
    }

    /// Snaps both components onto their groups.
    pub fn project_arrow(&self, a: &Arrow) -> Arrow {
        Arrow::new(self.h.project(&a.h), self.g.project(&a.g))
    }

    // --- semidirect Lie algebra ---

    /// Ad_{phi^-1} v for phi = (h, g) and v = (Y, X).
    pub fn ad_inv(&self, phi: &Arrow, v: &Alg2) -> Alg2 {
        let hi = self.h.inverse(&phi.h);
        let gi = self.g.inverse(&phi.g);
        let inner = &hi * &v.y * &phi.h + &hi * self.d_alpha_x(&v.x, &phi.h);
        Alg2::new(self.d_alpha_g(&gi, &inner), &gi * &v.x * &phi.g)
    }

    /// Matrix of Ad_{phi^-1} on L(H) + L(G) in generator coordinates.
    pub fn ad_inv_matrix(&self, phi: &Arrow) -> Mat {
        let kh = self.h.algebra_dim();
        let kg = self.g.algebra_dim();
        let mut m = Mat::zeros(kh + kg, kh + kg);
        for j in 0..kh + kg {
            let v = if j < kh {
                Alg2::new(self.h.generators()[j].clone(), self.g.zero_algebra())
            } else {
                Alg2::new(self.h.zero_algebra(), self.g.generators()[j - kh].clone())
            };
            m.set_column(j, &self.alg2_coords(&self.ad_inv(phi, &v)));
        }
        m
    }

    /// Concatenated generator coordinates of (Y, X).
    pub fn alg2_coords(&self, v: &Alg2) -> Pt {
        let cy = self.h.coords(&v.y);
        let cx = self.g.coords(&v.x);
        Pt::from_iterator(cy.len() + cx.len(), cy.iter().chain(cx.iter()).copied())
    }

    pub fn alg2_from_coords(&self, c: &Pt) -> Alg2 {
        let kh = self.h.algebra_dim();
        let cy = Pt::from_iterator(kh, c.iter().take(kh).copied());
        let cx = Pt::from_iterator(c.len() - kh, c.iter().skip(kh).copied());
        Alg2::new(self.h.from_coords(&cy), self.g.from_coords(&cx))
    }

    /// Left Maurer-Cartan form phi^-1 phidot of the semidirect product.
    pub fn left_mc(&self, phi: &Arrow, t: &ArrowTangent) -> Alg2 {
        let hi = self.h.inverse(&phi.h);
        let gi = self.g.inverse(&phi.g);
        Alg2::new(self.d_alpha_g(&gi, &(hi * &t.dh)), gi * &t.dg)
    }

    /// Tangent of eps -> exp(eps v) phi at eps = 0.
    pub fn right_translate(&self, v: &Alg2, phi: &Arrow) -> ArrowTangent {
        ArrowTangent {
            dh: &v.y * &phi.h + self.d_alpha_x(&v.x, &phi.h),
            dg: &v.x * &phi.g,
        }
    }

    /// Tangent of eps -> phi exp(eps v) at eps = 0.
    pub fn left_translate(&self, phi: &Arrow, v: &Alg2) -> ArrowTangent {
        ArrowTangent {
            dh: &phi.h * self.d_alpha_g(&phi.g, &v.y),
            dg: &phi.g * &v.x,
        }
    }

    /// Source map of L(G1) => L(G0): (Y, X) -> X.
    pub fn alg_source(&self, v: &Alg2) -> Mat {
        v.x.clone()
    }

    /// Target map of L(G1) => L(G0): (Y, X) -> d tau(Y) + X.
    pub fn alg_target(&self, v: &Alg2) -> Mat {
        self.d_tau(&v.y) + &v.x
    }

    pub fn alg_unit(&self, x: &Mat) -> Alg2 {
        Alg2::new(self.h.zero_algebra(), x.clone())
    }

    /// Composition (Y2, X2) o (Y1, X1) = (Y2 + Y1, X1).
    pub fn alg_compose(&self, v2: &Alg2, v1: &Alg2) -> Alg2 {
        Alg2::new(&v2.y + &v1.y, v1.x.clone())
    }

    /// Random arrow with components exp of coordinates in [-scale, scale].
    pub fn random_arrow<R: rand::Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Arrow {
        Arrow::new(
            self.h.random_element(rng, scale),
            self.g.random_element(rng, scale),
        )
    }
}

fn trivial_alpha_tangent() -> AlphaTangentFn {
    Arc::new(|_: &Mat, _: &Mat, _: &Mat, dh: &Mat| dh.clone())
}

/// Samples the five crossed-module invariants and reports the maximum Frobenius
/// residual of each: `tau_hom`, `peiffer_1`, `peiffer_2`, `alpha_hom`, `tau_membership`.
pub fn check_peiffer(cm: &CrossedModule, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for label in ["tau_hom", "peiffer_1", "peiffer_2", "alpha_hom", "tau_membership"] {
        rep.record(label, 0.0);
    }
    for _ in 0..n_samples.max(1) {
        let g = cm.g.random_element(&mut rng, 1.0);
        let h1 = cm.h.random_element(&mut rng, 1.0);
        let h2 = cm.h.random_element(&mut rng, 1.0);
        let gi = cm.g.inverse(&g);
        let h1i = cm.h.inverse(&h1);

        let r = (cm.tau(&(&h1 * &h2)) - cm.tau(&h1) * cm.tau(&h2)).norm();
        rep.record("tau_hom", r);
        let r = (cm.tau(&cm.alpha(&g, &h1)) - &g * cm.tau(&h1) * &gi).norm();
        rep.record("peiffer_1", r);
        let r = (cm.alpha(&cm.tau(&h1), &h2) - &h1 * &h2 * &h1i).norm();
        rep.record("peiffer_2", r);
        let r = (cm.alpha(&g, &(&h1 * &h2)) - cm.alpha(&g, &h1) * cm.alpha(&g, &h2)).norm();
        rep.record("alpha_hom", r);
        rep.record("tau_membership", cm.tau_h_distance(&cm.tau(&h1)));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlie::j2;

    #[test]
    fn builtins_satisfy_peiffer() {
        for name in ["CM1", "CM1:SO3", "CM2", "CM3", "CM4", "discrete:SO3"] {
            let cm = CrossedModule::by_name(name).unwrap();
            let rep = check_peiffer(&cm, 100, 1);
            assert!(rep.max() < 1e-12, "{name}: {rep}");
        }
    }

    #[test]
    fn corrupted_alpha_is_flagged() {
        let rep = check_peiffer(&CrossedModule::corrupted(), 100, 1);
        assert!(rep.get("peiffer_1").unwrap() > 0.1);
    }

    #[test]
    fn compose_on_so2_adds_angles() {
        let cm = CrossedModule::conjugation(MatrixGroup::so2());
        let g1 = rot2(0.2);
        let a1 = Arrow::new(rot2(0.5), g1.clone());
        let a2 = Arrow::new(rot2(0.3), rot2(0.5) * &g1);
        let c = cm.arrow_compose(&a2, &a1).unwrap();
        assert!(c.dist(&Arrow::new(rot2(0.8), g1)) < 1e-14);
        let bad = Arrow::new(rot2(0.3), rot2(1.0));
        assert!(matches!(cm.arrow_compose(&bad, &a1), Err(Error::NotComposable(_))));
    }

    #[test]
    fn unit_and_inverse_laws() {
        let cm = CrossedModule::conjugation(MatrixGroup::so3());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = cm.random_arrow(&mut rng, 1.0);
        let left = cm.arrow_compose(&cm.arrow_unit(&cm.arrow_target(&a)), &a).unwrap();
        assert!(left.dist(&a) < 1e-14);
        let inv = cm.arrow_compose(&cm.arrow_inverse(&a), &a).unwrap();
        assert!(inv.dist(&cm.arrow_unit(&a.g)) < 1e-12);
    }

    #[test]
    fn tensor_abelian_adds() {
        let cm = CrossedModule::cm3();
        let mut x1 = Mat::identity(2, 2);
        x1[(0, 1)] = 0.4;
        let mut x2 = Mat::identity(2, 2);
        x2[(0, 1)] = -1.1;
        let t = cm.arrow_tensor(&Arrow::new(x2, rot2(0.3)), &Arrow::new(x1, rot2(0.2)));
        assert!((t.h[(0, 1)] + 0.7).abs() < 1e-15);
        assert!((&t.g - rot2(0.5)).norm() < 1e-15);
    }

    #[test]
    fn tensor_inverse_of_conjugation() {
        let cm = CrossedModule::conjugation(MatrixGroup::so3());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = cm.random_arrow(&mut rng, 1.0);
        let gi = a.g.transpose();
        let want = Arrow::new(&gi * a.h.transpose() * &a.g, gi);
        assert!(cm.tensor_inverse(&a).dist(&want) < 1e-13);
        let unit = cm.arrow_unit(&cm.g.identity());
        assert!(cm.arrow_tensor(&a, &cm.tensor_inverse(&a)).dist(&unit) < 1e-12);
        let u = cm.tensor_inverse(&cm.arrow_unit(&a.g));
        assert!(u.dist(&Arrow::new(cm.h.identity(), a.g.transpose())) < 1e-14);
    }

    #[test]
    fn semidirect_adjoint_matches_finite_difference() {
        let cm = CrossedModule::conjugation(MatrixGroup::so3());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let phi = cm.random_arrow(&mut rng, 1.0);
        let v = Alg2::new(cm.h.random_algebra(&mut rng, 1.0), cm.g.random_algebra(&mut rng, 1.0));
        let e = 1e-5;
        let curve = |s: f64| {
            let c = Arrow::new(cm.h.exp(&(&v.y * s)).unwrap(), cm.g.exp(&(&v.x * s)).unwrap());
            cm.arrow_tensor(&cm.arrow_tensor(&cm.tensor_inverse(&phi), &c), &phi)
        };
        let (p, m) = (curve(e), curve(-e));
        let fd = Alg2::new((p.h - m.h) / (2.0 * e), (p.g - m.g) / (2.0 * e));
        assert!(cm.ad_inv(&phi, &v).dist(&fd) < 1e-9);
    }

    #[test]
    fn d_tau_solve_for_cm3_and_cm4() {
        let cm = CrossedModule::cm3();
        let (y, res) = cm.solve_d_tau(&(j2() * 0.7));
        assert!(res < 1e-14);
        assert!((y[(0, 1)] - 0.7).abs() < 1e-14);
        let cm = CrossedModule::cm4();
        let d = cm.g.from_coords(&Pt::from_vec(vec![0.3, 0.5]));
        let (_, res) = cm.solve_d_tau(&d);
        assert!((res - 0.5).abs() < 1e-14);
    }
}
