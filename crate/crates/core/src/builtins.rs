//! Named building blocks: cocycles, potentials, pseudo data and ready-made
//! bundles, shared by the scenario runner and the test suites.

use std::sync::Arc;

use crate::bundle2::{
    decorate, CocycleFn, E0Point, HmFn, HuFn, PrincipalGBundleOverGroupoid, PseudoPrincipalBundle, QuasiConnection,
    Principal2Bundle,
};
use crate::connection::{trivial_connection, PotentialFn, StrictConnection};
use crate::crossed_module::CrossedModule;
use crate::error::{Error, Result};
use crate::groupoid::{self, Chart, GroupoidPresentation};
use crate::matlie::{Mat, MatrixGroup, Pt};

pub const COCYCLES: &[&str] = &["trivial", "gauge", "twisted", "action"];
pub const POTENTIALS: &[&str] = &["zero", "constant", "gauge", "swirl", "angular"];
pub const PSEUDO_PRESETS: &[&str] = &["coherent_cm4", "associator_cm2"];
pub const GROUPS: &[&str] = &["SO2", "SO3", "R^n", "trivial"];
pub const GROUPOIDS: &[&str] = &["pair:n", "discrete:n", "action:SO2"];
pub const ACTIONS: &[&str] = &["trivial", "adjoint", "defining"];

/// `θ(x) = 0.6 x0 + 0.2 x1²`, the gauge function behind the "gauge" pair.
fn gauge_fn(x: &Pt) -> f64 {
    0.6 * x[0] + 0.2 * x.get(1).map_or(0.0, |v| v * v)
}

fn twist_fn(x: &Pt) -> f64 {
    0.7 * x[0] - 0.3 * x.get(1).copied().unwrap_or(0.0)
}

fn first_generator(g: &MatrixGroup) -> Result<Mat> {
    g.generators()
        .first()
        .cloned()
        .ok_or_else(|| Error::Invalid(format!("group {} has no generators", g.name())))
}

fn one_parameter(g: &MatrixGroup) -> Result<impl Fn(f64) -> Mat + Send + Sync + Clone + 'static> {
    let e1 = first_generator(g)?;
    let g = g.clone();
    Ok(move |s: f64| g.exp(&(&e1 * s)).expect("exp along a generator"))
}

fn pair_halves(base: &GroupoidPresentation, name: &str) -> Result<usize> {
    if !base.name().starts_with("pair:") {
        return Err(Error::Invalid(format!("cocycle {name} needs a pair groupoid, got {}", base.name())));
    }
    Ok(base.obj_dim)
}

/// A named cocycle `c: X1 -> G`.
///
/// - `trivial`: `c = e`.
/// - `gauge` (pair groupoids): `c(y, x) = exp((θ(x) - θ(y)) E1)`, flat for the `gauge` potential.
/// - `twisted` (pair groupoids): `c(y, x) = exp((θ′(y) - θ′(x)) E1)`.
/// - `action` (action groupoid of SO(2)): `c(θ, x) = R(θ)`.
pub fn cocycle(name: &str, base: &GroupoidPresentation, g: &MatrixGroup) -> Result<CocycleFn> {
    match name {
        "trivial" => {
            let e = g.identity();
            Ok(Arc::new(move |_| e.clone()))
        }
        "gauge" | "twisted" => {
            let n = pair_halves(base, name)?;
            let flow = one_parameter(g)?;
            let gauge = name == "gauge";
            Ok(Arc::new(move |m: &Pt| {
                let y = m.rows(0, n).into_owned();
                let x = m.rows(n, n).into_owned();
                if gauge {
                    flow(gauge_fn(&x) - gauge_fn(&y))
                } else {
                    flow(twist_fn(&y) - twist_fn(&x))
                }
            }))
        }
        "action" => {
            if base.name() != "action:SO2" || g.name() != "SO2" {
                return Err(Error::Invalid("cocycle action needs SO2 over action:SO2".into()));
            }
            Ok(Arc::new(|m: &Pt| crate::matlie::rot2(m[0])))
        }
        _ => Err(Error::Invalid(format!("unknown cocycle {name}"))),
    }
}

/// A named base potential `A0(x, v)` with values in the Lie algebra of `g`.
///
/// - `zero`.
/// - `constant`: `strength · v0 · E1`.
/// - `gauge`: `dθ(v) E1`, the pure gauge of the `gauge` cocycle.
/// - `swirl` (three generators): `-strength (v1 E3 + 0.5 x0 v1 E1 - 0.3 v0 E2)`.
/// - `angular` (plane): `(strength x·v - (x0 v1 - x1 v0) / |x|²) E1`, rotation
///   invariant up to the gauge of the `action` cocycle.
pub fn potential(name: &str, g: &MatrixGroup, strength: f64) -> Result<PotentialFn> {
    match name {
        "zero" => {
            let z = g.zero_algebra();
            Ok(Arc::new(move |_, _| z.clone()))
        }
        "constant" => {
            let e1 = first_generator(g)?;
            Ok(Arc::new(move |_x: &Pt, v: &Pt| &e1 * (strength * v[0])))
        }
        "gauge" => {
            let e1 = first_generator(g)?;
            Ok(Arc::new(move |x: &Pt, v: &Pt| {
                let d = 0.6 * v[0] + x.get(1).zip(v.get(1)).map_or(0.0, |(x1, v1)| 0.4 * x1 * v1);
                &e1 * d
            }))
        }
        "swirl" => {
            let l = g.generators().to_vec();
            if l.len() < 3 {
                return Err(Error::Invalid(format!("potential swirl needs three generators, {} has {}", g.name(), l.len())));
            }
            Ok(Arc::new(move |x: &Pt, v: &Pt| {
                let v1 = v.get(1).copied().unwrap_or(0.0);
                -(&l[2] * v1 + &l[0] * (0.5 * x[0] * v1) - &l[1] * (0.3 * v[0])) * strength
            }))
        }
        "angular" => {
            let e1 = first_generator(g)?;
            Ok(Arc::new(move |x: &Pt, v: &Pt| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                &e1 * (strength * x.dot(v) - (x[0] * v[1] - x[1] * v[0]) / r2)
            }))
        }
        _ => Err(Error::Invalid(format!("unknown potential {name}"))),
    }
}

fn hx(v: f64) -> Mat {
    let mut m = Mat::identity(2, 2);
    m[(0, 1)] = v;
    m
}

/// CM4 over `pair:2` with cocycle `c0 τ(f)` and the coboundary pseudo data of
/// `f(y, x) = 0.4 sin(y0 - x1) + 0.1 y1 x0 + 0.2`:
/// `Hm = f(γ2) f(γ1) f(γ2γ1)⁻¹` and `Hu = f(1)`.
pub fn coherent_cm4() -> PseudoPrincipalBundle {
    let cm = Arc::new(CrossedModule::cm4());
    let f = |gm: &Pt| 0.4 * (gm[0] - gm[3]).sin() + 0.1 * gm[1] * gm[2] + 0.2;
    let trans = |v: [f64; 2]| {
        let mut m = Mat::identity(3, 3);
        m[(0, 2)] = v[0];
        m[(1, 2)] = v[1];
        m
    };
    let c: CocycleFn = {
        let cm = cm.clone();
        Arc::new(move |gm: &Pt| {
            let c0 = trans([gm[0] - gm[2], 0.5 * (gm[1] * gm[1] - gm[3] * gm[3])]);
            c0 * cm.tau(&hx(f(gm)))
        })
    };
    let base = groupoid::pair_groupoid(2, Chart::default());
    let b2 = base.clone();
    let hu: HuFn = Arc::new(move |p: &E0Point| hx(f(&b2.unit(&p.x))));
    let b3 = base.clone();
    let hm: HmFn = Arc::new(move |g2: &Pt, g1: &Pt| hx(f(g2) + f(g1) - f(&b3.compose(g2, g1))));
    let under = PrincipalGBundleOverGroupoid::new(base, cm.g.clone(), c);
    PseudoPrincipalBundle::new(under, cm, hu, hm)
}

/// CM2 over `pair:1` with `Hm(γ2, γ1) = d1 d2 (d1 + d2) x`, where `γ1 = (x, w)`,
/// `γ2 = (y, x)`, `d1 = x - w`, `d2 = y - x`. Satisfies every coherence
/// property except the associator condition (j).
pub fn associator_counterexample() -> PseudoPrincipalBundle {
    let cm = Arc::new(CrossedModule::cm2());
    let base = groupoid::pair_groupoid(1, Chart::default());
    let under = PrincipalGBundleOverGroupoid::trivial(base, cm.g.clone());
    let mut pb = PseudoPrincipalBundle::strict(under, cm);
    pb.hm = Arc::new(move |g2: &Pt, g1: &Pt| {
        let (w, x, y) = (g1[1], g1[0], g2[0]);
        let d1 = x - w;
        let d2 = y - x;
        hx(d1 * d2 * (d1 + d2) * x)
    });
    pb
}

/// A named pseudo-principal bundle preset.
pub fn pseudo_preset(name: &str) -> Result<PseudoPrincipalBundle> {
    match name {
        "coherent_cm4" => Ok(coherent_cm4()),
        "associator_cm2" => Ok(associator_counterexample()),
        _ => Err(Error::Invalid(format!("unknown pseudo preset {name}"))),
    }
}

/// The decorated bundle of a named crossed module, groupoid and cocycle.
pub fn decorated(cm: &str, base: &str, cocycle_name: &str) -> Result<(Principal2Bundle, QuasiConnection)> {
    let cm = Arc::new(CrossedModule::by_name(cm)?);
    let base = groupoid::by_name(base)?;
    let c = cocycle(cocycle_name, &base, &cm.g)?;
    decorate(&PrincipalGBundleOverGroupoid::new(base, cm.g.clone(), c), cm)
}

/// CM1 over `pair:2` with the `twisted` cocycle.
pub fn decorated_cm1_pair() -> (Principal2Bundle, QuasiConnection) {
    decorated("CM1", "pair:2", "twisted").expect("builtin bundle")
}

/// CM1 over the SO(2) action groupoid with the `action` cocycle.
pub fn decorated_cm1_action() -> (Principal2Bundle, QuasiConnection) {
    decorated("CM1", "action:SO2", "action").expect("builtin bundle")
}

/// The discrete 2-group of SO(2) over the discrete groupoid of the plane with
/// a constant potential `c v0 J`: a classical principal bundle in disguise.
pub fn classical_reduction(c: f64) -> (Principal2Bundle, QuasiConnection, StrictConnection) {
    let (b, cc) = decorated("discrete:SO2", "discrete:2", "trivial").expect("builtin bundle");
    let omega = trivial_connection(&b, potential("constant", b.g(), c).expect("potential")).expect("connection");
    (b, cc, omega)
}

/// Stable listing of every builtin name, one category per line.
pub fn list_builtins() -> String {
    let mut out = String::new();
    let mut line = |label: &str, names: &[&str]| {
        out.push_str(label);
        out.push_str(": ");
        out.push_str(&names.join(", "));
        out.push('\n');
    };
    line("groups", GROUPS);
    line("crossed_modules", &CrossedModule::builtin_names());
    line("groupoids", GROUPOIDS);
    line("cocycles", COCYCLES);
    line("potentials", POTENTIALS);
    line("pseudo_presets", PSEUDO_PRESETS);
    line("actions", ACTIONS);
    line("vector_spaces", crate::vbassoc::SPACE_PRESETS);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle2::check_coherence;
    use crate::connection::validate_strict;

    #[test]
    fn gauge_pair_is_flat_and_strict_for_discrete_module() {
        let (b, _) = decorated("discrete:SO2", "pair:2", "gauge").unwrap();
        let omega = trivial_connection(&b, potential("gauge", b.g(), 1.0).unwrap()).unwrap();
        assert!(validate_strict(&omega, 50, 1).max() < 1e-8);
    }

    #[test]
    fn angular_potential_is_strict_on_the_action_groupoid() {
        let (b, _) = decorated("discrete:SO2", "action:SO2", "action").unwrap();
        let omega = trivial_connection(&b, potential("angular", b.g(), 0.4).unwrap()).unwrap();
        assert!(validate_strict(&omega, 50, 3).max() < 1e-8);
    }

    #[test]
    fn presets_and_errors() {
        assert!(check_coherence(&coherent_cm4(), 50, 1).max() < 1e-9);
        assert_eq!(check_coherence(&associator_counterexample(), 50, 1).first_failing(1e-9), Some("(j)"));
        assert!(pseudo_preset("nope").is_err());
        assert!(potential("swirl", &MatrixGroup::so2(), 1.0).is_err());
        assert!(cocycle("gauge", &groupoid::discrete_groupoid(2, Chart::default()), &MatrixGroup::so2()).is_err());
        assert!(decorated("CM1", "pair:2", "nope").is_err());
        let _ = decorated_cm1_action();
        let (b, _, omega) = classical_reduction(0.5);
        assert_eq!(b.cm().name(), "discrete:SO2");
        assert!(validate_strict(&omega, 20, 2).max() < 1e-8);
    }

    #[test]
    fn listing_is_stable() {
        let l = list_builtins();
        assert_eq!(l, list_builtins());
        for name in ["CM1", "CM2", "CM3", "CM4", "pair", "discrete", "action:SO2"] {
            assert!(l.contains(name), "{name}");
        }
    }
}
