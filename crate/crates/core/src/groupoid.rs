//! Lie groupoids presented by a single chart and callable structure maps.
//!
//! Objects are points of an open subset of R^obj_dim and morphisms points of an
//! open subset of R^mor_dim. Builtins: the pair groupoid, the discrete groupoid
//! and action groupoids of matrix groups with global coordinates.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matlie::{Mat, MatrixGroup, Pt};
use crate::report::ResidualReport;

pub type PtMap = Arc<dyn Fn(&Pt) -> Pt + Send + Sync>;
pub type PtMap2 = Arc<dyn Fn(&Pt, &Pt) -> Pt + Send + Sync>;
pub type PtPred = Arc<dyn Fn(&Pt) -> bool + Send + Sync>;
/// Random morphism with a prescribed source.
pub type MorSampler = Arc<dyn Fn(&Pt, &mut dyn RngCore) -> Pt + Send + Sync>;
/// Left action of a matrix group on R^n.
pub type ActionFn = Arc<dyn Fn(&Mat, &Pt) -> Pt + Send + Sync>;

/// Object chart: a box or (in the plane) an annulus around the origin.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    Box { lo: f64, hi: f64 },
    Annulus { r_min: f64, r_max: f64 },
}

impl Chart {
    pub fn contains(&self, x: &Pt) -> bool {
        match self {
            Chart::Box { lo, hi } => x.iter().all(|v| v > lo && v < hi),
            Chart::Annulus { r_min, r_max } => {
                let r = x.norm();
                r > *r_min && r < *r_max
            }
        }
    }

    /// Samples from a bounded region well inside the chart.
    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Pt {
        match self {
            Chart::Box { lo, hi } => {
                let a = lo.max(-2.0);
                let b = hi.min(2.0);
                Pt::from_iterator(n, (0..n).map(|_| rng.random_range(a..b)))
            }
            Chart::Annulus { r_min, r_max } => {
                let a = (2.0 * r_min).max(0.8).min(0.5 * (r_min + r_max));
                let b = (0.5 * r_max).min(2.0).max(a);
                let r = rng.random_range(a..=b);
                let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                let mut p = Pt::zeros(n);
                p[0] = r * t.cos();
                if n > 1 {
                    p[1] = r * t.sin();
                }
                p
            }
        }
    }
}

impl Default for Chart {
    fn default() -> Self {
        Chart::Box { lo: -10.0, hi: 10.0 }
    }
}

/// A Lie groupoid in a single chart.
#[derive(Clone)]
pub struct GroupoidPresentation {
    name: String,
    pub obj_dim: usize,
    pub mor_dim: usize,
    source: PtMap,
    target: PtMap,
    compose: PtMap2,
    unit: PtMap,
    inverse: PtMap,
    in_obj_chart: PtPred,
    in_mor_chart: PtPred,
    with_source: PtMap2,
    sample_obj: Arc<dyn Fn(&mut dyn RngCore) -> Pt + Send + Sync>,
    sample_from: MorSampler,
}

impl fmt::Debug for GroupoidPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupoidPresentation")
            .field("name", &self.name)
            .field("obj_dim", &self.obj_dim)
            .field("mor_dim", &self.mor_dim)
            .finish()
    }
}

/// Structure maps for [`GroupoidPresentation::new`].
pub struct GroupoidMaps {
    pub source: PtMap,
    pub target: PtMap,
    pub compose: PtMap2,
    pub unit: PtMap,
    pub inverse: PtMap,
    pub in_obj_chart: PtPred,
    pub in_mor_chart: PtPred,
    /// Moves the source of a morphism to a new object, smoothly in both arguments.
    pub with_source: PtMap2,
    pub sample_obj: Arc<dyn Fn(&mut dyn RngCore) -> Pt + Send + Sync>,
    pub sample_from: MorSampler,
}

impl GroupoidPresentation {
    pub fn new(name: &str, obj_dim: usize, mor_dim: usize, m: GroupoidMaps) -> Self {
        GroupoidPresentation {
            name: name.to_string(),
            obj_dim,
            mor_dim,
            source: m.source,
            target: m.target,
            compose: m.compose,
            unit: m.unit,
            inverse: m.inverse,
            in_obj_chart: m.in_obj_chart,
            in_mor_chart: m.in_mor_chart,
            with_source: m.with_source,
            sample_obj: m.sample_obj,
            sample_from: m.sample_from,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self, g: &Pt) -> Pt {
        (self.source)(g)
    }

    pub fn target(&self, g: &Pt) -> Pt {
        (self.target)(g)
    }

    /// Composition g2 o g1 (g1 first), without a composability check.
    pub fn compose(&self, g2: &Pt, g1: &Pt) -> Pt {
        (self.compose)(g2, g1)
    }

    /// Composition with the tol_match composability check.
    pub fn try_compose(&self, g2: &Pt, g1: &Pt, tol: f64) -> Result<Pt> {
        let mismatch = (self.source(g2) - self.target(g1)).norm();
        if mismatch > tol {
            return Err(Error::NotComposable(mismatch));
        }
        Ok(self.compose(g2, g1))
    }

    pub fn unit(&self, x: &Pt) -> Pt {
        (self.unit)(x)
    }

    pub fn inverse(&self, g: &Pt) -> Pt {
        (self.inverse)(g)
    }

    pub fn in_obj_chart(&self, x: &Pt) -> bool {
        (self.in_obj_chart)(x)
    }

    pub fn in_mor_chart(&self, g: &Pt) -> bool {
        (self.in_mor_chart)(g)
    }

    pub fn with_source(&self, g: &Pt, x: &Pt) -> Pt {
        (self.with_source)(g, x)
    }

    pub fn sample_obj(&self, rng: &mut dyn RngCore) -> Pt {
        (self.sample_obj)(rng)
    }

    /// Random morphism with source `x`.
    pub fn sample_from(&self, x: &Pt, rng: &mut dyn RngCore) -> Pt {
        (self.sample_from)(x, rng)
    }

    pub fn sample_mor(&self, rng: &mut dyn RngCore) -> Pt {
        let x = self.sample_obj(rng);
        self.sample_from(&x, rng)
    }

    /// Distance of `g` from the unit at its source.
    pub fn identity_defect(&self, g: &Pt) -> f64 {
        (self.unit(&self.source(g)) - g).norm()
    }

    /// Central difference of `f` at a morphism along `dir`.
    pub fn tangent_eval_mor(&self, f: &dyn Fn(&Pt) -> Pt, at: &Pt, dir: &Pt, h: f64) -> Result<Pt> {
        tangent_eval(&*self.in_mor_chart, f, at, dir, h)
    }

    /// Central difference of `f` at an object along `dir`.
    pub fn tangent_eval_obj(&self, f: &dyn Fn(&Pt) -> Pt, at: &Pt, dir: &Pt, h: f64) -> Result<Pt> {
        tangent_eval(&*self.in_obj_chart, f, at, dir, h)
    }
}

/// Central difference (f(at + h dir) - f(at - h dir)) / (2h).
pub fn tangent_eval(
    in_chart: &dyn Fn(&Pt) -> bool,
    f: &dyn Fn(&Pt) -> Pt,
    at: &Pt,
    dir: &Pt,
    h: f64,
) -> Result<Pt> {
    let plus = at + dir * h;
    let minus = at - dir * h;
    for p in [at, &plus, &minus] {
        if !in_chart(p) {
            return Err(Error::OutOfChart(format!("{:?}", p.as_slice())));
        }
    }
    Ok((f(&plus) - f(&minus)) / (2.0 * h))
}

fn split(g: &Pt, n: usize) -> (Pt, Pt) {
    (g.rows(0, n).into_owned(), g.rows(n, n).into_owned())
}

fn join(a: &Pt, b: &Pt) -> Pt {
    Pt::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// The pair groupoid of an open subset of R^n: morphisms (y, x) from x to y.
pub fn pair_groupoid(n: usize, chart: Chart) -> GroupoidPresentation {
    assert!(n >= 1, "pair groupoid needs n >= 1");
    let c1 = chart.clone();
    let c2 = chart.clone();
    let c3 = chart.clone();
    let c4 = chart;
    GroupoidPresentation::new(
        &format!("pair:{n}"),
        n,
        2 * n,
        GroupoidMaps {
            source: Arc::new(move |g| split(g, n).1),
            target: Arc::new(move |g| split(g, n).0),
            compose: Arc::new(move |g2, g1| join(&split(g2, n).0, &split(g1, n).1)),
            unit: Arc::new(|x| join(x, x)),
            inverse: Arc::new(move |g| {
                let (y, x) = split(g, n);
                join(&x, &y)
            }),
            in_obj_chart: Arc::new(move |x| c1.contains(x)),
            in_mor_chart: Arc::new(move |g| {
                let (y, x) = split(g, n);
                c2.contains(&y) && c2.contains(&x)
            }),
            with_source: Arc::new(move |g, x| join(&split(g, n).0, x)),
            sample_obj: Arc::new(move |rng| c3.sample(n, rng)),
            sample_from: Arc::new(move |x, rng| join(&c4.sample(n, rng), x)),
        },
    )
}

/// The discrete groupoid [M => M]: every morphism is a unit.
pub fn discrete_groupoid(n: usize, chart: Chart) -> GroupoidPresentation {
    let c1 = chart.clone();
    let c2 = chart.clone();
    let c3 = chart;
    GroupoidPresentation::new(
        &format!("discrete:{n}"),
        n,
        n,
        GroupoidMaps {
            source: Arc::new(|g| g.clone()),
            target: Arc::new(|g| g.clone()),
            compose: Arc::new(|_, g1| g1.clone()),
            unit: Arc::new(|x| x.clone()),
            inverse: Arc::new(|g| g.clone()),
            in_obj_chart: Arc::new(move |x| c1.contains(x)),
            in_mor_chart: Arc::new(move |x| c2.contains(x)),
            with_source: Arc::new(|_, x| x.clone()),
            sample_obj: Arc::new(move |rng| c3.sample(n, rng)),
            sample_from: Arc::new(|x, _| x.clone()),
        },
    )
}

/// The action groupoid G x R^n => R^n of a left action. Morphisms are
/// (group coordinates, x) with source x and target act(g, x). The group must
/// admit global coordinates.
pub fn action_groupoid(
    g: MatrixGroup,
    n: usize,
    act: ActionFn,
    chart: Chart,
) -> Result<GroupoidPresentation> {
    if g.global_coords(&g.identity()).is_none() {
        return Err(Error::Invalid(format!(
            "group {} has no global coordinates for an action groupoid",
            g.name()
        )));
    }
    let k = g.algebra_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = chart.sample(n, &mut rng);
        let a = g.random_element(&mut rng, 1.0);
        let b = g.random_element(&mut rng, 1.0);
        worst = worst.max((act(&g.identity(), &x) - &x).norm());
        worst = worst.max((act(&(&a * &b), &x) - act(&a, &act(&b, &x))).norm());
    }
    if worst > 1e-9 {
        return Err(Error::NotAnAction(worst));
    }
    let elem = {
        let g = g.clone();
        move |c: &Pt| -> Mat { g.exp(&g.from_coords(c)).expect("exp of chart coordinates") }
    };
    let coords = {
        let g = g.clone();
        move |m: &Mat| -> Pt { g.global_coords(m).expect("global coordinates") }
    };
    let split_k = move |m: &Pt| (m.rows(0, k).into_owned(), m.rows(k, n).into_owned());

    let target = {
        let act = act.clone();
        let elem = elem.clone();
        Arc::new(move |m: &Pt| {
            let (c, x) = split_k(m);
            act(&elem(&c), &x)
        })
    };
    let compose = {
        let elem = elem.clone();
        let coords = coords.clone();
        Arc::new(move |m2: &Pt, m1: &Pt| {
            let (c2, _) = split_k(m2);
            let (c1, x) = split_k(m1);
            join(&coords(&(elem(&c2) * elem(&c1))), &x)
        })
    };
    let inverse = {
        let act = act.clone();
        let elem = elem.clone();
        let g2 = g.clone();
        Arc::new(move |m: &Pt| {
            let (c, x) = split_k(m);
            let a = elem(&c);
            join(&coords(&g2.inverse(&a)), &act(&a, &x))
        })
    };
    let c1 = chart.clone();
    let c2 = chart.clone();
    let c3 = chart;
    let gs = g.clone();
    Ok(GroupoidPresentation::new(
        &format!("action:{}", g.name()),
        n,
        k + n,
        GroupoidMaps {
            source: Arc::new(move |m| split_k(m).1),
            target,
            compose,
            unit: Arc::new(move |x| join(&Pt::zeros(k), x)),
            inverse,
            in_obj_chart: Arc::new(move |x| c1.contains(x)),
            in_mor_chart: {
                let act = act.clone();
                let elem = elem.clone();
                Arc::new(move |m| {
                    let (c, x) = split_k(m);
                    c2.contains(&x) && c2.contains(&act(&elem(&c), &x))
                })
            },
            with_source: Arc::new(move |m, x| join(&split_k(m).0, x)),
            sample_obj: Arc::new(move |rng| c3.sample(n, rng)),
            sample_from: Arc::new(move |x, rng| {
                let c = Pt::from_iterator(k, (0..k).map(|_| rng.random_range(-1.0..1.0)));
                let c = gs.global_coords(&gs.exp(&gs.from_coords(&c)).expect("exp")).expect("coords");
                join(&c, x)
            }),
        },
    ))
}

/// SO(2) acting on the plane by rotation, on an annulus chart.
pub fn rotation_action_groupoid() -> GroupoidPresentation {
    action_groupoid(
        MatrixGroup::so2(),
        2,
        Arc::new(|a: &Mat, x: &Pt| a * x),
        Chart::Annulus { r_min: 0.25, r_max: 10.0 },
    )
    .expect("rotation action is an action")
}

/// Looks a builtin groupoid up: "pair:n", "discrete:n", "action:SO2".
pub fn by_name(name: &str) -> Result<GroupoidPresentation> {
    if name == "action:SO2" {
        return Ok(rotation_action_groupoid());
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| Error::Invalid(format!("bad dimension in {name}")))
    };
    if let Some(n) = name.strip_prefix("pair:") {
        return Ok(pair_groupoid(parse(n)?, Chart::default()));
    }
    if let Some(n) = name.strip_prefix("discrete:") {
        return Ok(discrete_groupoid(parse(n)?, Chart::default()));
    }
    Err(Error::Invalid(format!("unknown groupoid {name}")))
}

/// A functor between presented groupoids.
#[derive(Clone)]
pub struct GroupoidMorphism {
    pub obj: PtMap,
    pub mor: PtMap,
}

impl GroupoidMorphism {
    /// Inclusion of the discrete subgroupoid of units: x -> x, x -> 1_x.
    pub fn unit_inclusion(target: &GroupoidPresentation) -> Self {
        let t = target.clone();
        GroupoidMorphism {
            obj: Arc::new(|x| x.clone()),
            mor: Arc::new(move |x| t.unit(x)),
        }
    }
}

/// Residuals of the groupoid axioms on composable triples built by `sample_from`.
pub fn check_axioms(gp: &GroupoidPresentation, n_samples: usize, seed: u64) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let x = gp.sample_obj(&mut rng);
        let g1 = gp.sample_from(&x, &mut rng);
        let g2 = gp.sample_from(&gp.target(&g1), &mut rng);
        let g3 = gp.sample_from(&gp.target(&g2), &mut rng);
        let u = gp.unit(&x);
        rep.record("unit_source", (gp.source(&u) - &x).norm());
        rep.record("unit_target", (gp.target(&u) - &x).norm());
        let g21 = gp.compose(&g2, &g1);
        rep.record("compose_source", (gp.source(&g21) - gp.source(&g1)).norm());
        rep.record("compose_target", (gp.target(&g21) - gp.target(&g2)).norm());
        let lhs = gp.compose(&g3, &g21);
        let rhs = gp.compose(&gp.compose(&g3, &g2), &g1);
        rep.record("associativity", (lhs - rhs).norm());
        rep.record("left_unit", (gp.compose(&gp.unit(&gp.target(&g1)), &g1) - &g1).norm());
        rep.record("right_unit", (gp.compose(&g1, &u) - &g1).norm());
        let inv = gp.inverse(&g1);
        rep.record("left_inverse", (gp.compose(&inv, &g1) - &u).norm());
        let ut = gp.unit(&gp.target(&g1));
        rep.record("right_inverse", (gp.compose(&g1, &inv) - ut).norm());
    }
    rep
}

/// Residuals of functoriality of `f` on sampled composable pairs.
pub fn check_functor(
    f: &GroupoidMorphism,
    src: &GroupoidPresentation,
    dst: &GroupoidPresentation,
    n_samples: usize,
    seed: u64,
) -> ResidualReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ResidualReport::new();
    for _ in 0..n_samples.max(1) {
        let x = src.sample_obj(&mut rng);
        let g1 = src.sample_from(&x, &mut rng);
        let g2 = src.sample_from(&src.target(&g1), &mut rng);
        let fg1 = (f.mor)(&g1);
        rep.record("source", (dst.source(&fg1) - (f.obj)(&src.source(&g1))).norm());
        rep.record("target", (dst.target(&fg1) - (f.obj)(&src.target(&g1))).norm());
        rep.record("unit", ((f.mor)(&src.unit(&x)) - dst.unit(&(f.obj)(&x))).norm());
        let lhs = (f.mor)(&src.compose(&g2, &g1));
        let rhs = dst.compose(&(f.mor)(&g2), &fg1);
        rep.record("compose", (lhs - rhs).norm());
    }
    rep
}
