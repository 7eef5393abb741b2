//! Turns a scenario into library objects. Every failure here is a build error.

use std::sync::Arc;

use twobundle::builtins;
use twobundle::bundle2::{decorate, quasi_decorate, Classification, PrincipalGBundleOverGroupoid, PseudoPrincipalBundle, Principal2Bundle, QuasiConnection};
use twobundle::connection::{decorated_connection, trivial_connection, PotentialFn, StrictConnection};
use twobundle::crossed_module::CrossedModule;
use twobundle::groupoid::{self, GroupoidPresentation};
use twobundle::hpath::{make_lazy_path, LazyPath, SampledPath, DEFAULT_GRID};
use twobundle::matlie::Pt;
use twobundle::vbassoc::{associate, AssociatedVb, TwoGroupLinearAction, TwoVectorSpace};

use crate::scenario::{BundleSpec, ConnectionSpec, LazyPathSpec, Scenario, VbSpec};

/// The objects a scenario describes, built on demand.
pub struct World {
    pub cm: Arc<CrossedModule>,
    pub base: GroupoidPresentation,
    pub grid: usize,
    pub pseudo: Option<PseudoPrincipalBundle>,
    /// Construction of a quasi-decorated bundle can fail on incoherent data;
    /// the error surfaces only when a suite needs the bundle.
    pub bundle: Option<BuildResult<BuiltBundle>>,
    pub connection: Option<BuildResult<BuiltConnection>>,
    pub vb: Option<BuildResult<AssociatedVb>>,
    pub paths: Vec<LazyPath>,
}

pub struct BuiltBundle {
    pub bundle: Principal2Bundle,
    pub cleavage: QuasiConnection,
    pub decorated: bool,
    pub expected_class: Option<Classification>,
}

pub struct BuiltConnection {
    pub omega: StrictConnection,
    pub potential: String,
    pub strength: f64,
}

pub type BuildResult<T> = Result<T, String>;

fn err(context: &str) -> impl Fn(twobundle::Error) -> String + '_ {
    move |e| format!("{context}: {e}")
}

impl World {
    /// Builds everything the scenario declares; `forced` overrides every grid.
    pub fn build(s: &Scenario, forced: Option<usize>) -> BuildResult<World> {
        let cm = Arc::new(CrossedModule::by_name(&s.crossed_module).map_err(err("crossed_module"))?);
        let base = groupoid::by_name(&s.base).map_err(err("base"))?;
        let grid = forced.or(s.grid).unwrap_or(DEFAULT_GRID);
        if grid < 16 || grid % 2 != 0 {
            return Err(format!("grid {grid} must be even and at least 16"));
        }
        let (pseudo, bundle) = match &s.bundle {
            Some(spec) => {
                let (pseudo, bundle) = build_bundle(spec, &cm, &base)?;
                (pseudo, Some(bundle))
            }
            None => (None, None),
        };
        let connection = match (&s.connection, &bundle) {
            (Some(spec), Some(Ok(b))) => Some(Ok(build_connection(spec, b, &cm, &base)?)),
            (Some(_), Some(Err(e))) => Some(Err(e.clone())),
            (Some(_), None) => return Err("connection: needs a bundle".into()),
            _ => None,
        };
        let vb = match (&s.vb, &bundle) {
            (Some(spec), Some(Ok(b))) => Some(Ok(build_vb(spec, &b.bundle)?)),
            (Some(_), Some(Err(e))) => Some(Err(e.clone())),
            (Some(_), None) => return Err("vb: needs a bundle".into()),
            _ => None,
        };
        let paths = s
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| build_lazy_path(p, &base, grid, forced).map_err(|e| format!("paths[{i}]: {e}")))
            .collect::<BuildResult<Vec<_>>>()?;
        Ok(World { cm, base, grid, pseudo, bundle, connection, vb, paths })
    }

    pub fn pseudo(&self) -> BuildResult<&PseudoPrincipalBundle> {
        self.pseudo.as_ref().ok_or_else(|| "suite needs a quasi_decorate bundle".to_string())
    }

    pub fn bundle(&self) -> BuildResult<&BuiltBundle> {
        needed(&self.bundle, "bundle")
    }

    pub fn connection(&self) -> BuildResult<&BuiltConnection> {
        needed(&self.connection, "connection")
    }

    pub fn vb(&self) -> BuildResult<&AssociatedVb> {
        needed(&self.vb, "vb")
    }

    pub fn plateau(&self) -> usize {
        self.grid / 16
    }
}

fn needed<'a, T>(slot: &'a Option<BuildResult<T>>, what: &str) -> BuildResult<&'a T> {
    match slot {
        Some(Ok(v)) => Ok(v),
        Some(Err(e)) => Err(e.clone()),
        None => Err(format!("suite needs a {what} section")),
    }
}

type BundleParts = (Option<PseudoPrincipalBundle>, BuildResult<BuiltBundle>);

fn build_bundle(spec: &BundleSpec, cm: &Arc<CrossedModule>, base: &GroupoidPresentation) -> BuildResult<BundleParts> {
    let parse_class = |c: &Option<String>| c.as_deref().map(|s| s.parse::<Classification>().map_err(err("expected_class"))).transpose();
    match spec {
        BundleSpec::Decorate { cocycle, expected_class } => {
            let c = builtins::cocycle(cocycle, base, &cm.g).map_err(err("cocycle"))?;
            let pg = PrincipalGBundleOverGroupoid::new(base.clone(), cm.g.clone(), c);
            let (bundle, cleavage) = decorate(&pg, cm.clone()).map_err(err("decorate"))?;
            Ok((None, Ok(BuiltBundle { bundle, cleavage, decorated: true, expected_class: parse_class(expected_class)? })))
        }
        BundleSpec::QuasiDecorate { preset, cocycle, hu, hm, expected_class } => {
            let pb = match preset {
                Some(name) => {
                    if cocycle.is_some() || hu.is_some() || hm.is_some() {
                        return Err("bundle: preset excludes cocycle, Hu and Hm".into());
                    }
                    let pb = builtins::pseudo_preset(name).map_err(err("bundle"))?;
                    if pb.cm.name() != cm.name() || pb.underlying.base.name() != base.name() {
                        return Err(format!(
                            "bundle: preset {name} lives on {} over {}",
                            pb.cm.name(),
                            pb.underlying.base.name()
                        ));
                    }
                    pb
                }
                None => {
                    for (label, v) in [("Hu", hu), ("Hm", hm)] {
                        if let Some(v) = v {
                            if v != "trivial" {
                                return Err(format!("{label}: unknown map {v}"));
                            }
                        }
                    }
                    let name = cocycle.as_deref().unwrap_or("trivial");
                    let c = builtins::cocycle(name, base, &cm.g).map_err(err("cocycle"))?;
                    PseudoPrincipalBundle::strict(PrincipalGBundleOverGroupoid::new(base.clone(), cm.g.clone(), c), cm.clone())
                }
            };
            let expected_class = parse_class(expected_class)?;
            let built = quasi_decorate(&pb)
                .map(|(bundle, cleavage)| BuiltBundle { bundle, cleavage, decorated: false, expected_class })
                .map_err(err("quasi_decorate"));
            Ok((Some(pb), built))
        }
    }
}

/// Splits `name:strength`, defaulting the strength to 1.
pub fn parse_potential(spec: &str) -> BuildResult<(String, f64)> {
    match spec.split_once(':') {
        Some((name, s)) => {
            let v: f64 = s.parse().map_err(|_| format!("A0: bad strength {s:?}"))?;
            Ok((name.to_string(), v))
        }
        None => Ok((spec.to_string(), 1.0)),
    }
}

fn build_connection(
    spec: &ConnectionSpec,
    b: &BuiltBundle,
    cm: &Arc<CrossedModule>,
    base: &GroupoidPresentation,
) -> BuildResult<BuiltConnection> {
    let (name, strength) = parse_potential(&spec.a0)?;
    let a0: PotentialFn = builtins::potential(&name, &cm.g, strength).map_err(err("A0"))?;
    let omega = match spec.kind.as_str() {
        "trivial" => trivial_connection(&b.bundle, a0).map_err(err("connection"))?,
        "decorated" => {
            if !b.decorated {
                return Err("connection: the decorated kind needs a decorate bundle".into());
            }
            let pg = PrincipalGBundleOverGroupoid::new(base.clone(), cm.g.clone(), b.bundle.pseudo().underlying.c.clone());
            decorated_connection(&pg, cm.clone(), a0).map_err(err("connection"))?.2
        }
        other => return Err(format!("connection: unknown kind {other}")),
    };
    Ok(BuiltConnection { omega, potential: name, strength })
}

fn build_vb(spec: &VbSpec, b: &Principal2Bundle) -> BuildResult<AssociatedVb> {
    let v = TwoVectorSpace::preset(&spec.v.structure, spec.v.v0_dim, spec.v.v1_dim, b.cm()).map_err(err("V"))?;
    let act = TwoGroupLinearAction::by_name(&spec.action, b.cm_arc(), &v).map_err(err("action"))?;
    associate(b, &act, &v).map_err(err("vb"))
}

fn pt(v: &[f64], dim: usize, what: &str) -> BuildResult<Pt> {
    if v.len() != dim {
        return Err(format!("{what} has {} coordinates, expected {dim}", v.len()));
    }
    Ok(Pt::from_row_slice(v))
}

fn build_lazy_path(spec: &LazyPathSpec, base: &GroupoidPresentation, grid: usize, forced: Option<usize>) -> BuildResult<LazyPath> {
    let mut paths = Vec::with_capacity(spec.paths.len());
    for (j, p) in spec.paths.iter().enumerate() {
        let k = forced.or(p.grid).unwrap_or(grid);
        let plateau = if forced.is_some() { k / 16 } else { p.plateau.unwrap_or(k / 16) };
        let pts = p
            .waypoints
            .iter()
            .map(|w| pt(w, base.obj_dim, "waypoint"))
            .collect::<BuildResult<Vec<_>>>()?;
        let path = SampledPath::waypoints(&pts, k, plateau).map_err(|e| format!("path {}: {e}", j + 1))?;
        paths.push(path);
    }
    if paths.is_empty() {
        return Err("a lazy path needs at least one base path".into());
    }
    let arrows = match &spec.arrows {
        Some(a) => a.iter().map(|g| pt(g, base.mor_dim, "arrow")).collect::<BuildResult<Vec<_>>>()?,
        None => {
            let mut a = vec![base.unit(paths[0].start())];
            a.extend(paths.iter().map(|p| base.unit(p.end())));
            a
        }
    };
    make_lazy_path(base, arrows, paths).map_err(|e| e.to_string())
}
