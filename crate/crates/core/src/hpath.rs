//! Haefliger paths on presented groupoids.
//!
//! A [`SampledPath`] is a path with sitting instants sampled on a uniform grid
//! of `[0, 1]`. A [`LazyPath`] alternates groupoid morphisms and paths:
//! `(γ0, α1, γ1, ..., αn, γn)`.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::groupoid::GroupoidPresentation;
use crate::matlie::{Pt, TOL_MATCH};

pub const DEFAULT_GRID: usize = 128;
pub const DEFAULT_PLATEAU: usize = 8;
/// Tolerance for detecting constant paths and identity morphisms.
pub const DETECT_TOL: f64 = 1e-8;
/// Tolerance for spur cancellation in thin deformations.
const SPUR_TOL: f64 = 1e-12;

/// The C⁴ step `126s⁵ - 420s⁶ + 540s⁷ - 315s⁸ + 70s⁹`, clamped to `[0, 1]`.
pub fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    s.powi(5) * (126.0 + s * (-420.0 + s * (540.0 + s * (-315.0 + s * 70.0))))
}

/// Derivative of [`smoothstep`].
pub fn smoothstep_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    630.0 * s.powi(4) * (1.0 - s).powi(4)
}

/// A path with sitting instants sampled at `t_i = i / K`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    samples: Vec<Pt>,
    plateau: usize,
}

impl SampledPath {
    /// Validates that the first and last `plateau + 1` samples agree.
    pub fn new(samples: Vec<Pt>, plateau: usize) -> Result<Self> {
        if plateau < 1 || samples.len() < 2 * plateau + 2 {
            return Err(Error::Invalid(format!(
                "path with {} samples cannot sit for {plateau} steps",
                samples.len()
            )));
        }
        let k = samples.len() - 1;
        for i in 1..=plateau {
            let d0 = (&samples[i] - &samples[0]).norm();
            let d1 = (&samples[k - i] - &samples[k]).norm();
            if d0 > 0.0 || d1 > 0.0 {
                return Err(Error::Invalid(format!("path does not sit at sample {i} ({:.3e})", d0.max(d1))));
            }
        }
        Ok(SampledPath { samples, plateau })
    }

    /// Samples `f ∘ ramp`, where the ramp is the C⁴ step from `plateau / K`
    /// to `1 - plateau / K`.
    pub fn from_fn(f: impl Fn(f64) -> Pt, k: usize, plateau: usize) -> Result<Self> {
        if k % 2 != 0 || k < 2 * plateau + 4 {
            return Err(Error::Invalid(format!("grid K = {k} must be even and exceed twice the plateau")));
        }
        let t0 = plateau as f64 / k as f64;
        let span = 1.0 - 2.0 * t0;
        let samples = (0..=k).map(|i| f(smoothstep((i as f64 / k as f64 - t0) / span))).collect();
        Self::new(samples, plateau)
    }

    /// The constant path at `x`.
    pub fn constant(x: &Pt, k: usize, plateau: usize) -> Self {
        SampledPath { samples: vec![x.clone(); k + 1], plateau }
    }

    /// Natural cubic spline through `points` at uniform knots, composed with the ramp.
    pub fn waypoints(points: &[Pt], k: usize, plateau: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("need at least two waypoints".into()));
        }
        let spline = NaturalSpline::new(points);
        Self::from_fn(|s| spline.eval(s), k, plateau)
    }

    pub fn samples(&self) -> &[Pt] {
        &self.samples
    }

    pub fn grid(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn plateau(&self) -> usize {
        self.plateau
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn start(&self) -> &Pt {
        &self.samples[0]
    }

    pub fn end(&self) -> &Pt {
        &self.samples[self.samples.len() - 1]
    }

    /// Largest distance of a sample from the starting point.
    pub fn max_deviation(&self) -> f64 {
        self.samples.iter().map(|s| (s - self.start()).norm()).fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.max_deviation() < DETECT_TOL
    }

    /// Sample-wise distance to a path on the same grid, or infinity.
    pub fn dist(&self, o: &SampledPath) -> f64 {
        if self.samples.len() != o.samples.len() {
            return f64::INFINITY;
        }
        self.samples.iter().zip(&o.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Pointwise image `f ∘ α`.
    pub fn map(&self, f: impl Fn(&Pt) -> Pt) -> SampledPath {
        SampledPath { samples: self.samples.iter().map(f).collect(), plateau: self.plateau }
    }

    /// The reversed path `α⁻¹`.
    pub fn reverse(&self) -> SampledPath {
        let mut samples = self.samples.clone();
        samples.reverse();
        SampledPath { samples, plateau: self.plateau }
    }

    /// The concatenation `β * α` (α first) on K1 + K2 intervals.
    pub fn concat(beta: &SampledPath, alpha: &SampledPath) -> Result<SampledPath> {
        let gap = (beta.start() - alpha.end()).norm();
        if gap > TOL_MATCH {
            return Err(Error::BoundaryMismatch(format!("concatenation gap {gap:.3e}")));
        }
        let mut samples = alpha.samples.clone();
        samples.extend(beta.samples[1..].iter().cloned());
        Ok(SampledPath { samples, plateau: alpha.plateau.min(beta.plateau) })
    }

    /// Splits at sample `m`, which must be inside a sitting interval.
    pub fn split_at(&self, m: usize) -> Result<(SampledPath, SampledPath)> {
        let p = self.plateau;
        if m < p || m + p >= self.samples.len() {
            return Err(Error::Invalid(format!("split index {m} too close to an end")));
        }
        let sits = (m - p..=m + p).all(|i| (&self.samples[i] - &self.samples[m]).norm() == 0.0);
        if !sits {
            return Err(Error::Invalid(format!("path does not sit at sample {m}")));
        }
        let first = SampledPath::new(self.samples[..=m].to_vec(), p)?;
        let second = SampledPath::new(self.samples[m..].to_vec(), p)?;
        Ok((first, second))
    }

    /// Velocities at every sample by five-point stencils (one-sided at the ends).
    pub fn velocities(&self) -> Vec<Pt> {
        let f = &self.samples;
        let k = self.grid();
        assert!(k >= 4, "velocities need at least four intervals");
        let c = k as f64 / 12.0;
        (0..=k)
            .map(|i| {
                let v = if i == 0 {
                    -&f[0] * 25.0 + &f[1] * 48.0 - &f[2] * 36.0 + &f[3] * 16.0 - &f[4] * 3.0
                } else if i == 1 {
                    -&f[0] * 3.0 - &f[1] * 10.0 + &f[2] * 18.0 - &f[3] * 6.0 + &f[4]
                } else if i == k {
                    &f[k] * 25.0 - &f[k - 1] * 48.0 + &f[k - 2] * 36.0 - &f[k - 3] * 16.0 + &f[k - 4] * 3.0
                } else if i == k - 1 {
                    &f[k] * 3.0 + &f[k - 1] * 10.0 - &f[k - 2] * 18.0 + &f[k - 3] * 6.0 - &f[k - 4]
                } else {
                    -&f[i + 2] + &f[i + 1] * 8.0 - &f[i - 1] * 8.0 + &f[i - 2]
                };
                v * c
            })
            .collect()
    }

    /// Cubic Hermite interpolation at `t ∈ [0, 1]` using stencil velocities.
    pub fn eval(&self, t: f64) -> Pt {
        self.eval_with(&self.velocities(), t)
    }

    fn eval_with(&self, vel: &[Pt], t: f64) -> Pt {
        let k = self.grid();
        let x = t.clamp(0.0, 1.0) * k as f64;
        let i = (x.floor() as usize).min(k - 1);
        let u = x - i as f64;
        let h = 1.0 / k as f64;
        let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
        let h10 = u.powi(3) - 2.0 * u * u + u;
        let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
        let h11 = u.powi(3) - u * u;
        &self.samples[i] * h00 + &vel[i] * (h10 * h) + &self.samples[i + 1] * h01 + &vel[i + 1] * (h11 * h)
    }

    /// The reparametrized path `α ∘ φ` on the same grid. `φ` must fix 0 and 1
    /// and be the identity on the sitting intervals.
    pub fn reparametrize(&self, phi: impl Fn(f64) -> f64) -> Result<SampledPath> {
        let k = self.grid();
        let vel = self.velocities();
        let samples = (0..=k)
            .map(|i| {
                let t = i as f64 / k as f64;
                if i <= self.plateau {
                    self.samples[i].clone()
                } else if i + self.plateau >= k {
                    self.samples[i].clone()
                } else {
                    self.eval_with(&vel, phi(t))
                }
            })
            .collect();
        SampledPath::new(samples, self.plateau)
    }
}

/// Natural cubic spline through points at knots `0, 1/(n-1), ..., 1`.
struct NaturalSpline {
    points: Vec<Pt>,
    second: Vec<Pt>,
}

impl NaturalSpline {
    fn new(points: &[Pt]) -> Self {
        let n = points.len();
        let dim = points[0].len();
        let mut second = vec![Pt::zeros(dim); n];
        if n > 2 {
            let h = 1.0 / (n - 1) as f64;
            let m = n - 2;
            let mut a = DMatrix::<f64>::zeros(m, m);
            for i in 0..m {
                a[(i, i)] = 4.0;
                if i > 0 {
                    a[(i, i - 1)] = 1.0;
                }
                if i + 1 < m {
                    a[(i, i + 1)] = 1.0;
                }
            }
            let lu = a.lu();
            for d in 0..dim {
                let rhs = DMatrix::from_fn(m, 1, |i, _| {
                    6.0 * (points[i + 2][d] - 2.0 * points[i + 1][d] + points[i][d]) / (h * h)
                });
                let sol = lu.solve(&rhs).expect("spline system is diagonally dominant");
                for i in 0..m {
                    second[i + 1][d] = sol[(i, 0)];
                }
            }
        }
        NaturalSpline { points: points.to_vec(), second }
    }

    fn eval(&self, s: f64) -> Pt {
        let n = self.points.len();
        let h = 1.0 / (n - 1) as f64;
        let x = s.clamp(0.0, 1.0) / h;
        let i = (x.floor() as usize).min(n - 2);
        let b = x - i as f64;
        let a = 1.0 - b;
        let p = &self.points;
        let m = &self.second;
        &p[i] * a + &p[i + 1] * b + (&m[i] * (a.powi(3) - a) + &m[i + 1] * (b.powi(3) - b)) * (h * h / 6.0)
    }
}

/// A Haefliger path `(γ0, α1, γ1, ..., αn, γn)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LazyPath {
    pub arrows: Vec<Pt>,
    pub paths: Vec<SampledPath>,
}

impl LazyPath {
    /// Number of paths `n`.
    pub fn order(&self) -> usize {
        self.paths.len()
    }

    pub fn source(&self, gp: &GroupoidPresentation) -> Pt {
        gp.source(&self.arrows[0])
    }

    pub fn target(&self, gp: &GroupoidPresentation) -> Pt {
        gp.target(&self.arrows[self.arrows.len() - 1])
    }

    /// Largest sample-wise distance to a path of the same shape, or infinity.
    pub fn dist(&self, o: &LazyPath) -> f64 {
        if self.arrows.len() != o.arrows.len() {
            return f64::INFINITY;
        }
        let a = self.arrows.iter().zip(&o.arrows).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        self.paths.iter().zip(&o.paths).map(|(x, y)| x.dist(y)).fold(a, f64::max)
    }
}

/// Validates the endpoint matching conditions.
pub fn make_lazy_path(gp: &GroupoidPresentation, arrows: Vec<Pt>, paths: Vec<SampledPath>) -> Result<LazyPath> {
    if arrows.len() != paths.len() + 1 {
        return Err(Error::Invalid(format!("{} arrows need {} paths", arrows.len(), arrows.len().saturating_sub(1))));
    }
    for (j, alpha) in paths.iter().enumerate() {
        let j1 = j + 1;
        if (gp.target(&arrows[j]) - alpha.start()).norm() > TOL_MATCH
            || (gp.source(&arrows[j1]) - alpha.end()).norm() > TOL_MATCH
        {
            return Err(Error::EndpointMismatch(j1));
        }
    }
    Ok(LazyPath { arrows, paths })
}

/// The point `x` as `(1_x, c_x, 1_x)`.
pub fn groupoid_unit(gp: &GroupoidPresentation, x: &Pt, k: usize, plateau: usize) -> LazyPath {
    let u = gp.unit(x);
    LazyPath { arrows: vec![u.clone(), u], paths: vec![SampledPath::constant(x, k, plateau)] }
}

/// `Γ′ ∘ Γ = (γ0, ..., αm, γ′0 ∘ γm, α′1, ..., γ′n)`.
pub fn groupoid_compose(gp: &GroupoidPresentation, g2: &LazyPath, g1: &LazyPath) -> Result<LazyPath> {
    let last = &g1.arrows[g1.arrows.len() - 1];
    let mid = gp.try_compose(&g2.arrows[0], last, TOL_MATCH)?;
    let mut arrows = g1.arrows[..g1.arrows.len() - 1].to_vec();
    arrows.push(mid);
    arrows.extend(g2.arrows[1..].iter().cloned());
    let mut paths = g1.paths.clone();
    paths.extend(g2.paths.iter().cloned());
    make_lazy_path(gp, arrows, paths)
}

/// `Γ⁻¹ = (γn⁻¹, αn⁻¹, ..., α1⁻¹, γ0⁻¹)`.
pub fn groupoid_invert(gp: &GroupoidPresentation, g: &LazyPath) -> LazyPath {
    LazyPath {
        arrows: g.arrows.iter().rev().map(|a| gp.inverse(a)).collect(),
        paths: g.paths.iter().rev().map(|p| p.reverse()).collect(),
    }
}

/// Move (1): replaces `(γi, α_{i+1}, γ_{i+1})` by `γ_{i+1} ∘ γi` when `α_{i+1}` is constant.
pub fn move_remove_constant(gp: &GroupoidPresentation, g: &LazyPath, i: usize) -> Result<LazyPath> {
    let alpha = g.paths.get(i).ok_or_else(|| Error::Invalid(format!("no path after arrow {i}")))?;
    let dev = alpha.max_deviation();
    if dev >= DETECT_TOL {
        return Err(Error::NotConstant(dev));
    }
    let mut arrows = g.arrows.clone();
    let merged = gp.compose(&arrows[i + 1], &arrows[i]);
    arrows.splice(i..=i + 1, [merged]);
    let mut paths = g.paths.clone();
    paths.remove(i);
    make_lazy_path(gp, arrows, paths)
}

/// Inverse of move (1): replaces `γi` by `(γi, c, 1)` with `c` constant at `t(γi)`.
pub fn move_add_constant(gp: &GroupoidPresentation, g: &LazyPath, i: usize, k: usize, plateau: usize) -> Result<LazyPath> {
    let gi = g.arrows.get(i).ok_or_else(|| Error::Invalid(format!("no arrow {i}")))?;
    let y = gp.target(gi);
    let mut arrows = g.arrows.clone();
    arrows.insert(i + 1, gp.unit(&y));
    let mut paths = g.paths.clone();
    paths.insert(i, SampledPath::constant(&y, k, plateau));
    make_lazy_path(gp, arrows, paths)
}

/// Move (2): replaces `(αi, γi, α_{i+1})` by `α_{i+1} * αi` when `γi` is a unit.
pub fn move_remove_identity(gp: &GroupoidPresentation, g: &LazyPath, i: usize) -> Result<LazyPath> {
    if i == 0 || i >= g.arrows.len() - 1 {
        return Err(Error::Invalid(format!("arrow {i} is not between two paths")));
    }
    let defect = gp.identity_defect(&g.arrows[i]);
    if defect >= DETECT_TOL {
        return Err(Error::NotIdentity(defect));
    }
    let joined = SampledPath::concat(&g.paths[i], &g.paths[i - 1])?;
    let mut arrows = g.arrows.clone();
    arrows.remove(i);
    let mut paths = g.paths.clone();
    paths.splice(i - 1..=i, [joined]);
    make_lazy_path(gp, arrows, paths)
}

/// Inverse of move (2): splits path `α_j` (1-based) at sitting sample `m` and
/// inserts a unit.
pub fn move_add_identity(gp: &GroupoidPresentation, g: &LazyPath, j: usize, m: usize) -> Result<LazyPath> {
    if j == 0 || j > g.paths.len() {
        return Err(Error::Invalid(format!("no path {j}")));
    }
    let (first, second) = g.paths[j - 1].split_at(m)?;
    let unit = gp.unit(first.end());
    let mut arrows = g.arrows.clone();
    arrows.insert(j, unit);
    let mut paths = g.paths.clone();
    paths.splice(j - 1..j, [first, second]);
    make_lazy_path(gp, arrows, paths)
}

/// Move (3): replaces `(γ_{i-1}, αi, γi)` (1-based `i`) by
/// `(ζ(0) ∘ γ_{i-1}, t ∘ ζ, γi ∘ ζ(1)⁻¹)` for a path `ζ` in X1 with `s ∘ ζ = αi`.
pub fn move_conjugate(gp: &GroupoidPresentation, g: &LazyPath, i: usize, zeta: &SampledPath) -> Result<LazyPath> {
    if i == 0 || i > g.paths.len() {
        return Err(Error::Invalid(format!("no path {i}")));
    }
    let alpha = &g.paths[i - 1];
    let src = zeta.map(|z| gp.source(z));
    let mismatch = src.dist(alpha);
    if mismatch >= DETECT_TOL {
        return Err(Error::SourceMismatch(mismatch));
    }
    let mut arrows = g.arrows.clone();
    arrows[i - 1] = gp.compose(zeta.start(), &g.arrows[i - 1]);
    arrows[i] = gp.compose(&g.arrows[i], &gp.inverse(zeta.end()));
    let mut paths = g.paths.clone();
    paths[i - 1] = zeta.map(|z| gp.target(z));
    make_lazy_path(gp, arrows, paths)
}

/// `β * α` with free reduction: constant factors are dropped and a factor
/// that exactly retraces the adjacent end of the other is cancelled.
fn splice(beta: &SampledPath, alpha: &SampledPath) -> Result<SampledPath> {
    if beta.is_constant() {
        return Ok(alpha.clone());
    }
    if alpha.is_constant() {
        return Ok(beta.clone());
    }
    let kb = beta.grid();
    let ka = alpha.grid();
    if ka > kb {
        let tail = SampledPath { samples: alpha.samples[ka - kb..].to_vec(), plateau: beta.plateau };
        if tail.reverse().dist(beta) < SPUR_TOL {
            return SampledPath::new(alpha.samples[..=ka - kb].to_vec(), alpha.plateau.min(beta.plateau));
        }
    }
    if kb > ka {
        let head = SampledPath { samples: beta.samples[..=ka].to_vec(), plateau: alpha.plateau };
        if head.reverse().dist(alpha) < SPUR_TOL {
            return SampledPath::new(beta.samples[ka..].to_vec(), alpha.plateau.min(beta.plateau));
        }
    }
    SampledPath::concat(beta, alpha)
}

/// Thin deformation by paths `ζ0, ..., ζn` in X1 with `ζi(0) = γi`: returns
/// `γ′i = ζi(1)` and `α′i = (s ∘ ζi) * αi * (t ∘ ζ_{i-1})⁻¹`.
pub fn thin_deform(gp: &GroupoidPresentation, g: &LazyPath, zetas: &[SampledPath]) -> Result<LazyPath> {
    let n = g.order();
    if zetas.len() != n + 1 {
        return Err(Error::BoundaryMismatch(format!("{} deformation paths for {} arrows", zetas.len(), n + 1)));
    }
    for (i, z) in zetas.iter().enumerate() {
        let d = (z.start() - &g.arrows[i]).norm();
        if d > TOL_MATCH {
            return Err(Error::BoundaryMismatch(format!("ζ{i}(0) differs from γ{i} by {d:.3e}")));
        }
    }
    if !zetas[0].map(|z| gp.source(z)).is_constant() {
        return Err(Error::BoundaryMismatch("s ∘ ζ0 is not constant".into()));
    }
    if !zetas[n].map(|z| gp.target(z)).is_constant() {
        return Err(Error::BoundaryMismatch("t ∘ ζn is not constant".into()));
    }
    let arrows = zetas.iter().map(|z| z.end().clone()).collect();
    let mut paths = Vec::with_capacity(n);
    for i in 1..=n {
        let back = zetas[i - 1].map(|z| gp.target(z)).reverse();
        let fwd = zetas[i].map(|z| gp.source(z));
        paths.push(splice(&fwd, &splice(&g.paths[i - 1], &back)?)?);
    }
    make_lazy_path(gp, arrows, paths)
}

/// A random lazy path of the given order starting at `x`: arrows from
/// `sample_from`, paths through a random midpoint to a random object.
pub fn random_lazy_path(
    gp: &GroupoidPresentation,
    x: &Pt,
    order: usize,
    k: usize,
    plateau: usize,
    rng: &mut dyn RngCore,
) -> Result<LazyPath> {
    let mut arrows = vec![gp.sample_from(x, rng)];
    let mut paths = Vec::with_capacity(order);
    for _ in 0..order {
        let start = gp.target(&arrows[arrows.len() - 1]);
        let mut tries = 0;
        let path = loop {
            let end = gp.sample_obj(rng);
            let jitter = Pt::from_iterator(x.len(), (0..x.len()).map(|_| rng.random_range(-0.5..0.5)));
            let mid = (&start + &end) * 0.5 + jitter;
            let p = SampledPath::waypoints(&[start.clone(), mid, end], k, plateau)?;
            if p.samples().iter().all(|s| gp.in_obj_chart(s)) {
                break p;
            }
            tries += 1;
            if tries > 100 {
                return Err(Error::OutOfChart("no random path stays in the chart".into()));
            }
        };
        arrows.push(gp.sample_from(path.end(), rng));
        paths.push(path);
    }
    make_lazy_path(gp, arrows, paths)
}

/// Largest second singular value of central-difference Jacobians of a grid
/// `H[i][j] = H(s_i, t_j)` with spacings `hs`, `ht`, over interior nodes.
pub fn rank1_certificate(grid: &[Vec<Pt>], hs: f64, ht: f64, in_chart: &dyn Fn(&Pt) -> bool) -> Result<f64> {
    for row in grid {
        for p in row {
            if !in_chart(p) {
                return Err(Error::OutOfChart(format!("{:?}", p.as_slice())));
            }
        }
    }
    let mut worst = 0.0f64;
    for i in 1..grid.len().saturating_sub(1) {
        for j in 1..grid[i].len().saturating_sub(1) {
            let ds = (&grid[i + 1][j] - &grid[i - 1][j]) / (2.0 * hs);
            let dt = (&grid[i][j + 1] - &grid[i][j - 1]) / (2.0 * ht);
            let jac = DMatrix::from_columns(&[ds, dt]);
            let sv = jac.singular_values();
            let s2 = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(if sv.len() < 2 { 0.0 } else { s2 });
        }
    }
    Ok(worst)
}
