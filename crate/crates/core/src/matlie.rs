//! Matrix Lie groups and their Lie algebras.
//!
//! Groups are subgroups of GL(n, R) given by a generator basis of the algebra
//! and a projection that snaps near-members back onto the group. Elements and
//! algebra elements are plain dense matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Dense real matrix used for group and algebra elements.
pub type Mat = DMatrix<f64>;
/// Point in a chart of R^n.
pub type Pt = DVector<f64>;

/// Global tolerance for source/target matching.
pub const TOL_MATCH: f64 = 1e-8;

/// Default radius of the logarithm chart, measured as the Frobenius norm of m - I.
pub const LOG_RADIUS: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Kind {
    Rotation,
    Translation,
    Trivial,
}

/// A matrix Lie group together with a basis of its Lie algebra.
#[derive(Clone, Debug)]
pub struct MatrixGroup {
    name: String,
    dim: usize,
    membership_tol: f64,
    log_radius: f64,
    generators: Vec<Mat>,
    pinv: Mat,
    kind: Kind,
}

fn so3_generators() -> Vec<Mat> {
    let l1 = Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
    let l2 = Mat::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0]);
    let l3 = Mat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    vec![l1, l2, l3]
}

/// The 2x2 rotation generator J = [[0,-1],[1,0]].
pub fn j2() -> Mat {
    Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// Rotation matrix R(theta) in SO(2).
pub fn rot2(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Commutator [x, y] = xy - yx.
pub fn bracket(x: &Mat, y: &Mat) -> Mat {
    x * y - y * x
}

impl MatrixGroup {
    fn build(name: &str, dim: usize, generators: Vec<Mat>, kind: Kind) -> Self {
        let k = generators.len();
        let n2 = dim * dim;
        let pinv = if k == 0 {
            Mat::zeros(0, n2)
        } else {
            let mut b = Mat::zeros(n2, k);
            for (j, g) in generators.iter().enumerate() {
                for (i, v) in g.iter().enumerate() {
                    b[(i, j)] = *v;
                }
            }
            b.pseudo_inverse(1e-14).expect("generator basis pseudo-inverse")
        };
        MatrixGroup {
            name: name.to_string(),
            dim,
            membership_tol: 1e-9,
            log_radius: LOG_RADIUS,
            generators,
            pinv,
            kind,
        }
    }

    /// The rotation group SO(2).
    pub fn so2() -> Self {
        Self::build("SO2", 2, vec![j2()], Kind::Rotation)
    }

    /// The rotation group SO(3) with the standard so(3) basis L1, L2, L3.
    pub fn so3() -> Self {
        Self::build("SO3", 3, so3_generators(), Kind::Rotation)
    }

    /// The translation group R^n realized as (n+1)x(n+1) affine matrices.
    pub fn translations(n: usize) -> Self {
        let gens = (0..n)
            .map(|i| {
                let mut m = Mat::zeros(n + 1, n + 1);
                m[(i, n)] = 1.0;
                m
            })
            .collect();
        Self::build(&format!("R^{n}"), n + 1, gens, Kind::Translation)
    }

    /// The trivial group, realized as the 1x1 identity.
    pub fn trivial() -> Self {
        Self::build("trivial", 1, Vec::new(), Kind::Trivial)
    }

    /// Looks a builtin group up by its scenario identifier.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "SO2" => Ok(Self::so2()),
            "SO3" => Ok(Self::so3()),
            "trivial" => Ok(Self::trivial()),
            _ => {
                if let Some(n) = name.strip_prefix("R^") {
                    let n: usize = n
                        .parse()
                        .map_err(|_| Error::Invalid(format!("unknown group {name}")))?;
                    if n == 0 {
                        return Err(Error::Invalid("R^0 is not supported".into()));
                    }
                    Ok(Self::translations(n))
                } else {
                    Err(Error::Invalid(format!("unknown group {name}")))
                }
            }
        }
    }

    /// Returns a copy with a different logarithm chart radius.
    pub fn with_log_radius(mut self, radius: f64) -> Self {
        self.log_radius = radius;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Matrix side length.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the Lie algebra.
    pub fn algebra_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Mat] {
        &self.generators
    }

    pub fn membership_tol(&self) -> f64 {
        self.membership_tol
    }

    pub fn is_abelian(&self) -> bool {
        self.kind != Kind::Rotation || self.dim == 2
    }

    pub fn identity(&self) -> Mat {
        Mat::identity(self.dim, self.dim)
    }

    pub fn zero_algebra(&self) -> Mat {
        Mat::zeros(self.dim, self.dim)
    }

    /// Distance of `m` from satisfying the defining equations of the group.
    pub fn membership_residual(&self, m: &Mat) -> f64 {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return f64::INFINITY;
        }
        let n = self.dim;
        match self.kind {
            Kind::Rotation => {
                let orth = (m.transpose() * m - self.identity()).norm();
                orth + (m.determinant() - 1.0).abs()
            }
            Kind::Translation => {
                let k = n - 1;
                let mut r = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        if j == k && i < k {
                            continue;
                        }
                        let want = if i == j { 1.0 } else { 0.0 };
                        r += (m[(i, j)] - want).powi(2);
                    }
                }
                r.sqrt()
            }
            Kind::Trivial => (m[(0, 0)] - 1.0).abs(),
        }
    }

    pub fn is_member(&self, m: &Mat) -> bool {
        self.membership_residual(m) <= self.membership_tol
    }

    /// Snaps a near-member onto the group.
    pub fn project(&self, m: &Mat) -> Mat {
        match self.kind {
            Kind::Rotation if self.dim == 2 => {
                let c = 0.5 * (m[(0, 0)] + m[(1, 1)]);
                let s = 0.5 * (m[(1, 0)] - m[(0, 1)]);
                let r = c.hypot(s);
                Mat::from_row_slice(2, 2, &[c / r, -s / r, s / r, c / r])
            }
            Kind::Rotation => {
                let svd = m.clone().svd(true, true);
                let u = svd.u.expect("svd u");
                let vt = svd.v_t.expect("svd v_t");
                let mut r = &u * &vt;
                if r.determinant() < 0.0 {
                    let mut u2 = u.clone();
                    let last = u2.ncols() - 1;
                    for i in 0..u2.nrows() {
                        u2[(i, last)] = -u2[(i, last)];
                    }
                    r = u2 * vt;
                }
                r
            }
            Kind::Translation => {
                let k = self.dim - 1;
                let mut r = self.identity();
                for i in 0..k {
                    r[(i, k)] = m[(i, k)];
                }
                r
            }
            Kind::Trivial => self.identity(),
        }
    }

    /// Group inverse.
    pub fn inverse(&self, a: &Mat) -> Mat {
        match self.kind {
            Kind::Rotation => a.transpose(),
            Kind::Translation => {
                let k = self.dim - 1;
                let mut r = self.identity();
                for i in 0..k {
                    r[(i, k)] = -a[(i, k)];
                }
                r
            }
            Kind::Trivial => self.identity(),
        }
    }

    /// Least-squares coordinates of `x` in the generator basis.
    pub fn coords(&self, x: &Mat) -> Pt {
        let v = Pt::from_iterator(x.len(), x.iter().copied());
        &self.pinv * v
    }

    /// Algebra element with the given generator coordinates.
    pub fn from_coords(&self, c: &Pt) -> Mat {
        let mut m = self.zero_algebra();
        for (ci, g) in c.iter().zip(&self.generators) {
            m += g * *ci;
        }
        m
    }

    /// Frobenius distance of `x` from the algebra span.
    pub fn span_residual(&self, x: &Mat) -> f64 {
        (x - self.from_coords(&self.coords(x))).norm()
    }

    /// Checks that `x` lies in the algebra span.
    pub fn check_span(&self, x: &Mat) -> Result<()> {
        let r = self.span_residual(x);
        let scale = 1.0 + x.norm();
        if r > self.membership_tol.max(1e-9) * scale {
            Err(Error::SpanViolation(r))
        } else {
            Ok(())
        }
    }

    /// Matrix exponential by scaling and squaring of a Taylor series, projected onto the group.
    pub fn exp(&self, x: &Mat) -> Result<Mat> {
        if x.iter().all(|v| *v == 0.0) {
            return Ok(self.identity());
        }
        let norm = x.norm();
        if !norm.is_finite() {
            return Err(Error::NonConvergent("non-finite argument".into()));
        }
        let s = (norm / 0.5).log2().ceil().max(0.0) as u32;
        if s > 60 {
            return Err(Error::NonConvergent("argument too large".into()));
        }
        let y = x / 2f64.powi(s as i32);
        let mut sum = self.identity();
        let mut term = self.identity();
        let mut converged = false;
        for k in 1..40 {
            term = &term * &y / k as f64;
            sum += &term;
            if term.norm() < 1e-18 * sum.norm() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergent("Taylor series".into()));
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        Ok(self.project(&sum))
    }

    /// Matrix logarithm by inverse scaling and squaring on the chart around the identity.
    pub fn log(&self, m: &Mat) -> Result<Mat> {
        let id = self.identity();
        let dist = (m - &id).norm();
        if dist >= self.log_radius {
            return Err(Error::OutOfChart(format!(
                "|m - I| = {dist:.3} exceeds log radius {}",
                self.log_radius
            )));
        }
        if self.generators.is_empty() || dist == 0.0 {
            return Ok(self.zero_algebra());
        }
        let mut y = m.clone();
        let mut k = 0i32;
        while (&y - &id).norm() > 0.05 {
            y = sqrtm(&y)?;
            k += 1;
            if k > 40 {
                return Err(Error::NonConvergent("square root iteration".into()));
            }
        }
        let a = &y - &id;
        let mut sum = self.zero_algebra();
        let mut pow = id.clone();
        let mut converged = false;
        for j in 1..80 {
            pow = &pow * &a;
            let term = &pow / j as f64;
            if j % 2 == 1 {
                sum += &term;
            } else {
                sum -= &term;
            }
            if term.norm() < 1e-18 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergent("log series".into()));
        }
        let l = sum * 2f64.powi(k);
        Ok(self.from_coords(&self.coords(&l)))
    }

    /// Adjoint action a x a^-1.
    pub fn adjoint(&self, a: &Mat, x: &Mat) -> Result<Mat> {
        let r = a * x * self.inverse(a);
        self.check_span(&r)?;
        Ok(r)
    }

    /// Matrix of Ad_a in generator coordinates.
    pub fn adjoint_matrix(&self, a: &Mat) -> Mat {
        let k = self.algebra_dim();
        let ainv = self.inverse(a);
        let mut m = Mat::zeros(k, k);
        for (j, g) in self.generators.iter().enumerate() {
            let c = self.coords(&(a * g * &ainv));
            m.set_column(j, &c);
        }
        m
    }

    /// Left Maurer-Cartan form a^-1 v.
    pub fn maurer_cartan(&self, a: &Mat, v: &Mat) -> Result<Mat> {
        let r = self.inverse(a) * v;
        self.check_span(&r)?;
        Ok(r)
    }

    /// Global coordinates for groups that admit them (SO(2) angle, R^n translation vector).
    pub fn global_coords(&self, m: &Mat) -> Option<Pt> {
        match self.kind {
            Kind::Rotation if self.dim == 2 => Some(Pt::from_element(1, m[(1, 0)].atan2(m[(0, 0)]))),
            Kind::Rotation => None,
            Kind::Translation => {
                let k = self.dim - 1;
                Some(Pt::from_iterator(k, (0..k).map(|i| m[(i, k)])))
            }
            Kind::Trivial => Some(Pt::zeros(0)),
        }
    }

    /// Random algebra element with coordinates uniform in [-scale, scale].
    pub fn random_algebra<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Mat {
        let c = Pt::from_iterator(
            self.algebra_dim(),
            (0..self.algebra_dim()).map(|_| rng.random_range(-scale..=scale)),
        );
        self.from_coords(&c)
    }

    /// Random group element exp(x) with x from [`Self::random_algebra`].
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Mat {
        let x = self.random_algebra(rng, scale);
        self.exp(&x).expect("exp of bounded algebra element")
    }
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(m: &Mat) -> Result<Mat> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = Mat::identity(n, n);
    for _ in 0..60 {
        let yi = y
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonConvergent("singular iterate".into()))?;
        let zi = z
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NonConvergent("singular iterate".into()))?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta < 1e-16 * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    let res = (&y * &y - m).norm();
    if res < 1e-13 {
        Ok(y)
    } else {
        Err(Error::NonConvergent("square root iteration".into()))
    }
}
