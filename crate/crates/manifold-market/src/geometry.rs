//! Manifold abstraction and concrete instances.
//!
//! Every supported manifold is presented through flat parameter coordinates
//! (arclength for periodic directions), so the metric is the identity, the
//! volume element is 1, tangent projection is the identity, and retraction is
//! a per-coordinate clamp (bounded) or wrap (periodic).  Supported families:
//! the unit segment with a power transport cost, the circle, the unit
//! hypercube, the flat torus, and finite products of these.

use crate::error::{ModelError, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default Monte Carlo sample count for the hypercube integral ī(A).
pub(crate) const IHAT_SAMPLES: usize = 1_000_000;
/// Fixed seed for ī(A) inside closed-form distance integrals, so that
/// manifold-level quantities do not depend on run configuration.
pub(crate) const IHAT_SEED: u64 = 0x1D1CE;

// ---------------------------------------------------------------------------
// Coordinates, points, tangent vectors
// ---------------------------------------------------------------------------

/// Whether a parameter coordinate is an interval with endpoints or a wrapped
/// (periodic) arclength coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordKind {
    Bounded,
    Periodic,
}

/// One parameter coordinate: its fundamental interval and kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordSpec {
    pub lo: f64,
    pub hi: f64,
    pub kind: CoordKind,
}

impl CoordSpec {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Reduce a raw coordinate into the fundamental domain: clamp for bounded
    /// coordinates, wrap into `[lo, hi)` for periodic ones.
    pub fn reduce(&self, v: f64) -> f64 {
        match self.kind {
            CoordKind::Bounded => v.clamp(self.lo, self.hi),
            CoordKind::Periodic => self.lo + (v - self.lo).rem_euclid(self.width()),
        }
    }

    /// Signed displacement from `a` to `b`, wrapped into `(-w/2, w/2]` for
    /// periodic coordinates.
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            CoordKind::Bounded => b - a,
            CoordKind::Periodic => wrap_signed(b - a, self.width()),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self.kind {
            CoordKind::Bounded => v >= self.lo && v <= self.hi,
            CoordKind::Periodic => v >= self.lo && v < self.hi,
        }
    }
}

/// Wrap `t` into `(-period/2, period/2]`.  The half-period itself maps to
/// `+period/2`, which fixes the gradient branch at the exact antipode.
fn wrap_signed(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    if r > period / 2.0 {
        r - period
    } else {
        r
    }
}

/// A point in parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A tangent vector attached to a base point.  All parameterizations here are
/// flat, so components live directly in parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: Point, components: Vec<f64>) -> Self {
        Self { base, components }
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

// ---------------------------------------------------------------------------
// Distance integrals and quadrature
// ---------------------------------------------------------------------------

/// How a [`DistanceIntegrals`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Numeric,
}

/// The two aggregate integrals of the distance function that enter the
/// equilibrium conditions: `I1 = ∫ (∇_y d)⊗(∇_y d) dV` and the weak second
/// derivative `I2 = ∫ ∇²_y d dV`, both evaluated at a fixed point `y`.
#[derive(Debug, Clone)]
pub struct DistanceIntegrals {
    pub i1: DMatrix<f64>,
    pub i2: DMatrix<f64>,
    pub evaluation_point: Point,
    pub provenance: Provenance,
}

impl DistanceIntegrals {
    /// Scalar reduction `(i1, i2)` when both matrices are multiples of the
    /// identity (within a small tolerance), as on isotropic manifolds.
    pub fn isotropic(&self) -> Option<(f64, f64)> {
        let s1 = scalar_multiple_of_identity(&self.i1)?;
        let s2 = scalar_multiple_of_identity(&self.i2)?;
        Some((s1, s2))
    }

    /// Sorted eigenvalues of `I1` (symmetric by construction).
    pub fn i1_eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.i1)
    }

    /// Sorted eigenvalues of `I2`.
    pub fn i2_eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.i2)
    }
}

fn scalar_multiple_of_identity(m: &DMatrix<f64>) -> Option<f64> {
    let d = m.nrows();
    let s = m[(0, 0)];
    let scale = m.amax().max(1.0);
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { s } else { 0.0 };
            if (m[(i, j)] - want).abs() > 1e-9 * scale {
                return None;
            }
        }
    }
    Some(s)
}

pub(crate) fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eigs: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.total_cmp(b));
    eigs
}

/// Nodes and weights realizing `∫_M · dV` in parameter coordinates.  Weights
/// include the (identity) volume element, so they sum to the total volume.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub descriptor: String,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

// ---------------------------------------------------------------------------
// Manifolds
// ---------------------------------------------------------------------------

/// A manifold presented through its flat parameter space.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldModel {
    /// The unit interval `[0, 1]` with transport cost `|y − x|^α`, `α ≥ 1`.
    Segment { alpha: f64 },
    /// A circle of given radius, arclength coordinate in `[0, 2πR)`.
    Circle { radius: f64 },
    /// The unit hypercube `[0, 1]^A`, `A ≥ 2`, Euclidean distance.
    Hypercube { dim: usize },
    /// A flat torus: product of circles with the given radii.
    Torus { radii: Vec<f64> },
    /// A finite product; squared distance is the sum of factor squared
    /// distances (distance-squared splitting).
    Product(Vec<ManifoldModel>),
}

impl ManifoldModel {
    pub fn segment(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(ModelError::InvalidInput(format!(
                "segment cost exponent must satisfy alpha >= 1, got {alpha}"
            )));
        }
        Ok(Self::Segment { alpha })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(ModelError::InvalidInput(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        Ok(Self::Circle { radius })
    }

    pub fn hypercube(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(ModelError::InvalidInput(format!(
                "hypercube dimension must be >= 2 (use a segment for 1-D), got {dim}"
            )));
        }
        Ok(Self::Hypercube { dim })
    }

    pub fn torus(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(ModelError::InvalidInput(
                "torus radii must be a non-empty list of positive reals".into(),
            ));
        }
        Ok(Self::Torus { radii })
    }

    pub fn product(factors: Vec<ManifoldModel>) -> Result<Self> {
        if factors.is_empty() {
            return Err(ModelError::InvalidInput(
                "product manifold needs at least one factor".into(),
            ));
        }
        Ok(Self::Product(factors))
    }

    // -- metadata -----------------------------------------------------------

    pub fn intrinsic_dimension(&self) -> usize {
        match self {
            Self::Segment { .. } | Self::Circle { .. } => 1,
            Self::Hypercube { dim } => *dim,
            Self::Torus { radii } => radii.len(),
            Self::Product(fs) => fs.iter().map(|f| f.intrinsic_dimension()).sum(),
        }
    }

    /// Per-coordinate fundamental intervals and kinds.
    pub fn coord_specs(&self) -> Vec<CoordSpec> {
        match self {
            Self::Segment { .. } => vec![CoordSpec {
                lo: 0.0,
                hi: 1.0,
                kind: CoordKind::Bounded,
            }],
            Self::Circle { radius } => vec![CoordSpec {
                lo: 0.0,
                hi: std::f64::consts::TAU * radius,
                kind: CoordKind::Periodic,
            }],
            Self::Hypercube { dim } => vec![
                CoordSpec {
                    lo: 0.0,
                    hi: 1.0,
                    kind: CoordKind::Bounded,
                };
                *dim
            ],
            Self::Torus { radii } => radii
                .iter()
                .map(|r| CoordSpec {
                    lo: 0.0,
                    hi: std::f64::consts::TAU * r,
                    kind: CoordKind::Periodic,
                })
                .collect(),
            Self::Product(fs) => fs.iter().flat_map(|f| f.coord_specs()).collect(),
        }
    }

    /// Per-coordinate interval `[a_k, b_k]`.
    pub fn parameter_box(&self) -> Vec<(f64, f64)> {
        self.coord_specs().iter().map(|c| (c.lo, c.hi)).collect()
    }

    /// The power applied to the segment distance (1 everywhere else; products
    /// keep the deformation inside the segment factor).
    pub fn cost_exponent(&self) -> f64 {
        match self {
            Self::Segment { alpha } => *alpha,
            _ => 1.0,
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.coord_specs().iter().map(|c| c.width()).product()
    }

    pub fn has_boundary(&self) -> bool {
        self.coord_specs()
            .iter()
            .any(|c| c.kind == CoordKind::Bounded)
    }

    /// Largest attainable distance between two points.
    pub fn diameter(&self) -> f64 {
        match self {
            Self::Segment { .. } => 1.0, // 1^alpha
            Self::Circle { radius } => std::f64::consts::PI * radius,
            Self::Hypercube { dim } => (*dim as f64).sqrt(),
            Self::Torus { radii } => radii
                .iter()
                .map(|r| {
                    let h = std::f64::consts::PI * r;
                    h * h
                })
                .sum::<f64>()
                .sqrt(),
            Self::Product(fs) => fs
                .iter()
                .map(|f| {
                    let d = f.diameter();
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        }
    }

    // -- points -------------------------------------------------------------

    pub fn check_point(&self, p: &Point) -> Result<()> {
        let d = self.intrinsic_dimension();
        if p.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                got: p.dim(),
            });
        }
        for (c, spec) in p.coords.iter().zip(self.coord_specs()) {
            if !c.is_finite() || !spec.contains(*c) {
                return Err(ModelError::InvalidInput(format!(
                    "coordinate {c} outside fundamental domain [{}, {})",
                    spec.lo, spec.hi
                )));
            }
        }
        Ok(())
    }

    /// Reduce raw coordinates into the fundamental domain (wrap/clamp).
    pub fn reduce(&self, coords: &[f64]) -> Point {
        Point::new(
            coords
                .iter()
                .zip(self.coord_specs())
                .map(|(c, spec)| spec.reduce(*c))
                .collect(),
        )
    }

    /// Coordinate displacement from `a` to `b` with periodic wrapping; used
    /// for convergence metrics on flat parameterizations.
    pub fn displacement(&self, a: &Point, b: &Point) -> Vec<f64> {
        a.coords
            .iter()
            .zip(&b.coords)
            .zip(self.coord_specs())
            .map(|((x, y), spec)| spec.displacement(*x, *y))
            .collect()
    }

    /// A canonical median representative (center of bounded factors, origin of
    /// periodic ones).  Every supported family is reflection-symmetric about
    /// this point.
    pub fn canonical_median(&self) -> Point {
        Point::new(
            self.coord_specs()
                .iter()
                .map(|c| match c.kind {
                    CoordKind::Bounded => 0.5 * (c.lo + c.hi),
                    CoordKind::Periodic => c.lo,
                })
                .collect(),
        )
    }

    /// Uniform random point from the given RNG.
    pub fn sample_point(&self, rng: &mut impl Rng) -> Point {
        Point::new(
            self.coord_specs()
                .iter()
                .map(|c| rng.random_range(c.lo..c.hi))
                .collect(),
        )
    }

    // -- distance and derivatives -------------------------------------------

    /// Geodesic (transport-cost) distance between two points.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.dist_slice(&x.coords, &y.coords))
    }

    pub(crate) fn dist_slice(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Self::Segment { alpha } => (y[0] - x[0]).abs().powf(*alpha),
            Self::Circle { radius } => {
                wrap_signed(y[0] - x[0], std::f64::consts::TAU * radius).abs()
            }
            Self::Hypercube { .. } => x
                .iter()
                .zip(y)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
            Self::Torus { radii } => x
                .iter()
                .zip(y)
                .zip(radii)
                .map(|((a, b), r)| {
                    let d = wrap_signed(b - a, std::f64::consts::TAU * r);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Self::Product(fs) => {
                let mut acc = 0.0;
                let mut off = 0;
                for f in fs {
                    let k = f.intrinsic_dimension();
                    let d = f.dist_slice(&x[off..off + k], &y[off..off + k]);
                    acc += d * d;
                    off += k;
                }
                acc.sqrt()
            }
        }
    }

    /// Gradient of `d(x, ·)` at `y`.  Conventions at non-differentiable loci:
    /// zero vector at `x = y`, positive branch at the exact circle antipode.
    pub fn distance_gradient(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        self.check_point(x)?;
        self.check_point(y)?;
        let mut out = vec![0.0; self.intrinsic_dimension()];
        self.dist_grad_slice(&x.coords, &y.coords, &mut out);
        Ok(TangentVector::new(y.clone(), out))
    }

    /// Fills `out` with the gradient w.r.t. `y` and returns the distance.
    pub(crate) fn dist_grad_slice(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        match self {
            Self::Segment { alpha } => {
                let delta = y[0] - x[0];
                if delta == 0.0 {
                    out[0] = 0.0;
                    0.0
                } else {
                    out[0] = alpha * delta.signum() * delta.abs().powf(alpha - 1.0);
                    delta.abs().powf(*alpha)
                }
            }
            Self::Circle { radius } => {
                let delta = wrap_signed(y[0] - x[0], std::f64::consts::TAU * radius);
                out[0] = if delta == 0.0 { 0.0 } else { delta.signum() };
                delta.abs()
            }
            Self::Hypercube { dim } => {
                let mut d2 = 0.0;
                for k in 0..*dim {
                    let r = y[k] - x[k];
                    out[k] = r;
                    d2 += r * r;
                }
                let d = d2.sqrt();
                if d == 0.0 {
                    out.fill(0.0);
                } else {
                    for v in out.iter_mut() {
                        *v /= d;
                    }
                }
                d
            }
            Self::Torus { radii } => {
                let mut d2 = 0.0;
                for (k, r) in radii.iter().enumerate() {
                    let delta = wrap_signed(y[k] - x[k], std::f64::consts::TAU * r);
                    out[k] = delta;
                    d2 += delta * delta;
                }
                let d = d2.sqrt();
                if d == 0.0 {
                    out.fill(0.0);
                } else {
                    for v in out.iter_mut() {
                        *v /= d;
                    }
                }
                d
            }
            Self::Product(fs) => {
                // Two passes: factor distances/gradients, then chain rule
                // through D = sqrt(Σ d_i²).
                let mut off = 0;
                let mut d2 = 0.0;
                let mut factor_d = Vec::with_capacity(fs.len());
                for f in fs {
                    let k = f.intrinsic_dimension();
                    let d = f.dist_grad_slice(
                        &x[off..off + k],
                        &y[off..off + k],
                        &mut out[off..off + k],
                    );
                    factor_d.push((off, k, d));
                    d2 += d * d;
                    off += k;
                }
                let total = d2.sqrt();
                if total == 0.0 {
                    out.fill(0.0);
                    return 0.0;
                }
                for (off, k, d) in factor_d {
                    let scale = d / total;
                    for v in out[off..off + k].iter_mut() {
                        *v *= scale;
                    }
                }
                total
            }
        }
    }

    // -- tangent space and retraction ---------------------------------------

    /// Projection of an ambient vector onto the tangent space at `y`.  All
    /// parameterizations here are flat, so this is the identity (and trivially
    /// idempotent); it exists to keep the update rule's structure explicit.
    pub fn tangent_project(&self, y: &Point, v: &[f64]) -> Result<TangentVector> {
        self.check_point(y)?;
        if v.len() != self.intrinsic_dimension() {
            return Err(ModelError::DimensionMismatch {
                expected: self.intrinsic_dimension(),
                got: v.len(),
            });
        }
        Ok(TangentVector::new(y.clone(), v.to_vec()))
    }

    /// Retraction: move along the tangent vector, then clamp bounded
    /// coordinates and wrap periodic ones.
    pub fn retract(&self, y: &Point, v: &TangentVector) -> Point {
        debug_assert_eq!(y.dim(), v.components.len());
        let raw: Vec<f64> = y
            .coords
            .iter()
            .zip(&v.components)
            .map(|(a, b)| a + b)
            .collect();
        self.reduce(&raw)
    }

    // -- quadrature ---------------------------------------------------------

    /// Default per-dimension (d ≤ 2) node count or Monte Carlo sample count
    /// (d ≥ 3).
    pub fn default_resolution(&self) -> usize {
        match self.intrinsic_dimension() {
            1 => 512,
            2 => 128,
            _ => 100_000,
        }
    }

    /// Build a quadrature rule.  For d ≤ 2: a tensor product of deterministic
    /// 1-D rules (Gauss–Legendre on bounded coordinates, midpoint on periodic
    /// ones), `resolution` nodes per dimension; the seed is ignored.  For
    /// d ≥ 3: `resolution` seeded uniform samples with equal weights.
    pub fn build_quadrature(&self, resolution: usize, seed: u64) -> Result<QuadratureRule> {
        if resolution < 2 {
            return Err(ModelError::InvalidInput(format!(
                "quadrature resolution must be >= 2, got {resolution}"
            )));
        }
        let d = self.intrinsic_dimension();
        let specs = self.coord_specs();
        if d <= 2 {
            let axes: Vec<(Vec<f64>, Vec<f64>)> = specs
                .iter()
                .map(|c| match c.kind {
                    CoordKind::Bounded => gauss_legendre_on(c.lo, c.hi, resolution),
                    CoordKind::Periodic => {
                        let h = c.width() / resolution as f64;
                        (
                            (0..resolution)
                                .map(|i| c.lo + (i as f64 + 0.5) * h)
                                .collect(),
                            vec![h; resolution],
                        )
                    }
                })
                .collect();
            let mut nodes = Vec::with_capacity(resolution.pow(d as u32));
            let mut weights = Vec::with_capacity(resolution.pow(d as u32));
            if d == 1 {
                for (x, w) in axes[0].0.iter().zip(&axes[0].1) {
                    nodes.push(Point::new(vec![*x]));
                    weights.push(*w);
                }
            } else {
                for (x0, w0) in axes[0].0.iter().zip(&axes[0].1) {
                    for (x1, w1) in axes[1].0.iter().zip(&axes[1].1) {
                        nodes.push(Point::new(vec![*x0, *x1]));
                        weights.push(w0 * w1);
                    }
                }
            }
            Ok(QuadratureRule {
                nodes,
                weights,
                descriptor: format!("tensor:{resolution}^{d}"),
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = self.total_volume() / resolution as f64;
            let nodes = (0..resolution)
                .map(|_| {
                    Point::new(specs.iter().map(|c| rng.random_range(c.lo..c.hi)).collect())
                })
                .collect();
            Ok(QuadratureRule {
                nodes,
                weights: vec![w; resolution],
                descriptor: format!("mc:{resolution}:seed{seed}"),
            })
        }
    }

    // -- aggregate distance integrals ---------------------------------------

    /// `I1` and `I2` at `y`, using closed forms where the model families
    /// provide them and the numeric estimator otherwise.
    pub fn aggregate_distance_integrals(&self, y: &Point) -> Result<DistanceIntegrals> {
        self.check_point(y)?;
        let med = self.canonical_median();
        let at_median = self
            .displacement(y, &med)
            .iter()
            .all(|d| d.abs() < 1e-9 * self.diameter().max(1.0));
        match self {
            Self::Segment { alpha } if at_median => {
                // I1 = α² ∫ |1/2−x|^{2α−2} dx = α² 2^{2−2α}/(2α−1);
                // I2 = F''(1/2) with F the median objective: α 2^{2−α}.
                let i1 = alpha * alpha * 2f64.powf(2.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
                let i2 = alpha * 2f64.powf(2.0 - alpha);
                Ok(self.closed_form(y, i1, i2))
            }
            Self::Circle { radius } => {
                // |∇d| = 1 a.e. so I1 = V; boundaryless so I2 = 0.
                Ok(self.closed_form(y, std::f64::consts::TAU * radius, 0.0))
            }
            Self::Hypercube { dim } if at_median => {
                let a = *dim;
                let (ihat, _se) = monte_carlo_ihat(a, IHAT_SAMPLES, IHAT_SEED);
                let i1 = DMatrix::identity(a, a) / a as f64;
                let i2 = DMatrix::identity(a, a) * (ihat / a as f64);
                Ok(DistanceIntegrals {
                    i1,
                    i2,
                    evaluation_point: y.clone(),
                    provenance: Provenance::ClosedForm,
                })
            }
            Self::Torus { radii } if radii.windows(2).all(|w| w[0] == w[1]) => {
                // Equal radii: isotropy gives I1 = (V/d)·Id; boundaryless I2 = 0.
                let d = radii.len();
                let v = self.total_volume();
                let i1 = DMatrix::identity(d, d) * (v / d as f64);
                Ok(DistanceIntegrals {
                    i1,
                    i2: DMatrix::zeros(d, d),
                    evaluation_point: y.clone(),
                    provenance: Provenance::ClosedForm,
                })
            }
            _ => self.numeric_distance_integrals(y, self.default_resolution(), IHAT_SEED),
        }
    }

    fn closed_form(&self, y: &Point, i1: f64, i2: f64) -> DistanceIntegrals {
        let d = self.intrinsic_dimension();
        DistanceIntegrals {
            i1: DMatrix::identity(d, d) * i1,
            i2: DMatrix::identity(d, d) * i2,
            evaluation_point: y.clone(),
            provenance: Provenance::ClosedForm,
        }
    }

    /// Numeric estimator for the aggregate integrals: direct quadrature for
    /// `I1`, and a finite-difference Hessian of the median objective
    /// `F(y) = ∫ d(x, y) dV` for the weak second derivative `I2` (for 1-D
    /// manifolds `F` is evaluated with kink-splitting Gauss–Legendre panels so
    /// the differences see a smooth function).
    pub fn numeric_distance_integrals(
        &self,
        y: &Point,
        resolution: usize,
        seed: u64,
    ) -> Result<DistanceIntegrals> {
        self.check_point(y)?;
        let d = self.intrinsic_dimension();
        let rule = self.build_quadrature(resolution, seed)?;

        let mut i1: DMatrix<f64> = DMatrix::zeros(d, d);
        let mut grad = vec![0.0; d];
        for (node, w) in rule.nodes.iter().zip(&rule.weights) {
            self.dist_grad_slice(&node.coords, &y.coords, &mut grad);
            for a in 0..d {
                for b in 0..d {
                    i1[(a, b)] += w * grad[a] * grad[b];
                }
            }
        }

        let h = 1e-3 * self.diameter();
        let f = |coords: &[f64]| -> f64 {
            if d == 1 {
                self.split_median_objective_1d(coords[0])
            } else {
                let mut acc = 0.0;
                for (node, w) in rule.nodes.iter().zip(&rule.weights) {
                    acc += w * self.dist_slice(&node.coords, coords);
                }
                acc
            }
        };
        let mut i2: DMatrix<f64> = DMatrix::zeros(d, d);
        let f0 = f(&y.coords);
        for a in 0..d {
            let mut p = y.coords.clone();
            p[a] += h;
            let fp = f(&p);
            p[a] = y.coords[a] - h;
            let fm = f(&p);
            i2[(a, a)] = (fp + fm - 2.0 * f0) / (h * h);
            for b in (a + 1)..d {
                let mut q = y.coords.clone();
                q[a] += h;
                q[b] += h;
                let fpp = f(&q);
                q[b] = y.coords[b] - h;
                let fpm = f(&q);
                q[a] = y.coords[a] - h;
                let fmm = f(&q);
                q[b] = y.coords[b] + h;
                let fmp = f(&q);
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                i2[(a, b)] = v;
                i2[(b, a)] = v;
            }
        }
        if i1.iter().any(|v| !v.is_finite()) || i2.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::EstimationFailed { residual: f64::NAN });
        }
        Ok(DistanceIntegrals {
            i1,
            i2,
            evaluation_point: y.clone(),
            provenance: Provenance::Numeric,
        })
    }

    /// `∫ d(x, y) dx` for 1-D manifolds with Gauss–Legendre panels split at
    /// the kink of the distance function (at `y` itself; for the circle the
    /// domain is recentred on `y` so the antipodal kink sits at the panel
    /// ends).
    pub(crate) fn split_median_objective_1d(&self, y: f64) -> f64 {
        const ORDER: usize = 64;
        let spec = self.coord_specs()[0];
        let panels: [(f64, f64); 2] = match spec.kind {
            CoordKind::Bounded => [(spec.lo, y), (y, spec.hi)],
            CoordKind::Periodic => {
                let half = spec.width() / 2.0;
                [(y - half, y), (y, y + half)]
            }
        };
        let mut acc = 0.0;
        for (a, b) in panels {
            if b - a < 1e-14 {
                continue;
            }
            let (xs, ws) = gauss_legendre_on(a, b, ORDER);
            for (x, w) in xs.iter().zip(&ws) {
                // dist_slice wraps periodic coordinates itself, so raw
                // (unreduced) panel coordinates are fine.
                acc += w * self.dist_slice(&[*x], &[y]);
            }
        }
        acc
    }
}

// ---------------------------------------------------------------------------
// Hypercube Monte Carlo integral
// ---------------------------------------------------------------------------

/// Seeded Monte Carlo estimate of `ī(A) = ∫_{[0,1]^A} (A−1)/‖x − c‖ dx`,
/// returning `(mean, standard_error)`.  Samples closer than 1e-12 to the
/// center are redrawn (the integrand is integrable; this only guards
/// floating-point overflow).
pub(crate) fn monte_carlo_ihat(a: usize, samples: usize, seed: u64) -> (f64, f64) {
    if a <= 1 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut drawn = 0usize;
    while drawn < samples {
        let r2: f64 = (0..a)
            .map(|_| {
                let x: f64 = rng.random_range(-0.5..0.5);
                x * x
            })
            .sum();
        let r = r2.sqrt();
        if r < 1e-12 {
            continue;
        }
        let v = (a as f64 - 1.0) / r;
        sum += v;
        sum_sq += v * v;
        drawn += 1;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn seg() -> ManifoldModel {
        ManifoldModel::segment(1.0).unwrap()
    }

    fn circ() -> ManifoldModel {
        ManifoldModel::circle(1.0).unwrap()
    }

    fn square() -> ManifoldModel {
        ManifoldModel::hypercube(2).unwrap()
    }

    fn cylinder() -> ManifoldModel {
        ManifoldModel::product(vec![circ(), seg()]).unwrap()
    }

    #[test]
    fn segment_distance_is_absolute_difference() {
        let m = seg();
        let d = m
            .distance(&Point::new(vec![0.2]), &Point::new(vec![0.7]))
            .unwrap();
        assert_abs_diff_eq!(d, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn circle_distance_takes_short_arc() {
        let m = circ();
        let d = m
            .distance(&Point::new(vec![0.1]), &Point::new(vec![TAU - 0.1]))
            .unwrap();
        assert_abs_diff_eq!(d, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn product_distance_splits_in_squares() {
        let m = ManifoldModel::product(vec![seg(), circ()]).unwrap();
        let d = m
            .distance(&Point::new(vec![0.0, 0.0]), &Point::new(vec![0.3, PI]))
            .unwrap();
        assert_abs_diff_eq!(d, (0.3f64 * 0.3 + PI * PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn distance_dimension_mismatch_is_an_error() {
        let m = seg();
        let err = m
            .distance(&Point::new(vec![0.1, 0.2]), &Point::new(vec![0.3]))
            .unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn segment_gradient_is_sign() {
        let m = seg();
        let g = m
            .distance_gradient(&Point::new(vec![0.2]), &Point::new(vec![0.7]))
            .unwrap();
        assert_abs_diff_eq!(g.components[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn circle_gradient_short_arc_sign() {
        let m = circ();
        let g = m
            .distance_gradient(&Point::new(vec![0.0]), &Point::new(vec![PI / 2.0]))
            .unwrap();
        assert_abs_diff_eq!(g.components[0], 1.0, epsilon = 1e-15);
        // Positive branch at the exact antipode.
        let g = m
            .distance_gradient(&Point::new(vec![0.0]), &Point::new(vec![PI]))
            .unwrap();
        assert_abs_diff_eq!(g.components[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn hypercube_gradient_is_unit_radial() {
        let m = square();
        let g = m
            .distance_gradient(&Point::new(vec![1.0, 1.0]), &Point::new(vec![0.5, 0.5]))
            .unwrap();
        let e = -1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(g.components[0], e, epsilon = 1e-12);
        assert_abs_diff_eq!(g.components[1], e, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [
            ManifoldModel::segment(2.0).unwrap(),
            seg(),
            circ(),
            square(),
            ManifoldModel::torus(vec![1.0, 0.5]).unwrap(),
            cylinder(),
        ] {
            let d = m.intrinsic_dimension();
            let mut checked = 0;
            while checked < 50 {
                let x = m.sample_point(&mut rng);
                let y = m.sample_point(&mut rng);
                if m.distance(&x, &y).unwrap() < 1e-2 {
                    continue;
                }
                // Stay away from the circle/torus cut locus too.
                let far_from_cut = m
                    .displacement(&x, &y)
                    .iter()
                    .zip(m.coord_specs())
                    .all(|(dx, c)| {
                        c.kind == CoordKind::Bounded || (dx.abs() - c.width() / 2.0).abs() > 1e-2
                    });
                if !far_from_cut {
                    continue;
                }
                let g = m.distance_gradient(&x, &y).unwrap();
                let h = 1e-6;
                for k in 0..d {
                    let mut p = y.coords.clone();
                    p[k] += h;
                    let dp = m.dist_slice(&x.coords, &p);
                    p[k] = y.coords[k] - h;
                    let dm = m.dist_slice(&x.coords, &p);
                    let fd = (dp - dm) / (2.0 * h);
                    let denom = fd.abs().max(1e-8);
                    assert!(
                        (g.components[k] - fd).abs() / denom < 1e-5,
                        "fd mismatch on {m:?}: {} vs {fd}",
                        g.components[k]
                    );
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn retract_clamps_and_wraps() {
        let m = seg();
        let y = Point::new(vec![0.9]);
        let r = m.retract(&y, &TangentVector::new(y.clone(), vec![0.3]));
        assert_abs_diff_eq!(r.coords[0], 1.0, epsilon = 1e-15);

        let m = circ();
        let y = Point::new(vec![6.0]);
        let r = m.retract(&y, &TangentVector::new(y.clone(), vec![0.5]));
        assert_abs_diff_eq!(r.coords[0], 6.5 - TAU, epsilon = 1e-12);

        let y = Point::new(vec![1.0]);
        let r = m.retract(&y, &TangentVector::new(y.clone(), vec![0.0]));
        assert_abs_diff_eq!(r.coords[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn retract_is_first_order_consistent() {
        // In flat coordinates the retraction is exact for interior points:
        // the deviation from y + tv vanishes for all small t.
        let m = square();
        let y = Point::new(vec![0.4, 0.6]);
        let v = [0.3, -0.7];
        for t in [1e-2, 1e-3, 1e-4] {
            let step = TangentVector::new(y.clone(), vec![t * v[0], t * v[1]]);
            let r = m.retract(&y, &step);
            let dev = ((r.coords[0] - y.coords[0] - t * v[0]).powi(2)
                + (r.coords[1] - y.coords[1] - t * v[1]).powi(2))
            .sqrt();
            assert!(dev <= 1e-12 * t, "deviation {dev} at t={t}");
        }
    }

    #[test]
    fn tangent_projection_is_identity_and_idempotent() {
        let m = cylinder();
        let y = m.canonical_median();
        let v = vec![0.3, -1.2];
        let p1 = m.tangent_project(&y, &v).unwrap();
        assert_eq!(p1.components, v);
        let p2 = m.tangent_project(&y, &p1.components).unwrap();
        assert_eq!(p2.components, p1.components);
    }

    #[test]
    fn quadrature_weight_sums_match_volumes() {
        let q = seg().build_quadrature(256, 0).unwrap();
        assert_eq!(q.len(), 256);
        assert_relative_eq!(q.total_weight(), 1.0, max_relative = 1e-12);

        let q = circ().build_quadrature(256, 0).unwrap();
        assert_relative_eq!(q.total_weight(), TAU, max_relative = 1e-12);

        let q = ManifoldModel::hypercube(3)
            .unwrap()
            .build_quadrature(100_000, 42)
            .unwrap();
        assert_relative_eq!(q.total_weight(), 1.0, max_relative = 1e-3);

        let err = seg().build_quadrature(1, 0).unwrap_err();
        assert!(matches!(err, ModelError::InvalidInput(_)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_on(0.0, 1.0, 16);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert_relative_eq!(integral, 1.0 / 3.0, max_relative = 1e-13);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert_relative_eq!(integral, 1.0 / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn segment_closed_form_integrals() {
        let m = seg();
        let ints = m.aggregate_distance_integrals(&m.canonical_median()).unwrap();
        let (i1, i2) = ints.isotropic().unwrap();
        assert_abs_diff_eq!(i1, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(i2, 2.0, epsilon = 1e-14);
        assert_eq!(ints.provenance, Provenance::ClosedForm);
    }

    #[test]
    fn power_cost_closed_form_integrals() {
        // alpha = 2: I1 = α² 2^{2−2α}/(2α−1) = 1/3, I2 = α 2^{2−α} = 2.
        let m = ManifoldModel::segment(2.0).unwrap();
        let ints = m.aggregate_distance_integrals(&m.canonical_median()).unwrap();
        let (i1, i2) = ints.isotropic().unwrap();
        assert_abs_diff_eq!(i1, 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(i2, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn circle_closed_form_integrals() {
        let m = circ();
        let ints = m
            .aggregate_distance_integrals(&Point::new(vec![1.3]))
            .unwrap();
        let (i1, i2) = ints.isotropic().unwrap();
        assert_abs_diff_eq!(i1, TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(i2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn hypercube_closed_form_integrals_use_ihat() {
        let m = square();
        let ints = m.aggregate_distance_integrals(&m.canonical_median()).unwrap();
        let (i1, i2) = ints.isotropic().unwrap();
        assert_abs_diff_eq!(i1, 0.5, epsilon = 1e-12);
        // Exact value: ī(2)/2 = 2 ln(1 + √2) ≈ 1.76274717; Monte Carlo noise
        // stays well inside this band.
        assert_abs_diff_eq!(i2, 2.0 * (1.0 + 2f64.sqrt()).ln(), epsilon = 0.03);
    }

    #[test]
    fn numeric_path_reproduces_closed_forms() {
        // Spec tolerance: 1e-3 relative against every closed form above.
        for (m, want_i1, want_i2) in [
            (seg(), 1.0, 2.0),
            (ManifoldModel::segment(2.0).unwrap(), 1.0 / 3.0, 2.0),
            (circ(), TAU, 0.0),
        ] {
            let y = m.canonical_median();
            let ints = m.numeric_distance_integrals(&y, 512, 0).unwrap();
            let (i1, i2) = ints.isotropic().unwrap();
            assert!(
                (i1 - want_i1).abs() <= 1e-3 * want_i1.abs().max(1.0),
                "I1 numeric {i1} vs {want_i1} on {m:?}"
            );
            assert!(
                (i2 - want_i2).abs() <= 1e-3 * want_i2.abs().max(1.0),
                "I2 numeric {i2} vs {want_i2} on {m:?}"
            );
        }
    }

    #[test]
    fn torus_integrals_are_boundaryless() {
        let m = ManifoldModel::torus(vec![1.0, 1.0]).unwrap();
        let ints = m.aggregate_distance_integrals(&m.canonical_median()).unwrap();
        let (i1, i2) = ints.isotropic().unwrap();
        assert_relative_eq!(i1, m.total_volume() / 2.0, max_relative = 1e-12);
        assert_abs_diff_eq!(i2, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn metadata_is_consistent() {
        let m = cylinder();
        assert_eq!(m.intrinsic_dimension(), 2);
        assert!(m.has_boundary());
        assert_relative_eq!(m.total_volume(), TAU, max_relative = 1e-12);
        assert_relative_eq!(m.diameter(), (PI * PI + 1.0).sqrt(), max_relative = 1e-12);

        let t = ManifoldModel::torus(vec![1.0]).unwrap();
        assert!(!t.has_boundary());
        assert_relative_eq!(
            t.total_volume(),
            t.build_quadrature(64, 0).unwrap().total_weight(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn ihat_monte_carlo_matches_exact_square_value() {
        let (est, se) = monte_carlo_ihat(2, IHAT_SAMPLES, IHAT_SEED);
        let exact = 4.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((est - exact).abs() < 0.05, "ihat {est} vs exact {exact}");
        assert!(se > 0.0 && se < 0.05);
    }

    fn arbitrary_manifold() -> impl Strategy<Value = ManifoldModel> {
        prop_oneof![
            Just(seg()),
            Just(circ()),
            Just(square()),
            Just(ManifoldModel::torus(vec![1.0, 0.7]).unwrap()),
            Just(cylinder()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn distance_is_symmetric_and_triangular(m in arbitrary_manifold(), s in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (a, b, c) = (
                m.sample_point(&mut rng),
                m.sample_point(&mut rng),
                m.sample_point(&mut rng),
            );
            let dab = m.distance(&a, &b).unwrap();
            let dba = m.distance(&b, &a).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!(m.distance(&a, &a).unwrap() == 0.0);
            // Unit-speed instances (cost exponent 1) are genuine metrics.
            let dac = m.distance(&a, &c).unwrap();
            let dcb = m.distance(&c, &b).unwrap();
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn product_splitting_is_exact(s in any::<u64>()) {
            let m = cylinder();
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let a = m.sample_point(&mut rng);
            let b = m.sample_point(&mut rng);
            let d = m.distance(&a, &b).unwrap();
            let d0 = circ()
                .distance(&Point::new(vec![a.coords[0]]), &Point::new(vec![b.coords[0]]))
                .unwrap();
            let d1 = seg()
                .distance(&Point::new(vec![a.coords[1]]), &Point::new(vec![b.coords[1]]))
                .unwrap();
            prop_assert!((d * d - (d0 * d0 + d1 * d1)).abs() < 1e-12);
        }

        #[test]
        fn reduce_lands_in_fundamental_domain(s in any::<u64>(), scale in -10.0..10.0f64) {
            let m = cylinder();
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let p = m.sample_point(&mut rng);
            let raw: Vec<f64> = p.coords.iter().map(|c| c * scale).collect();
            let r = m.reduce(&raw);
            prop_assert!(m.check_point(&r).is_ok());
        }
    }
}
