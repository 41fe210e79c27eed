//! Analytic checkers for the concentrated Nash equilibrium and its
//! reachability: median set, price and curvature conditions, β thresholds,
//! learning-rate bounds, and welfare verdicts.

use crate::dynamics::{OutcomeKind, OutcomeLabel, Trajectory, EPS_CONC_FACTOR};
use crate::error::{ModelError, Result};
use crate::geometry::{
    gauss_legendre_on, monte_carlo_ihat, CoordKind, DistanceIntegrals, ManifoldModel, Point,
    IHAT_SAMPLES, IHAT_SEED,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::market::MarketConfig;

/// How many points minimize the average-distance objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardinalityClass {
    Unique,
    FiniteMultiple,
    Continuum,
}

/// The median set of a manifold: minimizers of `F(y) = ∫ d(x, y) dV`.
#[derive(Debug, Clone)]
pub struct MedianSet {
    pub representatives: Vec<Point>,
    pub cardinality_class: CardinalityClass,
    pub objective_value: f64,
}

/// Aggregated verdicts for the concentrated configuration.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub median_ok: bool,
    pub cardinality_class: CardinalityClass,
    pub price_bar: f64,
    pub curvature_margin: f64,
    pub beta_threshold: f64,
    pub lambda_p_max: f64,
    pub lambda_y_max: f64,
    pub is_nash_candidate: bool,
    pub welfare_local_max: bool,
    pub welfare_global_max: bool,
    /// Monte Carlo `(ī(A), standard error)` when the manifold is a hypercube.
    pub ihat: Option<(f64, f64)>,
    /// Conditions that failed, in human-readable form.
    pub reasons: Vec<String>,
}

/// Stability bounds for the two learning rates (Eq. 13 analogues).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateBounds {
    pub lambda_p_max: f64,
    pub lambda_y_max: f64,
    /// False when no concentrated equilibrium exists to converge to
    /// (`I2 = 0`, e.g. circle/torus), making the position bound vacuous.
    pub applicable: bool,
}

// ---------------------------------------------------------------------------
// Median set
// ---------------------------------------------------------------------------

/// Median set of the manifold: closed forms for the supported families,
/// numeric multistart minimization otherwise.
pub fn median_set(m: &ManifoldModel, tol: f64) -> Result<MedianSet> {
    match m {
        ManifoldModel::Segment { alpha } => Ok(MedianSet {
            representatives: vec![Point::new(vec![0.5])],
            cardinality_class: CardinalityClass::Unique,
            objective_value: 2.0 * 0.5f64.powf(alpha + 1.0) / (alpha + 1.0),
        }),
        ManifoldModel::Circle { radius } => {
            let l = std::f64::consts::TAU * radius;
            Ok(MedianSet {
                representatives: vec![Point::new(vec![0.0])],
                cardinality_class: CardinalityClass::Continuum,
                objective_value: l * l / 4.0,
            })
        }
        ManifoldModel::Hypercube { .. } | ManifoldModel::Torus { .. } => {
            let y = m.canonical_median();
            let objective = quadrature_objective(m, &y)?;
            let class = if m.has_boundary() {
                CardinalityClass::Unique
            } else {
                CardinalityClass::Continuum
            };
            Ok(MedianSet {
                representatives: vec![y],
                cardinality_class: class,
                objective_value: objective,
            })
        }
        ManifoldModel::Product(factors) => {
            // Every factor is reflection-symmetric about its own median, so
            // the product of factor medians minimizes the product objective;
            // any periodic factor turns the set into a continuum.
            let mut coords = Vec::new();
            let mut class = CardinalityClass::Unique;
            for f in factors {
                let sub = median_set(f, tol)?;
                coords.extend(sub.representatives[0].coords.iter().copied());
                if sub.cardinality_class != CardinalityClass::Unique {
                    class = CardinalityClass::Continuum;
                }
            }
            let y = Point::new(coords);
            let objective = quadrature_objective(m, &y)?;
            Ok(MedianSet {
                representatives: vec![y],
                cardinality_class: class,
                objective_value: objective,
            })
        }
    }
}

fn quadrature_objective(m: &ManifoldModel, y: &Point) -> Result<f64> {
    if m.intrinsic_dimension() == 1 {
        return Ok(m.split_median_objective_1d(y.coords[0]));
    }
    let quad = m.build_quadrature(m.default_resolution(), IHAT_SEED)?;
    Ok(quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(x, w)| w * m.dist_slice(&x.coords, &y.coords))
        .sum())
}

/// Numeric median search: 32 seeded multistarts of gradient descent on the
/// average-distance objective, deduplicated at `max(tol, 1e-3·diameter)`;
/// a continuum is reported when distinct converged points share the objective
/// value to within 1e-6.
pub fn numeric_median_search(m: &ManifoldModel, tol: f64) -> Result<MedianSet> {
    const STARTS: usize = 32;
    const ITERS: usize = 500;
    let d = m.intrinsic_dimension();
    let diam = m.diameter();
    let v = m.total_volume();
    let quad = if d == 1 {
        None
    } else {
        Some(m.build_quadrature(m.default_resolution(), IHAT_SEED)?)
    };

    let gradient = |y: &Point| -> Vec<f64> {
        match &quad {
            None => {
                // Kink-splitting panels keep the 1-D gradient exact.
                let spec = m.coord_specs()[0];
                let y0 = y.coords[0];
                let panels: [(f64, f64); 2] = match spec.kind {
                    CoordKind::Bounded => [(spec.lo, y0), (y0, spec.hi)],
                    CoordKind::Periodic => {
                        let half = spec.width() / 2.0;
                        [(y0 - half, y0), (y0, y0 + half)]
                    }
                };
                let mut g = 0.0;
                let mut buf = [0.0];
                for (a, b) in panels {
                    if b - a < 1e-14 {
                        continue;
                    }
                    let (xs, ws) = gauss_legendre_on(a, b, 64);
                    for (x, w) in xs.iter().zip(&ws) {
                        m.dist_grad_slice(&[*x], &[y0], &mut buf);
                        g += w * buf[0];
                    }
                }
                vec![g]
            }
            Some(q) => {
                let mut g = vec![0.0; d];
                let mut buf = vec![0.0; d];
                for (x, w) in q.nodes.iter().zip(&q.weights) {
                    m.dist_grad_slice(&x.coords, &y.coords, &mut buf);
                    for (gi, bi) in g.iter_mut().zip(&buf) {
                        *gi += w * bi;
                    }
                }
                g
            }
        }
    };
    let objective = |y: &Point| -> Result<f64> { quadrature_objective(m, y) };

    let eta = 0.25 * diam / v;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut converged: Vec<(Point, f64)> = Vec::new();
    for _ in 0..STARTS {
        let mut y = m.sample_point(&mut rng);
        for _ in 0..ITERS {
            let g = gradient(&y);
            let step: Vec<f64> = g.iter().map(|gi| -eta * gi).collect();
            let norm = step.iter().map(|s| s * s).sum::<f64>().sqrt();
            let cap = 0.2 * diam;
            let step: Vec<f64> = if norm > cap {
                step.iter().map(|s| s * cap / norm).collect()
            } else {
                step
            };
            let t = crate::geometry::TangentVector::new(y.clone(), step);
            let next = m.retract(&y, &t);
            if m
                .displacement(&y, &next)
                .iter()
                .map(|c| c * c)
                .sum::<f64>()
                .sqrt()
                < 1e-12 * diam
            {
                y = next;
                break;
            }
            y = next;
        }
        converged.push((y.clone(), objective(&y)?));
    }

    let dedup_radius = tol.max(1e-3 * diam);
    let mut reps: Vec<(Point, f64)> = Vec::new();
    for (p, obj) in converged {
        if !reps
            .iter()
            .any(|(q, _)| m.distance(&p, q).map(|d| d < dedup_radius).unwrap_or(false))
        {
            reps.push((p, obj));
        }
    }
    reps.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best = reps.first().map(|r| r.1).ok_or_else(|| {
        ModelError::EstimationFailed { residual: f64::NAN }
    })?;
    let near_optimal: Vec<(Point, f64)> = reps
        .into_iter()
        .filter(|(_, o)| (o - best).abs() < 1e-6 * best.abs().max(1.0))
        .collect();
    let class = match near_optimal.len() {
        1 => CardinalityClass::Unique,
        _ => {
            let spread = near_optimal
                .iter()
                .map(|(_, o)| (o - best).abs())
                .fold(0.0f64, f64::max);
            if spread < 1e-6 {
                CardinalityClass::Continuum
            } else {
                CardinalityClass::FiniteMultiple
            }
        }
    };
    Ok(MedianSet {
        representatives: near_optimal.into_iter().map(|(p, _)| p).collect(),
        cardinality_class: class,
        objective_value: best,
    })
}

// ---------------------------------------------------------------------------
// Price, curvature, thresholds
// ---------------------------------------------------------------------------

/// The concentrated equilibrium price `p̄ = c + N/(β(N−1))`.
pub fn concentrated_price(cfg: &MarketConfig) -> f64 {
    cfg.cost + cfg.n as f64 / (cfg.beta * (cfg.n as f64 - 1.0))
}

/// The curvature condition (Eq. 9): `0 ≤ β(N−2)/N·I1 < I2` in the scalar
/// case, positive definiteness of `I2 − β(N−2)/N·I1` in general.  Returns
/// `(satisfied, margin)` with the margin the scalar gap or least eigenvalue.
pub fn curvature_condition(m: &ManifoldModel, cfg: &MarketConfig) -> Result<(bool, f64)> {
    let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
    Ok(curvature_margin(&ints, cfg))
}

fn curvature_margin(ints: &DistanceIntegrals, cfg: &MarketConfig) -> (bool, f64) {
    let nf = cfg.n as f64;
    let gap: DMatrix<f64> = &ints.i2 - &ints.i1 * (cfg.beta * (nf - 2.0) / nf);
    let margin = crate::geometry::symmetric_eigenvalues(&gap)[0];
    (margin > 0.0, margin)
}

/// The rationality threshold `β̄` above which the curvature condition fails:
/// closed forms per family, generalized-eigenvalue computation otherwise.
/// `+∞` when `N = 2` on a manifold with positive-definite `I2`; `0` when the
/// position condition can never hold.
pub fn beta_threshold(m: &ManifoldModel, cfg: &MarketConfig) -> Result<f64> {
    let n = cfg.n as f64;
    match m {
        ManifoldModel::Segment { alpha } => {
            if cfg.n == 2 {
                Ok(f64::INFINITY)
            } else if *alpha == 1.0 {
                Ok(2.0 * n / (n - 2.0))
            } else {
                Ok(2f64.powf(*alpha) * (2.0 * alpha - 1.0) * n / (alpha * (n - 2.0)))
            }
        }
        ManifoldModel::Circle { .. } | ManifoldModel::Torus { .. } => Ok(0.0),
        ManifoldModel::Hypercube { dim } => {
            if cfg.n == 2 {
                Ok(f64::INFINITY)
            } else {
                let (ihat, _) = monte_carlo_ihat(*dim, IHAT_SAMPLES, IHAT_SEED);
                Ok(n / (n - 2.0) * ihat)
            }
        }
        ManifoldModel::Product(_) => {
            let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
            let i2_min = ints.i2_eigenvalues()[0];
            if cfg.n == 2 {
                return Ok(if i2_min > 1e-9 { f64::INFINITY } else { 0.0 });
            }
            let scaled_i1 = &ints.i1 * ((n - 2.0) / n);
            match smallest_generalized_eigenvalue(&ints.i2, &scaled_i1) {
                Some(beta) => Ok(beta.max(0.0)),
                None => Err(ModelError::UnsupportedCase(
                    "I1 is not positive definite; no threshold defined".into(),
                )),
            }
        }
    }
}

/// The β at which the concentrated point stops being an attractor of the
/// gradient dynamics: the root of the largest `μ_y1` eigenvalue,
/// `β_dyn = I2(N−1)/(I1(N−2))` in the scalar case.  Strictly below
/// [`beta_threshold`] for `N ≥ 3`.
pub fn reachability_beta_threshold(m: &ManifoldModel, cfg: &MarketConfig) -> Result<f64> {
    let n = cfg.n as f64;
    let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
    let i2_min = ints.i2_eigenvalues()[0];
    if cfg.n == 2 {
        return Ok(if i2_min > 1e-9 { f64::INFINITY } else { 0.0 });
    }
    let scaled_i1 = &ints.i1 * ((n - 2.0) / (n - 1.0));
    match smallest_generalized_eigenvalue(&ints.i2, &scaled_i1) {
        Some(beta) => Ok(beta.max(0.0)),
        None => Err(ModelError::UnsupportedCase(
            "I1 is not positive definite; no threshold defined".into(),
        )),
    }
}

/// Smallest `λ` with `A v = λ B v` for symmetric `A` and positive-definite
/// `B`, via the Cholesky reduction `L⁻¹ A L⁻ᵀ`.
fn smallest_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(b.clone())?;
    let l_inv = chol.l().try_inverse()?;
    let reduced = &l_inv * a * l_inv.transpose();
    Some(crate::geometry::symmetric_eigenvalues(&reduced)[0])
}

/// Stability bounds `λ_p < 2N²/(β(N−1))` and `λ_y < 2N·V / max eig I2`.
pub fn learning_rate_bounds(m: &ManifoldModel, cfg: &MarketConfig) -> Result<LearningRateBounds> {
    let n = cfg.n as f64;
    let lambda_p_max = 2.0 * n * n / (cfg.beta * (n - 1.0));
    let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
    let i2_max = ints.i2_eigenvalues().last().copied().unwrap_or(0.0);
    if i2_max > 1e-12 {
        Ok(LearningRateBounds {
            lambda_p_max,
            lambda_y_max: 2.0 * n * m.total_volume() / i2_max,
            applicable: true,
        })
    } else {
        Ok(LearningRateBounds {
            lambda_p_max,
            lambda_y_max: f64::INFINITY,
            applicable: false,
        })
    }
}

/// Seeded Monte Carlo estimate of `ī(A) = ∫_{[0,1]^A} (A−1)/‖r‖ dx` with its
/// standard error.
pub fn estimate_ihat(a: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if a == 0 {
        return Err(ModelError::InvalidInput("ihat needs dimension >= 1".into()));
    }
    if a == 1 {
        return Ok((0.0, 0.0));
    }
    if samples < 10_000 {
        return Err(ModelError::InvalidInput(format!(
            "ihat needs at least 10^4 samples, got {samples}"
        )));
    }
    Ok(monte_carlo_ihat(a, samples, seed))
}

/// Aggregate all concentrated-equilibrium conditions into a report.
pub fn check_nash_concentrated(m: &ManifoldModel, cfg: &MarketConfig) -> Result<EquilibriumReport> {
    let medians = median_set(m, 1e-6)?;
    let median_ok = medians.cardinality_class == CardinalityClass::Unique;
    let (curvature_ok, curvature_margin) = curvature_condition(m, cfg)?;
    let has_boundary = m.has_boundary();
    let bounds = learning_rate_bounds(m, cfg)?;
    let ihat = match m {
        ManifoldModel::Hypercube { dim } => Some(monte_carlo_ihat(*dim, IHAT_SAMPLES, IHAT_SEED)),
        _ => None,
    };

    let mut reasons = Vec::new();
    if !has_boundary {
        reasons.push("no boundary".to_string());
    }
    if !median_ok {
        reasons.push("median not unique".to_string());
    }
    if !curvature_ok {
        reasons.push(format!("curvature condition violated (margin {curvature_margin:.6})"));
    }
    let is_nash_candidate = median_ok && curvature_ok && has_boundary;

    Ok(EquilibriumReport {
        median_ok,
        cardinality_class: medians.cardinality_class,
        price_bar: concentrated_price(cfg),
        curvature_margin,
        beta_threshold: beta_threshold(m, cfg)?,
        lambda_p_max: bounds.lambda_p_max,
        lambda_y_max: bounds.lambda_y_max,
        is_nash_candidate,
        welfare_local_max: is_nash_candidate,
        // Splitting the firms always lowers total transport cost, so the
        // concentrated point is never the global welfare maximum for N >= 2.
        welfare_global_max: false,
        ihat,
        reasons,
    })
}

/// Per-factor outcome labels of a trajectory on a product manifold, using
/// each factor's own geodesic distance and concentration scale.
pub fn separability_check(traj: &Trajectory, m: &ManifoldModel) -> Result<Vec<OutcomeLabel>> {
    let factors = match m {
        ManifoldModel::Product(fs) => fs,
        _ => {
            return Err(ModelError::UnsupportedCase(
                "separability_check needs a product manifold".into(),
            ))
        }
    };
    let state = traj.final_state();
    let n = state.positions.len();
    let mean_final_price = state.prices.iter().sum::<f64>() / n as f64;
    let mut labels = Vec::with_capacity(factors.len());
    let mut offset = 0;
    for f in factors {
        let d = f.intrinsic_dimension();
        let sub: Vec<Point> = state
            .positions
            .iter()
            .map(|p| Point::new(p.coords[offset..offset + d].to_vec()))
            .collect();
        let mut max_pairwise = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_pairwise = max_pairwise.max(f.distance(&sub[i], &sub[j])?);
            }
        }
        let kind = if max_pairwise < EPS_CONC_FACTOR * f.diameter() {
            OutcomeKind::Concentrated
        } else {
            OutcomeKind::Dispersed
        };
        labels.push(OutcomeLabel { kind, max_pairwise_distance: max_pairwise, mean_final_price });
        offset += d;
    }
    Ok(labels)
}
