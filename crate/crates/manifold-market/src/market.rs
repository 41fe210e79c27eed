//! Softmin choice probabilities, demand, profit, welfare, and their analytic
//! first and second derivatives.

use crate::error::{ModelError, Result};
use crate::geometry::{
    symmetric_eigenvalues, ManifoldModel, Point, QuadratureRule, TangentVector,
};
use nalgebra::DMatrix;
use rand::Rng;

/// Market primitives: firm count, rationality, marginal cost, learning rates,
/// quadrature resolution, and the run seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub n: usize,
    pub beta: f64,
    pub cost: f64,
    pub lambda_p: f64,
    pub lambda_y: f64,
    pub resolution: usize,
    pub seed: u64,
}

impl MarketConfig {
    pub fn new(
        n: usize,
        beta: f64,
        cost: f64,
        lambda_p: f64,
        lambda_y: f64,
        resolution: usize,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(ModelError::InvalidInput(format!("need N >= 2 firms, got {n}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(ModelError::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if !(cost >= 0.0) {
            return Err(ModelError::InvalidInput(format!("cost must be >= 0, got {cost}")));
        }
        if !(lambda_p > 0.0) || !(lambda_y > 0.0) {
            return Err(ModelError::InvalidInput(
                "learning rates must be positive".into(),
            ));
        }
        if resolution < 2 {
            return Err(ModelError::InvalidInput(format!(
                "quadrature resolution must be >= 2, got {resolution}"
            )));
        }
        Ok(Self { n, beta, cost, lambda_p, lambda_y, resolution, seed })
    }

    /// Config with learning rates auto-scaled to 0.25× their stability
    /// bounds: `λ_p = 0.25·2N²/(β(N−1))` and
    /// `λ_y = 0.25·min(2NV/max eig I2, diameter)`.
    pub fn with_auto_rates(
        m: &ManifoldModel,
        n: usize,
        beta: f64,
        cost: f64,
        resolution: usize,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(ModelError::InvalidInput(format!("need N >= 2 firms, got {n}")));
        }
        if !(beta > 0.0) {
            return Err(ModelError::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        let nf = n as f64;
        let lambda_p = 0.25 * 2.0 * nf * nf / (beta * (nf - 1.0));
        let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
        let i2_max = ints.i2_eigenvalues().last().copied().unwrap_or(0.0);
        let cap = m.diameter();
        let bound = if i2_max > 1e-12 {
            (2.0 * nf * m.total_volume() / i2_max).min(cap)
        } else {
            cap
        };
        let lambda_y = 0.25 * bound;
        Self::new(n, beta, cost, lambda_p, lambda_y, resolution, seed)
    }
}

/// The full strategy profile: per-firm positions and prices.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub positions: Vec<Point>,
    pub prices: Vec<f64>,
}

impl MarketState {
    pub fn new(positions: Vec<Point>, prices: Vec<f64>) -> Self {
        Self { positions, prices }
    }

    /// Random initialization: positions uniform over the parameter box,
    /// prices uniform in `[c, c + 1]`.
    pub fn random(cfg: &MarketConfig, m: &ManifoldModel, rng: &mut impl Rng) -> Self {
        let positions = (0..cfg.n).map(|_| m.sample_point(rng)).collect();
        let prices = (0..cfg.n)
            .map(|_| cfg.cost + rng.random_range(0.0..1.0))
            .collect();
        Self { positions, prices }
    }

    /// Every firm at `y` with price `p`.
    pub fn concentrated(n: usize, y: &Point, p: f64) -> Self {
        Self {
            positions: vec![y.clone(); n],
            prices: vec![p; n],
        }
    }

    pub fn validate(&self, cfg: &MarketConfig, m: &ManifoldModel) -> Result<()> {
        if self.positions.len() != cfg.n || self.prices.len() != cfg.n {
            return Err(ModelError::DimensionMismatch {
                expected: cfg.n,
                got: self.positions.len().min(self.prices.len()),
            });
        }
        for p in &self.positions {
            m.check_point(p)?;
        }
        if self.prices.iter().any(|p| !p.is_finite() || *p < cfg.cost - 1e-12) {
            return Err(ModelError::InvalidInput(
                "prices must be finite and >= marginal cost".into(),
            ));
        }
        Ok(())
    }
}

/// Demand shares, profits, and welfare for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    pub shares: Vec<f64>,
    pub profits: Vec<f64>,
    pub welfare: f64,
}

/// The gradient of one firm's profit in its own price and position.
#[derive(Debug, Clone)]
pub struct ProfitGradient {
    pub price_component: f64,
    pub position_component: TangentVector,
}

/// Spectra of the profit Hessian blocks at the concentrated point.
/// `mu_y1`/`mu_y2` hold sorted eigenvalue spectra (one entry per manifold
/// dimension; identical entries on isotropic manifolds), `mu_p1`/`mu_p2` are
/// the scalar price-block eigenvalues.
#[derive(Debug, Clone)]
pub struct ConcentratedCurvature {
    pub mu_y1: Vec<f64>,
    pub mu_y2: Vec<f64>,
    pub mu_p1: f64,
    pub mu_p2: f64,
}

/// Softmin choice probabilities of the `N` firms at consumer location `x`,
/// computed with max-shifted exponentials so extreme `β` cannot overflow.
pub fn choice_probabilities(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    x: &Point,
) -> Result<Vec<f64>> {
    state.validate(cfg, m)?;
    m.check_point(x)?;
    let mut probs = vec![0.0; cfg.n];
    choice_probs_into(cfg, state, m, &x.coords, &mut probs, &mut vec![0.0; cfg.n]);
    Ok(probs)
}

/// Inner softmin kernel shared by all integrators: fills `probs` and stores
/// the per-firm distances in `dists`.
fn choice_probs_into(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    x: &[f64],
    probs: &mut [f64],
    dists: &mut [f64],
) {
    let mut max_u = f64::NEG_INFINITY;
    for i in 0..cfg.n {
        let d = m.dist_slice(x, &state.positions[i].coords);
        dists[i] = d;
        let u = -cfg.beta * (d + state.prices[i]);
        probs[i] = u;
        if u > max_u {
            max_u = u;
        }
    }
    let mut z = 0.0;
    for p in probs.iter_mut() {
        *p = (*p - max_u).exp();
        z += *p;
    }
    for p in probs.iter_mut() {
        *p /= z;
    }
}

/// Demand shares `Λ(V_i)`, profits `(p_i − c)Λ(V_i)`, and the normalized
/// welfare `𝒪 = −Σ_i (1/V) ∫ f_i (c + d(x, y_i)) dV`.
pub fn demand_profile(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    quad: &QuadratureRule,
) -> Result<DemandProfile> {
    state.validate(cfg, m)?;
    let v = m.total_volume();
    let mut shares = vec![0.0; cfg.n];
    let mut welfare = 0.0;
    let mut probs = vec![0.0; cfg.n];
    let mut dists = vec![0.0; cfg.n];
    for (node, w) in quad.nodes.iter().zip(&quad.weights) {
        choice_probs_into(cfg, state, m, &node.coords, &mut probs, &mut dists);
        for i in 0..cfg.n {
            shares[i] += w * probs[i];
            welfare -= w * probs[i] * (cfg.cost + dists[i]);
        }
    }
    for s in shares.iter_mut() {
        *s /= v;
    }
    let profits = shares
        .iter()
        .zip(&state.prices)
        .map(|(s, p)| (p - cfg.cost) * s)
        .collect();
    Ok(DemandProfile { shares, profits, welfare: welfare / v })
}

/// Analytic gradient of firm `i`'s profit:
/// `∇_p Π_i = (1/V) ∫ f_i [1 − β(p_i − c)(1 − f_i)] dV` and
/// `∇_y Π_i = −β(p_i − c)/V · ∫ f_i (1 − f_i) ∇_y d(x, y_i) dV`, projected to
/// the tangent space at `y_i`.
pub fn profit_gradient(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    quad: &QuadratureRule,
    i: usize,
) -> Result<ProfitGradient> {
    state.validate(cfg, m)?;
    if i >= cfg.n {
        return Err(ModelError::InvalidInput(format!("firm index {i} out of range")));
    }
    let (_, price_grads, pos_grads) = all_gradients(cfg, state, m, quad);
    let position_component = m.tangent_project(&state.positions[i], &pos_grads[i])?;
    Ok(ProfitGradient {
        price_component: price_grads[i],
        position_component,
    })
}

/// Fused single pass over the quadrature nodes computing demand shares and
/// all per-firm price and position gradients.
pub(crate) fn all_gradients(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    quad: &QuadratureRule,
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let n = cfg.n;
    let d = m.intrinsic_dimension();
    let v = m.total_volume();
    let mut shares = vec![0.0; n];
    let mut price_grads = vec![0.0; n];
    let mut pos_grads = vec![vec![0.0; d]; n];
    let mut probs = vec![0.0; n];
    let mut dists = vec![0.0; n];
    let mut grad = vec![0.0; d];
    for (node, w) in quad.nodes.iter().zip(&quad.weights) {
        choice_probs_into(cfg, state, m, &node.coords, &mut probs, &mut dists);
        for i in 0..n {
            let f = probs[i];
            let markup = state.prices[i] - cfg.cost;
            shares[i] += w * f;
            price_grads[i] += w * f * (1.0 - cfg.beta * markup * (1.0 - f));
            if markup != 0.0 {
                m.dist_grad_slice(&node.coords, &state.positions[i].coords, &mut grad);
                let scale = -cfg.beta * markup * w * f * (1.0 - f);
                for (g, out) in grad.iter().zip(pos_grads[i].iter_mut()) {
                    *out += scale * g;
                }
            }
        }
    }
    for i in 0..n {
        shares[i] /= v;
        price_grads[i] /= v;
        for g in pos_grads[i].iter_mut() {
            *g /= v;
        }
    }
    (shares, price_grads, pos_grads)
}

/// Closed-form spectra of the profit Hessian blocks at the concentrated
/// configuration `(ȳ, p̄)`:
/// `μ_p1 = β(−N²+N−1)/(N²(N−1))`, `μ_p2 = −β(N−1)/N²`,
/// `μ_y1 = eig[(β(N−2)/(N−1)·I1 − I2)/(N·V)]`, `μ_y2 = eig[−I2/(N·V)]`.
pub fn concentrated_hessian_eigenvalues(
    cfg: &MarketConfig,
    m: &ManifoldModel,
) -> Result<ConcentratedCurvature> {
    let nf = cfg.n as f64;
    let v = m.total_volume();
    let ints = m.aggregate_distance_integrals(&m.canonical_median())?;
    let m_y1: DMatrix<f64> =
        (&ints.i1 * (cfg.beta * (nf - 2.0) / (nf - 1.0)) - &ints.i2) / (nf * v);
    let m_y2: DMatrix<f64> = -&ints.i2 / (nf * v);
    Ok(ConcentratedCurvature {
        mu_y1: symmetric_eigenvalues(&m_y1),
        mu_y2: symmetric_eigenvalues(&m_y2),
        mu_p1: cfg.beta * (-nf * nf + nf - 1.0) / (nf * nf * (nf - 1.0)),
        mu_p2: -cfg.beta * (nf - 1.0) / (nf * nf),
    })
}

/// Large-β Laplace value of the overlap integral `∫ f_i f_j dx` on the
/// segment with symmetric rival and equal prices: `1/(2αβ|y − 1/2|^{α−1})`.
pub fn laplace_crossterm(alpha: f64, beta: f64, y: f64) -> Result<f64> {
    if !(alpha >= 1.0) || !(beta > 0.0) {
        return Err(ModelError::InvalidInput(
            "laplace_crossterm needs alpha >= 1 and beta > 0".into(),
        ));
    }
    let dev = (y - 0.5).abs();
    if dev < 1e-12 {
        return Err(ModelError::SingularCase(
            "laplace_crossterm is undefined at y = 1/2".into(),
        ));
    }
    Ok(1.0 / (2.0 * alpha * beta * dev.powf(alpha - 1.0)))
}

/// The β → ∞ markup `α|y − 1/2|^{α−1}` of a firm at `y` facing a symmetric
/// rival on the segment.
pub fn limiting_boundary_markup(alpha: f64, y: f64) -> f64 {
    alpha * (y - 0.5).abs().powf(alpha - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg() -> ManifoldModel {
        ManifoldModel::segment(1.0).unwrap()
    }

    fn cfg(n: usize, beta: f64) -> MarketConfig {
        MarketConfig::new(n, beta, 0.2, 0.1, 0.1, 512, 0).unwrap()
    }

    /// Uniform midpoint rule on [0, 1]; used where sharp softmin fronts need
    /// more nodes than Gauss–Legendre generation is worth.
    fn midpoint_rule(res: usize) -> QuadratureRule {
        QuadratureRule {
            nodes: (0..res)
                .map(|i| Point::new(vec![(i as f64 + 0.5) / res as f64]))
                .collect(),
            weights: vec![1.0 / res as f64; res],
            descriptor: format!("midpoint:{res}"),
        }
    }

    #[test]
    fn identical_firms_split_evenly() {
        let m = seg();
        let c = cfg(4, 3.0);
        let state = MarketState::concentrated(4, &Point::new(vec![0.3]), 0.9);
        let p = choice_probabilities(&c, &state, &m, &Point::new(vec![0.8])).unwrap();
        for v in &p {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn extreme_beta_selects_the_dominant_firm() {
        let m = seg();
        let c = cfg(2, 1e6);
        let state = MarketState::new(
            vec![Point::new(vec![0.4]), Point::new(vec![0.9])],
            vec![0.5, 0.6],
        );
        let p = choice_probabilities(&c, &state, &m, &Point::new(vec![0.3])).unwrap();
        assert!(p[0] >= 1.0 - 1e-9);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn equidistant_equal_price_duopoly_splits() {
        let m = seg();
        let c = cfg(2, 5.0);
        let state = MarketState::new(
            vec![Point::new(vec![0.2]), Point::new(vec![0.8])],
            vec![0.7, 0.7],
        );
        let p = choice_probabilities(&c, &state, &m, &Point::new(vec![0.5])).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn concentrated_demand_and_welfare() {
        let m = seg();
        let c = cfg(3, 2.0);
        let quad = m.build_quadrature(512, 0).unwrap();
        let state = MarketState::concentrated(3, &Point::new(vec![0.5]), 0.9);
        let profile = demand_profile(&c, &state, &m, &quad).unwrap();
        for s in &profile.shares {
            assert_abs_diff_eq!(*s, 1.0 / 3.0, epsilon = 1e-10);
        }
        for (i, p) in profile.profits.iter().enumerate() {
            assert_abs_diff_eq!(*p, (0.9 - 0.2) * profile.shares[i], epsilon = 1e-15);
        }
        // All firms at the segment median: welfare = −(c + ∫|x−1/2|dx) = −(c + 1/4).
        // Gauss-Legendre converges slowly on the kinked |x−1/2| integrand, so
        // the tolerance is quadrature-limited.
        assert_abs_diff_eq!(profile.welfare, -(0.2 + 0.25), epsilon = 1e-5);
    }

    #[test]
    fn symmetric_duopoly_shares_are_half() {
        let m = seg();
        let c = cfg(2, 4.0);
        let quad = m.build_quadrature(512, 0).unwrap();
        let state = MarketState::new(
            vec![Point::new(vec![0.3]), Point::new(vec![0.7])],
            vec![0.8, 0.8],
        );
        let profile = demand_profile(&c, &state, &m, &quad).unwrap();
        assert_abs_diff_eq!(profile.shares[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(profile.shares[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn gradient_vanishes_at_the_concentrated_equilibrium() {
        let m = seg();
        let c = cfg(3, 2.0);
        let quad = m.build_quadrature(512, 0).unwrap();
        let p_bar = 0.2 + 3.0 / (2.0 * 2.0);
        let state = MarketState::concentrated(3, &Point::new(vec![0.5]), p_bar);
        for i in 0..3 {
            let g = profit_gradient(&c, &state, &m, &quad, i).unwrap();
            assert_abs_diff_eq!(g.price_component, 0.0, epsilon = 1e-10);
            assert_abs_diff_eq!(g.position_component.norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn position_gradient_vanishes_at_marginal_cost() {
        let m = seg();
        let c = cfg(2, 7.0);
        let quad = m.build_quadrature(256, 0).unwrap();
        let state = MarketState::new(
            vec![Point::new(vec![0.1]), Point::new(vec![0.6])],
            vec![0.2, 0.9],
        );
        let g = profit_gradient(&c, &state, &m, &quad, 0).unwrap();
        assert_eq!(g.position_component.components[0], 0.0);
    }

    #[test]
    fn boundary_duopoly_gradient_points_inward() {
        // N=2, firms at the endpoints, markup at the limiting value 1, large
        // β: the position gradient of the boundary firm is +1/2 (toward the
        // center).
        let m = seg();
        let c = MarketConfig::new(2, 1e3, 0.2, 0.1, 0.1, 512, 0).unwrap();
        let quad = midpoint_rule(1 << 16);
        let state = MarketState::new(
            vec![Point::new(vec![0.0]), Point::new(vec![1.0])],
            vec![1.2, 1.2],
        );
        let g = profit_gradient(&c, &state, &m, &quad, 0).unwrap();
        assert_relative_eq!(g.position_component.components[0], 0.5, max_relative = 1e-3);
    }

    #[test]
    fn price_gradient_root_sits_at_the_concentrated_price() {
        let m = seg();
        let quad = m.build_quadrature(512, 0).unwrap();
        for (n, beta) in [(2usize, 1.5f64), (3, 4.0), (5, 0.7)] {
            let c = cfg(n, beta);
            let p_bar = c.cost + n as f64 / (beta * (n as f64 - 1.0));
            for (p, want_sign) in [(p_bar - 1e-3, 1.0), (p_bar + 1e-3, -1.0)] {
                let state = MarketState::concentrated(n, &Point::new(vec![0.5]), p);
                let g = profit_gradient(&c, &state, &m, &quad, 0).unwrap();
                assert!(
                    g.price_component * want_sign > 0.0,
                    "sign at p={p} (n={n}, beta={beta})"
                );
            }
        }
    }

    #[test]
    fn raising_own_price_lowers_demand() {
        let m = seg();
        let c = cfg(3, 5.0);
        let quad = m.build_quadrature(512, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut state = MarketState::random(&c, &m, &mut rng);
            let s0 = demand_profile(&c, &state, &m, &quad).unwrap().shares[1];
            state.prices[1] += 0.05;
            let s1 = demand_profile(&c, &state, &m, &quad).unwrap().shares[1];
            assert!(s1 < s0);
        }
    }

    #[test]
    fn price_block_eigenvalues_match_closed_forms() {
        let m = seg();
        let c = MarketConfig::new(2, 1.0, 0.0, 0.1, 0.1, 512, 0).unwrap();
        let mu = concentrated_hessian_eigenvalues(&c, &m).unwrap();
        assert_abs_diff_eq!(mu.mu_p1, -0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(mu.mu_p2, -0.25, epsilon = 1e-15);
    }

    #[test]
    fn segment_position_eigenvalues() {
        // N=3: μ_y2 = −I2/(N·V) = −2/3; μ_y1 = (β/2·I1 − I2)/3 crosses zero
        // at β = I2(N−1)/(I1(N−2)) = 4, and equals 1/3 at β = 6.
        let m = seg();
        let mu = concentrated_hessian_eigenvalues(&cfg(3, 6.0), &m).unwrap();
        assert_abs_diff_eq!(mu.mu_y1[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.mu_y2[0], -2.0 / 3.0, epsilon = 1e-12);
        let mu = concentrated_hessian_eigenvalues(&cfg(3, 4.0), &m).unwrap();
        assert_abs_diff_eq!(mu.mu_y1[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_concentration_is_never_stable() {
        let m = ManifoldModel::circle(1.0).unwrap();
        for beta in [0.5, 1.0, 10.0] {
            let mu = concentrated_hessian_eigenvalues(&cfg(3, beta), &m).unwrap();
            assert_abs_diff_eq!(mu.mu_y2[0], 0.0, epsilon = 1e-12);
            assert!(mu.mu_y1[0] > 0.0);
        }
    }

    #[test]
    fn laplace_crossterm_closed_forms() {
        assert_abs_diff_eq!(laplace_crossterm(2.0, 1e3, 0.0).unwrap(), 5e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(laplace_crossterm(1.0, 1e3, 0.3).unwrap(), 5e-4, epsilon = 1e-18);
        assert!(matches!(
            laplace_crossterm(2.0, 1e3, 0.5),
            Err(ModelError::SingularCase(_))
        ));
    }

    #[test]
    fn laplace_crossterm_matches_quadrature() {
        // α=2, β=10³, y=0.1 with symmetric rival: direct quadrature of
        // ∫ f_i f_j within 2% of the asymptotic value.
        let m = ManifoldModel::segment(2.0).unwrap();
        let c = MarketConfig::new(2, 1e3, 0.2, 0.1, 0.1, 1 << 14, 0).unwrap();
        let quad = midpoint_rule(1 << 14);
        let state = MarketState::new(
            vec![Point::new(vec![0.1]), Point::new(vec![0.9])],
            vec![0.7, 0.7],
        );
        let mut probs = vec![0.0; 2];
        let mut dists = vec![0.0; 2];
        let mut overlap = 0.0;
        for (node, w) in quad.nodes.iter().zip(&quad.weights) {
            choice_probs_into(&c, &state, &m, &node.coords, &mut probs, &mut dists);
            overlap += w * probs[0] * probs[1];
        }
        let asymptotic = laplace_crossterm(2.0, 1e3, 0.1).unwrap();
        assert_relative_eq!(overlap, asymptotic, max_relative = 0.02);
    }

    #[test]
    fn limiting_markup_values() {
        assert_abs_diff_eq!(limiting_boundary_markup(2.0, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(limiting_boundary_markup(1.0, 0.3), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(limiting_boundary_markup(3.0, 1.0), 0.75, epsilon = 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn probabilities_sum_to_one(s in any::<u64>(), bi in 0usize..4) {
            let beta = [1e-2, 1.0, 1e2, 1e6][bi];
            let m = seg();
            let c = MarketConfig::new(3, beta, 0.2, 0.1, 0.1, 512, 0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let state = MarketState::random(&c, &m, &mut rng);
            let x = m.sample_point(&mut rng);
            let p = choice_probabilities(&c, &state, &m, &x).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }
    }
}
