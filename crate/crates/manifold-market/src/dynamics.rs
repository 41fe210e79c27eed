//! The iterative gradient-ascent process: synchronous per-firm updates with
//! retraction, convergence detection, and outcome classification.

use crate::error::{ModelError, Result};
use crate::geometry::{ManifoldModel, TangentVector};
use crate::market::{
    all_gradients, demand_profile, DemandProfile, MarketConfig, MarketState,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Positions closer than this fraction of the manifold diameter (pairwise)
/// count as concentrated.
pub const EPS_CONC_FACTOR: f64 = 1e-2;

/// Per-step position displacement cap, as a fraction of the diameter.
const MAX_STEP_FACTOR: f64 = 0.1;

/// Why a trajectory stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIters,
    Diverged,
}

/// One recorded snapshot of the process.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub iter: usize,
    pub state: MarketState,
    pub profile: DemandProfile,
}

/// Time series of recorded states plus the termination verdict.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub terminated_reason: TerminationReason,
}

impl Trajectory {
    pub fn final_step(&self) -> &TrajectoryStep {
        self.steps.last().expect("trajectory records at least the initial state")
    }

    pub fn final_state(&self) -> &MarketState {
        &self.final_step().state
    }

    /// Iteration index of the last recorded state.
    pub fn iterations(&self) -> usize {
        self.final_step().iter
    }
}

/// Stopping and recording policy for [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { max_iters: 20_000, tol: 1e-9, record_every: 50 }
    }
}

/// Outcome of a terminated trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeKind {
    Concentrated,
    Dispersed,
}

/// Classification of the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeLabel {
    pub kind: OutcomeKind,
    pub max_pairwise_distance: f64,
    pub mean_final_price: f64,
}

/// One synchronous update of every firm from the shared time-t state:
/// `y_i ← R_{y_i}(λ_y ∇_{y_i}Π_i)` with the per-step displacement cap, and
/// `p_i ← max(c, p_i + λ_p ∇_{p_i}Π_i)`.
pub fn step(
    cfg: &MarketConfig,
    state: &MarketState,
    m: &ManifoldModel,
    quad: &crate::geometry::QuadratureRule,
) -> Result<MarketState> {
    let (_, price_grads, pos_grads) = all_gradients(cfg, state, m, quad);
    let cap = MAX_STEP_FACTOR * m.diameter();
    let mut positions = Vec::with_capacity(cfg.n);
    let mut prices = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut v: Vec<f64> = pos_grads[i].iter().map(|g| cfg.lambda_y * g).collect();
        if v.iter().any(|c| !c.is_finite()) || !price_grads[i].is_finite() {
            return Err(ModelError::NumericFailure(
                "non-finite profit gradient".into(),
            ));
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > cap {
            for c in v.iter_mut() {
                *c *= cap / norm;
            }
        }
        let tangent = TangentVector::new(state.positions[i].clone(), v);
        positions.push(m.retract(&state.positions[i], &tangent));
        prices.push((state.prices[i] + cfg.lambda_p * price_grads[i]).max(cfg.cost));
    }
    Ok(MarketState::new(positions, prices))
}

/// Run the process until the largest per-firm movement
/// `‖Δy_i‖ + |Δp_i|` drops below `tol`, or `max_iters` is reached.  With
/// `initial = None` the state is drawn from the config seed.  A non-finite
/// gradient terminates the trajectory with [`TerminationReason::Diverged`].
pub fn simulate(
    cfg: &MarketConfig,
    m: &ManifoldModel,
    initial: Option<MarketState>,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if opts.max_iters < 1 || !(opts.tol > 0.0) {
        return Err(ModelError::InvalidInput(
            "simulate needs max_iters >= 1 and tol > 0".into(),
        ));
    }
    let quad = m.build_quadrature(cfg.resolution, cfg.seed)?;
    let mut state = match initial {
        Some(s) => {
            s.validate(cfg, m)?;
            s
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            MarketState::random(cfg, m, &mut rng)
        }
    };
    let record_every = opts.record_every.max(1);

    let mut steps = Vec::new();
    let mut record = |iter: usize, state: &MarketState| -> Result<()> {
        steps.push(TrajectoryStep {
            iter,
            state: state.clone(),
            profile: demand_profile(cfg, state, m, &quad)?,
        });
        Ok(())
    };
    record(0, &state)?;

    let mut reason = TerminationReason::MaxIters;
    for it in 1..=opts.max_iters {
        let next = match step(cfg, &state, m, &quad) {
            Ok(next) => next,
            Err(ModelError::NumericFailure(_)) => {
                reason = TerminationReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut movement: f64 = 0.0;
        for i in 0..cfg.n {
            let dy = m.displacement(&state.positions[i], &next.positions[i]);
            let pos_move = dy.iter().map(|c| c * c).sum::<f64>().sqrt();
            movement = movement.max(pos_move + (next.prices[i] - state.prices[i]).abs());
        }
        state = next;
        let done = movement < opts.tol;
        if it % record_every == 0 || done || it == opts.max_iters {
            record(it, &state)?;
        }
        if done {
            reason = TerminationReason::Converged;
            break;
        }
    }
    Ok(Trajectory { steps, terminated_reason: reason })
}

/// Label the final state: concentrated iff the maximum pairwise geodesic
/// distance among firm positions is below `EPS_CONC_FACTOR · diameter`.
pub fn classify_outcome(traj: &Trajectory, m: &ManifoldModel) -> Result<OutcomeLabel> {
    if traj.steps.is_empty() {
        return Err(ModelError::InvalidInput("empty trajectory".into()));
    }
    let state = traj.final_state();
    let n = state.positions.len();
    let mut max_pairwise = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_pairwise =
                max_pairwise.max(m.distance(&state.positions[i], &state.positions[j])?);
        }
    }
    let kind = if max_pairwise < EPS_CONC_FACTOR * m.diameter() {
        OutcomeKind::Concentrated
    } else {
        OutcomeKind::Dispersed
    };
    Ok(OutcomeLabel {
        kind,
        max_pairwise_distance: max_pairwise,
        mean_final_price: state.prices.iter().sum::<f64>() / n as f64,
    })
}
