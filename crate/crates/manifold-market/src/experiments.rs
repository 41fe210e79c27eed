//! Empirical studies: phase diagrams over (β, N), empirical threshold
//! localization, Eaton–Lipsey pattern detection, and the cylinder
//! separability demonstration.

use rayon::prelude::*;

use crate::dynamics::{classify_outcome, simulate, OutcomeKind, OutcomeLabel, SimOptions, Trajectory};
use crate::equilibrium::{beta_threshold, separability_check};
use crate::error::{ModelError, Result};
use crate::geometry::ManifoldModel;
use crate::market::MarketConfig;

/// One grid cell of a [`PhaseDiagram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCell {
    pub fraction_concentrated: f64,
    pub replicates: usize,
}

/// Concentrated-fraction outcomes over a (β, N) grid, with the analytic
/// threshold curve attached per N.
#[derive(Debug, Clone)]
pub struct PhaseDiagram {
    pub beta_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    /// `outcomes[n_index][beta_index]`.
    pub outcomes: Vec<Vec<PhaseCell>>,
    /// Analytic β̄ per entry of `n_grid`.
    pub predicted_threshold: Vec<f64>,
}

/// Deterministic per-job seed derived from the base seed and the job's
/// coordinates, via splitmix64 mixing.
pub(crate) fn derive_seed(base: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(b.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        .wrapping_add(c.wrapping_mul(0x94d0_49bb_1331_11eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run `replicates` seeded simulations for every (β, N) grid cell and record
/// the concentrated fraction.  Learning rates are auto-scaled per cell to
/// 0.25× their stability bounds; `base_cfg` supplies cost, resolution, and
/// the base seed.  Divergent replicates count as non-concentrated.
pub fn phase_sweep(
    m: &ManifoldModel,
    base_cfg: &MarketConfig,
    beta_grid: &[f64],
    n_grid: &[usize],
    replicates: usize,
    opts: &SimOptions,
) -> Result<PhaseDiagram> {
    if replicates == 0 {
        return Err(ModelError::InvalidInput("need at least one replicate".into()));
    }
    if beta_grid.is_empty() || n_grid.is_empty() {
        return Err(ModelError::InvalidInput("phase grid must be non-empty".into()));
    }
    if beta_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::InvalidInput(
            "grid axes must be strictly ascending".into(),
        ));
    }

    let jobs: Vec<(usize, usize, usize)> = (0..n_grid.len())
        .flat_map(|ni| {
            (0..beta_grid.len()).flat_map(move |bi| (0..replicates).map(move |r| (ni, bi, r)))
        })
        .collect();

    let results: Vec<Result<bool>> = jobs
        .par_iter()
        .map(|&(ni, bi, r)| {
            let seed = derive_seed(base_cfg.seed, ni as u64, bi as u64, r as u64);
            let mut cfg = MarketConfig::with_auto_rates(
                m,
                n_grid[ni],
                beta_grid[bi],
                base_cfg.cost,
                base_cfg.resolution,
                seed,
            )?;
            cfg.seed = seed;
            let traj = simulate(&cfg, m, None, opts)?;
            let label = classify_outcome(&traj, m)?;
            Ok(label.kind == OutcomeKind::Concentrated)
        })
        .collect();

    let mut outcomes =
        vec![vec![PhaseCell { fraction_concentrated: 0.0, replicates }; beta_grid.len()]; n_grid.len()];
    for (&(ni, bi, _), res) in jobs.iter().zip(results) {
        // Divergence is recorded as a non-concentrated outcome, not a failure.
        let concentrated = matches!(res, Ok(true));
        if concentrated {
            outcomes[ni][bi].fraction_concentrated += 1.0 / replicates as f64;
        }
    }

    let predicted_threshold = n_grid
        .iter()
        .map(|&n| beta_threshold(m, &MarketConfig::new(n, 1.0, base_cfg.cost, 0.1, 0.1, 8, 0)?))
        .collect::<Result<Vec<f64>>>()?;

    Ok(PhaseDiagram {
        beta_grid: beta_grid.to_vec(),
        n_grid: n_grid.to_vec(),
        outcomes,
        predicted_threshold,
    })
}

/// Empirical threshold for one N row: the β where the concentrated fraction
/// crosses 50%, linearly interpolated on the grid.  `None` when the row never
/// crosses.
pub fn empirical_threshold(diagram: &PhaseDiagram, n: usize) -> Option<f64> {
    let row = &diagram.outcomes[diagram.n_grid.iter().position(|&g| g == n)?];
    for w in 0..row.len().saturating_sub(1) {
        let (f0, f1) = (row[w].fraction_concentrated, row[w + 1].fraction_concentrated);
        if (f0 - 0.5) * (f1 - 0.5) <= 0.0 && f0 != f1 {
            let t = (f0 - 0.5) / (f0 - f1);
            return Some(diagram.beta_grid[w] + t * (diagram.beta_grid[w + 1] - diagram.beta_grid[w]));
        }
    }
    None
}

/// Cluster structure of a final segment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EatonLipseyPattern {
    /// `(center, multiplicity)` sorted by center.
    pub clusters: Vec<(f64, usize)>,
    /// True iff the clusters sit at {1/6, 1/2, 5/6} with multiplicities
    /// {2, 1, 2} at the given tolerance.
    pub matches: bool,
}

/// Cluster the final positions of a segment trajectory by sorted-gap
/// clustering (a gap larger than `tol` starts a new cluster) and compare
/// against the classical split-in-thirds pattern.
pub fn detect_eaton_lipsey(
    traj: &Trajectory,
    m: &ManifoldModel,
    tol: f64,
) -> Result<EatonLipseyPattern> {
    if !matches!(m, ManifoldModel::Segment { .. }) {
        return Err(ModelError::UnsupportedCase(
            "Eaton-Lipsey detection is defined on the segment".into(),
        ));
    }
    let mut xs: Vec<f64> = traj
        .final_state()
        .positions
        .iter()
        .map(|p| p.coords[0])
        .collect();
    xs.sort_by(f64::total_cmp);

    let mut clusters: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=xs.len() {
        if i == xs.len() || xs[i] - xs[i - 1] > tol {
            let members = &xs[start..i];
            let center = members.iter().sum::<f64>() / members.len() as f64;
            clusters.push((center, members.len()));
            start = i;
        }
    }

    let pattern = [(1.0 / 6.0, 2usize), (0.5, 1), (5.0 / 6.0, 2)];
    let matches = clusters.len() == 3
        && clusters
            .iter()
            .zip(&pattern)
            .all(|((c, mult), (pc, pm))| (c - pc).abs() <= tol && mult == pm);

    Ok(EatonLipseyPattern { clusters, matches })
}

/// The cylinder demonstration: simulate on S¹×[0,1] and label each factor
/// separately.  Returns the trajectory along with the per-factor labels.
pub fn cylinder_demo(
    cfg: &MarketConfig,
    m: &ManifoldModel,
    opts: &SimOptions,
) -> Result<(Trajectory, Vec<OutcomeLabel>)> {
    match m {
        ManifoldModel::Product(fs)
            if fs.len() == 2
                && matches!(fs[0], ManifoldModel::Circle { .. })
                && matches!(fs[1], ManifoldModel::Segment { .. }) => {}
        _ => {
            return Err(ModelError::UnsupportedCase(
                "cylinder_demo needs the product S^1 x [0,1]".into(),
            ))
        }
    }
    let traj = simulate(cfg, m, None, opts)?;
    let labels = separability_check(&traj, m)?;
    Ok((traj, labels))
}
