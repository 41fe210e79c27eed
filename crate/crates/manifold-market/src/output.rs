//! Plot-ready CSV emission with stable formatting and atomic file writes.

use std::io::Write;
use std::path::Path;

use crate::dynamics::{OutcomeLabel, Trajectory};
use crate::error::{ModelError, Result};
use crate::experiments::PhaseDiagram;

/// A float rendered with 17 significant digits, enough to round-trip f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `content` atomically: to a temp file in the destination directory,
/// then rename over the target.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.persist(path).map_err(|e| ModelError::Io(e.error))?;
    Ok(())
}

/// Trajectory CSV: one row per recorded (iteration, firm) with columns
/// `iter,firm,coord_0..coord_{d-1},price,share,profit`.
pub fn trajectory_csv(traj: &Trajectory, dim: usize) -> String {
    let mut out = String::from("iter,firm");
    for k in 0..dim {
        out.push_str(&format!(",coord_{k}"));
    }
    out.push_str(",price,share,profit\n");
    for step in &traj.steps {
        for (i, pos) in step.state.positions.iter().enumerate() {
            out.push_str(&format!("{},{}", step.iter, i));
            for c in &pos.coords {
                out.push(',');
                out.push_str(&fmt_float(*c));
            }
            out.push(',');
            out.push_str(&fmt_float(step.state.prices[i]));
            out.push(',');
            out.push_str(&fmt_float(step.profile.shares[i]));
            out.push(',');
            out.push_str(&fmt_float(step.profile.profits[i]));
            out.push('\n');
        }
    }
    out
}

/// Phase-diagram CSV: columns
/// `beta,N,fraction_concentrated,replicates,predicted_threshold`, one row per
/// grid cell in (N, β) order.
pub fn phase_csv(d: &PhaseDiagram) -> String {
    let mut out = String::from("beta,N,fraction_concentrated,replicates,predicted_threshold\n");
    for (ni, &n) in d.n_grid.iter().enumerate() {
        for (bi, &beta) in d.beta_grid.iter().enumerate() {
            let cell = &d.outcomes[ni][bi];
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_float(beta),
                n,
                fmt_float(cell.fraction_concentrated),
                cell.replicates,
                fmt_float(d.predicted_threshold[ni]),
            ));
        }
    }
    out
}

/// Human-readable final-state summary: termination, outcome label, and the
/// final per-firm state.
pub fn summary_text(traj: &Trajectory, label: &OutcomeLabel) -> String {
    let state = traj.final_state();
    let mut out = String::new();
    out.push_str(&format!("terminated: {:?}\n", traj.terminated_reason));
    out.push_str(&format!("iterations: {}\n", traj.iterations()));
    out.push_str(&format!("outcome: {:?}\n", label.kind));
    out.push_str(&format!(
        "max_pairwise_distance: {}\n",
        fmt_float(label.max_pairwise_distance)
    ));
    out.push_str(&format!("mean_final_price: {}\n", fmt_float(label.mean_final_price)));
    for (i, (pos, price)) in state.positions.iter().zip(&state.prices).enumerate() {
        let coords: Vec<String> = pos.coords.iter().map(|c| fmt_float(*c)).collect();
        out.push_str(&format!("firm {i}: position [{}] price {}\n", coords.join(", "), fmt_float(*price)));
    }
    out
}
