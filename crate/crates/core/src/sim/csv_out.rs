use std::io::Write;
use std::path::Path;

use super::{CostReport, Result, Trajectory};

/// CSV with columns `k, x0.., u0.., w0.., state_cost, control_cost, lyapunov`.
/// Row `k < N` carries the transition out of step `k`; row `N` holds the
/// final state only.
pub fn trajectory_csv<W: Write>(out: W, trajectory: &Trajectory, costs: Option<&CostReport>) -> Result<()> {
    trajectory.check_shape()?;
    let n = trajectory.states[0].len();
    let m = trajectory.inputs.first().map_or(0, |u| u.len());
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    header.extend((0..n).map(|i| format!("w{i}")));
    header.extend(["state_cost", "control_cost", "lyapunov"].map(String::from));
    wtr.write_record(&header)?;
    let horizon = trajectory.horizon();
    for k in 0..=horizon {
        let mut row = vec![k.to_string()];
        row.extend(trajectory.states[k].iter().map(f64::to_string));
        let blank = |len: usize| std::iter::repeat_n(String::new(), len);
        if k < horizon {
            row.extend(trajectory.inputs[k].iter().map(f64::to_string));
            row.extend(trajectory.noises[k].iter().map(f64::to_string));
        } else {
            row.extend(blank(m + n));
        }
        let pick = |v: Option<&Vec<f64>>| v.and_then(|v| v.get(k)).map_or(String::new(), f64::to_string);
        row.push(pick(costs.map(|c| &c.per_step_state_cost)));
        row.push(pick(costs.map(|c| &c.per_step_control_cost)));
        row.push(pick(costs.map(|c| &c.lyapunov_values)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, trajectory: &Trajectory, costs: Option<&CostReport>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    trajectory_csv(std::io::BufWriter::new(file), trajectory, costs)
}
