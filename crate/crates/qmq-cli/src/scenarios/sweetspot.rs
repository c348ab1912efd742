//! Magnetic-field sweet-spot search: eigendirections of the g-tensor pencil
//! that null the transverse coupling, a full direction sweep as a CSV map,
//! and the coupling decomposition at the recommended direction.

use std::path::{Path, PathBuf};

use serde::Serialize;

use qmq_core::sweetspot::{
    decompose_delta, direction_sweep, sweet_spot_directions, FieldConfig, GTensorPair,
};

use crate::output::{format_float, ArtifactSet, CsvTable};
use crate::CliError;

use super::RunContext;

#[derive(Debug, Clone, Serialize)]
struct SpotOut {
    direction: [f64; 3],
    eigenvalue: f64,
    /// Coupling decomposition when the field points along this direction.
    delta_z_uev: f64,
    delta_x_uev: f64,
    zeeman_energy_uev: f64,
}

#[derive(Debug, Clone, Serialize)]
struct GridMinimum {
    theta_deg: f64,
    phi_deg: f64,
    delta_x_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SweetSpotOut {
    g: [[f64; 3]; 3],
    g_prime: [[f64; 3]; 3],
    field_magnitude_tesla: f64,
    spots: Vec<SpotOut>,
    degenerate: bool,
    defective: bool,
    note: Option<String>,
    /// Index into `spots` of the direction maximizing the measurement rate.
    recommended: Option<usize>,
    /// Best grid point of the direction sweep, for cross-checking.
    grid_minimum: GridMinimum,
}

/// Reads a 6x3 whitespace- or comma-separated table: three rows for the bare
/// tensor g, then three rows for the modulation tensor g'.
pub fn load_g_file(path: &Path) -> Result<GTensorPair, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read g-file {}: {e}", path.display())))?;
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 3 {
            return Err(CliError::Parse(format!(
                "g-file line {}: expected 3 values, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let mut row = [0.0; 3];
        for (slot, field) in row.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|e| {
                CliError::Parse(format!("g-file line {}: bad number {field:?}: {e}", lineno + 1))
            })?;
        }
        rows.push(row);
    }
    if rows.len() != 6 {
        return Err(CliError::Parse(format!(
            "g-file must hold 6 data rows (3 for g, 3 for g'), got {}",
            rows.len()
        )));
    }
    GTensorPair::new([rows[0], rows[1], rows[2]], [rows[3], rows[4], rows[5]])
        .map_err(|e| CliError::Validation(e.to_string()))
}

pub fn run(ctx: &RunContext) -> Result<Vec<PathBuf>, CliError> {
    run_with_pair(ctx, None)
}

/// Like [`run`] but with the tensors overridden, e.g. from `--g-file`.
pub fn run_with_pair(
    ctx: &RunContext,
    override_pair: Option<GTensorPair>,
) -> Result<Vec<PathBuf>, CliError> {
    let config = ctx.config;
    let section = &config.sweetspot;
    let pair = match override_pair {
        Some(p) => p,
        None => GTensorPair::new(section.g, section.g_prime)
            .map_err(|e| CliError::Validation(e.to_string()))?,
    };

    let report = sweet_spot_directions(&pair).map_err(|e| CliError::Validation(e.to_string()))?;
    let sweep = direction_sweep(&pair, section.n_theta, section.n_phi, section.field_magnitude)
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let mut artifacts = ArtifactSet::new(ctx.out_dir(), ctx.label())?;
    let mut map = CsvTable::new(&[
        "theta_deg",
        "phi_deg",
        "delta_x_norm",
        "delta_z_norm",
        "delta_x_uev",
    ]);
    let mut best = GridMinimum {
        theta_deg: f64::NAN,
        phi_deg: f64::NAN,
        delta_x_norm: f64::INFINITY,
    };
    for point in &sweep.points {
        map.push_row(vec![
            format_float(point.theta_deg),
            format_float(point.phi_deg),
            format_float(point.delta_x_norm),
            format_float(point.delta_z_norm),
            format_float(point.delta_x_uev),
        ]);
        if point.delta_x_norm < best.delta_x_norm {
            best = GridMinimum {
                theta_deg: point.theta_deg,
                phi_deg: point.phi_deg,
                delta_x_norm: point.delta_x_norm,
            };
        }
    }

    let mut spots = Vec::with_capacity(report.spots.len());
    for spot in &report.spots {
        let field = FieldConfig::new(spot.direction, section.field_magnitude)
            .map_err(|e| CliError::Compute(e.to_string()))?;
        let decomposition =
            decompose_delta(&pair, &field).map_err(|e| CliError::Compute(e.to_string()))?;
        spots.push(SpotOut {
            direction: spot.direction,
            eigenvalue: spot.eigenvalue,
            delta_z_uev: decomposition.delta_z,
            delta_x_uev: decomposition.delta_x,
            zeeman_energy_uev: decomposition.zeeman_energy,
        });
    }
    let recommended = report.recommended().and_then(|r| {
        report
            .spots
            .iter()
            .position(|s| s.direction == r.direction)
    });

    let grid_minimum_delta_x = best.delta_x_norm;
    let out = SweetSpotOut {
        g: pair.g,
        g_prime: pair.g_prime,
        field_magnitude_tesla: section.field_magnitude,
        spots,
        degenerate: report.degenerate,
        defective: report.defective,
        note: report.note.clone(),
        recommended,
        grid_minimum: best,
    };

    artifacts.write_csv("direction_map.csv", &map)?;
    artifacts.write_json("sweetspots.json", &out)?;
    artifacts.record("grid_minimum_delta_x_norm", grid_minimum_delta_x);
    artifacts.finish("sweetspot", config)
}
