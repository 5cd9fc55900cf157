use std::path::Path;

use serde::Deserialize;

use super::{GridResult, Result};

pub const CSV_HEADER: [&str; 14] = [
    "N",
    "K",
    "M",
    "trials",
    "successes",
    "success_rate",
    "mean_fp",
    "mean_fn",
    "mean_undetermined",
    "mean_iterations",
    "gamma",
    "epsilon",
    "sigma",
    "seed",
];

/// One parsed row of an emitted grid CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_fp: f64,
    pub mean_fn: f64,
    pub mean_undetermined: f64,
    pub mean_iterations: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub seed: u64,
}

/// Writes one row per cell. Floats use the shortest representation that
/// parses back to the same value.
pub fn emit_csv(result: &GridResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    let spec = &result.spec;
    for c in &result.cells {
        w.write_record([
            spec.n.to_string(),
            c.k.to_string(),
            c.m.to_string(),
            c.trials.to_string(),
            c.successes.to_string(),
            c.success_rate().to_string(),
            c.mean_false_positives().to_string(),
            c.mean_false_negatives().to_string(),
            c.mean_undetermined().to_string(),
            c.mean_iterations().to_string(),
            c.gamma.to_string(),
            spec.decoder.epsilon.to_string(),
            spec.sigma.to_string(),
            spec.master_seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_grid, ExperimentSpec};

    #[test]
    fn empty_grid_is_header_only() {
        let spec = ExperimentSpec { k_values: vec![], ..ExperimentSpec::desk_default(1) };
        let grid = run_grid(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        emit_csv(&grid, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_preserves_aggregates() {
        let spec = ExperimentSpec {
            n: 200,
            k_values: vec![2, 7, 9],
            m_values: vec![15, 60],
            trials: 7,
            ..ExperimentSpec::desk_default(8)
        };
        let grid = run_grid(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.csv");
        emit_csv(&grid, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        let rows = read_csv(&path).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, cell) in rows.iter().zip(&grid.cells) {
            assert_eq!((row.n, row.k, row.m, row.trials), (200, cell.k, cell.m, 7));
            assert_eq!(row.successes, cell.successes);
            assert_eq!(row.success_rate, cell.success_rate());
            assert_eq!(row.mean_fp, cell.mean_false_positives());
            assert_eq!(row.mean_fn, cell.mean_false_negatives());
            assert_eq!(row.mean_undetermined, cell.mean_undetermined());
            assert_eq!(row.mean_iterations, cell.mean_iterations());
            assert_eq!(row.gamma, cell.gamma);
            assert_eq!(row.seed, 8);
        }
    }
}
