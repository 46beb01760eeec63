//! Parameter sweep runner: a cartesian grid and/or explicit override
//! cells applied on top of a base configuration, each cell an isolated
//! simulation. Cells run concurrently; results keep the declared order.
//! A faulting cell is recorded, not fatal.

use rayon::prelude::*;

use crate::analysis::MetricsReport;
use crate::analysis::Trace;
use crate::config::{resolve_document, ConfigError};
use crate::experiments::{run_drop_test, ExperimentConfig, Overrides, Protocol};

#[derive(Debug)]
pub enum SweepOutcome {
    Completed {
        trace: Trace,
        metrics: MetricsReport,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug)]
pub struct SweepCell {
    pub index: usize,
    pub overrides: Overrides,
    pub outcome: SweepOutcome,
}

#[derive(Debug)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn completed(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, SweepOutcome::Completed { .. }))
            .count()
    }

    pub fn failed(&self) -> usize {
        self.cells.len() - self.completed()
    }
}

/// Expand the sweep specification into the ordered list of override sets:
/// the cartesian product of the grid (sorted key order) followed by the
/// explicit cells.
pub fn expand_cells(config: &ExperimentConfig) -> Vec<Overrides> {
    let sweep = &config.sweep;
    let mut cells: Vec<Overrides> = Vec::new();
    if !sweep.grid.is_empty() {
        let keys: Vec<&String> = sweep.grid.keys().collect();
        let mut product: Vec<Overrides> = vec![Overrides::new()];
        for key in keys {
            let values = &sweep.grid[key];
            let mut next = Vec::with_capacity(product.len() * values.len());
            for base in &product {
                for value in values {
                    let mut cell = base.clone();
                    cell.insert(key.clone(), value.clone());
                    next.push(cell);
                }
            }
            product = next;
        }
        cells.extend(product);
    }
    cells.extend(sweep.cells.iter().cloned());
    cells
}

fn run_cell(
    base_raw: &toml::Table,
    overrides: &Overrides,
    protocol: Protocol,
) -> Result<(Trace, MetricsReport), String> {
    let mut raw = base_raw.clone();
    crate::config::apply_overrides(&mut raw, overrides).map_err(|e| e.to_string())?;
    let (mut cell_config, _) = resolve_document(&raw).map_err(|e: ConfigError| e.to_string())?;
    cell_config.protocol = protocol;
    let trace = match protocol {
        Protocol::DropTest => run_drop_test(&cell_config).map_err(|e| e.to_string())?,
        other => return Err(format!("sweep over protocol {} is not supported", other.name())),
    };
    let metrics = MetricsReport::compute(&trace, None).map_err(|e| e.to_string())?;
    Ok((trace, metrics))
}

/// Run every cell of the sweep against the raw base document. The raw
/// document is required so overrides pass through the same validation as
/// hand-written configuration files.
pub fn run_sweep(base_raw: &toml::Table, config: &ExperimentConfig) -> SweepReport {
    let cells = expand_cells(config);
    let protocol = config.sweep.protocol;
    let outcomes: Vec<SweepCell> = cells
        .into_par_iter()
        .enumerate()
        .map(|(index, overrides)| {
            let outcome = match run_cell(base_raw, &overrides, protocol) {
                Ok((trace, metrics)) => SweepOutcome::Completed { trace, metrics },
                Err(error) => SweepOutcome::Failed { error },
            };
            SweepCell { index, overrides, outcome }
        })
        .collect();
    SweepReport { cells: outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::SweepSettings;

    fn base_doc(extra: &str) -> toml::Table {
        let text = format!(
            "[experiment]\nprotocol = \"sweep\"\nduration_s = 0.2\n{extra}"
        );
        text.parse::<toml::Table>().unwrap()
    }

    fn config_from(doc: &toml::Table) -> ExperimentConfig {
        resolve_document(doc).unwrap().0
    }

    #[test]
    fn empty_sweep_produces_no_cells() {
        let doc = base_doc("");
        let config = config_from(&doc);
        assert!(expand_cells(&config).is_empty());
        let report = run_sweep(&doc, &config);
        assert_eq!(report.cells.len(), 0);
    }

    #[test]
    fn grid_expands_to_cartesian_product() {
        let doc = base_doc(
            "[experiment.sweep.grid]\n\
             \"control.knee.kp\" = [0.02, 0.05]\n\
             \"experiment.initial_pose_deg.knee\" = [30.0, 60.0]\n",
        );
        let config = config_from(&doc);
        let cells = expand_cells(&config);
        assert_eq!(cells.len(), 4);
        // Sorted key order: control.knee.kp varies slowest.
        assert_eq!(cells[0]["control.knee.kp"], toml::Value::Float(0.02));
        assert_eq!(cells[1]["control.knee.kp"], toml::Value::Float(0.02));
        assert_eq!(cells[2]["control.knee.kp"], toml::Value::Float(0.05));
        assert_eq!(
            cells[0]["experiment.initial_pose_deg.knee"],
            toml::Value::Float(30.0)
        );
        assert_eq!(
            cells[1]["experiment.initial_pose_deg.knee"],
            toml::Value::Float(60.0)
        );
    }

    #[test]
    fn cells_run_and_report_in_declared_order() {
        let doc = base_doc(
            "[experiment.sweep.grid]\n\"control.knee.kp\" = [0.02, 0.05]\n",
        );
        let config = config_from(&doc);
        let report = run_sweep(&doc, &config);
        assert_eq!(report.cells.len(), 2);
        assert_eq!(report.completed(), 2);
        for (i, cell) in report.cells.iter().enumerate() {
            assert_eq!(cell.index, i);
        }
    }

    #[test]
    fn invalid_override_is_recorded_not_fatal() {
        let doc = base_doc(
            "[experiment.sweep.grid]\n\"sea.knee.spring_k_nm_per_deg\" = [0.012, 99.0]\n",
        );
        let config = config_from(&doc);
        let report = run_sweep(&doc, &config);
        assert_eq!(report.cells.len(), 2);
        assert_eq!(report.completed(), 1);
        assert_eq!(report.failed(), 1);
        match &report.cells[1].outcome {
            SweepOutcome::Failed { error } => {
                assert!(error.contains("spring"), "error: {error}");
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rerunning_a_sweep_is_deterministic() {
        let doc = base_doc(
            "[experiment.sweep.grid]\n\"control.knee.kp\" = [0.02, 0.05]\n",
        );
        let config = config_from(&doc);
        let a = run_sweep(&doc, &config);
        let b = run_sweep(&doc, &config);
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            match (&ca.outcome, &cb.outcome) {
                (
                    SweepOutcome::Completed { trace: ta, .. },
                    SweepOutcome::Completed { trace: tb, .. },
                ) => assert_eq!(ta, tb),
                _ => panic!("outcomes differ"),
            }
        }
    }

    #[test]
    fn sweep_settings_default_protocol_is_drop_test() {
        let s = SweepSettings::default();
        let _ = s; // Protocol default is set in ExperimentConfig::defaults.
        let doc = base_doc("");
        let config = config_from(&doc);
        assert_eq!(config.sweep.protocol, Protocol::DropTest);
    }
}
