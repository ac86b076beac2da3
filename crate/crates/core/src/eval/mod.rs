//! Link-level metrics, classical baselines and the experiment grid.

mod baseline;
mod grid;
mod metrics;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Dataset;
use crate::error::{Error, Result};
use crate::numerics::ComplexTensor;

pub use baseline::{
    fit_linear_ar, series_history, BaselineKind, BaselinePredictor, ModelPredictor, Predictor,
    AR_RIDGE,
};
pub use grid::{
    run_experiment_grid, CellOutcome, GridConfig, GridOptions, GridOutcome, Method,
};
pub use metrics::{
    bit_error_rate, effective_gains, nmse_over, spectral_efficiency, stack, NmseSummary,
    SeSummary,
};

/// Operating point for SE and BER.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub snr_db: f64,
    pub n_bits: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            snr_db: 10.0,
            n_bits: 100_000,
        }
    }
}

/// All three metrics for one predictor on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics {
    pub nmse: f64,
    pub nmse_excluded: usize,
    pub se_bps_hz: f64,
    pub se_fallbacks: usize,
    pub ber: f64,
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub velocity_kmh: f64,
    /// History noise level; `None` for clean histories.
    pub snr_db: Option<f64>,
    /// `channelkan`, `hold`, `ar4`, `oracle`, ...
    pub method: String,
    /// Ablation label for the network, `-` for other methods.
    pub ablation: String,
    pub seed: u64,
    pub link_snr_db: f64,
    pub nmse: f64,
    pub nmse_excluded: usize,
    pub se_bps_hz: f64,
    pub se_fallbacks: usize,
    pub ber: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str =
        "velocity_kmh,snr_db,method,ablation,multiscale,dual_domain,kan,cnn_kan,seed,link_snr_db,nmse,se_bps_hz,ber";

    pub fn csv_row(&self) -> String {
        let flags = crate::model::Ablation::from_label(&self.ablation)
            .map(|a| {
                [a.multiscale, a.dual_domain, a.kan, a.cnn_kan]
                    .map(|f| u8::from(f).to_string())
                    .join(",")
            })
            .unwrap_or_else(|_| "-,-,-,-".into());
        format!(
            "{},{},{},{},{},{},{},{:e},{:e},{:e}",
            self.velocity_kmh,
            fmt_snr(self.snr_db),
            self.method,
            self.ablation,
            flags,
            self.seed,
            self.link_snr_db,
            self.nmse,
            self.se_bps_hz,
            self.ber
        )
    }

    pub fn write_csv(rows: &[MetricReport], path: &std::path::Path) -> Result<()> {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in rows {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

pub(crate) fn fmt_snr(snr: Option<f64>) -> String {
    snr.map_or_else(|| "clean".into(), |s| s.to_string())
}

/// Runs `predictor` over every history of `data`.
pub fn predict_dataset(predictor: &dyn Predictor, data: &Dataset) -> Result<Vec<ComplexTensor>> {
    data.samples
        .iter()
        .map(|s| predictor.predict(&s.history, data.horizon))
        .collect()
}

/// Mean per-sample NMSE of `predictor` on `test`.
pub fn eval_nmse(predictor: &dyn Predictor, test: &Dataset) -> Result<NmseSummary> {
    if test.is_empty() {
        return Err(Error::EmptyDataset("test set is empty".into()));
    }
    let preds = predict_dataset(predictor, test)?;
    let truths: Vec<ComplexTensor> = test.samples.iter().map(|s| s.future.clone()).collect();
    nmse_over(&preds, &truths)
}

/// NMSE, SE and BER of `preds` against the futures of `test`. The BER
/// simulation draws from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn evaluate_predictions(
    preds: &[ComplexTensor],
    test: &Dataset,
    link: &LinkConfig,
    seed: u64,
) -> Result<LinkMetrics> {
    let truths: Vec<ComplexTensor> = test.samples.iter().map(|s| s.future.clone()).collect();
    let nmse = nmse_over(preds, &truths)?;
    let pred_all = stack(preds)?;
    let truth_all = stack(&truths)?;
    let n_t = test.system.n_t();
    let se = spectral_efficiency(&pred_all, &truth_all, n_t, link.snr_db)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ber = bit_error_rate(&pred_all, &truth_all, n_t, link.snr_db, link.n_bits, &mut rng)?;
    Ok(LinkMetrics {
        nmse: nmse.nmse,
        nmse_excluded: nmse.excluded,
        se_bps_hz: se.se_bps_hz,
        se_fallbacks: se.fallbacks,
        ber,
    })
}
