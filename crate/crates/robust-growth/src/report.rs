//! Report bodies and plot-ready CSV sidecar writers shared by the CLI and
//! the test suites.

use std::io::{self, Write};

use serde::Serialize;

use crate::eigen1d::{ClassificationReport, ExtrapolationModel};
use crate::growth::{ArbitrageReport, GrowthReport, NumeraireReport, WealthGrid};
use crate::sde::PathEnsemble;

/// Body of the `eigen` report.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReportBody {
    pub lambda: f64,
    pub residual_max: f64,
    pub epsilons: Vec<f64>,
    pub per_epsilon_lambdas: Vec<f64>,
    pub extrapolation_model: ExtrapolationModel,
    pub endpoint_orders: (f64, f64),
    pub classification: ClassificationReport,
}

/// Ensemble states as columnar CSV: `path_id, t, x_1..x_d, absorbed`.
pub fn write_ensemble_csv(w: &mut dyn Write, ens: &PathEnsemble) -> io::Result<()> {
    write!(w, "path_id,t")?;
    for i in 1..=ens.dim {
        write!(w, ",x_{i}")?;
    }
    writeln!(w, ",absorbed")?;
    for (pid, p) in ens.paths.iter().enumerate() {
        for (k, &t) in ens.times.iter().enumerate() {
            write!(w, "{pid},{t}")?;
            match p.state_at(k, ens.dim) {
                Some(x) => {
                    for v in x {
                        write!(w, ",{v}")?;
                    }
                    writeln!(w, ",0")?;
                }
                None => {
                    for _ in 0..ens.dim {
                        write!(w, ",")?;
                    }
                    writeln!(w, ",1")?;
                }
            }
        }
    }
    Ok(())
}

/// Gamma-curve of a growth report: `gamma, fraction`.
pub fn write_growth_csv(w: &mut dyn Write, rep: &GrowthReport) -> io::Result<()> {
    writeln!(w, "gamma,fraction")?;
    for (g, f) in rep.gamma_grid.iter().zip(&rep.fractions) {
        writeln!(w, "{g},{f}")?;
    }
    Ok(())
}

/// Numeraire ratio time series: `t, mean_ratio`.
pub fn write_numeraire_csv(w: &mut dyn Write, rep: &NumeraireReport) -> io::Result<()> {
    writeln!(w, "t,mean_ratio")?;
    for (t, m) in rep.times.iter().zip(&rep.mean_ratio) {
        writeln!(w, "{t},{m}")?;
    }
    Ok(())
}

/// Deviation-versus-maturity table:
/// `horizon, median_sup_dev, p95_sup_dev, mean_abs_z_minus_1`.
pub fn write_arbitrage_csv(w: &mut dyn Write, rep: &ArbitrageReport) -> io::Result<()> {
    writeln!(w, "horizon,median_sup_dev,p95_sup_dev,mean_abs_z_minus_1")?;
    for r in &rep.rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.horizon, r.median_sup_dev, r.p95_sup_dev, r.mean_abs_z_minus_1
        )?;
    }
    Ok(())
}

/// Wealth paths as columnar CSV: `path_id, t, value`.
pub fn write_wealth_csv(w: &mut dyn Write, grid: &WealthGrid) -> io::Result<()> {
    writeln!(w, "path_id,t,value")?;
    for (pid, p) in grid.paths.iter().enumerate() {
        for (t, v) in grid.times.iter().zip(&p.values) {
            writeln!(w, "{pid},{t},{v}")?;
        }
    }
    Ok(())
}
