//! CSV emitters for the analysis products. All tables carry a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use belltag_core::{
    ChshForm, ChshResult, CoincidenceTable, CorrelationResult, NoSignalingReport, OffsetEstimate,
    Outcome,
};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_rates_csv(path: &Path, table: &CoincidenceTable) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "alice_setting,bob_setting,alice_detector,bob_detector,count")?;
    for a in 0..2u8 {
        for b in 0..2u8 {
            for i in [Outcome::Plus, Outcome::Minus] {
                for j in [Outcome::Plus, Outcome::Minus] {
                    writeln!(
                        w,
                        "{a},{b},{},{},{}",
                        i.symbol(),
                        j.symbol(),
                        table.cell(a, b, i, j)
                    )?;
                }
            }
        }
    }
    Ok(())
}

pub fn write_correlations_csv(
    path: &Path,
    e: &[[CorrelationResult; 2]; 2],
    forms: &[(ChshForm, ChshResult); 4],
    best: &(ChshForm, ChshResult),
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "quantity,value,sigma,n")?;
    for a in 0..2 {
        for b in 0..2 {
            writeln!(
                w,
                "E_a{a}_b{b},{},{},{}",
                e[a][b].e, e[a][b].sigma_e, e[a][b].n
            )?;
        }
    }
    for (form, r) in forms {
        writeln!(w, "S[{}],{},{},", form.label(), r.s, r.sigma_s)?;
    }
    writeln!(w, "S,{},{},", best.1.s, best.1.sigma_s)?;
    writeln!(w, "n_sigma_violation,{},,", best.1.n_sigma_violation)?;
    Ok(())
}

pub fn write_offset_csv(path: &Path, est: &OffsetEstimate, window: f64) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "offset_ps,peak_height,background_mean,snr,fwhm_ps,window_s")?;
    writeln!(
        w,
        "{},{},{},{},{},{}",
        est.offset_ps, est.peak_height, est.background_mean, est.snr, est.fwhm_ps, window
    )?;
    Ok(())
}

pub fn write_nosignaling_csv(path: &Path, report: &NoSignalingReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "side,local_setting,p_plus_remote0,n_remote0,p_plus_remote1,n_remote1,delta,z,status"
    )?;
    for c in &report.comparisons {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{:?}",
            c.side, c.local_setting, c.p_plus[0], c.n[0], c.p_plus[1], c.n[1], c.delta, c.z,
            c.status
        )?;
    }
    Ok(())
}

/// Correlation matrix pretty-printer for the terminal report.
pub fn print_correlations(e: &[[CorrelationResult; 2]; 2]) {
    for a in 0..2 {
        for b in 0..2 {
            println!(
                "  E(a{a}, b{b}) = {:+.4} ± {:.4}   N = {}",
                e[a][b].e, e[a][b].sigma_e, e[a][b].n
            );
        }
    }
}
