//! Subcommand implementations.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use belltag_core::{
    audit_streams, chsh_all_forms, chsh_max, correlations, fit_sinusoid, match_coincidences,
    no_signaling_check, recover_offset, records_to_tags, run_experiment, run_scan,
    tags_to_records, tagstream, time, ExperimentConfig, Geometry, MatchMode, MeasurementBudget,
    Outcome, RecoverParams, RunManifest, ScanParams, StreamHeader, TimeTag,
};

use crate::config;
use crate::output;
use crate::ConfigArgs;

#[derive(Serialize)]
struct ManifestDoc<'a> {
    run: &'a RunManifest,
    config: &'a ExperimentConfig,
}

pub fn simulate(args: &ConfigArgs, out: &Path, text: bool) -> Result<()> {
    let config = config::load(args)?;
    std::fs::create_dir_all(out)?;

    let run = run_experiment(&config)?;
    let tick = time::secs_to_ps(config.alice.tag_resolution) as u32;
    let tick_bob = time::secs_to_ps(config.bob.tag_resolution) as u32;

    let alice_path = out.join("alice.btag");
    let bob_path = out.join("bob.btag");
    write_station(&alice_path, tagstream::STATION_ALICE, tick, &run.alice_tags, text)?;
    write_station(&bob_path, tagstream::STATION_BOB, tick_bob, &run.bob_tags, text)?;

    let manifest = toml::to_string_pretty(&ManifestDoc {
        run: &run.manifest,
        config: &config,
    })?;
    std::fs::write(out.join("manifest.toml"), manifest)?;

    // Ground truth lives in its own clearly-named file: the analysis must
    // recover the offset from the streams alone, never from here.
    let truth = format!(
        "# Simulation ground truth — NOT an analysis input.\n\
         # Offline analysis must recover the offset from the tag streams alone;\n\
         # this file exists only so closed-loop tests can score that recovery.\n{}",
        toml::to_string_pretty(&run.truth)?
    );
    std::fs::write(out.join("ground_truth.toml"), truth)?;

    let dur = config.duration.max(f64::MIN_POSITIVE);
    println!("model {}  seed {}", config.model, config.master_seed);
    println!(
        "emitted {} pairs over {} s",
        run.manifest.pairs_emitted, config.duration
    );
    println!(
        "alice: {} tags ({:.0} + {:.0} per second)  -> {}",
        run.manifest.alice_total(),
        run.manifest.alice_singles[0] as f64 / dur,
        run.manifest.alice_singles[1] as f64 / dur,
        alice_path.display()
    );
    println!(
        "bob:   {} tags ({:.0} + {:.0} per second)  -> {}",
        run.manifest.bob_total(),
        run.manifest.bob_singles[0] as f64 / dur,
        run.manifest.bob_singles[1] as f64 / dur,
        bob_path.display()
    );
    Ok(())
}

fn write_station(
    path: &Path,
    station_id: u8,
    tick_unit_ps: u32,
    tags: &[TimeTag],
    text: bool,
) -> Result<()> {
    let records = tags_to_records(tags, tick_unit_ps)?;
    let mut header = StreamHeader::new(station_id, tick_unit_ps);
    header.record_count = records.len() as u64;
    header.start_time = 0;
    tagstream::write_file(path, &header, &records)?;
    if text {
        let mut w = output::create(&path.with_extension("txt"))?;
        tagstream::write_text(&mut w, &records)?;
    }
    Ok(())
}

struct LoadedStream {
    header: StreamHeader,
    tags: Vec<TimeTag>,
}

fn load_stream(path: &Path) -> Result<LoadedStream> {
    let (header, records) =
        tagstream::read_file(path).with_context(|| format!("reading {}", path.display()))?;
    let tags = records_to_tags(&records, header.tick_unit_ps);
    Ok(LoadedStream { header, tags })
}

pub fn analyze(
    alice: &Path,
    bob: &Path,
    window: f64,
    search_range: f64,
    all_pairs: bool,
    out: Option<&Path>,
) -> Result<()> {
    let a = load_stream(alice)?;
    let b = load_stream(bob)?;
    if a.header.station_id == b.header.station_id {
        bail!(
            "both streams carry station_id {}; need one stream per station (0 and 1)",
            a.header.station_id
        );
    }
    if a.header.station_id != tagstream::STATION_ALICE {
        bail!(
            "first stream must be station 0 (Alice), got {}",
            a.header.station_id
        );
    }
    println!(
        "alice: {} tags from {}",
        a.tags.len(),
        alice.display()
    );
    println!("bob:   {} tags from {}", b.tags.len(), bob.display());

    let recover = RecoverParams {
        coarse_range: search_range,
        ..RecoverParams::default()
    };
    let est = recover_offset(&a.tags, &b.tags, &recover)?;
    println!(
        "offset (bob − alice): {:.3} ns   SNR {:.0}   FWHM {:.2} ns   peak {}",
        est.offset_ps / 1e3,
        est.snr,
        est.fwhm_ps / 1e3,
        est.peak_height
    );

    let mode = if all_pairs {
        MatchMode::AllPairs
    } else {
        MatchMode::OneToOne
    };
    let matched = match_coincidences(
        &a.tags,
        &b.tags,
        est.offset_ps.round() as i64,
        time::secs_to_ps(window),
        mode,
    )?;
    println!(
        "coincidences in a {:.1} ns window: {}",
        window * 1e9,
        matched.table.grand_total()
    );
    println!("counts C[alice_det,setting | bob_det,setting]:");
    for i in [Outcome::Plus, Outcome::Minus] {
        for a_set in 0..2u8 {
            let row: Vec<String> = [Outcome::Plus, Outcome::Minus]
                .iter()
                .flat_map(|j| {
                    (0..2u8).map(move |b_set| {
                        format!("{:>6}", matched.table.cell(a_set, b_set, i, *j))
                    })
                })
                .collect();
            println!("  A{}{}: {}", i.symbol(), a_set, row.join(" "));
        }
    }

    let e = correlations(&matched.table)?;
    output::print_correlations(&e);
    let forms = chsh_all_forms(&e);
    let best = chsh_max(&e);
    println!(
        "S = {:.4} ± {:.4}   [{}]   violation: {:.1}σ above the local bound",
        best.1.s,
        best.1.sigma_s,
        best.0.label(),
        best.1.n_sigma_violation
    );

    let ns = no_signaling_check(&matched.table);
    println!(
        "no-signaling: max |Δmarginal| = {:.4}, max |z| = {:.2}  {}",
        ns.max_abs_delta,
        ns.max_abs_z,
        if ns.flagged { "FLAGGED" } else { "ok" }
    );

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        output::write_rates_csv(&dir.join("rates.csv"), &matched.table)?;
        output::write_correlations_csv(&dir.join("correlations.csv"), &e, &forms, &best)?;
        output::write_offset_csv(&dir.join("offset.csv"), &est, window)?;
        output::write_nosignaling_csv(&dir.join("nosignaling.csv"), &ns)?;
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

/// The four curves displayed in scan outputs: all detector combinations of
/// Alice switch 1 against Bob switch 0.
const DISPLAY_CURVES: [(u8, u8, Outcome, Outcome); 4] = [
    (1, 0, Outcome::Plus, Outcome::Plus),
    (1, 0, Outcome::Plus, Outcome::Minus),
    (1, 0, Outcome::Minus, Outcome::Plus),
    (1, 0, Outcome::Minus, Outcome::Minus),
];

fn curve_label(a: u8, b: u8, i: Outcome, j: Outcome) -> String {
    format!("A{}{}_B{}{}", i.symbol(), a, j.symbol(), b)
}

pub fn scan(
    args: &ConfigArgs,
    out: &Path,
    points: u32,
    dwell: f64,
    start_deg: f64,
    range_deg: f64,
    noiseless: bool,
) -> Result<()> {
    let config = config::load(args)?;
    let params = ScanParams {
        start: start_deg.to_radians(),
        range: range_deg.to_radians(),
        points,
        dwell,
        noiseless,
    };
    let scan_points = run_scan(&config, &params)?;
    std::fs::create_dir_all(out)?;

    // per-point rates for the display curves
    let mut w = output::create(&out.join("scan_rates.csv"))?;
    use std::io::Write;
    let labels: Vec<String> = DISPLAY_CURVES
        .iter()
        .map(|&(a, b, i, j)| curve_label(a, b, i, j))
        .collect();
    writeln!(w, "point,angle_deg,{},total", labels.join(","))?;
    for (k, p) in scan_points.iter().enumerate() {
        let cells: Vec<String> = DISPLAY_CURVES
            .iter()
            .map(|&(a, b, i, j)| format!("{}", p.cell(a, b, i.index(), j.index())))
            .collect();
        writeln!(
            w,
            "{k},{:.4},{},{}",
            p.angle_offset.to_degrees(),
            cells.join(","),
            p.total
        )?;
    }
    drop(w);

    // singles per point
    let mut w = output::create(&out.join("scan_singles.csv"))?;
    writeln!(w, "point,angle_deg,alice_plus,alice_minus,bob_plus,bob_minus")?;
    for (k, p) in scan_points.iter().enumerate() {
        writeln!(
            w,
            "{k},{:.4},{},{},{},{}",
            p.angle_offset.to_degrees(),
            p.alice_singles[0],
            p.alice_singles[1],
            p.bob_singles[0],
            p.bob_singles[1]
        )?;
    }
    drop(w);

    // fit all 16 curves; report the display ones and the pooled visibility
    let mut w = output::create(&out.join("scan_fits.csv"))?;
    writeln!(
        w,
        "curve,mean_level,amplitude,phase_deg,visibility,sigma_visibility,chi2_per_dof,phase_unconstrained"
    )?;
    let mut pooled_num = 0.0;
    let mut pooled_den = 0.0;
    let mut display_fits = Vec::new();
    for a in 0..2u8 {
        for b in 0..2u8 {
            for i in [Outcome::Plus, Outcome::Minus] {
                for j in [Outcome::Plus, Outcome::Minus] {
                    let curve: Vec<(f64, f64)> = scan_points
                        .iter()
                        .map(|p| (p.angle_offset, p.cell(a, b, i.index(), j.index())))
                        .collect();
                    let fit = fit_sinusoid(&curve)?;
                    writeln!(
                        w,
                        "{},{},{},{},{},{},{},{}",
                        curve_label(a, b, i, j),
                        fit.mean_level,
                        fit.amplitude,
                        fit.phase.to_degrees(),
                        fit.visibility,
                        fit.sigma_visibility,
                        fit.chi2_per_dof,
                        fit.phase_unconstrained
                    )?;
                    if fit.sigma_visibility > 0.0 {
                        let weight = 1.0 / (fit.sigma_visibility * fit.sigma_visibility);
                        pooled_num += weight * fit.visibility;
                        pooled_den += weight;
                    }
                    if DISPLAY_CURVES.contains(&(a, b, i, j)) {
                        display_fits.push((curve_label(a, b, i, j), fit));
                    }
                }
            }
        }
    }
    drop(w);

    // fitted-curve samples for plotting the display curves
    let mut w = output::create(&out.join("scan_curve_samples.csv"))?;
    writeln!(w, "angle_deg,curve,fitted_rate")?;
    for (label, fit) in &display_fits {
        for k in 0..=200 {
            let theta = params.start + params.range * k as f64 / 200.0;
            let rate =
                fit.mean_level * (1.0 - fit.visibility * (2.0 * (theta - fit.phase)).cos());
            writeln!(w, "{:.4},{},{}", theta.to_degrees(), label, rate)?;
        }
    }
    drop(w);

    for (label, fit) in &display_fits {
        println!(
            "{label}: V = {:.4} ± {:.4}   mean {:.1}   χ²/dof {:.2}",
            fit.visibility, fit.sigma_visibility, fit.mean_level, fit.chi2_per_dof
        );
    }
    if pooled_den > 0.0 {
        println!(
            "pooled visibility over all 16 curves: {:.4} (configured {:.4})",
            pooled_num / pooled_den,
            config.state.visibility
        );
    }
    println!("scan tables written to {}", out.display());
    Ok(())
}

pub fn audit(
    args: &ConfigArgs,
    alice: Option<&Path>,
    bob: Option<&Path>,
    window: f64,
) -> Result<()> {
    let config = config::load(args)?;
    let report = belltag_core::audit(&config.geometry, &config.budget)?;
    print_static_audit(&config.geometry, &config.budget, &report);

    if let (Some(alice), Some(bob)) = (alice, bob) {
        let a = load_stream(alice)?;
        let b = load_stream(bob)?;
        let est = recover_offset(&a.tags, &b.tags, &config.analysis.recover_params())?;
        let matched = match_coincidences(
            &a.tags,
            &b.tags,
            est.offset_ps.round() as i64,
            time::secs_to_ps(window),
            MatchMode::OneToOne,
        )?;
        let stream = audit_streams(
            &a.tags,
            &b.tags,
            &matched.pairs,
            &config.geometry,
            &config.budget,
            est.offset_ps.round() as i64,
        )?;
        match stream.status {
            belltag_core::StreamAuditStatus::NoData => println!("stream replay: no coincidences"),
            belltag_core::StreamAuditStatus::Ok => {
                println!(
                    "stream replay over {} coincidences: min slack {:.3} µs, {} violations  [{}]",
                    stream.pairs,
                    stream.min_slack * 1e6,
                    stream.violations,
                    if stream.pass { "PASS" } else { "FAIL" }
                );
            }
        }
        if !stream.pass {
            bail!("stream locality audit failed");
        }
    }
    if !report.pass {
        bail!("locality audit failed");
    }
    Ok(())
}

fn print_static_audit(
    geometry: &Geometry,
    budget: &MeasurementBudget,
    report: &belltag_core::LocalityReport,
) {
    println!(
        "separation {:.1} m at signal speed {:.0} m/s",
        geometry.separation, geometry.signal_speed
    );
    println!(
        "light travel time: {:.4} µs   measurement: {:.1} ns (choice {:.0} ns + registration {:.0} ns + skew {:.0} ns)",
        report.light_time * 1e6,
        report.measurement_duration * 1e9,
        budget.choice_to_application * 1e9,
        budget.application_to_registration * 1e9,
        budget.source_sync_skew * 1e9
    );
    println!(
        "slack {:.4} µs   margin ratio {:.3}   [{}]",
        report.slack * 1e6,
        report.margin_ratio,
        if report.pass { "PASS" } else { "FAIL" }
    );
}
