// Scratch probe used while tuning defaults; prints end-to-end run numbers.
use belltag_core::*;
use std::time::Instant;

fn main() {
    let mut cfg = ExperimentConfig::default();
    if let Some(rate) = std::env::args().nth(1) {
        cfg.pair_rate = rate.parse().unwrap();
    }
    if let Some(seed) = std::env::args().nth(2) {
        cfg.master_seed = seed.parse().unwrap();
    }
    let t0 = Instant::now();
    let run = run_experiment(&cfg).unwrap();
    let sim_t = t0.elapsed();
    println!(
        "pairs {}  alice singles {:?} ({:.0}/s/det)  bob singles {:?}",
        run.manifest.pairs_emitted,
        run.manifest.alice_singles,
        run.manifest.alice_total() as f64 / cfg.duration / 2.0,
        run.manifest.bob_singles,
    );
    let t1 = Instant::now();
    let est = recover_offset(&run.alice_tags, &run.bob_tags, &cfg.analysis.recover_params()).unwrap();
    println!(
        "offset {:.1} ps (truth {})  snr {:.0}  fwhm {:.0} ps  peak {}",
        est.offset_ps, run.truth.relative_offset_ps, est.snr, est.fwhm_ps, est.peak_height
    );
    let matched = match_coincidences(
        &run.alice_tags,
        &run.bob_tags,
        est.offset_ps.round() as i64,
        time::secs_to_ps(cfg.analysis.window),
        MatchMode::OneToOne,
    )
    .unwrap();
    println!("coincidences {}", matched.table.grand_total());
    let e = correlations(&matched.table).unwrap();
    for a in 0..2 {
        for b in 0..2 {
            println!("E({a},{b}) = {:+.4} ± {:.4}  N = {}", e[a][b].e, e[a][b].sigma_e, e[a][b].n);
        }
    }
    let (form, best) = chsh_max(&e);
    println!(
        "S = {:.4} ± {:.4}  ({}σ above 2)  form {}",
        best.s,
        best.sigma_s,
        best.n_sigma_violation.round(),
        form.label()
    );
    let ns = no_signaling_check(&matched.table);
    println!("no-signaling max |z| = {:.2}", ns.max_abs_z);
    println!("sim {:.2?}  analysis {:.2?}", sim_t, t1.elapsed());
}
