//! End-to-end runs: pair source feeding both observer stations, tag
//! collection, ground truth for validation, and the analyzer-offset scan.
//!
//! All randomness derives from one master seed through labeled substreams
//! (see the `SALT_*` constants), so a run is reproducible bit-for-bit and
//! the two stations consume statistically independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locality::{Geometry, MeasurementBudget};
use crate::models::{ModelKind, OutcomeModel, PairContext};
use crate::quantum::{emit_pairs, EmissionConfig, EntangledStateParams};
use crate::rng::derive_seed;
use crate::station::{dark_arrivals, sort_tags, Arrival, Station, StationConfig, TimeTag};
use crate::time::secs_to_ps;

/// Substream labels under the master seed.
pub const SALT_EMISSION: u64 = 1;
pub const SALT_PAIR_CONTEXT: u64 = 2;
pub const SALT_ALICE_STATION: u64 = 3;
pub const SALT_BOB_STATION: u64 = 4;
pub const SALT_ALICE_DARK: u64 = 5;
pub const SALT_BOB_DARK: u64 = 6;
/// Scan point `p` runs with master seed `derive_seed(master, SALT_SCAN + p)`.
pub const SALT_SCAN: u64 = 0x5CA0;

/// Offline-analysis parameters carried with the experiment config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    /// Full coincidence-window width, seconds.
    pub window: f64,
    /// Coarse offset-search half-range, seconds.
    pub coarse_range: f64,
    /// Coarse histogram bin, seconds.
    pub coarse_bin: f64,
    /// Refined histogram bin, seconds.
    pub refine_bin: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            window: 6e-9,
            coarse_range: 1e-3,
            coarse_bin: 1e-9,
            refine_bin: 75e-12,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("window", self.window),
            ("coarse_range", self.coarse_range),
            ("coarse_bin", self.coarse_bin),
            ("refine_bin", self.refine_bin),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn recover_params(&self) -> crate::coincidence::RecoverParams {
        crate::coincidence::RecoverParams {
            coarse_range: self.coarse_range,
            coarse_bin: self.coarse_bin,
            refine_bin: self.refine_bin,
            ..crate::coincidence::RecoverParams::default()
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub model: ModelKind,
    pub state: EntangledStateParams,
    /// Mean pair emission rate, pairs/s. The default is a derived value:
    /// it is tuned so that, at 5% detection efficiency with the default
    /// blanking and dead time, each detector sees ≈14.5k counts/s and a
    /// 10 s run accumulates ≈14 000 coincidences.
    pub pair_rate: f64,
    /// Run duration, seconds.
    pub duration: f64,
    pub alice: StationConfig,
    pub bob: StationConfig,
    pub geometry: Geometry,
    pub budget: MeasurementBudget,
    pub analysis: AnalysisParams,
}

pub const DEFAULT_PAIR_RATE: f64 = 730_000.0;
pub const DEFAULT_MASTER_SEED: u64 = 0xB811_7A65;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut bob = StationConfig::bob_default();
        // nonzero default offset so the offline recovery has real work to do
        bob.clock.offset = 87.654_321e-6;
        ExperimentConfig {
            master_seed: DEFAULT_MASTER_SEED,
            model: ModelKind::Quantum,
            state: EntangledStateParams::default(),
            pair_rate: DEFAULT_PAIR_RATE,
            duration: 10.0,
            alice: StationConfig::alice_default(),
            bob,
            geometry: Geometry::default(),
            budget: MeasurementBudget::default(),
            analysis: AnalysisParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate.is_finite() && self.pair_rate > 0.0) {
            return Err(Error::InvalidConfig("pair_rate must be > 0".into()));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidConfig("duration must be >= 0".into()));
        }
        self.state.validate()?;
        self.alice.validate()?;
        self.bob.validate()?;
        self.geometry.validate()?;
        self.budget.validate()?;
        self.analysis.validate()?;
        Ok(())
    }
}

/// Counts recorded while a run is simulated.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunManifest {
    pub model: ModelKind,
    pub master_seed: u64,
    pub duration: f64,
    pub pair_rate: f64,
    pub pairs_emitted: u64,
    /// Accepted tags per detector channel [+, −].
    pub alice_singles: [u64; 2],
    pub bob_singles: [u64; 2],
}

impl RunManifest {
    pub fn alice_total(&self) -> u64 {
        self.alice_singles[0] + self.alice_singles[1]
    }

    pub fn bob_total(&self) -> u64 {
        self.bob_singles[0] + self.bob_singles[1]
    }
}

/// Simulation internals that the offline analysis must never consume; kept
/// for closed-loop validation only.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GroundTruth {
    pub alice_offset_ps: i64,
    pub bob_offset_ps: i64,
    /// Bob − Alice, the offset the analysis should recover.
    pub relative_offset_ps: i64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub alice_tags: Vec<TimeTag>,
    pub bob_tags: Vec<TimeTag>,
    pub manifest: RunManifest,
    pub truth: GroundTruth,
}

/// Simulate one run: emit pairs, evaluate the outcome model per pair with
/// the settings in force at each station, push everything (signal plus
/// darks) through both station pipelines, and return the sorted tag streams.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let master = config.master_seed;
    let model = OutcomeModel::new(config.model, config.state);

    let pair_times = emit_pairs(&EmissionConfig {
        pair_rate: config.pair_rate,
        duration: config.duration,
        seed: derive_seed(master, SALT_EMISSION),
    })?;

    let mut alice = Station::new(&config.alice, derive_seed(master, SALT_ALICE_STATION))?;
    let mut bob = Station::new(&config.bob, derive_seed(master, SALT_BOB_STATION))?;

    let duration_ps = secs_to_ps(config.duration);
    let dark_a = dark_arrivals(
        config.alice.dark_rate,
        duration_ps,
        &mut ChaCha12Rng::seed_from_u64(derive_seed(master, SALT_ALICE_DARK)),
    );
    let dark_b = dark_arrivals(
        config.bob.dark_rate,
        duration_ps,
        &mut ChaCha12Rng::seed_from_u64(derive_seed(master, SALT_BOB_DARK)),
    );

    let mut ctx_rng = ChaCha12Rng::seed_from_u64(derive_seed(master, SALT_PAIR_CONTEXT));
    let expected = pair_times.len() / 15 + dark_a.len() + 64;
    let mut alice_tags: Vec<TimeTag> = Vec::with_capacity(expected);
    let mut bob_tags: Vec<TimeTag> = Vec::with_capacity(expected);

    // merge darks with the pair stream in arrival order (darks first on ties)
    let mut da = 0usize;
    let mut db = 0usize;
    for &t in &pair_times {
        while da < dark_a.len() && dark_a[da].0 <= t {
            if let Some(tag) = alice.process_arrival(dark_a[da].0, Arrival::Dark(dark_a[da].1))? {
                alice_tags.push(tag);
            }
            da += 1;
        }
        while db < dark_b.len() && dark_b[db].0 <= t {
            if let Some(tag) = bob.process_arrival(dark_b[db].0, Arrival::Dark(dark_b[db].1))? {
                bob_tags.push(tag);
            }
            db += 1;
        }
        let ctx = PairContext::sample(&mut ctx_rng);
        let alpha = alice.effective_angle_at(t);
        let beta = bob.effective_angle_at(t);
        let (resp_a, resp_b) = model.respond_pair(alpha, beta, &ctx)?;
        if let Some(tag) = alice.process_arrival(t, Arrival::Signal(resp_a))? {
            alice_tags.push(tag);
        }
        if let Some(tag) = bob.process_arrival(t, Arrival::Signal(resp_b))? {
            bob_tags.push(tag);
        }
    }
    for &(t, ch) in &dark_a[da..] {
        if let Some(tag) = alice.process_arrival(t, Arrival::Dark(ch))? {
            alice_tags.push(tag);
        }
    }
    for &(t, ch) in &dark_b[db..] {
        if let Some(tag) = bob.process_arrival(t, Arrival::Dark(ch))? {
            bob_tags.push(tag);
        }
    }

    sort_tags(&mut alice_tags);
    sort_tags(&mut bob_tags);

    let mut alice_singles = [0u64; 2];
    for tag in &alice_tags {
        alice_singles[tag.detector.index()] += 1;
    }
    let mut bob_singles = [0u64; 2];
    for tag in &bob_tags {
        bob_singles[tag.detector.index()] += 1;
    }

    let truth = GroundTruth {
        alice_offset_ps: alice.realized_offset_ps(),
        bob_offset_ps: bob.realized_offset_ps(),
        relative_offset_ps: bob.realized_offset_ps() - alice.realized_offset_ps(),
    };

    Ok(RunOutput {
        alice_tags,
        bob_tags,
        manifest: RunManifest {
            model: config.model,
            master_seed: master,
            duration: config.duration,
            pair_rate: config.pair_rate,
            pairs_emitted: pair_times.len() as u64,
            alice_singles,
            bob_singles,
        },
        truth,
    })
}

/// Scan settings: Alice's analyzer offset swept over an angle range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    /// First offset angle, radians.
    pub start: f64,
    /// Swept range, radians (π/2 covers one full period of the rates).
    pub range: f64,
    pub points: u32,
    /// Seconds per point.
    pub dwell: f64,
    /// Compute expected rates instead of sampling: no shot noise, darks or
    /// dead time. Validation aid.
    pub noiseless: bool,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            start: 0.0,
            range: std::f64::consts::FRAC_PI_2,
            points: 41,
            dwell: 5.0,
            noiseless: false,
        }
    }
}

/// Per-point scan result; `cells[a][b][i][j]` are coincidence counts (or
/// expected counts in noiseless mode).
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    /// Alice's analyzer offset, radians.
    pub angle_offset: f64,
    pub cells: [[[[f64; 2]; 2]; 2]; 2],
    pub total: f64,
    pub alice_singles: [f64; 2],
    pub bob_singles: [f64; 2],
}

impl ScanPoint {
    pub fn cell(&self, a: u8, b: u8, i: usize, j: usize) -> f64 {
        self.cells[a as usize][b as usize][i][j]
    }
}

/// Run the analyzer scan. Points are independent sub-runs with derived
/// seeds and execute in parallel; output order and content are
/// deterministic for a given config.
pub fn run_scan(config: &ExperimentConfig, scan: &ScanParams) -> Result<Vec<ScanPoint>> {
    config.validate()?;
    if scan.points < 2 {
        return Err(Error::InvalidConfig("scan needs at least 2 points".into()));
    }
    if !(scan.dwell.is_finite() && scan.dwell > 0.0) {
        return Err(Error::InvalidConfig("scan dwell must be > 0".into()));
    }
    let step = scan.range / (scan.points - 1) as f64;
    let offsets: Vec<f64> = (0..scan.points)
        .map(|p| scan.start + p as f64 * step)
        .collect();

    if scan.noiseless {
        return offsets.iter().map(|&d| noiseless_point(config, d, scan.dwell)).collect();
    }

    offsets
        .par_iter()
        .enumerate()
        .map(|(p, &delta)| {
            let mut sub = config.clone();
            sub.duration = scan.dwell;
            sub.master_seed = derive_seed(config.master_seed, SALT_SCAN + p as u64);
            sub.alice.setting_angles[0] += delta;
            sub.alice.setting_angles[1] += delta;
            let run = run_experiment(&sub)?;
            let est = crate::coincidence::recover_offset(
                &run.alice_tags,
                &run.bob_tags,
                &config.analysis.recover_params(),
            )?;
            let matched = crate::coincidence::match_coincidences(
                &run.alice_tags,
                &run.bob_tags,
                est.offset_ps.round() as i64,
                secs_to_ps(config.analysis.window),
                crate::coincidence::MatchMode::OneToOne,
            )?;
            let mut cells = [[[[0.0f64; 2]; 2]; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            cells[a][b][i][j] = matched.table.counts[a][b][i][j] as f64;
                        }
                    }
                }
            }
            Ok(ScanPoint {
                angle_offset: delta,
                cells,
                total: matched.table.grand_total() as f64,
                alice_singles: run.manifest.alice_singles.map(|x| x as f64),
                bob_singles: run.manifest.bob_singles.map(|x| x as f64),
            })
        })
        .collect()
}

/// Expected (ensemble-mean) rates for one scan point: pair rate thinned by
/// efficiency and blanking, split over settings and outcomes by the model
/// probabilities. Idealized: no darks, no dead time, no accidentals.
fn noiseless_point(config: &ExperimentConfig, delta: f64, dwell: f64) -> Result<ScanPoint> {
    if config.model != ModelKind::Quantum {
        return Err(Error::InvalidConfig(
            "noiseless scan is defined for the quantum model".into(),
        ));
    }
    let blank_keep = 1.0 - config.alice.transition_blank / config.alice.sample_period;
    let pairs = config.pair_rate * dwell;
    let coincident = pairs * config.alice.efficiency * config.bob.efficiency * blank_keep;
    let p_a = [1.0 - config.alice.rng_bias, config.alice.rng_bias];
    let p_b = [1.0 - config.bob.rng_bias, config.bob.rng_bias];
    let mut cells = [[[[0.0f64; 2]; 2]; 2]; 2];
    let mut total = 0.0;
    for a in 0..2usize {
        for b in 0..2usize {
            let alpha = config.alice.setting_angles[a] + delta;
            let beta = config.bob.setting_angles[b];
            let p = crate::quantum::outcome_probabilities(alpha, beta, &config.state)?;
            let n_ab = coincident * p_a[a] * p_b[b];
            let m = [[p.pp, p.pm], [p.mp, p.mm]];
            for i in 0..2 {
                for j in 0..2 {
                    cells[a][b][i][j] = n_ab * m[i][j];
                    total += cells[a][b][i][j];
                }
            }
        }
    }
    let singles_a = pairs * config.alice.efficiency * blank_keep / 2.0;
    let singles_b = pairs * config.bob.efficiency * blank_keep / 2.0;
    Ok(ScanPoint {
        angle_offset: delta,
        cells,
        total,
        alice_singles: [singles_a, singles_a],
        bob_singles: [singles_b, singles_b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_config() -> ExperimentConfig {
        ExperimentConfig {
            duration: 0.25,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = short_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.alice_tags, b.alice_tags);
        assert_eq!(a.bob_tags, b.bob_tags);
        assert_eq!(a.manifest.pairs_emitted, b.manifest.pairs_emitted);
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = short_config();
        let mut cfg2 = cfg.clone();
        cfg2.master_seed ^= 1;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg2).unwrap();
        assert_ne!(a.alice_tags, b.alice_tags);
    }

    #[test]
    fn zero_duration_runs_produce_empty_streams() {
        let mut cfg = ExperimentConfig::default();
        cfg.duration = 0.0;
        let run = run_experiment(&cfg).unwrap();
        assert!(run.alice_tags.is_empty());
        assert!(run.bob_tags.is_empty());
        assert_eq!(run.manifest.pairs_emitted, 0);
    }

    #[test]
    fn tag_streams_are_sorted_and_on_grid() {
        let run = run_experiment(&short_config()).unwrap();
        for tags in [&run.alice_tags, &run.bob_tags] {
            assert!(tags.windows(2).all(|w| w[0].timestamp_ps <= w[1].timestamp_ps));
            assert!(tags.iter().all(|t| t.timestamp_ps % 75 == 0));
            assert!(tags.iter().all(|t| t.timestamp_ps >= 0));
        }
    }

    #[test]
    fn dead_time_holds_per_channel_in_full_runs() {
        // with jitter off, local gaps equal arrival gaps exactly
        let mut cfg = short_config();
        cfg.alice.clock.jitter_sigma = 0.0;
        let run = run_experiment(&cfg).unwrap();
        let dead = secs_to_ps(cfg.alice.dead_time);
        for ch in 0..2 {
            let mut prev: Option<i64> = None;
            for t in run
                .alice_tags
                .iter()
                .filter(|t| t.detector.index() == ch)
                .map(|t| t.timestamp_ps)
            {
                if let Some(p) = prev {
                    assert!(t - p >= dead, "channel {ch}: gap {} < dead time", t - p);
                }
                prev = Some(t);
            }
        }
    }

    #[test]
    fn ground_truth_reports_quantized_offsets() {
        let cfg = short_config();
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.truth.alice_offset_ps, 0);
        assert_eq!(run.truth.bob_offset_ps, 87_660_000);
        assert_eq!(run.truth.relative_offset_ps, 87_660_000);
    }

    #[test]
    fn noiseless_scan_follows_the_sinusoid_exactly() {
        let mut cfg = ExperimentConfig::default();
        cfg.state.visibility = 1.0;
        let scan = ScanParams {
            points: 11,
            dwell: 1.0,
            noiseless: true,
            ..ScanParams::default()
        };
        let points = run_scan(&cfg, &scan).unwrap();
        assert_eq!(points.len(), 11);
        // the A+0/B+0 curve follows sin²(β − α − δ) scaled by the pair budget
        for pt in &points {
            let alpha = cfg.alice.setting_angles[0] + pt.angle_offset;
            let beta = cfg.bob.setting_angles[0];
            let expected_shape = (1.0 - (2.0 * (beta - alpha)).cos()) / 4.0;
            let n_ab = pt.cell(0, 0, 0, 0) + pt.cell(0, 0, 0, 1) + pt.cell(0, 0, 1, 0)
                + pt.cell(0, 0, 1, 1);
            if n_ab > 0.0 {
                assert!((pt.cell(0, 0, 0, 0) / n_ab - expected_shape).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scan_rejects_silly_parameters() {
        let cfg = ExperimentConfig::default();
        assert!(run_scan(
            &cfg,
            &ScanParams {
                points: 1,
                ..ScanParams::default()
            }
        )
        .is_err());
        assert!(run_scan(
            &cfg,
            &ScanParams {
                dwell: 0.0,
                ..ScanParams::default()
            }
        )
        .is_err());
    }
}
