//! One observer station: randomly switched analyzer, detection with
//! efficiency, dark counts, per-channel dead time, and time tagging on a
//! drifting, offset local clock.
//!
//! The analyzer setting is a random bit latched once per sampling slot
//! (default 100 ns, i.e. a 10 MHz sampling clock). Because the electronics
//! between the bit generator and the modulator delay the optically applied
//! setting, the setting in force at a photon arrival `t` is the bit of slot
//! `floor((t − settle_delay) / sample_period)`. Events too close to a slot
//! boundary are blanked, mimicking the discriminator gate that discards
//! events during switch transitions.
//!
//! Accepted events are stamped on the local clock: global time mapped
//! through offset + drift, Gaussian per-event jitter added, and the result
//! quantized to the tagger resolution grid (default 75 ps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::LocalResponse;
use crate::quantum::Outcome;
use crate::rng::counter_unit;
use crate::serde_util::angle_pair_deg;
use crate::time::{quantize_ps, secs_to_ps};

/// Local clock parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockModel {
    /// Clock offset from global time, seconds. Realized once per run,
    /// quantized to `sync_quantization`.
    pub offset: f64,
    /// Fractional rate error (s/s).
    pub drift: f64,
    /// Per-event Gaussian tagging jitter, seconds.
    pub jitter_sigma: f64,
    /// Resolution of the once-per-run synchronization, seconds.
    pub sync_quantization: f64,
}

impl Default for ClockModel {
    fn default() -> Self {
        ClockModel {
            offset: 0.0,
            drift: 0.0,
            jitter_sigma: 0.5e-9,
            sync_quantization: 20e-9,
        }
    }
}

impl ClockModel {
    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() {
            return Err(Error::InvalidConfig("clock offset must be finite".into()));
        }
        if !(self.drift.is_finite() && self.drift.abs() < 1e-6) {
            return Err(Error::InvalidConfig(format!(
                "clock drift {} outside |drift| < 1e-6",
                self.drift
            )));
        }
        if !(self.jitter_sigma.is_finite() && self.jitter_sigma >= 0.0) {
            return Err(Error::InvalidConfig("jitter_sigma must be >= 0".into()));
        }
        if !(self.sync_quantization.is_finite() && self.sync_quantization >= 0.0) {
            return Err(Error::InvalidConfig(
                "sync_quantization must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Offset actually in force for a run: the configured offset rounded to
    /// the synchronization resolution.
    pub fn realized_offset_ps(&self) -> i64 {
        let raw = secs_to_ps(self.offset);
        let grid = secs_to_ps(self.sync_quantization);
        if grid > 0 {
            quantize_ps(raw, grid)
        } else {
            raw
        }
    }
}

mod station_defaults {
    pub fn sample_period() -> f64 {
        100e-9
    }
    pub fn rng_bias() -> f64 {
        0.5
    }
    pub fn settle_delay() -> f64 {
        75e-9
    }
    pub fn settle_margin() -> f64 {
        25e-9
    }
    pub fn transition_blank() -> f64 {
        20e-9
    }
    pub fn efficiency() -> f64 {
        0.05
    }
    pub fn dark_rate() -> f64 {
        300.0
    }
    pub fn dead_time() -> f64 {
        1e-6
    }
    pub fn tag_resolution() -> f64 {
        75e-12
    }
}

/// Physical parameters of one observer station. In config files every field
/// except `setting_angles_deg` may be omitted and falls back to the default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationConfig {
    /// Analyzer angles selected by setting bit 0 / 1, stored in radians
    /// (degrees in config files).
    #[serde(rename = "setting_angles_deg", with = "angle_pair_deg")]
    pub setting_angles: [f64; 2],
    /// Setting sampling period, seconds (100 ns = 10 MHz).
    #[serde(default = "station_defaults::sample_period")]
    pub sample_period: f64,
    /// Probability that a slot bit is 1.
    #[serde(default = "station_defaults::rng_bias")]
    pub rng_bias: f64,
    /// Electronics + modulator delay between sampling a bit and the setting
    /// being optically in force, seconds.
    #[serde(default = "station_defaults::settle_delay")]
    pub settle_delay: f64,
    /// Extra autocorrelation allowance; consumed by the locality budget, not
    /// by the pipeline itself.
    #[serde(default = "station_defaults::settle_margin")]
    pub settle_margin: f64,
    /// Total blanked width centered on each slot boundary, seconds.
    #[serde(default = "station_defaults::transition_blank")]
    pub transition_blank: f64,
    /// Photon detection probability.
    #[serde(default = "station_defaults::efficiency")]
    pub efficiency: f64,
    /// Dark counts per second per detector channel.
    #[serde(default = "station_defaults::dark_rate")]
    pub dark_rate: f64,
    /// Non-paralyzable dead time per detector channel, seconds.
    #[serde(default = "station_defaults::dead_time")]
    pub dead_time: f64,
    /// Time-tagger quantization grid, seconds.
    #[serde(default = "station_defaults::tag_resolution")]
    pub tag_resolution: f64,
    #[serde(default)]
    pub clock: ClockModel,
}

impl StationConfig {
    pub fn alice_default() -> Self {
        StationConfig {
            setting_angles: [0.0, 45.0_f64.to_radians()],
            sample_period: 100e-9,
            rng_bias: 0.5,
            settle_delay: 75e-9,
            settle_margin: 25e-9,
            transition_blank: 20e-9,
            efficiency: 0.05,
            dark_rate: 300.0,
            dead_time: 1e-6,
            tag_resolution: 75e-12,
            clock: ClockModel::default(),
        }
    }

    pub fn bob_default() -> Self {
        StationConfig {
            setting_angles: [22.5_f64.to_radians(), 67.5_f64.to_radians()],
            ..Self::alice_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.setting_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig("setting angles must be finite".into()));
        }
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(Error::InvalidConfig("sample_period must be > 0".into()));
        }
        // the physical bit source is kept even to within 2%
        if !(0.48..=0.52).contains(&self.rng_bias) {
            return Err(Error::InvalidConfig(format!(
                "rng_bias {} outside [0.48, 0.52]",
                self.rng_bias
            )));
        }
        if self.settle_delay < 0.0 || self.settle_margin < 0.0 {
            return Err(Error::InvalidConfig("settle times must be >= 0".into()));
        }
        if !(self.transition_blank >= 0.0 && self.transition_blank < self.sample_period) {
            return Err(Error::InvalidConfig(
                "transition_blank must be >= 0 and smaller than the sample period".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidConfig(format!(
                "efficiency {} outside [0, 1]",
                self.efficiency
            )));
        }
        if self.dark_rate < 0.0 {
            return Err(Error::InvalidConfig("dark_rate must be >= 0".into()));
        }
        if self.dead_time < 0.0 {
            return Err(Error::InvalidConfig("dead_time must be >= 0".into()));
        }
        if secs_to_ps(self.tag_resolution) < 1 {
            return Err(Error::InvalidConfig(
                "tag_resolution must be at least 1 ps".into(),
            ));
        }
        self.clock.validate()
    }
}

/// One detection record on a station's local clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeTag {
    /// Local picosecond ticks, quantized to the tag-resolution grid.
    pub timestamp_ps: i64,
    /// Setting bit in force when the photon was analyzed.
    pub setting: u8,
    pub detector: Outcome,
}

/// An event presented to the station pipeline.
#[derive(Debug, Clone, Copy)]
pub enum Arrival {
    /// A source photon together with its model response.
    Signal(LocalResponse),
    /// A detector dark count on the given channel.
    Dark(Outcome),
}

/// Station state machine. Feed arrivals in non-decreasing global time.
#[derive(Debug)]
pub struct Station {
    angles: [f64; 2],
    period_ps: i64,
    bias: f64,
    settle_ps: i64,
    half_blank_ps: i64,
    efficiency: f64,
    dead_ps: i64,
    resolution_ps: i64,
    drift: f64,
    offset_ps: i64,
    jitter: Option<Normal<f64>>,
    slot_seed: u64,
    rng: ChaCha12Rng,
    last_input_ps: Option<i64>,
    last_accept_ps: [Option<i64>; 2],
}

impl Station {
    /// Build a station from its config. `seed` feeds both the slot-bit
    /// counter stream and the detection/jitter draws.
    pub fn new(config: &StationConfig, seed: u64) -> Result<Station> {
        config.validate()?;
        let jitter_ps = config.clock.jitter_sigma * 1e12;
        let jitter = if jitter_ps > 0.0 {
            Some(
                Normal::new(0.0, jitter_ps)
                    .map_err(|e| Error::InvalidConfig(format!("bad jitter: {e}")))?,
            )
        } else {
            None
        };
        Ok(Station {
            angles: config.setting_angles,
            period_ps: secs_to_ps(config.sample_period),
            bias: config.rng_bias,
            settle_ps: secs_to_ps(config.settle_delay),
            half_blank_ps: secs_to_ps(config.transition_blank) / 2,
            efficiency: config.efficiency,
            dead_ps: secs_to_ps(config.dead_time),
            resolution_ps: secs_to_ps(config.tag_resolution),
            drift: config.clock.drift,
            offset_ps: config.clock.realized_offset_ps(),
            jitter,
            slot_seed: crate::rng::derive_seed(seed, 0x5107),
            rng: ChaCha12Rng::seed_from_u64(crate::rng::derive_seed(seed, 0xD07A)),
            last_input_ps: None,
            last_accept_ps: [None; 2],
        })
    }

    /// Offset in force this run (configured offset after sync quantization).
    pub fn realized_offset_ps(&self) -> i64 {
        self.offset_ps
    }

    pub fn resolution_ps(&self) -> i64 {
        self.resolution_ps
    }

    /// The i.i.d. Bernoulli(bias) bit latched for slot `slot`.
    pub fn setting_bit(&self, slot: i64) -> u8 {
        (counter_unit(self.slot_seed, slot) < self.bias) as u8
    }

    /// Setting bit latched at the slot containing global time `t_ps`, plus
    /// the slot index.
    pub fn setting_at(&self, t_ps: i64) -> (u8, i64) {
        let slot = t_ps.div_euclid(self.period_ps);
        (self.setting_bit(slot), slot)
    }

    /// Setting optically in force at arrival time `t_ps`, accounting for the
    /// electronics latency between sampling and application.
    pub fn effective_setting_at(&self, t_ps: i64) -> u8 {
        self.setting_at(t_ps - self.settle_ps).0
    }

    pub fn effective_angle_at(&self, t_ps: i64) -> f64 {
        self.angles[self.effective_setting_at(t_ps) as usize]
    }

    /// Map global time to local clock time (no jitter): t·(1+drift) + offset.
    pub fn clock_map_ps(&self, t_ps: i64) -> i64 {
        let drift_ps = if self.drift == 0.0 {
            0
        } else {
            (t_ps as f64 * self.drift).round() as i64
        };
        t_ps + drift_ps + self.offset_ps
    }

    /// True when `t_ps` falls inside the blanking window around a slot
    /// boundary (boundaries themselves included).
    pub fn is_blanked(&self, t_ps: i64) -> bool {
        if self.half_blank_ps == 0 {
            return false;
        }
        let phase = t_ps.rem_euclid(self.period_ps);
        phase <= self.half_blank_ps || phase >= self.period_ps - self.half_blank_ps
    }

    /// Process one arrival at global time `t_ps`. Returns the emitted tag,
    /// if any. Arrivals must be presented in non-decreasing time.
    pub fn process_arrival(&mut self, t_ps: i64, arrival: Arrival) -> Result<Option<TimeTag>> {
        if let Some(prev) = self.last_input_ps {
            if t_ps < prev {
                return Err(Error::OutOfOrder {
                    t_ps,
                    prev_ps: prev,
                });
            }
        }
        self.last_input_ps = Some(t_ps);

        let channel = match arrival {
            Arrival::Signal(response) => {
                if !response.detected {
                    return Ok(None);
                }
                // one efficiency draw per detected response, in arrival order
                let u: f64 = self.rng.gen();
                if u >= self.efficiency {
                    return Ok(None);
                }
                response.result
            }
            Arrival::Dark(channel) => channel,
        };

        if self.is_blanked(t_ps) {
            return Ok(None);
        }

        let ch = channel.index();
        if let Some(last) = self.last_accept_ps[ch] {
            if t_ps - last < self.dead_ps {
                return Ok(None);
            }
        }
        self.last_accept_ps[ch] = Some(t_ps);

        let setting = self.effective_setting_at(t_ps);
        let mut local = self.clock_map_ps(t_ps);
        if let Some(normal) = &self.jitter {
            local += normal.sample(&mut self.rng).round() as i64;
        }
        Ok(Some(TimeTag {
            timestamp_ps: quantize_ps(local, self.resolution_ps),
            setting,
            detector: channel,
        }))
    }
}

/// Dark-count arrival times for both channels of one station over
/// `[0, duration_ps)`: two independent Poisson streams merged in time order.
pub fn dark_arrivals(
    dark_rate: f64,
    duration_ps: i64,
    rng: &mut ChaCha12Rng,
) -> Vec<(i64, Outcome)> {
    if dark_rate <= 0.0 || duration_ps <= 0 {
        return Vec::new();
    }
    let duration = duration_ps as f64 * 1e-12;
    let exp = rand_distr::Exp::new(dark_rate).expect("positive rate");
    let mut events = Vec::new();
    for channel in [Outcome::Plus, Outcome::Minus] {
        let mut t = 0.0_f64;
        loop {
            t += exp.sample(rng);
            if t >= duration {
                break;
            }
            events.push(((t * 1e12).round() as i64, channel));
        }
    }
    events.sort_unstable_by_key(|&(t, ch)| (t, ch.index()));
    events
}

/// Sort a station's tags into their final stream order.
pub fn sort_tags(tags: &mut [TimeTag]) {
    tags.sort_unstable_by_key(|t| (t.timestamp_ps, t.detector.index(), t.setting));
}
