//! Space-like-separation audit: verifies that each station's full
//! measurement process (random choice → setting applied → photon registered)
//! fits inside the light-travel time between the stations, so neither
//! measurement can influence the other.
//!
//! Fiber coiled at the source adds a fixed delay before emission into the
//! links and therefore shifts both registrations equally; it never enters
//! the station-to-station timing argument. The effective source event is the
//! photon's exit from the coil at the source location.

use serde::{Deserialize, Serialize};

use crate::coincidence::MatchedPair;
use crate::error::{Error, Result};
use crate::station::TimeTag;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Station geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geometry {
    /// Distance between the stations, meters.
    pub separation: f64,
    /// Fastest signal speed assumed for a hypothetical influence, m/s.
    pub signal_speed: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            separation: 400.0,
            signal_speed: SPEED_OF_LIGHT,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::InvalidConfig("separation must be > 0".into()));
        }
        if !(self.signal_speed.is_finite() && self.signal_speed > 0.0) {
            return Err(Error::InvalidConfig("signal_speed must be > 0".into()));
        }
        Ok(())
    }

    pub fn light_time(&self) -> f64 {
        self.separation / self.signal_speed
    }
}

/// Time budget of one measurement process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementBudget {
    /// Random choice to setting optically in force (settle delay plus
    /// autocorrelation margin), seconds.
    pub choice_to_application: f64,
    /// Setting in force to photon registration, seconds. Folded into the
    /// choice budget by default.
    pub application_to_registration: f64,
    /// Allowance for the two photons not being registered exactly
    /// simultaneously, seconds.
    pub source_sync_skew: f64,
}

impl Default for MeasurementBudget {
    fn default() -> Self {
        MeasurementBudget {
            choice_to_application: 100e-9,
            application_to_registration: 0.0,
            source_sync_skew: 5e-9,
        }
    }
}

impl MeasurementBudget {
    pub fn validate(&self) -> Result<()> {
        if self.choice_to_application < 0.0
            || self.application_to_registration < 0.0
            || self.source_sync_skew < 0.0
        {
            return Err(Error::InvalidConfig("budget terms must be >= 0".into()));
        }
        Ok(())
    }

    /// Per-station choice-to-registration span.
    pub fn station_span(&self) -> f64 {
        self.choice_to_application + self.application_to_registration
    }

    /// Total budget used by the static audit.
    pub fn total(&self) -> f64 {
        self.station_span() + self.source_sync_skew
    }
}

/// Outcome of the static timing audit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocalityReport {
    pub light_time: f64,
    pub measurement_duration: f64,
    pub slack: f64,
    pub pass: bool,
    pub margin_ratio: f64,
}

/// Static audit: the whole measurement (choice, setting, registration, plus
/// the registration skew allowance) must finish before light could cross
/// between the stations.
pub fn audit(geometry: &Geometry, budget: &MeasurementBudget) -> Result<LocalityReport> {
    geometry.validate()?;
    budget.validate()?;
    let light_time = geometry.light_time();
    let measurement_duration = budget.total();
    let slack = light_time - measurement_duration;
    Ok(LocalityReport {
        light_time,
        measurement_duration,
        slack,
        pass: slack > 0.0,
        margin_ratio: measurement_duration / light_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StreamAuditStatus {
    Ok,
    NoData,
}

/// Worst-case audit over the actually recorded coincidences.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StreamAuditReport {
    pub status: StreamAuditStatus,
    pub pairs: usize,
    /// Smallest slack over all coincidences and both directions, seconds.
    pub min_slack: f64,
    /// Coincidences with non-positive slack in either direction.
    pub violations: usize,
    pub pass: bool,
}

/// Replay matched coincidences on the common (offset-corrected) time axis
/// and check, per event, that each side's choice stays outside the light
/// cone of the other side's registration. `offset_ps` is the recovered
/// Bob − Alice clock offset; the per-event registration skew is measured
/// from the data, so the static skew allowance does not enter here.
pub fn audit_streams(
    a: &[TimeTag],
    b: &[TimeTag],
    pairs: &[MatchedPair],
    geometry: &Geometry,
    budget: &MeasurementBudget,
    offset_ps: i64,
) -> Result<StreamAuditReport> {
    geometry.validate()?;
    budget.validate()?;
    if pairs.is_empty() {
        return Ok(StreamAuditReport {
            status: StreamAuditStatus::NoData,
            pairs: 0,
            min_slack: f64::NAN,
            violations: 0,
            pass: false,
        });
    }
    let light_time = geometry.light_time();
    let span = budget.station_span();
    let mut min_slack = f64::INFINITY;
    let mut violations = 0usize;
    for p in pairs {
        let ta = a[p.a_index].timestamp_ps as f64 * 1e-12;
        let tb = (b[p.b_index].timestamp_ps - offset_ps) as f64 * 1e-12;
        // Alice's choice vs Bob's registration, and vice versa
        let slack_ab = light_time - (tb - (ta - span));
        let slack_ba = light_time - (ta - (tb - span));
        let worst = slack_ab.min(slack_ba);
        if worst <= 0.0 {
            violations += 1;
        }
        min_slack = min_slack.min(worst);
    }
    Ok(StreamAuditReport {
        status: StreamAuditStatus::Ok,
        pairs: pairs.len(),
        min_slack,
        violations,
        pass: violations == 0 && min_slack > 0.0,
    })
}
