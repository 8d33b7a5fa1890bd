//! Entangled-pair source: Poissonian emission times and the joint outcome
//! statistics of the two-channel polarization analyzers.
//!
//! The source is modeled after a cw-pumped polarization-entangled pair source
//! prepared in the singlet-like state with internal phase π. For analyzer
//! angles α (Alice) and β (Bob) the coincidence probabilities follow the
//! sinusoidal law with contrast (visibility) V:
//!
//! ```text
//! P(+,+) = P(−,−) = (1 − V·cos 2(β−α)) / 4
//! P(+,−) = P(−,+) = (1 + V·cos 2(β−α)) / 4
//! ```
//!
//! so the correlation is E(α,β) = −V·cos 2(β−α) and each side's marginal is
//! exactly 1/2 regardless of the remote angle. Visibility is isotropic: the
//! reduction is the same for every angle difference.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One output of a two-channel polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn index(self) -> usize {
        match self {
            Outcome::Plus => 0,
            Outcome::Minus => 1,
        }
    }

    pub fn from_index(i: usize) -> Outcome {
        if i == 0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }

    /// Flag encoding used by the tag-stream format: 0 = "+", 1 = "−".
    pub fn flag_bit(self) -> u8 {
        self.index() as u8
    }

    pub fn from_flag_bit(bit: u8) -> Outcome {
        Outcome::from_index(bit as usize)
    }

    /// ±1 value used in correlation estimates.
    pub fn value(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }
}

/// Joint outcome of one analyzed pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointOutcome {
    pub alice: Outcome,
    pub bob: Outcome,
}

/// Parameters of the entangled state as seen by the analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntangledStateParams {
    /// Internal phase of the state in radians. Only π is implemented; the
    /// field is kept so configs state it explicitly.
    pub phase: f64,
    /// Contrast of the perfect correlations, in [0, 1].
    pub visibility: f64,
}

impl Default for EntangledStateParams {
    fn default() -> Self {
        EntangledStateParams {
            phase: PI,
            visibility: 0.97,
        }
    }
}

impl EntangledStateParams {
    pub fn new(phase: f64, visibility: f64) -> Result<Self> {
        let p = EntangledStateParams { phase, visibility };
        p.validate()?;
        Ok(p)
    }

    /// Unit visibility, phase π.
    pub fn ideal() -> Self {
        EntangledStateParams {
            phase: PI,
            visibility: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.phase.is_finite() {
            return Err(Error::InvalidConfig("state phase must be finite".into()));
        }
        if (self.phase - PI).abs() > 1e-9 {
            return Err(Error::UnsupportedPhase(self.phase));
        }
        if !(0.0..=1.0).contains(&self.visibility) || !self.visibility.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "visibility {} outside [0, 1]",
                self.visibility
            )));
        }
        Ok(())
    }
}

/// The four joint-outcome probabilities for one angle pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeProbabilities {
    pub pp: f64,
    pub mm: f64,
    pub pm: f64,
    pub mp: f64,
}

impl OutcomeProbabilities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.pp, self.mm, self.pm, self.mp]
    }

    /// E = P(++) + P(−−) − P(+−) − P(−+).
    pub fn correlation(&self) -> f64 {
        self.pp + self.mm - self.pm - self.mp
    }

    pub fn alice_plus_marginal(&self) -> f64 {
        self.pp + self.pm
    }

    pub fn bob_plus_marginal(&self) -> f64 {
        self.pp + self.mp
    }
}

/// Joint outcome probabilities for analyzer angles `alpha`, `beta` (radians).
pub fn outcome_probabilities(
    alpha: f64,
    beta: f64,
    params: &EntangledStateParams,
) -> Result<OutcomeProbabilities> {
    params.validate()?;
    let c = params.visibility * (2.0 * (beta - alpha)).cos();
    let same = (1.0 - c) / 4.0;
    let diff = (1.0 + c) / 4.0;
    Ok(OutcomeProbabilities {
        pp: same,
        mm: same,
        pm: diff,
        mp: diff,
    })
}

/// Sample one joint outcome from a uniform draw in [0, 1).
///
/// Thresholds are applied in the fixed order (++, −−, +−, −+) so results are
/// reproducible for a given draw.
pub fn sample_joint_outcome(
    alpha: f64,
    beta: f64,
    params: &EntangledStateParams,
    draw: f64,
) -> Result<JointOutcome> {
    let p = outcome_probabilities(alpha, beta, params)?;
    let joint = if draw < p.pp {
        JointOutcome {
            alice: Outcome::Plus,
            bob: Outcome::Plus,
        }
    } else if draw < p.pp + p.mm {
        JointOutcome {
            alice: Outcome::Minus,
            bob: Outcome::Minus,
        }
    } else if draw < p.pp + p.mm + p.pm {
        JointOutcome {
            alice: Outcome::Plus,
            bob: Outcome::Minus,
        }
    } else {
        JointOutcome {
            alice: Outcome::Minus,
            bob: Outcome::Plus,
        }
    };
    Ok(joint)
}

/// Pair-emission settings for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionConfig {
    /// Mean pair rate in pairs per second.
    pub pair_rate: f64,
    /// Run duration in seconds.
    pub duration: f64,
    pub seed: u64,
}

impl EmissionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate.is_finite() && self.pair_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pair_rate {} must be positive",
                self.pair_rate
            )));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "duration {} must be nonnegative",
                self.duration
            )));
        }
        Ok(())
    }
}

/// Homogeneous-Poisson pair emission times in picoseconds, strictly
/// increasing, within [0, duration). Identical seeds give identical lists.
pub fn emit_pairs(config: &EmissionConfig) -> Result<Vec<i64>> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let exp = Exp::new(config.pair_rate)
        .map_err(|e| Error::InvalidConfig(format!("bad emission rate: {e}")))?;
    let expected = (config.pair_rate * config.duration * 1.05) as usize + 16;
    let mut times = Vec::with_capacity(expected);
    let mut t = 0.0_f64;
    let mut prev_ps = -1_i64;
    loop {
        t += exp.sample(&mut rng);
        if t >= config.duration {
            break;
        }
        let mut ps = (t * 1e12).round() as i64;
        // sub-picosecond gaps collapse onto the tick grid; keep strict order
        if ps <= prev_ps {
            ps = prev_ps + 1;
        }
        prev_ps = ps;
        times.push(ps);
    }
    Ok(times)
}
