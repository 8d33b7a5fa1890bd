//! Correlation functions, the CHSH statistic, sinusoidal curve fits and
//! no-signaling checks over a coincidence table.
//!
//! Accidental coincidences are never subtracted; every statistic works on
//! raw counts. Correlation errors use the multinomial propagation
//! `σ_E = sqrt((1 − E²)/N)`, which treats the four cells of one setting pair
//! as one normalized sample.

use serde::Serialize;

use crate::coincidence::CoincidenceTable;
use crate::error::{Error, Result};
use crate::models::Side;

/// Normalized correlation for one setting pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationResult {
    pub e: f64,
    pub sigma_e: f64,
    pub n: u64,
}

/// E(a,b) = (C++ + C−− − C+− − C−+) / N from one setting pair of the table.
pub fn correlation(table: &CoincidenceTable, a_setting: u8, b_setting: u8) -> Result<CorrelationResult> {
    let [pp, pm, mp, mm] = table.cells(a_setting, b_setting);
    correlation_from_cells(pp, pm, mp, mm)
}

/// Same, from raw cell counts [++, +−, −+, −−].
pub fn correlation_from_cells(pp: u64, pm: u64, mp: u64, mm: u64) -> Result<CorrelationResult> {
    let n = pp + pm + mp + mm;
    if n == 0 {
        return Err(Error::UndefinedCorrelation);
    }
    let e = (pp as f64 + mm as f64 - pm as f64 - mp as f64) / n as f64;
    let sigma_e = ((1.0 - e * e).max(0.0) / n as f64).sqrt();
    Ok(CorrelationResult { e, sigma_e, n })
}

/// CHSH statistic with standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChshResult {
    pub s: f64,
    pub sigma_s: f64,
    /// (S − 2) / σ_S.
    pub n_sigma_violation: f64,
}

/// S = |E(α,β) − E(α′,β)| + |E(α,β′) + E(α′,β′)| with the four standard
/// errors combined in quadrature (the absolute values are treated as
/// differentiable away from zero).
pub fn chsh(
    e_ab: &CorrelationResult,
    e_apb: &CorrelationResult,
    e_abp: &CorrelationResult,
    e_apbp: &CorrelationResult,
) -> ChshResult {
    let s = (e_ab.e - e_apb.e).abs() + (e_abp.e + e_apbp.e).abs();
    let sigma_s = (e_ab.sigma_e.powi(2)
        + e_apb.sigma_e.powi(2)
        + e_abp.sigma_e.powi(2)
        + e_apbp.sigma_e.powi(2))
    .sqrt();
    let n_sigma_violation = if sigma_s > 0.0 {
        (s - 2.0) / sigma_s
    } else if s > 2.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    };
    ChshResult {
        s,
        sigma_s,
        n_sigma_violation,
    }
}

/// The four valid placements of the minus-pair term in the CHSH form. Each
/// placement obeys the local bound S ≤ 2; which one shows a quantum
/// violation depends on how settings map onto the α/β labels, so analysis
/// evaluates all four and reports the largest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChshForm {
    /// minus between the two correlations sharing Bob setting 0
    MinusAtBob0,
    /// minus between the two correlations sharing Bob setting 1
    MinusAtBob1,
    /// minus between the two correlations sharing Alice setting 0
    MinusAtAlice0,
    /// minus between the two correlations sharing Alice setting 1
    MinusAtAlice1,
}

impl ChshForm {
    pub const ALL: [ChshForm; 4] = [
        ChshForm::MinusAtBob0,
        ChshForm::MinusAtBob1,
        ChshForm::MinusAtAlice0,
        ChshForm::MinusAtAlice1,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ChshForm::MinusAtBob0 => "minus-at-bob0",
            ChshForm::MinusAtBob1 => "minus-at-bob1",
            ChshForm::MinusAtAlice0 => "minus-at-alice0",
            ChshForm::MinusAtAlice1 => "minus-at-alice1",
        }
    }
}

/// Correlations for all four setting pairs, indexed [alice][bob].
pub fn correlations(table: &CoincidenceTable) -> Result<[[CorrelationResult; 2]; 2]> {
    let e00 = correlation(table, 0, 0)?;
    let e01 = correlation(table, 0, 1)?;
    let e10 = correlation(table, 1, 0)?;
    let e11 = correlation(table, 1, 1)?;
    Ok([[e00, e01], [e10, e11]])
}

/// Evaluate one CHSH form from the [alice][bob] correlation matrix.
pub fn chsh_form(e: &[[CorrelationResult; 2]; 2], form: ChshForm) -> ChshResult {
    match form {
        ChshForm::MinusAtBob0 => chsh(&e[0][0], &e[1][0], &e[0][1], &e[1][1]),
        ChshForm::MinusAtBob1 => chsh(&e[0][1], &e[1][1], &e[0][0], &e[1][0]),
        ChshForm::MinusAtAlice0 => chsh(&e[0][0], &e[0][1], &e[1][0], &e[1][1]),
        ChshForm::MinusAtAlice1 => chsh(&e[1][0], &e[1][1], &e[0][0], &e[0][1]),
    }
}

/// All four CHSH forms in `ChshForm::ALL` order.
pub fn chsh_all_forms(e: &[[CorrelationResult; 2]; 2]) -> [(ChshForm, ChshResult); 4] {
    ChshForm::ALL.map(|f| (f, chsh_form(e, f)))
}

/// The largest of the four forms (first wins ties): the headline S.
pub fn chsh_max(e: &[[CorrelationResult; 2]; 2]) -> (ChshForm, ChshResult) {
    let mut best = (ChshForm::MinusAtBob0, chsh_form(e, ChshForm::MinusAtBob0));
    for f in &ChshForm::ALL[1..] {
        let r = chsh_form(e, *f);
        if r.s > best.1.s {
            best = (*f, r);
        }
    }
    best
}

/// Result of fitting C(θ) = M·(1 − V·cos 2(θ − θ0)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinusoidFit {
    /// M·V.
    pub amplitude: f64,
    pub sigma_amplitude: f64,
    /// M.
    pub mean_level: f64,
    pub sigma_mean: f64,
    /// θ0, radians, in (−π/2, π/2].
    pub phase: f64,
    pub sigma_phase: f64,
    /// amplitude / mean_level.
    pub visibility: f64,
    pub sigma_visibility: f64,
    pub chi2_per_dof: f64,
    /// Set when the amplitude is consistent with zero and the phase carries
    /// no information.
    pub phase_unconstrained: bool,
}

/// Weighted least-squares fit of `C(θ) = M·(1 − V·cos 2(θ − θ0))` to
/// `(angle, count)` points with Poisson weights σ² = max(count, 1).
///
/// The model is linear in (M, M·V·cos 2θ0, M·V·sin 2θ0), so the χ² minimum
/// is found exactly by one 3×3 solve; there are no local minima to escape.
/// Requires at least 6 points spanning at least half a period (π/2).
pub fn fit_sinusoid(points: &[(f64, f64)]) -> Result<SinusoidFit> {
    if points.len() < 6 {
        return Err(Error::FitFailed(format!(
            "need at least 6 points, got {}",
            points.len()
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(theta, count) in points {
        if !theta.is_finite() || !count.is_finite() {
            return Err(Error::FitFailed("non-finite input point".into()));
        }
        lo = lo.min(theta);
        hi = hi.max(theta);
    }
    if hi - lo < std::f64::consts::FRAC_PI_2 - 1e-9 {
        return Err(Error::FitFailed(format!(
            "points span {:.4} rad; need at least half a period (π/2)",
            hi - lo
        )));
    }

    // model: c = m − p·cos 2θ − q·sin 2θ
    let mut norm = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for &(theta, count) in points {
        let w = 1.0 / count.max(1.0);
        let x = [1.0, -(2.0 * theta).cos(), -(2.0 * theta).sin()];
        for r in 0..3 {
            for c in 0..3 {
                norm[r][c] += w * x[r] * x[c];
            }
            rhs[r] += w * x[r] * count;
        }
    }
    let cov = invert3(&norm).ok_or_else(|| {
        Error::FitFailed("singular normal equations (degenerate angle sampling)".into())
    })?;
    let mut sol = [0.0f64; 3];
    for r in 0..3 {
        for c in 0..3 {
            sol[r] += cov[r][c] * rhs[c];
        }
    }
    let (m, p, q) = (sol[0], sol[1], sol[2]);
    if m <= 0.0 {
        return Err(Error::FitFailed(format!("non-positive mean level {m:.3}")));
    }

    let amplitude = p.hypot(q);
    let sigma_mean = cov[0][0].max(0.0).sqrt();
    let (sigma_amplitude, sigma_phase, cov_am) = if amplitude > 0.0 {
        let var_a =
            (p * p * cov[1][1] + q * q * cov[2][2] + 2.0 * p * q * cov[1][2]) / (amplitude * amplitude);
        let var_ph = (q * q * cov[1][1] + p * p * cov[2][2] - 2.0 * p * q * cov[1][2])
            / (4.0 * amplitude.powi(4));
        let cov_am = (p * cov[0][1] + q * cov[0][2]) / amplitude;
        (var_a.max(0.0).sqrt(), var_ph.max(0.0).sqrt(), cov_am)
    } else {
        (cov[1][1].max(cov[2][2]).max(0.0).sqrt(), f64::INFINITY, 0.0)
    };

    let visibility = amplitude / m;
    let var_v = (sigma_amplitude / m).powi(2) + (amplitude * sigma_mean / (m * m)).powi(2)
        - 2.0 * amplitude / m.powi(3) * cov_am;
    let sigma_visibility = var_v.max(0.0).sqrt();

    let phase_unconstrained = amplitude <= 3.0 * sigma_amplitude;
    let phase = if phase_unconstrained && amplitude == 0.0 {
        0.0
    } else {
        0.5 * q.atan2(p)
    };

    let mut chi2 = 0.0;
    for &(theta, count) in points {
        let model = m - p * (2.0 * theta).cos() - q * (2.0 * theta).sin();
        chi2 += (count - model).powi(2) / count.max(1.0);
    }
    let chi2_per_dof = chi2 / (points.len() as f64 - 3.0);

    Ok(SinusoidFit {
        amplitude,
        sigma_amplitude,
        mean_level: m,
        sigma_mean,
        phase,
        sigma_phase,
        visibility,
        sigma_visibility,
        chi2_per_dof,
        phase_unconstrained,
    })
}

/// Inverse of a symmetric 3×3 matrix via the adjugate; None when singular.
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale: f64 = m.iter().flatten().map(|x| x.abs()).sum();
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3).max(f64::MIN_POSITIVE) {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0f64; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = match r {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c1, c2) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1];
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            out[c][r] = sign * minor * inv_det;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MarginalStatus {
    Ok,
    InsufficientData,
}

/// Marginal P(+) for one (side, local setting) compared across the two
/// remote settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MarginalComparison {
    pub side: &'static str,
    pub local_setting: u8,
    /// P(local = +) given remote setting 0 / 1.
    pub p_plus: [f64; 2],
    pub n: [u64; 2],
    pub delta: f64,
    pub z: f64,
    pub status: MarginalStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoSignalingReport {
    pub comparisons: Vec<MarginalComparison>,
    pub max_abs_delta: f64,
    pub max_abs_z: f64,
    /// True when any well-sampled marginal moves with the remote setting by
    /// more than 3σ.
    pub flagged: bool,
}

/// Compare each side's coincidence marginals across the remote setting.
/// Empty setting cells produce `InsufficientData` rows, not errors.
pub fn no_signaling_check(table: &CoincidenceTable) -> NoSignalingReport {
    let mut comparisons = Vec::with_capacity(4);
    for side in [Side::Alice, Side::Bob] {
        for local in 0..2u8 {
            let mut p = [0.0f64; 2];
            let mut n = [0u64; 2];
            let mut k = [0u64; 2];
            for remote in 0..2u8 {
                let (a, b) = match side {
                    Side::Alice => (local, remote),
                    Side::Bob => (remote, local),
                };
                let [pp, pm, mp, mm] = table.cells(a, b);
                n[remote as usize] = pp + pm + mp + mm;
                k[remote as usize] = match side {
                    Side::Alice => pp + pm,
                    Side::Bob => pp + mp,
                };
                p[remote as usize] = if n[remote as usize] > 0 {
                    k[remote as usize] as f64 / n[remote as usize] as f64
                } else {
                    f64::NAN
                };
            }
            let (delta, z, status) = if n[0] == 0 || n[1] == 0 {
                (f64::NAN, f64::NAN, MarginalStatus::InsufficientData)
            } else {
                let delta = p[0] - p[1];
                let pooled = (k[0] + k[1]) as f64 / (n[0] + n[1]) as f64;
                let var = pooled * (1.0 - pooled) * (1.0 / n[0] as f64 + 1.0 / n[1] as f64);
                let z = if var > 0.0 { delta / var.sqrt() } else { 0.0 };
                (delta, z, MarginalStatus::Ok)
            };
            comparisons.push(MarginalComparison {
                side: match side {
                    Side::Alice => "alice",
                    Side::Bob => "bob",
                },
                local_setting: local,
                p_plus: p,
                n,
                delta,
                z,
                status,
            });
        }
    }
    let max_abs_delta = comparisons
        .iter()
        .filter(|c| c.status == MarginalStatus::Ok)
        .map(|c| c.delta.abs())
        .fold(0.0, f64::max);
    let max_abs_z = comparisons
        .iter()
        .filter(|c| c.status == MarginalStatus::Ok)
        .map(|c| c.z.abs())
        .fold(0.0, f64::max);
    NoSignalingReport {
        comparisons,
        max_abs_delta,
        max_abs_z,
        flagged: max_abs_z >= 3.0,
    }
}
