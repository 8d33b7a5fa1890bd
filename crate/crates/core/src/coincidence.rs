//! Offline reconciliation of two independent tag streams: recover the
//! unknown inter-clock offset from the time-difference histogram, then match
//! coincidences within a window and accumulate the 16-entry setting/detector
//! table.
//!
//! Differences are defined as `t_bob − t_alice`, so the recovered offset is
//! Bob's clock minus Alice's. Clock drift is not tracked within a run; for
//! runs where `drift · duration` exceeds a quarter of the coincidence window
//! the streams must be analyzed in chunks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::Outcome;
use crate::station::TimeTag;
use crate::time::quantize_ps;

/// Histogram of pairwise time differences `t_b − t_a`.
#[derive(Debug, Clone)]
pub struct DiffHistogram {
    /// Bin width in ps. Bins are centered on multiples of the width.
    pub bin_ps: i64,
    /// Index of the bin centered at difference 0.
    zero_bin: i64,
    pub counts: Vec<u64>,
}

impl DiffHistogram {
    fn new(range_ps: i64, bin_ps: i64) -> Result<DiffHistogram> {
        if bin_ps <= 0 || range_ps <= 0 || range_ps < bin_ps {
            return Err(Error::InvalidConfig(
                "histogram needs range >= bin > 0".into(),
            ));
        }
        let half_bins = range_ps / bin_ps;
        let n = (2 * half_bins + 1) as usize;
        if n > (1 << 27) {
            return Err(Error::InvalidConfig(format!(
                "difference histogram would need {n} bins; widen the bin or narrow the range"
            )));
        }
        Ok(DiffHistogram {
            bin_ps,
            zero_bin: half_bins,
            counts: vec![0; n],
        })
    }

    fn bin_of(&self, d_ps: i64) -> Option<usize> {
        let idx = quantize_ps(d_ps, self.bin_ps) / self.bin_ps + self.zero_bin;
        if idx < 0 || idx as usize >= self.counts.len() {
            None
        } else {
            Some(idx as usize)
        }
    }

    /// Center of bin `i` in ps.
    pub fn bin_center_ps(&self, i: usize) -> i64 {
        (i as i64 - self.zero_bin) * self.bin_ps
    }

    /// Highest bin (ties resolved to the smallest index).
    pub fn peak(&self) -> (usize, u64) {
        let mut best = (0usize, 0u64);
        for (i, &c) in self.counts.iter().enumerate() {
            if c > best.1 {
                best = (i, c);
            }
        }
        best
    }

    /// Mean count per bin excluding bins within `exclude_ps` of `center_ps`.
    pub fn background_mean(&self, center_ps: i64, exclude_ps: i64) -> f64 {
        let mut sum = 0u64;
        let mut n = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            if (self.bin_center_ps(i) - center_ps).abs() > exclude_ps {
                sum += c;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum as f64 / n as f64
        }
    }
}

/// Accumulate the histogram of differences `t_b − t_a` over all tag pairs
/// with |difference| ≤ `range_ps`. Linear two-pointer sweep over the sorted
/// streams.
pub fn offset_histogram(
    a: &[TimeTag],
    b: &[TimeTag],
    range_ps: i64,
    bin_ps: i64,
) -> Result<DiffHistogram> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyStream);
    }
    check_sorted(a)?;
    check_sorted(b)?;
    let mut hist = DiffHistogram::new(range_ps, bin_ps)?;
    let mut lo = 0usize;
    for ta in a.iter().map(|t| t.timestamp_ps) {
        while lo < b.len() && b[lo].timestamp_ps < ta - range_ps {
            lo += 1;
        }
        for tb in &b[lo..] {
            let d = tb.timestamp_ps - ta;
            if d > range_ps {
                break;
            }
            if let Some(idx) = hist.bin_of(d) {
                hist.counts[idx] += 1;
            }
        }
    }
    Ok(hist)
}

fn check_sorted(tags: &[TimeTag]) -> Result<()> {
    for (i, w) in tags.windows(2).enumerate() {
        if w[1].timestamp_ps < w[0].timestamp_ps {
            return Err(Error::UnsortedStream { index: i + 1 });
        }
    }
    Ok(())
}

/// Result of the two-pass offset recovery.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OffsetEstimate {
    /// Recovered clock offset (Bob − Alice), ps.
    pub offset_ps: f64,
    /// Highest refined-histogram bin.
    pub peak_height: u64,
    /// Estimated background per refined bin.
    pub background_mean: f64,
    /// peak_height / background_mean (infinite for a clean background).
    pub snr: f64,
    /// Full width at half maximum of the refined peak, ps.
    pub fwhm_ps: f64,
}

/// Parameters of `recover_offset`.
#[derive(Debug, Clone, Copy)]
pub struct RecoverParams {
    /// Coarse search half-range, seconds.
    pub coarse_range: f64,
    /// Coarse bin width, seconds.
    pub coarse_bin: f64,
    /// Refined bin width, seconds.
    pub refine_bin: f64,
    /// Refined half-window around the coarse peak, seconds.
    pub refine_span: f64,
    /// Peak must exceed `peak_ratio ×` background to count.
    pub peak_ratio: f64,
    /// ... and must hold at least this many counts (guards sparse
    /// histograms where a single accidental would pass the ratio test).
    pub min_peak_counts: u64,
}

impl Default for RecoverParams {
    fn default() -> Self {
        RecoverParams {
            coarse_range: 1e-3,
            coarse_bin: 1e-9,
            refine_bin: 75e-12,
            refine_span: 10e-9,
            peak_ratio: 5.0,
            min_peak_counts: 10,
        }
    }
}

/// Two-pass offset recovery: coarse histogram peak over ±coarse_range, then
/// background-subtracted centroid of a refined histogram within
/// ±refine_span of the coarse peak. Reports SNR and the FWHM of the refined
/// peak (linear interpolation at half maximum).
pub fn recover_offset(a: &[TimeTag], b: &[TimeTag], params: &RecoverParams) -> Result<OffsetEstimate> {
    let coarse_range = crate::time::secs_to_ps(params.coarse_range);
    let coarse_bin = crate::time::secs_to_ps(params.coarse_bin);
    let refine_bin = crate::time::secs_to_ps(params.refine_bin);
    let refine_span = crate::time::secs_to_ps(params.refine_span);

    let coarse = offset_histogram(a, b, coarse_range, coarse_bin)?;
    let (peak_idx, peak_count) = coarse.peak();
    let coarse_center = coarse.bin_center_ps(peak_idx);
    let background = coarse.background_mean(coarse_center, refine_span + coarse_bin);
    if (peak_count as f64) < params.peak_ratio * background
        || peak_count < params.min_peak_counts
    {
        return Err(Error::NoPeak {
            peak: peak_count,
            background,
        });
    }

    // refined pass over a narrow window centered on the coarse peak
    let mut refined = DiffHistogram::new(refine_span + refine_bin, refine_bin)?;
    {
        let mut lo = 0usize;
        for ta in a.iter().map(|t| t.timestamp_ps) {
            let lo_bound = ta + coarse_center - refine_span;
            while lo < b.len() && b[lo].timestamp_ps < lo_bound {
                lo += 1;
            }
            for tb in &b[lo..] {
                let d = tb.timestamp_ps - ta - coarse_center;
                if d > refine_span {
                    break;
                }
                if let Some(idx) = refined.bin_of(d) {
                    refined.counts[idx] += 1;
                }
            }
        }
    }

    let bin_scale = refine_bin as f64 / coarse_bin as f64;
    let refined_background = background * bin_scale;
    let (r_peak_idx, r_peak) = refined.peak();
    if r_peak == 0 {
        return Err(Error::NoPeak {
            peak: 0,
            background: refined_background,
        });
    }

    // background-subtracted centroid
    let mut weight = 0.0;
    let mut moment = 0.0;
    for (i, &c) in refined.counts.iter().enumerate() {
        let excess = c as f64 - refined_background;
        if excess > 0.0 {
            weight += excess;
            moment += excess * refined.bin_center_ps(i) as f64;
        }
    }
    let offset_ps = coarse_center as f64 + moment / weight;

    let fwhm_ps = fwhm(&refined, r_peak_idx, refined_background);
    let snr = if refined_background > 0.0 {
        r_peak as f64 / refined_background
    } else {
        f64::INFINITY
    };

    Ok(OffsetEstimate {
        offset_ps,
        peak_height: r_peak,
        background_mean: refined_background,
        snr,
        fwhm_ps,
    })
}

/// FWHM above background via linear interpolation at the half-maximum
/// crossings nearest to the peak. A single-bin peak reports one bin width.
fn fwhm(hist: &DiffHistogram, peak_idx: usize, background: f64) -> f64 {
    let peak = hist.counts[peak_idx] as f64;
    let half = background + (peak - background) / 2.0;
    let bin = hist.bin_ps as f64;
    let level = |i: usize| hist.counts[i] as f64;

    let mut left = peak_idx as f64 - 0.5;
    for i in (0..peak_idx).rev() {
        if level(i) < half {
            let rise = level(i + 1) - level(i);
            let frac = if rise > 0.0 { (half - level(i)) / rise } else { 0.5 };
            left = i as f64 + frac;
            break;
        }
        if i == 0 {
            left = -0.5;
        }
    }
    let mut right = peak_idx as f64 + 0.5;
    for i in peak_idx + 1..hist.counts.len() {
        if level(i) < half {
            let fall = level(i - 1) - level(i);
            let frac = if fall > 0.0 { (level(i - 1) - half) / fall } else { 0.5 };
            right = (i - 1) as f64 + frac;
            break;
        }
        if i == hist.counts.len() - 1 {
            right = hist.counts.len() as f64 - 0.5;
        }
    }
    ((right - left) * bin).max(bin * f64::EPSILON)
}

/// The 16 coincidence counts indexed by `[alice_setting][bob_setting]
/// [alice_detector][bob_detector]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CoincidenceTable {
    pub counts: [[[[u64; 2]; 2]; 2]; 2],
}

impl CoincidenceTable {
    pub fn new() -> CoincidenceTable {
        CoincidenceTable::default()
    }

    pub fn add(&mut self, a_setting: u8, b_setting: u8, a_det: Outcome, b_det: Outcome) {
        self.counts[a_setting as usize & 1][b_setting as usize & 1][a_det.index()]
            [b_det.index()] += 1;
    }

    pub fn cell(&self, a_setting: u8, b_setting: u8, a_det: Outcome, b_det: Outcome) -> u64 {
        self.counts[a_setting as usize & 1][b_setting as usize & 1][a_det.index()][b_det.index()]
    }

    /// N(a, b): all coincidences for one setting pair.
    pub fn setting_total(&self, a_setting: u8, b_setting: u8) -> u64 {
        let c = &self.counts[a_setting as usize & 1][b_setting as usize & 1];
        c[0][0] + c[0][1] + c[1][0] + c[1][1]
    }

    pub fn grand_total(&self) -> u64 {
        (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| self.setting_total(a, b))
            .sum()
    }

    /// Cell counts for one setting pair as [++, +−, −+, −−].
    pub fn cells(&self, a_setting: u8, b_setting: u8) -> [u64; 4] {
        let c = &self.counts[a_setting as usize & 1][b_setting as usize & 1];
        [c[0][0], c[0][1], c[1][0], c[1][1]]
    }
}

/// One matched coincidence; `delta_ps` is the offset-corrected residual
/// `(t_b − offset) − t_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedPair {
    pub a_index: usize,
    pub b_index: usize,
    pub delta_ps: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Greedy one-to-one pairing, smallest |Δt| first, ties to the earlier
    /// partner. Symmetric under stream swap.
    OneToOne,
    /// Count every in-window pair (sensitivity checks).
    AllPairs,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub table: CoincidenceTable,
    pub pairs: Vec<MatchedPair>,
}

/// Match coincidences between two sorted streams given the clock offset
/// (Bob − Alice, ps). A pair qualifies when
/// `|t_a − (t_b − offset)| ≤ window/2` with a closed window; `window_ps` is
/// the full width.
pub fn match_coincidences(
    a: &[TimeTag],
    b: &[TimeTag],
    offset_ps: i64,
    window_ps: i64,
    mode: MatchMode,
) -> Result<MatchResult> {
    if window_ps <= 0 {
        return Err(Error::InvalidConfig("window must be positive".into()));
    }
    check_sorted(a)?;
    check_sorted(b)?;

    // candidate pairs within the closed window (2|d| ≤ window is exact for
    // odd widths too)
    let mut candidates: Vec<MatchedPair> = Vec::new();
    let mut lo = 0usize;
    for (i, ta) in a.iter().map(|t| t.timestamp_ps).enumerate() {
        while lo < b.len() && 2 * (b[lo].timestamp_ps - offset_ps - ta) < -window_ps {
            lo += 1;
        }
        for (j, tb) in b.iter().enumerate().skip(lo) {
            let d = tb.timestamp_ps - offset_ps - ta;
            if 2 * d > window_ps {
                break;
            }
            candidates.push(MatchedPair {
                a_index: i,
                b_index: j,
                delta_ps: d,
            });
        }
    }

    let mut table = CoincidenceTable::new();
    let accepted = match mode {
        MatchMode::AllPairs => candidates,
        MatchMode::OneToOne => {
            // nearest first; ties go to the earlier partner (stream-swap
            // symmetric keys)
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_unstable_by_key(|&k| {
                let c = &candidates[k];
                let ta = a[c.a_index].timestamp_ps;
                let tb = b[c.b_index].timestamp_ps - offset_ps;
                (c.delta_ps.abs(), ta.min(tb), ta.max(tb), c.a_index, c.b_index)
            });
            let mut a_used = vec![false; a.len()];
            let mut b_used = vec![false; b.len()];
            let mut accepted = Vec::new();
            for k in order {
                let c = candidates[k];
                if !a_used[c.a_index] && !b_used[c.b_index] {
                    a_used[c.a_index] = true;
                    b_used[c.b_index] = true;
                    accepted.push(c);
                }
            }
            accepted.sort_unstable_by_key(|c| (c.a_index, c.b_index));
            accepted
        }
    };

    for c in &accepted {
        let ta = &a[c.a_index];
        let tb = &b[c.b_index];
        table.add(ta.setting, tb.setting, ta.detector, tb.detector);
    }
    Ok(MatchResult {
        table,
        pairs: accepted,
    })
}
