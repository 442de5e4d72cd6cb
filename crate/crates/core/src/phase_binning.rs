//! Seasonal clustering of OTU series by first-harmonic phase.
//!
//! Each OTU's weekly mean profile is projected on the first Fourier harmonic
//! of a 51-week year. The phase `φ ∈ [−π, π]` (sine convention, so that
//! `sin(2πt/51)` has phase 0) picks one of `K` equal-width bins. Counts are
//! then summed per bin, log transformed and divided by the mean of the
//! per-bin standard deviations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::SeriesTable;
use crate::error::{Error, Result};
use crate::stats;

/// Number of observed weeks per year used for the phase extraction.
pub const PHASE_PERIOD: usize = 51;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub otu_id: String,
    /// In `[−π, π]`.
    pub phase: f64,
    pub amplitude: f64,
}

/// Scaled log counts per bin plus the bookkeeping needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries {
    /// `y_tj`, columns `bin_1..bin_K`.
    pub y: SeriesTable,
    /// OTU id → bin index in `1..=K`.
    pub bin_of: BTreeMap<String, usize>,
    /// Raw per-bin sums `w_tj`.
    pub bin_totals: SeriesTable,
    /// Per-bin sample standard deviation of the unscaled log counts.
    pub bin_sds: Vec<f64>,
    pub s_bar: f64,
    /// 1 when some bin total was zero, else 0.
    pub pseudocount: f64,
    pub k: usize,
}

/// Serialisable record of the scaling constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingInfo {
    pub bin_sds: Vec<f64>,
    pub s_bar: f64,
    pub pseudocount: f64,
    pub bin_sizes: Vec<usize>,
}

impl BinnedSeries {
    pub fn scaling_info(&self) -> ScalingInfo {
        let mut sizes = vec![0; self.k];
        for &b in self.bin_of.values() {
            sizes[b - 1] += 1;
        }
        ScalingInfo {
            bin_sds: self.bin_sds.clone(),
            s_bar: self.s_bar,
            pseudocount: self.pseudocount,
            bin_sizes: sizes,
        }
    }
}

/// Rows that carry at least one observation anywhere in the table. Fully
/// masked (gap) rows are skipped when indexing week-of-year.
fn observed_grid(counts: &SeriesTable) -> Vec<usize> {
    (0..counts.nrows())
        .filter(|&t| !counts.row_fully_missing(t))
        .collect()
}

fn profile_on_grid(counts: &SeriesTable, grid: &[usize], c: usize) -> Vec<f64> {
    let mut sums = [0.0; PHASE_PERIOD];
    let mut hits = [0usize; PHASE_PERIOD];
    for (i, &t) in grid.iter().enumerate() {
        if let Some(v) = counts.get(t, c) {
            sums[i % PHASE_PERIOD] += v;
            hits[i % PHASE_PERIOD] += 1;
        }
    }
    let weekly: Vec<Option<f64>> = (0..PHASE_PERIOD)
        .map(|w| (hits[w] > 0).then(|| sums[w] / hits[w] as f64))
        .collect();
    let present: Vec<f64> = weekly.iter().flatten().copied().collect();
    let centre = if present.is_empty() {
        0.0
    } else {
        stats::mean(&present)
    };
    weekly
        .into_iter()
        .map(|m| m.map_or(0.0, |m| m - centre))
        .collect()
}

/// Mean count per week-of-year for one OTU, centred to zero mean.
///
/// Week-of-year is the position within the observed weekly grid modulo 51;
/// weeks without any observation contribute 0 after centring.
pub fn weekly_mean_profile(counts: &SeriesTable, otu: &str) -> Result<Vec<f64>> {
    let c = counts
        .column_index(otu)
        .ok_or_else(|| Error::UnknownId(otu.to_string()))?;
    let grid = observed_grid(counts);
    if grid.len() < PHASE_PERIOD {
        return Err(Error::Domain(format!(
            "need at least {PHASE_PERIOD} observed weeks, found {}",
            grid.len()
        )));
    }
    Ok(profile_on_grid(counts, &grid, c))
}

/// Phase and amplitude of the first harmonic under `p(t) ≈ a·sin(2πt/51 + φ)`,
/// `t = 0..51`.
pub fn first_harmonic(profile: &[f64]) -> Result<(f64, f64)> {
    if profile.len() != PHASE_PERIOD {
        return Err(Error::Dimension(format!(
            "profile has length {}, expected {PHASE_PERIOD}",
            profile.len()
        )));
    }
    let n = PHASE_PERIOD as f64;
    let (mut s, mut c) = (0.0, 0.0);
    for (t, p) in profile.iter().enumerate() {
        let arg = 2.0 * PI * t as f64 / n;
        s += p * arg.sin();
        c += p * arg.cos();
    }
    // a·cos φ and a·sin φ
    let (s, c) = (2.0 * s / n, 2.0 * c / n);
    let amplitude = s.hypot(c);
    let scale = profile.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    if !(amplitude > 1e-12 * scale) {
        return Err(Error::UndefinedPhase);
    }
    Ok((c.atan2(s), amplitude))
}

pub fn first_harmonic_phase(otu_id: &str, profile: &[f64]) -> Result<PhaseProfile> {
    let (phase, amplitude) = first_harmonic(profile)?;
    Ok(PhaseProfile {
        otu_id: otu_id.to_string(),
        phase,
        amplitude,
    })
}

/// Bin `j` (1-based) with `φ ∈ [−π + (j−1)·2π/K, −π + j·2π/K)`; `φ = π` maps to `K`.
pub fn phase_to_bin(phase: f64, k: usize) -> Result<usize> {
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 bins, got {k}")));
    }
    if !(-PI..=PI).contains(&phase) {
        return Err(Error::Domain(format!("phase {phase} outside [-π, π]")));
    }
    let pos = (phase + PI) * k as f64 / (2.0 * PI);
    Ok((pos.floor() as usize + 1).min(k))
}

/// Computes phases for every OTU and assigns bins. OTUs with an undefined
/// phase get phase 0 and amplitude 0, landing in the bin that contains 0.
pub fn assign_bins(
    counts: &SeriesTable,
    k: usize,
) -> Result<(BTreeMap<String, usize>, Vec<PhaseProfile>)> {
    let grid = observed_grid(counts);
    if grid.len() < PHASE_PERIOD {
        return Err(Error::Domain(format!(
            "need at least {PHASE_PERIOD} observed weeks, found {}",
            grid.len()
        )));
    }
    let profiles: Vec<PhaseProfile> = (0..counts.ncols())
        .into_par_iter()
        .map(|c| {
            let id = &counts.columns()[c];
            let profile = profile_on_grid(counts, &grid, c);
            match first_harmonic_phase(id, &profile) {
                Ok(p) => Ok(p),
                Err(Error::UndefinedPhase) => Ok(PhaseProfile {
                    otu_id: id.clone(),
                    phase: 0.0,
                    amplitude: 0.0,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut bin_of = BTreeMap::new();
    for p in &profiles {
        bin_of.insert(p.otu_id.clone(), phase_to_bin(p.phase, k)?);
    }
    Ok((bin_of, profiles))
}

/// Sums counts per bin, logs and scales them.
///
/// A bin total is masked at `t` when any member OTU is masked there.
pub fn aggregate_and_scale(
    counts: &SeriesTable,
    bin_of: &BTreeMap<String, usize>,
    k: usize,
) -> Result<BinnedSeries> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, id) in counts.columns().iter().enumerate() {
        let bin = *bin_of.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        if bin == 0 || bin > k {
            return Err(Error::Domain(format!("OTU `{id}` assigned to bin {bin} of {k}")));
        }
        members[bin - 1].push(c);
    }
    if let Some(id) = bin_of.keys().find(|id| counts.column_index(id).is_none()) {
        return Err(Error::UnknownId(id.clone()));
    }

    let n = counts.nrows();
    let mut totals = DMatrix::from_element(n, k, f64::NAN);
    let mut masked = DMatrix::from_element(n, k, true);
    for (j, cols) in members.iter().enumerate() {
        if cols.is_empty() {
            return Err(Error::EmptyBin(j + 1));
        }
        for t in 0..n {
            if cols.iter().all(|&c| !counts.is_missing(t, c)) {
                totals[(t, j)] = cols.iter().map(|&c| counts.values()[(t, c)]).sum();
                masked[(t, j)] = false;
            }
        }
        if (0..n).all(|t| masked[(t, j)]) {
            return Err(Error::EmptyBin(j + 1));
        }
    }

    let any_zero = (0..n).any(|t| (0..k).any(|j| !masked[(t, j)] && totals[(t, j)] <= 0.0));
    let pseudocount = if any_zero { 1.0 } else { 0.0 };
    let log_totals = totals.map(|w| (w + pseudocount).ln());

    let mut bin_sds = Vec::with_capacity(k);
    for j in 0..k {
        let present: Vec<f64> = (0..n)
            .filter(|&t| !masked[(t, j)])
            .map(|t| log_totals[(t, j)])
            .collect();
        let sd = stats::sample_sd(&present);
        if !sd.is_finite() {
            return Err(Error::Domain(format!(
                "bin {} has fewer than two observed totals",
                j + 1
            )));
        }
        bin_sds.push(sd);
    }
    let s_bar = stats::mean(&bin_sds);
    if !(s_bar > 0.0) {
        return Err(Error::Domain("all bins have constant log counts".into()));
    }

    let names: Vec<String> = (1..=k).map(|j| format!("bin_{j}")).collect();
    let y = SeriesTable::new(
        counts.timestamps().to_vec(),
        names.clone(),
        log_totals.map(|v| v / s_bar),
        masked.clone(),
    )?;
    let bin_totals = SeriesTable::new(counts.timestamps().to_vec(), names, totals, masked)?;
    Ok(BinnedSeries {
        y,
        bin_of: bin_of.clone(),
        bin_totals,
        bin_sds,
        s_bar,
        pseudocount,
        k,
    })
}

/// Full clustering step: phases, bin assignment, aggregation and scaling.
pub fn cluster(counts: &SeriesTable, k: usize) -> Result<(BinnedSeries, Vec<PhaseProfile>)> {
    let (bin_of, profiles) = assign_bins(counts, k)?;
    Ok((aggregate_and_scale(counts, &bin_of, k)?, profiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};

    fn weekly(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2011, 6, 6).unwrap();
        (0..n as i64).map(|k| start + Duration::days(7 * k)).collect()
    }

    fn table(cols: &[&str], rows: usize, f: impl Fn(usize, usize) -> f64) -> SeriesTable {
        SeriesTable::from_values(
            weekly(rows),
            cols.iter().map(|s| s.to_string()).collect(),
            DMatrix::from_fn(rows, cols.len(), f),
        )
        .unwrap()
    }

    /// Direct DFT projection, written independently of `first_harmonic`.
    fn dft_phase(p: &[f64]) -> f64 {
        let n = p.len() as f64;
        let re: f64 = p
            .iter()
            .enumerate()
            .map(|(t, v)| v * (2.0 * PI * t as f64 / n).cos())
            .sum();
        let im: f64 = p
            .iter()
            .enumerate()
            .map(|(t, v)| -v * (2.0 * PI * t as f64 / n).sin())
            .sum();
        // X_1 = Σ p e^{-iωt}; for a·sin(ωt+φ), X_1 = (n a / 2)·(sin φ − i cos φ)
        // hence φ = atan2(Re, −Im).
        re.atan2(-im)
    }

    fn wrap(x: f64) -> f64 {
        let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
        if y <= -PI {
            y += 2.0 * PI;
        }
        y
    }

    #[test]
    fn single_year_profile_is_centred_values() {
        let vals: Vec<f64> = (0..51).map(|t| ((t * 7) % 13) as f64).collect();
        let t = table(&["otu"], 51, |r, _| vals[r]);
        let p = weekly_mean_profile(&t, "otu").unwrap();
        let m = stats::mean(&vals);
        for w in 0..51 {
            assert!((p[w] - (vals[w] - m)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_otu_profile_is_zero_and_unknown_id_errors() {
        let t = table(&["otu"], 60, |_, _| 5.0);
        assert!(weekly_mean_profile(&t, "otu").unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            weekly_mean_profile(&t, "nope"),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn two_year_profile_matches_hand_means() {
        let cols = ["o1", "o2", "o3", "o4", "o5", "o6"];
        let f = |r: usize, c: usize| ((r * (c + 3) + c * c) % 17) as f64;
        let t = table(&cols, 102, f);
        for (c, id) in cols.iter().enumerate() {
            let p = weekly_mean_profile(&t, id).unwrap();
            let pair: Vec<f64> = (0..51).map(|w| (f(w, c) + f(w + 51, c)) / 2.0).collect();
            let grand = (0..102).map(|r| f(r, c)).sum::<f64>() / 102.0;
            for w in 0..51 {
                assert!((p[w] - (pair[w] - grand)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gap_rows_do_not_advance_week_index() {
        // 52 rows with one fully masked gap row: 51 observed weeks.
        let dates = weekly(52);
        let mut values = DMatrix::from_fn(52, 1, |r, _| r as f64);
        let mut mask = DMatrix::from_element(52, 1, false);
        mask[(20, 0)] = true;
        values[(20, 0)] = f64::NAN;
        let t = SeriesTable::new(dates, vec!["o".into()], values, mask).unwrap();
        let p = weekly_mean_profile(&t, "o").unwrap();
        // week 20 of the observed grid is row 21
        assert!((p[20] - p[19] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn phase_convention_anchors() {
        let w = |t: usize| 2.0 * PI * t as f64 / 51.0;
        let sin: Vec<f64> = (0..51).map(|t| w(t).sin()).collect();
        let cos: Vec<f64> = (0..51).map(|t| w(t).cos()).collect();
        let mix: Vec<f64> = (0..51)
            .map(|t| (w(t) + 1.0).sin() + 0.2 * (2.0 * w(t)).sin())
            .collect();
        let (p0, a0) = first_harmonic(&sin).unwrap();
        assert!(p0.abs() < 1e-12);
        assert!((a0 - 1.0).abs() < 1e-12);
        assert!((first_harmonic(&cos).unwrap().0 - PI / 2.0).abs() < 1e-12);
        assert!((dft_phase(&cos) - PI / 2.0).abs() < 1e-12);
        let p_mix = first_harmonic(&mix).unwrap().0;
        assert!((p_mix - 1.0).abs() < 1e-9);
        assert!((p_mix - dft_phase(&mix)).abs() < 1e-12);
    }

    #[test]
    fn zero_profile_has_undefined_phase() {
        assert!(matches!(
            first_harmonic(&[0.0; 51]),
            Err(Error::UndefinedPhase)
        ));
        assert!(matches!(first_harmonic(&[1.0; 50]), Err(Error::Dimension(_))));
    }

    #[test]
    fn cyclic_shift_moves_phase() {
        let base: Vec<f64> = (0..51)
            .map(|t| (2.0 * PI * t as f64 / 51.0 - 0.4).sin() + 0.3 * ((t * t) % 7) as f64)
            .collect();
        let phi = first_harmonic(&base).unwrap().0;
        for m in [1usize, 5, 17, 50] {
            let shifted: Vec<f64> = (0..51).map(|t| base[(t + m) % 51]).collect();
            let got = first_harmonic(&shifted).unwrap().0;
            let expect = wrap(phi + 2.0 * PI * m as f64 / 51.0);
            assert!(wrap(got - expect).abs() < 1e-10, "m={m}");
            assert!(wrap(got - dft_phase(&shifted)).abs() < 1e-10);
        }
    }

    #[test]
    fn bin_boundaries() {
        assert_eq!(phase_to_bin(-PI, 12).unwrap(), 1);
        assert_eq!(phase_to_bin(-5.0 * PI / 6.0 - 1e-12, 12).unwrap(), 1);
        assert_eq!(phase_to_bin(-5.0 * PI / 6.0 + 1e-12, 12).unwrap(), 2);
        assert_eq!(phase_to_bin(PI, 12).unwrap(), 12);
        assert_eq!(phase_to_bin(0.0, 12).unwrap(), 7);
        assert!(phase_to_bin(3.2, 12).is_err());
        assert!(phase_to_bin(0.0, 1).is_err());
    }

    #[test]
    fn aggregation_sums_members() {
        let t = table(&["a", "b", "c"], 4, |r, c| [[10.0, 30.0, 1.0], [20.0, 40.0, 2.0], [15.0, 5.0, 4.0], [7.0, 1.0, 3.0]][r][c]);
        let bin_of: BTreeMap<String, usize> =
            [("a".to_string(), 1), ("b".to_string(), 1), ("c".to_string(), 2)].into();
        let b = aggregate_and_scale(&t, &bin_of, 2).unwrap();
        assert_eq!(b.bin_totals.get(0, 0), Some(40.0));
        assert_eq!(b.bin_totals.get(1, 0), Some(60.0));
        assert_eq!(b.bin_totals.get(2, 1), Some(4.0));
        assert_eq!(b.pseudocount, 0.0);
    }

    #[test]
    fn empty_bin_is_an_error() {
        let t = table(&["a", "b"], 4, |r, c| (r + c + 1) as f64);
        let bin_of: BTreeMap<String, usize> = [("a".to_string(), 1), ("b".to_string(), 1)].into();
        assert!(matches!(
            aggregate_and_scale(&t, &bin_of, 2),
            Err(Error::EmptyBin(2))
        ));
    }

    #[test]
    fn known_bin_sds_give_unit_scale() {
        // log totals constructed with sample sds exactly 0.5 and 1.5
        let n = 40;
        let raw: Vec<f64> = (0..n).map(|t| ((t * 37) % 11) as f64 + 0.1 * t as f64).collect();
        let m = stats::mean(&raw);
        let s = stats::sample_sd(&raw);
        let u: Vec<f64> = raw.iter().map(|v| (v - m) / s).collect();
        let t = table(&["a", "b"], n, |r, c| {
            if c == 0 {
                (3.0 + 0.5 * u[r]).exp()
            } else {
                (4.0 - 1.5 * u[(r + 7) % n]).exp()
            }
        });
        let bin_of: BTreeMap<String, usize> = [("a".to_string(), 1), ("b".to_string(), 2)].into();
        let b = aggregate_and_scale(&t, &bin_of, 2).unwrap();
        assert!((b.bin_sds[0] - 0.5).abs() < 1e-12);
        assert!((b.bin_sds[1] - 1.5).abs() < 1e-12);
        assert!((b.s_bar - 1.0).abs() < 1e-12);
        for r in 0..n {
            let ytilde = b.bin_totals.get(r, 0).unwrap().ln();
            assert!((b.y.get(r, 0).unwrap() - ytilde).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_totals_trigger_pseudocount() {
        let t = table(&["a", "b"], 5, |r, c| if c == 0 { r as f64 } else { (r + 2) as f64 });
        let bin_of: BTreeMap<String, usize> = [("a".to_string(), 1), ("b".to_string(), 2)].into();
        let b = aggregate_and_scale(&t, &bin_of, 2).unwrap();
        assert_eq!(b.pseudocount, 1.0);
        assert!(b.y.get(0, 0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cluster_assigns_by_phase() {
        // OTU i peaks at a different point in the year; OTU "flat" is constant.
        let w = |t: usize| 2.0 * PI * (t % 51) as f64 / 51.0;
        let shifts = [-2.9, -1.0, 0.3, 2.0];
        let mut cols: Vec<String> = (0..4).map(|i| format!("otu{i}")).collect();
        cols.push("flat".into());
        let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
        let t = table(&col_refs, 102, |r, c| {
            if c == 4 {
                3.0
            } else {
                (50.0 * (1.0 + (w(r) + shifts[c]).sin())).round() + 1.0
            }
        });
        let (binned, profiles) = cluster(&t, 4).unwrap_or_else(|e| panic!("{e}"));
        for (i, s) in shifts.iter().enumerate() {
            assert!((profiles[i].phase - s).abs() < 0.05);
            assert_eq!(binned.bin_of[&format!("otu{i}")], phase_to_bin(*s, 4).unwrap());
        }
        assert_eq!(binned.bin_of["flat"], 3);
        assert_eq!(profiles[4].amplitude, 0.0);
    }
}
