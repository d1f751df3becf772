//! Binning of activity traces into fixed-length count vectors and the
//! chronological train/test split used by the cross-map predictor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ActivityTrace, AnalysisWindow};

/// Fixed-length vector of per-bin event counts for one user.
///
/// `values[a]` counts events with `a*I <= t - t_start < (a+1)*I`. The length
/// is `floor(window / bin_width)`; a trailing partial bin is dropped so all
/// bins are homogeneous, and events falling into that remainder are excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries {
    pub user_id: String,
    pub values: Vec<u32>,
    pub bin_width: i64,
    pub window: AnalysisWindow,
}

impl BinnedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Bin a trace over the window. Bin 0 is aligned to `t_start`.
pub fn bin_trace(
    trace: &ActivityTrace,
    window: &AnalysisWindow,
    bin_width: i64,
) -> Result<BinnedSeries> {
    if bin_width <= 0 {
        return Err(Error::InvalidParameter(format!(
            "bin_width must be positive, got {bin_width}"
        )));
    }
    let n_bins = window.len_secs() / bin_width;
    if n_bins < 1 {
        return Err(Error::InvalidParameter(format!(
            "bin_width {bin_width} exceeds window length {}",
            window.len_secs()
        )));
    }
    let n_bins = n_bins as usize;
    let mut values = vec![0u32; n_bins];
    for &t in &trace.timestamps {
        if !window.contains(t) {
            continue;
        }
        let idx = ((t - window.t_start()) / bin_width) as usize;
        if idx < n_bins {
            values[idx] += 1;
        }
    }
    Ok(BinnedSeries {
        user_id: trace.user_id.clone(),
        values,
        bin_width,
        window: *window,
    })
}

/// Train fraction expressed exactly as a rational `train / (train + test)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainRatio {
    num: u64,
    den: u64,
}

impl TrainRatio {
    /// `num / den` must lie strictly between 0 and 1.
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num >= den {
            return Err(Error::InvalidParameter(format!(
                "train ratio must satisfy 0 < num/den < 1, got {num}/{den}"
            )));
        }
        Ok(TrainRatio { num, den })
    }

    /// The paper's 3:1 train/test split.
    pub fn three_to_one() -> Self {
        TrainRatio { num: 3, den: 4 }
    }

    /// Train prefix length: `floor(len * num / den)`, computed exactly.
    pub fn train_len(&self, len: usize) -> usize {
        ((len as u64).saturating_mul(self.num) / self.den) as usize
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for TrainRatio {
    fn default() -> Self {
        TrainRatio::three_to_one()
    }
}

impl fmt::Display for TrainRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.num, self.den - self.num)
    }
}

impl FromStr for TrainRatio {
    type Err = String;

    /// Accepts `train:test` (e.g. `3:1`), `num/den` (e.g. `3/4`) and plain
    /// decimals (e.g. `0.75`), all parsed exactly.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let invalid = |_| format!("invalid train ratio {s:?}");
        if let Some((a, b)) = s.split_once(':') {
            let train: u64 = a.trim().parse().map_err(invalid)?;
            let test: u64 = b.trim().parse().map_err(invalid)?;
            return TrainRatio::new(train, train + test).map_err(|e| e.to_string());
        }
        if let Some((a, b)) = s.split_once('/') {
            let num: u64 = a.trim().parse().map_err(invalid)?;
            let den: u64 = b.trim().parse().map_err(invalid)?;
            return TrainRatio::new(num, den).map_err(|e| e.to_string());
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            let int_part = if int_part.is_empty() { "0" } else { int_part };
            let int: u64 = int_part.trim().parse().map_err(invalid)?;
            if frac_part.is_empty() || frac_part.len() > 9 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("invalid train ratio {s:?}"));
            }
            let frac: u64 = frac_part.parse().map_err(invalid)?;
            let den = 10u64.pow(frac_part.len() as u32);
            return TrainRatio::new(int * den + frac, den).map_err(|e| e.to_string());
        }
        Err(format!("invalid train ratio {s:?} (expected a:b, a/b or a decimal)"))
    }
}

/// A binned series with a chronological split: the train prefix feeds the
/// manifold library, the test suffix is the prediction target.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    series: BinnedSeries,
    train_len: usize,
}

/// Split into `floor(ratio * L)` train bins and the remaining test bins.
pub fn split(series: BinnedSeries, ratio: TrainRatio) -> SplitSeries {
    let train_len = ratio.train_len(series.len());
    SplitSeries { series, train_len }
}

impl SplitSeries {
    pub fn user_id(&self) -> &str {
        &self.series.user_id
    }

    pub fn series(&self) -> &BinnedSeries {
        &self.series
    }

    pub fn values(&self) -> &[u32] {
        &self.series.values
    }

    pub fn train(&self) -> &[u32] {
        &self.series.values[..self.train_len]
    }

    pub fn test(&self) -> &[u32] {
        &self.series.values[self.train_len..]
    }

    pub fn train_len(&self) -> usize {
        self.train_len
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.series.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trace(user: &str, ts: &[i64]) -> ActivityTrace {
        ActivityTrace {
            user_id: user.into(),
            timestamps: ts.to_vec(),
        }
    }

    #[test]
    fn counts_events_per_bin() {
        let window = AnalysisWindow::new(0, 180).unwrap();
        let series = bin_trace(&trace("u", &[10, 70, 71]), &window, 60).unwrap();
        assert_eq!(series.values, vec![1, 2, 0]);
    }

    #[test]
    fn empty_trace_gives_zero_bins() {
        let window = AnalysisWindow::new(0, 180).unwrap();
        let series = bin_trace(&trace("u", &[]), &window, 60).unwrap();
        assert_eq!(series.values, vec![0, 0, 0]);
    }

    #[test]
    fn four_month_window_at_hourly_bins() {
        // 2016-07-01 .. 2016-11-01 UTC: 123 days.
        let t_start = 1_467_331_200;
        let t_end = t_start + 123 * 86_400;
        let window = AnalysisWindow::new(t_start, t_end).unwrap();
        let series = bin_trace(&trace("u", &[]), &window, 3600).unwrap();
        assert_eq!(series.len(), 2952);
    }

    #[test]
    fn oversized_bin_is_an_error() {
        let window = AnalysisWindow::new(0, 100).unwrap();
        assert!(bin_trace(&trace("u", &[]), &window, 200).is_err());
        assert!(bin_trace(&trace("u", &[]), &window, 0).is_err());
    }

    #[test]
    fn split_floor_arithmetic() {
        let window = AnalysisWindow::new(0, 800).unwrap();
        let series = bin_trace(&trace("u", &[]), &window, 100).unwrap();
        let s = split(series, TrainRatio::three_to_one());
        assert_eq!(s.train().len(), 6);
        assert_eq!(s.test().len(), 2);

        let window = AnalysisWindow::new(0, 2952).unwrap();
        let series = bin_trace(&trace("u", &[]), &window, 1).unwrap();
        let s = split(series, TrainRatio::three_to_one());
        assert_eq!(s.train().len(), 2214);
        assert_eq!(s.test().len(), 738);

        let window = AnalysisWindow::new(0, 5).unwrap();
        let series = bin_trace(&trace("u", &[]), &window, 1).unwrap();
        let s = split(series, TrainRatio::new(1, 2).unwrap());
        assert_eq!(s.train().len(), 2);
        assert_eq!(s.test().len(), 3);
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("3:1".parse::<TrainRatio>().unwrap(), TrainRatio::new(3, 4).unwrap());
        assert_eq!("3/4".parse::<TrainRatio>().unwrap(), TrainRatio::new(3, 4).unwrap());
        assert_eq!("0.75".parse::<TrainRatio>().unwrap(), TrainRatio::new(75, 100).unwrap());
        assert!("1:0".parse::<TrainRatio>().is_err());
        assert!("0".parse::<TrainRatio>().is_err());
        assert!("nope".parse::<TrainRatio>().is_err());
    }

    proptest! {
        // Concatenation: train ++ test reconstructs the original vector.
        #[test]
        fn split_concatenation(values in proptest::collection::vec(0u32..50, 1..300), num in 1u64..10, extra in 1u64..10) {
            let window = AnalysisWindow::new(0, values.len() as i64).unwrap();
            let series = BinnedSeries { user_id: "u".into(), values: values.clone(), bin_width: 1, window };
            let ratio = TrainRatio::new(num, num + extra).unwrap();
            let s = split(series, ratio);
            let mut rebuilt = s.train().to_vec();
            rebuilt.extend_from_slice(s.test());
            prop_assert_eq!(rebuilt, values);
        }

        // Permutation invariance over input event order and conservation of
        // events when the window is an exact multiple of the bin width.
        #[test]
        fn binning_is_order_invariant_and_conserving(
            mut ts in proptest::collection::vec(0i64..600, 0..200),
            bin_width in 1i64..60,
        ) {
            let n_bins = 600 / bin_width;
            let window = AnalysisWindow::new(0, n_bins * bin_width).unwrap();
            let forward = bin_trace(&trace("u", &ts), &window, bin_width).unwrap();
            ts.reverse();
            let reversed = bin_trace(&trace("u", &ts), &window, bin_width).unwrap();
            prop_assert_eq!(&forward, &reversed);
            let in_window = ts.iter().filter(|&&t| window.contains(t)).count() as u64;
            let total: u64 = forward.values.iter().map(|&v| u64::from(v)).sum();
            prop_assert_eq!(total, in_window);
        }
    }
}
