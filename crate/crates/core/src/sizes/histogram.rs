//! Size histograms: the rectified histogram whose outer bins absorb the
//! `ceil(N/K)` smallest and largest sizes, and the plain uniform-width one.
//!
//! Bin boundaries: every bin is `[low, high)` except the last middle bin,
//! which is closed on the right, and the last bin, which is `(low, high]`.
//! With that convention the middle bins count exactly the middle slice of
//! the sorted sizes and the probabilities sum to one.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetAnnotations;
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_SPARSE_ALPHA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub low: f64,
    pub high: f64,
    pub low_closed: bool,
    pub high_closed: bool,
}

impl HistBin {
    fn right_open(low: f64, high: f64) -> Self {
        Self {
            low,
            high,
            low_closed: true,
            high_closed: false,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.low_closed { v >= self.low } else { v > self.low };
        let below = if self.high_closed {
            v <= self.high
        } else {
            v < self.high
        };
        above && below
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeHistogram {
    probs: Vec<f64>,
    bins: Vec<HistBin>,
    count: usize,
    /// The middle sizes were all equal and collapsed into one bin.
    degenerate: bool,
}

impl SizeHistogram {
    /// Build from explicit bins. Probabilities must be non-negative and sum
    /// to one; bins must be contiguous and non-decreasing.
    pub fn from_parts(probs: Vec<f64>, bins: Vec<HistBin>, count: usize) -> Result<Self> {
        if probs.is_empty() || probs.len() != bins.len() {
            return Err(Error::InvalidParameter(format!(
                "histogram needs matching non-empty bins and probabilities ({} vs {})",
                bins.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::InvalidParameter("negative bin probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "bin probabilities sum to {total}, expected 1"
            )));
        }
        for b in &bins {
            if b.low.is_nan() || b.high.is_nan() || b.low > b.high {
                return Err(Error::InvalidParameter(format!(
                    "bin [{}, {}] is reversed",
                    b.low, b.high
                )));
            }
        }
        for w in bins.windows(2) {
            if w[0].high != w[1].low {
                return Err(Error::InvalidParameter(format!(
                    "bins [{}, {}] and [{}, {}] are not contiguous",
                    w[0].low, w[0].high, w[1].low, w[1].high
                )));
            }
        }
        Ok(Self {
            probs,
            bins,
            count,
            degenerate: false,
        })
    }

    /// `n` equal-probability, equal-width bins spanning `[low, high]`.
    pub fn uniform_on(low: f64, high: f64, n: usize) -> Result<Self> {
        if n == 0 || low.partial_cmp(&high) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidParameter(format!(
                "uniform histogram needs n > 0 and low < high, got n={n} [{low}, {high}]"
            )));
        }
        let d = (high - low) / n as f64;
        let mut bins: Vec<HistBin> = (0..n)
            .map(|k| HistBin::right_open(low + k as f64 * d, low + (k + 1) as f64 * d))
            .collect();
        bins[n - 1].high = high;
        bins[n - 1].high_closed = true;
        Self::from_parts(vec![1.0 / n as f64; n], bins, 0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bins(&self) -> &[HistBin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of sizes the histogram was estimated from.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bins[0].low, self.bins[self.bins.len() - 1].high)
    }

    /// Index of the bin whose range contains `v`.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        self.bins.iter().position(|b| b.contains(v))
    }

    /// Draw a size: pick a bin by its probability, then a uniform point in it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = if self.probs.len() == 1 {
            0
        } else {
            WeightedIndex::new(&self.probs)
                .expect("histogram probabilities are valid weights")
                .sample(rng)
        };
        let bin = self.bins[k];
        if bin.high > bin.low {
            rng.random_range(bin.low..bin.high)
        } else {
            bin.low
        }
    }

    /// Reusable sampler that avoids rebuilding the bin index per draw.
    pub fn sampler(&self) -> HistogramSampler<'_> {
        HistogramSampler {
            hist: self,
            index: (self.probs.len() > 1)
                .then(|| WeightedIndex::new(&self.probs).expect("histogram probabilities are valid weights")),
        }
    }
}

pub struct HistogramSampler<'a> {
    hist: &'a SizeHistogram,
    index: Option<WeightedIndex<f64>>,
}

impl HistogramSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.index.as_ref().map_or(0, |w| w.sample(rng));
        let bin = self.hist.bins[k];
        if bin.high > bin.low {
            rng.random_range(bin.low..bin.high)
        } else {
            bin.low
        }
    }
}

/// Rectified histogram over the absolute sizes of a dataset's objects.
/// Ignore regions and uncertain boxes are left out unless `include_ignore`.
pub fn rectified_histogram_of(ds: &DatasetAnnotations, bins: usize, include_ignore: bool) -> Result<SizeHistogram> {
    rectified_histogram(&ds.sizes(include_ignore), bins)
}

/// Rectified histogram with `bins` (K > 2) bins over `sizes`.
///
/// The tail cut is by sorted index: equal sizes on either side of the cut may
/// land in different bins.
pub fn rectified_histogram(sizes: &[f64], bins: usize) -> Result<SizeHistogram> {
    if bins <= 2 {
        return Err(Error::InvalidParameter(format!(
            "rectified histogram needs more than 2 bins, got {bins}"
        )));
    }
    let n = sizes.len();
    if n < bins {
        return Err(Error::InsufficientData(format!("{n} sizes cannot fill {bins} bins")));
    }
    if sizes.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite size".into()));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_by(f64::total_cmp);

    let tail = n.div_ceil(bins);
    let middle = &sorted[tail..n - tail];
    if middle.is_empty() {
        return Err(Error::InsufficientData(format!(
            "{n} sizes leave no middle bins after two tails of {tail}"
        )));
    }
    let nf = n as f64;
    let tail_prob = tail as f64 / nf;
    let (mid_min, mid_max) = (middle[0], middle[middle.len() - 1]);

    let first = HistBin::right_open(sorted[0], mid_min);
    let last = HistBin {
        low: mid_max,
        high: sorted[n - 1],
        low_closed: false,
        high_closed: true,
    };

    if mid_max == mid_min {
        let single = HistBin {
            low: mid_min,
            high: mid_max,
            low_closed: true,
            high_closed: true,
        };
        log::debug!("rectified histogram: all {} middle sizes equal {mid_min}", middle.len());
        return Ok(SizeHistogram {
            probs: vec![tail_prob, middle.len() as f64 / nf, tail_prob],
            bins: vec![first, single, last],
            count: n,
            degenerate: true,
        });
    }

    let n_mid = bins - 2;
    let (mid_bins, counts) = uniform_bins(middle, mid_min, mid_max, n_mid);

    let mut probs = Vec::with_capacity(bins);
    let mut all_bins = Vec::with_capacity(bins);
    probs.push(tail_prob);
    all_bins.push(first);
    probs.extend(counts.iter().map(|&c| c as f64 / nf));
    all_bins.extend(mid_bins);
    probs.push(tail_prob);
    all_bins.push(last);

    Ok(SizeHistogram {
        probs,
        bins: all_bins,
        count: n,
        degenerate: false,
    })
}

/// Plain histogram with `bins` equal-width bins over `[min, max]`.
pub fn uniform_histogram(sizes: &[f64], bins: usize) -> Result<SizeHistogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if sizes.is_empty() {
        return Err(Error::EmptyInput("uniform_histogram: no sizes"));
    }
    let lo = sizes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = sizes.len();
    if lo == hi {
        let single = HistBin {
            low: lo,
            high: hi,
            low_closed: true,
            high_closed: true,
        };
        return Ok(SizeHistogram {
            probs: vec![1.0],
            bins: vec![single],
            count: n,
            degenerate: true,
        });
    }
    let (hbins, counts) = uniform_bins(sizes, lo, hi, bins);
    Ok(SizeHistogram {
        probs: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        bins: hbins,
        count: n,
        degenerate: false,
    })
}

/// `n` equal-width bins over `[lo, hi]` (last one closed) and the count of
/// `values` in each. Every value must lie in `[lo, hi]`.
fn uniform_bins(values: &[f64], lo: f64, hi: f64, n: usize) -> (Vec<HistBin>, Vec<usize>) {
    let d = (hi - lo) / n as f64;
    let mut bins: Vec<HistBin> = (0..n)
        .map(|k| HistBin::right_open(lo + k as f64 * d, lo + (k + 1) as f64 * d))
        .collect();
    bins[n - 1].high = hi;
    bins[n - 1].high_closed = true;

    let mut counts = vec![0usize; n];
    for &v in values {
        let mut k = (((v - lo) / d).floor() as isize).clamp(0, n as isize - 1) as usize;
        // floor() can be off by one against the stored edges
        while k > 0 && v < bins[k].low {
            k -= 1;
        }
        while k + 1 < n && v >= bins[k + 1].low {
            k += 1;
        }
        counts[k] += 1;
    }
    (bins, counts)
}

/// Fraction of bins whose probability is at most `1 / (alpha * K)`.
pub fn sparse_rate(h: &SizeHistogram, alpha: f64) -> f64 {
    let k = h.len() as f64;
    let threshold = 1.0 / (alpha * k);
    h.probs().iter().filter(|&&p| p <= threshold).count() as f64 / k
}
