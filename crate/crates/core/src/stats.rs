//! Sample moments with compensated summation, so that ensemble statistics
//! depend only on the ordered sample and not on how it was produced.

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Central fourth moment.
    pub m4: f64,
    pub min: f64,
    pub max: f64,
}

impl SampleStats {
    /// Two-pass moments of an ordered sample. Needs at least two values.
    pub fn from_slice(xs: &[f64]) -> Self {
        let count = xs.len();
        assert!(count >= 2, "need at least two samples");
        let n = count as f64;
        let mean = compensated_sum(xs.iter().copied()) / n;
        let m2 = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / n;
        let m4 = compensated_sum(xs.iter().map(|x| (x - mean).powi(4))) / n;
        let variance = m2 * n / (n - 1.0);
        let (min, max) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        Self {
            count,
            mean,
            variance,
            stderr: (variance / n).sqrt(),
            m4,
            min,
            max,
        }
    }

    /// Standard error of the sample variance from the fourth moment,
    /// `sqrt((m₄ - s⁴)/N)`; valid for any distribution with finite `m₄`.
    pub fn variance_stderr(&self) -> f64 {
        ((self.m4 - self.variance * self.variance).max(0.0) / self.count as f64).sqrt()
    }

    /// The Gaussian special case `s² sqrt(2/(N-1))`.
    pub fn gaussian_variance_stderr(&self) -> f64 {
        self.variance * (2.0 / (self.count as f64 - 1.0)).sqrt()
    }

    /// `(mean - target) / stderr`.
    pub fn mean_z(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }

    /// `(variance - target) / variance_stderr`.
    pub fn variance_z(&self, target: f64) -> f64 {
        (self.variance - target) / self.variance_stderr()
    }

    /// Excess kurtosis `m₄/m₂² - 3`.
    pub fn excess_kurtosis(&self) -> f64 {
        let n = self.count as f64;
        let m2 = self.variance * (n - 1.0) / n;
        self.m4 / (m2 * m2) - 3.0
    }
}
