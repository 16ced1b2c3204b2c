//! Bernoulli estimates, coupled ratios and weighted log-log regression.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::EstimateError;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub n: u64,
    pub p_hat: f64,
    /// Wald standard error `sqrt(p(1-p)/n)`.
    pub stderr: f64,
    /// Wilson score interval.
    pub ci95: (f64, f64),
    /// Samples whose exploration hit the safety box while the event was false.
    pub truncated: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, n: u64) -> Result<Self, EstimateError> {
        if n == 0 {
            return Err(EstimateError::NoSamples);
        }
        assert!(successes <= n, "successes {successes} exceed samples {n}");
        let nf = n as f64;
        let p = successes as f64 / nf;
        Ok(Estimate { successes, n, p_hat: p, stderr: (p * (1.0 - p) / nf).sqrt(), ci95: wilson(successes, n, Z95), truncated: 0 })
    }

    pub fn with_truncated(mut self, truncated: u64) -> Self {
        self.truncated = truncated;
        self
    }

    /// Variance of `ln p_hat` by the delta method. Uses `(s + 1/2)/(n + 1)`
    /// in place of `p_hat` so that certain events keep a finite weight.
    pub fn log_variance(&self) -> f64 {
        let nf = self.n as f64;
        let p = (self.successes as f64 + 0.5) / (nf + 1.0);
        (1.0 - p) / (nf * p)
    }

    /// `(p_hat - p) / stderr` with the standard error taken at the reference
    /// probability `p` (well defined also when `p_hat` is 0 or 1).
    pub fn z_score(&self, p: f64) -> f64 {
        let sd = (p * (1.0 - p) / self.n as f64).sqrt();
        if sd == 0.0 {
            if self.p_hat == p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.p_hat - p) / sd
        }
    }
}

pub fn wilson(successes: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Outcome counts of two events evaluated on the same samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub n: u64,
    /// Both events.
    pub both: u64,
    /// First event only.
    pub first_only: u64,
    /// Second event only.
    pub second_only: u64,
}

impl JointCounts {
    pub fn first(&self) -> u64 {
        self.both + self.first_only
    }

    pub fn second(&self) -> u64 {
        self.both + self.second_only
    }

    pub fn neither(&self) -> u64 {
        self.n - self.both - self.first_only - self.second_only
    }

    fn probs(&self) -> [f64; 4] {
        let n = self.n as f64;
        [self.both as f64 / n, self.first_only as f64 / n, self.second_only as f64 / n, self.neither() as f64 / n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    SharedSamples,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub stderr: f64,
    pub coupling: Coupling,
}

impl RatioEstimate {
    /// Ratio `P(first) / P(second)` from shared-sample joint counts, with the
    /// delta-method variance including the covariance term. When the first
    /// event implies the second this is the conditional-probability variance.
    pub fn shared(j: &JointCounts) -> Result<Self, EstimateError> {
        if j.n == 0 {
            return Err(EstimateError::NoSamples);
        }
        if j.second() == 0 {
            return Err(EstimateError::UndefinedRatio);
        }
        let (s1, s2) = (j.first() as f64, j.second() as f64);
        if s1 == 0.0 {
            return Ok(RatioEstimate { ratio: 0.0, stderr: 0.0, coupling: Coupling::SharedSamples });
        }
        let ratio = s1 / s2;
        // (1-p1)/p1 + (1-p2)/p2 - 2 (p12 - p1 p2)/(p1 p2), over n, in counts.
        let rel_var = (j.first_only + j.second_only) as f64 / (s1 * s2);
        Ok(RatioEstimate { ratio, stderr: ratio * rel_var.sqrt(), coupling: Coupling::SharedSamples })
    }

    /// Ratio of two independently sampled estimates.
    pub fn independent(num: &Estimate, den: &Estimate) -> Result<Self, EstimateError> {
        if den.successes == 0 {
            return Err(EstimateError::UndefinedRatio);
        }
        let ratio = num.p_hat / den.p_hat;
        if num.successes == 0 {
            return Ok(RatioEstimate { ratio: 0.0, stderr: 0.0, coupling: Coupling::Independent });
        }
        let rel_var = (1.0 - num.p_hat) / (num.n as f64 * num.p_hat) + (1.0 - den.p_hat) / (den.n as f64 * den.p_hat);
        Ok(RatioEstimate { ratio, stderr: ratio * rel_var.sqrt(), coupling: Coupling::Independent })
    }

    /// Standardized deviation from a target ratio.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.ratio - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

/// Bootstrap standard error of the shared-sample ratio: multinomial
/// resampling of the 2x2 outcome table.
pub fn bootstrap_ratio_stderr(j: &JointCounts, resamples: usize, seed: u64) -> Result<f64, EstimateError> {
    RatioEstimate::shared(j)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = j.probs();
    let mut ratios = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut left = j.n;
        let mut mass = 1.0;
        let mut cells = [0u64; 4];
        for k in 0..3 {
            let q = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
            let draw = Binomial::new(left, q).expect("valid binomial").sample(&mut rng);
            cells[k] = draw;
            left -= draw;
            mass -= probs[k];
        }
        cells[3] = left;
        let den = cells[0] + cells[2];
        if den > 0 {
            ratios.push((cells[0] + cells[1]) as f64 / den as f64);
        }
    }
    let m = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / m;
    Ok((ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln x, ln y, weight)` per point.
    pub points: Vec<(f64, f64, f64)>,
}

/// Weighted least squares of `ln y` on `ln x`. Weights are inverse variances
/// of `ln y`, so the slope standard error is `1 / sqrt(Sxx)`.
pub fn fit_loglog(points: &[(f64, f64, f64)]) -> Result<ExponentFit, EstimateError> {
    if points.len() < 3 {
        return Err(EstimateError::TooFewPoints(points.len()));
    }
    let mut logs = Vec::with_capacity(points.len());
    for (k, &(x, y, w)) in points.iter().enumerate() {
        if !(x > 0.0 && y > 0.0 && w > 0.0 && w.is_finite()) {
            return Err(EstimateError::NonPositive(k));
        }
        logs.push((x.ln(), y.ln(), w));
    }
    let sw: f64 = logs.iter().map(|p| p.2).sum();
    let xm = logs.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = logs.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = logs.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = logs.iter().map(|p| p.2 * (p.1 - ym).powi(2)).sum();
    if sxx <= 1e-300 * sw {
        return Err(EstimateError::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = logs.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ExponentFit { slope, stderr: sxx.recip().sqrt(), intercept, r_squared, points: logs })
}

/// Power-law fit of estimated probabilities against `x`, weighted by the
/// delta-method variance of `ln p_hat`.
pub fn fit_power_law(points: &[(f64, Estimate)]) -> Result<ExponentFit, EstimateError> {
    let mut raw = Vec::with_capacity(points.len());
    for (k, (x, e)) in points.iter().enumerate() {
        if e.successes == 0 {
            return Err(EstimateError::NonPositive(k));
        }
        raw.push((*x, e.p_hat, e.log_variance().recip()));
    }
    fit_loglog(&raw)
}

/// Tolerance check of an observed quantity against a target:
/// passes when `|observed - target| <= max(sigmas * stderr, rel_tol * |target|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub stderr: f64,
    pub target: f64,
    pub allowed: f64,
    pub z: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, stderr: f64, target: f64, sigmas: f64, rel_tol: f64) -> Self {
        let allowed = (sigmas * stderr).max(rel_tol * target.abs());
        Self::with_allowance(name, observed, stderr, target, allowed)
    }

    /// Fixed absolute allowance.
    pub fn absolute(name: impl Into<String>, observed: f64, stderr: f64, target: f64, allowed: f64) -> Self {
        Self::with_allowance(name, observed, stderr, target, allowed)
    }

    fn with_allowance(name: impl Into<String>, observed: f64, stderr: f64, target: f64, allowed: f64) -> Self {
        let d = observed - target;
        let z = if stderr > 0.0 { d / stderr } else if d == 0.0 { 0.0 } else { d.signum() * f64::INFINITY };
        Check { name: name.into(), observed, stderr, target, allowed, z, passed: d.abs() <= allowed }
    }

    /// A standardized statistic that must satisfy `|z| < limit`.
    pub fn z_bound(name: impl Into<String>, z: f64, limit: f64) -> Self {
        Check { name: name.into(), observed: z, stderr: 1.0, target: 0.0, allowed: limit, z, passed: z.abs() < limit }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}: observed {:.6} (se {:.6}) target {:.6} allowed ±{:.6} z {:.2}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.stderr,
            self.target,
            self.allowed,
            self.z
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::Normal;

    #[test]
    fn estimate_fields() {
        let e = Estimate::from_counts(30, 100).unwrap();
        assert_eq!(e.p_hat, 0.3);
        assert!((e.stderr - (0.3f64 * 0.7 / 100.0).sqrt()).abs() < 1e-15);
        assert!(e.ci95.0 < 0.3 && e.ci95.1 > 0.3);
        assert_eq!((e.p_hat * e.n as f64).round() as u64, e.successes);
        assert_eq!(Estimate::from_counts(0, 0), Err(EstimateError::NoSamples));
        let zero = Estimate::from_counts(0, 50).unwrap();
        assert_eq!(zero.ci95.0, 0.0);
        assert!(zero.ci95.1 > 0.0);
    }

    #[test]
    fn wilson_matches_closed_form() {
        // Reference values from the textbook formula evaluated separately.
        let (lo, hi) = wilson(81, 263, Z95);
        assert!((lo - 0.2553).abs() < 1e-4 && (hi - 0.3662).abs() < 1e-4, "{lo} {hi}");
    }

    #[test]
    fn wilson_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 2000;
        for p in [0.01, 0.1, 0.5] {
            let bin = Binomial::new(n, p).unwrap();
            let reps = 10_000;
            let covered = (0..reps)
                .filter(|_| {
                    let (lo, hi) = wilson(bin.sample(&mut rng), n, Z95);
                    lo <= p && p <= hi
                })
                .count() as f64
                / reps as f64;
            assert!((0.94..=0.965).contains(&covered), "p = {p}: coverage {covered}");
        }
    }

    #[test]
    fn identical_events_ratio_is_exactly_one() {
        let j = JointCounts { n: 1000, both: 420, first_only: 0, second_only: 0 };
        let r = RatioEstimate::shared(&j).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn nested_ratio_uses_conditional_variance() {
        // Second event implies the first: ratio = 1 / P(second | first).
        let j = JointCounts { n: 10_000, both: 2_000, first_only: 3_000, second_only: 0 };
        let r = RatioEstimate::shared(&j).unwrap();
        assert!((r.ratio - 2.5).abs() < 1e-12);
        assert!(r.ratio >= 1.0);
        // 1/q with q ~ Bin(5000, 0.4)/5000: se(1/q) = se(q)/q^2.
        let q: f64 = 0.4;
        let want = (q * (1.0 - q) / 5000.0).sqrt() / (q * q);
        assert!((r.stderr - want).abs() < 1e-9, "{} vs {want}", r.stderr);
        let ind = RatioEstimate::independent(
            &Estimate::from_counts(j.first(), j.n).unwrap(),
            &Estimate::from_counts(j.second(), j.n).unwrap(),
        )
        .unwrap();
        assert!(r.stderr < ind.stderr);
    }

    #[test]
    fn undefined_ratio() {
        let j = JointCounts { n: 10, both: 0, first_only: 4, second_only: 0 };
        assert_eq!(RatioEstimate::shared(&j), Err(EstimateError::UndefinedRatio));
    }

    #[test]
    fn bootstrap_agrees_with_delta_method() {
        let j = JointCounts { n: 200_000, both: 30_000, first_only: 20_000, second_only: 5_000 };
        let delta = RatioEstimate::shared(&j).unwrap().stderr;
        let boot = bootstrap_ratio_stderr(&j, 1000, 5).unwrap();
        assert!((boot / delta - 1.0).abs() < 0.1, "bootstrap {boot} delta {delta}");
    }

    #[test]
    fn noiseless_power_law() {
        let pts: Vec<_> = [0.1, 0.2, 0.5, 1.0, 3.0].iter().map(|&x: &f64| (x, x.powf(-1.0 / 3.0), 1.0)).collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-14);
        assert!(fit.intercept.abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert_eq!(fit_loglog(&[(1.0, 1.0, 1.0), (2.0, 1.0, 1.0)]), Err(EstimateError::TooFewPoints(2)));
        assert_eq!(fit_loglog(&[(1.0, 1.0, 1.0), (2.0, 0.0, 1.0), (3.0, 1.0, 1.0)]), Err(EstimateError::NonPositive(1)));
        assert_eq!(fit_loglog(&[(2.0, 1.0, 1.0), (2.0, 3.0, 1.0), (2.0, 1.0, 1.0)]), Err(EstimateError::DegenerateAbscissa));
        let zero = Estimate::from_counts(0, 10).unwrap();
        let one = Estimate::from_counts(5, 10).unwrap();
        assert!(fit_power_law(&[(1.0, one), (2.0, zero), (3.0, one)]).is_err());
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let pts = [(0.1, 0.7, 3.0), (0.2, 0.61, 1.0), (0.4, 0.55, 2.0), (0.8, 0.47, 5.0)];
        let a = fit_loglog(&pts).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let scaled: Vec<_> = pts.iter().map(|&(x, y, w)| (c * x, y, w)).collect();
            let b = fit_loglog(&scaled).unwrap();
            assert!((a.slope - b.slope).abs() < 1e-12, "{c}");
            assert!((b.intercept - (a.intercept - a.slope * c.ln())).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_stderr_calibrated_on_noisy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let sigma = 0.01;
        let noise: Normal<f64> = Normal::new(0.0, sigma).unwrap();
        let truth = -5.0 / 48.0;
        let xs = [1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0];
        let mut inside = 0;
        for _ in 0..100 {
            let c: f64 = rng.gen_range(0.2..2.0);
            let pts: Vec<_> = xs.iter().map(|&x: &f64| (x, c * x.powf(truth) * noise.sample(&mut rng).exp(), 1.0 / (sigma * sigma))).collect();
            let fit = fit_loglog(&pts).unwrap();
            if (fit.slope - truth).abs() <= 3.0 * fit.stderr {
                inside += 1;
            }
        }
        assert!(inside >= 95, "{inside}/100 fits within 3 stderr");
    }

    #[test]
    fn checks() {
        let c = Check::new("x", 1.1, 0.01, 1.0, 3.0, 0.05);
        assert!(!c.passed);
        assert!(Check::new("x", 1.04, 0.01, 1.0, 3.0, 0.05).passed);
        assert!(Check::new("x", 1.2, 0.1, 1.0, 3.0, 0.05).passed);
        assert!(Check::z_bound("z", -2.9, 3.0).passed);
        assert!(!Check::z_bound("z", 3.1, 3.0).passed);
    }
}
