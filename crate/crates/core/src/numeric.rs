//! Log-domain accumulation, compensated sums and small statistics helpers.

use crate::scalar::Scalar;

/// log(e^a + e^b) without leaving the log domain.
#[inline]
pub fn logsumexp2<R: Scalar>(a: R, b: R) -> R {
    if a == R::neg_infinity() && b == R::neg_infinity() {
        return R::neg_infinity();
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Deterministic two-pass log-sum-exp over a slice.
///
/// Pass one finds the max, pass two does a compensated sum of the shifted
/// exponentials in slice order. The merge order is fixed by the caller's
/// ordering of `terms`, so parallel producers must collect in a stable order
/// before reducing.
pub fn logsumexp<R: Scalar>(terms: &[R]) -> R {
    let mut m = R::neg_infinity();
    for &t in terms {
        if t > m {
            m = t;
        }
    }
    if m == R::neg_infinity() {
        return m;
    }
    let mut acc = NeumaierSum::<R>::default();
    for &t in terms {
        acc.add((t - m).exp());
    }
    m + acc.total().ln()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum<R> {
    sum: R,
    comp: R,
}

impl<R: Scalar> NeumaierSum<R> {
    pub fn add(&mut self, x: R) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> R {
        self.sum + self.comp
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
///
/// Returns the fitted coefficients together with the standard error of the
/// slope (residual-based, `n - 2` degrees of freedom). At least three points
/// are required for a finite standard error.
#[derive(Clone, Copy, Debug)]
pub struct LineFit<R> {
    pub slope: R,
    pub intercept: R,
    pub slope_stderr: R,
    pub residual_rms: R,
}

pub fn fit_line<R: Scalar>(xs: &[R], ys: &[R]) -> Option<LineFit<R>> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nr = R::of(n as f64);
    let mx = xs.iter().copied().sum::<R>() / nr;
    let my = ys.iter().copied().sum::<R>() / nr;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == R::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = R::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
    }
    let (stderr, rms) = if n > 2 {
        let var = ss_res / R::of((n - 2) as f64);
        ((var / sxx).sqrt(), (ss_res / nr).sqrt())
    } else {
        (R::infinity(), R::zero())
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr: stderr,
        residual_rms: rms,
    })
}

/// Sample mean with a 95% normal confidence interval.
#[derive(Clone, Copy, Debug)]
pub struct MeanCi<R> {
    pub mean: R,
    pub half_width: R,
    pub n: usize,
}

impl<R: Scalar> MeanCi<R> {
    pub fn upper(&self) -> R {
        self.mean + self.half_width
    }

    pub fn lower(&self) -> R {
        self.mean - self.half_width
    }
}

pub fn mean_ci95<R: Scalar>(samples: &[R]) -> MeanCi<R> {
    let n = samples.len().max(1);
    let nr = R::of(n as f64);
    let mean = samples.iter().copied().sum::<R>() / nr;
    let mut ss = R::zero();
    for &s in samples {
        ss += (s - mean) * (s - mean);
    }
    let var = if n > 1 { ss / R::of((n - 1) as f64) } else { R::zero() };
    MeanCi {
        mean,
        half_width: R::of(1.96) * (var / nr).sqrt(),
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_naive_in_range() {
        let terms = [0.5f64, 2.0, -1.0];
        let naive = terms.iter().map(|t| t.exp()).sum::<f64>().ln();
        assert!((logsumexp(&terms) - naive).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_survives_large_magnitudes() {
        let v = logsumexp(&[1234.0f64, 1232.0]);
        // 1234 + ln(1 + e^-2)
        assert!((v - (1234.0 + (-2.0f64).exp().ln_1p())).abs() < 1e-12);
        assert_eq!(logsumexp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn generic_kernel_instantiates_at_f32() {
        let v = logsumexp2(1.0f32, 2.0f32);
        assert!((v - 2.313_262).abs() < 1e-5);
    }

    #[test]
    fn neumaier_handles_cancellation() {
        let mut s = NeumaierSum::<f64>::default();
        s.add(1.0);
        s.add(1e100);
        s.add(1.0);
        s.add(-1e100);
        assert_eq!(s.total(), 2.0);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let xs = [1.0f64, 2.0, 3.0, 4.0];
        let ys = [3.0f64, 5.0, 7.0, 9.0];
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }
}
