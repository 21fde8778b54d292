
use crate::scalar::Real;

/// Below this |x| the positive-term series is summed; above it the
/// asymptotic expansion's smallest term is under `e^{-36}`.
const SERIES_LIMIT: f64 = 6.0;

/// Dawson's integral `D(x) = e^{-x²} ∫₀ˣ e^{t²} dt`.
///
/// Uses `e^{-x²} Σ x^{2n+1} / (n! (2n+1))` (all terms positive, no
/// cancellation) for `|x| ≤ 6` and the asymptotic series
/// `1/(2x) Σ (2n-1)!! / (2x²)ⁿ` beyond.
pub fn dawson<T: Real>(x: T) -> T {
    if x < T::zero() {
        return -dawson(-x);
    }
    if x == T::zero() {
        return T::zero();
    }
    if x <= T::lit(SERIES_LIMIT) {
        let x2 = x * x;
        let mut power = x; // x^{2n+1} / n!
        let mut sum = x;
        let mut n = T::zero();
        loop {
            n += T::one();
            power = power * x2 / n;
            let term = power / (T::two() * n + T::one());
            sum += term;
            if term <= sum * T::epsilon() * T::lit(0.25) {
                break;
            }
        }
        (-x2).exp() * sum
    } else {
        let inv = T::one() / (T::two() * x * x);
        let mut term = T::one();
        let mut sum = T::one();
        let mut k = T::one();
        loop {
            let next = term * (T::two() * k - T::one()) * inv;
            if next >= term || next <= sum * T::epsilon() * T::lit(0.25) {
                break;
            }
            term = next;
            sum += term;
            k += T::one();
        }
        sum / (T::two() * x)
    }
}
