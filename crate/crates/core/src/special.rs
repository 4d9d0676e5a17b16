//! Special functions not covered by the standard library.

/// Dawson function `F(x) = e^{-x²} ∫₀ˣ e^{t²} dt`.
///
/// Positive-term power series for `|x| ≤ 6`, asymptotic series beyond.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= 6.0 {
        // ∫₀ˣ e^{t²} dt = Σ x^{2n+1} / (n! (2n+1)), all terms positive.
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add <= 1e-17 * sum {
                break;
            }
        }
        sum * (-x2).exp()
    } else {
        // F(x) ~ 1/(2x) Σ (2n-1)!! / (2x²)^n
        let inv = 1.0 / (2.0 * ax * ax);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut n = 0.0;
        loop {
            n += 1.0;
            let next = term * (2.0 * n - 1.0) * inv;
            if next > term || next < 1e-17 {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * ax)
    };
    v.copysign(x)
}

/// `(1/π) P.V.∫ e^{-t²}/(x − t) dt`, the Hilbert transform of a unit Gaussian.
pub fn gaussian_hilbert(x: f64) -> f64 {
    2.0 / std::f64::consts::PI.sqrt() * dawson(x)
}
