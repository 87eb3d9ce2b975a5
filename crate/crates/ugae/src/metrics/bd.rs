//! Rate-distortion curve deltas: Akima piecewise-cubic interpolation and
//! Bjøntegaard-style average quality / average rate differences between
//! two curves, computed over their common interval only (no extrapolation).
//!
//! Interpolation falls back to the exact interpolating line for 2 knots
//! and the exact interpolating parabola for 3; with 4 or more knots it is
//! the classic Akima scheme (weighted slope blend, C1 at knots). Integrals
//! are closed-form per segment, so BD values carry no quadrature error.

use super::MetricsError;

/// One rate-distortion measurement: bits per input point vs quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RDPoint {
    pub rate: f64,
    pub quality: f64,
}

/// A rate-distortion curve: at least two points, strictly increasing
/// positive rate, finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct RDCurve {
    points: Vec<RDPoint>,
}

impl RDCurve {
    pub fn new(points: Vec<RDPoint>) -> Result<Self, MetricsError> {
        if points.len() < 2 {
            return Err(MetricsError::BadCurve);
        }
        for p in &points {
            if !(p.rate > 0.0) || !p.rate.is_finite() || !p.quality.is_finite() {
                return Err(MetricsError::BadCurve);
            }
        }
        if points.windows(2).any(|w| w[1].rate <= w[0].rate) {
            return Err(MetricsError::BadCurve);
        }
        Ok(RDCurve { points })
    }

    pub fn points(&self) -> &[RDPoint] {
        &self.points
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<(), MetricsError> {
    if knots.len() < 2 {
        return Err(MetricsError::BadKnots);
    }
    for &(x, y) in knots {
        if !x.is_finite() || !y.is_finite() {
            return Err(MetricsError::BadKnots);
        }
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(MetricsError::BadKnots);
    }
    Ok(())
}

/// Derivative assigned to every knot. 2 knots: the connecting slope.
/// 3 knots: derivative of the unique parabola through them. 4+: Akima's
/// weighted blend of adjacent secant slopes, with the midpoint fallback
/// when all four surrounding slopes agree.
fn knot_derivatives(knots: &[(f64, f64)]) -> Vec<f64> {
    let n = knots.len();
    match n {
        2 => {
            let m = (knots[1].1 - knots[0].1) / (knots[1].0 - knots[0].0);
            vec![m, m]
        }
        3 => {
            let (x0, y0) = knots[0];
            let (x1, y1) = knots[1];
            let (x2, y2) = knots[2];
            let d1 = (y1 - y0) / (x1 - x0);
            let d2 = ((y2 - y1) / (x2 - x1) - d1) / (x2 - x0);
            // q(x) = y0 + d1 (x - x0) + d2 (x - x0)(x - x1)
            let dq = |x: f64| d1 + d2 * (2.0 * x - x0 - x1);
            vec![dq(x0), dq(x1), dq(x2)]
        }
        _ => {
            // Secant slopes, extended by two linear-extrapolation slopes
            // on each side (Akima's boundary rule). ext[i + 2] == m_i.
            let mut ext = Vec::with_capacity(n + 3);
            ext.push(0.0);
            ext.push(0.0);
            for w in knots.windows(2) {
                ext.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
            }
            let k = ext.len();
            ext.push(2.0 * ext[k - 1] - ext[k - 2]);
            ext.push(2.0 * ext[k] - ext[k - 1]);
            ext[1] = 2.0 * ext[2] - ext[3];
            ext[0] = 2.0 * ext[1] - ext[2];

            (0..n)
                .map(|i| {
                    let m_prev2 = ext[i];
                    let m_prev = ext[i + 1];
                    let m_next = ext[i + 2];
                    let m_next2 = ext[i + 3];
                    let w1 = (m_next2 - m_next).abs();
                    let w2 = (m_prev - m_prev2).abs();
                    if w1 + w2 > 0.0 {
                        (w1 * m_prev + w2 * m_next) / (w1 + w2)
                    } else {
                        0.5 * (m_prev + m_next)
                    }
                })
                .collect()
        }
    }
}

/// Cubic Hermite coefficients for segment `i` in the local variable
/// s = (x - x_i) / h: value = a + b s + c s^2 + d s^3.
fn segment_coeffs(knots: &[(f64, f64)], derivs: &[f64], i: usize) -> (f64, [f64; 4]) {
    let (x0, y0) = knots[i];
    let (x1, y1) = knots[i + 1];
    let h = x1 - x0;
    let (t0, t1) = (derivs[i], derivs[i + 1]);
    let a = y0;
    let b = h * t0;
    let c = -3.0 * y0 - 2.0 * h * t0 + 3.0 * y1 - h * t1;
    let d = 2.0 * y0 + h * t0 - 2.0 * y1 + h * t1;
    (h, [a, b, c, d])
}

/// Interpolate at `x`, which must lie within the knot range.
pub fn akima_interpolate(knots: &[(f64, f64)], x: f64) -> Result<f64, MetricsError> {
    validate_knots(knots)?;
    let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
    if x < lo || x > hi {
        return Err(MetricsError::QueryOutOfRange { query: x, lo, hi });
    }
    // Exact at knots by construction and by short-circuit.
    if let Some(&(_, y)) = knots.iter().find(|&&(kx, _)| kx == x) {
        return Ok(y);
    }
    let derivs = knot_derivatives(knots);
    let i = knots
        .partition_point(|&(kx, _)| kx <= x)
        .saturating_sub(1)
        .min(knots.len() - 2);
    let (h, [a, b, c, d]) = segment_coeffs(knots, &derivs, i);
    let s = (x - knots[i].0) / h;
    Ok(a + s * (b + s * (c + s * d)))
}

/// Exact integral of the interpolant over `[lo, hi]`, both inside the
/// knot range.
fn akima_integral(knots: &[(f64, f64)], lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let derivs = knot_derivatives(knots);
    let mut total = 0.0;
    for i in 0..knots.len() - 1 {
        let (x0, x1) = (knots[i].0, knots[i + 1].0);
        let (a, b) = (lo.max(x0), hi.min(x1));
        if a >= b {
            continue;
        }
        let (h, [c0, c1, c2, c3]) = segment_coeffs(knots, &derivs, i);
        let anti = |s: f64| s * (c0 + s * (c1 / 2.0 + s * (c2 / 3.0 + s * c3 / 4.0)));
        let (sa, sb) = ((a - x0) / h, (b - x0) / h);
        total += h * (anti(sb) - anti(sa));
    }
    total
}

/// Average quality difference (test minus reference) over the curves'
/// common log10-rate interval: the BD quality delta in dB when qualities
/// are PSNR values.
pub fn bd_psnr(reference: &RDCurve, test: &RDCurve) -> Result<f64, MetricsError> {
    let to_knots = |c: &RDCurve| -> Vec<(f64, f64)> {
        c.points()
            .iter()
            .map(|p| (p.rate.log10(), p.quality))
            .collect()
    };
    let kr = to_knots(reference);
    let kt = to_knots(test);
    let lo = kr[0].0.max(kt[0].0);
    let hi = kr[kr.len() - 1].0.min(kt[kt.len() - 1].0);
    if lo >= hi {
        return Err(MetricsError::NoOverlap { axis: "rate" });
    }
    let ir = akima_integral(&kr, lo, hi);
    let it = akima_integral(&kt, lo, hi);
    Ok((it - ir) / (hi - lo))
}

/// Average rate difference over the curves' common quality interval,
/// as a percentage: 100 * (10^delta - 1) where delta is the mean
/// log10-rate difference (test minus reference). Negative values mean
/// the test curve spends fewer bits for equal quality.
pub fn bd_br(reference: &RDCurve, test: &RDCurve) -> Result<f64, MetricsError> {
    let to_knots = |c: &RDCurve| -> Result<Vec<(f64, f64)>, MetricsError> {
        let knots: Vec<(f64, f64)> = c
            .points()
            .iter()
            .map(|p| (p.quality, p.rate.log10()))
            .collect();
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(MetricsError::NonMonotoneQuality);
        }
        Ok(knots)
    };
    let kr = to_knots(reference)?;
    let kt = to_knots(test)?;
    let lo = kr[0].0.max(kt[0].0);
    let hi = kr[kr.len() - 1].0.min(kt[kt.len() - 1].0);
    if lo >= hi {
        return Err(MetricsError::NoOverlap { axis: "quality" });
    }
    let ir = akima_integral(&kr, lo, hi);
    let it = akima_integral(&kt, lo, hi);
    let delta = (it - ir) / (hi - lo);
    Ok(100.0 * (10f64.powf(delta) - 1.0))
}
