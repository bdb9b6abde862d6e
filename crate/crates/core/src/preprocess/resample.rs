//! Polyphase rational-ratio resampling.

use std::f64::consts::PI;

const KAISER_BETA: f64 = 5.0;
const HALF_TAPS_PER_PHASE: usize = 10;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reduced `(up, down)` with `up / down == target / source`, both rates taken
/// at millihertz resolution.
pub fn rational_ratio(source_fs: f64, target_fs: f64) -> (usize, usize) {
    let up = (target_fs * 1000.0).round() as usize;
    let down = (source_fs * 1000.0).round() as usize;
    let g = gcd(up, down).max(1);
    (up / g, down / g)
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass for the upsampled rate, DC gain `up`.
fn design_lowpass(up: usize, down: usize) -> (Vec<f64>, usize) {
    let factor = up.max(down);
    let half = HALF_TAPS_PER_PHASE * factor;
    let len = 2 * half + 1;
    let cutoff = 1.0 / factor as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut h: Vec<f64> = (0..len)
        .map(|k| {
            let m = k as f64 - half as f64;
            let arg = cutoff * m;
            let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
            let r = m / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            cutoff * sinc * w
        })
        .collect();
    // Each polyphase branch sums to one, so constants pass exactly.
    for phase in 0..up {
        let sum: f64 = h.iter().skip(phase).step_by(up).sum();
        for v in h.iter_mut().skip(phase).step_by(up) {
            *v /= sum;
        }
    }
    (h, half)
}

/// Resample by `up / down`. The output has `round(len * up / down)`
/// samples; `up == down` returns the input unchanged.
pub fn resample_signal(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    assert!(up > 0 && down > 0, "resampling factors must be positive");
    let g = gcd(up, down);
    let (up, down) = (up / g, down / g);
    if up == down {
        return x.to_vec();
    }
    let n = x.len();
    let n_out = (2 * n * up + down) / (2 * down);
    let (h, half) = design_lowpass(up, down);
    let taps = h.len();

    (0..n_out)
        .map(|m| {
            // Position in the zero-stuffed, delay-compensated domain.
            let t = m * down + half;
            let first = (t + 1).saturating_sub(taps).div_ceil(up);
            let last = (t / up).min(n.saturating_sub(1));
            if n == 0 || first > last {
                return 0.0;
            }
            (first..=last).map(|i| x[i] * h[t - i * up]).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios() {
        assert_eq!(rational_ratio(160.0, 200.0), (5, 4));
        assert_eq!(rational_ratio(256.0, 200.0), (25, 32));
        assert_eq!(rational_ratio(250.0, 200.0), (4, 5));
        assert_eq!(rational_ratio(200.0, 200.0), (1, 1));
    }

    #[test]
    fn lengths() {
        assert_eq!(resample_signal(&[0.0; 640], 5, 4).len(), 800);
        assert_eq!(resample_signal(&[0.0; 2560], 25, 32).len(), 2000);
        assert_eq!(resample_signal(&[0.0; 7], 1, 2).len(), 4);
        assert!(resample_signal(&[], 3, 2).is_empty());
    }

    #[test]
    fn dc_level_preserved_in_interior() {
        let y = resample_signal(&[2.0; 1000], 5, 4);
        for v in &y[100..1150] {
            assert!((v - 2.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn i0_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.2660658777520082).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239871823604442).abs() < 1e-11);
    }
}
