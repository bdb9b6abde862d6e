//! Second-order-section IIR filters applied forward-backward.

use std::f64::consts::PI;

use num_complex::Complex64;

/// One biquad section, `a[0]` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            a2.abs().sqrt()
        } else {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / fs);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Single forward pass with initial section states.
    fn run(&self, x: &mut [f64], init: &[[f64; 2]]) {
        for (sec, st) in self.sections.iter().zip(init) {
            let [b0, b1, b2] = sec.b;
            let [_, a1, a2] = sec.a;
            let (mut s1, mut s2) = (st[0], st[1]);
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + s1;
                s1 = b1 * xin - a1 * y + s2;
                s2 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Steady-state section states for a unit step input (transposed direct form II).
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut level = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let gain = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[1] + s.a[2]);
                let y = gain * level;
                let st = [y - s.b[0] * level, s.b[2] * level - s.a[2] * y];
                level = y;
                st
            })
            .collect()
    }

    /// Edge padding long enough for the slowest pole to decay by 1e-6.
    fn pad_len(&self) -> usize {
        let r = self.sections.iter().map(Biquad::pole_radius).fold(0.0_f64, f64::max);
        let min = 3 * (2 * self.sections.len() + 1);
        if r <= 0.0 || r >= 1.0 {
            return min;
        }
        ((1e-6_f64.ln() / r.ln()).ceil() as usize).max(min)
    }

    /// Zero-phase filtering: odd-extension padding, steady-state initial
    /// conditions, forward pass then backward pass.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 || self.sections.is_empty() {
            return x.to_vec();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_states();
        let scaled = |level: f64| zi.iter().map(|s| [s[0] * level, s[1] * level]).collect::<Vec<_>>();

        let init = scaled(ext[0]);
        self.run(&mut ext, &init);
        ext.reverse();
        let init = scaled(ext[0]);
        self.run(&mut ext, &init);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Second-order notch at `f0` with quality factor `q`.
pub fn notch_design(f0: f64, q: f64, fs: f64) -> Sos {
    let w0 = 2.0 * PI * f0 / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    Sos {
        sections: vec![Biquad {
            b: [1.0 / a0, c / a0, 1.0 / a0],
            a: [1.0, c / a0, (1.0 - alpha) / a0],
        }],
    }
}

/// Butterworth band-pass from an `order`-pole low-pass prototype
/// (so the band-pass has `2 * order` poles in `order` sections).
pub fn butter_bandpass_design(low: f64, high: f64, order: usize, fs: f64) -> Sos {
    let fs2 = 2.0 * fs;
    // Pre-warped analog band edges.
    let w1 = fs2 * (PI * low / fs).tan();
    let w2 = fs2 * (PI * high / fs).tan();
    let bw = w2 - w1;
    let w0 = (w1 * w2).sqrt();

    let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);
    let to_bp = |p: Complex64| {
        let half = p * bw / 2.0;
        let root = (half * half - w0 * w0).sqrt();
        (half + root, half - root)
    };

    let mut sections = Vec::with_capacity(order);
    let numerator = [1.0, 0.0, -1.0];
    for k in 0..order {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let p = Complex64::from_polar(1.0, theta);
        if p.im > 1e-12 {
            let (s1, s2) = to_bp(p);
            for s in [s1, s2] {
                let z = bilinear(s);
                sections.push(Biquad {
                    b: numerator,
                    a: [1.0, -2.0 * z.re, z.norm_sqr()],
                });
            }
        } else if p.im.abs() <= 1e-12 {
            // Real prototype pole (odd order).
            let (s1, s2) = to_bp(Complex64::new(-1.0, 0.0));
            let (z1, z2) = (bilinear(s1), bilinear(s2));
            let sum = z1 + z2;
            let prod = z1 * z2;
            sections.push(Biquad {
                b: numerator,
                a: [1.0, -sum.re, prod.re],
            });
        }
    }

    let mut sos = Sos { sections };
    let center = (w0 / fs2).atan() * fs / PI;
    let gain = 1.0 / sos.response(center, fs).norm();
    let per = gain.powf(1.0 / sos.sections.len() as f64);
    for s in &mut sos.sections {
        for b in &mut s.b {
            *b *= per;
        }
    }
    sos
}
