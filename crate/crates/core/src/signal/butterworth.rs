//! Digital Butterworth bandpass design (bilinear transform of the analog
//! prototype) in second-order sections, and zero-phase forward-backward
//! filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `[b0, b1, b2, a1, a2]` with `a0 = 1`.
pub type Biquad = [f64; 5];

#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    order: usize,
    sections: Vec<Biquad>,
    sample_rate: f64,
}

impl Bandpass {
    /// Butterworth bandpass with prototype order `order` (the realized filter
    /// has `2 * order` poles) and -3 dB edges at `low_hz` and `high_hz`.
    pub fn design(order: usize, low_hz: f64, high_hz: f64, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        if order == 0 || !(0.0 < low_hz && low_hz < high_hz && high_hz < nyquist) {
            return Err(Error::InvalidInput(format!(
                "bandpass needs order > 0 and 0 < {low_hz} < {high_hz} < {nyquist}"
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let w_lo = fs2 * (PI * low_hz / sample_rate).tan();
        let w_hi = fs2 * (PI * high_hz / sample_rate).tan();
        let bw = w_hi - w_lo;
        let w0_sq = w_lo * w_hi;

        let n = order as f64;
        let mut analog = Vec::with_capacity(2 * order);
        for k in 0..order {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            let proto = Complex64::from_polar(1.0, theta);
            let half = proto * (bw / 2.0);
            let root = (half * half - w0_sq).sqrt();
            analog.push(half + root);
            analog.push(half - root);
        }

        // Gain: prototype gain 1 -> bw^order after the band transform; the
        // bilinear map contributes fs2^order / prod(fs2 - p).
        let mut gain = Complex64::new((bw * fs2).powi(order as i32), 0.0);
        for p in &analog {
            gain /= fs2 - p;
        }

        let digital: Vec<Complex64> = analog.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
        let mut sections = pair_poles(&digital)
            .into_iter()
            .map(|(a1, a2)| [1.0, 0.0, -1.0, a1, a2])
            .collect::<Vec<Biquad>>();
        for c in &mut sections[0][..3] {
            *c *= gain.re;
        }

        Ok(Bandpass {
            order,
            sections,
            sample_rate,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Edge padding used by [`Bandpass::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.order + 1)
    }

    /// Minimum signal length accepted by [`Bandpass::filtfilt`] (exclusive).
    pub fn min_len(&self) -> usize {
        3 * self.order * 3
    }

    /// Complex response of one forward pass at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sample_rate);
        let z_inv2 = z_inv * z_inv;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s[0] + s[1] * z_inv + s[2] * z_inv2;
            let den = 1.0 + s[3] * z_inv + s[4] * z_inv2;
            acc * num / den
        })
    }

    /// Steady-state section states for a unit-step input.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|&[b0, b1, b2, a1, a2]| {
                let g = (b0 + b1 + b2) / (1.0 + a1 + a2);
                let zi = [scale * (g - b0), scale * (b2 - a2 * g)];
                scale *= g;
                zi
            })
            .collect()
    }

    /// Causal cascade filter (transposed direct form II), in place.
    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for v in x.iter_mut() {
            let mut s = *v;
            for (&[b0, b1, b2, a1, a2], z) in self.sections.iter().zip(state.iter_mut()) {
                let y = b0 * s + z[0];
                z[0] = b1 * s - a1 * y + z[1];
                z[1] = b2 * s - a2 * y;
                s = y;
            }
            *v = s;
        }
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Zero-phase filtering: odd-reflection padding of [`Bandpass::pad_len`]
    /// samples at each end, a forward pass and a backward pass, each started
    /// from the step steady state scaled by the first sample it sees.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= self.min_len() {
            return Err(Error::InsufficientSamples {
                required: self.min_len(),
                actual: n,
            });
        }
        let pad = self.pad_len();
        let (first, last) = (x[0], x[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();

        let x0 = ext[0];
        self.run(&mut ext, scaled(x0));
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, scaled(y0));
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Group conjugate pole pairs (and leftover real poles) into
/// `(a1, a2)` denominators.
fn pair_poles(poles: &[Complex64]) -> Vec<(f64, f64)> {
    const IMAG_TOL: f64 = 1e-10;
    let mut out = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > IMAG_TOL {
            out.push((-2.0 * p.re, p.norm_sqr()));
        } else if p.im.abs() <= IMAG_TOL {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    for pair in reals.chunks(2) {
        match *pair {
            [r1, r2] => out.push((-(r1 + r2), r1 * r2)),
            [r] => out.push((-r, 0.0)),
            _ => unreachable!(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emg_band() -> Bandpass {
        Bandpass::design(4, 20.0, 450.0, 2000.0).unwrap()
    }

    #[test]
    fn fourth_order_band_has_four_sections() {
        let f = emg_band();
        assert_eq!(f.sections().len(), 4);
        assert_eq!(f.pad_len(), 27);
    }

    #[test]
    fn response_is_unity_at_band_centre_and_half_power_at_edges() {
        let f = emg_band();
        // Geometric centre of the prewarped band maps to unit gain.
        let fs2: f64 = 4000.0;
        let w0 = ((fs2 * (PI * 20.0 / 2000.0).tan()) * (fs2 * (PI * 450.0 / 2000.0).tan())).sqrt();
        let f0 = (w0 / fs2).atan() * 2000.0 / PI;
        assert!((f.response(f0).norm() - 1.0).abs() < 1e-9);
        for edge in [20.0, 450.0] {
            assert!((f.response(edge).norm_sqr() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn poles_are_inside_unit_circle() {
        for &[_, _, _, a1, a2] in emg_band().sections() {
            // For a conjugate pair, |p|^2 = a2; real-pair case is covered by
            // the Jury conditions below.
            assert!(a2 < 1.0 && a2.abs() < 1.0);
            assert!(1.0 + a1 + a2 > 0.0 && 1.0 - a1 + a2 > 0.0);
        }
    }

    #[test]
    fn odd_order_design_is_stable() {
        let f = Bandpass::design(3, 10.0, 300.0, 1000.0).unwrap();
        assert_eq!(f.sections().len(), 3);
        assert!((f.response(10.0).norm_sqr() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_band() {
        assert!(Bandpass::design(4, 450.0, 20.0, 2000.0).is_err());
        assert!(Bandpass::design(4, 20.0, 1000.0, 2000.0).is_err());
        assert!(Bandpass::design(0, 20.0, 450.0, 2000.0).is_err());
    }

    #[test]
    fn steady_state_start_suppresses_step_transient() {
        // A constant input sits at DC where the bandpass gain is zero; with the
        // steady-state start the zero-phase output stays at zero.
        let f = emg_band();
        let y = f.filtfilt(&vec![3.0; 500]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-9), "max {:?}", y.iter().cloned().fold(0.0, f64::max));
    }
}
