use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{NoiseConfig, StochasticError};
use crate::waveform::Waveform;

/// Reusable spectral shaper for records of a fixed length.
#[derive(Clone)]
pub(crate) struct PinkShaper {
    fft: Arc<dyn Fft<f64>>,
    gains: Vec<f64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    amplitude: f64,
}

impl PinkShaper {
    pub(crate) fn new(n: usize, dt: f64, config: &NoiseConfig) -> Result<Self, StochasticError> {
        if n < 2 {
            return Err(StochasticError::InvalidInput(format!("need n >= 2, got {n}")));
        }
        if !(dt > 0.0) {
            return Err(StochasticError::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        config.validate()?;
        let df = 1.0 / (n as f64 * dt);
        if df > config.f_low {
            return Err(StochasticError::BandUnresolved {
                n,
                dt,
                f_low: config.f_low,
            });
        }
        // Amplitude gain per positive-frequency bin; index 0 (DC) stays zero.
        let gains = (0..=n / 2)
            .map(|k| {
                let f = k as f64 * df;
                if k == 0 || f > config.f_high {
                    0.0
                } else {
                    1.0 / f.max(config.f_low).sqrt()
                }
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            fft,
            gains,
            buf: vec![Complex64::default(); n],
            scratch,
            amplitude: config.pink_amplitude,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.buf.len()
    }

    /// Fills `out` with a fresh zero-mean record of RMS `amplitude`.
    pub(crate) fn fill<R: Rng>(&mut self, rng: &mut R, out: &mut Vec<f64>) {
        let n = self.buf.len();
        out.clear();
        if self.amplitude == 0.0 {
            out.resize(n, 0.0);
            return;
        }
        self.buf.fill(Complex64::default());
        for k in 1..=n / 2 {
            let g = self.gains[k];
            if g == 0.0 {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            if 2 * k == n {
                self.buf[k] = Complex64::new(g * re, 0.0);
            } else {
                let im: f64 = rng.sample(StandardNormal);
                let z = Complex64::new(g * re, g * im);
                self.buf[k] = z;
                self.buf[n - k] = z.conj();
            }
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        let mean = self.buf.iter().map(|z| z.re).sum::<f64>() / n as f64;
        out.extend(self.buf.iter().map(|z| z.re - mean));
        let rms = (out.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        if rms > 0.0 {
            let scale = self.amplitude / rms;
            out.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

/// One pink-noise record drawn from `rng`.
pub fn pink_noise_block<R: Rng>(
    n: usize,
    dt: f64,
    config: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<f64>, StochasticError> {
    let mut shaper = PinkShaper::new(n, dt, config)?;
    let mut out = Vec::with_capacity(n);
    shaper.fill(rng, &mut out);
    Ok(out)
}

/// Band-limited 1/f noise record seeded from `config.seed`.
///
/// The spectrum is white Gaussian shaped to amplitude `1/sqrt(f)` inside
/// `[f_low, f_high]`, held flat below `f_low` and cut above `f_high`, then
/// inverse-transformed and scaled to RMS `pink_amplitude`.
pub fn generate_pink_noise(n: usize, dt: f64, config: &NoiseConfig) -> Result<Waveform, StochasticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samples = pink_noise_block(n, dt, config, &mut rng)?;
    Ok(Waveform { dt, t0: 0.0, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> NoiseConfig {
        NoiseConfig {
            pink_amplitude: 5e-3,
            f_low: 1e3,
            f_high: 1e6,
            seed: 7,
            ..NoiseConfig::default()
        }
    }

    #[test]
    fn zero_amplitude_is_silent() {
        let c = NoiseConfig {
            pink_amplitude: 0.0,
            ..config()
        };
        let w = generate_pink_noise(1 << 14, 100e-9, &c).unwrap();
        assert!(w.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn seeded_and_normalized() {
        let a = generate_pink_noise(1 << 14, 100e-9, &config()).unwrap();
        let b = generate_pink_noise(1 << 14, 100e-9, &config()).unwrap();
        assert_eq!(a, b);
        let n = a.len() as f64;
        let mean = a.samples.iter().sum::<f64>() / n;
        let rms = (a.samples.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-15);
        assert!((rms - 5e-3).abs() < 0.05 * 5e-3);
        let other = generate_pink_noise(1 << 14, 100e-9, &NoiseConfig { seed: 8, ..config() }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn unresolved_band_rejected() {
        assert!(matches!(
            generate_pink_noise(1000, 100e-9, &config()),
            Err(StochasticError::BandUnresolved { .. })
        ));
    }
}
