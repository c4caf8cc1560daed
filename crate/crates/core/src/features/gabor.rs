//! Gabor wavelet bank and jet extraction.
//!
//! Kernel `(ν, μ)` has wave vector `k = k_ν (cos φ_μ, sin φ_μ)` with
//! `k_ν = k_max · f^ν` and `φ_μ = μπ/n_orientations`:
//!
//! `ψ(x) = (k²/σ²) exp(-k²|x|²/(2σ²)) (exp(i k·x) - β)`
//!
//! `β` is chosen so the sampled kernel sums to exactly zero, then the kernel
//! is scaled to unit energy. Jets are the response magnitudes, scale-major.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::GrayImage;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GaborError {
    #[error("point ({x:.2}, {y:.2}) lies outside the {width}x{height} image")]
    OutsideImage {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("invalid Gabor bank: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborBankSpec {
    pub n_orientations: usize,
    pub n_scales: usize,
    /// Peak frequency of scale 0, radians per pixel.
    pub k_max: f64,
    /// Ratio between the peak frequencies of consecutive scales.
    pub k_step: f64,
    /// Envelope width in units of the wavelength (`σ`).
    pub sigma: f64,
    /// Half-width of the sampled kernel support in pixels.
    pub patch_radius: usize,
}

impl Default for GaborBankSpec {
    fn default() -> Self {
        let sigma = 2.0 * PI;
        let k_step = std::f64::consts::FRAC_1_SQRT_2;
        let k_max = PI / 2.0;
        let k_min = k_max * k_step.powi(4);
        Self {
            n_orientations: 8,
            n_scales: 5,
            k_max,
            k_step,
            sigma,
            patch_radius: (3.0 * sigma / k_min).ceil() as usize,
        }
    }
}

impl GaborBankSpec {
    pub fn jet_len(&self) -> usize {
        self.n_orientations * self.n_scales
    }

    pub fn validate(&self) -> Result<(), GaborError> {
        let bad = |m: &str| Err(GaborError::InvalidSpec(m.to_string()));
        if self.n_orientations == 0 || self.n_scales == 0 {
            return bad("need at least one orientation and one scale");
        }
        if !(self.k_max.is_finite() && self.k_max > 0.0 && self.k_max <= PI) {
            return bad("k_max must lie in (0, π]");
        }
        if !(self.k_step.is_finite() && self.k_step > 0.0 && self.k_step < 1.0) {
            return bad("k_step must lie in (0, 1)");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if self.patch_radius == 0 || self.patch_radius > 512 {
            return bad("patch_radius must lie in 1..=512");
        }
        Ok(())
    }

    pub fn frequency(&self, scale: usize) -> f64 {
        self.k_max * self.k_step.powi(scale as i32)
    }

    pub fn orientation(&self, orientation: usize) -> f64 {
        orientation as f64 * PI / self.n_orientations as f64
    }

    pub fn wave_vector(&self, scale: usize, orientation: usize) -> [f64; 2] {
        let k = self.frequency(scale);
        let phi = self.orientation(orientation);
        [k * phi.cos(), k * phi.sin()]
    }

    /// Jet index of kernel `(scale, orientation)`.
    pub fn index(&self, scale: usize, orientation: usize) -> usize {
        scale * self.n_orientations + orientation
    }

    /// Jet permutation relating an image to its left-right mirror:
    /// `mirror_jet[i] == jet[mirror_permutation()[i]]`. Orientation `μ`
    /// maps to `(n - μ) mod n`.
    pub fn mirror_permutation(&self) -> Vec<usize> {
        let n = self.n_orientations;
        (0..self.n_scales)
            .flat_map(|s| (0..n).map(move |m| s * n + (n - m) % n))
            .collect()
    }
}

pub fn mirror_jet(spec: &GaborBankSpec, jet: &[f64]) -> Vec<f64> {
    spec.mirror_permutation()
        .into_iter()
        .map(|i| jet[i])
        .collect()
}

/// Sampled kernels on a `(2R+1)²` grid, row-major with `dy` outer.
#[derive(Debug, Clone)]
pub struct GaborBank {
    pub spec: GaborBankSpec,
    kernels: Vec<Vec<Complex64>>,
}

impl GaborBank {
    pub fn new(spec: GaborBankSpec) -> Result<Self, GaborError> {
        spec.validate()?;
        let r = spec.patch_radius as i64;
        let mut kernels = Vec::with_capacity(spec.jet_len());
        for s in 0..spec.n_scales {
            for o in 0..spec.n_orientations {
                let [kx, ky] = spec.wave_vector(s, o);
                let k2 = kx * kx + ky * ky;
                let s2 = spec.sigma * spec.sigma;
                let mut envelope = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
                let mut wave = Vec::with_capacity(envelope.capacity());
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (x, y) = (dx as f64, dy as f64);
                        envelope.push(k2 / s2 * (-k2 * (x * x + y * y) / (2.0 * s2)).exp());
                        wave.push(Complex64::from_polar(1.0, kx * x + ky * y));
                    }
                }
                let g_sum: f64 = envelope.iter().sum();
                let beta: Complex64 = envelope
                    .iter()
                    .zip(&wave)
                    .map(|(g, w)| w * g)
                    .sum::<Complex64>()
                    / g_sum;
                let mut kernel: Vec<Complex64> = envelope
                    .iter()
                    .zip(&wave)
                    .map(|(g, w)| (w - beta) * g)
                    .collect();
                let energy: f64 = kernel.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                for c in kernel.iter_mut() {
                    *c /= energy;
                }
                kernels.push(kernel);
            }
        }
        Ok(Self { spec, kernels })
    }

    pub fn kernel(&self, scale: usize, orientation: usize) -> &[Complex64] {
        &self.kernels[self.spec.index(scale, orientation)]
    }

    /// Complex responses of all kernels at the pixel nearest to `point`,
    /// with zero padding outside the image.
    pub fn responses(
        &self,
        image: &GrayImage,
        point: [f64; 2],
    ) -> Result<Vec<Complex64>, GaborError> {
        let (px, py) = (point[0].round(), point[1].round());
        if !(px >= 0.0 && py >= 0.0 && px < image.width as f64 && py < image.height as f64) {
            return Err(GaborError::OutsideImage {
                x: point[0],
                y: point[1],
                width: image.width,
                height: image.height,
            });
        }
        let (px, py) = (px as i64, py as i64);
        let r = self.spec.patch_radius as i64;
        let side = (2 * r + 1) as usize;
        // gather the patch once; every kernel reads the same samples
        let mut patch = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                patch.push(image.get_padded(px + dx, py + dy));
            }
        }
        Ok(self
            .kernels
            .iter()
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (v, c) in patch.iter().zip(k) {
                    re += v * c.re;
                    im += v * c.im;
                }
                Complex64::new(re, im)
            })
            .collect())
    }

    /// Gabor magnitudes at `point`, scale-major.
    pub fn jet(&self, image: &GrayImage, point: [f64; 2]) -> Result<Vec<f64>, GaborError> {
        Ok(self
            .responses(image, point)?
            .iter()
            .map(|c| c.norm())
            .collect())
    }
}
