//! Amplitude-residual objectives and their analytic gradients.
//!
//! `l(x) = sum_l || y_l - |H_l x| ||^2`. For the unconstrained problem the
//! gradient is taken with respect to the real and imaginary parts of `x` and
//! packed as the complex field `g = dl/dRe x + i dl/dIm x`,
//! `g = -2 sum_l H_l^* [ (y_l - |H_l x|) H_l x / |H_l x| ]`,
//! so that `l(x + e d) = l(x) + e Re<g, d> + O(e^2)`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::lbfgs::Objective;
use crate::error::{Error, Result};
use crate::fresnel::{pad_edge_adjoint, FresnelModel, PaddingSpec};
use crate::geometry::ScanGeometry;
use crate::image::{ComplexField, RealImage};

/// Below this detector amplitude the phase factor `g/|g|` is taken as 0.
pub const MODULUS_GUARD: f64 = 1e-12;

/// Objective data for one view: a forward model plus the measured root
/// intensities, one image per distance.
#[derive(Clone, Copy)]
pub struct AmplitudeProblem<'a> {
    model: &'a FresnelModel,
    data: &'a [RealImage],
}

impl<'a> AmplitudeProblem<'a> {
    pub fn new(model: &'a FresnelModel, data: &'a [RealImage]) -> Result<Self> {
        if data.len() != model.n_distances() {
            return Err(Error::DimensionMismatch(format!(
                "{} images for {} distances",
                data.len(),
                model.n_distances()
            )));
        }
        for (l, y) in data.iter().enumerate() {
            model.check_dims(y.dims(), &format!("image at distance {l}"))?;
            if let Some(index) = y.first_non_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(Self { model, data })
    }

    pub fn model(&self) -> &FresnelModel {
        self.model
    }

    pub fn data(&self) -> &[RealImage] {
        self.data
    }

    pub fn pixels(&self) -> usize {
        let (r, c) = self.model.dims();
        r * c
    }

    /// Objective and optionally the complex-packed gradient at `x`.
    pub(crate) fn eval(&self, x: &[Complex64], grad: Option<&mut [Complex64]>) -> f64 {
        let model = self.model;
        let (rows, cols) = model.dims();
        let padding = model.padding();
        let (prows, pcols) = padding.padded_dims(rows, cols);
        let spectrum = model.padded_spectrum(x);
        let want_grad = grad.is_some();
        let mut acc = if want_grad {
            vec![Complex64::new(0.0, 0.0); prows * pcols]
        } else {
            Vec::new()
        };
        let mut total = 0.0;
        for (l, y) in self.data.iter().enumerate() {
            let g = model.detector_field(&spectrum, l);
            let mut weighted = if want_grad {
                vec![Complex64::new(0.0, 0.0); prows * pcols]
            } else {
                Vec::new()
            };
            for (i, (gv, &yv)) in g.iter().zip(y.as_slice()).enumerate() {
                let m = gv.norm();
                let r = yv - m;
                total += r * r;
                if want_grad && m >= MODULUS_GUARD {
                    let (row, col) = (i / cols, i % cols);
                    weighted[(row + padding.pad_rows) * pcols + col + padding.pad_cols] = gv * (-r / m);
                }
            }
            if want_grad {
                model.fft().forward(&mut weighted);
                for ((a, w), h) in acc.iter_mut().zip(&weighted).zip(model.transfers()[l].samples()) {
                    *a += w * h.conj();
                }
            }
        }
        if let Some(grad) = grad {
            model.fft().inverse(&mut acc);
            let folded = pad_edge_adjoint(&acc, rows, cols, padding);
            for (gv, f) in grad.iter_mut().zip(folded) {
                *gv = 2.0 * f;
            }
        }
        total
    }

    pub fn objective(&self, x: &ComplexField) -> Result<f64> {
        self.model.check_dims(x.dims(), "transmission field")?;
        Ok(self.eval(x.as_slice(), None))
    }

    pub fn gradient(&self, x: &ComplexField) -> Result<(f64, ComplexField)> {
        self.model.check_dims(x.dims(), "transmission field")?;
        let mut g = vec![Complex64::new(0.0, 0.0); x.len()];
        let f = self.eval(x.as_slice(), Some(&mut g));
        Ok((f, ComplexField::from_raw(x.rows(), x.cols(), g)))
    }

    /// Objective at `x = z^(alpha + i gamma)`.
    pub fn constrained_objective(&self, z: &RealImage, alpha: f64, gamma: f64) -> Result<f64> {
        self.model.check_dims(z.dims(), "z field")?;
        let x = crate::fresnel::constrained_transmission(z, alpha, gamma)?;
        Ok(self.eval(x.as_slice(), None))
    }

    /// `dl/dz = Re(conj(g) (alpha + i gamma) z^(alpha + i gamma - 1))`.
    pub fn constrained_gradient(&self, z: &RealImage, alpha: f64, gamma: f64) -> Result<(f64, RealImage)> {
        self.model.check_dims(z.dims(), "z field")?;
        let x = crate::fresnel::constrained_transmission(z, alpha, gamma)?;
        let mut g = vec![Complex64::new(0.0, 0.0); x.len()];
        let f = self.eval(x.as_slice(), Some(&mut g));
        let c = Complex64::new(alpha, gamma);
        let dz = chain_constrained(&g, x.as_slice(), z.as_slice(), c);
        Ok((f, RealImage::from_raw(z.rows(), z.cols(), dz)))
    }
}

fn chain_constrained(g: &[Complex64], x: &[Complex64], z: &[f64], c: Complex64) -> Vec<f64> {
    g.iter()
        .zip(x)
        .zip(z)
        .map(|((gv, xv), &zv)| (gv.conj() * c * xv / zv).re)
        .collect()
}

/// U-NLPR problem over `x` packed as interleaved `(re, im)` pairs.
pub struct UnconstrainedObjective<'a> {
    pub problem: AmplitudeProblem<'a>,
}

impl Objective for UnconstrainedObjective<'_> {
    fn dim(&self) -> usize {
        2 * self.problem.pixels()
    }

    fn evaluate(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let x: Vec<Complex64> = v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let mut g = vec![Complex64::new(0.0, 0.0); x.len()];
        let f = self.problem.eval(&x, Some(&mut g));
        for (out, gv) in grad.chunks_exact_mut(2).zip(&g) {
            out[0] = gv.re;
            out[1] = gv.im;
        }
        f
    }
}

/// C-NLPR problem over `z > 0`.
pub struct ConstrainedObjective<'a> {
    pub problem: AmplitudeProblem<'a>,
    pub alpha: f64,
    pub gamma: f64,
}

impl Objective for ConstrainedObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.pixels()
    }

    fn feasible(&self, z: &[f64]) -> bool {
        z.iter().all(|&v| v > 0.0)
    }

    fn evaluate(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        let c = Complex64::new(self.alpha, self.gamma);
        let x: Vec<Complex64> = z.iter().map(|&v| (c * v.ln()).exp()).collect();
        let mut g = vec![Complex64::new(0.0, 0.0); x.len()];
        let f = self.problem.eval(&x, Some(&mut g));
        grad.copy_from_slice(&chain_constrained(&g, &x, z, c));
        f
    }
}

/// Objective summed over views; `y[view][distance]`.
pub fn objective_unconstrained(
    x: &[ComplexField],
    y: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<f64> {
    check_views(x.len(), y.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    let parts = x
        .par_iter()
        .zip(y.par_iter())
        .map(|(xv, yv)| AmplitudeProblem::new(&model, yv)?.objective(xv))
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

pub fn gradient_unconstrained(
    x: &[ComplexField],
    y: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<Vec<ComplexField>> {
    check_views(x.len(), y.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    x.par_iter()
        .zip(y.par_iter())
        .map(|(xv, yv)| Ok(AmplitudeProblem::new(&model, yv)?.gradient(xv)?.1))
        .collect()
}

pub fn objective_constrained(
    z: &[RealImage],
    alpha: f64,
    gamma: f64,
    y: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<f64> {
    check_views(z.len(), y.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    let parts = z
        .par_iter()
        .zip(y.par_iter())
        .map(|(zv, yv)| AmplitudeProblem::new(&model, yv)?.constrained_objective(zv, alpha, gamma))
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

pub fn gradient_constrained(
    z: &[RealImage],
    alpha: f64,
    gamma: f64,
    y: &[Vec<RealImage>],
    geometry: &ScanGeometry,
    padding: PaddingSpec,
) -> Result<Vec<RealImage>> {
    check_views(z.len(), y.len())?;
    let model = FresnelModel::new(geometry, padding)?;
    z.par_iter()
        .zip(y.par_iter())
        .map(|(zv, yv)| Ok(AmplitudeProblem::new(&model, yv)?.constrained_gradient(zv, alpha, gamma)?.1))
        .collect()
}

fn check_views(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{a} fields for {b} measured views")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wavelength_from_energy_ev;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geometry() -> ScanGeometry {
        ScanGeometry::new(
            wavelength_from_energy_ev(20_000.0),
            1.29e-6,
            vec![0.01, 0.2, 0.4],
            16,
            16,
            vec![0.0],
        )
        .unwrap()
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.7..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn measured(model: &FresnelModel, x: &[Complex64], rows: usize, cols: usize) -> Vec<RealImage> {
        model.forward(&ComplexField::new(rows, cols, x.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let g = geometry();
        let model = FresnelModel::new(&g, PaddingSpec::for_geometry(&g)).unwrap();
        let n = 16 * 16;
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = random_field(&mut rng, n);
            let y = measured(&model, &truth, 16, 16);
            let problem = AmplitudeProblem::new(&model, &y).unwrap();
            let x = random_field(&mut rng, n);
            let d = random_field(&mut rng, n);
            let mut grad = vec![Complex64::new(0.0, 0.0); n];
            problem.eval(&x, Some(&mut grad));
            let analytic: f64 = grad.iter().zip(&d).map(|(a, b)| (a.conj() * b).re).sum();
            let eps = 1e-6;
            let shifted = |s: f64| -> f64 {
                let xs: Vec<Complex64> = x.iter().zip(&d).map(|(a, b)| a + b * s).collect();
                problem.eval(&xs, None)
            };
            let numeric = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            assert!(rel < 1e-4, "seed {seed}: analytic {analytic} numeric {numeric}");
        }
    }

    #[test]
    fn constrained_gradient_matches_central_differences() {
        let g = geometry();
        let model = FresnelModel::new(&g, PaddingSpec::for_geometry(&g)).unwrap();
        let (alpha, gamma) = (0.01733, 6.069);
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let zt = RealImage::from_fn(16, 16, |_, _| rng.random_range(0.85..1.0));
            let xt = crate::fresnel::constrained_transmission(&zt, alpha, gamma).unwrap();
            let y = model.forward(&xt).unwrap();
            let problem = AmplitudeProblem::new(&model, &y).unwrap();
            let z = RealImage::from_fn(16, 16, |_, _| rng.random_range(0.85..1.0));
            let d = RealImage::from_fn(16, 16, |_, _| rng.random_range(-1.0..1.0));
            let (_, grad) = problem.constrained_gradient(&z, alpha, gamma).unwrap();
            let analytic: f64 = grad.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a * b).sum();
            let eps = 1e-7;
            let shifted = |s: f64| {
                let zs = RealImage::from_fn(16, 16, |r, c| z.get(r, c) + s * d.get(r, c));
                problem.constrained_objective(&zs, alpha, gamma).unwrap()
            };
            let numeric = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            assert!(rel < 1e-4, "seed {seed}: analytic {analytic} numeric {numeric}");
        }
    }

    #[test]
    fn zero_at_truth() {
        let g = geometry();
        let model = FresnelModel::new(&g, PaddingSpec::for_geometry(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = random_field(&mut rng, 256);
        let y = measured(&model, &truth, 16, 16);
        let problem = AmplitudeProblem::new(&model, &y).unwrap();
        let mut grad = vec![Complex64::new(0.0, 0.0); 256];
        let f = problem.eval(&truth, Some(&mut grad));
        assert!(f < 1e-24);
        assert!(grad.iter().all(|v| v.norm() < 1e-10));
    }

    #[test]
    fn global_phase_gauge() {
        let g = geometry();
        let model = FresnelModel::new(&g, PaddingSpec::for_geometry(&g)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = measured(&model, &random_field(&mut rng, 256), 16, 16);
        let problem = AmplitudeProblem::new(&model, &y).unwrap();
        let x = random_field(&mut rng, 256);
        let rotated: Vec<Complex64> = x.iter().map(|v| v * Complex64::from_polar(1.0, 0.83)).collect();
        let a = problem.eval(&x, None);
        let b = problem.eval(&rotated, None);
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn zero_field_has_zero_gradient() {
        let g = geometry();
        let model = FresnelModel::new(&g, PaddingSpec::for_geometry(&g)).unwrap();
        let y = vec![RealImage::filled(16, 16, 1.0); 3];
        let problem = AmplitudeProblem::new(&model, &y).unwrap();
        let mut grad = vec![Complex64::new(1.0, 1.0); 256];
        let f = problem.eval(&vec![Complex64::new(0.0, 0.0); 256], Some(&mut grad));
        assert!((f - 3.0 * 256.0).abs() < 1e-9);
        assert!(grad.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn multi_view_wrappers_agree_with_single_view() {
        let g = geometry();
        let padding = PaddingSpec::for_geometry(&g);
        let model = FresnelModel::new(&g, padding).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<ComplexField> = (0..3)
            .map(|_| ComplexField::new(16, 16, random_field(&mut rng, 256)).unwrap())
            .collect();
        let ys: Vec<Vec<RealImage>> = (0..3)
            .map(|_| measured(&model, &random_field(&mut rng, 256), 16, 16))
            .collect();
        let total = objective_unconstrained(&xs, &ys, &g, padding).unwrap();
        let manual: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| AmplitudeProblem::new(&model, y).unwrap().objective(x).unwrap())
            .sum();
        assert!((total - manual).abs() <= 1e-12 * manual);
        let grads = gradient_unconstrained(&xs, &ys, &g, padding).unwrap();
        assert_eq!(grads.len(), 3);
        assert!(objective_unconstrained(&xs[..2], &ys, &g, padding).is_err());
        let z = vec![RealImage::filled(16, 16, -1.0)];
        assert!(matches!(
            objective_constrained(&z, 1.0, 1.0, &ys[..1], &g, padding),
            Err(Error::Domain { .. })
        ));
    }
}
