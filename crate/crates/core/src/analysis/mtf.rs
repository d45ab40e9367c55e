//! Edge-based MTF of a disc: radial edge-spread function binned at 0.1 px,
//! differentiated to a line-spread function, Fourier magnitude at DC = 1.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::RealImage;

pub const ESF_BIN_PX: f64 = 0.1;
const MIN_RADIUS_PX: f64 = 3.0;
const MAX_HALF_WIDTH_PX: f64 = 12.0;
const MIN_FFT_LEN: usize = 2048;
const MAX_FREQUENCY: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct MtfCurve {
    /// Cycles per pixel.
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl MtfCurve {
    /// Linear interpolation; clamps outside the sampled range.
    pub fn value_at(&self, f: f64) -> f64 {
        let fr = &self.frequencies;
        if f <= fr[0] {
            return self.values[0];
        }
        match fr.iter().position(|&x| x >= f) {
            Some(i) => {
                let t = (f - fr[i - 1]) / (fr[i] - fr[i - 1]);
                self.values[i - 1] * (1.0 - t) + self.values[i] * t
            }
            None => *self.values.last().unwrap(),
        }
    }

    /// Two columns: `frequency_cycles_per_px modulation`.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# frequency_cycles_per_px modulation\n");
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            s.push_str(&format!("{f:.6} {v:.6}\n"));
        }
        s
    }
}

/// `center` is `(row, col)` in pixel coordinates (pixel centres at integers).
pub fn mtf_from_disc(image: &RealImage, center: (f64, f64), radius: f64) -> Result<MtfCurve> {
    if !(radius >= MIN_RADIUS_PX) {
        return Err(Error::InvalidParameter(format!(
            "disc radius {radius} px is below {MIN_RADIUS_PX} px"
        )));
    }
    let (rows, cols) = image.dims();
    let (cr, cc) = center;
    let gap = [cr, cc, rows as f64 - 1.0 - cr, cols as f64 - 1.0 - cc]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        - radius;
    let half_width = gap.min(radius).min(MAX_HALF_WIDTH_PX);
    if !(half_width >= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "disc at {center:?} with radius {radius} px is not interior to a {rows}x{cols} image"
        )));
    }

    let n_bins = (2.0 * half_width / ESF_BIN_PX).round() as usize;
    let mut sums = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for r in 0..rows {
        for c in 0..cols {
            let d = (r as f64 - cr).hypot(c as f64 - cc) - radius;
            let b = ((d + half_width) / ESF_BIN_PX).floor();
            if b >= 0.0 && (b as usize) < n_bins {
                sums[b as usize] += image.get(r, c);
                counts[b as usize] += 1;
            }
        }
    }
    let esf = fill_empty_bins(&sums, &counts)?;

    let mut lsf: Vec<Complex64> = esf.windows(2).map(|w| Complex64::new(w[1] - w[0], 0.0)).collect();
    let len = lsf.len().max(MIN_FFT_LEN).next_power_of_two();
    lsf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut lsf);
    let dc = lsf[0].norm();
    if !(dc > 0.0) {
        return Err(Error::Numerical("disc edge has no contrast".into()));
    }
    let df = 1.0 / (len as f64 * ESF_BIN_PX);
    let n_out = ((MAX_FREQUENCY / df).floor() as usize + 1).min(len / 2 + 1);
    Ok(MtfCurve {
        frequencies: (0..n_out).map(|k| k as f64 * df).collect(),
        values: lsf[..n_out].iter().map(|v| v.norm() / dc).collect(),
    })
}

fn fill_empty_bins(sums: &[f64], counts: &[usize]) -> Result<Vec<f64>> {
    let known: Vec<usize> = (0..sums.len()).filter(|&i| counts[i] > 0).collect();
    if known.len() < 2 {
        return Err(Error::InvalidParameter("too few pixels near the disc edge".into()));
    }
    let mean = |i: usize| sums[i] / counts[i] as f64;
    let mut out = vec![0.0; sums.len()];
    let mut j = 0;
    for (i, o) in out.iter_mut().enumerate() {
        while j + 1 < known.len() && known[j + 1] <= i {
            j += 1;
        }
        *o = if i <= known[0] {
            mean(known[0])
        } else if j + 1 >= known.len() {
            mean(known[j])
        } else {
            let (a, b) = (known[j], known[j + 1]);
            let t = (i - a) as f64 / (b - a) as f64;
            mean(a) * (1.0 - t) + mean(b) * t
        };
    }
    Ok(out)
}
