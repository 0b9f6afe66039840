//! Double half-sided Fourier transform of response planes and peak picking.
//!
//! `S(w1, w3) = sum_{t1, t3} c(t1) c(t3) W(t1) W(t3) R(t1, t3) e^{-i w1 t1} e^{+i w3 t3} dt^2`
//! with trapezoid end weights `c` and an optional taper `W`.
//!
//! Sampled frequencies repeat every `f_s = 2 pi / (kappa dt)` cm^-1, which
//! is usually far below the optical transition frequencies. Each axis is
//! therefore labelled on one alias band `[origin, origin + f_s)`; the matrix
//! is rotated so that both axes ascend.

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::response::ResponseGrid;
use crate::units::ANGULAR_PER_WAVENUMBER;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    None,
    /// Quarter-period cosine, 1 at t = 0 and 0 at the last sample.
    #[default]
    Cosine,
    /// `exp(-t / tau_fs)`.
    Exponential { tau_fs: f64 },
}

impl Window {
    fn weight(&self, t: f64, t_max: f64) -> f64 {
        match *self {
            Window::None => 1.0,
            Window::Cosine => {
                if t_max > 0.0 {
                    (std::f64::consts::FRAC_PI_2 * t / t_max).cos()
                } else {
                    1.0
                }
            }
            Window::Exponential { tau_fs } => (-t / tau_fs).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    pub window: Window,
    pub zero_pad: usize,
    /// Lower edge (cm^-1) of the alias band used to label both axes.
    pub band_origin: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            window: Window::Cosine,
            zero_pad: 4,
            band_origin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    /// cm^-1, ascending.
    pub omega1: Vec<f64>,
    /// cm^-1, ascending.
    pub omega3: Vec<f64>,
    pub t2_fs: f64,
    /// Rows follow `omega1`, columns `omega3`.
    pub values: DMatrix<C64>,
    pub window: Window,
    pub zero_pad: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega1: f64,
    pub omega3: f64,
    /// Signed real part at the peak.
    pub height: f64,
}

/// Spacing of a uniform axis starting at zero.
fn uniform_step(axis: &[f64]) -> Result<f64> {
    if axis.len() < 2 {
        return Err(Error::invalid("grid", "need at least two samples per axis"));
    }
    if axis[0] != 0.0 {
        return Err(Error::NonUniformAxis);
    }
    let dt = axis[1] - axis[0];
    if dt <= 0.0 {
        return Err(Error::NonUniformAxis);
    }
    for (k, &t) in axis.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * dt.max(1.0) * (k as f64 + 1.0) {
            return Err(Error::NonUniformAxis);
        }
    }
    Ok(dt)
}

/// Sampling frequency (cm^-1) of a time step in fs.
pub fn alias_period(dt_fs: f64) -> f64 {
    2.0 * std::f64::consts::PI / (ANGULAR_PER_WAVENUMBER * dt_fs)
}

/// Labels for `n` DFT bins on the band `[origin, origin + f_s)`, together
/// with the bin index that lands first once the axis is sorted.
fn band_axis(n: usize, period: f64, origin: f64) -> (Vec<f64>, usize) {
    let step = period / n as f64;
    let label = |k: usize| {
        let w = k as f64 * step;
        w + ((origin - w) / period).ceil() * period
    };
    let start = (0..n)
        .min_by(|&a, &b| label(a).total_cmp(&label(b)))
        .unwrap_or(0);
    let axis = (0..n).map(|i| label((start + i) % n)).collect();
    (axis, start)
}

pub fn transform(grid: &ResponseGrid, options: &TransformOptions) -> Result<Spectrum2D> {
    let dt1 = uniform_step(&grid.t1_fs)?;
    let dt3 = uniform_step(&grid.t3_fs)?;
    if (dt1 - dt3).abs() > 1e-12 * dt1 {
        return Err(Error::invalid("grid", "t1 and t3 must share one step"));
    }
    if options.zero_pad == 0 {
        return Err(Error::invalid("grid.zero_pad", "must be >= 1"));
    }
    if let Window::Exponential { tau_fs } = options.window {
        if tau_fs.is_nan() || tau_fs <= 0.0 {
            return Err(Error::invalid("grid.window.tau_fs", "must be > 0"));
        }
    }
    let (n1, n3) = grid.values.shape();
    let (p1, p3) = (n1 * options.zero_pad, n3 * options.zero_pad);
    let weights = |axis: &[f64]| -> Vec<f64> {
        let t_max = *axis.last().unwrap();
        let last = axis.len() - 1;
        axis.iter()
            .enumerate()
            .map(|(k, &t)| {
                let end = if k == 0 || k == last { 0.5 } else { 1.0 };
                end * options.window.weight(t, t_max)
            })
            .collect()
    };
    let (w1, w3) = (weights(&grid.t1_fs), weights(&grid.t3_fs));

    let mut buf = vec![C64::new(0.0, 0.0); p1 * p3];
    // row-major (i1, i3) in a p1 x p3 buffer
    for i1 in 0..n1 {
        for i3 in 0..n3 {
            buf[i1 * p3 + i3] = grid.values[(i1, i3)] * (w1[i1] * w3[i3] * dt1 * dt3);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    // e^{+i w3 t3}: unnormalized inverse transform along each row
    let inv = planner.plan_fft_inverse(p3);
    for row in buf.chunks_exact_mut(p3) {
        inv.process(row);
    }
    // e^{-i w1 t1}: forward transform along each column
    let fwd = planner.plan_fft_forward(p1);
    let mut col = vec![C64::new(0.0, 0.0); p1];
    for j in 0..p3 {
        for i in 0..p1 {
            col[i] = buf[i * p3 + j];
        }
        fwd.process(&mut col);
        for i in 0..p1 {
            buf[i * p3 + j] = col[i];
        }
    }
    let period = alias_period(dt1);
    let (omega1, s1) = band_axis(p1, period, options.band_origin);
    let (omega3, s3) = band_axis(p3, period, options.band_origin);
    let values = DMatrix::from_fn(p1, p3, |i, j| buf[((i + s1) % p1) * p3 + (j + s3) % p3]);
    Ok(Spectrum2D {
        omega1,
        omega3,
        t2_fs: grid.t2_fs,
        values,
        window: options.window,
        zero_pad: options.zero_pad,
    })
}

impl Spectrum2D {
    pub fn step(&self) -> f64 {
        self.omega1[1] - self.omega1[0]
    }

    fn nearest(axis: &[f64], w: f64) -> usize {
        let k = axis.partition_point(|&v| v < w);
        match k {
            0 => 0,
            k if k >= axis.len() => axis.len() - 1,
            k if (axis[k] - w).abs() < (w - axis[k - 1]).abs() => k,
            k => k - 1,
        }
    }

    /// Bin indices closest to `(omega1, omega3)`.
    pub fn nearest_bin(&self, omega1: f64, omega3: f64) -> (usize, usize) {
        (Self::nearest(&self.omega1, omega1), Self::nearest(&self.omega3, omega3))
    }

    pub fn value_at(&self, omega1: f64, omega3: f64) -> C64 {
        let (i, j) = self.nearest_bin(omega1, omega3);
        self.values[(i, j)]
    }

    /// Real part with the largest magnitude within `radius` bins of a point.
    pub fn extremum_near(&self, omega1: f64, omega3: f64, radius: usize) -> f64 {
        let (i0, j0) = self.nearest_bin(omega1, omega3);
        let (n1, n3) = self.values.shape();
        let mut best = 0.0f64;
        for i in i0.saturating_sub(radius)..=(i0 + radius).min(n1 - 1) {
            for j in j0.saturating_sub(radius)..=(j0 + radius).min(n3 - 1) {
                let v = self.values[(i, j)].re;
                if v.abs() > best.abs() {
                    best = v;
                }
            }
        }
        best
    }
}

/// Strict local maxima of `|Re S|` over 3x3 neighbourhoods, sorted by
/// magnitude. Peaks below `rel_threshold` times the global maximum are
/// dropped; at most `max_peaks` are returned.
pub fn extract_peaks(spec: &Spectrum2D, max_peaks: usize, rel_threshold: f64) -> Vec<Peak> {
    let (n1, n3) = spec.values.shape();
    let mag = |i: usize, j: usize| spec.values[(i, j)].re.abs();
    let global = spec.values.iter().fold(0.0f64, |m, v| m.max(v.re.abs()));
    if global == 0.0 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    for i in 0..n1 {
        for j in 0..n3 {
            let v = mag(i, j);
            if v < rel_threshold * global || v == 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= n1 as i64 || b >= n3 as i64 {
                        continue;
                    }
                    if mag(a as usize, b as usize) >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push(Peak {
                    omega1: spec.omega1[i],
                    omega3: spec.omega3[j],
                    height: spec.values[(i, j)].re,
                });
            }
        }
    }
    peaks.sort_by(|a, b| b.height.abs().total_cmp(&a.height.abs()));
    peaks.truncate(max_peaks);
    peaks
}
