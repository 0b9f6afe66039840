//! Harmonic bath: spectral densities, thermal factors and the frequency grid
//! shared by every downstream integral.
//!
//! Each bath line at frequency `omega` is stored with two weights, one per
//! direction of energy exchange:
//!
//! - `absorb = S(omega) dw (n + 1)` multiplies `exp(-i omega tau)`,
//! - `emit = S(omega) dw n` multiplies `exp(+i omega tau)`,
//!
//! so `absorb + emit = S coth(beta omega / 2)` and `absorb - emit = S`. Any
//! correlation of the position coordinate is then
//! `sum_k absorb_k exp(-i w_k tau) + emit_k exp(i w_k tau)`.

use std::path::{Path, PathBuf};

use gauss_quad::legendre::GaussLegendre;

use crate::units::{beta_from_kelvin, fs_to_scaled};
use crate::{Error, Result, C64};

/// Default number of Gauss-Legendre nodes.
pub const DEFAULT_QUADRATURE_POINTS: usize = 2000;
/// Default upper frequency limit in units of the cutoff.
pub const DEFAULT_OMEGA_MAX_OVER_CUTOFF: f64 = 30.0;
/// Lower bound on `omega_max / omega_c` accepted by validation.
pub const MIN_OMEGA_MAX_OVER_CUTOFF: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// `(lambda / omega_c) * omega * exp(-omega / omega_c)`.
    Ohmic { lambda: f64, omega_c: f64 },
    /// `(2 / pi) * lambda * omega * omega_c / (omega^2 + omega_c^2)`.
    Debye { lambda: f64, omega_c: f64 },
    /// Piecewise-linear table, zero outside `[omega[0], omega[last]]`.
    Tabulated { omega: Vec<f64>, values: Vec<f64> },
}

impl SpectralDensity {
    pub fn evaluate(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Ohmic { lambda, omega_c } => {
                lambda / omega_c * omega * (-omega / omega_c).exp()
            }
            SpectralDensity::Debye { lambda, omega_c } => {
                2.0 / std::f64::consts::PI * lambda * omega * omega_c
                    / (omega * omega + omega_c * omega_c)
            }
            SpectralDensity::Tabulated { omega: w, values } => interpolate(w, values, omega),
        }
    }

    /// Characteristic frequency used for default quadrature limits.
    pub fn cutoff(&self) -> Option<f64> {
        match self {
            SpectralDensity::Ohmic { omega_c, .. } | SpectralDensity::Debye { omega_c, .. } => {
                Some(*omega_c)
            }
            SpectralDensity::Tabulated { .. } => None,
        }
    }

    /// Multiply the density by `factor` (reorganization energy scales alike).
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SpectralDensity::Ohmic { lambda, omega_c } => SpectralDensity::Ohmic {
                lambda: lambda * factor,
                omega_c: *omega_c,
            },
            SpectralDensity::Debye { lambda, omega_c } => SpectralDensity::Debye {
                lambda: lambda * factor,
                omega_c: *omega_c,
            },
            SpectralDensity::Tabulated { omega, values } => SpectralDensity::Tabulated {
                omega: omega.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        }
    }

    /// Read a two-column whitespace-separated table. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn load_table(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_table(&text, path)
    }

    pub fn parse_table(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, reason: String| Error::Parse {
            path: PathBuf::from(origin),
            reason: format!("line {line}: {reason}"),
        };
        let mut omega = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 2 {
                return Err(parse_err(i + 1, format!("expected 2 columns, got {}", cols.len())));
            }
            let w: f64 = cols[0].parse().map_err(|e| parse_err(i + 1, format!("{e}")))?;
            let s: f64 = cols[1].parse().map_err(|e| parse_err(i + 1, format!("{e}")))?;
            if !w.is_finite() || !s.is_finite() || w < 0.0 {
                return Err(parse_err(i + 1, "frequency must be finite and >= 0".into()));
            }
            if omega.last().is_some_and(|&prev| w <= prev) {
                return Err(parse_err(i + 1, "frequencies must be strictly ascending".into()));
            }
            omega.push(w);
            values.push(s);
        }
        if omega.len() < 2 {
            return Err(parse_err(0, "need at least two rows".into()));
        }
        Ok(SpectralDensity::Tabulated { omega, values })
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let (Some(&first), Some(&last)) = (xs.first(), xs.last()) else {
        return 0.0;
    };
    if x < first || x > last {
        return 0.0;
    }
    let k = xs.partition_point(|&v| v <= x);
    if k >= xs.len() {
        return ys[xs.len() - 1];
    }
    let k = k.max(1);
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Spectral density plus temperature and frequency quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    pub density: SpectralDensity,
    /// Kelvin.
    pub temperature: f64,
    /// Upper quadrature limit, cm^-1.
    pub omega_max: f64,
    pub n_points: usize,
}

impl BathSpec {
    /// Bath with default quadrature (`30 omega_c`, 2000 nodes; the table end
    /// for tabulated densities).
    pub fn new(density: SpectralDensity, temperature: f64) -> Result<Self> {
        let omega_max = match (&density, density.cutoff()) {
            (_, Some(wc)) => DEFAULT_OMEGA_MAX_OVER_CUTOFF * wc,
            (SpectralDensity::Tabulated { omega, .. }, None) => *omega.last().unwrap_or(&0.0),
            _ => 0.0,
        };
        let spec = Self {
            density,
            temperature,
            omega_max,
            n_points: DEFAULT_QUADRATURE_POINTS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ohmic(lambda: f64, omega_c: f64, temperature: f64) -> Result<Self> {
        Self::new(SpectralDensity::Ohmic { lambda, omega_c }, temperature)
    }

    pub fn with_quadrature(mut self, omega_max: f64, n_points: usize) -> Result<Self> {
        self.omega_max = omega_max;
        self.n_points = n_points;
        self.validate()?;
        Ok(self)
    }

    /// Structural validation; the tail-coverage requirement is separate
    /// ([`BathSpec::check_tail_coverage`]) so diagnostics can run on a
    /// deliberately truncated grid.
    pub fn validate_structure(&self) -> Result<()> {
        match &self.density {
            SpectralDensity::Ohmic { lambda, omega_c } | SpectralDensity::Debye { lambda, omega_c } => {
                if !(*lambda > 0.0 && lambda.is_finite()) {
                    return Err(Error::invalid("bath.lambda", "must be > 0"));
                }
                if !(*omega_c > 0.0 && omega_c.is_finite()) {
                    return Err(Error::invalid("bath.omega_c", "must be > 0"));
                }
            }
            SpectralDensity::Tabulated { omega, values } => {
                if omega.len() != values.len() || omega.len() < 2 {
                    return Err(Error::invalid("bath.tabulated", "need >= 2 matched rows"));
                }
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("bath.temperature", "must be > 0"));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::invalid("bath.omega_max", "must be > 0"));
        }
        if self.n_points < 2 {
            return Err(Error::invalid("bath.n_points", "must be >= 2"));
        }
        Ok(())
    }

    pub fn check_tail_coverage(&self) -> Result<()> {
        if let Some(wc) = self.density.cutoff() {
            if self.omega_max < MIN_OMEGA_MAX_OVER_CUTOFF * wc {
                return Err(Error::invalid(
                    "bath.omega_max",
                    format!(
                        "{} is below {MIN_OMEGA_MAX_OVER_CUTOFF} * omega_c = {}",
                        self.omega_max,
                        MIN_OMEGA_MAX_OVER_CUTOFF * wc
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        self.check_tail_coverage()
    }

    /// 1 / (k_B T) in cm.
    pub fn beta(&self) -> f64 {
        beta_from_kelvin(self.temperature)
    }

    pub fn spectral_density(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 || omega.is_nan() {
            return Err(Error::invalid("omega", "spectral density needs omega >= 0"));
        }
        Ok(self.density.evaluate(omega))
    }

    /// Same bath with every coupling scaled so that `S -> factor * S`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            density: self.density.scaled(factor),
            ..self.clone()
        }
    }

    /// Gauss-Legendre grid on `[0, omega_max]`.
    pub fn grid(&self) -> Result<SpectralGrid> {
        self.validate_structure()?;
        self.grid_with(self.n_points)
    }

    pub fn grid_with(&self, n_points: usize) -> Result<SpectralGrid> {
        let rule = GaussLegendre::new(n_points)
            .map_err(|e| Error::invalid("bath.n_points", e.to_string()))?;
        let half = 0.5 * self.omega_max;
        let (nodes, strengths): (Vec<f64>, Vec<f64>) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| {
                let omega = half * (x + 1.0);
                (omega, self.density.evaluate(omega) * w * half)
            })
            .unzip();
        Ok(SpectralGrid::thermal(nodes, strengths, self.beta()))
    }

    /// `int_0^omega_max S(omega) / omega`, the reorganization energy.
    pub fn reorganization_energy(&self) -> Result<f64> {
        let g = self.grid()?;
        Ok(g.frequencies
            .iter()
            .zip(g.absorb.iter().zip(&g.emit))
            .map(|(w, (a, e))| (a - e) / w)
            .sum())
    }

    /// `C(t) = int S(w) [coth(beta w / 2) cos(w t) - i sin(w t)]`, t in fs.
    pub fn position_kernel(&self, t_fs: f64) -> Result<C64> {
        Ok(self.grid()?.position_kernel(fs_to_scaled(t_fs)))
    }

    /// `<P(t) P(0)> = int S(w) w^2 [(n+1) e^{-i w t} + n e^{i w t}]`, t in fs.
    pub fn momentum_kernel(&self, t_fs: f64) -> Result<C64> {
        Ok(self.grid()?.momentum_kernel(fs_to_scaled(t_fs)))
    }
}

/// Discrete bath lines: frequencies and the two exchange weights per line.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    pub frequencies: Vec<f64>,
    /// Weight of `exp(-i w tau)`; thermal value `S dw (n + 1)`.
    pub absorb: Vec<f64>,
    /// Weight of `exp(+i w tau)`; thermal value `S dw n`.
    pub emit: Vec<f64>,
}

impl SpectralGrid {
    /// Lines in thermal equilibrium at `beta`: `strengths` are `S(w) dw`.
    pub fn thermal(frequencies: Vec<f64>, strengths: Vec<f64>, beta: f64) -> Self {
        let (absorb, emit) = frequencies
            .iter()
            .zip(&strengths)
            .map(|(&w, &s)| {
                let n = bose_occupation(beta, w);
                (s * (n + 1.0), s * n)
            })
            .unzip();
        Self {
            frequencies,
            absorb,
            emit,
        }
    }

    /// Lines with arbitrary exchange weights.
    pub fn from_weights(frequencies: Vec<f64>, absorb: Vec<f64>, emit: Vec<f64>) -> Self {
        assert_eq!(frequencies.len(), absorb.len());
        assert_eq!(frequencies.len(), emit.len());
        Self {
            frequencies,
            absorb,
            emit,
        }
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            frequencies: self.frequencies.clone(),
            absorb: self.absorb.iter().map(|v| v * factor).collect(),
            emit: self.emit.iter().map(|v| v * factor).collect(),
        }
    }

    /// Iterate `(omega, absorb, emit)`.
    pub fn lines(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.frequencies
            .iter()
            .zip(&self.absorb)
            .zip(&self.emit)
            .map(|((&w, &a), &e)| (w, a, e))
    }

    /// Position correlation at scaled time `tau`.
    pub fn position_kernel(&self, tau: f64) -> C64 {
        self.lines()
            .map(|(w, a, e)| {
                let (s, c) = (w * tau).sin_cos();
                C64::new((a + e) * c, -(a - e) * s)
            })
            .sum()
    }

    /// Momentum correlation at scaled time `tau`.
    pub fn momentum_kernel(&self, tau: f64) -> C64 {
        self.lines()
            .map(|(w, a, e)| {
                let (s, c) = (w * tau).sin_cos();
                C64::new((a + e) * c, -(a - e) * s) * (w * w)
            })
            .sum()
    }
}

/// Mean occupation `1 / (exp(beta w) - 1)`.
#[inline]
pub fn bose_occupation(beta: f64, omega: f64) -> f64 {
    1.0 / (beta * omega).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn benchmark_bath() -> BathSpec {
        BathSpec::ohmic(1.2 * 53.0, 53.0, 77.0).unwrap()
    }

    #[test]
    fn ohmic_value_at_cutoff() {
        let b = benchmark_bath();
        assert_relative_eq!(b.spectral_density(53.0).unwrap(), 1.2 * 53.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(b.spectral_density(53.0).unwrap(), 23.40, epsilon = 5e-3);
        assert_eq!(b.spectral_density(0.0).unwrap(), 0.0);
        assert!(b.spectral_density(-1.0).is_err());
        let s = |w| b.spectral_density(w).unwrap();
        assert!(s(53.0) > s(52.9) && s(53.0) > s(53.1));
    }

    #[test]
    fn debye_reorganization() {
        let d = BathSpec::new(SpectralDensity::Debye { lambda: 35.0, omega_c: 100.0 }, 300.0)
            .unwrap()
            .with_quadrature(1.0e6, 20000)
            .unwrap();
        assert_eq!(d.spectral_density(0.0).unwrap(), 0.0);
        // tail beyond omega_max carries (2/pi) lambda omega_c / omega_max
        let tail = 2.0 / std::f64::consts::PI * 35.0 * 100.0 / 1.0e6;
        assert_relative_eq!(d.reorganization_energy().unwrap() + tail, 35.0, max_relative = 1e-6);
    }

    #[test]
    fn ohmic_reorganization_and_moments() {
        let b = benchmark_bath();
        assert_relative_eq!(b.reorganization_energy().unwrap(), 63.6, max_relative = 1e-10);
        // T -> 0 limits of the kernels at zero time
        let cold = BathSpec::ohmic(63.6, 53.0, 1e-3).unwrap();
        let c0 = cold.position_kernel(0.0).unwrap();
        assert_relative_eq!(c0.re, 63.6 * 53.0, max_relative = 1e-8);
        assert_eq!(c0.im, 0.0);
        let p0 = cold.momentum_kernel(0.0).unwrap();
        assert_relative_eq!(p0.re, 6.0 * 63.6 * 53.0f64.powi(3), max_relative = 1e-8);
    }

    #[test]
    fn kernel_parity() {
        let b = benchmark_bath();
        for &t in &[3.0, 40.0, 400.0] {
            let plus = b.position_kernel(t).unwrap();
            let minus = b.position_kernel(-t).unwrap();
            assert_relative_eq!(plus.re, minus.re, max_relative = 1e-12);
            assert_relative_eq!(plus.im, -minus.im, max_relative = 1e-12);
            let p = b.momentum_kernel(t).unwrap();
            let pm = b.momentum_kernel(-t).unwrap();
            assert!((p - pm.conj()).norm() < 1e-10 * p.norm());
        }
        assert!(b.momentum_kernel(0.0).unwrap().re > 0.0);
        assert_eq!(b.momentum_kernel(0.0).unwrap().im, 0.0);
    }

    #[test]
    fn detailed_balance_per_node() {
        let b = benchmark_bath();
        let g = b.grid().unwrap();
        let beta = b.beta();
        for (w, a, e) in g.lines().step_by(97) {
            assert_relative_eq!(a / e, (beta * w).exp(), max_relative = 1e-12);
        }
        // vanishing temperature kills the emission branch
        let cold = BathSpec::ohmic(63.6, 53.0, 1e-3).unwrap().grid().unwrap();
        let (a, e): (f64, f64) = (cold.absorb.iter().sum(), cold.emit.iter().sum());
        assert!(e < 1e-9 * a);
    }

    #[test]
    fn quadrature_converges() {
        let b = benchmark_bath();
        let coarse = b.grid().unwrap();
        let fine = b.grid_with(2 * b.n_points).unwrap();
        for &t in &[0.0, 10.0, 100.0, 1000.0] {
            let tau = fs_to_scaled(t);
            let (c1, c2) = (coarse.position_kernel(tau), fine.position_kernel(tau));
            assert!((c1 - c2).norm() <= 1e-8 * c2.norm(), "position t={t}");
            let (p1, p2) = (coarse.momentum_kernel(tau), fine.momentum_kernel(tau));
            assert!((p1 - p2).norm() <= 1e-8 * p2.norm(), "momentum t={t}");
        }
    }

    #[test]
    fn validation() {
        assert!(BathSpec::ohmic(0.0, 53.0, 77.0).is_err());
        assert!(BathSpec::ohmic(1.0, -53.0, 77.0).is_err());
        assert!(BathSpec::ohmic(1.0, 53.0, 0.0).is_err());
        assert!(benchmark_bath().with_quadrature(10.0 * 53.0, 2000).is_err());
        assert!(benchmark_bath().with_quadrature(20.0 * 53.0, 1).is_err());
    }

    #[test]
    fn tabulated_interpolation() {
        let d = SpectralDensity::parse_table("# w S\n0 0\n10 5\n\n20 5\n", Path::new("t")).unwrap();
        assert_eq!(d.evaluate(5.0), 2.5);
        assert_eq!(d.evaluate(15.0), 5.0);
        assert_eq!(d.evaluate(20.0), 5.0);
        assert_eq!(d.evaluate(25.0), 0.0);
        assert!(SpectralDensity::parse_table("0 0\n0 1\n", Path::new("t")).is_err());
        assert!(SpectralDensity::parse_table("0 0 0\n", Path::new("t")).is_err());
        let b = BathSpec::new(d, 77.0).unwrap();
        assert_eq!(b.omega_max, 20.0);
    }
}
