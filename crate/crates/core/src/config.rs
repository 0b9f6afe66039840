//! Run configuration: a TOML file with `[model]`, `[bath]`, `[grid]` and
//! `[flags]` sections plus top-level `pathways` and `output_dir`.
//!
//! The file is read into [`RawConfig`] (every optional key is an `Option`)
//! and resolved into [`RunConfig`], which records which defaults were taken.
//! A resolved config serializes to a file that resolves to itself.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bath::{BathSpec, SpectralDensity, DEFAULT_OMEGA_MAX_OVER_CUTOFF, DEFAULT_QUADRATURE_POINTS};
use crate::model::{BasisOptions, ExcitonModel, DEFAULT_DEGENERACY_TOL};
use crate::population::RelaxationMode;
use crate::response::{time_axis, Pathway, ResponseOptions};
use crate::spectrum::{alias_period, TransformOptions, Window};
use crate::{Error, Result};

pub const DEFAULT_DT_FS: f64 = 4.0;
pub const DEFAULT_GRID_POINTS: usize = 256;
pub const DEFAULT_ZERO_PAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleMode {
    PerSite,
    PerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathKind {
    Ohmic,
    Debye,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    None,
    Cosine,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub ground_energy: f64,
    pub site_energies: Vec<f64>,
    pub couplings: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dipole_mode: Option<DipoleMode>,
    pub dipoles: Vec<f64>,
    /// Per-state mode only: singles x doubles transition dipoles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singles_to_doubles: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub kind: BathKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_over_omega_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    pub temperature: f64,
    /// Two-column `omega S(omega)` file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n3: Option<usize>,
    pub t2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_pad: Option<usize>,
    /// Lower edge of the frequency band, cm^-1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_origin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FlagsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_p: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case2_decoherence: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doubles_relaxation: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degeneracy_tol: Option<f64>,
}

/// The file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathways: Option<Vec<Pathway>>,
    pub model: ModelSection,
    pub bath: BathSection,
    pub grid: GridSection,
    #[serde(default)]
    pub flags: FlagsSection,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub pathways: Vec<Pathway>,
    pub model: ExcitonModel,
    pub bath: BathSpec,
    /// Table file for tabulated baths, kept for re-serialization.
    pub bath_table: Option<PathBuf>,
    pub dt: f64,
    pub n1: usize,
    pub n3: usize,
    pub t2: Vec<f64>,
    pub transform: TransformOptions,
    pub response: ResponseOptions,
    pub basis: BasisOptions,
    pub k: f64,
    /// Dotted paths of keys that took their default value.
    pub defaults: Vec<String>,
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(field, "rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn finite(v: f64, field: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

struct Defaults(Vec<String>);

impl Defaults {
    fn take<T>(&mut self, value: Option<T>, default: T, field: &str) -> T {
        value.unwrap_or_else(|| {
            self.0.push(field.to_string());
            default
        })
    }
}

impl RawConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Applies defaults and validates. Relative table paths resolve against
    /// `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<RunConfig> {
        self.resolve_with(base_dir, true)
    }

    /// Like [`RawConfig::resolve`] but accepts a bath grid that does not reach
    /// far enough into the tail, so that diagnostics can report it.
    pub fn resolve_for_diagnostics(&self, base_dir: &Path) -> Result<RunConfig> {
        self.resolve_with(base_dir, false)
    }

    fn resolve_with(&self, base_dir: &Path, require_tail: bool) -> Result<RunConfig> {
        let mut defaults = Defaults(Vec::new());

        let m = &self.model;
        finite(m.ground_energy, "model.ground_energy")?;
        for &e in &m.site_energies {
            finite(e, "model.site_energies")?;
        }
        let couplings = matrix(&m.couplings, "model.couplings")?;
        let dipole_mode = defaults.take(m.dipole_mode, DipoleMode::PerSite, "model.dipole_mode");
        let model = ExcitonModel::new(m.ground_energy, m.site_energies.clone(), couplings, m.dipoles.clone())?;
        let model = match dipole_mode {
            DipoleMode::PerSite => {
                if m.singles_to_doubles.is_some() {
                    return Err(Error::invalid("model.singles_to_doubles", "only valid with dipole_mode = \"per_state\""));
                }
                model
            }
            DipoleMode::PerState => {
                let sd = m
                    .singles_to_doubles
                    .as_ref()
                    .map(|rows| matrix(rows, "model.singles_to_doubles"))
                    .transpose()?;
                model.with_state_dipoles(m.dipoles.clone(), sd)?
            }
        };

        let b = &self.bath;
        let lambda = |field: &str| -> Result<(f64, f64)> {
            let wc = b.omega_c.ok_or_else(|| Error::invalid("bath.omega_c", "required"))?;
            let lam = match (b.lambda, b.lambda_over_omega_c) {
                (Some(l), None) => l,
                (None, Some(r)) => r * wc,
                (Some(_), Some(_)) => {
                    return Err(Error::invalid(field, "give either lambda or lambda_over_omega_c, not both"))
                }
                (None, None) => return Err(Error::invalid(field, "required")),
            };
            Ok((finite(lam, field)?, finite(wc, "bath.omega_c")?))
        };
        let density = match b.kind {
            BathKind::Ohmic => {
                let (lambda, omega_c) = lambda("bath.lambda")?;
                SpectralDensity::Ohmic { lambda, omega_c }
            }
            BathKind::Debye => {
                let (lambda, omega_c) = lambda("bath.lambda")?;
                SpectralDensity::Debye { lambda, omega_c }
            }
            BathKind::Tabulated => {
                let table = b.table.as_ref().ok_or_else(|| Error::invalid("bath.table", "required for tabulated baths"))?;
                SpectralDensity::load_table(&base_dir.join(table))?
            }
        };
        let default_max = match (&density, density.cutoff()) {
            (_, Some(wc)) => DEFAULT_OMEGA_MAX_OVER_CUTOFF * wc,
            (SpectralDensity::Tabulated { omega, .. }, None) => *omega.last().unwrap_or(&0.0),
            _ => 0.0,
        };
        let omega_max = defaults.take(b.omega_max, default_max, "bath.omega_max");
        let n_points = defaults.take(b.n_points, DEFAULT_QUADRATURE_POINTS, "bath.n_points");
        let bath = BathSpec { density, temperature: b.temperature, omega_max, n_points };
        if require_tail {
            bath.validate()?;
        } else {
            bath.validate_structure()?;
        }

        let g = &self.grid;
        let dt = defaults.take(g.dt, DEFAULT_DT_FS, "grid.dt");
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("grid.dt", "must be > 0"));
        }
        let n1 = defaults.take(g.n1, DEFAULT_GRID_POINTS, "grid.n1");
        let n3 = defaults.take(g.n3, DEFAULT_GRID_POINTS, "grid.n3");
        if n1 < 2 {
            return Err(Error::invalid("grid.n1", "must be >= 2"));
        }
        if n3 < 2 {
            return Err(Error::invalid("grid.n3", "must be >= 2"));
        }
        if g.t2.is_empty() {
            return Err(Error::invalid("grid.t2", "must list at least one delay"));
        }
        if g.t2.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::invalid("grid.t2", "delays must be finite and >= 0"));
        }
        let window = match defaults.take(g.window, WindowKind::Cosine, "grid.window") {
            WindowKind::None => Window::None,
            WindowKind::Cosine => Window::Cosine,
            WindowKind::Exponential => {
                let tau_fs = g.window_tau.ok_or_else(|| Error::invalid("grid.window_tau", "required for exponential windows"))?;
                if !(tau_fs > 0.0 && tau_fs.is_finite()) {
                    return Err(Error::invalid("grid.window_tau", "must be > 0"));
                }
                Window::Exponential { tau_fs }
            }
        };
        let zero_pad = defaults.take(g.zero_pad, DEFAULT_ZERO_PAD, "grid.zero_pad");
        if zero_pad == 0 {
            return Err(Error::invalid("grid.zero_pad", "must be >= 1"));
        }

        let pathways = defaults.take(self.pathways.clone(), Pathway::ALL.to_vec(), "pathways");
        if pathways.is_empty() {
            return Err(Error::invalid("pathways", "must name at least one pathway"));
        }
        if pathways.contains(&Pathway::Esa) && model.n_sites() < 2 {
            return Err(Error::invalid("pathways", "ESA needs at least two sites"));
        }

        let f = &self.flags;
        let mode = if defaults.take(f.full_p, false, "flags.full_p") {
            RelaxationMode::Full
        } else {
            RelaxationMode::Reduced
        };
        let response = ResponseOptions {
            mode,
            case2_decoherence: defaults.take(f.case2_decoherence, false, "flags.case2_decoherence"),
            ..ResponseOptions::default()
        };
        let basis = BasisOptions {
            degeneracy_tol: defaults.take(f.degeneracy_tol, DEFAULT_DEGENERACY_TOL, "flags.degeneracy_tol"),
            doubles_relaxation: defaults.take(f.doubles_relaxation, true, "flags.doubles_relaxation"),
        };
        let k = finite(defaults.take(f.k, 1.0, "flags.k"), "flags.k")?;

        // band centred on the mean one-exciton transition unless given
        let band_origin = match g.band_origin {
            Some(v) => finite(v, "grid.band_origin")?,
            None => {
                defaults.0.push("grid.band_origin".into());
                let singles = crate::model::diagonalize_singles(&model);
                let mean = singles.energies.iter().sum::<f64>() / singles.energies.len() as f64;
                mean - model.ground_energy - 0.5 * alias_period(dt)
            }
        };
        let output_dir = defaults.take(self.output_dir.clone(), PathBuf::from("echo2d-out"), "output_dir");

        Ok(RunConfig {
            output_dir,
            pathways,
            model,
            bath,
            bath_table: b.table.as_ref().map(|t| base_dir.join(t)),
            dt,
            n1,
            n3,
            t2: g.t2.clone(),
            transform: TransformOptions { window, zero_pad, band_origin },
            response,
            basis,
            k,
            defaults: defaults.0,
        })
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        RawConfig::load(path)?.resolve(base_dir(path))
    }

    pub fn load_for_diagnostics(path: &Path) -> Result<Self> {
        RawConfig::load(path)?.resolve_for_diagnostics(base_dir(path))
    }

    pub fn t1_axis(&self) -> Vec<f64> {
        time_axis(self.dt, self.n1)
    }

    pub fn t3_axis(&self) -> Vec<f64> {
        time_axis(self.dt, self.n3)
    }

    /// Every key written out explicitly.
    pub fn to_raw(&self) -> RawConfig {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let (dipole_mode, dipoles, singles_to_doubles) = match &self.model.dipoles {
            crate::model::DipoleSpec::PerSite(d) => (DipoleMode::PerSite, d.clone(), None),
            crate::model::DipoleSpec::PerState { ground_to_singles, singles_to_doubles } => (
                DipoleMode::PerState,
                ground_to_singles.clone(),
                singles_to_doubles.as_ref().map(rows),
            ),
        };
        let (kind, lambda, omega_c, table) = match &self.bath.density {
            SpectralDensity::Ohmic { lambda, omega_c } => (BathKind::Ohmic, Some(*lambda), Some(*omega_c), None),
            SpectralDensity::Debye { lambda, omega_c } => (BathKind::Debye, Some(*lambda), Some(*omega_c), None),
            SpectralDensity::Tabulated { .. } => (BathKind::Tabulated, None, None, self.bath_table.clone()),
        };
        let (window, window_tau) = match self.transform.window {
            Window::None => (WindowKind::None, None),
            Window::Cosine => (WindowKind::Cosine, None),
            Window::Exponential { tau_fs } => (WindowKind::Exponential, Some(tau_fs)),
        };
        RawConfig {
            output_dir: Some(self.output_dir.clone()),
            pathways: Some(self.pathways.clone()),
            model: ModelSection {
                ground_energy: self.model.ground_energy,
                site_energies: self.model.site_energies.clone(),
                couplings: rows(&self.model.couplings),
                dipole_mode: Some(dipole_mode),
                dipoles,
                singles_to_doubles,
            },
            bath: BathSection {
                kind,
                lambda,
                lambda_over_omega_c: None,
                omega_c,
                temperature: self.bath.temperature,
                table,
                omega_max: Some(self.bath.omega_max),
                n_points: Some(self.bath.n_points),
            },
            grid: GridSection {
                dt: Some(self.dt),
                n1: Some(self.n1),
                n3: Some(self.n3),
                t2: self.t2.clone(),
                window: Some(window),
                window_tau,
                zero_pad: Some(self.transform.zero_pad),
                band_origin: Some(self.transform.band_origin),
            },
            flags: FlagsSection {
                full_p: Some(self.response.mode == RelaxationMode::Full),
                case2_decoherence: Some(self.response.case2_decoherence),
                doubles_relaxation: Some(self.basis.doubles_relaxation),
                k: Some(self.k),
                degeneracy_tol: Some(self.basis.degeneracy_tol),
            },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(&self.to_raw()).map_err(|e| Error::invalid("config", e.to_string()))
    }
}
