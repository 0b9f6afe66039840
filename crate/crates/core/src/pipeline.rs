//! Orchestration behind the CLI: simulate, write outputs, verify, and read
//! peak tables back from an output directory.
//!
//! Output layout per population delay:
//! `<out>/t2_<fs>/{R_SE,R_GSB,R_ESA,R_total}_{re,im}.csv`,
//! `spectrum_{re,im}.csv`, `omega1.csv`, `omega3.csv`, `meta.json`.
//! Response grids have one row per t1 and one column per t3; spectra one row
//! per omega1 and one column per omega3.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::json;

use crate::bath::{BathSpec, SpectralGrid};
use crate::config::RunConfig;
use crate::lineshape::lineshape_g;
use crate::model::StationaryBasis;
use crate::oracle::{discretize, ExactOracle, DEFAULT_DIMENSION_CAP, DEFAULT_FOCK_LEVELS, DEFAULT_MODES_PER_SITE};
use crate::population::RelaxationModel;
use crate::response::{assemble_spe, time_axis, Pathway, ResponseEngine, ResponseGrid, ResponseOptions};
use crate::spectrum::{alias_period, extract_peaks, transform, Peak, Spectrum2D, Window};
use crate::units::fs_to_scaled;
use crate::{Error, Result, C64};

/// Everything computed for one population delay.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t2_fs: f64,
    /// In the order of `RunConfig::pathways`.
    pub pathways: Vec<(Pathway, ResponseGrid)>,
    pub total: ResponseGrid,
    pub spectrum: Spectrum2D,
}

impl Snapshot {
    pub fn pathway(&self, p: Pathway) -> Option<&ResponseGrid> {
        self.pathways.iter().find(|(q, _)| *q == p).map(|(_, g)| g)
    }
}

pub struct Simulation {
    pub basis: StationaryBasis,
    pub tuple_counts: Vec<(Pathway, usize)>,
    pub snapshots: Vec<Snapshot>,
}

/// Runs the full calculation in memory.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let basis = StationaryBasis::build(&config.model, config.basis)?;
    let grid = config.bath.grid()?;
    let engine = ResponseEngine::new(&basis, &grid, config.response);
    let (t1, t3) = (config.t1_axis(), config.t3_axis());
    let tuple_counts = config.pathways.iter().map(|&p| (p, engine.tuples(p).len())).collect();
    let per_t2 = engine.grids(&config.pathways, &t1, &config.t2, &t3)?;
    let mut snapshots = Vec::with_capacity(per_t2.len());
    for (grids, &t2_fs) in per_t2.into_iter().zip(&config.t2) {
        let pathways: Vec<(Pathway, ResponseGrid)> = config.pathways.iter().copied().zip(grids).collect();
        let refs: Vec<(Pathway, &ResponseGrid)> = pathways.iter().map(|(p, g)| (*p, g)).collect();
        let total = assemble_spe(&refs, config.k)?;
        let spectrum = transform(&total, &config.transform)?;
        snapshots.push(Snapshot { t2_fs, pathways, total, spectrum });
    }
    Ok(Simulation { basis, tuple_counts, snapshots })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub snapshot_dirs: Vec<PathBuf>,
}

pub fn snapshot_dir_name(t2_fs: f64) -> String {
    format!("t2_{t2_fs}")
}

fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_column(path: &Path, values: &[f64]) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(values.len(), 1, values))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse { path: path.to_path_buf(), reason: e.to_string() }
}

fn write_complex(dir: &Path, stem: &str, m: &DMatrix<C64>) -> Result<()> {
    write_matrix(&dir.join(format!("{stem}_re.csv")), &m.map(|v| v.re))?;
    write_matrix(&dir.join(format!("{stem}_im.csv")), &m.map(|v| v.im))
}

fn window_json(w: Window) -> serde_json::Value {
    match w {
        Window::None => json!({ "kind": "none" }),
        Window::Cosine => json!({ "kind": "cosine" }),
        Window::Exponential { tau_fs } => json!({ "kind": "exponential", "tau_fs": tau_fs }),
    }
}

fn meta(config: &RunConfig, sim: &Simulation, snap: &Snapshot) -> Result<serde_json::Value> {
    let raw = serde_json::to_value(config.to_raw()).map_err(|e| Error::invalid("config", e.to_string()))?;
    let ns = sim.basis.n_singles();
    let singles: Vec<f64> = (0..ns).map(|m| sim.basis.energy(m)).collect();
    let doubles: Vec<f64> = (0..sim.basis.n_doubles()).map(|n| sim.basis.energy(ns + n)).collect();
    let s = &snap.spectrum;
    Ok(json!({
        "units": {
            "energy": "cm^-1",
            "time": "fs",
            "frequency": "cm^-1",
            "temperature": "K",
            "response": "dimensionless (dipole units^4)",
            "spectrum": "response x fs^2"
        },
        "t2_fs": snap.t2_fs,
        "config": raw,
        "defaults_applied": config.defaults,
        "axes": {
            "t1_fs": { "start": 0.0, "step": config.dt, "count": config.n1 },
            "t3_fs": { "start": 0.0, "step": config.dt, "count": config.n3 },
            "omega1_cm-1": { "start": s.omega1[0], "step": s.step(), "count": s.omega1.len() },
            "omega3_cm-1": { "start": s.omega3[0], "step": s.omega3[1] - s.omega3[0], "count": s.omega3.len() },
            "alias_period_cm-1": alias_period(config.dt),
            "rows": "omega1 (spectra) or t1 (response grids)",
            "columns": "omega3 (spectra) or t3 (response grids)"
        },
        "transform": {
            "window": window_json(s.window),
            "zero_pad": s.zero_pad,
            "band_origin_cm-1": config.transform.band_origin
        },
        "stationary_energies_cm-1": { "singles": singles, "doubles": doubles },
        "ground_energy_cm-1": config.model.ground_energy,
        "tuple_counts": sim.tuple_counts.iter().map(|(p, n)| (p.label().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
        "pathways": snap.pathways.iter().map(|(p, _)| p.label()).collect::<Vec<_>>(),
        "signal": "K (SE + GSB - ESA)",
        "version": env!("CARGO_PKG_VERSION")
    }))
}

fn write_snapshot(dir: &Path, config: &RunConfig, sim: &Simulation, snap: &Snapshot) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (p, g) in &snap.pathways {
        write_complex(dir, &format!("R_{}", p.label()), &g.values)?;
    }
    write_complex(dir, "R_total", &snap.total.values)?;
    write_complex(dir, "spectrum", &snap.spectrum.values)?;
    write_column(&dir.join("omega1.csv"), &snap.spectrum.omega1)?;
    write_column(&dir.join("omega3.csv"), &snap.spectrum.omega3)?;
    let meta = meta(config, sim, snap)?;
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::invalid("meta", e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Simulates and writes every snapshot. Files are staged in a scratch
/// directory inside the output directory and moved into place only once
/// all of them exist; on failure nothing from this run is left behind.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let out = &config.output_dir;
    let sim = simulate(config)?;
    let created_out = !out.exists();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let staging = out.join(format!(".staging-{}", std::process::id()));
    let staged = (|| -> Result<Vec<String>> {
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        let mut names = Vec::new();
        for snap in &sim.snapshots {
            let name = snapshot_dir_name(snap.t2_fs);
            write_snapshot(&staging.join(&name), config, &sim, snap)?;
            names.push(name);
        }
        let cfg = staging.join("config.resolved.toml");
        fs::write(&cfg, config.to_toml()?).map_err(|e| Error::io(&cfg, e))?;
        Ok(names)
    })();
    let names = match staged {
        Ok(n) => n,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            if created_out {
                let _ = fs::remove_dir_all(out);
            }
            return Err(e);
        }
    };
    let mut dirs = Vec::new();
    for name in names.iter().map(String::as_str).chain(std::iter::once("config.resolved.toml")) {
        let target = out.join(name);
        if target.is_dir() {
            fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        }
        fs::rename(staging.join(name), &target).map_err(|e| Error::io(&target, e))?;
        if target.is_dir() {
            dirs.push(target);
        }
    }
    fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    Ok(RunSummary { output_dir: out.clone(), snapshot_dirs: dirs })
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse { path: path.to_path_buf(), reason: e.to_string() })?;
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse { path: path.to_path_buf(), reason: "ragged or empty table".into() });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Reads one snapshot directory written by [`run`] back into a spectrum.
pub fn load_spectrum(dir: &Path) -> Result<Spectrum2D> {
    let re = read_matrix(&dir.join("spectrum_re.csv"))?;
    let im = read_matrix(&dir.join("spectrum_im.csv"))?;
    let omega1: Vec<f64> = read_matrix(&dir.join("omega1.csv"))?.iter().copied().collect();
    let omega3: Vec<f64> = read_matrix(&dir.join("omega3.csv"))?.iter().copied().collect();
    if re.shape() != im.shape() || re.shape() != (omega1.len(), omega3.len()) {
        return Err(Error::Parse { path: dir.to_path_buf(), reason: "spectrum and axes disagree in size".into() });
    }
    let meta_path = dir.join("meta.json");
    let meta: serde_json::Value = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(&meta_path, e))
        .and_then(|t| serde_json::from_str(&t).map_err(|e| Error::Parse { path: meta_path.clone(), reason: e.to_string() }))?;
    let t2_fs = meta["t2_fs"].as_f64().unwrap_or(f64::NAN);
    let zero_pad = meta["transform"]["zero_pad"].as_u64().unwrap_or(1) as usize;
    let window = match meta["transform"]["window"]["kind"].as_str() {
        Some("none") => Window::None,
        Some("exponential") => Window::Exponential {
            tau_fs: meta["transform"]["window"]["tau_fs"].as_f64().unwrap_or(f64::NAN),
        },
        _ => Window::Cosine,
    };
    Ok(Spectrum2D {
        omega1,
        omega3,
        t2_fs,
        values: re.zip_map(&im, C64::new),
        window,
        zero_pad,
    })
}

/// Peak tables for every `t2_*` directory under `output_dir`, sorted by t2.
pub fn peaks(output_dir: &Path, max_peaks: usize, rel_threshold: f64) -> Result<Vec<(f64, Vec<Peak>)>> {
    let entries = fs::read_dir(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(output_dir, e))?;
        let name = entry.file_name();
        if !name.to_string_lossy().starts_with("t2_") || !entry.path().is_dir() {
            continue;
        }
        let spec = load_spectrum(&entry.path())?;
        out.push((spec.t2_fs, extract_peaks(&spec, max_peaks, rel_threshold)));
    }
    if out.is_empty() {
        return Err(Error::invalid("output_dir", format!("no t2_* snapshots in {}", output_dir.display())));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: measured {:.3e}, tolerance {:.3e}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            if self.detail.is_empty() { String::new() } else { format!(" ({})", self.detail) }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const QUADRATURE_TOL: f64 = 1e-6;
pub const DETAILED_BALANCE_TOL: f64 = 0.05;
pub const ORACLE_IDENTITY_TOL: f64 = 1e-10;
pub const ORACLE_WEAK_TOL: f64 = 0.10;
/// Reorganization scale used for the weak-coupling oracle comparison.
pub const ORACLE_WEAK_SCALE: f64 = 0.2;

fn check(name: &'static str, measured: f64, tolerance: f64, detail: String) -> CheckOutcome {
    CheckOutcome { name, measured, tolerance, passed: measured <= tolerance, detail }
}

fn skipped(name: &'static str, why: String) -> CheckOutcome {
    CheckOutcome { name, measured: 0.0, tolerance: 0.0, passed: true, detail: format!("skipped: {why}") }
}

/// Largest relative change of lineshape and relaxation values when the
/// frequency grid is doubled in both reach and node count.
pub fn quadrature_drift(basis: &StationaryBasis, bath: &BathSpec) -> Result<f64> {
    let coarse = bath.grid()?;
    let reference = BathSpec { omega_max: 2.0 * bath.omega_max, n_points: 2 * bath.n_points, ..bath.clone() }.grid()?;
    let probe = |grid: &SpectralGrid| -> Vec<C64> {
        let mut v = Vec::new();
        let relax = RelaxationModel::new(basis, grid);
        for t in [100.0, 500.0] {
            let tau = fs_to_scaled(t);
            v.push(lineshape_g(grid, tau));
            for m in 0..basis.n_singles() {
                v.push(relax.l(m, m, tau));
            }
        }
        v
    };
    let (a, b) = (probe(&coarse), probe(&reference));
    Ok(a.iter()
        .zip(&b)
        .filter(|(_, r)| r.norm() > 0.0)
        .map(|(x, r)| (x - r).norm() / r.norm())
        .fold(0.0, f64::max))
}

/// `(measured ratio, expected e^{beta (e_hi - e_lo)})` of the long-time exit
/// rates of the highest and lowest single-exciton states.
pub fn detailed_balance(basis: &StationaryBasis, bath: &BathSpec) -> Result<(f64, f64)> {
    let grid = bath.grid()?;
    let relax = RelaxationModel::new(basis, &grid);
    let (hi, lo) = (0, basis.n_singles() - 1);
    let ratio = relax.exit_rate(hi, 2000.0, 50.0) / relax.exit_rate(lo, 2000.0, 50.0);
    let expected = (bath.beta() * (basis.energy(hi) - basis.energy(lo))).exp();
    Ok((ratio, expected))
}

/// Relative RMS of `approx - exact`, pooled over all planes.
pub fn pooled_relative_rms(pairs: &[(&ResponseGrid, &ResponseGrid)]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (approx, exact) in pairs {
        for (a, e) in approx.values.iter().zip(exact.values.iter()) {
            num += (a - e).norm_sqr();
            den += e.norm_sqr();
        }
    }
    (num / den).sqrt()
}

/// Bath discretization used for an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSetup {
    /// Multiplies the reorganization energy.
    pub scale: f64,
    pub modes_per_site: usize,
    pub fock_levels: usize,
    pub options: ResponseOptions,
}

impl Default for OracleSetup {
    fn default() -> Self {
        Self {
            scale: ORACLE_WEAK_SCALE,
            modes_per_site: DEFAULT_MODES_PER_SITE,
            fock_levels: DEFAULT_FOCK_LEVELS,
            options: ResponseOptions::default(),
        }
    }
}

/// Cumulant and exact SE planes on a discretized bath, one pair per t2.
pub fn oracle_planes(
    basis: &StationaryBasis,
    bath: &BathSpec,
    setup: &OracleSetup,
    t_fs: &[f64],
    t2_fs: &[f64],
) -> Result<Vec<(ResponseGrid, ResponseGrid)>> {
    let discrete = discretize(bath, setup.modes_per_site, setup.fock_levels)?.scaled(setup.scale);
    let oracle = ExactOracle::new(basis, &discrete, DEFAULT_DIMENSION_CAP)?;
    let lines = discrete.spectral_grid();
    let engine = ResponseEngine::new(basis, &lines, setup.options);
    let cumulant = engine.grids(&[Pathway::Se], t_fs, t2_fs, t_fs)?;
    t2_fs
        .iter()
        .zip(cumulant)
        .map(|(&t2, mut c)| Ok((c.remove(0), oracle.grid(Pathway::Se, t_fs, t2, t_fs)?)))
        .collect()
}

/// Built-in numerical checks on the configured model and bath.
pub fn verify(config: &RunConfig) -> Result<VerifyReport> {
    let basis = StationaryBasis::build(&config.model, config.basis)?;
    let mut checks = Vec::new();

    let drift = quadrature_drift(&basis, &config.bath)?;
    checks.push(check(
        "quadrature_convergence",
        drift,
        QUADRATURE_TOL,
        format!("omega_max {} cm^-1, {} nodes vs twice both", config.bath.omega_max, config.bath.n_points),
    ));

    if basis.n_singles() >= 2 {
        let (ratio, expected) = detailed_balance(&basis, &config.bath)?;
        checks.push(check(
            "detailed_balance",
            (ratio / expected - 1.0).abs(),
            DETAILED_BALANCE_TOL,
            format!("slope ratio {ratio:.4}, expected {expected:.4}"),
        ));
    } else {
        checks.push(skipped("detailed_balance", "single state".into()));
    }

    // zero coupling: bath content is irrelevant, keep the space minimal
    let t_small = time_axis(20.0, 4);
    let free = discretize(&config.bath, 1, 2)?.scaled(0.0);
    match ExactOracle::new(&basis, &free, DEFAULT_DIMENSION_CAP) {
        Ok(oracle) => {
            let lines = free.spectral_grid();
            let engine = ResponseEngine::new(&basis, &lines, config.response);
            let mut worst: f64 = 0.0;
            for &p in &config.pathways {
                for t2 in [0.0, 50.0] {
                    let exact = oracle.grid(p, &t_small, t2, &t_small)?;
                    let cum = engine.grids(&[p], &t_small, &[t2], &t_small)?.remove(0).remove(0);
                    let scale = exact.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
                    for (a, b) in exact.values.iter().zip(cum.values.iter()) {
                        worst = worst.max((a - b).norm() / scale);
                    }
                }
            }
            checks.push(check("oracle_zero_coupling", worst, ORACLE_IDENTITY_TOL, String::new()));
        }
        Err(Error::DimensionCap { dim, cap }) => {
            checks.push(skipped("oracle_zero_coupling", format!("dimension {dim} > {cap}")))
        }
        Err(e) => return Err(e),
    }

    let desk = discretize(&config.bath, DEFAULT_MODES_PER_SITE, DEFAULT_FOCK_LEVELS)?;
    if desk.hilbert_dimension(&basis) <= DEFAULT_DIMENSION_CAP {
        let t = time_axis(10.0, 11);
        let setup = OracleSetup { options: config.response, ..OracleSetup::default() };
        let planes = oracle_planes(&basis, &config.bath, &setup, &t, &[0.0, 50.0])?;
        let pairs: Vec<_> = planes.iter().map(|(c, e)| (c, e)).collect();
        checks.push(check(
            "oracle_weak_coupling",
            pooled_relative_rms(&pairs),
            ORACLE_WEAK_TOL,
            format!("SE, reorganization x{ORACLE_WEAK_SCALE}, t1,t3 <= 100 fs, t2 in {{0, 50}} fs"),
        ));
    } else {
        checks.push(skipped(
            "oracle_weak_coupling",
            format!("dimension {} > {}", desk.hilbert_dimension(&basis), DEFAULT_DIMENSION_CAP),
        ));
    }

    Ok(VerifyReport { checks })
}
