//! Exact reference dynamics on a discretized, Fock-truncated bath.
//!
//! Every site couples to its own copy of a few harmonic modes through
//! `Q_j = sum_b g_b (a_jb + a_jb^dag)` added to the site energy. Each
//! electronic manifold (ground, singles, doubles) times the bath Fock space is
//! diagonalized once; response traces are then sums over the thermal Fock
//! states of the uncoupled bath.
//!
//! With the propagators in hand the three pathway traces reduce to
//!
//! - SE:  `Tr[rho A(t1+t2)^dag G(t3)^dag A(t2+t3) G(t1)]`
//! - GSB: `Tr[rho A(t1)^dag G(t2+t3)^dag A(t3) G(t1+t2)]`
//! - ESA: `Tr[rho L(t1+t2+t3)^dag X(t3) L(t2) G(t1)]`
//!
//! where `G` is the ground propagator, `A(t) = <mu| U_e(t) |mu>` a bath
//! operator, `L(t) = U_e(t) |mu>` and `X(t) = mu U_f(t) mu` the doubles
//! round trip.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::bath::{BathSpec, SpectralGrid};
use crate::model::StationaryBasis;
use crate::response::{Pathway, ResponseGrid};
use crate::units::fs_to_scaled;
use crate::{Error, Result, C64};

pub const DEFAULT_DIMENSION_CAP: usize = 20_000;
pub const DEFAULT_FOCK_LEVELS: usize = 4;
pub const DEFAULT_MODES_PER_SITE: usize = 2;
/// Relative change beyond which an extra Fock level is reported.
pub const TRUNCATION_WARN: f64 = 0.01;

const QUANTILE_CELLS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    /// cm^-1.
    pub frequency: f64,
    /// cm^-1; `Q = coupling (a + a^dag)`.
    pub coupling: f64,
}

/// Modes shared by every site, their Fock truncation and the temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    pub modes: Vec<BathMode>,
    pub fock_levels: usize,
    pub beta: f64,
}

/// Places `n_modes` modes at the reorganization medians of equal-weight
/// intervals of `S(w) / w`, each carrying `lambda / n_modes`.
pub fn discretize(spec: &BathSpec, n_modes: usize, fock_levels: usize) -> Result<DiscretizedBath> {
    if n_modes == 0 {
        return Err(Error::invalid("oracle.n_modes", "must be >= 1"));
    }
    if fock_levels < 2 {
        return Err(Error::invalid("oracle.fock_levels", "must be >= 2"));
    }
    spec.validate_structure()?;
    let dw = spec.omega_max / QUANTILE_CELLS as f64;
    // cumulative reorganization at cell edges, midpoint rule per cell
    let mut cumulative = Vec::with_capacity(QUANTILE_CELLS + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for i in 0..QUANTILE_CELLS {
        let w = (i as f64 + 0.5) * dw;
        acc += spec.density.evaluate(w) / w * dw;
        cumulative.push(acc);
    }
    let lambda = acc;
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("bath", "spectral density has no weight"));
    }
    let quantile = |target: f64| {
        let k = cumulative.partition_point(|&c| c < target).clamp(1, QUANTILE_CELLS);
        let (c0, c1) = (cumulative[k - 1], cumulative[k]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        (k as f64 - 1.0 + frac) * dw
    };
    let share = lambda / n_modes as f64;
    let modes = (0..n_modes)
        .map(|b| {
            let frequency = quantile((b as f64 + 0.5) * share);
            BathMode { frequency, coupling: (frequency * share).sqrt() }
        })
        .collect();
    Ok(DiscretizedBath { modes, fock_levels, beta: spec.beta() })
}

impl DiscretizedBath {
    /// `sum_b g_b^2 / w_b`.
    pub fn reorganization_energy(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling * m.coupling / m.frequency).sum()
    }

    /// Couplings scaled so that the reorganization energy scales by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = factor.sqrt();
        let modes = self
            .modes
            .iter()
            .map(|m| BathMode { frequency: m.frequency, coupling: m.coupling * s })
            .collect();
        Self { modes, ..self.clone() }
    }

    pub fn with_fock_levels(&self, fock_levels: usize) -> Self {
        Self { fock_levels, ..self.clone() }
    }

    /// Bath Fock dimension for `n_sites` independent copies, saturating.
    pub fn fock_dimension(&self, n_sites: usize) -> usize {
        let modes = (n_sites * self.modes.len()) as u32;
        self.fock_levels.checked_pow(modes).unwrap_or(usize::MAX)
    }

    /// `(1 + n_singles + n_doubles) * fock_dimension`.
    pub fn hilbert_dimension(&self, basis: &StationaryBasis) -> usize {
        (1 + basis.n_singles() + basis.n_doubles()).saturating_mul(self.fock_dimension(basis.n_sites()))
    }

    /// Truncated thermal populations of one mode.
    fn level_populations(&self, frequency: f64) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.fock_levels)
            .map(|n| (-self.beta * frequency * n as f64).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / z).collect()
    }

    /// Bath lines reproducing the exact two-point correlation of the
    /// truncated modes: weights `g^2 <a a^dag>` and `g^2 <a^dag a>`.
    pub fn spectral_grid(&self) -> SpectralGrid {
        let top = self.fock_levels - 1;
        let mut freqs = Vec::new();
        let mut absorb = Vec::new();
        let mut emit = Vec::new();
        for m in &self.modes {
            let p = self.level_populations(m.frequency);
            let up: f64 = (0..top).map(|n| p[n] * (n + 1) as f64).sum();
            let down: f64 = (1..=top).map(|n| p[n] * n as f64).sum();
            let g2 = m.coupling * m.coupling;
            freqs.push(m.frequency);
            absorb.push(g2 * up);
            emit.push(g2 * down);
        }
        SpectralGrid::from_weights(freqs, absorb, emit)
    }
}

/// Eigen-decomposed block Hamiltonian.
struct Block {
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Block {
    fn new(h: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(h);
        Self { energies: eig.eigenvalues, vectors: eig.eigenvectors }
    }
}

/// `left diag(e^{-i E tau}) right^T` for real factors.
fn propagate(left: &DMatrix<f64>, energies: &DVector<f64>, right: &DMatrix<f64>, tau: f64) -> DMatrix<C64> {
    let mut scaled = left.map(|v| C64::new(v, 0.0));
    for (c, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::from_polar(1.0, -energies[c] * tau);
    }
    let r = right.map(|v| C64::new(v, 0.0));
    scaled * r.transpose()
}

fn time_key(tau: f64) -> u64 {
    // merge sums that differ only by rounding
    ((tau * 1e12).round() as i64) as u64
}

/// Evaluates `f` once for every distinct time.
fn tabulate<F>(times: impl IntoIterator<Item = f64>, f: F) -> HashMap<u64, DMatrix<C64>>
where
    F: Fn(f64) -> DMatrix<C64> + Sync,
{
    let mut unique: HashMap<u64, f64> = HashMap::new();
    for t in times {
        unique.entry(time_key(t)).or_insert(t);
    }
    let entries: Vec<(u64, f64)> = unique.into_iter().collect();
    entries.into_par_iter().map(|(k, t)| (k, f(t))).collect()
}

/// Exact propagators of one model on one discretized bath.
pub struct ExactOracle {
    ground_energy: f64,
    n_singles: usize,
    fock: usize,
    /// Bath energies of the uncoupled Fock states.
    bath_energies: Vec<f64>,
    thermal: Vec<f64>,
    singles: Block,
    /// `<mu| V_e`, Fock x (n_singles Fock).
    dressed_mu: DMatrix<f64>,
    doubles: Option<(Block, DMatrix<f64>)>,
}

impl ExactOracle {
    pub fn new(basis: &StationaryBasis, bath: &DiscretizedBath, cap: usize) -> Result<Self> {
        if bath.fock_levels < 2 {
            return Err(Error::invalid("oracle.fock_levels", "must be >= 2"));
        }
        let dim = bath.hilbert_dimension(basis);
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        let n_sites = basis.n_sites();
        let levels = bath.fock_levels;
        let nb = bath.modes.len();
        let fock = bath.fock_dimension(n_sites);
        let occupation = |k: usize, r: usize| (k / levels.pow(r as u32)) % levels;

        let mut bath_energies = vec![0.0; fock];
        for (k, e) in bath_energies.iter_mut().enumerate() {
            for r in 0..n_sites * nb {
                *e += bath.modes[r % nb].frequency * occupation(k, r) as f64;
            }
        }
        let e0 = bath_energies.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut thermal: Vec<f64> = bath_energies.iter().map(|e| (-bath.beta * (e - e0)).exp()).collect();
        let z: f64 = thermal.iter().sum();
        thermal.iter_mut().for_each(|p| *p /= z);

        // Q_j on the Fock space
        let mut positions = vec![DMatrix::<f64>::zeros(fock, fock); n_sites];
        for (j, q) in positions.iter_mut().enumerate() {
            for b in 0..nb {
                let r = j * nb + b;
                let stride = levels.pow(r as u32);
                let g = bath.modes[b].coupling;
                for k in 0..fock {
                    let n = occupation(k, r);
                    if n + 1 < levels {
                        let v = g * ((n + 1) as f64).sqrt();
                        q[(k + stride, k)] += v;
                        q[(k, k + stride)] += v;
                    }
                }
            }
        }

        let block_hamiltonian = |energies: &[f64], projector: &dyn Fn(usize, usize, usize) -> f64| {
            let ne = energies.len();
            let mut h = DMatrix::<f64>::zeros(ne * fock, ne * fock);
            for s in 0..ne {
                for k in 0..fock {
                    h[(s * fock + k, s * fock + k)] = energies[s] + bath_energies[k];
                }
            }
            for (j, q) in positions.iter().enumerate() {
                for s in 0..ne {
                    for t in 0..ne {
                        let p = projector(j, s, t);
                        if p == 0.0 {
                            continue;
                        }
                        let mut blk = h.view_mut((s * fock, t * fock), (fock, fock));
                        blk += q * p;
                    }
                }
            }
            h
        };

        let vs = &basis.singles.vectors;
        let singles = Block::new(block_hamiltonian(&basis.singles.energies, &|j, s, t| vs[(j, s)] * vs[(j, t)]));
        let ns = basis.n_singles();
        let dressed_mu = {
            let v = &singles.vectors;
            DMatrix::from_fn(fock, ns * fock, |k, c| {
                (0..ns).map(|m| basis.dipole_g[m] * v[(m * fock + k, c)]).sum()
            })
        };

        let doubles = match &basis.doubles {
            Some(d) if basis.n_doubles() > 0 => {
                let u = &d.system.vectors;
                let pairs = &d.pairs;
                let proj = |j: usize, s: usize, t: usize| {
                    pairs
                        .iter()
                        .enumerate()
                        .filter(|(_, &(a, b))| a == j || b == j)
                        .map(|(p, _)| u[(p, s)] * u[(p, t)])
                        .sum()
                };
                let block = Block::new(block_hamiltonian(&d.system.energies, &proj));
                let nd = basis.n_doubles();
                // singles <- doubles dipole applied to doubles eigenvectors
                let v = &block.vectors;
                let lifted = DMatrix::from_fn(ns * fock, nd * fock, |row, c| {
                    let (m, k) = (row / fock, row % fock);
                    (0..nd).map(|n| basis.dipole_sd[(m, n)] * v[(n * fock + k, c)]).sum()
                });
                Some((block, lifted))
            }
            _ => None,
        };

        Ok(Self {
            ground_energy: basis.ground_energy,
            n_singles: ns,
            fock,
            bath_energies,
            thermal,
            singles,
            dressed_mu,
            doubles,
        })
    }

    pub fn fock_dimension(&self) -> usize {
        self.fock
    }

    fn ground_phase(&self, k: usize, tau: f64) -> C64 {
        C64::from_polar(1.0, -(self.ground_energy + self.bath_energies[k]) * tau)
    }

    /// `<mu| U_e(tau) |mu>` on the bath.
    fn amplitude(&self, tau: f64) -> DMatrix<C64> {
        propagate(&self.dressed_mu, &self.singles.energies, &self.dressed_mu, tau)
    }

    /// `U_e(tau) |mu>`, (n_singles Fock) x Fock.
    fn lifted(&self, tau: f64) -> DMatrix<C64> {
        propagate(&self.singles.vectors, &self.singles.energies, &self.dressed_mu, tau)
    }

    /// `sum_k p_k phase_k sum_l conj(left[l,k]) mid_l right[l,k]`.
    fn trace(&self, left: &DMatrix<C64>, mid: &dyn Fn(usize) -> C64, right: &DMatrix<C64>, phase: &dyn Fn(usize) -> C64) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for k in 0..left.ncols() {
            let p = self.thermal[k];
            if p == 0.0 {
                continue;
            }
            let mut s = C64::new(0.0, 0.0);
            for l in 0..left.nrows() {
                s += left[(l, k)].conj() * mid(l) * right[(l, k)];
            }
            total += s * p * phase(k);
        }
        total
    }

    /// Response on a `t1 x t3` plane (all times in fs).
    pub fn grid(&self, pathway: Pathway, t1_fs: &[f64], t2_fs: f64, t3_fs: &[f64]) -> Result<ResponseGrid> {
        let taus1: Vec<f64> = t1_fs.iter().map(|&t| fs_to_scaled(t)).collect();
        let taus3: Vec<f64> = t3_fs.iter().map(|&t| fs_to_scaled(t)).collect();
        let tau2 = fs_to_scaled(t2_fs);
        let (n1, n3) = (taus1.len(), taus3.len());
        let ground = |tau: f64| move |l: usize| C64::from_polar(1.0, (self.ground_energy + self.bath_energies[l]) * tau);

        let values: Vec<C64> = match pathway {
            Pathway::Se => {
                let table = tabulate(
                    taus1.iter().chain(&taus3).map(|&t| t + tau2),
                    |t| self.amplitude(t),
                );
                (0..n1 * n3)
                    .into_par_iter()
                    .map(|idx| {
                        let (t1, t3) = (taus1[idx / n3], taus3[idx % n3]);
                        let left = &table[&time_key(t1 + tau2)];
                        let right = &table[&time_key(t3 + tau2)];
                        self.trace(left, &ground(t3), right, &|k| self.ground_phase(k, t1))
                    })
                    .collect()
            }
            Pathway::Gsb => {
                let table = tabulate(taus1.iter().chain(&taus3).copied(), |t| self.amplitude(t));
                (0..n1 * n3)
                    .into_par_iter()
                    .map(|idx| {
                        let (t1, t3) = (taus1[idx / n3], taus3[idx % n3]);
                        let left = &table[&time_key(t1)];
                        let right = &table[&time_key(t3)];
                        self.trace(left, &ground(tau2 + t3), right, &|k| self.ground_phase(k, t1 + tau2))
                    })
                    .collect()
            }
            Pathway::Esa => {
                let (block, lifted_mu) = self
                    .doubles
                    .as_ref()
                    .ok_or_else(|| Error::invalid("pathways", "ESA needs at least two sites"))?;
                let start = self.lifted(tau2);
                let mut sums = Vec::with_capacity(n1 * n3);
                for &t1 in &taus1 {
                    for &t3 in &taus3 {
                        sums.push(t1 + tau2 + t3);
                    }
                }
                let lefts = tabulate(sums, |t| self.lifted(t));
                let rights = tabulate(taus3.iter().copied(), |t| {
                    propagate(lifted_mu, &block.energies, lifted_mu, t) * &start
                });
                (0..n1 * n3)
                    .into_par_iter()
                    .map(|idx| {
                        let (t1, t3) = (taus1[idx / n3], taus3[idx % n3]);
                        let left = &lefts[&time_key(t1 + tau2 + t3)];
                        let right = &rights[&time_key(t3)];
                        self.trace(left, &|_| C64::new(1.0, 0.0), right, &|k| self.ground_phase(k, t1))
                    })
                    .collect()
            }
        };
        Ok(ResponseGrid {
            label: pathway.label().to_string(),
            t1_fs: t1_fs.to_vec(),
            t2_fs,
            t3_fs: t3_fs.to_vec(),
            values: DMatrix::from_row_slice(n1, n3, &values),
        })
    }

    pub fn response(&self, pathway: Pathway, t_fs: [f64; 3]) -> Result<C64> {
        Ok(self.grid(pathway, &[t_fs[0]], t_fs[1], &[t_fs[2]])?.values[(0, 0)])
    }

    pub fn n_singles(&self) -> usize {
        self.n_singles
    }
}

/// Relative change of one response value when the Fock truncation grows by
/// one level; `None` when the larger space exceeds `cap`.
pub fn truncation_sensitivity(
    basis: &StationaryBasis,
    bath: &DiscretizedBath,
    pathway: Pathway,
    t_fs: [f64; 3],
    cap: usize,
) -> Result<Option<f64>> {
    let base = ExactOracle::new(basis, bath, cap)?.response(pathway, t_fs)?;
    let richer = bath.with_fock_levels(bath.fock_levels + 1);
    if richer.hilbert_dimension(basis) > cap {
        return Ok(None);
    }
    let more = ExactOracle::new(basis, &richer, cap)?.response(pathway, t_fs)?;
    Ok(Some((more - base).norm() / more.norm().max(f64::MIN_POSITIVE)))
}

/// One exact response value; warns when one more Fock level would move it
/// by more than [`TRUNCATION_WARN`].
pub fn exact_response(
    basis: &StationaryBasis,
    bath: &DiscretizedBath,
    pathway: Pathway,
    t_fs: [f64; 3],
    cap: usize,
) -> Result<C64> {
    let value = ExactOracle::new(basis, bath, cap)?.response(pathway, t_fs)?;
    match truncation_sensitivity(basis, bath, pathway, t_fs, cap)? {
        Some(change) if change > TRUNCATION_WARN => log::warn!(
            "{} at {:?} fs moves by {:.1}% with one more Fock level",
            pathway.label(),
            t_fs,
            100.0 * change
        ),
        Some(_) => {}
        None => log::debug!("Fock truncation check skipped: larger space exceeds cap"),
    }
    Ok(value)
}
