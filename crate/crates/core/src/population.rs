//! Population-relaxation terms: L, N, O and the traced exponents for each
//! pathway.
//!
//! All three come from the correlation of two nonadiabatic matrix elements,
//!
//! `<H_kl(t) H_mn(s)> = sum_w c_klmn w^2 [absorb e^{i(D_kl - w)t} e^{i(D_mn + w)s}
//!                                       + emit e^{i(D_kl + w)t} e^{i(D_mn - w)s}]`,
//!
//! with `c_klmn = sum_j A^j_kl A^j_mn` and `D_kl = e_k - e_l`. Their time
//! integrals are closed forms per bath line (see [`crate::kernels`]).

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::SpectralGrid;
use crate::kernels::{exp_integral, ordered_integral};
use crate::lineshape::Slot;
use crate::model::StationaryBasis;
use crate::units::fs_to_scaled;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Which population-relaxation exponent to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationMode {
    /// Single-interval terms only (L and O).
    #[default]
    Reduced,
    /// Adds the N terms coupling different intervals.
    Full,
}

/// Per-line weights and phases of `<H_kl(t) H_mn(s)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeights {
    /// `(weight, phase of t, phase of s)` for the absorbing branch.
    pub absorb: Vec<(C64, f64, f64)>,
    /// Same for the emitting branch.
    pub emit: Vec<(C64, f64, f64)>,
}

/// Stationary basis plus bath grid: evaluates L / N / O at arbitrary times.
#[derive(Debug, Clone, Copy)]
pub struct RelaxationModel<'a> {
    pub basis: &'a StationaryBasis,
    pub grid: &'a SpectralGrid,
}

impl<'a> RelaxationModel<'a> {
    pub fn new(basis: &'a StationaryBasis, grid: &'a SpectralGrid) -> Self {
        Self { basis, grid }
    }

    /// `sum_j A^j_kl A^j_mn`.
    pub fn coupling_product(&self, k: usize, l: usize, m: usize, n: usize) -> C64 {
        (0..self.basis.n_sites())
            .map(|j| self.basis.na_coupling(j, k, l) * self.basis.na_coupling(j, m, n))
            .sum()
    }

    fn gap(&self, k: usize, l: usize) -> f64 {
        self.basis.energy(k) - self.basis.energy(l)
    }

    /// States in the same manifold as `m`.
    pub fn manifold_of(&self, m: usize) -> std::ops::Range<usize> {
        let ns = self.basis.n_singles();
        if m < ns {
            0..ns
        } else {
            ns..ns + self.basis.n_doubles()
        }
    }

    /// Whether `A^j_kl` is nonzero for some site.
    pub fn coupled(&self, k: usize, l: usize) -> bool {
        (0..self.basis.n_sites()).any(|j| self.basis.na_coupling(j, k, l).norm() > 0.0)
    }

    pub fn na_pair_weights(&self, k: usize, l: usize, m: usize, n: usize) -> PairWeights {
        let c = self.coupling_product(k, l, m, n);
        let (dkl, dmn) = (self.gap(k, l), self.gap(m, n));
        let mut out = PairWeights {
            absorb: Vec::with_capacity(self.grid.len()),
            emit: Vec::with_capacity(self.grid.len()),
        };
        for (w, a, e) in self.grid.lines() {
            let w2 = w * w;
            out.absorb.push((c * (w2 * a), dkl - w, dmn + w));
            out.emit.push((c * (w2 * e), dkl + w, dmn - w));
        }
        out
    }

    /// Sum `f(weight, phase_t, phase_s)` over both branches of one pair.
    fn contract(&self, k: usize, l: usize, m: usize, n: usize, f: impl Fn(f64, f64) -> C64) -> C64 {
        let c = self.coupling_product(k, l, m, n);
        if c == ZERO {
            return ZERO;
        }
        let (dkl, dmn) = (self.gap(k, l), self.gap(m, n));
        let s: C64 = self
            .grid
            .lines()
            .map(|(w, a, e)| (f(dkl - w, dmn + w) * a + f(dkl + w, dmn - w) * e) * (w * w))
            .sum();
        c * s
    }

    /// `L_mn(tau)`, intermediate states restricted to the manifold of `m`.
    pub fn l(&self, m: usize, n: usize, tau: f64) -> C64 {
        self.manifold_of(m)
            .map(|k| self.contract(m, k, k, n, |a, b| ordered_integral(a, b, tau)))
            .sum()
    }

    pub fn o(&self, k: usize, l: usize, m: usize, n: usize, tau: f64) -> C64 {
        self.n(k, l, m, n, tau, tau)
    }

    pub fn n(&self, k: usize, l: usize, m: usize, n: usize, tau: f64, sigma: f64) -> C64 {
        self.contract(k, l, m, n, |a, b| exp_integral(a, tau) * exp_integral(b, sigma))
    }

    /// Long-time growth rate of `Re L_mm` (per scaled time) by a central
    /// difference of half-width `h_fs` around `t_fs`: the total rate out of
    /// state `m`.
    pub fn exit_rate(&self, m: usize, t_fs: f64, h_fs: f64) -> f64 {
        let at = |t: f64| self.l(m, m, fs_to_scaled(t)).re;
        (at(t_fs + h_fs) - at(t_fs - h_fs)) / fs_to_scaled(2.0 * h_fs)
    }

    /// Whether `L_mn` can be nonzero.
    pub fn l_nonzero(&self, m: usize, n: usize) -> bool {
        self.manifold_of(m).any(|k| self.coupled(m, k) && self.coupled(k, n))
    }

    /// `N_klmn(tau_i, sigma_j)` on a product of two axes.
    pub fn n_matrix(&self, k: usize, l: usize, m: usize, n: usize, taus: &[f64], sigmas: &[f64]) -> DMatrix<C64> {
        let c = self.coupling_product(k, l, m, n);
        if c == ZERO {
            return DMatrix::from_element(taus.len(), sigmas.len(), ZERO);
        }
        let (dkl, dmn) = (self.gap(k, l), self.gap(m, n));
        let ns = sigmas.len();
        // J(b, sigma) tables for both branches, line-major
        let mut jb_abs = Vec::with_capacity(self.grid.len() * ns);
        let mut jb_emit = Vec::with_capacity(self.grid.len() * ns);
        for &w in &self.grid.frequencies {
            jb_abs.extend(sigmas.iter().map(|&s| exp_integral(dmn + w, s)));
            jb_emit.extend(sigmas.iter().map(|&s| exp_integral(dmn - w, s)));
        }
        let rows: Vec<Vec<C64>> = taus
            .par_iter()
            .map(|&tau| {
                let mut row = vec![ZERO; ns];
                for (idx, (w, a, e)) in self.grid.lines().enumerate() {
                    let w2 = w * w;
                    let u = exp_integral(dkl - w, tau) * (w2 * a);
                    let v = exp_integral(dkl + w, tau) * (w2 * e);
                    let span = idx * ns..(idx + 1) * ns;
                    for ((acc, ja), je) in row.iter_mut().zip(&jb_abs[span.clone()]).zip(&jb_emit[span]) {
                        *acc += u * ja + v * je;
                    }
                }
                row
            })
            .collect();
        DMatrix::from_fn(taus.len(), ns, |i, j| c * rows[i][j])
    }
}

/// L / N / O values at the three interval times of one point.
pub trait RelaxationSource {
    fn l(&self, m: usize, n: usize, t: Slot) -> C64;
    fn o(&self, k: usize, l: usize, m: usize, n: usize, t: Slot) -> C64;
    fn n(&self, k: usize, l: usize, m: usize, n: usize, t: Slot, s: Slot) -> C64;
}

/// Direct evaluation at arbitrary scaled times.
#[derive(Debug, Clone, Copy)]
pub struct PointRelaxation<'a> {
    pub model: RelaxationModel<'a>,
    pub taus: [f64; 3],
}

fn slot_index(slot: Slot) -> usize {
    match slot {
        Slot::T1 => 0,
        Slot::T2 => 1,
        Slot::T3 => 2,
    }
}

impl RelaxationSource for PointRelaxation<'_> {
    fn l(&self, m: usize, n: usize, t: Slot) -> C64 {
        self.model.l(m, n, self.taus[slot_index(t)])
    }

    fn o(&self, k: usize, l: usize, m: usize, n: usize, t: Slot) -> C64 {
        self.model.o(k, l, m, n, self.taus[slot_index(t)])
    }

    fn n(&self, k: usize, l: usize, m: usize, n: usize, t: Slot, s: Slot) -> C64 {
        self.model
            .n(k, l, m, n, self.taus[slot_index(t)], self.taus[slot_index(s)])
    }
}

/// Identity of one tabulated relaxation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelaxKey {
    L { m: usize, n: usize, t: Slot },
    O { idx: [usize; 4], t: Slot },
    N { idx: [usize; 4], t: Slot, s: Slot },
}

impl RelaxKey {
    pub fn involves_t2(&self) -> bool {
        match *self {
            RelaxKey::L { t, .. } | RelaxKey::O { t, .. } => t == Slot::T2,
            RelaxKey::N { t, s, .. } => t == Slot::T2 || s == Slot::T2,
        }
    }

    fn slots(&self) -> (Slot, Slot) {
        match *self {
            RelaxKey::L { t, .. } | RelaxKey::O { t, .. } => (t, t),
            RelaxKey::N { t, s, .. } => (t, s),
        }
    }
}

/// Source that records which nonzero terms an exponent needs and returns
/// zero for all of them.
pub struct KeyRecorder<'a> {
    pub model: RelaxationModel<'a>,
    pub keys: RefCell<HashSet<RelaxKey>>,
}

impl<'a> KeyRecorder<'a> {
    pub fn new(model: RelaxationModel<'a>) -> Self {
        Self {
            model,
            keys: RefCell::new(HashSet::new()),
        }
    }

    /// Clears and returns the keys recorded so far.
    pub fn take(&self) -> HashSet<RelaxKey> {
        std::mem::take(&mut *self.keys.borrow_mut())
    }

    fn record(&self, key: RelaxKey, nonzero: bool) -> C64 {
        if nonzero {
            self.keys.borrow_mut().insert(key);
        }
        ZERO
    }
}

impl RelaxationSource for KeyRecorder<'_> {
    fn l(&self, m: usize, n: usize, t: Slot) -> C64 {
        self.record(RelaxKey::L { m, n, t }, self.model.l_nonzero(m, n))
    }

    fn o(&self, k: usize, l: usize, m: usize, n: usize, t: Slot) -> C64 {
        let nz = self.model.coupled(k, l) && self.model.coupled(m, n);
        self.record(RelaxKey::O { idx: [k, l, m, n], t }, nz)
    }

    fn n(&self, k: usize, l: usize, m: usize, n: usize, t: Slot, s: Slot) -> C64 {
        let nz = self.model.coupled(k, l) && self.model.coupled(m, n);
        self.record(RelaxKey::N { idx: [k, l, m, n], t, s }, nz)
    }
}

/// Tabulated values of one term; indexed by `(i1, i3)`.
#[derive(Debug, Clone)]
pub enum TermTable {
    Scalar(C64),
    OverT1(Vec<C64>),
    OverT3(Vec<C64>),
    Plane(DMatrix<C64>),
}

impl TermTable {
    #[inline]
    pub fn at(&self, i1: usize, i3: usize) -> C64 {
        match self {
            TermTable::Scalar(v) => *v,
            TermTable::OverT1(v) => v[i1],
            TermTable::OverT3(v) => v[i3],
            TermTable::Plane(m) => m[(i1, i3)],
        }
    }
}

/// Time axes (scaled) of one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct SnapshotAxes<'a> {
    pub taus1: &'a [f64],
    pub tau2: f64,
    pub taus3: &'a [f64],
}

impl SnapshotAxes<'_> {
    fn axis(&self, slot: Slot) -> Option<&[f64]> {
        match slot {
            Slot::T1 => Some(self.taus1),
            Slot::T2 => None,
            Slot::T3 => Some(self.taus3),
        }
    }
}

/// Tabulate one relaxation term over the axes its slots refer to.
pub fn tabulate(model: &RelaxationModel, key: RelaxKey, axes: SnapshotAxes) -> TermTable {
    let eval = |ta: f64, tb: f64| -> C64 {
        match key {
            RelaxKey::L { m, n, .. } => model.l(m, n, ta),
            RelaxKey::O { idx: [k, l, m, n], .. } => model.o(k, l, m, n, ta),
            RelaxKey::N { idx: [k, l, m, n], .. } => model.n(k, l, m, n, ta, tb),
        }
    };
    let (sa, sb) = key.slots();
    let t2 = axes.tau2;
    let axis_table = |slot: Slot, f: &(dyn Fn(f64) -> C64 + Sync)| {
        let axis = axes.axis(slot).expect("axis slot");
        let v: Vec<C64> = axis.par_iter().map(|&t| f(t)).collect();
        if slot == Slot::T1 {
            TermTable::OverT1(v)
        } else {
            TermTable::OverT3(v)
        }
    };
    match (sa, sb) {
        (Slot::T2, Slot::T2) => TermTable::Scalar(eval(t2, t2)),
        (Slot::T2, s) => axis_table(s, &|t| eval(t2, t)),
        (s, Slot::T2) => axis_table(s, &|t| eval(t, t2)),
        (a, b) if a == b => axis_table(a, &|t| eval(t, t)),
        (a, _) => {
            let RelaxKey::N { idx: [k, l, m, n], .. } = key else {
                unreachable!("only N has two distinct slots")
            };
            if a == Slot::T1 {
                TermTable::Plane(model.n_matrix(k, l, m, n, axes.taus1, axes.taus3))
            } else {
                TermTable::Plane(model.n_matrix(k, l, m, n, axes.taus3, axes.taus1).transpose())
            }
        }
    }
}

/// Tables for a set of keys.
pub fn tabulate_all(
    model: &RelaxationModel,
    keys: impl IntoIterator<Item = RelaxKey>,
    axes: SnapshotAxes,
) -> HashMap<RelaxKey, Arc<TermTable>> {
    keys.into_iter()
        .map(|k| (k, Arc::new(tabulate(model, k, axes))))
        .collect()
}

/// Lookup-backed source at one `(i1, i3)` point. Missing keys read as zero;
/// the recorder only omits terms that vanish identically.
#[derive(Debug, Clone, Copy)]
pub struct TablePoint<'a> {
    pub tables: &'a HashMap<RelaxKey, Arc<TermTable>>,
    pub i1: usize,
    pub i3: usize,
}

impl TablePoint<'_> {
    fn get(&self, key: RelaxKey) -> C64 {
        self.tables
            .get(&key)
            .map_or(ZERO, |t| t.at(self.i1, self.i3))
    }
}

impl RelaxationSource for TablePoint<'_> {
    fn l(&self, m: usize, n: usize, t: Slot) -> C64 {
        self.get(RelaxKey::L { m, n, t })
    }

    fn o(&self, k: usize, l: usize, m: usize, n: usize, t: Slot) -> C64 {
        self.get(RelaxKey::O { idx: [k, l, m, n], t })
    }

    fn n(&self, k: usize, l: usize, m: usize, n: usize, t: Slot, s: Slot) -> C64 {
        self.get(RelaxKey::N { idx: [k, l, m, n], t, s })
    }
}

/// Pathway relaxation exponents over any [`RelaxationSource`].
pub struct Relaxation<'a, R> {
    pub source: &'a R,
    pub mode: RelaxationMode,
}

impl<R: RelaxationSource> Relaxation<'_, R> {
    /// Adjoint element `(L^dagger)_mn = conj(L_nm)`.
    pub fn l_dag(&self, m: usize, n: usize, t: Slot) -> C64 {
        self.source.l(n, m, t).conj()
    }

    /// Stimulated-emission exponent for singles `m[0..6]`.
    pub fn p_se(&self, m: [usize; 6]) -> C64 {
        use Slot::*;
        let r = self.source;
        let [m1, m2, m3, m4, m5, m6] = m;
        let (d12, d23, d45, d56) = (m1 == m2, m2 == m3, m4 == m5, m5 == m6);
        let mut p = ZERO;
        if d12 && d23 && d45 {
            p += r.l(m5, m6, T2);
        }
        if d12 && d23 && d56 {
            p += r.l(m4, m5, T3);
        }
        if d12 && d45 && d56 {
            p += self.l_dag(m2, m3, T2);
        }
        if d23 && d45 && d56 {
            p += self.l_dag(m1, m2, T1);
        }
        if d12 && d45 {
            p -= r.o(m2, m3, m5, m6, T2);
        }
        if self.mode == RelaxationMode::Full {
            if d12 && d23 {
                p += r.n(m4, m5, m5, m6, T3, T2);
            }
            if d23 && d45 {
                p -= r.n(m1, m2, m5, m6, T1, T2);
            }
            if d12 && d56 {
                p -= r.n(m2, m3, m4, m5, T2, T3);
            }
            if d23 && d56 {
                p -= r.n(m1, m2, m4, m5, T1, T3);
            }
            if d45 && d56 {
                p += r.n(m1, m2, m2, m3, T1, T2);
            }
        }
        p
    }

    /// Ground-state-bleach exponent for singles `m[0..4]`.
    pub fn p_gsb(&self, m: [usize; 4]) -> C64 {
        use Slot::*;
        let r = self.source;
        let [m1, m2, m3, m4] = m;
        let mut p = ZERO;
        if m1 == m2 {
            p += r.l(m3, m4, T3);
        }
        if m3 == m4 {
            p += self.l_dag(m1, m2, T1);
        }
        if self.mode == RelaxationMode::Full {
            p -= r.n(m1, m2, m3, m4, T1, T3);
        }
        p
    }

    /// Excited-state-absorption exponent; `n1`, `n2` are unified doubles
    /// indices. There is no full-mode extension for this pathway.
    pub fn p_esa(&self, m: [usize; 6], n1: usize, n2: usize) -> C64 {
        use Slot::*;
        let r = self.source;
        let [m1, m2, m3, m4, m5, m6] = m;
        let (d12, d23, d34, d56, dn) = (m1 == m2, m2 == m3, m3 == m4, m5 == m6, n1 == n2);
        let mut p = ZERO;
        if d23 && d34 && d56 && dn {
            p += self.l_dag(m1, m2, T1);
        }
        if d12 && d34 && d56 && dn {
            p += self.l_dag(m2, m3, T2);
        }
        if d12 && d23 && d56 && dn {
            p += self.l_dag(m3, m4, T3);
        }
        if d12 && d23 && d34 && dn {
            p += r.l(m5, m6, T2);
        }
        if d12 && d23 && d34 && d56 {
            p += r.l(n1, n2, T3);
        }
        if d12 && d34 && dn {
            p -= r.o(m2, m3, m5, m6, T2);
        }
        if d12 && d23 && d56 {
            p -= r.o(m3, m4, n1, n2, T3);
        }
        p
    }
}
