//! Third-order response functions as sums over stationary-state tuples.
//!
//! Each tuple carries a dipole product, three phase frequencies (one per
//! interval) and a cumulant case:
//!
//! - case 1, every Kronecker guard of the pathway holds:
//!   `F = exp(-(D + P))`;
//! - case 2, otherwise: `F = 1 - exp(P)`.
//!
//! Case-2 tuples whose relaxation exponent vanishes identically contribute
//! exactly zero and are pruned.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::SpectralGrid;
use crate::lineshape::{
    gradient_overlaps, lineshape_y_matrix, Decoherence, DecoherenceSource, LineshapeSnapshot,
    PointLineshape,
};
use crate::model::StationaryBasis;
use crate::population::{
    tabulate_all, KeyRecorder, PointRelaxation, RelaxKey, Relaxation, RelaxationMode,
    RelaxationModel, RelaxationSource, SnapshotAxes, TablePoint, TermTable,
};
use crate::units::fs_to_scaled;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pathway {
    #[serde(rename = "SE", alias = "se")]
    Se,
    #[serde(rename = "GSB", alias = "gsb")]
    Gsb,
    #[serde(rename = "ESA", alias = "esa")]
    Esa,
}

impl Pathway {
    pub const ALL: [Pathway; 3] = [Pathway::Se, Pathway::Gsb, Pathway::Esa];

    pub fn label(self) -> &'static str {
        match self {
            Pathway::Se => "SE",
            Pathway::Gsb => "GSB",
            Pathway::Esa => "ESA",
        }
    }
}

impl std::str::FromStr for Pathway {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SE" => Ok(Pathway::Se),
            "GSB" => Ok(Pathway::Gsb),
            "ESA" => Ok(Pathway::Esa),
            _ => Err(Error::invalid("pathways", format!("unknown pathway {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// All guards hold: decoherence and relaxation both damp the tuple.
    Diagonal,
    /// Some guard fails: the tuple exists only through relaxation.
    Transfer,
}

/// Restricts the tuple sum by the t2 phase of each tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleFilter {
    #[default]
    All,
    /// Tuples whose t2 phase oscillates.
    Coherences,
    /// Tuples with no t2 phase.
    Populations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseOptions {
    pub mode: RelaxationMode,
    /// Multiply case-2 factors by `exp(-D)`; a sensitivity switch, off by
    /// default.
    pub case2_decoherence: bool,
    pub prune: bool,
    pub filter: TupleFilter,
}

impl Default for ResponseOptions {
    fn default() -> Self {
        Self {
            mode: RelaxationMode::Reduced,
            case2_decoherence: false,
            prune: true,
            filter: TupleFilter::All,
        }
    }
}

/// One term of a pathway sum. Singles indices are unified indices
/// `0..n_singles`; `n` holds unified doubles indices (ESA only).
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple {
    pub pathway: Pathway,
    pub m: [usize; 6],
    pub n: [usize; 2],
    pub case: Case,
    pub dipole: f64,
    /// Phase frequencies (cm^-1) multiplying t1, t2, t3.
    pub freq: [f64; 3],
}

impl Tuple {
    pub fn decoherence<S: DecoherenceSource>(&self, d: &Decoherence<S>) -> C64 {
        let [_, m2, m3, m4, m5, _] = self.m;
        match self.pathway {
            Pathway::Se => d.d_se(m2, m3, m4, m5),
            Pathway::Gsb => d.d_gsb(m2, m3),
            Pathway::Esa => d.d_esa(m2, m3, m4, self.n[0], m5),
        }
    }

    pub fn relaxation<R: RelaxationSource>(&self, r: &Relaxation<R>) -> C64 {
        match self.pathway {
            Pathway::Se => r.p_se(self.m),
            Pathway::Gsb => r.p_gsb([self.m[0], self.m[1], self.m[2], self.m[3]]),
            Pathway::Esa => r.p_esa(self.m, self.n[0], self.n[1]),
        }
    }

    #[inline]
    pub fn phase(&self, taus: [f64; 3]) -> C64 {
        C64::from_polar(
            1.0,
            self.freq[0] * taus[0] + self.freq[1] * taus[1] + self.freq[2] * taus[2],
        )
    }

    pub fn oscillates_in_t2(&self) -> bool {
        self.freq[1] != 0.0
    }
}

/// Pre-exponential factor of one tuple from its traced exponents.
pub fn f_factor(case: Case, decoherence: C64, relaxation: C64, case2_decoherence: bool) -> C64 {
    match case {
        Case::Diagonal => (-(decoherence + relaxation)).exp(),
        Case::Transfer => {
            let f = C64::new(1.0, 0.0) - relaxation.exp();
            if case2_decoherence {
                f * (-decoherence).exp()
            } else {
                f
            }
        }
    }
}

/// Response values on a `t1 x t3` plane at one t2.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid {
    pub label: String,
    pub t1_fs: Vec<f64>,
    pub t2_fs: f64,
    pub t3_fs: Vec<f64>,
    pub values: DMatrix<C64>,
}

/// `K (SE + GSB - ESA)`; missing pathways contribute nothing.
pub fn assemble_spe(grids: &[(Pathway, &ResponseGrid)], k: f64) -> Result<ResponseGrid> {
    let (_, first) = grids
        .first()
        .ok_or_else(|| Error::invalid("pathways", "nothing to assemble"))?;
    let mut values = DMatrix::from_element(first.values.nrows(), first.values.ncols(), C64::new(0.0, 0.0));
    for (p, g) in grids {
        if g.values.shape() != values.shape() || g.t2_fs != first.t2_fs {
            return Err(Error::invalid("pathways", "grids do not share axes"));
        }
        match p {
            Pathway::Se | Pathway::Gsb => values += &g.values,
            Pathway::Esa => values -= &g.values,
        }
    }
    values *= C64::new(k, 0.0);
    Ok(ResponseGrid {
        label: "total".into(),
        t1_fs: first.t1_fs.clone(),
        t2_fs: first.t2_fs,
        t3_fs: first.t3_fs.clone(),
        values,
    })
}

/// Stationary basis, bath lines and options: enumerates tuples and
/// evaluates responses.
pub struct ResponseEngine<'a> {
    pub basis: &'a StationaryBasis,
    pub grid: &'a SpectralGrid,
    pub overlaps: DMatrix<f64>,
    pub options: ResponseOptions,
}

impl<'a> ResponseEngine<'a> {
    pub fn new(basis: &'a StationaryBasis, grid: &'a SpectralGrid, options: ResponseOptions) -> Self {
        Self {
            basis,
            grid,
            overlaps: gradient_overlaps(basis),
            options,
        }
    }

    fn relaxation_model(&self) -> RelaxationModel<'a> {
        RelaxationModel::new(self.basis, self.grid)
    }

    fn mu_g(&self, m: usize) -> f64 {
        self.basis.dipole_g[m]
    }

    /// `mu_{m,n}` for single `m` and unified doubles index `n`.
    fn mu_sd(&self, m: usize, n: usize) -> f64 {
        self.basis.dipole_sd[(m, n - self.basis.n_singles())]
    }

    fn energy(&self, s: usize) -> f64 {
        self.basis.energy(s)
    }

    fn make_tuple(&self, pathway: Pathway, m: [usize; 6], n: [usize; 2]) -> Tuple {
        let eg = self.basis.ground_energy;
        let [m1, m2, m3, m4, m5, m6] = m;
        let (case_one, dipole, freq) = match pathway {
            Pathway::Se => (
                m1 == m2 && m2 == m3 && m4 == m5 && m5 == m6,
                self.mu_g(m1) * self.mu_g(m3) * self.mu_g(m4) * self.mu_g(m6),
                [
                    self.energy(m2) - eg,
                    self.energy(m3) - self.energy(m5),
                    -(self.energy(m4) - eg),
                ],
            ),
            Pathway::Gsb => (
                m1 == m2 && m3 == m4,
                self.mu_g(m1) * self.mu_g(m2) * self.mu_g(m3) * self.mu_g(m4),
                [self.energy(m2) - eg, 0.0, -(self.energy(m3) - eg)],
            ),
            Pathway::Esa => (
                m1 == m2 && m2 == m3 && m3 == m4 && m5 == m6 && n[0] == n[1],
                self.mu_g(m1) * self.mu_sd(m4, n[0]) * self.mu_sd(m5, n[1]) * self.mu_g(m6),
                [
                    self.energy(m2) - eg,
                    self.energy(m3) - self.energy(m5),
                    self.energy(m4) - self.energy(n[0]),
                ],
            ),
        };
        Tuple {
            pathway,
            m,
            n,
            case: if case_one { Case::Diagonal } else { Case::Transfer },
            dipole,
            freq,
        }
    }

    /// Every tuple of a pathway, optionally pruned and filtered.
    pub fn tuples(&self, pathway: Pathway) -> Vec<Tuple> {
        let ns = self.basis.n_singles();
        let nd = self.basis.n_doubles();
        let mut out = Vec::new();
        let singles_slots = match pathway {
            Pathway::Gsb => 4,
            _ => 6,
        };
        let doubles: Vec<[usize; 2]> = match pathway {
            Pathway::Esa => (0..nd)
                .flat_map(|a| (0..nd).map(move |b| [ns + a, ns + b]))
                .collect(),
            _ => vec![[0, 0]],
        };
        let total = ns.pow(singles_slots as u32);
        let recorder = KeyRecorder::new(self.relaxation_model());
        let rel = Relaxation {
            source: &recorder,
            mode: self.options.mode,
        };
        for code in 0..total {
            let mut m = [0usize; 6];
            let mut c = code;
            for slot in m.iter_mut().take(singles_slots) {
                *slot = c % ns;
                c /= ns;
            }
            m[..singles_slots].reverse();
            for &n in &doubles {
                let t = self.make_tuple(pathway, m, n);
                if self.options.prune {
                    if t.dipole == 0.0 {
                        continue;
                    }
                    if t.case == Case::Transfer {
                        t.relaxation(&rel);
                        if recorder.take().is_empty() {
                            continue;
                        }
                    }
                }
                let keep = match self.options.filter {
                    TupleFilter::All => true,
                    TupleFilter::Coherences => t.oscillates_in_t2(),
                    TupleFilter::Populations => !t.oscillates_in_t2(),
                };
                if keep {
                    out.push(t);
                }
            }
        }
        out
    }

    fn tuple_value<S: DecoherenceSource, R: RelaxationSource>(
        &self,
        t: &Tuple,
        dec: &Decoherence<S>,
        rel: &Relaxation<R>,
        taus: [f64; 3],
    ) -> C64 {
        let d = t.decoherence(dec);
        let p = t.relaxation(rel);
        t.phase(taus) * f_factor(t.case, d, p, self.options.case2_decoherence) * t.dipole
    }

    /// Direct evaluation of one pathway at one time point (fs). Every bath
    /// integral is recomputed, so this is the reference for the grid path.
    pub fn point(&self, pathway: Pathway, t_fs: [f64; 3]) -> Result<C64> {
        self.check_pathway(pathway)?;
        let taus = t_fs.map(fs_to_scaled);
        let tuples = self.tuples(pathway);
        Ok(self.point_with(&tuples, taus))
    }

    /// Direct evaluation over given tuples at scaled times.
    pub fn point_with(&self, tuples: &[Tuple], taus: [f64; 3]) -> C64 {
        let ls = PointLineshape {
            grid: self.grid,
            taus,
        };
        let dec = Decoherence {
            source: &ls,
            overlaps: &self.overlaps,
        };
        let pr = PointRelaxation {
            model: self.relaxation_model(),
            taus,
        };
        let rel = Relaxation {
            source: &pr,
            mode: self.options.mode,
        };
        tuples
            .iter()
            .map(|t| self.tuple_value(t, &dec, &rel, taus))
            .sum()
    }

    fn check_pathway(&self, pathway: Pathway) -> Result<()> {
        if pathway == Pathway::Esa && self.basis.n_doubles() == 0 {
            return Err(Error::invalid(
                "pathways",
                "ESA needs a doubly excited manifold (at least two sites)",
            ));
        }
        Ok(())
    }

    /// Response planes for each requested pathway at each t2.
    ///
    /// `t1_fs` and `t3_fs` are the sampling times. The result is indexed as
    /// `[t2 index][pathway index]`.
    pub fn grids(
        &self,
        pathways: &[Pathway],
        t1_fs: &[f64],
        t2_fs: &[f64],
        t3_fs: &[f64],
    ) -> Result<Vec<Vec<ResponseGrid>>> {
        for &p in pathways {
            self.check_pathway(p)?;
        }
        let taus1: Vec<f64> = t1_fs.iter().map(|&t| fs_to_scaled(t)).collect();
        let taus3: Vec<f64> = t3_fs.iter().map(|&t| fs_to_scaled(t)).collect();
        let tuple_sets: Vec<Vec<Tuple>> = pathways.iter().map(|&p| self.tuples(p)).collect();

        // collect every relaxation term the exponents touch
        let recorder = KeyRecorder::new(self.relaxation_model());
        let rec_rel = Relaxation {
            source: &recorder,
            mode: self.options.mode,
        };
        for t in tuple_sets.iter().flatten() {
            t.relaxation(&rec_rel);
        }
        let keys: HashSet<RelaxKey> = recorder.take();
        let (dynamic_keys, static_keys): (Vec<RelaxKey>, Vec<RelaxKey>) =
            keys.into_iter().partition(|k| k.involves_t2());
        let model = self.relaxation_model();
        let static_axes = SnapshotAxes {
            taus1: &taus1,
            tau2: 0.0,
            taus3: &taus3,
        };
        let static_tables = tabulate_all(&model, static_keys, static_axes);
        let y13 = Arc::new(lineshape_y_matrix(self.grid, &taus1, &taus3));

        let mut out = Vec::with_capacity(t2_fs.len());
        for &t2 in t2_fs {
            let tau2 = fs_to_scaled(t2);
            let axes = SnapshotAxes {
                taus1: &taus1,
                tau2,
                taus3: &taus3,
            };
            let mut tables: HashMap<RelaxKey, Arc<TermTable>> = static_tables.clone();
            tables.extend(tabulate_all(&model, dynamic_keys.iter().copied(), axes));
            let snap = LineshapeSnapshot::build(self.grid, &taus1, tau2, &taus3, y13.clone());
            let planes = tuple_sets
                .iter()
                .zip(pathways)
                .map(|(tuples, &p)| ResponseGrid {
                    label: p.label().to_string(),
                    t1_fs: t1_fs.to_vec(),
                    t2_fs: t2,
                    t3_fs: t3_fs.to_vec(),
                    values: self.plane(tuples, &snap, &tables, &taus1, tau2, &taus3),
                })
                .collect();
            out.push(planes);
        }
        Ok(out)
    }

    fn plane(
        &self,
        tuples: &[Tuple],
        snap: &LineshapeSnapshot,
        tables: &HashMap<RelaxKey, Arc<TermTable>>,
        taus1: &[f64],
        tau2: f64,
        taus3: &[f64],
    ) -> DMatrix<C64> {
        let n3 = taus3.len();
        let rows: Vec<Vec<C64>> = (0..taus1.len())
            .into_par_iter()
            .map(|i1| {
                (0..n3)
                    .map(|i3| {
                        let sp = snap.at(i1, i3);
                        let dec = Decoherence {
                            source: &sp,
                            overlaps: &self.overlaps,
                        };
                        let tp = TablePoint { tables, i1, i3 };
                        let rel = Relaxation {
                            source: &tp,
                            mode: self.options.mode,
                        };
                        let taus = [taus1[i1], tau2, taus3[i3]];
                        tuples
                            .iter()
                            .map(|t| self.tuple_value(t, &dec, &rel, taus))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        DMatrix::from_fn(taus1.len(), n3, |i, j| rows[i][j])
    }
}

/// Uniform sampling times `0, dt, ..., (n - 1) dt`.
pub fn time_axis(dt_fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt_fs).collect()
}
