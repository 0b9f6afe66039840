//! Exciton Hamiltonians and the stationary (Q = 0) basis.
//!
//! Singles live on sites `0..n`, doubles on pairs `(i, j)` with `i < j` in
//! lexicographic order. Both manifolds are diagonalized with eigenvalues in
//! descending order (index 0 is the highest state) and every eigenvector
//! normalized so that its largest-magnitude component is positive.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, C64};

/// Default minimum gap (cm^-1) below which two stationary states are treated
/// as degenerate when building nonadiabatic couplings.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-6;

/// How transition dipoles are specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DipoleSpec {
    /// Scalar transition dipole per site.
    PerSite(Vec<f64>),
    /// Dipoles given directly in the stationary basis. When the
    /// singles-to-doubles matrix is absent it is derived from the effective
    /// site dipoles `V * mu_g` (the site dipoles that reproduce `mu_g`).
    PerState {
        ground_to_singles: Vec<f64>,
        singles_to_doubles: Option<DMatrix<f64>>,
    },
}

/// Site-basis exciton model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitonModel {
    pub ground_energy: f64,
    pub site_energies: Vec<f64>,
    pub couplings: DMatrix<f64>,
    pub dipoles: DipoleSpec,
}

impl ExcitonModel {
    /// Validates sizes, symmetry of `couplings` and its zero diagonal.
    pub fn new(
        ground_energy: f64,
        site_energies: Vec<f64>,
        couplings: DMatrix<f64>,
        site_dipoles: Vec<f64>,
    ) -> Result<Self> {
        let model = Self {
            ground_energy,
            site_energies,
            couplings,
            dipoles: DipoleSpec::PerSite(site_dipoles),
        };
        model.validate()?;
        Ok(model)
    }

    /// Replace the dipole specification with stationary-basis values.
    pub fn with_state_dipoles(
        mut self,
        ground_to_singles: Vec<f64>,
        singles_to_doubles: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        self.dipoles = DipoleSpec::PerState {
            ground_to_singles,
            singles_to_doubles,
        };
        self.validate()?;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.site_energies.len()
    }

    pub fn n_doubles(&self) -> usize {
        let n = self.n_sites();
        n * n.saturating_sub(1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n == 0 {
            return Err(Error::invalid("model.site_energies", "need at least one site"));
        }
        if self.couplings.nrows() != n || self.couplings.ncols() != n {
            return Err(Error::invalid(
                "model.couplings",
                format!("expected {n}x{n}, got {}x{}", self.couplings.nrows(), self.couplings.ncols()),
            ));
        }
        for i in 0..n {
            if self.couplings[(i, i)] != 0.0 {
                return Err(Error::invalid("model.couplings", "diagonal must be zero"));
            }
            for j in 0..i {
                if self.couplings[(i, j)] != self.couplings[(j, i)] {
                    return Err(Error::invalid(
                        "model.couplings",
                        format!("not symmetric at ({i},{j})"),
                    ));
                }
            }
        }
        let all_finite = self.site_energies.iter().all(|e| e.is_finite())
            && self.couplings.iter().all(|e| e.is_finite())
            && self.ground_energy.is_finite();
        if !all_finite {
            return Err(Error::invalid("model", "energies must be finite"));
        }
        match &self.dipoles {
            DipoleSpec::PerSite(mu) if mu.len() != n => Err(Error::invalid(
                "model.dipoles",
                format!("expected {n} site dipoles, got {}", mu.len()),
            )),
            DipoleSpec::PerState {
                ground_to_singles,
                singles_to_doubles,
            } => {
                if ground_to_singles.len() != n {
                    return Err(Error::invalid(
                        "model.dipoles",
                        format!("expected {n} stationary dipoles, got {}", ground_to_singles.len()),
                    ));
                }
                if let Some(sd) = singles_to_doubles {
                    if sd.nrows() != n || sd.ncols() != self.n_doubles() {
                        return Err(Error::invalid(
                            "model.doubles_dipoles",
                            format!("expected {n}x{}", self.n_doubles()),
                        ));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn singles_hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.couplings.clone();
        for (j, &e) in self.site_energies.iter().enumerate() {
            h[(j, j)] = e;
        }
        h
    }

    /// Site pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect()
    }

    /// Two-exciton Hamiltonian in the local pair basis. Diagonal entries are
    /// the sum of the two transition energies measured in the same origin as
    /// the singles, `e_i + e_j - e_g`. Pairs sharing exactly one site couple
    /// through J between the two unshared sites.
    pub fn doubles_hamiltonian(&self) -> Result<DMatrix<f64>> {
        if self.n_sites() < 2 {
            return Err(Error::invalid(
                "model.site_energies",
                "doubly excited manifold needs at least two sites",
            ));
        }
        let pairs = self.pairs();
        let nd = pairs.len();
        let eps = &self.site_energies;
        let mut h = DMatrix::zeros(nd, nd);
        for (p, &(i, j)) in pairs.iter().enumerate() {
            h[(p, p)] = eps[i] + eps[j] - self.ground_energy;
            for (q, &(k, l)) in pairs.iter().enumerate() {
                if p == q {
                    continue;
                }
                let unshared = if i == k {
                    Some((j, l))
                } else if i == l {
                    Some((j, k))
                } else if j == k {
                    Some((i, l))
                } else if j == l {
                    Some((i, k))
                } else {
                    None
                };
                if let Some((a, b)) = unshared {
                    h[(p, q)] = self.couplings[(a, b)];
                }
            }
        }
        Ok(h)
    }
}

/// Eigenvalues (descending) and column eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    pub energies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }
}

/// Diagonalize a real symmetric matrix with the ordering and sign
/// conventions of this crate.
pub fn diagonalize_sorted(h: &DMatrix<f64>) -> Eigensystem {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut vectors = DMatrix::zeros(n, n);
    let mut energies = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        energies.push(eig.eigenvalues[src]);
        let mut v = eig.eigenvectors.column(src).clone_owned();
        let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        // first component within rounding of the maximum decides the sign
        let pivot = v
            .iter()
            .position(|x| x.abs() >= max * (1.0 - 1e-10))
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Eigensystem { energies, vectors }
}

pub fn diagonalize_singles(model: &ExcitonModel) -> Eigensystem {
    diagonalize_sorted(&model.singles_hamiltonian())
}

/// Doubles eigensystem plus the pair labels of its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublesBasis {
    pub pairs: Vec<(usize, usize)>,
    pub system: Eigensystem,
}

pub fn build_doubles(model: &ExcitonModel) -> Result<DoublesBasis> {
    let h = model.doubles_hamiltonian()?;
    Ok(DoublesBasis {
        pairs: model.pairs(),
        system: diagonalize_sorted(&h),
    })
}

/// Hellmann-Feynman gradients `d e_m / d Q_j = |<j|m>|^2`, returned as a
/// (state x site) matrix.
pub fn energy_gradients(singles: &Eigensystem) -> DMatrix<f64> {
    singles.vectors.transpose().map(|v| v * v)
}

/// Doubles gradients: site mode j shifts every pair that contains j.
pub fn doubles_gradients(doubles: &DoublesBasis, n_sites: usize) -> DMatrix<f64> {
    let nd = doubles.system.dim();
    let mut g = DMatrix::zeros(nd, n_sites);
    for n in 0..nd {
        for (p, &(i, j)) in doubles.pairs.iter().enumerate() {
            let w = doubles.system.vectors[(p, n)].powi(2);
            g[(n, i)] += w;
            g[(n, j)] += w;
        }
    }
    g
}

/// Nonadiabatic couplings `A^j_{n,m} = -i <n|dH/dQ_j|m> / (e_n - e_m)` at
/// Q = 0, one (state x state) matrix per site. `site_projection(j)` gives
/// the matrix of `dH/dQ_j` in the eigenbasis.
fn couplings_from_projections(
    energies: &[f64],
    n_sites: usize,
    degeneracy_tol: f64,
    site_projection: impl Fn(usize) -> DMatrix<f64>,
) -> Result<Vec<DMatrix<C64>>> {
    let n = energies.len();
    for a in 0..n {
        for b in 0..a {
            let gap = (energies[a] - energies[b]).abs();
            if gap < degeneracy_tol {
                return Err(Error::DegenerateStates {
                    first: b,
                    second: a,
                    gap,
                    tol: degeneracy_tol,
                });
            }
        }
    }
    Ok((0..n_sites)
        .map(|j| {
            let proj = site_projection(j);
            DMatrix::from_fn(n, n, |a, b| {
                if a == b {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, -proj[(a, b)] / (energies[a] - energies[b]))
                }
            })
        })
        .collect())
}

/// Singles nonadiabatic couplings, `<n|j><j|m>` in the numerator.
pub fn nonadiabatic_couplings(
    singles: &Eigensystem,
    degeneracy_tol: f64,
) -> Result<Vec<DMatrix<C64>>> {
    let v = &singles.vectors;
    let n_sites = v.nrows();
    couplings_from_projections(&singles.energies, n_sites, degeneracy_tol, |j| {
        let row = v.row(j);
        row.transpose() * row
    })
}

/// Doubles nonadiabatic couplings; `dH/dQ_j` projects onto every pair
/// containing site j.
pub fn doubles_nonadiabatic_couplings(
    doubles: &DoublesBasis,
    n_sites: usize,
    degeneracy_tol: f64,
) -> Result<Vec<DMatrix<C64>>> {
    let w = &doubles.system.vectors;
    couplings_from_projections(&doubles.system.energies, n_sites, degeneracy_tol, |j| {
        let nd = w.ncols();
        let mut proj = DMatrix::zeros(nd, nd);
        for (p, &(a, b)) in doubles.pairs.iter().enumerate() {
            if a == j || b == j {
                let row = w.row(p);
                proj += row.transpose() * row;
            }
        }
        proj
    })
}

/// Transition dipoles in the stationary basis: `mu_{g,m}` and `mu_{m,n}`.
pub fn dipole_matrices(
    model: &ExcitonModel,
    singles: &Eigensystem,
    doubles: Option<&DoublesBasis>,
) -> (DVector<f64>, DMatrix<f64>) {
    let v = &singles.vectors;
    let (mu_g, site_mu) = match &model.dipoles {
        DipoleSpec::PerSite(mu) => {
            let site = DVector::from_column_slice(mu);
            (v.transpose() * &site, site)
        }
        DipoleSpec::PerState {
            ground_to_singles, ..
        } => {
            let mu_g = DVector::from_column_slice(ground_to_singles);
            let site = v * &mu_g;
            (mu_g, site)
        }
    };
    let Some(doubles) = doubles else {
        return (mu_g, DMatrix::zeros(singles.dim(), 0));
    };
    if let DipoleSpec::PerState {
        singles_to_doubles: Some(sd),
        ..
    } = &model.dipoles
    {
        return (mu_g, sd.clone());
    }
    let ns = singles.dim();
    let w = &doubles.system.vectors;
    let nd = w.ncols();
    let mut mu_sd = DMatrix::zeros(ns, nd);
    for m in 0..ns {
        for n in 0..nd {
            mu_sd[(m, n)] = doubles
                .pairs
                .iter()
                .enumerate()
                .map(|(p, &(i, j))| (site_mu[j] * v[(i, m)] + site_mu[i] * v[(j, m)]) * w[(p, n)])
                .sum();
        }
    }
    (mu_g, mu_sd)
}

/// Options controlling the stationary-basis build.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOptions {
    pub degeneracy_tol: f64,
    /// Build nonadiabatic couplings inside the doubles manifold. When off,
    /// relaxation terms with doubles indices vanish.
    pub doubles_relaxation: bool,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            doubles_relaxation: true,
        }
    }
}

/// Every stationary-basis quantity the response assembly needs.
///
/// States are addressed in a unified index space: singles `0..n_singles`,
/// doubles `n_singles..n_singles + n_doubles`.
#[derive(Debug, Clone)]
pub struct StationaryBasis {
    pub ground_energy: f64,
    pub singles: Eigensystem,
    pub doubles: Option<DoublesBasis>,
    /// (state x site) gradients for all states in the unified index space.
    pub gradients: DMatrix<f64>,
    /// Per-site couplings among singles.
    pub na_singles: Vec<DMatrix<C64>>,
    /// Per-site couplings among doubles (zero matrices when disabled).
    pub na_doubles: Vec<DMatrix<C64>>,
    pub dipole_g: DVector<f64>,
    pub dipole_sd: DMatrix<f64>,
}

impl StationaryBasis {
    pub fn build(model: &ExcitonModel, options: BasisOptions) -> Result<Self> {
        model.validate()?;
        let n_sites = model.n_sites();
        let singles = diagonalize_singles(model);
        let doubles = if n_sites >= 2 {
            Some(build_doubles(model)?)
        } else {
            None
        };
        let ns = singles.dim();
        let nd = doubles.as_ref().map_or(0, |d| d.system.dim());
        let mut gradients = DMatrix::zeros(ns + nd, n_sites);
        gradients
            .rows_mut(0, ns)
            .copy_from(&energy_gradients(&singles));
        if let Some(d) = &doubles {
            gradients
                .rows_mut(ns, nd)
                .copy_from(&doubles_gradients(d, n_sites));
        }
        let na_singles = nonadiabatic_couplings(&singles, options.degeneracy_tol)?;
        let na_doubles = match &doubles {
            Some(d) if options.doubles_relaxation => {
                doubles_nonadiabatic_couplings(d, n_sites, options.degeneracy_tol)?
            }
            _ => vec![DMatrix::zeros(nd, nd); n_sites],
        };
        let (dipole_g, dipole_sd) = dipole_matrices(model, &singles, doubles.as_ref());
        Ok(Self {
            ground_energy: model.ground_energy,
            singles,
            doubles,
            gradients,
            na_singles,
            na_doubles,
            dipole_g,
            dipole_sd,
        })
    }

    pub fn n_singles(&self) -> usize {
        self.singles.dim()
    }

    pub fn n_doubles(&self) -> usize {
        self.doubles.as_ref().map_or(0, |d| d.system.dim())
    }

    pub fn n_sites(&self) -> usize {
        self.gradients.ncols()
    }

    /// Energy of a state in the unified index space.
    pub fn energy(&self, state: usize) -> f64 {
        let ns = self.n_singles();
        if state < ns {
            self.singles.energies[state]
        } else {
            self.doubles.as_ref().expect("doubles index without doubles").system.energies[state - ns]
        }
    }

    /// Unified index of doubles state `n`.
    pub fn double(&self, n: usize) -> usize {
        self.n_singles() + n
    }

    /// `sum_j g_mj g_nj`, the bath-overlap of two states' gradients.
    pub fn gradient_overlap(&self, m: usize, n: usize) -> f64 {
        self.gradients.row(m).dot(&self.gradients.row(n))
    }

    /// `A^j_{k,l}` for both indices in the same manifold (unified indices).
    /// Cross-manifold couplings are never built and read as zero.
    pub fn na_coupling(&self, site: usize, k: usize, l: usize) -> C64 {
        let ns = self.n_singles();
        match (k < ns, l < ns) {
            (true, true) => self.na_singles[site][(k, l)],
            (false, false) => self.na_doubles[site][(k - ns, l - ns)],
            _ => C64::new(0.0, 0.0),
        }
    }
}
