//! Shared fixtures and independent quadrature oracles for the integration
//! tests.
//!
//! The oracles integrate the bath correlation kernels over the time domain
//! with plain trapezoid rules and Romberg extrapolation. They never touch the
//! closed-form time integrals in `echo2d::kernels`.
#![allow(dead_code)]

use echo2d::bath::{BathSpec, SpectralGrid};
use echo2d::model::{BasisOptions, ExcitonModel, StationaryBasis};
use echo2d::units::fs_to_scaled;
use echo2d::C64;
use nalgebra::DMatrix;

pub const GROUND_ENERGY: f64 = -12000.0;
pub const SITE_ENERGIES: [f64; 2] = [-50.0, 50.0];
pub const SITE_COUPLING: f64 = 100.0;
pub const OMEGA_C: f64 = 53.0;
pub const TEMPERATURE: f64 = 77.0;

/// The two-site benchmark dimer with unit per-state dipoles.
pub fn benchmark_model() -> ExcitonModel {
    let couplings = DMatrix::from_row_slice(2, 2, &[0.0, SITE_COUPLING, SITE_COUPLING, 0.0]);
    ExcitonModel::new(
        GROUND_ENERGY,
        SITE_ENERGIES.to_vec(),
        couplings,
        vec![1.0, 1.0],
    )
    .unwrap()
    .with_state_dipoles(vec![1.0, 1.0], None)
    .unwrap()
}

pub fn benchmark_basis() -> StationaryBasis {
    StationaryBasis::build(&benchmark_model(), BasisOptions::default()).unwrap()
}

pub fn benchmark_bath() -> BathSpec {
    BathSpec::ohmic(1.2 * OMEGA_C, OMEGA_C, TEMPERATURE).unwrap()
}

pub fn benchmark_grid() -> SpectralGrid {
    benchmark_bath().grid().unwrap()
}

pub fn relative_error(approx: C64, exact: C64) -> f64 {
    (approx - exact).norm() / exact.norm()
}

/// A difference kernel `K(tau' - tau'')` tabulated on a uniform lattice.
struct DifferenceTable {
    /// `K((k - offset) h)` for `k = 0..len`.
    values: Vec<C64>,
    offset: isize,
}

impl DifferenceTable {
    fn new(kernel: &dyn Fn(f64) -> C64, h: f64, lo: isize, hi: isize) -> Self {
        let values = (lo..=hi).map(|k| kernel(k as f64 * h)).collect();
        Self { values, offset: -lo }
    }

    #[inline]
    fn at(&self, k: isize) -> C64 {
        self.values[(k + self.offset) as usize]
    }
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        0.5
    } else {
        1.0
    }
}

/// Romberg table over three trapezoid levels with step ratios 4:2:1.
fn romberg3(coarse: C64, mid: C64, fine: C64) -> C64 {
    let r1 = (mid * 4.0 - coarse) / 3.0;
    let r2 = (fine * 4.0 - mid) / 3.0;
    (r2 * 16.0 - r1) / 15.0
}

/// Trapezoid steps per fs on the finest level.
const FINE_STEPS_PER_FS: f64 = 4.0;

fn fine_steps(t_fs: f64) -> usize {
    // multiple of 4 so the coarser levels land on the same lattice
    let n = (t_fs * FINE_STEPS_PER_FS).ceil() as usize;
    n.div_ceil(4) * 4
}

/// `int_0^tau dt' e^{i a t'} int_0^t' dt'' e^{i b t''} K(t' - t'')` with `tau`
/// from `t_fs`, phases in cm^-1 and `kernel` taking scaled time.
pub fn ordered_quadrature(kernel: &dyn Fn(f64) -> C64, a: f64, b: f64, t_fs: f64) -> C64 {
    let n = fine_steps(t_fs);
    let h = fs_to_scaled(t_fs) / n as f64;
    let table = DifferenceTable::new(kernel, h, 0, n as isize);
    let level = |stride: usize| -> C64 {
        let m = n / stride;
        let hs = h * stride as f64;
        let mut outer = C64::new(0.0, 0.0);
        for i in 0..=m {
            let mut inner = C64::new(0.0, 0.0);
            for j in 0..=i {
                let w = if i == 0 { 0.0 } else { trapezoid_weight(j, i) };
                inner += C64::from_polar(w, b * (j as f64) * hs) * table.at(((i - j) * stride) as isize);
            }
            outer += C64::from_polar(trapezoid_weight(i, m), a * (i as f64) * hs) * inner * hs;
        }
        outer * hs
    };
    romberg3(level(4), level(2), level(1))
}

/// `int_0^tau dt' int_0^sigma dt'' e^{i a t'} e^{i b t''} K(t' - t'')`.
pub fn rectangle_quadrature(kernel: &dyn Fn(f64) -> C64, a: f64, b: f64, t_fs: f64, s_fs: f64) -> C64 {
    // common step so both sides sit on one lattice
    let h_fs = 1.0 / FINE_STEPS_PER_FS;
    let nt = fine_steps(t_fs);
    let ns = fine_steps(s_fs);
    assert!(
        ((nt as f64) * h_fs - t_fs).abs() < 1e-12 && ((ns as f64) * h_fs - s_fs).abs() < 1e-12,
        "times must be multiples of 1 fs"
    );
    let h = fs_to_scaled(h_fs);
    let table = DifferenceTable::new(kernel, h, -(ns as isize), nt as isize);
    let level = |stride: usize| -> C64 {
        let (mt, ms) = (nt / stride, ns / stride);
        let hs = h * stride as f64;
        let mut total = C64::new(0.0, 0.0);
        for i in 0..=mt {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..=ms {
                let k = (i as isize - j as isize) * stride as isize;
                row += C64::from_polar(trapezoid_weight(j, ms), b * (j as f64) * hs) * table.at(k);
            }
            total += C64::from_polar(trapezoid_weight(i, mt), a * (i as f64) * hs) * row;
        }
        total * hs * hs
    };
    romberg3(level(4), level(2), level(1))
}

/// One closed-form value against its quadrature oracle.
pub struct SpotCheck {
    pub name: String,
    pub closed_form: C64,
    pub quadrature: C64,
}

impl SpotCheck {
    pub fn relative_error(&self) -> f64 {
        relative_error(self.closed_form, self.quadrature)
    }
}

/// Times (fs) at which single-interval terms are checked.
pub const SPOT_TIMES: [f64; 3] = [50.0, 200.0, 500.0];
/// Interval pairs (fs) for the two-interval terms.
pub const SPOT_PAIRS: [(f64, f64); 4] = [(50.0, 80.0), (200.0, 500.0), (500.0, 100.0), (300.0, 300.0)];

/// X, Y, L, O (and N) of every singles index combination of `basis` against
/// direct time-domain quadrature of their defining double integrals.
pub fn reduction_spot_checks(basis: &StationaryBasis, grid: &SpectralGrid) -> Vec<SpotCheck> {
    use echo2d::lineshape::{gradient_overlaps, Decoherence, PointLineshape, Slot};
    use echo2d::population::RelaxationModel;

    let position = |tau: f64| grid.position_kernel(tau);
    let momentum = |tau: f64| grid.momentum_kernel(tau);
    let overlaps = gradient_overlaps(basis);
    let relax = RelaxationModel::new(basis, grid);
    let ns = basis.n_singles();
    let gap = |k: usize, l: usize| basis.energy(k) - basis.energy(l);
    let mut out = Vec::new();

    for &t in &SPOT_TIMES {
        let tau = fs_to_scaled(t);
        let g = ordered_quadrature(&position, 0.0, 0.0, t);
        let source = PointLineshape { grid, taus: [tau, 0.0, 0.0] };
        let dec = Decoherence { source: &source, overlaps: &overlaps };
        for m in 0..ns {
            out.push(SpotCheck {
                name: format!("X_{m}({t})"),
                closed_form: dec.x(m, Slot::T1),
                quadrature: g * overlaps[(m, m)],
            });
        }
        for m in 0..ns {
            for n in 0..ns {
                let quadrature: C64 = (0..ns)
                    .map(|k| relax.coupling_product(m, k, k, n) * ordered_quadrature(&momentum, gap(m, k), gap(k, n), t))
                    .sum();
                if quadrature.norm() == 0.0 {
                    continue;
                }
                out.push(SpotCheck { name: format!("L_{m}{n}({t})"), closed_form: relax.l(m, n, tau), quadrature });
            }
        }
        for (k, l, m, n) in coupled_quads(&relax, ns) {
            let c = relax.coupling_product(k, l, m, n);
            out.push(SpotCheck {
                name: format!("O_{k}{l}{m}{n}({t})"),
                closed_form: relax.o(k, l, m, n, tau),
                quadrature: c * rectangle_quadrature(&momentum, gap(k, l), gap(m, n), t, t),
            });
        }
    }

    for &(t, s) in &SPOT_PAIRS {
        let (tau, sigma) = (fs_to_scaled(t), fs_to_scaled(s));
        let y = rectangle_quadrature(&position, 0.0, 0.0, t, s);
        let source = PointLineshape { grid, taus: [tau, 0.0, sigma] };
        let dec = Decoherence { source: &source, overlaps: &overlaps };
        for m in 0..ns {
            for n in 0..ns {
                out.push(SpotCheck {
                    name: format!("Y_{m}{n}({t},{s})"),
                    closed_form: dec.y(m, n, Slot::T1, Slot::T3),
                    quadrature: y * overlaps[(m, n)],
                });
            }
        }
        for (k, l, m, n) in coupled_quads(&relax, ns) {
            let c = relax.coupling_product(k, l, m, n);
            out.push(SpotCheck {
                name: format!("N_{k}{l}{m}{n}({t},{s})"),
                closed_form: relax.n(k, l, m, n, tau, sigma),
                quadrature: c * rectangle_quadrature(&momentum, gap(k, l), gap(m, n), t, s),
            });
        }
    }
    out
}

/// Index quadruples among singles with a nonzero coupling product.
fn coupled_quads(relax: &echo2d::population::RelaxationModel, ns: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for k in 0..ns {
        for l in 0..ns {
            for m in 0..ns {
                for n in 0..ns {
                    if relax.coupling_product(k, l, m, n).norm() > 0.0 {
                        out.push((k, l, m, n));
                    }
                }
            }
        }
    }
    out
}
