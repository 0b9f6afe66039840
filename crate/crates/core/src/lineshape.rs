//! Decoherence terms: X, Y, Z and the traced exponents for each pathway.
//!
//! With identical uncorrelated site baths every state dependence factors out
//! of the bath integrals:
//!
//! - `X_m(t) = G_mm g(t)`,
//! - `Y_mn(t, s) = G_mn y(t, s)`,
//! - `Z_mn(t) = G_mn y(t, t)`,
//!
//! where `G_mn = sum_j (d e_m / d Q_j)(d e_n / d Q_j)`. Only the universal
//! `g` and `y` need the frequency sum; [`DecoherenceSource`] supplies them at
//! the three interval times of one grid point.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bath::SpectralGrid;
use crate::kernels::{exp_integral, one_minus_cos_over_sq, sin_minus_x_over_sq};
use crate::model::StationaryBasis;
use crate::C64;

/// One of the three inter-pulse intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    T1,
    T2,
    T3,
}

/// `g(tau) = int_0^tau dt' int_0^t' dt'' C(t' - t'')`.
pub fn lineshape_g(grid: &SpectralGrid, tau: f64) -> C64 {
    grid.lines()
        .map(|(w, a, e)| {
            let x = w * tau;
            C64::new((a + e) * one_minus_cos_over_sq(x), (a - e) * sin_minus_x_over_sq(x))
        })
        .sum::<C64>()
        * (tau * tau)
}

/// `y(tau, sigma) = int_0^tau dt' int_0^sigma dt'' C(t' - t'')`.
pub fn lineshape_y(grid: &SpectralGrid, tau: f64, sigma: f64) -> C64 {
    grid.lines()
        .map(|(w, a, e)| {
            let jt = exp_integral(w, tau);
            let js = exp_integral(w, sigma);
            jt.conj() * js * a + jt * js.conj() * e
        })
        .sum()
}

/// Per-line `J(w, tau)` for every time of an axis, stored line-major.
fn line_integrals(grid: &SpectralGrid, taus: &[f64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(grid.len() * taus.len());
    for &w in &grid.frequencies {
        out.extend(taus.iter().map(|&t| exp_integral(w, t)));
    }
    out
}

/// `y(tau_i, sigma_j)` for every pair of two axes.
pub fn lineshape_y_matrix(grid: &SpectralGrid, taus: &[f64], sigmas: &[f64]) -> DMatrix<C64> {
    let ns = sigmas.len();
    let js = line_integrals(grid, sigmas);
    let rows: Vec<Vec<C64>> = taus
        .par_iter()
        .map(|&tau| {
            let mut row = vec![C64::new(0.0, 0.0); ns];
            for (k, (w, a, e)) in grid.lines().enumerate() {
                let jt = exp_integral(w, tau);
                let (u, v) = (jt.conj() * a, jt * e);
                for (acc, j) in row.iter_mut().zip(&js[k * ns..(k + 1) * ns]) {
                    *acc += u * j + v * j.conj();
                }
            }
            row
        })
        .collect();
    DMatrix::from_fn(taus.len(), ns, |i, j| rows[i][j])
}

/// Universal lineshape values at the three interval times of one point.
pub trait DecoherenceSource {
    fn g(&self, slot: Slot) -> C64;
    /// `y(t_a, t_b)`; `y(t_b, t_a)` is its complex conjugate.
    fn y(&self, a: Slot, b: Slot) -> C64;
}

/// Direct evaluation at arbitrary scaled times (one frequency sum per call).
#[derive(Debug, Clone, Copy)]
pub struct PointLineshape<'a> {
    pub grid: &'a SpectralGrid,
    pub taus: [f64; 3],
}

impl PointLineshape<'_> {
    fn tau(&self, slot: Slot) -> f64 {
        match slot {
            Slot::T1 => self.taus[0],
            Slot::T2 => self.taus[1],
            Slot::T3 => self.taus[2],
        }
    }
}

impl DecoherenceSource for PointLineshape<'_> {
    fn g(&self, slot: Slot) -> C64 {
        lineshape_g(self.grid, self.tau(slot))
    }

    fn y(&self, a: Slot, b: Slot) -> C64 {
        lineshape_y(self.grid, self.tau(a), self.tau(b))
    }
}

/// `g` and `y` tabulated on the t1 / t3 axes for one t2.
///
/// `y13` does not depend on t2 and can be shared between snapshots.
#[derive(Debug, Clone)]
pub struct LineshapeSnapshot {
    pub g1: Vec<C64>,
    pub g2: C64,
    pub g3: Vec<C64>,
    /// `y(t1_i, t3_j)`.
    pub y13: std::sync::Arc<DMatrix<C64>>,
    /// `y(t1_i, t2)`.
    pub y12: Vec<C64>,
    /// `y(t2, t3_j)`.
    pub y23: Vec<C64>,
    pub y22: C64,
    pub y11: Vec<C64>,
    pub y33: Vec<C64>,
}

impl LineshapeSnapshot {
    pub fn build(
        grid: &SpectralGrid,
        taus1: &[f64],
        tau2: f64,
        taus3: &[f64],
        y13: std::sync::Arc<DMatrix<C64>>,
    ) -> Self {
        assert_eq!(y13.shape(), (taus1.len(), taus3.len()));
        let g = |ts: &[f64]| ts.par_iter().map(|&t| lineshape_g(grid, t)).collect::<Vec<_>>();
        let diag = |ts: &[f64]| ts.par_iter().map(|&t| lineshape_y(grid, t, t)).collect::<Vec<_>>();
        Self {
            g1: g(taus1),
            g2: lineshape_g(grid, tau2),
            g3: g(taus3),
            y13,
            y12: taus1.par_iter().map(|&t| lineshape_y(grid, t, tau2)).collect(),
            y23: taus3.par_iter().map(|&t| lineshape_y(grid, tau2, t)).collect(),
            y22: lineshape_y(grid, tau2, tau2),
            y11: diag(taus1),
            y33: diag(taus3),
        }
    }

    pub fn at(&self, i1: usize, i3: usize) -> SnapshotPoint<'_> {
        SnapshotPoint { snap: self, i1, i3 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SnapshotPoint<'a> {
    snap: &'a LineshapeSnapshot,
    i1: usize,
    i3: usize,
}

impl DecoherenceSource for SnapshotPoint<'_> {
    fn g(&self, slot: Slot) -> C64 {
        match slot {
            Slot::T1 => self.snap.g1[self.i1],
            Slot::T2 => self.snap.g2,
            Slot::T3 => self.snap.g3[self.i3],
        }
    }

    fn y(&self, a: Slot, b: Slot) -> C64 {
        let s = self.snap;
        match (a, b) {
            (Slot::T1, Slot::T1) => s.y11[self.i1],
            (Slot::T2, Slot::T2) => s.y22,
            (Slot::T3, Slot::T3) => s.y33[self.i3],
            (Slot::T1, Slot::T2) => s.y12[self.i1],
            (Slot::T1, Slot::T3) => s.y13[(self.i1, self.i3)],
            (Slot::T2, Slot::T3) => s.y23[self.i3],
            (b, a) => self.y(a, b).conj(),
        }
    }
}

/// Gradient overlaps `G_mn` over the unified state index space.
pub fn gradient_overlaps(basis: &StationaryBasis) -> DMatrix<f64> {
    &basis.gradients * basis.gradients.transpose()
}

/// X / Y / Z terms and pathway exponents for one point.
pub struct Decoherence<'a, S> {
    pub source: &'a S,
    pub overlaps: &'a DMatrix<f64>,
}

impl<S: DecoherenceSource> Decoherence<'_, S> {
    pub fn x(&self, m: usize, t: Slot) -> C64 {
        self.source.g(t) * self.overlaps[(m, m)]
    }

    /// Complex conjugate of `X_m`.
    pub fn x_dag(&self, m: usize, t: Slot) -> C64 {
        self.x(m, t).conj()
    }

    pub fn y(&self, m: usize, n: usize, t: Slot, s: Slot) -> C64 {
        self.source.y(t, s) * self.overlaps[(m, n)]
    }

    pub fn z(&self, m: usize, n: usize, t: Slot) -> C64 {
        self.y(m, n, t, t)
    }

    /// Stimulated-emission exponent for singles `m2..m5`.
    pub fn d_se(&self, m2: usize, m3: usize, m4: usize, m5: usize) -> C64 {
        use Slot::*;
        self.x_dag(m2, T1) + self.x_dag(m3, T2) + self.x(m4, T3) + self.x(m5, T2)
            + self.y(m2, m3, T1, T2)
            - self.y(m2, m4, T1, T3)
            - self.y(m2, m5, T1, T2)
            - self.y(m3, m4, T2, T3)
            - self.z(m3, m5, T2)
            + self.y(m4, m5, T3, T2)
    }

    /// Ground-state-bleach exponent; contains no t2 term.
    pub fn d_gsb(&self, m2: usize, m3: usize) -> C64 {
        use Slot::*;
        self.x_dag(m2, T1) + self.x(m3, T3) - self.y(m2, m3, T1, T3)
    }

    /// Excited-state-absorption exponent; `n1` is a unified doubles index.
    pub fn d_esa(&self, m2: usize, m3: usize, m4: usize, n1: usize, m5: usize) -> C64 {
        use Slot::*;
        self.x_dag(m2, T1) + self.x_dag(m3, T2) + self.x_dag(m4, T3) + self.x(n1, T3)
            + self.x(m5, T2)
            + self.y(m2, m3, T1, T2)
            + self.y(m2, m4, T1, T3)
            - self.y(m2, n1, T1, T3)
            - self.y(m2, m5, T1, T2)
            + self.y(m3, m4, T2, T3)
            - self.y(m3, n1, T2, T3)
            - self.z(m3, m5, T2)
            - self.z(m4, n1, T3)
            - self.y(m4, m5, T3, T2)
            + self.y(n1, m5, T3, T2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::BathSpec;
    use crate::units::fs_to_scaled;

    fn grid() -> SpectralGrid {
        BathSpec::ohmic(63.6, 53.0, 77.0).unwrap().grid().unwrap()
    }

    #[test]
    fn zero_time_values_vanish() {
        let g = grid();
        assert_eq!(lineshape_g(&g, 0.0), C64::new(0.0, 0.0));
        assert_eq!(lineshape_y(&g, 0.0, 0.3), C64::new(0.0, 0.0));
        assert_eq!(lineshape_y(&g, 0.3, 0.0), C64::new(0.0, 0.0));
    }

    #[test]
    fn square_is_twice_the_triangle() {
        let g = grid();
        for &t in &[1.0, 37.0, 250.0, 900.0] {
            let tau = fs_to_scaled(t);
            let z = lineshape_y(&g, tau, tau);
            let x = lineshape_g(&g, tau);
            assert!(z.im.abs() < 1e-13 * z.re.abs());
            assert!((z.re - 2.0 * x.re).abs() < 1e-12 * z.re);
            assert!(x.re > 0.0);
        }
    }

    #[test]
    fn y_swaps_to_conjugate() {
        let g = grid();
        let (a, b) = (fs_to_scaled(50.0), fs_to_scaled(80.0));
        let d = lineshape_y(&g, a, b) - lineshape_y(&g, b, a).conj();
        assert!(d.norm() < 1e-14 * lineshape_y(&g, a, b).norm());
    }

    #[test]
    fn long_time_imaginary_slope_is_reorganization() {
        let g = grid();
        let (t1, t2) = (fs_to_scaled(2000.0), fs_to_scaled(2100.0));
        let slope = (lineshape_g(&g, t2).im - lineshape_g(&g, t1).im) / (t2 - t1);
        assert!((slope + 63.6).abs() < 1e-2 * 63.6, "slope {slope}");
    }

    #[test]
    fn matrix_matches_pointwise() {
        let g = grid();
        let t1: Vec<f64> = [0.0, 12.0, 400.0].iter().map(|&t| fs_to_scaled(t)).collect();
        let t3: Vec<f64> = [0.0, 8.0, 100.0, 250.0].iter().map(|&t| fs_to_scaled(t)).collect();
        let m = lineshape_y_matrix(&g, &t1, &t3);
        for (i, &a) in t1.iter().enumerate() {
            for (j, &b) in t3.iter().enumerate() {
                let d = m[(i, j)] - lineshape_y(&g, a, b);
                assert!(d.norm() <= 1e-12 * m[(i, j)].norm().max(1e-300));
            }
        }
    }

    #[test]
    fn snapshot_matches_point_source() {
        let g = grid();
        let t1: Vec<f64> = [0.0, 20.0, 60.0].iter().map(|&t| fs_to_scaled(t)).collect();
        let t3: Vec<f64> = [0.0, 30.0].iter().map(|&t| fs_to_scaled(t)).collect();
        let tau2 = fs_to_scaled(45.0);
        let y13 = std::sync::Arc::new(lineshape_y_matrix(&g, &t1, &t3));
        let snap = LineshapeSnapshot::build(&g, &t1, tau2, &t3, y13);
        let slots = [Slot::T1, Slot::T2, Slot::T3];
        for (i1, &tau1) in t1.iter().enumerate() {
            for (i3, &tau3) in t3.iter().enumerate() {
                let p = PointLineshape { grid: &g, taus: [tau1, tau2, tau3] };
                let s = snap.at(i1, i3);
                for &a in &slots {
                    assert!((p.g(a) - s.g(a)).norm() <= 1e-13 * p.g(a).norm().max(1e-300));
                    for &b in &slots {
                        let d = p.y(a, b) - s.y(a, b);
                        assert!(d.norm() <= 1e-13 * p.y(a, b).norm().max(1e-300));
                    }
                }
            }
        }
    }

    struct Fixed;
    impl DecoherenceSource for Fixed {
        fn g(&self, slot: Slot) -> C64 {
            match slot {
                Slot::T1 => C64::new(1.0, 2.0),
                Slot::T2 => C64::new(0.0, 0.0),
                Slot::T3 => C64::new(0.0, 0.0),
            }
        }
        fn y(&self, _: Slot, _: Slot) -> C64 {
            C64::new(0.0, 0.0)
        }
    }

    #[test]
    fn exponents_reduce_to_first_interval() {
        let ov = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.2, 0.1, 0.7, 0.3, 0.2, 0.3, 2.0]);
        let d = Decoherence { source: &Fixed, overlaps: &ov };
        let expected = C64::new(0.7, -1.4);
        assert_eq!(d.d_se(1, 0, 0, 1), expected);
        assert_eq!(d.d_gsb(1, 0), expected);
        assert_eq!(d.d_esa(1, 0, 1, 2, 0), expected);
    }
}
