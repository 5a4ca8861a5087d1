//! Heat kernel with respect to `mu` from the full spectral decomposition of
//! the generator.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MeasuredNetwork;
use crate::volume::{log_grid, ScaleFunctions};

/// Largest network handled by the dense eigensolver.
pub const MAX_DENSE_VERTICES: usize = 3000;
/// Points in a default time grid.
pub const TIME_GRID_POINTS: usize = 40;

/// Eigenpairs of `-L` for a symmetric matrix `lap` taken with respect to the
/// weights `mass`: `lap phi = lambda M phi`, ascending, `M`-orthonormal.
pub(crate) fn weighted_eigen(lap: &DMatrix<f64>, mass: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = mass.len();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (lap[(i, j)] + lap[(j, i)]) * inv_sqrt[i] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let phi = DMatrix::from_fn(n, n, |x, k| eig.eigenvectors[(x, order[k])] * inv_sqrt[x]);
    (values, phi)
}

/// Eigenvalues `lambda_k` (ascending) and `mu`-orthonormal eigenfunctions
/// `phi_k` of `-L`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` holds `phi_k`.
    phi: DMatrix<f64>,
    measure: Vec<f64>,
    total_mass: f64,
}

pub fn spectral_decompose(net: &MeasuredNetwork) -> Result<SpectralDecomposition> {
    let n = net.len();
    if n > MAX_DENSE_VERTICES {
        return Err(Error::TooLarge(n, MAX_DENSE_VERTICES));
    }
    let (mut eigenvalues, mut phi) = weighted_eigen(&net.laplacian(), net.measure());
    let total_mass = net.total_mass();
    eigenvalues[0] = 0.0;
    let c = 1.0 / total_mass.sqrt();
    phi.column_mut(0).fill(c);
    for v in eigenvalues.iter_mut().skip(1) {
        *v = v.max(0.0);
    }
    Ok(SpectralDecomposition { eigenvalues, phi, measure: net.measure().to_vec(), total_mass })
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTime(t))
    }
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    fn weights(&self, t: f64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (-l * t).exp()).collect()
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(x))
        }
    }

    /// Largest `|| -lap phi_k - lambda_k M phi_k ||_inf` over all pairs.
    pub fn max_residual(&self, net: &MeasuredNetwork) -> f64 {
        (0..self.len())
            .map(|k| {
                let col: Vec<f64> = self.phi.column(k).iter().copied().collect();
                let lphi = net.apply_generator(&col);
                lphi.iter()
                    .zip(&col)
                    .map(|(a, p)| (a + self.eigenvalues[k] * p).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `Phi^T M Phi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let mut weighted = self.phi.clone();
        for x in 0..n {
            let m = self.measure[x];
            weighted.row_mut(x).scale_mut(m);
        }
        let gram = self.phi.transpose() * weighted;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `p_t(x, x)` for every vertex.
    pub fn diagonal(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        let w = self.weights(t);
        Ok((0..self.len())
            .map(|x| {
                let row = self.phi.row(x);
                row.iter().zip(&w).map(|(p, w)| w * p * p).sum()
            })
            .collect())
    }

    /// `y -> p_t(x, y)`.
    pub fn kernel_row(&self, t: f64, x: usize) -> Result<Vec<f64>> {
        check_time(t)?;
        self.check_vertex(x)?;
        let w = self.weights(t);
        let coeffs: Vec<f64> = self.phi.row(x).iter().zip(&w).map(|(p, w)| p * w).collect();
        Ok((0..self.len())
            .map(|y| self.phi.row(y).iter().zip(&coeffs).map(|(p, c)| p * c).sum())
            .collect())
    }

    /// Full kernel matrix `p_t(., .)`.
    pub fn kernel_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        check_time(t)?;
        let w = self.weights(t);
        let mut scaled = self.phi.clone();
        for (k, wk) in w.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*wk);
        }
        let mut p = scaled * self.phi.transpose();
        // exact symmetry
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        Ok(p)
    }
}

/// `p_t(x, y) = sum_k exp(-lambda_k t) phi_k(x) phi_k(y)`.
pub fn heat_kernel(dec: &SpectralDecomposition, t: f64, x: usize, y: usize) -> Result<f64> {
    check_time(t)?;
    dec.check_vertex(x)?;
    dec.check_vertex(y)?;
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    Ok(dec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, l)| (-l * t).exp() * dec.phi[(a, k)] * dec.phi[(b, k)])
        .sum())
}

/// `P_t f (x) = sum_y p_t(x, y) f(y) mu(y)`.
pub fn semigroup_apply(dec: &SpectralDecomposition, t: f64, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != dec.len() {
        return Err(Error::LengthMismatch { expected: dec.len(), got: f.len() });
    }
    if !(t >= 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    let n = dec.len();
    let coeffs: Vec<f64> = (0..n)
        .map(|k| {
            let a: f64 = (0..n).map(|x| dec.phi[(x, k)] * f[x] * dec.measure[x]).sum();
            a * (-dec.eigenvalues[k] * t).exp()
        })
        .collect();
    Ok((0..n).map(|x| dec.phi.row(x).iter().zip(&coeffs).map(|(p, c)| p * c).sum()).collect())
}

/// `mu`-weighted 2-norm.
pub fn weighted_norm2(f: &[f64], measure: &[f64]) -> f64 {
    f.iter().zip(measure).map(|(v, m)| v * v * m).sum::<f64>().sqrt()
}

/// `mu`-weighted 1-norm.
pub fn weighted_norm1(f: &[f64], measure: &[f64]) -> f64 {
    f.iter().zip(measure).map(|(v, m)| v.abs() * m).sum()
}

/// Logarithmic time grid `[h(r_min), h(r_max / 2)]` derived from the model window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_lo: f64,
    pub t_hi: f64,
    pub grid: Vec<f64>,
}

pub fn time_window(scale: &ScaleFunctions) -> Result<TimeWindow> {
    let w = scale.model().window;
    let t_lo = scale.h(w.r_min);
    let t_hi = scale.h(0.5 * w.r_max);
    if !(t_hi > t_lo) {
        return Err(Error::WindowTooSmall(format!(
            "time window [{t_lo:e}, {t_hi:e}] from radii [{:e}, {:e}] is empty",
            w.r_min,
            0.5 * w.r_max
        )));
    }
    Ok(TimeWindow { t_lo, t_hi, grid: log_grid(t_lo, t_hi, TIME_GRID_POINTS) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltracontractivityRow {
    pub t: f64,
    /// `sup_f ||P_t f||_2 / ||f||_1 = max_x sqrt(p_{2t}(x, x))`.
    pub gamma: f64,
    /// Largest ratio over the explicit test functions.
    pub tested: f64,
    /// `gamma(t)^2 t / h_l^{-1}(t)`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UltracontractivityReport {
    pub rows: Vec<UltracontractivityRow>,
    pub fitted_constant: f64,
    /// Ratio of the largest to the smallest per-time constant.
    pub variation: f64,
}

/// Ratios `||P_t f||_2 / ||f||_1` for point masses and normalised ball
/// indicators, compared with `gamma(t)^2 <= c h_l^{-1}(t) / t`.
pub fn ultracontractivity_profile(
    dec: &SpectralDecomposition,
    scale: &ScaleFunctions,
    times: &[f64],
    test_functions: &[Vec<f64>],
) -> Result<UltracontractivityReport> {
    let rows: Vec<UltracontractivityRow> = times
        .par_iter()
        .map(|&t| -> Result<UltracontractivityRow> {
            let diag = dec.diagonal(2.0 * t)?;
            let gamma = diag.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt();
            let mut tested = 0.0f64;
            for f in test_functions {
                let pf = semigroup_apply(dec, t, f)?;
                tested = tested.max(weighted_norm2(&pf, dec.measure()) / weighted_norm1(f, dec.measure()));
            }
            let constant = gamma * gamma * t / scale.h_l_inv(t);
            Ok(UltracontractivityRow { t, gamma, tested, constant })
        })
        .collect::<Result<_>>()?;
    let hi = rows.iter().map(|r| r.constant).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
    Ok(UltracontractivityReport { rows, fitted_constant: hi, variation: hi / lo })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub t: f64,
    pub x: usize,
    /// `E(p_t(x, .), p_t(x, .))` from the edge sum.
    pub energy: f64,
    /// `p_t(x, x) / t`.
    pub bound: f64,
}

pub const ENERGY_SLACK: f64 = 1e-10;

/// Energy of the kernel row against `p_t(x, x) / t`; a violation means the
/// decomposition is wrong.
pub fn kernel_energy_check(net: &MeasuredNetwork, dec: &SpectralDecomposition, t: f64, x: usize) -> Result<EnergyCheck> {
    let row = dec.kernel_row(t, x)?;
    let energy = net.dirichlet_energy(&row)?;
    let bound = row[x] / t;
    if energy > bound + ENERGY_SLACK * bound.max(1.0) {
        return Err(Error::Solver(format!(
            "kernel energy {energy:e} exceeds p_t(x,x)/t = {bound:e} at x = {x}, t = {t:e}"
        )));
    }
    Ok(EnergyCheck { t, x, energy, bound })
}

/// Rows `(t, x, y, p)`.
pub fn write_kernel_samples(path: impl AsRef<Path>, rows: &[(f64, usize, usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "y", "p"])?;
    for (t, x, y, p) in rows {
        w.write_record([format!("{t:e}"), x.to_string(), y.to_string(), format!("{p:e}")])?;
    }
    w.flush()?;
    Ok(())
}
