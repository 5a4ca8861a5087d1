//! Process killed on leaving a vertex set: Green kernel, expected exit times
//! and the exit-time distribution.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heat::{weighted_eigen, MAX_DENSE_VERTICES};
use crate::network::{GroundedSolver, MeasuredNetwork};
use crate::resistance::ResistanceBall;

/// Relative agreement required between the Green-kernel and Poisson routes.
pub const ROUTE_TOLERANCE: f64 = 1e-9;

fn member_slots(n: usize, members: &[usize]) -> Result<Vec<Option<usize>>> {
    if members.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut slot = vec![None; n];
    for (k, &x) in members.iter().enumerate() {
        if x >= n {
            return Err(Error::VertexOutOfRange(x));
        }
        slot[x] = Some(k);
    }
    if members.len() == n {
        return Err(Error::NoComplement(members[0]));
    }
    Ok(slot)
}

/// Conductance Laplacian restricted to `members`, keeping full degrees so
/// that jumps out of the set kill the process.
fn killed_laplacian(net: &MeasuredNetwork, members: &[usize], slot: &[Option<usize>]) -> DMatrix<f64> {
    let m = members.len();
    let mut a = DMatrix::zeros(m, m);
    for (k, &x) in members.iter().enumerate() {
        a[(k, k)] = net.degree_weight(x);
        for &(y, c) in net.neighbors(x) {
            if let Some(j) = slot[y] {
                a[(k, j)] -= c;
            }
        }
    }
    a
}

/// Green kernel `g_B(x, y)` of the killed process, a density with respect to `mu`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    members: Vec<usize>,
    slot: Vec<Option<usize>>,
    matrix: DMatrix<f64>,
}

impl GreenKernel {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `g_B(x, y)`, zero when either point lies outside the set.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        match (self.slot.get(x).copied().flatten(), self.slot.get(y).copied().flatten()) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => 0.0,
        }
    }

    /// `E^x T_B = sum_y g_B(x, y) mu(y)`.
    pub fn occupation_mass(&self, net: &MeasuredNetwork, x: usize) -> Result<f64> {
        let i = self.slot.get(x).copied().flatten().ok_or(Error::NotInBall { vertex: x, center: self.members[0] })?;
        Ok(self.members.iter().enumerate().map(|(j, &y)| self.matrix[(i, j)] * net.measure()[y]).sum())
    }
}

pub fn green_kernel(net: &MeasuredNetwork, ball: &ResistanceBall) -> Result<GreenKernel> {
    green_kernel_on(net, &ball.members)
}

/// Green kernel of the process killed on leaving `members`.
pub fn green_kernel_on(net: &MeasuredNetwork, members: &[usize]) -> Result<GreenKernel> {
    let slot = member_slots(net.len(), members)?;
    let a = killed_laplacian(net, members, &slot);
    let chol = nalgebra::Cholesky::new(a)
        .ok_or_else(|| Error::Solver("killed Laplacian is not positive definite".into()))?;
    let mut g = chol.inverse();
    let m = members.len();
    for i in 0..m {
        for j in i + 1..m {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GreenKernel { members: members.to_vec(), slot, matrix: g })
}

/// Expected exit times from every vertex of `members` via one Poisson solve
/// `-L u = 1` on the set, `u = 0` outside.
pub fn exit_times_poisson(net: &MeasuredNetwork, members: &[usize]) -> Result<Vec<f64>> {
    let slot = member_slots(net.len(), members)?;
    let boundary: Vec<usize> = (0..net.len()).filter(|&x| slot[x].is_none()).collect();
    let solver = GroundedSolver::new(net, boundary.iter().copied())?;
    let values: BTreeMap<usize, f64> = boundary.iter().map(|&b| (b, 0.0)).collect();
    solver.solve(&values, &vec![1.0; net.len()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitTime {
    pub green: f64,
    pub poisson: f64,
}

impl ExitTime {
    pub fn value(&self) -> f64 {
        0.5 * (self.green + self.poisson)
    }
}

/// `E^x T_B` computed from the Green kernel and from a Poisson solve; the
/// two must agree to [`ROUTE_TOLERANCE`].
pub fn expected_exit_time(net: &MeasuredNetwork, ball: &ResistanceBall, x: usize) -> Result<ExitTime> {
    if !ball.contains(x) {
        return Err(Error::NotInBall { vertex: x, center: ball.center });
    }
    let green = green_kernel(net, ball)?.occupation_mass(net, x)?;
    let poisson = exit_times_poisson(net, &ball.members)?[x];
    if (green - poisson).abs() > ROUTE_TOLERANCE * green.abs().max(poisson.abs()) {
        return Err(Error::Solver(format!("exit time routes disagree: green {green:e}, poisson {poisson:e}")));
    }
    Ok(ExitTime { green, poisson })
}

/// Spectral decomposition of the killed generator on a vertex set.
#[derive(Debug, Clone)]
pub struct KilledDecomposition {
    members: Vec<usize>,
    slot: Vec<Option<usize>>,
    eigenvalues: Vec<f64>,
    phi: DMatrix<f64>,
    /// `<phi_k, 1>_mu`.
    mass_coeffs: Vec<f64>,
}

pub fn killed_decomposition(net: &MeasuredNetwork, members: &[usize]) -> Result<KilledDecomposition> {
    if members.len() > MAX_DENSE_VERTICES {
        return Err(Error::TooLarge(members.len(), MAX_DENSE_VERTICES));
    }
    let slot = member_slots(net.len(), members)?;
    let a = killed_laplacian(net, members, &slot);
    let mass: Vec<f64> = members.iter().map(|&x| net.measure()[x]).collect();
    let (eigenvalues, phi) = weighted_eigen(&a, &mass);
    let mass_coeffs = (0..members.len())
        .map(|k| (0..members.len()).map(|i| phi[(i, k)] * mass[i]).sum())
        .collect();
    Ok(KilledDecomposition { members: members.to_vec(), slot, eigenvalues, phi, mass_coeffs })
}

impl KilledDecomposition {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn index(&self, x: usize) -> Result<usize> {
        self.slot
            .get(x)
            .copied()
            .flatten()
            .ok_or(Error::NotInBall { vertex: x, center: self.members[0] })
    }

    /// `P^x(T_B > t) = (exp(t Q_B) 1)(x)`.
    pub fn survival(&self, x: usize, t: f64) -> Result<f64> {
        let i = self.index(x)?;
        Ok(self.survival_at(i, t))
    }

    fn survival_at(&self, i: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let s: f64 = self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| (-l * t).exp() * self.phi[(i, k)] * self.mass_coeffs[k])
            .sum();
        s.clamp(0.0, 1.0)
    }

    /// `E^x T_B` from the spectral sum `sum_k phi_k(x) <phi_k, 1> / lambda_k`.
    pub fn mean_exit_time(&self, x: usize) -> Result<f64> {
        let i = self.index(x)?;
        Ok(self
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| self.phi[(i, k)] * self.mass_coeffs[k] / l)
            .sum())
    }

    /// `int_0^inf P^x(T_B > t) dt` by adaptive Simpson quadrature in `ln t`.
    pub fn survival_integral(&self, x: usize, rel_tol: f64) -> Result<f64> {
        let i = self.index(x)?;
        let lmin = self.eigenvalues[0];
        let lmax = *self.eigenvalues.last().unwrap();
        let t_lo = 1e-10 / lmax;
        let t_hi = 60.0 / lmin;
        let f = |u: f64| {
            let t = u.exp();
            self.survival_at(i, t) * t
        };
        // the head contributes about t_lo since the survival is 1 there
        let head = t_lo;
        let body = adaptive_simpson(&f, t_lo.ln(), t_hi.ln(), rel_tol * 1e-2 / lmin, 40);
        Ok(head + body)
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, depth)
}

/// `P^x(T_B <= t)`.
pub fn exit_tail(net: &MeasuredNetwork, ball: &ResistanceBall, x: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let dec = killed_decomposition(net, &ball.members)?;
    Ok(1.0 - dec.survival(x, t)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub center: usize,
    pub r: f64,
    pub x: usize,
    pub mean: f64,
    /// `(t, P^x(T_B <= t))` samples.
    pub tail: Vec<(f64, f64)>,
}

/// Rows `(center, r, x, E, t, tail)`, one per tail sample.
pub fn write_exit_report(path: impl AsRef<Path>, records: &[ExitRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["center", "r", "x", "E", "t", "tail"])?;
    for rec in records {
        for (t, p) in &rec.tail {
            w.write_record([
                rec.center.to_string(),
                format!("{:e}", rec.r),
                rec.x.to_string(),
                format!("{:e}", rec.mean),
                format!("{t:e}"),
                format!("{p:e}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
