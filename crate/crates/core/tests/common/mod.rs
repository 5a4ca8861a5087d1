//! Exact identities shared by the property tests and the acceptance run.

use reskernel::exits::{expected_exit_time, green_kernel};
use reskernel::heat::spectral_decompose;
use reskernel::resistance::{effective_resistance, resistance_ball, resistance_metric};
use reskernel::MeasuredNetwork;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub error: f64,
    pub tol: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.error <= self.tol
    }
}

fn test_function(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|x| ((x as u64 * 7919).wrapping_add(seed.wrapping_mul(104_729)) % 1000) as f64 / 1000.0).collect()
}

/// Largest relative violation of each identity on one network; `seed`
/// picks the perturbed edge, the ball centre and the test function.
pub fn identity_checks(net: &MeasuredNetwork, seed: u64) -> Vec<Check> {
    let n = net.len();
    let metric = resistance_metric(net).unwrap();
    let diam = metric.diameter();
    let mut checks = Vec::new();

    let mut axioms: f64 = 0.0;
    for x in 0..n {
        axioms = axioms.max(metric.get(x, x).abs() / diam);
        for y in 0..n {
            axioms = axioms.max((metric.get(x, y) - metric.get(y, x)).abs() / diam);
            if x != y && metric.get(x, y) <= 0.0 {
                axioms = axioms.max(1.0);
            }
            for z in 0..n {
                let excess = metric.get(x, z) - metric.get(x, y) - metric.get(y, z);
                axioms = axioms.max(excess / diam);
            }
        }
    }
    checks.push(Check { name: "metric axioms", error: axioms, tol: 1e-12 });

    let edge = seed as usize % net.edges().len();
    let stiffer = net.with_conductance(edge, 2.0 * net.edges()[edge].conductance).unwrap();
    let stiffer_metric = resistance_metric(&stiffer).unwrap();
    let mut rayleigh: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            rayleigh = rayleigh.max((stiffer_metric.get(x, y) - metric.get(x, y)) / diam);
        }
    }
    checks.push(Check { name: "Rayleigh monotonicity", error: rayleigh, tol: 1e-12 });

    let f = test_function(n, seed);
    let energy = net.dirichlet_energy(&f).unwrap();
    let mut modulus: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            let bound = metric.get(x, y) * energy;
            if bound > 0.0 {
                modulus = modulus.max(((f[x] - f[y]).powi(2) - bound) / bound);
            }
        }
    }
    checks.push(Check { name: "|f(x)-f(y)|^2 <= R E(f)", error: modulus, tol: 1e-10 });

    let center = seed as usize % n;
    let ecc = (0..n).map(|y| metric.get(center, y)).fold(0.0, f64::max);
    let ball = resistance_ball(&metric, center, 0.5 * ecc).unwrap();
    let complement = ball.complement(n);
    let g = green_kernel(net, &ball).unwrap();
    let (mut g1, mut g2, mut g3, mut g4, mut routes) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let support: Vec<f64> = (0..n).map(|x| if ball.contains(x) { f[x] } else { 0.0 }).collect();
    for &x in &ball.members {
        let row: Vec<f64> = (0..n).map(|y| g.get(x, y)).collect();
        let reproduced = net.dirichlet_form(&row, &support).unwrap();
        g1 = g1.max((reproduced - support[x]).abs() / support[x].abs().max(1e-3));
        let escape = effective_resistance(net, &[x], &complement).unwrap();
        g2 = g2.max((g.get(x, x) - escape).abs() / escape);
        for &y in &ball.members {
            g3 = g3.max((g.get(x, y) - g.get(x, x)) / g.get(x, x));
            g3 = g3.max((g.get(x, y) - g.get(y, x)).abs() / g.get(x, x));
            for &z in &ball.members {
                let bound = metric.get(y, z) * g.get(x, x);
                if bound > 0.0 {
                    g4 = g4.max(((g.get(x, y) - g.get(x, z)).powi(2) - bound) / bound);
                }
            }
        }
        match expected_exit_time(net, &ball, x) {
            Ok(e) => routes = routes.max((e.green - e.poisson).abs() / e.green.abs().max(e.poisson.abs())),
            Err(_) => routes = f64::INFINITY,
        }
    }
    checks.push(Check { name: "E(g_B(x,.), f) = f(x)", error: g1, tol: 1e-9 });
    checks.push(Check { name: "g_B(x,x) = R(x,B^c)", error: g2, tol: 1e-9 });
    checks.push(Check { name: "g_B(x,y) <= g_B(x,x), symmetric", error: g3, tol: 1e-9 });
    checks.push(Check { name: "|g_B(x,y)-g_B(x,z)|^2 <= R(y,z) g_B(x,x)", error: g4, tol: 1e-9 });
    checks.push(Check { name: "E^x T_B green = poisson", error: routes, tol: 1e-9 });

    let dec = spectral_decompose(net).unwrap();
    let (t, s) = (0.5, 1.3);
    let pt = dec.kernel_matrix(t).unwrap();
    let ps = dec.kernel_matrix(s).unwrap();
    let pts = dec.kernel_matrix(t + s).unwrap();
    let half = dec.kernel_matrix(0.5 * t).unwrap();
    let mu = net.measure();
    let scale = pt.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut ck, mut mass, mut norm) = (0.0f64, 0.0f64, 0.0f64);
    for x in 0..n {
        for y in 0..n {
            let composed: f64 = (0..n).map(|z| pt[(x, z)] * ps[(z, y)] * mu[z]).sum();
            ck = ck.max((composed - pts[(x, y)]).abs() / scale);
        }
        let total: f64 = (0..n).map(|y| pt[(x, y)] * mu[y]).sum();
        mass = mass.max((total - 1.0).abs());
        let sq: f64 = (0..n).map(|y| half[(x, y)].powi(2) * mu[y]).sum();
        norm = norm.max((sq - pt[(x, x)]).abs() / pt[(x, x)]);
    }
    checks.push(Check { name: "Chapman-Kolmogorov", error: ck, tol: 1e-8 });
    checks.push(Check { name: "mass conservation", error: mass, tol: 1e-10 });
    checks.push(Check { name: "p_t(x,x) = ||p_{t/2}(x,.)||^2", error: norm, tol: 1e-10 });
    checks
}
