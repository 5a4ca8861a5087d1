use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{middle_decade, pearson, require_points, sample_indices, BoundCertificate, ExponentSet, GridInfo, RatioTable, TIME_WINDOW_RULE};
use crate::error::{Error, Result};
use crate::heat::{time_window, SpectralDecomposition};
use crate::resistance::{chaining_probe, probe_chaining_condition, ResistanceMetric};
use crate::volume::{eval_scale, least_squares, FluctuationModel, ScaleFunctions};

/// Kernel values below this fraction of `p_t(x, x)` are left out of the
/// off-diagonal grid: the spectral sum loses its relative accuracy there.
pub const KERNEL_FLOOR: f64 = 1e-9;
pub const CC_SOURCES: usize = 16;
pub const CC_LEN_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffdiagOptions {
    pub sources: usize,
    pub floor: f64,
    /// Constant `c` in the chain-count inequality.
    pub chain_c: f64,
}

impl Default for OffdiagOptions {
    fn default() -> Self {
        Self { sources: 32, floor: KERNEL_FLOOR, chain_c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub x: usize,
    pub y: usize,
    pub t: f64,
    pub n: usize,
    pub chain: Vec<usize>,
    pub step_resistances: Vec<f64>,
}

/// Least `n <= cap` with `d / n <= c h^{-1}(t/n) g(h^{-1}(t/n))^theta_1`.
fn chain_length(scale: &ScaleFunctions, theta1: f64, d: f64, t: f64, c: f64, cap: usize) -> Option<usize> {
    let model = scale.model();
    (1..=cap).find(|&n| {
        let s = scale.h_inv(t / n as f64);
        d / n as f64 <= c * s * model.g_norm(s).powf(theta1)
    })
}

/// Number of chain segments needed between `x` and `y` at time `t`, with the
/// best vertex chain of that length attached. The search is capped at the
/// vertex count.
pub fn chain_count(
    metric: &ResistanceMetric,
    scale: &ScaleFunctions,
    exps: &ExponentSet,
    x: usize,
    y: usize,
    t: f64,
    c: f64,
) -> Result<ChainPlan> {
    if x == y {
        return Err(Error::OverlappingSets(x));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let cap = metric.len();
    let d = metric.get(x, y);
    let n = chain_length(scale, exps.theta1, d, t, c, cap).ok_or_else(|| {
        Error::WindowTooSmall(format!("chain count between {x} and {y} at t = {t:e} exceeds the cap {cap}"))
    })?;
    let probe = chaining_probe(metric, x, y, n)?;
    Ok(ChainPlan { x, y, t, n, chain: probe.chain, step_resistances: probe.step_resistances })
}

pub fn certify_offdiag(
    dec: &SpectralDecomposition,
    metric: &ResistanceMetric,
    model: &FluctuationModel,
    exps: &ExponentSet,
) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let window = time_window(&scale)?;
    certify_offdiag_with(dec, metric, &scale, exps, &window.grid, &OffdiagOptions::default())
}

struct Point {
    t: f64,
    x: usize,
    y: usize,
    d: f64,
    p: f64,
}

/// Off-diagonal upper bound `c_1 (h^{-1}/t) f_l(h^{-1})^{-1} exp(-c_2 (R/V^{-1}(t/R)) g(V^{-1}(t/R))^theta_3)`
/// and, when the chaining probe passes, the lower bound
/// `c_3 (h^{-1}/t) g(h^{-1})^theta_1 exp(-c_4 (R/V^{-1}(t/R)) g(V^{-1}(t/R))^{-theta_2})`.
/// `c_2` and `c_4` come from least-squares slopes in the exponent variable and
/// `c_1`, `c_3` are then the extremal intercepts.
pub fn certify_offdiag_with(
    dec: &SpectralDecomposition,
    metric: &ResistanceMetric,
    scale: &ScaleFunctions,
    exps: &ExponentSet,
    times: &[f64],
    opts: &OffdiagOptions,
) -> Result<BoundCertificate> {
    let theta2 = exps.theta2.ok_or_else(|| {
        Error::InfeasibleExponents("off-diagonal bounds need theta_2; derive the exponents in offdiag mode".into())
    })?;
    let model = scale.model();
    let cc = probe_chaining_condition(metric, CC_SOURCES, CC_LEN_CAP);
    let sources = sample_indices(dec.len(), opts.sources.max(1));
    let per_source: Vec<Vec<Point>> = sources
        .par_iter()
        .map(|&x| -> Result<Vec<Point>> {
            let mut out = Vec::new();
            for &t in times {
                let row = dec.kernel_row(t, x)?;
                let floor = opts.floor * row[x];
                for (y, &p) in row.iter().enumerate() {
                    if y != x && p >= floor && p > 0.0 {
                        out.push(Point { t, x, y, d: metric.get(x, y), p });
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let points: Vec<Point> = per_source.into_iter().flatten().collect();
    require_points("offdiag", points.len())?;

    let g = |r: f64| model.g_norm(r);
    let mut e3 = Vec::with_capacity(points.len());
    let mut e2 = Vec::with_capacity(points.len());
    let mut y_up = Vec::with_capacity(points.len());
    let mut y_lo = Vec::with_capacity(points.len());
    for pt in &points {
        let h = scale.h_inv(pt.t);
        let s = scale.v_inv(pt.t / pt.d);
        let base = pt.d / s;
        e3.push(base * g(s).powf(exps.theta3));
        e2.push(base * g(s).powf(-theta2));
        y_up.push((pt.p * pt.t * model.f_l(h) / h).ln());
        y_lo.push((pt.p * pt.t / (h * g(h).powf(exps.theta1))).ln());
    }

    let (slope_up, _, _) = least_squares(&e3, &y_up);
    let c2 = (-slope_up).max(0.0);
    let ln_c1 = y_up.iter().zip(&e3).map(|(y, e)| y + c2 * e).fold(f64::NEG_INFINITY, f64::max);
    let upper_ratio: Vec<f64> = y_up.iter().zip(&e3).map(|(y, e)| (y + c2 * e - ln_c1).exp()).collect();

    let lower = if cc.passed {
        let (slope_lo, _, _) = least_squares(&e2, &y_lo);
        let c4 = (-slope_lo).max(0.0);
        let ln_c3 = y_lo.iter().zip(&e2).map(|(y, e)| y + c4 * e).fold(f64::INFINITY, f64::min);
        let ratio: Vec<f64> = y_lo.iter().zip(&e2).map(|(y, e)| (y + c4 * e - ln_c3).exp()).collect();
        Some((c4, ln_c3, ratio))
    } else {
        None
    };

    // Shape check against (R^{1+alpha}/t)^{1/alpha} over the middle decade.
    let mid = middle_decade(times);
    let (xi, zeta): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|pt| mid.contains(&pt.t))
        .map(|pt| {
            let a = model.alpha;
            ((pt.d.powf(1.0 + a) / pt.t).powf(1.0 / a), (pt.p * pt.t / scale.h_inv(pt.t)).ln())
        })
        .unzip();

    // Chain counts for the farthest kept target of each (source, time).
    let mut farthest: Vec<&Point> = Vec::new();
    for pt in &points {
        match farthest.last_mut() {
            Some(last) if last.x == pt.x && last.t == pt.t => {
                if pt.d > last.d {
                    *last = pt;
                }
            }
            _ => farthest.push(pt),
        }
    }
    let cap = metric.len();
    let counts: Vec<Option<usize>> = farthest
        .iter()
        .map(|pt| chain_length(scale, exps.theta1, pt.d, pt.t, opts.chain_c, cap))
        .collect();
    let n_max = counts.iter().flatten().copied().max().unwrap_or(0);
    let n_capped = counts.iter().filter(|c| c.is_none()).count();

    let show = sources[sources.len() / 2];
    let mut table = RatioTable::new(&["t", "x", "y", "R", "p", "xi", "upper_ratio", "lower_ratio"]);
    for (i, pt) in points.iter().enumerate() {
        if pt.x == show {
            let a = model.alpha;
            let lr = lower.as_ref().map_or(0.0, |l| l.2[i]);
            table.push(vec![
                pt.t,
                pt.x as f64,
                pt.y as f64,
                pt.d,
                pt.p,
                (pt.d.powf(1.0 + a) / pt.t).powf(1.0 / a),
                upper_ratio[i],
                lr,
            ]);
        }
    }

    let mut cert = BoundCertificate::new(
        "offdiag",
        GridInfo {
            description: format!(
                "{} sources x all targets y != x x {} times; kernel values >= {:e} p_t(x,x)",
                sources.len(),
                times.len(),
                opts.floor
            ),
            points: points.len(),
            window_rule: TIME_WINDOW_RULE.into(),
        },
        table,
    );
    cert.constant("c1", ln_c1.exp());
    cert.constant("c2", c2);
    cert.metric("cc_constant", cc.max_constant);
    cert.metric("cc_passed", if cc.passed { 1.0 } else { 0.0 });
    cert.metric("theta2", theta2);
    cert.metric("theta3", exps.theta3);
    cert.metric("chain_n_max", n_max as f64);
    cert.metric("chain_n_capped", n_capped as f64);
    if xi.len() >= 3 {
        cert.metric("shape_correlation", pearson(&xi, &zeta));
        cert.metric("shape_slope", least_squares(&xi, &zeta).0);
        cert.metric("shape_points", xi.len() as f64);
    }
    cert.ratios(&upper_ratio);
    if !(c2 > 0.0) {
        cert.violate(format!("no decay in the upper exponent: fitted slope {slope_up}"));
    }
    if !ln_c1.is_finite() {
        cert.violate(format!("upper constant c1 is not finite: ln c1 = {ln_c1}"));
    }
    match lower {
        Some((c4, ln_c3, _)) => {
            cert.constant("c3", ln_c3.exp());
            cert.constant("c4", c4);
            cert.metric("lower_bound_attempted", 1.0);
            if !(ln_c3.exp() > 0.0 && ln_c3.is_finite()) {
                cert.violate(format!("lower constant c3 is not positive: ln c3 = {ln_c3}"));
            }
        }
        None => {
            cert.metric("lower_bound_attempted", 0.0);
            cert.witnesses.push(format!(
                "lower bound skipped: chaining probe constant {:.4} exceeds {}",
                cc.max_constant, cc.threshold
            ));
        }
    }
    Ok(cert)
}
