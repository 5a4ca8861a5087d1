use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{require_points, sample_indices, BoundCertificate, ExponentSet, GridInfo, RatioTable};
use crate::error::Result;
use crate::exits::{expected_exit_time, exit_times_poisson, killed_decomposition};
use crate::network::MeasuredNetwork;
use crate::resistance::{resistance_ball, ResistanceBall, ResistanceMetric};
use crate::volume::{eval_scale, least_squares, log_grid, FluctuationModel, ScaleFunctions};

/// Exit probabilities below this are dominated by rounding in `1 - survival`.
const TAIL_FLOOR: f64 = 1e-12;
const C_Q_POWERS: std::ops::RangeInclusive<i32> = -6..=6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TailOptions {
    pub centers: usize,
    pub radii: usize,
    pub times: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self { centers: 8, radii: 6, times: 12 }
    }
}

const RADIUS_RULE: &str = "radii log-spaced in [r_min, r_max/2]; balls covering the whole network are skipped";

fn window_balls(
    net: &MeasuredNetwork,
    metric: &ResistanceMetric,
    model: &FluctuationModel,
    opts: &TailOptions,
) -> Result<Vec<ResistanceBall>> {
    let radii = log_grid(model.window.r_min, 0.5 * model.window.r_max, opts.radii.max(1));
    let mut balls = Vec::new();
    for x in sample_indices(net.len(), opts.centers.max(1)) {
        for &r in &radii {
            let ball = resistance_ball(metric, x, r)?;
            if ball.members.len() < net.len() {
                balls.push(ball);
            }
        }
    }
    Ok(balls)
}

/// `(r / s) g(s)^power` with `s = inverse(t / r)`.
fn exponent_term(model: &FluctuationModel, r: f64, s: f64, power: f64) -> f64 {
    r / s * model.g_norm(s).powf(power)
}

fn q_term(scale: &ScaleFunctions, r: f64, t: f64) -> f64 {
    exponent_term(scale.model(), r, scale.q_inv(t / r), scale.gamma1())
}

/// Largest `c_2` with `P <= e * exp(-c_2 E)` at every point.
fn fit_c2(points: &[(f64, f64)]) -> f64 {
    points.iter().map(|&(p, e)| (1.0 - p.ln()) / e).fold(f64::INFINITY, f64::min)
}

/// Exit-time tail `P^x(T_{B(x,r)} <= t) <= c_1 exp(-c_2 (r/q^{-1}(t/r)) g(q^{-1}(t/r))^gamma_1)`
/// and its volume form with `theta_3`; `c_1 = e` is fixed and `c_2` fitted,
/// with `c_q` chosen from powers of 4 to maximise the q-form `c_2`.
pub fn certify_exit_tail(
    net: &MeasuredNetwork,
    metric: &ResistanceMetric,
    model: &FluctuationModel,
    exps: &ExponentSet,
    opts: &TailOptions,
) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let balls = window_balls(net, metric, model, opts)?;
    let per_ball: Vec<Vec<(usize, f64, f64, f64)>> = balls
        .par_iter()
        .map(|ball| -> Result<Vec<_>> {
            let kd = killed_decomposition(net, &ball.members)?;
            let h = scale.h(ball.radius);
            let mut out = Vec::new();
            for t in log_grid(1e-2 * h, 10.0 * h, opts.times.max(1)) {
                let p = 1.0 - kd.survival(ball.center, t)?;
                if p >= TAIL_FLOOR {
                    out.push((ball.center, ball.radius, t, p));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let points: Vec<_> = per_ball.into_iter().flatten().collect();
    require_points("exit_tail", points.len())?;

    let mut best = (f64::NEG_INFINITY, 1.0);
    for k in C_Q_POWERS {
        let c_q = 4f64.powi(k);
        let sc = scale.with_c_q(c_q);
        let pe: Vec<(f64, f64)> = points.iter().map(|&(_, r, t, p)| (p, q_term(&sc, r, t))).collect();
        let c2 = fit_c2(&pe);
        if c2 > best.0 {
            best = (c2, c_q);
        }
    }
    let (c2_q, c_q) = best;
    let sc = scale.with_c_q(c_q);
    let e_q: Vec<f64> = points.iter().map(|&(_, r, t, _)| q_term(&sc, r, t)).collect();
    let e_v: Vec<f64> = points
        .iter()
        .map(|&(_, r, t, _)| exponent_term(model, r, scale.v_inv(t / r), exps.theta3))
        .collect();
    let c2_v = fit_c2(&points.iter().zip(&e_v).map(|(pt, &e)| (pt.3, e)).collect::<Vec<_>>());

    let mut table = RatioTable::new(&["x", "r", "t", "P", "E_q", "E_v"]);
    let mut ratios = Vec::with_capacity(points.len());
    let mut ln_p = Vec::with_capacity(points.len());
    for (i, &(x, r, t, p)) in points.iter().enumerate() {
        table.push(vec![x as f64, r, t, p, e_q[i], e_v[i]]);
        ratios.push(p / (std::f64::consts::E * (-c2_q * e_q[i]).exp()));
        ln_p.push(p.ln());
    }
    let (trend, _, _) = least_squares(&e_q, &ln_p);

    let mut cert = BoundCertificate::new(
        "exit_tail",
        GridInfo {
            description: format!(
                "{} balls (<= {} centers x {} radii) x {} times in [h(r)/100, 10 h(r)]; P >= {TAIL_FLOOR:e}",
                balls.len(),
                opts.centers,
                opts.radii,
                opts.times
            ),
            points: points.len(),
            window_rule: RADIUS_RULE.into(),
        },
        table,
    );
    cert.constant("c1", std::f64::consts::E);
    cert.constant("c2", c2_q);
    cert.constant("c2_volume_form", c2_v);
    cert.constant("c_q", c_q);
    cert.metric("c2_trend", -trend);
    cert.metric("gamma1", scale.gamma1());
    cert.metric("theta3", exps.theta3);
    cert.ratios(&ratios);
    for (name, c2) in [("q-form", c2_q), ("volume form", c2_v)] {
        if !(c2 > 0.0 && c2.is_finite()) {
            cert.violate(format!("no positive c2 for the {name}: {c2}"));
        }
    }
    Ok(cert)
}

/// Expected exit times `c h_l(r g(r)^2) <= E^{x_0} T_{B(x_0, r)}` and
/// `E^x T_{B(x_0, r)} <= c' h_u(r)` for every `x` in the ball; the spread
/// compares the two fits after normalising the lower shape to the upper
/// one at the largest radius.
pub fn certify_exit_times(
    net: &MeasuredNetwork,
    metric: &ResistanceMetric,
    model: &FluctuationModel,
    opts: &TailOptions,
) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let balls = window_balls(net, metric, model, opts)?;
    require_points("exit_times", balls.len())?;
    let rows: Vec<(usize, f64, f64, f64)> = balls
        .par_iter()
        .map(|ball| -> Result<_> {
            let at_center = expected_exit_time(net, ball, ball.center)?.value();
            let all = exit_times_poisson(net, &ball.members)?;
            let worst = ball.members.iter().map(|&x| all[x]).fold(0.0, f64::max);
            Ok((ball.center, ball.radius, at_center, worst))
        })
        .collect::<Result<_>>()?;

    let lower = |r: f64| scale.h_l(r * model.g_norm(r).powi(2));
    let upper = |r: f64| scale.h_u(r);
    let r_top = balls.iter().map(|b| b.radius).fold(0.0, f64::max);
    let norm = upper(r_top) / lower(r_top);

    let mut table = RatioTable::new(&["x", "r", "exit_center", "exit_max", "lower_ratio", "upper_ratio"]);
    let (mut c_lo, mut c_hi) = (f64::INFINITY, 0.0f64);
    let mut ratios = Vec::with_capacity(rows.len());
    for &(x, r, e, worst) in &rows {
        let lo = e / lower(r);
        let up = worst / upper(r);
        c_lo = c_lo.min(lo);
        c_hi = c_hi.max(up);
        ratios.push(e / upper(r));
        table.push(vec![x as f64, r, e, worst, lo, up]);
    }
    let mut cert = BoundCertificate::new(
        "exit_times",
        GridInfo {
            description: format!("{} balls (<= {} centers x {} radii)", balls.len(), opts.centers, opts.radii),
            points: rows.len(),
            window_rule: RADIUS_RULE.into(),
        },
        table,
    );
    cert.constant("c_lower", c_lo);
    cert.constant("c_upper", c_hi);
    cert.constant("c_lower_normalised", c_lo / norm);
    cert.metric("spread", c_hi / (c_lo / norm));
    cert.metric("unit_upper_constant_holds", if c_hi <= 1.0 { 1.0 } else { 0.0 });
    cert.ratios(&ratios);
    if !(c_lo > 0.0 && c_lo.is_finite() && c_hi.is_finite()) {
        cert.violate(format!("exit-time constants not finite and positive: lower {c_lo}, upper {c_hi}"));
    }
    Ok(cert)
}
