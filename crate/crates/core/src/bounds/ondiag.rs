use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    lowest_decade, middle_decade, require_points, sample_indices, BoundCertificate, ExponentSet, GridInfo,
    RatioTable, TIME_WINDOW_RULE,
};
use crate::error::{Error, Result};
use crate::heat::{time_window, SpectralDecomposition};
use crate::network::MeasuredNetwork;
use crate::resistance::{escape_resistance, resistance_ball, ResistanceMetric};
use crate::volume::{eval_scale, least_squares, log_grid, monotone_inverse, FluctuationModel, ScaleFunctions, VolumeProfile};

/// Largest max/min ratio of `inf_x V(x, r) / V_l(r)` (and of the sup
/// analogue) accepted as "bounded above and below" across the window.
pub const HYPOTHESIS_RANGE: f64 = 20.0;
/// Smallest `R(x, B(x, r)^c) / r` accepted as the resistance condition.
pub const RESCOND_FLOOR: f64 = 0.05;
const NEARDIAG_SOURCES: usize = 64;
const RESCOND_RADII: usize = 8;

fn diagonals(dec: &SpectralDecomposition, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times.par_iter().map(|&t| dec.diagonal(t)).collect()
}

/// `(h^{-1}(t) / t) g(h^{-1}(t))^theta_1`, with `g` normalised at the window top.
fn lower_shape(scale: &ScaleFunctions, theta1: f64, t: f64) -> f64 {
    let r = scale.h_inv(t);
    r / t * scale.model().g_norm(r).powf(theta1)
}

pub fn certify_ondiag(dec: &SpectralDecomposition, model: &FluctuationModel, exps: &ExponentSet) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let window = time_window(&scale)?;
    let vertices: Vec<usize> = (0..dec.len()).collect();
    certify_ondiag_with(dec, &scale, exps, &window.grid, &vertices)
}

/// On-diagonal sandwich over an explicit `(x, t)` grid; `times` ascending.
pub fn certify_ondiag_with(
    dec: &SpectralDecomposition,
    scale: &ScaleFunctions,
    exps: &ExponentSet,
    times: &[f64],
    vertices: &[usize],
) -> Result<BoundCertificate> {
    require_points("ondiag", times.len() * vertices.len())?;
    let model = scale.model();
    let diags = diagonals(dec, times)?;
    let t_top = times[times.len() - 1];
    let upper = |t: f64| scale.h_l_inv(t) / t;
    let weak = |t: f64| {
        let r = scale.h_inv(t);
        r / t / model.f_l(r)
    };
    let norm = upper(t_top) / lower_shape(scale, exps.theta1, t_top);

    let mut table = RatioTable::new(&["t", "p_min", "p_median", "p_max", "lower_ratio_min", "upper_ratio_max"]);
    let (mut c1, mut c2, mut c3) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut ratios = Vec::with_capacity(times.len() * vertices.len());
    let mut medians = Vec::with_capacity(times.len());
    for (&t, diag) in times.iter().zip(&diags) {
        let (lo, up, wk) = (lower_shape(scale, exps.theta1, t), upper(t), weak(t));
        let mut ps: Vec<f64> = vertices.iter().map(|&x| diag[x]).collect();
        for &p in &ps {
            c1 = c1.min(p / lo);
            c2 = c2.max(p / up);
            c3 = c3.max(p / wk);
            ratios.push(p / up);
        }
        ps.sort_by(f64::total_cmp);
        let median = ps[ps.len() / 2];
        medians.push(median);
        table.push(vec![t, ps[0], median, ps[ps.len() - 1], ps[0] / lo, ps[ps.len() - 1] / up]);
    }

    let mut cert = BoundCertificate::new(
        "ondiag",
        GridInfo {
            description: format!("{} vertices x {} times in [{:e}, {:e}]", vertices.len(), times.len(), times[0], t_top),
            points: ratios.len(),
            window_rule: TIME_WINDOW_RULE.into(),
        },
        table,
    );
    cert.constant("c1", c1);
    cert.constant("c2", c2);
    cert.constant("c3", c3);
    let c1_normalised = c1 / norm;
    cert.constant("c1_normalised", c1_normalised);
    cert.metric("spread", c2 / c1_normalised);
    cert.metric("theta1", exps.theta1);
    cert.ratios(&ratios);

    let mid = middle_decade(times);
    if mid.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = times
            .iter()
            .zip(&medians)
            .filter(|(t, _)| mid.contains(t))
            .map(|(t, m)| (t.ln(), m.ln()))
            .unzip();
        let (slope, _, _) = least_squares(&xs, &ys);
        let predicted = -model.alpha / (1.0 + model.alpha);
        cert.metric("slope", slope);
        cert.metric("predicted_slope", predicted);
        cert.metric("slope_error", (slope - predicted).abs());
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        cert.violate(format!("no positive lower constant: c1 = {c1}"));
    }
    if !c2.is_finite() {
        cert.violate(format!("upper constant is not finite: c2 = {c2}"));
    }
    Ok(cert)
}

pub fn certify_neardiag(
    dec: &SpectralDecomposition,
    metric: &ResistanceMetric,
    model: &FluctuationModel,
    exps: &ExponentSet,
) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let window = time_window(&scale)?;
    let sources = sample_indices(dec.len(), NEARDIAG_SOURCES);
    certify_neardiag_with(dec, metric, &scale, exps, &window.grid, &sources, 1.0)
}

/// Lower bound `p_t(x, y) >= c' (h^{-1}(t)/t) g(h^{-1}(t))^theta_1` over the
/// pairs with `R(x, y) <= c h^{-1}(t) g(h^{-1}(t))^theta_1`; pairs outside
/// that window are excluded from the grid and counted.
pub fn certify_neardiag_with(
    dec: &SpectralDecomposition,
    metric: &ResistanceMetric,
    scale: &ScaleFunctions,
    exps: &ExponentSet,
    times: &[f64],
    sources: &[usize],
    c: f64,
) -> Result<BoundCertificate> {
    let model = scale.model();
    let per_source: Vec<Vec<(f64, usize, usize, f64, f64)>> = sources
        .par_iter()
        .map(|&x| -> Result<Vec<_>> {
            let mut out = Vec::new();
            for &t in times {
                let r = scale.h_inv(t);
                let reach = c * r * model.g_norm(r).powf(exps.theta1);
                let row = dec.kernel_row(t, x)?;
                let lo = lower_shape(scale, exps.theta1, t);
                for (y, &p) in row.iter().enumerate() {
                    let d = metric.get(x, y);
                    if d <= reach {
                        out.push((t, x, y, d, p / lo));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let points: Vec<_> = per_source.into_iter().flatten().collect();
    require_points("neardiag", points.len())?;
    let total = sources.len() * times.len() * dec.len();

    let mut table = RatioTable::new(&["t", "x", "y", "R", "ratio"]);
    let mut ratios = Vec::with_capacity(points.len());
    let (mut c_pair, mut c_diag) = (f64::INFINITY, f64::INFINITY);
    let mut off = 0;
    for &(t, x, y, d, ratio) in &points {
        ratios.push(ratio);
        c_pair = c_pair.min(ratio);
        if x == y {
            c_diag = c_diag.min(ratio);
        } else {
            off += 1;
            table.push(vec![t, x as f64, y as f64, d, ratio]);
        }
    }
    let mut cert = BoundCertificate::new(
        "neardiag",
        GridInfo {
            description: format!(
                "{} sources x {} times; pairs with R <= {c} h^-1(t) g^theta1 ({} of {total} kept)",
                sources.len(),
                times.len(),
                points.len()
            ),
            points: points.len(),
            window_rule: TIME_WINDOW_RULE.into(),
        },
        table,
    );
    cert.constant("c_prime", c_pair);
    cert.constant("window_c", c);
    cert.metric("ondiag_c1", c_diag);
    cert.metric("ratio_to_ondiag", c_pair / c_diag);
    cert.metric("offdiag_pairs", off as f64);
    cert.metric("excluded_pairs", (total - points.len()) as f64);
    cert.ratios(&ratios);
    if !(c_pair > 0.0 && c_pair.is_finite()) {
        cert.violate(format!("no positive near-diagonal constant: c' = {c_pair}"));
    }
    Ok(cert)
}

fn range(vals: &[f64]) -> (f64, f64) {
    vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Four fluctuation conclusions on the lowest decade of the time window:
/// `inf_x t p_t(x,x) / (h^{-1} g^theta_1)` bounded below, `inf_x t p_t(x,x) / h_u^{-1}`
/// bounded above, and `sup_x t p_t(x,x) / h_l^{-1}` bounded above and below.
pub fn certify_fluctuations(
    dec: &SpectralDecomposition,
    profile: &VolumeProfile,
    model: &FluctuationModel,
    exps: &ExponentSet,
) -> Result<BoundCertificate> {
    let scale = eval_scale(model);
    let window = time_window(&scale)?;
    let times = &window.grid;
    let diags = diagonals(dec, times)?;
    let low = lowest_decade(times);

    let mut table = RatioTable::new(&["t", "p_inf", "p_sup", "inf_lower", "inf_upper", "sup_lh"]);
    let (mut inf_lower, mut inf_upper, mut sup_lh, mut separation) = (vec![], vec![], vec![], vec![]);
    let mut separation_all = Vec::with_capacity(times.len());
    for (&t, diag) in times.iter().zip(&diags) {
        let (p_inf, p_sup) = range(diag);
        let r = scale.h_inv(t);
        let a = t * p_inf / (r * model.g_norm(r).powf(exps.theta1));
        let b = t * p_inf / scale.h_u_inv(t);
        let c = t * p_sup / scale.h_l_inv(t);
        table.push(vec![t, p_inf, p_sup, a, b, c]);
        separation_all.push(p_sup / p_inf);
        if low.contains(&t) {
            inf_lower.push(a);
            inf_upper.push(b);
            sup_lh.push(c);
            separation.push(p_sup / p_inf);
        }
    }

    let radii: Vec<f64> = profile
        .grid
        .iter()
        .copied()
        .filter(|&r| r >= model.window.r_min && r <= model.window.r_max)
        .collect();
    let mut inf_ratio = Vec::with_capacity(radii.len());
    let mut sup_ratio = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (lo, hi) = (0..profile.len())
            .map(|x| profile.volume_closed(x, r))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        inf_ratio.push(lo / model.v_l(r));
        sup_ratio.push(hi / model.v_u(r));
    }

    let mut cert = BoundCertificate::new(
        "fluctuations",
        GridInfo {
            description: format!(
                "all {} vertices; {} times, conclusions over the lowest decade ({} times)",
                dec.len(),
                times.len(),
                low.len()
            ),
            points: low.len() * dec.len(),
            window_rule: TIME_WINDOW_RULE.into(),
        },
        table,
    );
    let ranges = [("inf_lower", &inf_lower), ("inf_upper", &inf_upper), ("sup_lh", &sup_lh)];
    for (name, vals) in ranges {
        let (lo, hi) = range(vals);
        cert.metric(&format!("{name}_min"), lo);
        cert.metric(&format!("{name}_max"), hi);
    }
    cert.constant("liminf_inf_lower", range(&inf_lower).0);
    cert.constant("limsup_inf_upper", range(&inf_upper).1);
    cert.constant("limsup_sup_lh", range(&sup_lh).1);
    cert.constant("liminf_sup_lh", range(&sup_lh).0);
    let (sep_min, sep_max) = range(&separation);
    cert.metric("separation_min", sep_min);
    cert.metric("separation_max", sep_max);
    cert.metric("separation_t_lo", separation_all[0]);
    cert.metric("separation_t_hi", separation_all[separation_all.len() - 1]);
    let (il, ih) = range(&inf_ratio);
    let (sl, sh) = range(&sup_ratio);
    cert.metric("inf_volume_ratio_range", ih / il);
    cert.metric("sup_volume_ratio_range", sh / sl);
    cert.metric("spread_at_r_min", model.spread(model.window.r_min));
    cert.ratios(&sup_lh);

    let four = [range(&inf_lower).0, range(&inf_upper).1, range(&sup_lh).1, range(&sup_lh).0];
    if let Some(bad) = four.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        cert.violate(format!("a fluctuation range endpoint is not finite and positive: {bad}"));
    }
    if model.family == crate::volume::EnvelopeFamily::Uniform {
        cert.not_met("uniform envelope family: the fluctuation conclusions are degenerate".into());
    } else if radii.is_empty() {
        cert.not_met("no profile radii inside the model window".into());
    } else if !(ih / il <= HYPOTHESIS_RANGE && sh / sl <= HYPOTHESIS_RANGE) {
        cert.not_met(format!(
            "volume ratios to the envelopes vary by {:.3} (inf) and {:.3} (sup); at most {HYPOTHESIS_RANGE} accepted",
            ih / il,
            sh / sl
        ));
    }
    Ok(cert)
}

/// Local ratio curve `V(x, r) / V(r)` on the window radii and its fitted
/// local envelopes in the model's family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalEnvelope {
    pub vertex: usize,
    pub radii: Vec<f64>,
    pub ratio: Vec<f64>,
    pub c_l: f64,
    pub c_u: f64,
    #[serde(skip)]
    model: Option<FluctuationModel>,
}

impl LocalEnvelope {
    fn model(&self) -> &FluctuationModel {
        self.model.as_ref().expect("local envelope carries its model")
    }

    pub fn f_l(&self, r: f64) -> f64 {
        (self.c_l * self.model().shape_l(r)).min(1.0)
    }

    pub fn f_u(&self, r: f64) -> f64 {
        (self.c_u * self.model().shape_u(r)).max(1.0)
    }

    pub fn h_l(&self, r: f64) -> f64 {
        r * self.f_l(r) * self.model().volume(r)
    }

    pub fn h_u(&self, r: f64) -> f64 {
        r * self.f_u(r) * self.model().volume(r)
    }
}

pub fn local_envelope(profile: &VolumeProfile, model: &FluctuationModel, x: usize) -> Result<LocalEnvelope> {
    if x >= profile.len() {
        return Err(Error::VertexOutOfRange(x));
    }
    let radii: Vec<f64> = profile
        .grid
        .iter()
        .copied()
        .filter(|&r| r >= model.window.r_min && r <= model.window.r_max)
        .collect();
    if radii.is_empty() {
        return Err(Error::WindowTooSmall("no profile radii inside the model window".into()));
    }
    let ratio: Vec<f64> = radii.iter().map(|&r| profile.volume_closed(x, r) / model.volume(r)).collect();
    let c_l = radii.iter().zip(&ratio).map(|(&r, q)| q / model.shape_l(r)).fold(f64::INFINITY, f64::min);
    let c_u = radii.iter().zip(&ratio).map(|(&r, q)| q / model.shape_u(r)).fold(0.0, f64::max);
    Ok(LocalEnvelope { vertex: x, radii, ratio, c_l, c_u, model: Some(model.clone()) })
}

fn heaviest_vertex(profile: &VolumeProfile, model: &FluctuationModel) -> usize {
    let r = model.window.r_min;
    (0..profile.len())
        .max_by(|&a, &b| profile.volume_closed(a, r).total_cmp(&profile.volume_closed(b, r)).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// Local conclusions at one vertex: `t p_t(x,x) / h~_u^{-1}(t)` has a finite
/// minimum and `t p_t(x,x) / h~_l^{-1}(t)` is bounded above and positive on the
/// lowest decade. Defaults to the vertex with the heaviest ball at `r_min`.
pub fn certify_local(
    net: &MeasuredNetwork,
    dec: &SpectralDecomposition,
    metric: &ResistanceMetric,
    profile: &VolumeProfile,
    model: &FluctuationModel,
    x: Option<usize>,
) -> Result<BoundCertificate> {
    let x = x.unwrap_or_else(|| heaviest_vertex(profile, model));
    let env = local_envelope(profile, model, x)?;
    let scale = eval_scale(model);
    let window = time_window(&scale)?;
    let low = lowest_decade(&window.grid);

    let mut table = RatioTable::new(&["t", "p", "local_lower", "local_upper", "global_lower", "global_upper"]);
    let (mut loc_u, mut loc_l, mut glob_u, mut glob_l) = (vec![], vec![], vec![], vec![]);
    for &t in &window.grid {
        let p = crate::heat::heat_kernel(dec, t, x, x)?;
        let guess = scale.h_inv(t);
        let lu = t * p / monotone_inverse(|r| env.h_u(r), t, guess);
        let ll = t * p / monotone_inverse(|r| env.h_l(r), t, guess);
        let gu = t * p / scale.h_u_inv(t);
        let gl = t * p / scale.h_l_inv(t);
        table.push(vec![t, p, ll, lu, gl, gu]);
        if low.contains(&t) {
            loc_u.push(lu);
            loc_l.push(ll);
            glob_u.push(gu);
            glob_l.push(gl);
        }
    }

    let mut rescond = Vec::new();
    for r in log_grid(model.window.r_min, 0.5 * model.window.r_max, RESCOND_RADII) {
        let ball = resistance_ball(metric, x, r)?;
        if ball.members.len() == net.len() {
            continue;
        }
        rescond.push((r, escape_resistance(net, &ball)? / r));
    }

    let mut cert = BoundCertificate::new(
        "local",
        GridInfo {
            description: format!("vertex {x}; {} times, conclusions over the lowest decade", window.grid.len()),
            points: low.len(),
            window_rule: TIME_WINDOW_RULE.into(),
        },
        table,
    );
    cert.metric("vertex", x as f64);
    cert.constant("local_c_l", env.c_l);
    cert.constant("local_c_u", env.c_u);
    cert.metric("global_c_l", model.c_l);
    cert.metric("global_c_u", model.c_u);
    let (lu_min, _) = range(&loc_u);
    let (ll_min, ll_max) = range(&loc_l);
    cert.constant("min_local_upper", lu_min);
    cert.constant("max_local_lower", ll_max);
    cert.metric("min_local_lower", ll_min);
    cert.metric("min_global_upper", range(&glob_u).0);
    cert.metric("max_global_lower", range(&glob_l).1);
    for (k, (r, q)) in rescond.iter().enumerate() {
        cert.metric(&format!("rescond_radius_{k}"), *r);
        cert.metric(&format!("rescond_ratio_{k}"), *q);
    }
    let rescond_min = rescond.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    cert.metric("rescond_min", rescond_min);
    cert.ratios(&loc_l);

    if !(lu_min.is_finite() && lu_min > 0.0) {
        cert.violate(format!("local upper ratio minimum is not finite: {lu_min}"));
    }
    if !(ll_max.is_finite() && ll_max > 0.0) {
        cert.violate(format!("local lower ratio is not bounded and positive: {ll_max}"));
    }
    if rescond.is_empty() {
        cert.not_met("no ball in the window has a complement".into());
    } else if rescond_min < RESCOND_FLOOR {
        cert.not_met(format!("resistance condition fails: min R(x, B^c)/r = {rescond_min:.4} < {RESCOND_FLOOR}"));
    }
    Ok(cert)
}
