use reskernel::bounds::*;
use reskernel::generators::{gen_dendrite, gen_path, gen_two_weighted_tree, DendriteShape};
use reskernel::heat::{spectral_decompose, time_window};
use reskernel::resistance::{resistance_metric, ResistanceMetric};
use reskernel::volume::*;
use reskernel::MeasuredNetwork;

fn two_state() -> MeasuredNetwork {
    MeasuredNetwork::from_parts("two", vec![1.0, 1.0], vec![(0, 1, 1.0)]).unwrap()
}

fn fitted(net: &MeasuredNetwork, family: FamilyChoice, window: WindowOverride) -> (ResistanceMetric, VolumeProfile, FittedModel) {
    let metric = resistance_metric(net).unwrap();
    let profile = volume_profile(net, &metric);
    let fit = fit_model(&profile, family, window).unwrap();
    (metric, profile, fit)
}

fn ondiag_exps(model: &FluctuationModel) -> ExponentSet {
    derive_exponents(model, Mode::Ondiag, ExponentRule::default()).unwrap()
}

fn offdiag_exps(model: &FluctuationModel) -> ExponentSet {
    derive_exponents(model, Mode::Offdiag, ExponentRule::default()).unwrap()
}

#[test]
fn two_state_degenerate_window() {
    let net = two_state();
    let dec = spectral_decompose(&net).unwrap();
    let model = FluctuationModel::uniform(1.0, 1.0, RadiusWindow { r_min: 0.5, r_max: 1.2 });
    let cert = certify_ondiag(&dec, &model, &ondiag_exps(&model)).unwrap();
    assert!(cert.verdict.holds());
    let spread = cert.get("spread").unwrap();
    assert!((1.0..1.2).contains(&spread), "spread {spread}");
}

#[test]
fn single_vertex_ball_tail() {
    // the ball of radius 1/2 around 0 is {0}; its exit time is exponential
    // with rate 1, so P(T <= t) = 1 - e^{-t}
    let net = two_state();
    let metric = resistance_metric(&net).unwrap();
    let model = FluctuationModel::uniform(1.0, 1.0, RadiusWindow { r_min: 0.5, r_max: 1.0 });
    let exps = offdiag_exps(&model);
    let opts = TailOptions { centers: 1, radii: 1, times: 5 };
    let cert = certify_exit_tail(&net, &metric, &model, &exps, &opts).unwrap();
    assert!(cert.verdict.holds());
    assert!(cert.get("c2").unwrap() > 0.0);
    for row in &cert.table.rows {
        let (t, p) = (row[2], row[3]);
        assert!((p - (1.0 - (-t).exp())).abs() < 1e-12, "t {t}: {p}");
    }
}

#[test]
fn path_ondiag_slope_and_spread() {
    let net = gen_path(101).unwrap();
    let (_, _, fit) = fitted(&net, FamilyChoice::Auto, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let cert = certify_ondiag(&dec, &fit.model, &ondiag_exps(&fit.model)).unwrap();
    assert!(cert.verdict.holds());
    assert!((cert.get("slope").unwrap() + 0.5).abs() < 0.05, "{:?}", cert.metrics);
    assert!(cert.get("spread").unwrap() < 50.0);
    assert!(cert.get("c3").unwrap() > 0.0);
}

#[test]
fn uniform_spread_stays_bounded_across_windows() {
    let net = gen_path(81).unwrap();
    let dec = spectral_decompose(&net).unwrap();
    for r_max in [10.0, 20.0, 40.0, 60.0] {
        let (_, _, fit) = fitted(&net, FamilyChoice::Uniform, WindowOverride { r_min: None, r_max: Some(r_max) });
        let cert = certify_ondiag(&dec, &fit.model, &ondiag_exps(&fit.model)).unwrap();
        let spread = cert.get("spread").unwrap();
        assert!(spread < 50.0, "r_max {r_max}: spread {spread}");
    }
}

#[test]
fn refinement_only_widens_constants() {
    let net = gen_path(61).unwrap();
    let (_, _, fit) = fitted(&net, FamilyChoice::Uniform, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let scale = eval_scale(&fit.model);
    let exps = ondiag_exps(&fit.model);
    let times = time_window(&scale).unwrap().grid;
    let coarse: Vec<f64> = times.iter().copied().step_by(4).collect();
    let all: Vec<usize> = (0..net.len()).collect();
    let few: Vec<usize> = all.iter().copied().step_by(5).collect();
    let small = certify_ondiag_with(&dec, &scale, &exps, &coarse, &few).unwrap();
    let big = certify_ondiag_with(&dec, &scale, &exps, &times, &all).unwrap();
    assert!(big.get("c1").unwrap() <= small.get("c1").unwrap());
    assert!(big.get("c2").unwrap() >= small.get("c2").unwrap());
    assert!(small.verdict.holds() && big.verdict.holds());
}

#[test]
fn neardiag_examples() {
    let net = gen_path(101).unwrap();
    let (metric, _, fit) = fitted(&net, FamilyChoice::Uniform, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let exps = ondiag_exps(&fit.model);
    let cert = certify_neardiag(&dec, &metric, &fit.model, &exps).unwrap();
    assert!(cert.verdict.holds());
    // the diagonal always qualifies, so c' never exceeds the on-diagonal fit
    assert!(cert.get("ratio_to_ondiag").unwrap() <= 1.0);
    assert!(cert.get("excluded_pairs").unwrap() > 0.0);

    // adjacent pairs only, mid window
    let scale = eval_scale(&fit.model);
    let window = time_window(&scale).unwrap();
    let t = (window.t_lo * window.t_hi).sqrt();
    let c = 1.5 / scale.h_inv(t);
    let cert = certify_neardiag_with(&dec, &metric, &scale, &exps, &[t], &[50], c).unwrap();
    assert_eq!(cert.get("offdiag_pairs").unwrap(), 2.0);
    let ratio = cert.get("ratio_to_ondiag").unwrap();
    assert!((0.5..=1.0).contains(&ratio), "{ratio}");
}

#[test]
fn exit_tail_and_times_on_path() {
    let net = gen_path(61).unwrap();
    let (metric, _, fit) = fitted(&net, FamilyChoice::Uniform, WindowOverride::default());
    let exps = offdiag_exps(&fit.model);
    let tail = certify_exit_tail(&net, &metric, &fit.model, &exps, &TailOptions::default()).unwrap();
    assert!(tail.verdict.holds());
    let c2 = tail.get("c2").unwrap();
    let c_q = tail.get("c_q").unwrap();
    let scale = eval_scale(&fit.model).with_c_q(c_q);
    for row in &tail.table.rows {
        let (r, t, p) = (row[1], row[2], row[3]);
        let s = scale.q_inv(t / r);
        let e = r / s * fit.model.g_norm(s).powf(exps.gamma1);
        assert!((row[4] - e).abs() <= 1e-9 * e);
        assert!(p.ln() <= 1.0 - c2 * e + 1e-9, "r {r}, t {t}");
    }
    assert!(tail.ratio_max.unwrap() <= 1.0 + 1e-12);

    let times = certify_exit_times(&net, &metric, &fit.model, &TailOptions::default()).unwrap();
    assert!(times.verdict.holds());
    assert!(times.get("spread").unwrap() < 50.0);
}

#[test]
fn offdiag_path_shape_and_tree_bounds() {
    let net = gen_path(101).unwrap();
    let (metric, _, fit) = fitted(&net, FamilyChoice::Auto, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let cert = certify_offdiag(&dec, &metric, &fit.model, &offdiag_exps(&fit.model)).unwrap();
    assert!(cert.verdict.holds(), "{:?}", cert.verdict);
    let corr = cert.get("shape_correlation").unwrap();
    assert!(corr <= -0.98, "{corr}");
    assert_eq!(cert.get("cc_passed"), Some(1.0));

    let tree = gen_dendrite(&DendriteShape::Vicsek { level: 2 }, 0).unwrap();
    let (metric, _, fit) = fitted(&tree, FamilyChoice::Auto, WindowOverride::default());
    let dec = spectral_decompose(&tree).unwrap();
    let cert = certify_offdiag(&dec, &metric, &fit.model, &offdiag_exps(&fit.model)).unwrap();
    assert!(cert.verdict.holds(), "{:?}", cert.verdict);
    assert_eq!(cert.get("lower_bound_attempted"), Some(1.0));
    for name in ["c1", "c2", "c3", "c4"] {
        let c = cert.get(name).unwrap();
        assert!(c.is_finite() && c > 0.0, "{name} = {c}");
    }
    assert!(cert.witnesses.is_empty());
}

#[test]
fn offdiag_requires_offdiag_exponents() {
    let net = gen_path(41).unwrap();
    let (metric, _, fit) = fitted(&net, FamilyChoice::Uniform, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let err = certify_offdiag(&dec, &metric, &fit.model, &ondiag_exps(&fit.model)).unwrap_err();
    assert!(err.to_string().contains("theta_2"));
}

#[test]
fn chain_count_examples() {
    let net = gen_path(41).unwrap();
    let metric = resistance_metric(&net).unwrap();
    let model = FluctuationModel::uniform(1.0, 1.0, RadiusWindow { r_min: 1.0, r_max: 40.0 });
    let scale = eval_scale(&model);
    let exps = ondiag_exps(&model);

    // R(x, y) = 2 <= h^{-1}(9) = 3
    let plan = chain_count(&metric, &scale, &exps, 10, 12, 9.0, 1.0).unwrap();
    assert_eq!(plan.n, 1);
    assert_eq!(plan.chain, vec![10, 12]);

    let mut prev = usize::MAX;
    for t in [40.0, 80.0, 200.0, 400.0, 1600.0, 3200.0] {
        let plan = chain_count(&metric, &scale, &exps, 0, 40, t, 1.0).unwrap();
        assert!(plan.n <= prev, "N must not grow with t");
        prev = plan.n;
        // V(r) = r: N = ceil(R^2 / t)
        let closed = 40f64.powi(2) / t;
        let n = plan.n as f64;
        assert!(n >= closed.max(1.0) * 0.5 && n <= 2.0 * closed.max(1.0), "t {t}: N {n} vs {closed}");
        assert_eq!(plan.chain.len(), plan.n + 1);
        assert_eq!(plan.step_resistances.len(), plan.n);
    }
    assert!(matches!(
        chain_count(&metric, &scale, &exps, 0, 40, 1e-3, 1.0),
        Err(reskernel::Error::WindowTooSmall(_))
    ));
    assert!(chain_count(&metric, &scale, &exps, 3, 3, 1.0, 1.0).is_err());
}

#[test]
fn fluctuation_certificate_routes() {
    let net = gen_path(61).unwrap();
    let (_, profile, fit) = fitted(&net, FamilyChoice::Auto, WindowOverride::default());
    let dec = spectral_decompose(&net).unwrap();
    let cert = certify_fluctuations(&dec, &profile, &fit.model, &ondiag_exps(&fit.model)).unwrap();
    assert!(matches!(cert.verdict, Verdict::HypothesesNotMet { .. }));
    assert!(cert.get("sup_lh_max").unwrap().is_finite());

    let tree = gen_two_weighted_tree(3, [8.0, 1.0]).unwrap();
    let (_, profile, fit) = fitted(&tree, FamilyChoice::Logarithmic, WindowOverride::default());
    let dec = spectral_decompose(&tree).unwrap();
    let cert = certify_fluctuations(&dec, &profile, &fit.model, &ondiag_exps(&fit.model)).unwrap();
    assert!(cert.verdict.holds(), "{:?}", cert.verdict);
    for key in ["liminf_inf_lower", "limsup_inf_upper", "limsup_sup_lh", "liminf_sup_lh"] {
        let v = cert.get(key).unwrap();
        assert!(v.is_finite() && v > 0.0, "{key} = {v}");
    }
    assert!(cert.get("separation_min").unwrap() > 2.0);
}

#[test]
fn local_envelopes() {
    // vertex-transitive cycle: every local curve is the global one
    let n = 48;
    let edges = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    let cycle = MeasuredNetwork::from_parts("cycle", vec![1.0; n], edges).unwrap();
    let (metric, profile, fit) = fitted(&cycle, FamilyChoice::Uniform, WindowOverride::default());
    let env = local_envelope(&profile, &fit.model, 7).unwrap();
    assert!((env.c_l - fit.model.c_l).abs() < 1e-12 && (env.c_u - fit.model.c_u).abs() < 1e-12);
    let dec = spectral_decompose(&cycle).unwrap();
    let cert = certify_local(&cycle, &dec, &metric, &profile, &fit.model, Some(7)).unwrap();
    assert!(cert.verdict.holds(), "{:?}", cert.verdict);
    assert!(cert.get("rescond_ratio_0").is_some());

    // heavy vertex on a tree
    let tree = gen_dendrite(&DendriteShape::Vicsek { level: 2 }, 0).unwrap();
    let mut spec = tree.to_spec();
    spec.vertices[0].measure *= 40.0;
    let heavy = reskernel::build_network(&spec).unwrap();
    let (metric, profile, fit) = fitted(&heavy, FamilyChoice::Uniform, WindowOverride::default());
    let dec = spectral_decompose(&heavy).unwrap();
    let cert = certify_local(&heavy, &dec, &metric, &profile, &fit.model, None).unwrap();
    assert_eq!(cert.get("vertex"), Some(0.0));
    assert!(cert.get("local_c_l").unwrap() > cert.get("global_c_l").unwrap());
    assert!(cert.get("rescond_min").unwrap() > 0.0);
}
