use helmnorm::assembly::OperatorKind;
use helmnorm::config::*;
use helmnorm::experiments::WitnessKind;
use helmnorm::fit::FitModel;
use helmnorm::geometry::Classification;
use helmnorm::norms::{NormSpec, Space};
use helmnorm::sweep::*;
use helmnorm::Error;
use proptest::prelude::*;

fn sweep_cfg(text: &str) -> SweepConfig {
    SweepConfig::from_config(&Config::parse(text).unwrap()).unwrap()
}

#[test]
fn config_grammar() {
    let c = Config::parse(
        "# header\n\ngeometry = circle radius=1.0   # trailing comment\nfit.model=power_times_log\n  k_min =  16\n",
    )
    .unwrap();
    assert_eq!(c.get("geometry"), Some("circle radius=1.0"));
    assert_eq!(c.get("fit.model"), Some("power_times_log"));
    assert_eq!(c.value::<f64>("k_min").unwrap(), Some(16.0));
    assert_eq!(c.value_or("k_max", 3.0).unwrap(), 3.0);
    assert!(matches!(c.value::<f64>("geometry"), Err(Error::Config(_))));
    assert!(matches!(c.require("operator"), Err(Error::Config(_))));
    assert_eq!(Config::parse(&c.to_text()).unwrap().iter().count(), 3);

    for bad in [
        "no equals sign",
        "a = 1\na = 2",
        "bad key = 1",
        "a..b = 1",
        ". = 2",
    ] {
        assert!(matches!(Config::parse(bad), Err(Error::Config(_))), "{bad}");
    }
}

#[test]
fn sweep_config_defaults_and_refusals() {
    let c = sweep_cfg("geometry = unit\n");
    assert_eq!(c.kind, OperatorKind::S);
    assert_eq!(c.spec, NormSpec::l2_h1k());
    assert_eq!(
        (c.k_min, c.k_max, c.points_per_octave, c.ppw),
        (8.0, 256.0, 4, 10)
    );
    assert_eq!(c.eta, EtaRule::ProportionalToK(1.0));
    assert_eq!(c.model, FitModel::PurePower);
    assert_eq!(c.solver, Solver::Assembly);
    let ks = c.k_values().unwrap();
    assert_eq!(ks.len(), 21);
    assert_eq!((ks[0], ks[20]), (8.0, 256.0));
    assert!(ks.windows(2).all(|w| w[1] > w[0]));

    let c = sweep_cfg("geometry = x\neta.rule = constant\neta.value = 2.5\nnorm = Hs(-0.5)->Hs(0.5)\nsolver = oracle\n");
    assert_eq!(c.eta.eta(100.0), 2.5);
    assert_eq!(c.spec, NormSpec::trace_pair(0.0));

    for bad in [
        "operator = S",
        "geometry = c\nk_min = 0.5",
        "geometry = c\nk_min = 8\nk_max = 12",
        "geometry = c\nppw = 3",
        "geometry = c\noperator = Q",
        "geometry = c\nnorm = H1->L2",
        "geometry = c\nsolver = magic",
        "geometry = c\neta.value = 0",
        "geometry = c\nunknown = 1",
        "geometry = c\nfit.model = cubic",
        "geometry = c\nfit.tolerance = -1",
    ] {
        let r = Config::parse(bad).and_then(|c| SweepConfig::from_config(&c));
        assert!(matches!(r, Err(Error::Config(_))), "{bad}: {r:?}");
    }
}

#[test]
fn grid_refusals() {
    assert!(geometric_grid(8.0, 4.0, 4).is_err());
    assert!(geometric_grid(8.0, 16.0, 0).is_err());
    assert_eq!(
        geometric_grid(16.0, 128.0, 1).unwrap(),
        vec![16.0, 32.0, 64.0, 128.0]
    );
}

#[test]
fn prediction_table() {
    use Classification::*;
    use OperatorKind::*;
    let k = EtaRule::ProportionalToK(1.0);
    let r = |v: f64| (v * 1e12).round() / 1e12;
    let p = |c, o, s| predict(c, o, s, k).map(|p| ((p.p * 1e12).round() / 1e12, p.q));
    let h1k = NormSpec::l2_h1k();
    assert_eq!(p(SmoothCurved, S, h1k), Some((r(-2.0 / 3.0), 0)));
    assert_eq!(p(PiecewiseSmooth, S, h1k), Some((-0.5, 1)));
    assert_eq!(p(Smooth, S, h1k), Some((-0.5, 1)));
    assert_eq!(p(PiecewiseCurved, S, h1k), Some((r(-2.0 / 3.0), 1)));
    assert_eq!(p(SmoothCurved, D, h1k), Some((0.0, 0)));
    assert_eq!(p(SmoothCurved, Dprime, h1k), Some((0.0, 0)));
    assert_eq!(p(Smooth, Dprime, h1k), Some((0.25, 1)));
    assert_eq!(p(PiecewiseSmooth, D, h1k), None);
    assert_eq!(
        p(SmoothCurved, S, NormSpec::l2_h1()),
        Some((r(1.0 / 3.0), 0))
    );
    assert_eq!(
        p(SmoothCurved, S, NormSpec::l2_l2()),
        Some((r(-2.0 / 3.0), 0))
    );
    assert_eq!(
        p(SmoothCurved, S, NormSpec::trace_pair(0.0)),
        Some((r(1.0 / 3.0), 0))
    );
    assert_eq!(
        p(
            SmoothCurved,
            S,
            NormSpec::new(Space::Hs(-1.0), Space::Hs(0.5)).unwrap()
        ),
        None
    );
    assert_eq!(p(Smooth, S, NormSpec::trace_pair(0.0)), None);
    assert_eq!(
        p(SmoothCurved, ADirect, NormSpec::l2_l2()),
        Some((r(1.0 / 3.0), 0))
    );
    assert_eq!(p(SmoothCurved, ADirect, h1k), None);
    assert_eq!(p(Smooth, ADirect, NormSpec::l2_l2()), None);
    let c = predict(
        SmoothCurved,
        AIndirect,
        NormSpec::l2_l2(),
        EtaRule::Constant(1.0),
    )
    .unwrap();
    assert_eq!((c.p, c.q), (0.0, 0));
    assert_eq!(default_tolerance(SmoothCurved), 0.08);
    assert_eq!(default_tolerance(PiecewiseSmooth), 0.1);
}

proptest! {
    #[test]
    fn csv_rows_round_trip(k in 1.0..1e4f64, norm in prop_oneof![Just(f64::NAN), 1e-300..1e300f64], n in 4usize..100000, conv: bool, it in 0usize..10000) {
        let row = Row { kind: OperatorKind::Dprime, k, n, spec: "Hs(-0.5)->Hs(0.5)".into(), norm, method: "lanczos".into(), converged: conv, iterations: it };
        let line = row.to_csv();
        let back = Row::parse(&line).unwrap();
        prop_assert_eq!(back.k.to_bits(), k.to_bits());
        prop_assert!(back.norm.to_bits() == norm.to_bits() || (norm.is_nan() && back.norm.is_nan()));
        prop_assert_eq!(back.to_csv(), line);
    }
}

#[test]
fn csv_format() {
    let row = Row {
        kind: OperatorKind::S,
        k: 8.0,
        n: 80,
        spec: "L2->H1k".into(),
        norm: 0.1,
        method: "dense_svd".into(),
        converged: true,
        iterations: 7,
    };
    assert_eq!(
        row.to_csv(),
        "S,8.0000000000000000e0,80,L2->H1k,1.0000000000000001e-1,dense_svd,true,7"
    );
    let text = render_csv([&row]);
    assert!(
        text.starts_with("kind,k,N,spec,norm,method,converged,iterations\n")
            && text.ends_with('\n')
    );
    assert_eq!(parse_csv(&text).unwrap(), vec![row]);
    assert!(parse_csv("k,norm\n").is_err());
    assert!(parse_csv(&format!("{CSV_HEADER}\nS,1,2\n")).is_err());
    assert!(parse_csv("").unwrap().is_empty());
}

#[test]
fn oracle_sweeps_match_circle_predictions() {
    let s = run_sweep(&sweep_cfg("geometry = circle\nsolver = oracle\n")).unwrap();
    let f = s.fit.unwrap();
    assert_eq!((s.rows.len(), f.used), (21, 21));
    assert_eq!(s.verdict, Verdict::Pass, "{f:?}");
    let d = run_sweep(&sweep_cfg(
        "geometry = circle\nsolver = oracle\noperator = D\n",
    ))
    .unwrap();
    assert_eq!(d.verdict, Verdict::Pass, "{:?}", d.fit);
    let t = run_sweep(&sweep_cfg(
        "geometry = circle\nsolver = oracle\nnorm = Hs(-0.5)->Hs(0.5)\n",
    ))
    .unwrap();
    assert!(t.fit.unwrap().p <= 1.0 / 3.0 + 0.08);
    let a = run_sweep(&sweep_cfg(
        "geometry = circle\nsolver = oracle\noperator = Adirect\nnorm = L2->L2\n",
    ))
    .unwrap();
    assert_eq!(a.verdict, Verdict::Pass, "{:?}", a.fit);
    // The identity part of A′ has no bound into H¹_k: every point is refused.
    let r = run_sweep(&sweep_cfg(
        "geometry = circle\nsolver = oracle\noperator = Adirect\n",
    ))
    .unwrap();
    assert_eq!((r.skipped.len(), r.verdict), (21, Verdict::NoFit));
    let bad = run_sweep(&sweep_cfg("geometry = square\nsolver = oracle\n"));
    assert!(matches!(bad, Err(Error::Config(_))));
}

const SMALL: &str = "geometry = circle\nk_min = 8\nk_max = 32\npoints_per_octave = 2\n";

#[test]
fn resumed_sweep_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let text = format!("{SMALL}output = s.csv\n");
    let cfg_path = dir.path().join("s.conf");
    std::fs::write(&cfg_path, &text).unwrap();
    let cfg = SweepConfig::from_config(&Config::load(&cfg_path).unwrap()).unwrap();
    assert_eq!(cfg.output.as_deref(), Some(out.as_path()));
    let full = run_sweep(&cfg).unwrap();
    let bytes = std::fs::read(&out).unwrap();
    assert_eq!(full.rows.len(), 5);
    assert!(!dir.path().join("s.csv.tmp").exists());

    // An interrupted run leaves a prefix of rows.
    let lines: Vec<&str> = std::str::from_utf8(&bytes).unwrap().lines().collect();
    std::fs::write(&out, format!("{}\n{}\n{}\n", lines[0], lines[4], lines[2])).unwrap();
    let resumed = run_sweep(&cfg).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), bytes);
    assert_eq!(resumed.fit, full.fit);

    // Rows already present are not recomputed.
    let doctored = std::str::from_utf8(&bytes)
        .unwrap()
        .replacen(",dense_svd,", ",lanczos,", 1);
    std::fs::write(&out, &doctored).unwrap();
    run_sweep(&cfg).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), doctored);

    // The sidecar carries everything needed to refit.
    std::fs::write(&out, &bytes).unwrap();
    let loaded = load_result(&out).unwrap();
    assert_eq!(
        (loaded.fit, loaded.verdict, loaded.classification),
        (full.fit, full.verdict, Classification::SmoothCurved)
    );

    // A second sweep into the same file keeps both, sorted by kind.
    let other = SweepConfig {
        kind: OperatorKind::D,
        ..cfg.clone()
    };
    run_sweep(&other).unwrap();
    let rows = read_csv(&out).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows[..5].iter().all(|r| r.kind == OperatorKind::D));
    assert!(rows
        .windows(2)
        .all(|w| w[0].kind != w[1].kind || w[0].k < w[1].k));
}

#[test]
fn sweeps_are_deterministic() {
    let cfg = sweep_cfg(SMALL);
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.norm - y.norm).abs() <= 1e-12 * x.norm);
        assert_eq!((x.n, x.converged), (y.n, y.converged));
    }
}

#[test]
fn refused_points_become_skipped_rows() {
    let cfg = sweep_cfg(
        "geometry = square\noperator = D\nk_min = 8\nk_max = 16\npoints_per_octave = 4\n",
    );
    let r = run_sweep(&cfg).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r
        .rows
        .iter()
        .all(|row| row.is_skipped() && row.norm.is_nan() && !row.converged));
    assert_eq!(r.skipped.len(), 5);
    assert!(r.skipped[0].1.contains("corners"), "{}", r.skipped[0].1);
    assert_eq!(r.verdict, Verdict::NoFit);
    assert_eq!(r.unconverged, 0);
}

#[test]
fn unconverged_rows_are_left_out_of_fits() {
    let cfg = sweep_cfg(
        "geometry = circle\nk_min = 8\nk_max = 64\npoints_per_octave = 1\nsolver = oracle\n",
    );
    let good = run_sweep(&cfg).unwrap();
    let mut rows = good.rows.clone();
    rows[1].converged = false;
    rows[1].norm = 1e6;
    let r = evaluate(&cfg, "c", Classification::SmoothCurved, &rows).unwrap();
    assert_eq!(r.unconverged, 1);
    assert_eq!(r.verdict, Verdict::NoFit);
    rows.push(Row {
        k: 128.0,
        ..good.rows[3].clone()
    });
    let cfg = SweepConfig {
        k_max: 128.0,
        ..cfg
    };
    let r = evaluate(&cfg, "c", Classification::SmoothCurved, &rows).unwrap();
    assert_eq!((r.fit.unwrap().used, r.unconverged), (4, 1));
}

#[test]
fn report_rendering() {
    assert_eq!(report_table(&[]), "");
    let r = run_sweep(&sweep_cfg("geometry = circle\nsolver = oracle\n")).unwrap();
    let table = report_table(&[r]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("predicted") && lines[1].ends_with("PASS"));
    assert!(lines[1].contains("smooth_curved") && lines[1].contains("-0.6667"));
}

#[test]
fn witness_driver() {
    let c = Config::parse("geometry = square\nwitness.bigM = 8\n").unwrap();
    let w = run_witness(&WitnessConfig::from_config(&c).unwrap()).unwrap();
    assert_eq!(w.kind, WitnessKind::Flat);
    assert_eq!(w.rows.len(), 4);
    assert!(
        w.pass && w.spread.iter().all(|s| *s < 1.05),
        "{:?}",
        w.spread
    );
    let csv = w.to_csv();
    assert!(csv.starts_with(WITNESS_CSV_HEADER));
    assert_eq!(csv.lines().count(), 5);

    let c = Config::parse("geometry = circle\nwitness.epsilon = 0.05\nk_max = 32\n").unwrap();
    let w = run_witness(&WitnessConfig::from_config(&c).unwrap()).unwrap();
    assert_eq!((w.kind, w.rows.len()), (WitnessKind::Curved, 2));
    for bad in [
        "geometry = c\nwitness.kind = round",
        "geometry = c\nwitness.M = 3",
        "k_min = 2",
    ] {
        let r = Config::parse(bad).and_then(|c| WitnessConfig::from_config(&c));
        assert!(matches!(r, Err(Error::Config(_))), "{bad}");
    }
    let c = Config::parse("geometry = square\nwitness.bigM = 2\n").unwrap();
    assert!(matches!(
        run_witness(&WitnessConfig::from_config(&c).unwrap()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn quasimode_driver() {
    let c = Config::parse(
        "quasimode.shape = arc\nquasimode.r_max = 64\nquasimode.points_per_octave = 2\n",
    )
    .unwrap();
    let q = QuasimodeConfig::from_config(&c).unwrap();
    assert_eq!((q.rs.len(), q.trace_bound), (5, 1.0 / 6.0));
    let r = run_quasimode(&q).unwrap();
    assert_eq!(r.growth.samples.len(), 5);
    assert!(r.trace_pass && r.normal_pass);
    for bad in [
        "quasimode.shape = disk",
        "quasimode.r_max = 20",
        "quasimode.length = -1",
        "quasimode.shape = arc\nquasimode.angle = 7",
        "quasimode.extra = 1",
    ] {
        let r = Config::parse(bad).and_then(|c| QuasimodeConfig::from_config(&c));
        assert!(matches!(r, Err(Error::Config(_))), "{bad}");
    }
}
