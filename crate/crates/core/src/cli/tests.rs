use super::plot::*;
use super::*;
use crate::stl::parse;

fn band(src: &str) -> Option<Band> {
    spec_band(&parse(src, 1).unwrap())
}

#[test]
fn scenario_one_band_is_two_to_three_on_abs() {
    let b = band(crate::scenarios::SCENARIO1_SPEC).unwrap();
    assert_eq!((b.from, b.to, b.on_abs), (5, 10, true));
    assert_eq!((b.low, b.high), (Some(2.0), Some(3.0)));
}

#[test]
fn plain_bounds_form_a_band() {
    let b = band("G[0,4] (y1 >= -1 and y1 <= 2.5)").unwrap();
    assert_eq!((b.low, b.high, b.on_abs), (Some(-1.0), Some(2.5), false));
    let b = band("G[1,2] 2 * y1 > 3").unwrap();
    assert_eq!((b.low, b.high), (Some(1.5), None));
}

#[test]
fn other_shapes_have_no_band() {
    assert!(band(crate::scenarios::SCENARIO2_SPEC).is_none());
    assert!(band("true").is_none());
    assert!(band("G[0,3] (y1 > 1 or y1 < -1 or y1 > 5)").is_none());
    assert!(band("F[0,3] y1 > 1").is_none());
}

fn scenario_plot(spec: &str) -> PlotData {
    let y = Signal::scalar(&(0..11).map(|t| t as f64 * 0.3).collect::<Vec<_>>()).unwrap();
    PlotData {
        u: Some(Signal::zeros(1, 11)),
        y_pred: Some(y.clone()),
        y_true: Some(y),
        band: spec_band(&parse(spec, 1).unwrap()),
        ..PlotData::default()
    }
}

#[test]
fn band_columns_cover_the_window_only() {
    let csv = scenario_plot(crate::scenarios::SCENARIO1_SPEC).to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,u1,y_pred1,y_true1,spec_band_low,spec_band_high");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 11);
    for (t, r) in rows.iter().enumerate() {
        let expect = if (5..=10).contains(&t) { ("2", "3") } else { ("", "") };
        assert_eq!((r[4], r[5]), expect, "t={t}");
    }
}

#[test]
fn vacuous_spec_has_no_band_columns() {
    let csv = scenario_plot("true").to_csv();
    assert_eq!(csv.lines().next().unwrap(), "t,u1,y_pred1,y_true1");
}

#[test]
fn reference_and_celsius_columns() {
    let plot = PlotData {
        y_pred: Some(Signal::scalar(&[212.0, 32.0]).unwrap()),
        t_ref: Some(vec![0.0, 50.0]),
        celsius: true,
        ..PlotData::default()
    };
    let csv = plot.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,y_pred1,y_pred1_c,T_ref,T_ref_c");
    assert_eq!(lines[1], "0,212,100,0,-17.77777777777778");
    assert_eq!(lines[2], "1,32,0,50,10");
}

#[test]
fn svg_is_well_formed_enough() {
    let svg = scenario_plot(crate::scenarios::SCENARIO1_SPEC).to_svg();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.contains("fill-opacity"));
}

#[test]
fn cost_names() {
    let c = |k: &CostKind| report::CostReport::from(k).kind;
    assert_eq!(c(&CostKind::InputNorm), "u-norm");
    assert_eq!(c(&CostKind::OutputNorm), "y-norm");
    assert_eq!(c(&CostKind::Mixed { r: vec![1.0], q: vec![0.0] }), "mixed");
}

#[test]
fn error_exit_codes() {
    assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    assert_eq!(exit_code(&Error::Format { path: "p".into(), reason: "r".into() }), EXIT_IO);
    assert_eq!(exit_code(&Error::invalid("x")), EXIT_USAGE);
    assert_eq!(exit_code(&Error::dim("x")), EXIT_USAGE);
    assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_UNSATISFIED);
}

#[test]
fn box_and_list_parsing() {
    let b = parse_box("-2,2", 2).unwrap();
    assert_eq!((b.lo.clone(), b.hi.clone()), (vec![-2.0; 2], vec![2.0; 2]));
    assert!(parse_box("1", 1).is_err());
    assert!(parse_box("2,1", 1).is_err());
    assert!(parse_list("1,x", "w").is_err());
    assert!(parse_list("1,inf", "w").is_err());
}

#[test]
fn observed_box_is_the_data_range() {
    let u = Signal::new(2, vec![1.0, -3.0, -1.0, 4.0, 0.5, 0.0]).unwrap();
    let b = observed_box(&u).unwrap();
    assert_eq!((b.lo.clone(), b.hi.clone()), (vec![-1.0, -3.0], vec![1.0, 4.0]));
}

#[test]
fn config_tables_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[milp]\nbig_m = 100.0\ndynamics = \"hankel\"\n[solver]\ntime_limit = 5.0\n").unwrap();
    let cfg = load_config(Some(&path)).unwrap();
    assert_eq!(cfg.milp.big_m, 100.0);
    assert_eq!(cfg.milp.dynamics, crate::milp::DynamicsForm::Hankel);
    assert_eq!(cfg.solver.time_limit, 5.0);
    assert_eq!(cfg.solver.node_limit, SolverParams::default().node_limit);
    std::fs::write(&path, "[milp]\nbigm = 1.0\n").unwrap();
    assert!(matches!(load_config(Some(&path)), Err(Error::InvalidArgument(_))));
    std::fs::write(&path, "[milp]\neps = -1.0\n").unwrap();
    assert!(load_config(Some(&path)).is_err());
    assert!(matches!(load_config(Some(&dir.path().join("missing.toml"))), Err(Error::Io(_))));
}
