use super::*;
use crate::behavior::assemble;
use crate::lti::{builtin_model, generate_data, InputBox, Signal, Trajectory};
use crate::solver::{solve_lp, solve_milp, SolverParams, Status};
use crate::stl::{parse, StlFormula};
use proptest::prelude::*;

fn pinned_outputs(prob: &mut MilpProblem, y: &[f64]) -> Vec<Vec<VarId>> {
    y.iter()
        .enumerate()
        .map(|(t, &v)| {
            let id = prob.continuous(format!("y1_{t}"), v, v);
            vec![id]
        })
        .collect()
}

/// Feasibility of the encoding of `phi` with `y` fixed and the root pinned true.
fn encoding_feasible(phi: &StlFormula, y: &[f64]) -> bool {
    let mut prob = MilpProblem::new();
    let yv = pinned_outputs(&mut prob, y);
    let enc = encode_formula(&mut prob, phi, &yv, &EncodingParams::default()).unwrap();
    encode::pin_true(&mut prob, enc.root).unwrap();
    match solve_milp(&prob, &SolverParams::default()).status {
        Status::Optimal => true,
        Status::Infeasible => false,
        other => panic!("unexpected status {other:?} for {phi}"),
    }
}

/// A three-sample car window from a small state.
fn small_init(k: usize) -> Trajectory {
    let car = builtin_model("car").unwrap();
    let k = k as f64;
    let x = [(k * 0.7).sin() * 2.0, (k * 1.3).cos(), (k * 0.4).sin()];
    let u = Signal::scalar(&[(k * 0.9).cos(), (k * 2.1).sin(), 0.5]).unwrap();
    car.simulate_from(&x, &u, None).unwrap().0
}

fn car_data() -> Trajectory {
    let car = builtin_model("car").unwrap();
    generate_data(&car, 200, &InputBox::uniform(1, -2.0, 2.0).unwrap(), 7, None).unwrap()
}

#[test]
fn predicate_forces_truth() {
    // y - 1 > 0 with y = 2: z = 0 would need 1 <= -eps.
    let mut prob = MilpProblem::new();
    let yv = pinned_outputs(&mut prob, &[2.0]);
    let enc = encode_formula(&mut prob, &StlFormula::pred(vec![1.0], -1.0), &yv, &EncodingParams::default()).unwrap();
    let Zeta::Lit { var, .. } = enc.root else { panic!() };
    prob.fix(var, 0.0);
    assert_eq!(solve_milp(&prob, &SolverParams::default()).status, Status::Infeasible);
    prob.fix(var, 1.0);
    assert_eq!(solve_milp(&prob, &SolverParams::default()).status, Status::Optimal);
}

#[test]
fn boolean_truth_tables() {
    // Children are free binaries pinned by bounds; the composite is read back.
    type Op = fn(Vec<StlFormula>) -> StlFormula;
    let ops: [(&str, Op, fn(&[bool]) -> bool); 3] = [
        ("and", StlFormula::And, |v| v.iter().all(|&b| b)),
        ("or", StlFormula::Or, |v| v.iter().any(|&b| b)),
        ("not", |mut v| StlFormula::not(v.remove(0)), |v| !v[0]),
    ];
    for (name, op, truth) in ops {
        let arity = if name == "not" { 1 } else { 3 };
        for mask in 0..(1u32 << arity) {
            let bits: Vec<bool> = (0..arity).map(|k| (mask >> k) & 1 == 1).collect();
            // Child k reads y_k > 0 on its own output channel.
            let children = (0..arity)
                .map(|k| {
                    let mut c = vec![0.0; arity];
                    c[k] = 1.0;
                    StlFormula::pred(c, 0.0)
                })
                .collect();
            let phi = op(children);
            let mut prob = MilpProblem::new();
            let yv: Vec<VarId> = (0..arity).map(|k| prob.continuous(format!("y{k}"), -1.0, 1.0)).collect();
            let enc = encode_formula(&mut prob, &phi, &[yv], &EncodingParams::default()).unwrap();
            for (atom, &b) in enc.atoms.iter().zip(&bits) {
                prob.fix(atom.var, f64::from(u8::from(b)));
            }
            // With 0/1 children the rows pin the composite exactly.
            let sol = solve_lp(&prob, &SolverParams::default());
            assert_eq!(sol.status, Status::Optimal);
            let root = enc.root.value(&sol.values);
            assert!((root - f64::from(u8::from(truth(&bits)))).abs() < 1e-9, "{name} {bits:?} root={root}");
        }
    }
}

#[test]
fn always_reads_the_window_without_clamping() {
    let phi = StlFormula::always(5, 10, StlFormula::pred(vec![1.0], 0.0));
    let mut prob = MilpProblem::new();
    let yv: Vec<Vec<VarId>> = (0..14).map(|t| vec![prob.free(format!("y{t}"))]).collect();
    let enc = encode_formula(&mut prob, &phi, &yv, &EncodingParams::default()).unwrap();
    let times: Vec<usize> = enc.atoms.iter().map(|a| a.t).collect();
    assert_eq!(times, (5..=10).collect::<Vec<_>>());
    assert_eq!(enc.composites, 1);
}

#[test]
fn until_terminal_step_is_the_conjunction() {
    // At t = L the until chain is exactly (phi1 and phi2) at L.
    let l = StlFormula::pred(vec![1.0], 0.0);
    let r = StlFormula::pred(vec![1.0], -1.0);
    let phi = StlFormula::until(0, 3, l, r);
    for y in [[0.5, 0.5, 0.5, 2.0], [0.5, 0.5, 0.5, 0.5], [0.5, 0.5, -1.0, 2.0]] {
        let expect = phi.monitor(&Signal::scalar(&y).unwrap(), 0);
        assert_eq!(encoding_feasible(&phi, &y), expect, "{y:?}");
    }
}

#[test]
fn constant_formulas_need_no_variables() {
    let mut prob = MilpProblem::new();
    let yv = pinned_outputs(&mut prob, &[0.0, 0.0]);
    let n = prob.n_vars();
    let enc = encode_formula(&mut prob, &StlFormula::True, &yv, &EncodingParams::default()).unwrap();
    assert_eq!(enc.root, Zeta::Const(true));
    assert_eq!(prob.n_vars(), n);
    let enc = encode_formula(&mut prob, &StlFormula::always(0, 1, StlFormula::False), &yv, &EncodingParams::default())
        .unwrap();
    assert_eq!(enc.root, Zeta::Const(false));
    assert!(!encoding_feasible(&StlFormula::False, &[0.0]));
}

#[test]
fn dynamics_dimensions() {
    let data = car_data();
    let sys = assemble(&data, 3, 13, Some(3)).unwrap();
    let w_ini = data.slice(50, 53);
    let mut prob = MilpProblem::new();
    let dv = encode_dynamics(&mut prob, &sys, &w_ini, 13, None).unwrap();
    assert_eq!(prob.constraints.len(), 34);
    assert_eq!(dv.alpha.len(), 184);
    assert_eq!(dv.u.len(), 14);
    assert_eq!(dv.y.len(), 14);
    assert!(encode_dynamics(&mut MilpProblem::new(), &sys, &w_ini, 12, None).is_err());
}

#[test]
fn orthogonal_form_has_the_same_solutions() {
    let data = car_data();
    let sys = assemble(&data, 3, 10, Some(3)).unwrap();
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let bx = InputBox::uniform(1, -2.0, 2.0).unwrap();
    let mut solved = 0;
    for k in 0..12 {
        let w_ini = small_init(k);
        let mut objs = Vec::new();
        let mut rows = Vec::new();
        let mut statuses = Vec::new();
        for form in [DynamicsForm::Hankel, DynamicsForm::Orthogonal] {
            let params = EncodingParams { dynamics: form, ..Default::default() };
            let (p, h) = assemble_problem(&sys, &w_ini, &phi, &CostKind::OutputNorm, &bx, None, &params).unwrap();
            rows.push(p.constraints.len());
            let s = solve_milp(&p, &SolverParams::default());
            statuses.push(s.status);
            if s.status != Status::Optimal {
                continue;
            }
            // The solution also satisfies the literal data equation.
            let alpha: Vec<f64> = h.dynamics.alpha.iter().map(|v| s.value(*v)).collect();
            let fit = sys.stacked().mul_vec(&alpha).unwrap();
            let mut w = crate::behavior::stack_window(&w_ini);
            let u: Vec<f64> = h.dynamics.u.iter().map(|r| s.value(r[0])).collect();
            let y: Vec<f64> = h.dynamics.y.iter().map(|r| s.value(r[0])).collect();
            w.splice(3..3, u);
            w.extend(y);
            let worst = fit.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-6, "{form:?}: residual {worst}");
            objs.push(s.objective);
        }
        assert_eq!(rows[0], rows[1]);
        assert_eq!(statuses[0], statuses[1]);
        if statuses[0] == Status::Optimal {
            solved += 1;
            assert!((objs[0] - objs[1]).abs() < 1e-6, "{objs:?}");
        }
    }
    assert!(solved >= 4, "only {solved} feasible instances");
}

#[test]
fn zero_initialization_admits_zero_outputs() {
    let data = car_data();
    let sys = assemble(&data, 3, 13, Some(3)).unwrap();
    let w_ini = Trajectory::new(Signal::zeros(1, 3), Signal::zeros(1, 3), None).unwrap();
    let mut prob = MilpProblem::new();
    let dv = encode_dynamics(&mut prob, &sys, &w_ini, 13, None).unwrap();
    for t in 0..14 {
        prob.fix(dv.u[t][0], 0.0);
        prob.fix(dv.y[t][0], 0.0);
    }
    assert_eq!(solve_lp(&prob, &SolverParams::default()).status, Status::Optimal);
}

#[test]
fn scenario_initialization_is_accepted_as_constants() {
    let data = car_data();
    let sys = assemble(&data, 3, 13, Some(3)).unwrap();
    let w_ini = Trajectory::new(
        Signal::scalar(&[0.6058, 0.0, 0.0]).unwrap(),
        Signal::scalar(&[-0.1636, 0.0, 0.0]).unwrap(),
        None,
    )
    .unwrap();
    let mut prob = MilpProblem::new();
    encode_dynamics(&mut prob, &sys, &w_ini, 13, None).unwrap();
    let rhs: Vec<f64> = prob.constraints.iter().map(|c| c.rhs).collect();
    assert_eq!(&rhs[..3], &[0.6058, 0.0, 0.0]);
    assert_eq!(&rhs[17..20], &[-0.1636, 0.0, 0.0]);
}

#[test]
fn cost_examples() {
    let mut prob = MilpProblem::new();
    let u = vec![vec![prob.continuous("u0", 1.0, 1.0)], vec![prob.continuous("u1", -2.0, -2.0)]];
    let y = vec![vec![prob.free("y0")], vec![prob.free("y1")]];
    encode_cost(&mut prob, &CostKind::InputNorm, &u, &y).unwrap();
    let s = solve_lp(&prob, &SolverParams::default());
    assert!((s.objective - 3.0).abs() < 1e-12);

    let mut prob = MilpProblem::new();
    let u = vec![vec![prob.free("u0")]];
    let y = vec![vec![prob.continuous("y0", 0.0, 0.0)]];
    encode_cost(&mut prob, &CostKind::OutputNorm, &u, &y).unwrap();
    assert_eq!(solve_lp(&prob, &SolverParams::default()).objective, 0.0);

    let bad = CostKind::Mixed { r: vec![-1.0], q: vec![1.0] };
    assert!(encode_cost(&mut MilpProblem::new(), &bad, &u, &y).is_err());
}

#[test]
fn mixed_cost_with_zero_input_weight_is_output_norm() {
    let data = car_data();
    let sys = assemble(&data, 3, 10, Some(3)).unwrap();
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let bx = InputBox::uniform(1, -2.0, 2.0).unwrap();
    let mut solved = 0;
    for k in 0..10 {
        let w_ini = small_init(k);
        let solve = |cost: &CostKind| {
            let (p, _) = assemble_problem(&sys, &w_ini, &phi, cost, &bx, None, &EncodingParams::default()).unwrap();
            solve_milp(&p, &SolverParams::default())
        };
        let a = solve(&CostKind::OutputNorm);
        let b = solve(&CostKind::Mixed { r: vec![0.0], q: vec![1.0] });
        assert_eq!(a.status, b.status);
        if a.status == Status::Optimal {
            solved += 1;
            assert!((a.objective - b.objective).abs() <= 1e-6, "{} vs {}", a.objective, b.objective);
        }
    }
    assert!(solved >= 5, "only {solved} feasible instances");
}

#[test]
fn scenario_assembly_counts() {
    let data = car_data();
    let sys = assemble(&data, 3, 10, Some(3)).unwrap();
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let w_ini = data.slice(100, 103);
    let bx = InputBox::uniform(1, -2.0, 2.0).unwrap();
    let (p, h) =
        assemble_problem(&sys, &w_ini, &phi, &CostKind::InputNorm, &bx, None, &EncodingParams::default()).unwrap();
    // Four predicate atoms per step in [5, 10] after abs rewriting.
    assert_eq!(p.binaries().len(), 24);
    assert_eq!(h.formula.atoms.len(), 24);
    for row in &h.dynamics.u {
        let v = p.var(row[0]);
        assert_eq!((v.lo, v.hi), (-2.0, 2.0));
    }
    let (p, h) =
        assemble_problem(&sys, &w_ini, &StlFormula::True, &CostKind::InputNorm, &bx, None, &EncodingParams::default())
            .unwrap();
    assert!(p.binaries().is_empty() && h.formula.composites == 0);
}

#[test]
fn lp_export_smallest_problem() {
    let mut p = MilpProblem::new();
    let x = p.continuous("x", 3.0, f64::INFINITY);
    p.add_objective(x, 1.0);
    let mut buf = Vec::new();
    write_lp(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for section in ["Minimize", "Subject To", "Bounds", "End"] {
        assert!(text.contains(section), "{text}");
    }
    assert!(text.contains("x >= 3.0000000000000000e0"), "{text}");
}

#[test]
fn lp_export_lists_predicate_binaries() {
    let data = car_data();
    let sys = assemble(&data, 3, 10, Some(3)).unwrap();
    let phi = parse("G[5,10] (abs(y1) >= 2 and abs(y1) <= 3)", 1).unwrap();
    let (p, h) = assemble_problem(
        &sys,
        &data.slice(0, 3),
        &phi,
        &CostKind::InputNorm,
        &InputBox::uniform(1, -2.0, 2.0).unwrap(),
        None,
        &EncodingParams::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_lp(&p, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let binary: Vec<&str> = text
        .split("Binary\n")
        .nth(1)
        .unwrap()
        .lines()
        .take_while(|l| *l != "End")
        .flat_map(str::split_whitespace)
        .collect();
    let atoms: Vec<&str> = h.formula.atoms.iter().map(|a| p.var(a.var).name.as_str()).collect();
    assert_eq!(binary, atoms);
    let reread = read_lp(&text);
    assert_eq!(reread.constraints.len(), p.constraints.len());
    assert_eq!(reread.vars.len(), p.vars.len());
    let named = |q: &MilpProblem, c: &LinearConstraint| -> (Vec<(String, f64)>, Sense, f64) {
        (c.terms.iter().map(|&(v, a)| (q.var(v).name.clone(), a)).collect(), c.sense, c.rhs)
    };
    for (a, b) in reread.constraints.iter().zip(&p.constraints) {
        assert_eq!(named(&reread, a), named(&p, b));
    }
}

/// Minimal reader for the exporter's own output, used to check that the
/// file carries the problem exactly.
fn read_lp(text: &str) -> MilpProblem {
    let mut p = MilpProblem::new();
    let mut ids = std::collections::HashMap::new();
    let mut section = "";
    let mut stmt = String::new();
    let mut id = |p: &mut MilpProblem, name: &str| -> VarId {
        *ids.entry(name.to_string()).or_insert_with(|| p.continuous(name, 0.0, f64::INFINITY))
    };
    let flush =
        |p: &mut MilpProblem, stmt: &str, section: &str, id: &mut dyn FnMut(&mut MilpProblem, &str) -> VarId| {
            if stmt.trim().is_empty() || section != "st" {
                return;
            }
            let body = stmt.split_once(':').unwrap().1;
            let toks: Vec<&str> = body.split_whitespace().collect();
            let mut terms = Vec::new();
            let mut k = 0;
            while k + 2 < toks.len() && (toks[k] == "+" || toks[k] == "-") {
                let a: f64 = toks[k + 1].parse().unwrap();
                let v = id(p, toks[k + 2]);
                terms.push((v, if toks[k] == "-" { -a } else { a }));
                k += 3;
            }
            let sense = match toks[k] {
                "<=" => Sense::Le,
                ">=" => Sense::Ge,
                _ => Sense::Eq,
            };
            p.add_constraint(terms, sense, toks[k + 1].parse().unwrap()).unwrap();
        };
    for line in text.lines() {
        if line.starts_with('\\') {
            continue;
        }
        let header = match line {
            "Minimize" => Some("min"),
            "Subject To" => Some("st"),
            "Bounds" => Some("bounds"),
            "Binary" => Some("bin"),
            "End" => Some("end"),
            _ => None,
        };
        if let Some(h) = header {
            flush(&mut p, &stmt, section, &mut id);
            stmt.clear();
            section = h;
            continue;
        }
        if section == "st" && line.starts_with(" c") && line.contains(':') && !stmt.is_empty() {
            flush(&mut p, &stmt, section, &mut id);
            stmt.clear();
        }
        match section {
            "st" => stmt.push_str(line),
            "bounds" | "bin" | "min" => {
                for tok in line.split_whitespace() {
                    if tok.chars().next().is_some_and(|c| c.is_alphabetic()) && !["free", "inf", "obj:"].contains(&tok)
                    {
                        id(&mut p, tok);
                    }
                }
            }
            _ => {}
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn encoding_agrees_with_monitor(
        phi in crate::stl::tests::arb_formula(3),
        y in prop::collection::vec((-4i32..=4).prop_map(f64::from), 13),
    ) {
        prop_assume!(phi.horizon() <= 12);
        let expect = phi.monitor(&Signal::scalar(&y).unwrap(), 0);
        prop_assert_eq!(encoding_feasible(&phi, &y), expect, "{}", phi);
    }
}
