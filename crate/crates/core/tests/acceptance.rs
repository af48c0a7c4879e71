//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::time::Instant;

use common::{configs_dir, scenario};
use isac_beam::experiments::{
    angle_sets, run_scenario, sweep_antennas, sweep_distance, write_scenario_outputs, ExperimentSpec, RunRecord,
    SweptEntity,
};
use isac_beam::formulation::{FormulationOptions, RelaxedSpec};
use isac_beam::irm::{rank_one_ratio, rank_one_residual, run_irm_spec, IrmParams};
use isac_beam::linalg::C64;
use isac_beam::metrics::{check_constraints, FeasibilityTolerances};
use isac_beam::scene::{build_desired_pattern, Scenario};
use isac_beam::sdp::{
    embed_hermitian, solve, unembed_symmetric, ConicProblem, LinearConstraint, Sense, SolverOptions, SolverStatus,
};
use isac_beam::units::linear_to_db;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn fmt_powers(v: &[Option<f64>]) -> String {
    v.iter().map(|p| p.map_or("nan".into(), |x| format!("{x:.6}"))).collect::<Vec<_>>().join(", ")
}

fn strictly_increasing(v: &[Option<f64>]) -> bool {
    v.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a))
}

fn load(file: &str) -> (ExperimentSpec, Scenario) {
    ExperimentSpec::load(&configs_dir().join(file)).expect(file)
}

/// Criterion 1. Returns the record for the rank-one and feasibility checks.
fn two_node(params: &IrmParams) -> (Outcome, Option<RunRecord>) {
    let s = Scenario::load(configs_dir().join("two_node.toml")).unwrap();
    let t = Instant::now();
    let run = run_scenario(&s, params);
    let secs = t.elapsed().as_secs_f64();
    let title = "SDR tightness on the two-node scene";
    match run {
        Ok(run) => {
            let r = &run.record.summary;
            let gap_db = linear_to_db(r.final_power_mw / r.sdr_power_mw);
            let pass = r.converged && gap_db <= 0.2 && secs <= 60.0;
            let detail =
                format!("final-relaxed = {gap_db:.3e} dB (<= 0.2), {} iterations, {secs:.1} s (<= 60)", r.iterations);
            (Outcome { id: 1, title, pass, detail }, Some(run.record))
        }
        Err(e) => (Outcome { id: 1, title, pass: false, detail: e.to_string() }, None),
    }
}

fn rank_one(records: &[&RunRecord]) -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_residual = 0.0f64;
    let mut skipped = 0;
    let mut error = None;
    for r in records {
        if !r.summary.converged {
            skipped += 1;
            continue;
        }
        for m in &r.solution.covariances {
            let w = isac_beam::linalg::HermitianMatrix::new(isac_beam::experiments::matrix_from_data(m).unwrap());
            match w.and_then(|w| Ok((rank_one_ratio(&w)?, rank_one_residual(&w)?))) {
                Ok((a, b)) => {
                    worst_ratio = worst_ratio.max(a);
                    worst_residual = worst_residual.max(b);
                }
                Err(e) => error = Some(e.to_string()),
            }
        }
    }
    let pass = error.is_none() && worst_ratio <= 1e-6 && worst_residual <= 1e-6;
    Outcome {
        id: 2,
        title: "rank-one recovery",
        pass,
        detail: match error {
            Some(e) => e,
            None => format!(
                "{} converged runs, max ratio {worst_ratio:.2e}, max residual {worst_residual:.2e} (<= 1e-6), {skipped} not converged",
                records.len() - skipped
            ),
        },
    }
}

fn feasibility(records: &[&RunRecord]) -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for r in records.iter().filter(|r| r.summary.converged) {
        count += 1;
        let s = r.scenario().unwrap();
        let pattern = build_desired_pattern(&s).unwrap();
        let tol = FeasibilityTolerances {
            rate: 1e-6,
            pattern_relative: 1e-6,
            pattern_absolute: r.params.solver.feas_tol,
            ..Default::default()
        };
        let set = match r.solution.to_set() {
            Ok(set) if set.vectors().is_some() => set,
            _ => {
                failures.push("missing extracted vectors".to_string());
                continue;
            }
        };
        let rep = check_constraints(&set, &s, &pattern, &tol).unwrap();
        failures.extend(
            rep.failures()
                .filter(|c| c.name.starts_with("rate") || c.name.starts_with("pattern"))
                .map(|c| format!("{} margin {:.3e}", c.name, c.margin)),
        );
    }
    Outcome {
        id: 3,
        title: "constraint feasibility of extracted vectors",
        pass: failures.is_empty() && count > 0,
        detail: if failures.is_empty() {
            format!("{count} runs checked")
        } else {
            format!("{} violations, first: {}", failures.len(), failures[0])
        },
    }
}

fn antennas(params: &IrmParams, records: &mut Vec<RunRecord>) -> Outcome {
    let (spec, base) = load("antenna_sweep.toml");
    let sweep = sweep_antennas(&base, &spec.antennas, params, 1).unwrap();
    let p: Vec<Option<f64>> = sweep.outcomes.iter().map(|o| o.power_dbm()).collect();
    records.extend(sweep.outcomes.iter().filter_map(|o| o.record().cloned()));
    let first = spec.antennas.iter().position(|&n| n == 10).and_then(|i| p[i]);
    let last = spec.antennas.iter().position(|&n| n == 20).and_then(|i| p[i]);
    let margin = match (first, last) {
        (Some(a), Some(b)) => a - b,
        _ => f64::NAN,
    };
    let monotone = p.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b <= a));
    Outcome {
        id: 4,
        title: "power falls with array size",
        pass: margin >= 1.0 && monotone,
        detail: format!(
            "N={:?}: [{}] dBm, margin {margin:.3} dB (>= 1), monotone {monotone}",
            spec.antennas,
            fmt_powers(&p)
        ),
    }
}

fn angle_proximity(params: &IrmParams, records: &mut Vec<RunRecord>) -> Outcome {
    let (spec, base) = load("angle_sets.toml");
    let sets = angle_sets(&base, &spec.angle_sets, params, 1).unwrap();
    records.extend(sets.runs.iter().filter_map(|r| r.outcome.record().cloned()));
    let b = sets.get("b").and_then(|r| r.outcome.power_dbm());
    let d = sets.get("d").and_then(|r| r.outcome.power_dbm());
    let pass = matches!((b, d), (Some(b), Some(d)) if d > b);
    Outcome {
        id: 5,
        title: "close users cost more than spread users",
        pass,
        detail: format!("{{20,25}}: {} dBm, {{20,40}}: {} dBm", fmt_powers(&[d]), fmt_powers(&[b])),
    }
}

fn distance(params: &IrmParams, records: &mut Vec<RunRecord>) -> Outcome {
    let (spec, base) = load("distance_sweep.toml");
    let sweep =
        sweep_distance(&base, &spec.distances_m, &spec.beam_widths_deg, spec.fixed_distance_m, params, 1).unwrap();
    records.extend(sweep.outcomes.iter().filter_map(|o| o.record().cloned()));
    let curve = |e, delta| sweep.curve(e, delta).into_iter().map(|(_, p)| p).collect::<Vec<_>>();
    let (lo, hi) = (spec.beam_widths_deg[0], *spec.beam_widths_deg.last().unwrap());
    let mut parts = Vec::new();
    let mut pass = true;
    for delta in &spec.beam_widths_deg {
        for e in [SweptEntity::Target, SweptEntity::User] {
            let c = curve(e, *delta);
            let ok = strictly_increasing(&c);
            pass &= ok;
            parts.push(format!("{} delta={delta}: [{}] increasing {ok}", e.as_str(), fmt_powers(&c)));
        }
    }
    let mut dominates = true;
    for e in [SweptEntity::Target, SweptEntity::User] {
        dominates &=
            curve(e, hi).iter().zip(curve(e, lo)).all(|(a, b)| matches!((a, b), (Some(a), Some(b)) if *a >= b));
    }
    pass &= dominates;
    parts.push(format!("delta={hi} >= delta={lo} pointwise {dominates}"));
    for delta in &spec.beam_widths_deg {
        let rise = |c: Vec<Option<f64>>| match (c.first().copied().flatten(), c.last().copied().flatten()) {
            (Some(a), Some(b)) => b - a,
            _ => f64::NAN,
        };
        let t = rise(curve(SweptEntity::Target, *delta));
        let u = rise(curve(SweptEntity::User, *delta));
        let ok = t > u;
        pass &= ok;
        parts.push(format!("delta={delta}: target rise {t:.4} dB > user rise {u:.4} dB {ok}"));
    }
    Outcome { id: 6, title: "distance and beam-width trends", pass, detail: parts.join("; ") }
}

fn solver_corpus() -> Outcome {
    let mut errs = Vec::new();
    let real = |d: &[f64]| DMatrix::from_row_slice(2, 2, d);
    let opts = SolverOptions::default();

    let mut p = ConicProblem::<f64>::new();
    let x = p.add_block("X", 2);
    p.set_block_objective(x, DMatrix::identity(2, 2));
    p.add_constraint(LinearConstraint::new("x11", Sense::Ge, 1.0).block(x, real(&[1.0, 0.0, 0.0, 0.0])));
    let (s, _) = solve(&p, &opts).unwrap();
    errs.push((s.objective - 1.0).abs());

    let mut p = ConicProblem::<f64>::new();
    let x = p.add_block("X", 2);
    p.set_block_objective(x, DMatrix::identity(2, 2));
    p.add_constraint(LinearConstraint::new("x12", Sense::Eq, 1.0).block(x, real(&[0.0, 0.5, 0.5, 0.0])));
    let (s, _) = solve(&p, &opts).unwrap();
    errs.push((s.objective - 2.0).abs());

    let mut p = ConicProblem::<C64>::new();
    let x = p.add_block("X", 2);
    p.set_block_objective(x, DMatrix::identity(2, 2));
    let z = C64::new(0.0, 0.0);
    let a = DMatrix::from_row_slice(2, 2, &[z, C64::new(0.0, 0.5), C64::new(0.0, -0.5), z]);
    p.add_constraint(LinearConstraint::new("im12", Sense::Eq, 1.0).block(x, a));
    let (s, _) = solve(&p, &opts).unwrap();
    errs.push((s.objective - 2.0).abs());

    let mut p = ConicProblem::<f64>::new();
    let x = p.add_block("X", 2);
    p.set_block_objective(x, DMatrix::identity(2, 2));
    p.add_constraint(LinearConstraint::new("tr", Sense::Le, -1.0).block(x, DMatrix::identity(2, 2)));
    let infeasible = solve(&p, &opts).map(|(_, r)| r.status == SolverStatus::Infeasible).unwrap_or(false);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut embed_err = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        embed_err = embed_err.max((unembed_symmetric(&embed_hermitian(&h)) - &h).norm());
    }
    let max_err = errs.iter().cloned().fold(0.0, f64::max);
    let errs = errs.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", ");
    Outcome {
        id: 7,
        title: "solver unit corpus",
        pass: max_err <= 1e-6 && infeasible && embed_err <= 1e-12,
        detail: format!(
            "analytic objective errors [{errs}] (<= 1e-6), infeasible flagged {infeasible}, embedding round trip {embed_err:.1e} (<= 1e-12)"
        ),
    }
}

/// Smallest `|w1|^2 + |w2|^2` over the grid `w = (m1, m2 e^{j psi})`
/// meeting the SINR floor and the single pattern sample.
fn grid_oracle(spec: &RelaxedSpec, scale: f64) -> Option<f64> {
    let h = &spec.user_channels[0];
    let row = &spec.pattern[0];
    let g = &row.gram_vector;
    let sinr_floor = spec.sinr_threshold * spec.noise_powers[0];
    let steps = 1000;
    let phases = 720;
    let dm = 1.5 * scale / steps as f64;
    let mut best: Option<f64> = None;
    for k in 0..phases {
        let psi = 2.0 * std::f64::consts::PI * k as f64 / phases as f64;
        let e = C64::from_polar(1.0, psi);
        // Quadratic forms |c1 m1 + c2 e m2|^2 with c = conj(vector entries).
        let (h1, h2) = (h[0].conj(), h[1].conj() * e);
        let (g1, g2) = (g[0].conj(), g[1].conj() * e);
        for i in 0..=steps {
            let m1 = i as f64 * dm;
            for j in 0..=steps {
                let m2 = j as f64 * dm;
                let p = m1 * m1 + m2 * m2;
                if best.is_some_and(|b| p >= b) {
                    continue;
                }
                let b = (g1 * m1 + g2 * m2).norm_sqr();
                if b < row.lower || b > row.upper {
                    continue;
                }
                if (h1 * m1 + h2 * m2).norm_sqr() >= sinr_floor {
                    best = Some(p);
                }
            }
        }
    }
    best
}

fn oracle() -> Outcome {
    let s = scenario(2, &[(20.0, 20.0)], &[(-30.0, 20.0)], 0.0);
    let params = IrmParams {
        formulation: FormulationOptions { include_radar_covariance: false, ..Default::default() },
        ..Default::default()
    };
    let pattern = build_desired_pattern(&s).unwrap();
    let spec = RelaxedSpec::from_scenario(&s, &pattern, &params.formulation).unwrap();
    assert_eq!(spec.pattern.len(), 1);
    let t = Instant::now();
    let sdr = run_irm_spec(&spec, &params).map(|r| r.sdr_power);
    let grid = sdr.as_ref().ok().and_then(|&p| grid_oracle(&spec, p.sqrt()));
    let secs = t.elapsed().as_secs_f64();
    match (sdr, grid) {
        (Ok(sdr), Some(grid)) => {
            let rel = (grid - sdr) / sdr;
            Outcome {
                id: 8,
                title: "brute-force oracle on two antennas",
                pass: rel.abs() <= 0.01 && grid >= sdr * (1.0 - 1e-6) && secs <= 300.0,
                detail: format!(
                    "relaxed {sdr:.6e} mW, grid {grid:.6e} mW, difference {:.3}% (<= 1%), {secs:.1} s",
                    100.0 * rel
                ),
            }
        }
        (sdr, _) => Outcome {
            id: 8,
            title: "brute-force oracle on two antennas",
            pass: false,
            detail: format!("relaxed {sdr:?}, no feasible grid point"),
        },
    }
}

fn determinism(params: &IrmParams) -> Outcome {
    let s = Scenario::load(configs_dir().join("two_node.toml")).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outputs: Vec<_> = dirs
        .iter()
        .map(|d| write_scenario_outputs(&run_scenario(&s, params).unwrap(), d.path(), "solution").unwrap())
        .collect();
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();
    let pairs = [
        (&outputs[0].beampattern, &outputs[1].beampattern),
        (&outputs[0].sdr_beampattern, &outputs[1].sdr_beampattern),
        (&outputs[0].trace, &outputs[1].trace),
    ];
    let same = pairs.iter().filter(|(a, b)| read(a) == read(b)).count();
    Outcome {
        id: 9,
        title: "repeated solves write identical CSVs",
        pass: same == pairs.len(),
        detail: format!("{same}/{} CSV files byte-identical", pairs.len()),
    }
}

fn scaling(params: &IrmParams) -> (Outcome, Option<RunRecord>) {
    let s =
        scenario(20, &[(20.0, 20.0), (40.0, 20.0), (60.0, 20.0)], &[(-30.0, 20.0), (-50.0, 20.0), (-70.0, 20.0)], 5.0);
    let samples = build_desired_pattern(&s).unwrap().len();
    let t = Instant::now();
    let run = run_scenario(&s, params);
    let secs = t.elapsed().as_secs_f64();
    let title = "N=20, K=3, M=15 completes";
    match run {
        Ok(run) => (
            Outcome {
                id: 10,
                title,
                pass: samples == 15 && run.record.summary.converged && secs <= 600.0,
                detail: format!(
                    "M={samples}, converged {} after {} iterations in {secs:.1} s (<= 600)",
                    run.record.summary.converged, run.record.summary.iterations
                ),
            },
            Some(run.record),
        ),
        Err(e) => (Outcome { id: 10, title, pass: false, detail: e.to_string() }, None),
    }
}

fn main() {
    let params = IrmParams::default();
    let mut records = Vec::new();
    let (c1, r) = two_node(&params);
    records.extend(r);
    let c4 = antennas(&params, &mut records);
    let c5 = angle_proximity(&params, &mut records);
    let c6 = distance(&params, &mut records);
    let c7 = solver_corpus();
    let c8 = oracle();
    let c9 = determinism(&params);
    let (c10, r) = scaling(&params);
    records.extend(r);
    let refs: Vec<&RunRecord> = records.iter().collect();
    let c2 = rank_one(&refs);
    let c3 = feasibility(&refs);

    let all = [c1, c2, c3, c4, c5, c6, c7, c8, c9, c10];
    for o in &all {
        println!("{} criterion {:>2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.title, o.detail);
    }
    let failed = all.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", all.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
