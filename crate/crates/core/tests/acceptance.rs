use std::process::ExitCode;
use std::time::{Duration, Instant};

use srlab::dictionary::{gegenbauer_dictionary, gegenbauer_eval, DictionarySpec, GegenbauerParams};
use srlab::discretization::{verify_universal_discretization, DiscretizationOptions};
use srlab::experiments::{
    run_experiment, Bp1Params, Experiment, ExperimentConfig, GegenbauerRateParams, KashinParams, LebesgueParams,
    OgaParams, Report, TauParams,
};
use srlab::frequency::FrequencyKind;
use srlab::report::to_json;
use srlab::workspace::PointSet;

type Outcome = Result<String, String>;

fn run(experiment: Experiment, seed: u64) -> Result<(Report, Duration), String> {
    let t = Instant::now();
    let r = run_experiment(&ExperimentConfig { seed, experiment }).map_err(|e| e.to_string())?;
    Ok((r, t.elapsed()))
}

fn records_pass(r: &Report, prefix: &str, suffix: &str) -> Result<usize, String> {
    if !r.premise.certified {
        return Err(format!("premise not certified: {}", r.premise.description));
    }
    let sel: Vec<_> = r
        .records
        .iter()
        .filter(|x| x.asserted && x.key.starts_with(prefix) && x.key.ends_with(suffix))
        .collect();
    if sel.is_empty() {
        return Err(format!("no records matching {prefix}*{suffix}"));
    }
    match sel.iter().find(|x| !x.pass) {
        Some(x) => Err(format!("{}: {} > {}", x.key, x.lhs, x.rhs)),
        None => Ok(sel.len()),
    }
}

fn within(elapsed: Duration, limit: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1} s, limit {limit} s", elapsed.as_secs_f64()))
    }
}

fn lebesgue(lebesgue: &Result<(Report, Duration), String>, suffix: &str) -> Outcome {
    let (r, t) = lebesgue.as_ref().map_err(Clone::clone)?;
    let c1 = r.premise.constant.unwrap_or(0.0);
    if c1 < 0.5 {
        return Err(format!("C1 = {c1} < 1/2"));
    }
    let n = records_pass(r, "f", suffix)?;
    if n != 100 {
        return Err(format!("{n} functions instead of 100"));
    }
    within(*t, 60)?;
    Ok(format!(
        "{n}/100 pass, C1 = {c1:.4} on m = {}, {:.1} s",
        r.premise.points.unwrap_or(0),
        t.as_secs_f64()
    ))
}

fn ac3() -> Outcome {
    let spec = DictionarySpec::Trig {
        dim: 1,
        frequencies: FrequencyKind::Range { lo: -2, hi: 2 },
    };
    let dict = spec.build().map_err(|e| e.to_string())?;
    let xi = PointSet::equispaced_torus(1, 5).map_err(|e| e.to_string())?;
    let r = verify_universal_discretization(&dict, &xi, 5, &DiscretizationOptions::default())
        .map_err(|e| e.to_string())?;
    let c2 = r.c2.ok_or("no upper constant")?;
    if (r.c1 - 1.0).abs() > 1e-10 || (c2 - 1.0).abs() > 1e-10 {
        return Err(format!("C1 = {}, C2 = {c2}", r.c1));
    }
    let few = PointSet::equispaced_torus(1, 3).map_err(|e| e.to_string())?;
    let r0 = verify_universal_discretization(&dict, &few, 5, &DiscretizationOptions::default())
        .map_err(|e| e.to_string())?;
    if r0.c1 != 0.0 {
        return Err(format!("m < v gave C1 = {}", r0.c1));
    }
    Ok(format!("C1 = {:.12}, C2 = {c2:.12}; m = 3 < v gives C1 = 0", r.c1))
}

fn simple(experiment: Experiment, limit: Option<u64>) -> Outcome {
    let (r, t) = run(experiment, 1)?;
    let n = records_pass(&r, "", "")?;
    if let Some(l) = limit {
        within(t, l)?;
    }
    Ok(format!("{n}/{n} pass, {:.1} s", t.as_secs_f64()))
}

fn ac7(tau: &Result<(Report, Duration), String>) -> Outcome {
    let (r, t) = tau.as_ref().map_err(Clone::clone)?;
    let n = records_pass(r, "witness/", "")?;
    if n != 4 {
        return Err(format!("{n} witness records"));
    }
    let bound = r.records.iter().find(|x| x.key == "witness/bound").ok_or("missing bound")?;
    if (bound.lhs - (0.5f64).sqrt() / 3.0).abs() > 1e-12 {
        return Err(format!("bound {} differs from sqrt(1/2)/3", bound.lhs));
    }
    if !bound.certified {
        return Err("witness not validated".into());
    }
    within(*t, 10)?;
    Ok(format!(
        "|g|_2 = {:.6} >= {:.6}, vanishes on xi, {:.1} s",
        bound.rhs,
        bound.lhs,
        t.as_secs_f64()
    ))
}

fn ac8(tau: &Result<(Report, Duration), String>) -> Outcome {
    let (r, _) = tau.as_ref().map_err(Clone::clone)?;
    records_pass(r, "chain/", "")?;
    let x = r.records.iter().find(|x| x.key == "chain/lebesgue").ok_or("missing chain")?;
    Ok(format!(
        "|g|_2 = {:.6} <= {:.6} (K = {:.4}, C1 = {:.4})",
        x.lhs,
        x.rhs,
        x.constant,
        r.derived.get("c1").copied().unwrap_or(f64::NAN)
    ))
}

fn ac9() -> Outcome {
    let mut worst_gram = 0.0f64;
    let mut worst_weighted = 0.0f64;
    for alpha in [0.0, 0.5] {
        let params = GegenbauerParams::new(alpha, 11).map_err(|e| e.to_string())?;
        let dict = gegenbauer_dictionary(params, false).map_err(|e| e.to_string())?;
        let q = dict.quadrature(None).map_err(|e| e.to_string())?;
        let phi = dict.design(&q.nodes).map_err(|e| e.to_string())?;
        for i in 0..12 {
            for j in 0..12 {
                let g: f64 = (0..q.weights.len())
                    .map(|k| (phi[(k, i)].conj() * phi[(k, j)]).re * q.weights[k])
                    .sum();
                let e = (g - if i == j { 1.0 } else { 0.0 }).abs();
                worst_gram = worst_gram.max(e);
            }
        }
        let weighted = gegenbauer_dictionary(params, true).map_err(|e| e.to_string())?;
        for k in 0..=20000 {
            let x = -1.0 + 2.0 * k as f64 / 20000.0;
            let row = weighted.eval_all(&[x]).map_err(|e| e.to_string())?;
            for v in row {
                worst_weighted = worst_weighted.max(v.norm());
            }
        }
    }
    if worst_gram > 1e-10 {
        return Err(format!("Gram deviation {worst_gram:e}"));
    }
    if worst_weighted > 1.0 + 1e-9 {
        return Err(format!("weighted grid max {worst_weighted}"));
    }
    let legendre = GegenbauerParams::new(0.0, 8).map_err(|e| e.to_string())?;
    let mut worst_end = 0.0f64;
    for n in 0..=8 {
        let v = gegenbauer_eval(&legendre, n, 1.0).map_err(|e| e.to_string())?;
        worst_end = worst_end.max((v - ((2 * n + 1) as f64).sqrt()).abs());
    }
    if worst_end > 1e-10 {
        return Err(format!("endpoint deviation {worst_end:e}"));
    }
    Ok(format!(
        "Gram error {worst_gram:.1e}, endpoint error {worst_end:.1e}, weighted max {worst_weighted:.12}"
    ))
}

fn ac10() -> Outcome {
    let (r, t) = run(Experiment::GegenbauerRate(GegenbauerRateParams::default()), 1)?;
    records_pass(&r, "", "")?;
    let slope = r.derived.get("upper_slope").copied().ok_or("no slope")?;
    let c = r.derived.get("lower_constant").copied().ok_or("no constant")?;
    if slope.is_nan() || slope > -1.2 {
        return Err(format!("slope {slope} > -1.2"));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(format!("lower constant {c}"));
    }
    Ok(format!("upper slope {slope:.4} <= -1.2, lower constant c = {c:.4e}, {:.1} s", t.as_secs_f64()))
}

fn ac11() -> Outcome {
    let experiments = [
        Experiment::Kashin(KashinParams::default()),
        Experiment::TauLower(TauParams::default()),
        Experiment::LebesgueIt2(LebesgueParams {
            functions: 12,
            ..Default::default()
        }),
        Experiment::GegenbauerRate(GegenbauerRateParams {
            members: 3,
            n_values: vec![4, 8, 16],
            ..Default::default()
        }),
    ];
    for e in experiments {
        let name = e.name();
        let a = to_json(&run(e.clone(), 7)?.0).map_err(|e| e.to_string())?;
        let b = to_json(&run(e, 7)?.0).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} output differs between runs"));
        }
    }
    Ok("kashin, tau-lower, lebesgue-it2, gegenbauer-rate byte-identical".into())
}

fn main() -> ExitCode {
    let fixed = run(Experiment::LebesgueBt2(LebesgueParams::default()), 1);
    let tau = run(Experiment::TauLower(TauParams::default()), 1);
    let results: Vec<(&str, &str, Outcome)> = vec![
        ("AC1", "Lebesgue inequality, uniform norm", lebesgue(&fixed, "/uniform")),
        ("AC2", "Lebesgue inequality, mixed measure", lebesgue(&fixed, "/mixed")),
        ("AC3", "discretization certification", ac3()),
        (
            "AC4",
            "two-block rate on A1^r",
            simple(Experiment::Bp1Rate(Bp1Params::default()), Some(60)),
        ),
        ("AC5", "greedy rate", simple(Experiment::OgaRate(OgaParams::default()), None)),
        ("AC6", "Kashin oracle equality", simple(Experiment::Kashin(KashinParams::default()), None)),
        ("AC7", "hidden mass witness", ac7(&tau)),
        ("AC8", "witness Lebesgue chain", ac8(&tau)),
        ("AC9", "Gegenbauer foundations", ac9()),
        ("AC10", "rate shapes", ac10()),
        ("AC11", "determinism", ac11()),
    ];
    let mut failed = 0;
    for (id, what, outcome) in &results {
        match outcome {
            Ok(detail) => println!("{id} PASS {what}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {what}: {detail}");
            }
        }
    }
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
