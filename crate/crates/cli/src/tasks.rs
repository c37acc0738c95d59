use ergomoment::oracle::{enumerate_paths_s4, MomentOracle};
use ergomoment::spectral::{power_iteration_radius, theta_kappa, ErgodicityCertificate, ProbeSet};
use ergomoment::verify::{
    binomial_fourth_central, clt_check, empirical_tightness, proof_ledger, verify_bound, BoundMode,
    LedgerReport,
};
use ergomoment::{estimate_s4, Execution, FiniteMarkovModel, NormKind, Observable};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::prepare::{build, prepare, prepare_finite, require_model};
use crate::report::{to_value, Check, Table, TaskOutcome};

const EXECUTION: Execution = Execution::Parallel;

pub fn run_task(task: &Task, seed: u64) -> CliResult<TaskOutcome> {
    let (result, checks, table) = match task {
        Task::Spectral(t) => spectral(t)?,
        Task::ThetaAgreement(t) => theta_agreement(t)?,
        Task::OracleS4(t) => oracle_s4(t)?,
        Task::OracleConsistency(t) => oracle_consistency(t)?,
        Task::McS4(t) => mc_s4(t, seed)?,
        Task::Bound(t) => bound(t, seed)?,
        Task::HatSweep(t) => hat_sweep(t, seed)?,
        Task::Ledger(t) => ledger(t)?,
        Task::Clt(t) => clt(t, seed)?,
        Task::Tightness(t) => tightness(t, seed)?,
    };
    Ok(TaskOutcome {
        kind: task.kind(),
        result,
        checks,
        table,
    })
}

type Parts = (Value, Vec<Check>, Option<Table>);

fn rel_err(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
    }
}

fn certificate_for(
    model: &FiniteMarkovModel,
    phi: Option<&[f64]>,
    norm: NormKind,
    horizon: usize,
    cutoff: usize,
    p: f64,
) -> CliResult<ErgodicityCertificate> {
    let probes = match phi {
        Some(values) => ProbeSet::closure(model, values, cutoff),
        None => ProbeSet::indicators(model.len()),
    };
    Ok(theta_kappa(model, norm, &probes, horizon.max(cutoff).max(2), p)?)
}

fn worst_probe_violation(model: &FiniteMarkovModel, cert: &ErgodicityCertificate) -> CliResult<f64> {
    let mut worst = f64::NEG_INFINITY;
    for probe in &cert.probes {
        worst = worst.max(cert.worst_violation(model, probe)?);
    }
    Ok(worst)
}

fn spectral(t: &SpectralTask) -> CliResult<Parts> {
    let system = build(&t.system)?;
    let model = require_model(&system, "spectral")?;
    let phi = match &t.observable {
        Some(obs) => {
            let centered = ergomoment::center(obs, ergomoment::MeanSource::Finite(model))?;
            Some(centered.tabulate(model)?)
        }
        None => None,
    };
    let cert = certificate_for(model, phi.as_deref(), t.norm, t.horizon, t.cutoff, t.p)?;
    let worst = worst_probe_violation(model, &cert)?;
    let nu = model.require_stationary()?;
    let power = power_iteration_radius(model.transition(), nu, 10_000, 1e-13, 0);
    let mut checks = vec![Check::new(
        "probe_decay_holds",
        worst <= 0.0,
        format!("worst violation {worst:e} over {} probes, n <= {}", cert.probes.len(), cert.horizon),
    )];
    if let Some(expected) = t.expect_theta {
        let err = (cert.theta - expected).abs();
        checks.push(Check::new(
            "theta",
            err <= t.tolerance,
            format!("theta {} vs expected {expected}: |diff| {err:e} <= {:e}", cert.theta, t.tolerance),
        ));
    }
    let mut table = Table::new(&["theta", "kappa", "spectral_radius", "p", "C", "M", "horizon", "probes"]);
    table.push(vec![
        json!(cert.theta),
        json!(cert.kappa),
        json!(cert.spectral_radius),
        json!(cert.p),
        json!(cert.c),
        json!(cert.m),
        json!(cert.horizon),
        json!(cert.probes.len()),
    ]);
    let result = json!({
        "certificate": to_value(&cert),
        "power_iteration_radius": power,
        "worst_probe_violation": worst,
    });
    Ok((result, checks, Some(table)))
}

fn theta_agreement(t: &ThetaAgreementTask) -> CliResult<Parts> {
    if t.systems.len() < 2 {
        return Err(CliError::input("E_SCHEMA", "theta_agreement needs at least two systems"));
    }
    let mut table = Table::new(&["system", "states", "theta", "spectral_radius", "kappa"]);
    let mut thetas = Vec::new();
    let mut certs = Vec::new();
    for (idx, cfg) in t.systems.iter().enumerate() {
        let system = build(cfg)?;
        let model = require_model(&system, "theta_agreement")?;
        let cert = certificate_for(model, None, t.norm, t.horizon, 0, t.p)?;
        table.push(vec![
            json!(idx),
            json!(model.len()),
            json!(cert.theta),
            json!(cert.spectral_radius),
            json!(cert.kappa),
        ]);
        thetas.push(cert.theta);
        certs.push(json!({
            "theta": cert.theta,
            "spectral_radius": cert.spectral_radius,
            "kappa": cert.kappa,
            "states": model.len(),
        }));
    }
    let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    let checks = vec![Check::new(
        "theta_agreement",
        spread <= t.tolerance,
        format!("spread {spread:e} <= {:e}", t.tolerance),
    )];
    Ok((json!({"systems": certs, "spread": spread}), checks, Some(table)))
}

fn polynomial(coeffs: &[f64], n: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * n + c)
}

fn oracle_s4(t: &OracleS4Task) -> CliResult<Parts> {
    let prepared = prepare_finite(&t.system, &t.observable, "oracle_s4")?;
    let model = require_model(&prepared.system, "oracle_s4")?;
    let oracle = MomentOracle::new(model, &prepared.phi)?.with_execution(EXECUTION);
    let mut table = Table::new(&["n", "exact_S4"]);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &n in &t.n {
        let value = oracle.fourth_moment(n)?;
        let mut row = json!({"n": n, "exact_s4": value});
        if let Some(c) = &t.expect_polynomial {
            let reference = polynomial(c, n as f64);
            let err = rel_err(value, reference);
            worst = worst.max(err);
            row["expected"] = json!(reference);
            row["rel_err"] = json!(err);
        }
        table.push(vec![json!(n), json!(value)]);
        rows.push(row);
    }
    let mut checks = Vec::new();
    if t.expect_polynomial.is_some() {
        checks.push(Check::new(
            "polynomial",
            worst <= t.rel_tol,
            format!("max relative error {worst:e} <= {:e} over {} horizons", t.rel_tol, t.n.len()),
        ));
    }
    let result = json!({
        "observable": to_value(&prepared.phi),
        "centering": prepared.centering,
        "values": rows,
    });
    Ok((result, checks, Some(table)))
}

fn oracle_consistency(t: &ConsistencyTask) -> CliResult<Parts> {
    let mut table = Table::new(&["case", "n", "gap_expansion", "enumeration", "rel_err"]);
    let mut worst: f64 = 0.0;
    for (idx, case) in t.cases.iter().enumerate() {
        let prepared = prepare_finite(&case.system, &case.observable, "oracle_consistency")?;
        let model = require_model(&prepared.system, "oracle_consistency")?;
        if model.len() > 4 {
            return Err(CliError::input(
                "E_PARAMETER",
                format!("case {idx}: enumeration is limited to 4 states, got {}", model.len()),
            ));
        }
        let values = prepared.phi.tabulate(model)?;
        let oracle = MomentOracle::from_values(model, values.clone())?.with_execution(EXECUTION);
        for n in 1..=t.max_n {
            let gap = oracle.fourth_moment(n)?;
            let paths = enumerate_paths_s4(model, &values, n)?;
            let err = rel_err(gap, paths);
            worst = worst.max(err);
            table.push(vec![json!(idx), json!(n), json!(gap), json!(paths), json!(err)]);
        }
    }
    let checks = vec![Check::new(
        "gap_vs_enumeration",
        worst <= t.rel_tol,
        format!(
            "max relative error {worst:e} <= {:e} over {} cases, n <= {}",
            t.rel_tol,
            t.cases.len(),
            t.max_n
        ),
    )];
    Ok((json!({"max_rel_err": worst, "cases": t.cases.len(), "max_n": t.max_n}), checks, Some(table)))
}

fn mc_s4(t: &McS4Task, seed: u64) -> CliResult<Parts> {
    let prepared = prepare(&t.system, &t.observable)?;
    let est = estimate_s4(&prepared.system.sampler, &prepared.phi, t.n, t.reps, seed, EXECUTION)?;
    let exact = match &prepared.system.model {
        Some(model) => Some(MomentOracle::new(model, &prepared.phi)?.fourth_moment(t.n)?),
        None => None,
    };
    let mut checks = vec![Check::new(
        "powered",
        !est.underpowered,
        format!("stderr {} vs mean {}", est.stderr, est.mean),
    )];
    if let Some(expected) = t.expect {
        checks.push(Check::new(
            "covers_expected",
            est.covers(expected, t.z),
            format!("|{} - {expected}| <= {} x {}", est.mean, t.z, est.stderr),
        ));
    }
    let mut table = Table::new(&["n", "reps", "seed", "mean", "stderr", "exact"]);
    table.push(vec![
        json!(t.n),
        json!(t.reps),
        json!(seed),
        json!(est.mean),
        json!(est.stderr),
        json!(exact),
    ]);
    let result = json!({
        "estimate": to_value(&est),
        "exact": exact,
        "observable": to_value(&prepared.phi),
        "centering": prepared.centering,
        "profile": to_value(&prepared.profile),
        "sampler": to_value(prepared.system.sampler.diagnostics()),
    });
    Ok((result, checks, Some(table)))
}

fn bound_table(summary: &ergomoment::verify::BoundSummary) -> Table {
    let mut table = Table::new(&["n", "lhs", "term1", "term2", "term3", "empirical_K"]);
    for r in &summary.reports {
        table.push(vec![
            json!(r.n),
            json!(r.lhs_used),
            json!(r.term1),
            json!(r.term2),
            json!(r.term3),
            json!(r.empirical_k),
        ]);
    }
    table
}

fn bound(t: &BoundTask, seed: u64) -> CliResult<Parts> {
    let prepared = match t.mode {
        BoundModeKind::Exact => prepare_finite(&t.system, &t.observable, "exact bound")?,
        BoundModeKind::Mc => prepare(&t.system, &t.observable)?,
    };
    let summary = match t.mode {
        BoundModeKind::Exact => {
            let model = require_model(&prepared.system, "exact bound")?;
            let oracle = MomentOracle::new(model, &prepared.phi)?.with_execution(EXECUTION);
            verify_bound(BoundMode::Exact(&oracle), &prepared.profile, &t.n)?
        }
        BoundModeKind::Mc => {
            let reps = t
                .reps
                .ok_or_else(|| CliError::input("E_SCHEMA", "bound: mode mc needs `reps`"))?;
            verify_bound(
                BoundMode::MonteCarlo {
                    sampler: &prepared.system.sampler,
                    phi: &prepared.phi,
                    reps,
                    seed,
                    execution: EXECUTION,
                },
                &prepared.profile,
                &t.n,
            )?
        }
    };
    let finite = summary.reports.iter().all(|r| r.empirical_k.is_finite());
    let mut checks = vec![Check::new(
        "finite_k",
        finite,
        format!("max empirical_K {}", summary.max_empirical_k),
    )];
    if t.mode == BoundModeKind::Mc {
        checks.push(Check::new(
            "powered",
            !summary.any_underpowered,
            "no horizon flagged underpowered",
        ));
    }
    let mut stabilization = Value::Null;
    if let Some(s) = &t.stabilization {
        let (a, b) = (summary.max_k_from(s.from), summary.max_k_from(s.tail_from));
        let (passed, detail) = match (a, b) {
            (Some(a), Some(b)) => (
                (a - b).abs() <= s.rel_tol * a,
                format!("max K over n >= {}: {b}; over n >= {}: {a}; tolerance {}", s.tail_from, s.from, s.rel_tol),
            ),
            _ => (false, "no horizons in range".to_string()),
        };
        stabilization = json!({"max_from": a, "max_tail": b, "from": s.from, "tail_from": s.tail_from});
        checks.push(Check::new("k_stabilizes", passed, detail));
    }
    let table = bound_table(&summary);
    let result = json!({
        "summary": to_value(&summary),
        "observable": to_value(&prepared.phi),
        "centering": prepared.centering,
        "stabilization": stabilization,
    });
    Ok((result, checks, Some(table)))
}

fn hat_sweep(t: &HatSweepTask, seed: u64) -> CliResult<Parts> {
    if t.eps.len() < 2 {
        return Err(CliError::input("E_SCHEMA", "hat_sweep needs at least two eps values"));
    }
    let mut table = Table::new(&["eps", "banach", "n", "lhs", "lhs_stderr", "empirical_K", "exact_K"]);
    let mut sweep = Vec::new();
    let mut ks = Vec::new();
    let mut norms = Vec::new();
    let mut underpowered = false;
    for &eps in &t.eps {
        let hat = Observable::hat(t.s, t.t, eps)?;
        let prepared = prepare(&t.system, &hat)?;
        let summary = verify_bound(
            BoundMode::MonteCarlo {
                sampler: &prepared.system.sampler,
                phi: &prepared.phi,
                reps: t.reps,
                seed,
                execution: EXECUTION,
            },
            &prepared.profile,
            &t.n,
        )?;
        let exact = match &prepared.system.model {
            Some(model) => {
                let oracle = MomentOracle::new(model, &prepared.phi)?.with_execution(EXECUTION);
                Some(verify_bound(BoundMode::Exact(&oracle), &prepared.profile, &t.n)?)
            }
            None => None,
        };
        for (idx, r) in summary.reports.iter().enumerate() {
            let exact_k = exact.as_ref().map(|e| e.reports[idx].empirical_k);
            table.push(vec![
                json!(eps),
                json!(prepared.profile.banach),
                json!(r.n),
                json!(r.lhs_used),
                json!(r.lhs_stderr),
                json!(r.empirical_k),
                json!(exact_k),
            ]);
        }
        underpowered |= summary.any_underpowered;
        ks.push(summary.max_empirical_k);
        norms.push(prepared.profile.banach);
        sweep.push(json!({
            "eps": eps,
            "banach": prepared.profile.banach,
            "max_empirical_k": summary.max_empirical_k,
            "mc": to_value(&summary),
            "exact_max_k": exact.as_ref().map(|e| e.max_empirical_k),
        }));
    }
    let span = |v: &[f64]| {
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    };
    let (k_span, norm_span) = (span(&ks), span(&norms));
    let mut checks = vec![
        Check::new(
            "k_span",
            k_span < t.max_k_span,
            format!("max K / min K = {k_span} < {}", t.max_k_span),
        ),
        Check::new("powered", !underpowered, "no horizon flagged underpowered"),
    ];
    if let Some(min) = t.min_norm_span {
        checks.push(Check::new(
            "norm_span",
            norm_span >= min,
            format!("max norm / min norm = {norm_span} >= {min}"),
        ));
    }
    let peak = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(min) = t.min_peak_norm {
        checks.push(Check::new("peak_norm", peak >= min, format!("max norm {peak} >= {min}")));
    }
    let result = json!({"sweep": sweep, "k_span": k_span, "norm_span": norm_span, "peak_norm": peak});
    Ok((result, checks, Some(table)))
}

fn ledger_table(report: &LedgerReport) -> Table {
    let mut table = Table::new(&["case", "i", "j", "k", "inequality", "term", "lhs", "bound", "slack"]);
    for e in &report.entries {
        table.push(vec![
            to_value(&e.case),
            json!(e.i),
            json!(e.j),
            json!(e.k),
            json!(e.inequality),
            json!(e.term),
            json!(e.lhs),
            json!(e.bound),
            json!(e.slack),
        ]);
    }
    table
}

fn ledger(t: &LedgerTask) -> CliResult<Parts> {
    let prepared = prepare_finite(&t.system, &t.observable, "ledger")?;
    let model = require_model(&prepared.system, "ledger")?;
    let values = prepared.phi.tabulate(model)?;
    let horizon = t.horizon.unwrap_or(t.cutoff);
    let cert = certificate_for(model, Some(&values), t.norm, horizon, t.cutoff, t.p)?;
    let oracle = MomentOracle::from_values(model, values)?.with_execution(EXECUTION);
    let report = proof_ledger(&oracle, &cert, t.cutoff)?;
    let checks = vec![
        Check::new(
            "slack",
            report.violations == 0,
            format!(
                "{} entries, {} below {:e}, min slack {:e}",
                report.entries.len(),
                report.violations,
                ergomoment::verify::SLACK_TOL,
                report.min_slack
            ),
        ),
        Check::new(
            "n0",
            report.n0_holds && report.n0_minimal,
            format!("n0 = {}: holds {}, minimal {}", report.n0, report.n0_holds, report.n0_minimal),
        ),
    ];
    let table = ledger_table(&report);
    let result = json!({
        "ledger": to_value(&report),
        "observable": to_value(&prepared.phi),
        "centering": prepared.centering,
    });
    Ok((result, checks, Some(table)))
}

fn clt(t: &CltTask, seed: u64) -> CliResult<Parts> {
    let prepared = prepare(&t.system, &t.observable)?;
    let green_kubo = match &prepared.system.model {
        Some(model) => {
            let values = prepared.phi.tabulate(model)?;
            let cert = certificate_for(model, Some(&values), NormKind::Sup, 64, 8, t.p)?;
            let oracle = MomentOracle::from_values(model, values)?;
            Some(oracle.green_kubo(&cert, prepared.phi.q, 1e-12)?)
        }
        None => None,
    };
    let sigma2 = match (t.sigma2, &green_kubo) {
        (Some(s), _) => s,
        (None, Some(gk)) => gk.sigma2,
        (None, None) => {
            return Err(CliError::input(
                "E_SCHEMA",
                "clt: `sigma2` is required for systems without an exact model",
            ))
        }
    };
    let d = clt_check(&prepared.system.sampler, &prepared.phi, sigma2, t.p, t.n, t.reps, seed, EXECUTION)?;
    let th = &t.thresholds;
    let mut checks = vec![
        Check::new("mean", d.mean.abs() < th.mean, format!("|{}| < {}", d.mean, th.mean)),
        Check::new(
            "variance",
            (d.variance - 1.0).abs() < th.variance,
            format!("|{} - 1| < {}", d.variance, th.variance),
        ),
        Check::new(
            "kurtosis",
            (d.kurtosis - 3.0).abs() < th.kurtosis,
            format!("|{} - 3| < {}", d.kurtosis, th.kurtosis),
        ),
        Check::new("ks", d.ks_distance < th.ks, format!("{} < {}", d.ks_distance, th.ks)),
    ];
    if let (Some(declared), Some(gk)) = (t.sigma2, &green_kubo) {
        let err = (declared - gk.sigma2).abs();
        checks.push(Check::new(
            "sigma2_matches_green_kubo",
            err <= 1e-9 * declared.abs().max(1.0) + gk.truncation_error,
            format!("declared {declared}, series {} (tail <= {:e})", gk.sigma2, gk.truncation_error),
        ));
    }
    let mut table = Table::new(&["n", "reps", "mean", "variance", "skewness", "kurtosis", "ks_distance"]);
    table.push(vec![
        json!(d.n),
        json!(d.reps),
        json!(d.mean),
        json!(d.variance),
        json!(d.skewness),
        json!(d.kurtosis),
        json!(d.ks_distance),
    ]);
    let result = json!({
        "diagnostics": to_value(&d),
        "green_kubo": green_kubo.as_ref().map(to_value),
        "observable": to_value(&prepared.phi),
        "centering": prepared.centering,
    });
    Ok((result, checks, Some(table)))
}

fn tightness(t: &TightnessTask, seed: u64) -> CliResult<Parts> {
    let system = build(&t.system)?;
    let grid: Vec<(f64, f64)> = t.intervals.iter().map(|[s, u]| (*s, *u)).collect();
    let report = empirical_tightness(&system.sampler, &grid, t.reference_c, t.n, t.reps, seed, EXECUTION)?;
    let mut checks = vec![Check::new(
        "margin",
        report.holds_with_margin,
        format!(
            "every row at least 3 SE below {} (n delta + n^2 delta^2); smallest margin {} SE",
            t.reference_c,
            report.rows.iter().map(|r| r.margin_se).fold(f64::INFINITY, f64::min)
        ),
    )];
    let mut table = Table::new(&["s", "t", "delta", "estimate", "stderr", "reference", "scale", "ratio", "margin_se"]);
    let mut references = Vec::new();
    for row in &report.rows {
        let reference = t.reference.map(|_| binomial_fourth_central(t.n, row.delta));
        if let Some(r) = reference {
            checks.push(Check::new(
                format!("binomial_delta_{}", row.delta),
                row.estimate.covers(r, 3.0),
                format!("|{} - {r}| <= 3 x {}", row.estimate.mean, row.estimate.stderr),
            ));
        }
        references.push(reference);
        table.push(vec![
            json!(row.s),
            json!(row.t),
            json!(row.delta),
            json!(row.estimate.mean),
            json!(row.estimate.stderr),
            json!(reference),
            json!(row.scale),
            json!(row.ratio),
            json!(row.margin_se),
        ]);
    }
    let result = json!({
        "report": to_value(&report),
        "reference_values": references,
        "sampler": to_value(system.sampler.diagnostics()),
    });
    Ok((result, checks, Some(table)))
}
