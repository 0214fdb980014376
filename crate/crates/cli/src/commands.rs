use std::path::Path;

use capnet::bounds::{bound_frobenius_sqrtd, bound_l1inf_sqrtd, build_report, BoundReport, ReportOptions};
use capnet::compress::{rank1_replace_with, verify_certificate};
use capnet::lowerbound::{demonstrate_lower_bound, CHAIN_RATIO_WINDOW};
use capnet::matlin::{matrix_norm, NormKind};
use capnet::network::{Dataset, Network};
use capnet::rademacher::{mc_rademacher, AscentConfig, ClassSpec, DEFAULT_STEP_SCALE};
use serde::Serialize;
use serde_json::json;

use crate::args::{BallNorm, CompressArgs, Format, LowerboundArgs, RademacherArgs, ReportArgs};
use crate::error::{CliError, CliResult};
use crate::render::{csv, json, num, table};
use crate::Output;

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn value_cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "inapplicable".into())
}

pub fn report(a: &ReportArgs) -> CliResult<Output> {
    let net = Network::load(&a.network)?;
    let data = Dataset::load(&a.data)?;
    let opts = ReportOptions {
        p: a.p,
        gamma: a.gamma,
        radius: a.override_b,
        spectral_floor: a.override_gamma,
        schatten_budget: a.override_m,
        floor_cap: a.gamma_cap,
    };
    let rep = build_report(&net, &data, &opts)?;
    Ok(Output::ok(render_report(&rep, a)?))
}

fn render_report(rep: &BoundReport, a: &ReportArgs) -> CliResult<String> {
    let headers = ["name", "value", "exact_constants", "citation"];
    let rows: Vec<Vec<String>> = rep
        .entries
        .iter()
        .map(|e| {
            vec![
                e.name.clone(),
                value_cell(e.value),
                e.exact_constants.to_string(),
                e.citation.clone(),
            ]
        })
        .collect();
    match a.format {
        Format::Csv => csv(&headers, &rows),
        Format::Table => {
            let c = &rep.context;
            let mut pre = vec![
                "capnet report".to_string(),
                format!("network={} data={}", a.network.display(), a.data.display()),
                format!("p={} gamma={} seed={}", num(a.p), num(a.gamma), a.seed),
                format!(
                    "m={} B={} n={} h={} d={} Gamma={} M={}",
                    c.m,
                    num(c.b),
                    c.n,
                    c.h,
                    c.d,
                    num(c.spectral_floor),
                    num(c.schatten_budget)
                ),
            ];
            pre.extend(rep.warnings.iter().map(|w| format!("warning: {w}")));
            Ok(table(&pre, &headers, &rows))
        }
        Format::Json => {
            let entries: Vec<_> = rep
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "name": e.name,
                        "value": e.value.map(|v| json!(v)).unwrap_or(json!("inapplicable")),
                        "exact_constants": e.exact_constants,
                        "citation": e.citation,
                        "inputs_digest": e.inputs_digest,
                    })
                })
                .collect();
            Ok(json(&json!({
                "config": {
                    "network": a.network.display().to_string(),
                    "data": a.data.display().to_string(),
                    "p": num(a.p),
                    "gamma": a.gamma,
                    "seed": a.seed,
                },
                "context": rep.context,
                "entries": entries,
                "warnings": rep.warnings,
            })))
        }
    }
}

/// Numbers and booleans keep their JSON type; anything else stays a string.
fn typed(v: &str) -> serde_json::Value {
    match serde_json::from_str::<serde_json::Value>(v) {
        Ok(x @ (serde_json::Value::Number(_) | serde_json::Value::Bool(_))) => x,
        _ => json!(v),
    }
}

fn key_values(format: Format, title: &str, pairs: &[(&str, String)]) -> CliResult<String> {
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    match format {
        Format::Table => Ok(table(&[title.to_string()], &["key", "value"], &rows)),
        Format::Csv => csv(&["key", "value"], &rows),
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> = pairs
                .iter()
                .map(|(k, v)| (k.to_string(), typed(v)))
                .collect();
            Ok(json(&map))
        }
    }
}

pub fn compress(a: &CompressArgs) -> CliResult<Output> {
    let net = Network::load(&a.network)?;
    let radius = match (a.override_b, &a.data) {
        (Some(b), _) => b,
        (None, Some(path)) => Dataset::load(path)?.radius(),
        (None, None) => 1.0,
    };
    let (small, cert) = rank1_replace_with(&net, a.p, a.r, radius, a.override_gamma, a.override_m)?;
    let check = verify_certificate(&net, &small, &cert, radius, a.samples, a.seed)?;
    write_file(&a.out, &small.to_json())?;
    let cert_path = format!("{}.cert.json", a.out.display());
    write_file(Path::new(&cert_path), &cert.to_json())?;
    let text = key_values(
        a.format,
        "capnet compress",
        &[
            ("network", a.network.display().to_string()),
            ("out", a.out.display().to_string()),
            ("certificate", cert_path.clone()),
            ("p", num(cert.p)),
            ("r_requested", cert.r_requested.to_string()),
            ("r_prime", cert.r_prime.to_string()),
            ("B", num(cert.radius)),
            ("Gamma", num(cert.gamma_product)),
            ("M", num(cert.schatten_product)),
            ("spectral_product", num(cert.spectral_product)),
            ("lemma_bound", num(cert.lemma_bound)),
            ("theorem_bound", num(cert.theorem_bound)),
            ("degenerate_zero", cert.degenerate_zero.to_string()),
            ("checked_points", check.points.to_string()),
            ("max_observed", num(check.max_observed)),
            ("within_lemma", check.within_lemma.to_string()),
            ("within_theorem", check.within_theorem.to_string()),
            ("seed", a.seed.to_string()),
        ],
    )?;
    let failure = (!check.passed()).then(|| {
        format!(
            "observed deviation {} exceeds the certificate (lemma {}, theorem {})",
            check.max_observed, cert.lemma_bound, cert.theorem_bound
        )
    });
    Ok(Output { text, failure })
}

pub fn rademacher(a: &RademacherArgs) -> CliResult<Output> {
    let net = Network::load(&a.network)?;
    let data = Dataset::load(&a.data)?;
    let kind = match a.norm {
        BallNorm::Schatten => NormKind::schatten(a.p)?,
        BallNorm::RowsL1Max => NormKind::RowsL1Max,
        BallNorm::RowsL2Sum => NormKind::RowsL2Sum,
    };
    let radii = net
        .layers()
        .iter()
        .map(|l| matrix_norm(&l.weight, kind))
        .collect::<capnet::Result<Vec<_>>>()?;
    let homogeneous = net.is_elementwise_homogeneous();
    let spec = ClassSpec::uniform(net, kind, &radii)?.with_output_scale(1.0 / a.gamma)?;
    let cfg = AscentConfig {
        restarts: a.restarts,
        steps: a.steps,
        step_scale: DEFAULT_STEP_SCALE,
    };
    let est = mc_rademacher(&spec, &data, a.samples, &cfg, a.seed)?;
    let reference = match kind {
        NormKind::Frobenius | NormKind::Schatten(2.0) if homogeneous => {
            Some(bound_frobenius_sqrtd(&radii, &data)?.value / a.gamma)
        }
        NormKind::RowsL1Max => Some(bound_l1inf_sqrtd(&radii, &data)?.value / a.gamma),
        _ => None,
    };
    let radii_text = radii.iter().map(|r| num(*r)).collect::<Vec<_>>().join(";");
    let text = key_values(
        a.format,
        "capnet rademacher",
        &[
            ("network", a.network.display().to_string()),
            ("data", a.data.display().to_string()),
            ("ball", kind.label()),
            ("radii", radii_text),
            ("gamma", num(a.gamma)),
            ("m", data.len().to_string()),
            ("value", num(est.value)),
            ("std_error", num(est.std_error)),
            ("method", "monte-carlo".into()),
            ("epsilon_samples", est.epsilon_samples.to_string()),
            ("sup_restarts", est.sup_restarts.to_string()),
            ("sup_steps", est.sup_steps.to_string()),
            ("seed", est.seed.to_string()),
            ("reference_bound", value_cell(reference)),
        ],
    )?;
    Ok(Output::ok(text))
}

#[derive(Serialize)]
struct LowerRowOut {
    h: usize,
    m: usize,
    p: String,
    diag_value: f64,
    diag_witness: f64,
    chain_value: f64,
    bound: f64,
    ratio: f64,
    chain_ratio: f64,
    method: capnet::rademacher::EstimateMethod,
    within_window: bool,
}

pub fn lowerbound(a: &LowerboundArgs) -> CliResult<Output> {
    if a.h.is_empty() || a.m.is_empty() || a.p.is_empty() {
        return Err(CliError::Usage("--h, --m and --p need at least one value".into()));
    }
    let rows = demonstrate_lower_bound(&a.h, &a.m, &a.p, a.samples, a.seed)?;
    let mut failures = Vec::new();
    let out: Vec<LowerRowOut> = rows
        .iter()
        .map(|r| {
            let chain_ok = r.p != 2.0
                || (CHAIN_RATIO_WINDOW.0..=CHAIN_RATIO_WINDOW.1).contains(&r.chain_ratio);
            let ok = r.within_window() && chain_ok;
            if !ok {
                failures.push(format!("h={} m={} p={}", r.h, r.m, num(r.p)));
            }
            LowerRowOut {
                h: r.h,
                m: r.m,
                p: num(r.p),
                diag_value: r.diag_value,
                diag_witness: r.diag_witness,
                chain_value: r.chain_value,
                bound: r.bound,
                ratio: r.ratio,
                chain_ratio: r.chain_ratio,
                method: r.method,
                within_window: ok,
            }
        })
        .collect();
    let headers = [
        "h", "m", "p", "diag_value", "diag_witness", "chain_value", "bound", "ratio", "chain_ratio",
        "method", "within_window",
    ];
    let cells: Vec<Vec<String>> = out
        .iter()
        .map(|r| {
            vec![
                r.h.to_string(),
                r.m.to_string(),
                r.p.clone(),
                num(r.diag_value),
                num(r.diag_witness),
                num(r.chain_value),
                num(r.bound),
                num(r.ratio),
                num(r.chain_ratio),
                match r.method {
                    capnet::rademacher::EstimateMethod::ExactEnumeration => "exact-enumeration".into(),
                    capnet::rademacher::EstimateMethod::MonteCarlo => "monte-carlo".into(),
                },
                r.within_window.to_string(),
            ]
        })
        .collect();
    let text = match a.format {
        Format::Table => table(
            &[
                "capnet lowerbound".into(),
                format!("B=1 gamma=1 budgets=[1,1] seed={}", a.seed),
            ],
            &headers,
            &cells,
        ),
        Format::Csv => csv(&headers, &cells)?,
        Format::Json => json(&out),
    };
    let failure = (!failures.is_empty())
        .then(|| format!("ratios outside their windows: {}", failures.join(", ")));
    Ok(Output { text, failure })
}
