use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use fujita_core::diagnostics::{
    ball_constant, blowup_threshold, estimate_decay_constant, extinction_certificate, fourier_l1, kaplan_report,
    ExtinctionCertificate, KaplanReport,
};
use fujita_core::grid::{write_csv, write_snapshot};
use fujita_core::kernels::{estimate_expansion, fujita_exponent, KernelConfig};
use fujita_core::solver::{run, write_diagnostics_csv, RunResult};
use fujita_core::{DiscreteKernel, FourierExpansion, KernelSpec, SimOutcome};
use serde::{Deserialize, Serialize};

use crate::config::{build_grid, build_kernel, config_hash, ConfigError, ExperimentConfig, FitConfig, KernelOnlyConfig};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub rows: usize,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub t_last: f64,
    pub final_linf: f64,
    pub final_l1: f64,
    pub max_linf: f64,
    pub dt_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kernel: KernelConfig,
    pub kernel_label: String,
    pub p: f64,
    pub predicted_p_f: f64,
    pub expansion: FourierExpansion,
    pub outcome: SimOutcome,
    pub summary: DiagnosticsSummary,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kernel: String,
    pub dim: usize,
    pub beta: f64,
    pub a: f64,
    pub fitted_beta: f64,
    pub fit_residual: f64,
    pub clamped: bool,
    pub low_confidence: bool,
    pub second_moment_finite: bool,
    pub predicted_p_f: f64,
    pub window: (f64, f64),
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn expansion_of(kernel: &KernelSpec, fit: &FitConfig) -> Result<FourierExpansion> {
    estimate_expansion(kernel, (fit.xi_min, fit.xi_max))
        .map_err(|e| ConfigError::Invalid(format!("expansion fit failed: {e}")).into())
}

pub fn classify(cfg: &KernelOnlyConfig, base: Option<&Path>) -> Result<Classification> {
    let kernel = build_kernel(&cfg.kernel, base)?;
    let e = expansion_of(&kernel, &cfg.fit)?;
    Ok(Classification {
        kernel: kernel.label(),
        dim: kernel.dim(),
        beta: e.beta,
        a: e.a,
        fitted_beta: e.fitted_beta,
        fit_residual: e.residual,
        clamped: e.clamped,
        low_confidence: e.low_confidence,
        second_moment_finite: e.second_moment.is_finite(),
        predicted_p_f: fujita_exponent(&e, kernel.dim()),
        window: e.window,
    })
}

pub fn cmd_classify(cfg: &KernelOnlyConfig, base: Option<&Path>, out_dir: &Path) -> Result<Classification> {
    let c = classify(cfg, base)?;
    println!(
        "{}: beta = {:.4}, A = {:.6}, residual = {:.2e}, m2 {}, p_F = {:.4}{}",
        c.kernel,
        c.beta,
        c.a,
        c.fit_residual,
        if c.second_moment_finite { "finite" } else { "infinite" },
        c.predicted_p_f,
        if c.low_confidence { " (low confidence)" } else { "" }
    );
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("classification.json"), &c)?;
    Ok(c)
}

/// Runs one configured simulation without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<(RunRecord, RunResult)> {
    let started = now();
    let kernel = build_kernel(&cfg.kernel, base)?;
    let grid = build_grid(&cfg.grid, kernel.dim())?;
    let reaction = cfg.reaction.build()?;
    let u0 = cfg.initial.sample(&grid)?;
    let expansion = expansion_of(&kernel, &cfg.fit)?;
    let dk = DiscreteKernel::new(kernel.clone(), grid).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let result = run(&u0, &dk, &reaction, &cfg.solver).context("solver failed")?;
    let t_last = result.diagnostics.last().map_or(0.0, |r| r.t);
    let norms = result.final_field.norms();
    let record = RunRecord {
        config_hash: config_hash(cfg),
        kernel: cfg.kernel.clone(),
        kernel_label: kernel.label(),
        p: cfg.reaction.p,
        predicted_p_f: fujita_exponent(&expansion, kernel.dim()),
        expansion,
        outcome: result.outcome.clone(),
        summary: DiagnosticsSummary {
            rows: result.diagnostics.len(),
            accepted_steps: result.accepted_steps,
            rejected_steps: result.rejected_steps,
            t_last,
            final_linf: norms.linf,
            final_l1: norms.l1,
            max_linf: result.diagnostics.iter().map(|r| r.linf).fold(0.0, f64::max),
            dt_min: result.dt_min,
        },
        started_unix: started,
        finished_unix: now(),
        code_version: CODE_VERSION.to_string(),
    };
    Ok((record, result))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, base: Option<&Path>, out_dir: &Path) -> Result<RunRecord> {
    let (record, result) = execute(cfg, base)?;
    std::fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("record.json"), &record)?;
    write_diagnostics_csv(&out_dir.join("diagnostics.csv"), &result.diagnostics)?;
    if cfg.outputs.final_csv {
        write_csv(&out_dir.join("final.csv"), &result.final_field)?;
    }
    if cfg.outputs.snapshots && !result.snapshots.is_empty() {
        let dir = out_dir.join("snapshots");
        std::fs::create_dir_all(&dir)?;
        for (i, (t, field)) in result.snapshots.iter().enumerate() {
            write_snapshot(&dir.join(format!("snap_{i:05}.bin")), field, *t)?;
        }
    }
    println!(
        "{} p = {}: {} after {} steps (t = {:.4}), hash {}",
        record.kernel_label,
        record.p,
        record.outcome.label(),
        record.summary.accepted_steps,
        record.summary.t_last,
        &record.config_hash[..12]
    );
    Ok(record)
}

/// Constants that are estimated from data rather than known in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCertificate {
    pub label: String,
    pub certificate: ExtinctionCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanSidecar {
    pub config_hash: String,
    pub kernel: String,
    pub report: KaplanReport,
    pub extinction: Option<EmpiricalCertificate>,
}

pub fn cmd_kaplan(cfg: &ExperimentConfig, base: Option<&Path>, out_dir: &Path) -> Result<KaplanSidecar> {
    let kernel = build_kernel(&cfg.kernel, base)?;
    let grid = build_grid(&cfg.grid, kernel.dim())?;
    let u0 = cfg.initial.sample(&grid)?;
    let expansion = expansion_of(&kernel, &cfg.fit)?;
    let dk = DiscreteKernel::new(kernel.clone(), grid).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let p = cfg.reaction.p;
    let report = kaplan_report(&dk, &u0, &expansion, p, &cfg.kaplan.times)?;
    let dim = kernel.dim();
    let extinction = if p > expansion.beta / dim as f64 {
        let probes = [u0.clone()];
        let c = estimate_decay_constant(&dk, &probes, &cfg.kaplan.times, expansion.beta)?;
        let size = u0.norms().l1 + fourier_l1(&dk, &u0);
        Some(EmpiricalCertificate {
            label: "EMPIRICAL".into(),
            certificate: extinction_certificate(p, &expansion, dim, size, c)?,
        })
    } else {
        None
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("kaplan.csv"), report.to_csv())?;
    let sidecar = KaplanSidecar {
        config_hash: config_hash(cfg),
        kernel: kernel.label(),
        report,
        extinction,
    };
    write_json(&out_dir.join("kaplan.json"), &sidecar)?;
    println!("kaplan report for {} at {} times written", sidecar.kernel, sidecar.report.times.len());
    Ok(sidecar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub radius: f64,
    pub p: f64,
    pub ball_mass: f64,
    pub c_n: f64,
    pub lambda_min: f64,
}

pub fn cmd_threshold(cfg: &KernelOnlyConfig, base: Option<&Path>, out_dir: &Path) -> Result<Vec<ThresholdRow>> {
    let kernel = build_kernel(&cfg.kernel, base)?;
    let c_n = ball_constant(kernel.dim())?;
    let mut rows = Vec::new();
    let mut csv = String::from("radius,p,ball_mass,c_n,lambda_min\n");
    for &radius in &cfg.threshold.radii {
        let mass = kernel.ball_mass(radius)?;
        for &p in &cfg.threshold.p {
            let lambda_min = blowup_threshold(&kernel, radius, p).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            csv.push_str(&format!("{radius},{p},{mass},{c_n},{lambda_min}\n"));
            rows.push(ThresholdRow {
                radius,
                p,
                ball_mass: mass,
                c_n,
                lambda_min,
            });
        }
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("threshold.csv"), &csv)?;
    print!("{csv}");
    Ok(rows)
}
