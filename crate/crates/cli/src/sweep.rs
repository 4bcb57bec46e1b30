//! Phase-diagram sweeps over `(kernel, p)`.

use std::path::{Path, PathBuf};

use anyhow::Result;
use fujita_core::kernels::fujita_exponent;
use fujita_core::SimOutcome;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands::{execute, expansion_of, write_json, RunRecord};
use crate::config::{build_kernel, config_hash, ConfigError, SweepPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    /// Every tried amplitude blew up.
    SystematicBlowup,
    /// At least one amplitude decayed globally.
    ExtinctionCapable,
    Inconclusive,
    Failed,
}

impl CellClass {
    pub fn label(self) -> &'static str {
        match self {
            CellClass::SystematicBlowup => "systematic_blowup",
            CellClass::ExtinctionCapable => "extinction_capable",
            CellClass::Inconclusive => "inconclusive",
            CellClass::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRun {
    pub amplitude: f64,
    pub config_hash: String,
    /// Outcome label, or `failed: <reason>`.
    pub outcome: String,
    pub t_last: Option<f64>,
    pub resumed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub kernel_index: usize,
    pub p_index: usize,
    pub kernel: String,
    pub p: f64,
    pub class: CellClass,
    pub runs: Vec<AmplitudeRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub kernel: String,
    pub predicted_p_f: f64,
    /// Largest p below `upper` whose cell is systematic blow-up.
    pub lower: Option<f64>,
    /// Smallest extinction-capable p.
    pub upper: Option<f64>,
    pub contains_prediction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: Vec<Cell>,
    pub brackets: Vec<Bracket>,
}

fn classify_cell(outcomes: &[Option<SimOutcome>]) -> CellClass {
    if outcomes.iter().any(|o| matches!(o, Some(SimOutcome::GlobalDecay { .. }))) {
        CellClass::ExtinctionCapable
    } else if outcomes.iter().all(|o| matches!(o, Some(SimOutcome::Blowup { .. }))) {
        CellClass::SystematicBlowup
    } else if outcomes.iter().all(Option::is_none) {
        CellClass::Failed
    } else {
        CellClass::Inconclusive
    }
}

pub fn bracket(kernel: &str, predicted: f64, cells: &[&Cell]) -> Bracket {
    let upper = cells
        .iter()
        .filter(|c| c.class == CellClass::ExtinctionCapable)
        .map(|c| c.p)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.min(p))));
    let lower = cells
        .iter()
        .filter(|c| c.class == CellClass::SystematicBlowup && upper.is_none_or(|u| c.p < u))
        .map(|c| c.p)
        .fold(None, |acc: Option<f64>, p| Some(acc.map_or(p, |a| a.max(p))));
    let contains_prediction = match (lower, upper) {
        (Some(l), Some(u)) => l <= predicted && predicted <= u,
        _ => false,
    };
    Bracket {
        kernel: kernel.to_string(),
        predicted_p_f: predicted,
        lower,
        upper,
        contains_prediction,
    }
}

fn cell_path(dir: &Path, hash: &str) -> PathBuf {
    dir.join(format!("{hash}.json"))
}

fn load_record(path: &Path) -> Option<RunRecord> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Runs every missing `(kernel, p, amplitude)` cell, skipping records
/// already present under `out_dir/cells`, and writes the tables.
pub fn cmd_sweep(plan: &SweepPlan, base: Option<&Path>, out_dir: &Path, jobs: Option<usize>, svg: bool) -> Result<SweepSummary> {
    plan.validate()?;
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;
    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    for k in &plan.kernels {
        let spec = build_kernel(k, base)?;
        let e = expansion_of(&spec, &plan.fit)?;
        labels.push(spec.label());
        predictions.push(fujita_exponent(&e, spec.dim()));
    }
    let mut tasks = Vec::new();
    for ki in 0..plan.kernels.len() {
        for (pi, &p) in plan.p.iter().enumerate() {
            for (ai, &amp) in plan.amplitudes.iter().enumerate() {
                tasks.push((ki, pi, ai, p, amp));
            }
        }
    }
    let threads = jobs.or(plan.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    let runs: Vec<((usize, usize, usize), AmplitudeRun, Option<SimOutcome>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ki, pi, ai, p, amp)| {
                let cfg = plan.cell(ki, p, amp);
                let hash = config_hash(&cfg);
                let path = cell_path(&cells_dir, &hash);
                let (record, resumed) = match load_record(&path) {
                    Some(r) => (Ok(r), true),
                    None => (execute(&cfg, base).map(|(r, _)| r), false),
                };
                let run = match record {
                    Ok(r) => {
                        if !resumed {
                            if let Err(e) = write_json(&path, &r) {
                                eprintln!("warning: could not persist cell {hash}: {e}");
                            }
                        }
                        let t_last = r.summary.t_last;
                        (
                            AmplitudeRun {
                                amplitude: amp,
                                config_hash: hash,
                                outcome: r.outcome.label().to_string(),
                                t_last: Some(t_last),
                                resumed,
                            },
                            Some(r.outcome),
                        )
                    }
                    Err(e) => (
                        AmplitudeRun {
                            amplitude: amp,
                            config_hash: hash,
                            outcome: format!("failed: {e:#}"),
                            t_last: None,
                            resumed: false,
                        },
                        None,
                    ),
                };
                ((ki, pi, ai), run.0, run.1)
            })
            .collect()
    });
    let mut cells = Vec::new();
    for ki in 0..plan.kernels.len() {
        for (pi, &p) in plan.p.iter().enumerate() {
            let mut mine: Vec<_> = runs.iter().filter(|((k, q, _), _, _)| *k == ki && *q == pi).collect();
            mine.sort_by_key(|((_, _, a), _, _)| *a);
            let outcomes: Vec<Option<SimOutcome>> = mine.iter().map(|(_, _, o)| o.clone()).collect();
            cells.push(Cell {
                kernel_index: ki,
                p_index: pi,
                kernel: labels[ki].clone(),
                p,
                class: classify_cell(&outcomes),
                runs: mine.iter().map(|(_, r, _)| r.clone()).collect(),
            });
        }
    }
    let brackets: Vec<Bracket> = (0..plan.kernels.len())
        .map(|ki| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.kernel_index == ki).collect();
            bracket(&labels[ki], predictions[ki], &mine)
        })
        .collect();
    let summary = SweepSummary { cells, brackets };
    write_tables(plan, &summary, out_dir)?;
    if svg {
        std::fs::write(out_dir.join("phase.svg"), render_svg(plan, &summary))?;
    }
    for b in &summary.brackets {
        println!(
            "{}: p_F = {:.3}, bracket [{}, {}]{}",
            b.kernel,
            b.predicted_p_f,
            b.lower.map_or("-".into(), |v| v.to_string()),
            b.upper.map_or("-".into(), |v| v.to_string()),
            if b.contains_prediction { " contains p_F" } else { "" }
        );
    }
    Ok(summary)
}

fn write_tables(plan: &SweepPlan, s: &SweepSummary, out_dir: &Path) -> Result<()> {
    let mut matrix = String::from("kernel");
    for p in &plan.p {
        matrix.push_str(&format!(",p={p}"));
    }
    matrix.push('\n');
    for ki in 0..plan.kernels.len() {
        let row: Vec<&Cell> = s.cells.iter().filter(|c| c.kernel_index == ki).collect();
        matrix.push_str(&format!("\"{}\"", row[0].kernel));
        for c in row {
            matrix.push_str(&format!(",{}", c.class.label()));
        }
        matrix.push('\n');
    }
    std::fs::write(out_dir.join("phase_matrix.csv"), matrix)?;

    // Long format: x = p, y = amplitude, series = kernel, plus the outcome.
    let mut long = String::from("x,y,series,outcome,class\n");
    for c in &s.cells {
        for r in &c.runs {
            long.push_str(&format!(
                "{},{},\"{}\",{},{}\n",
                c.p,
                r.amplitude,
                c.kernel,
                r.outcome.split(':').next().unwrap_or(""),
                c.class.label()
            ));
        }
    }
    std::fs::write(out_dir.join("phase_long.csv"), long)?;

    let mut brackets = String::from("kernel,predicted_p_f,lower,upper,contains_prediction\n");
    for b in &s.brackets {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        brackets.push_str(&format!(
            "\"{}\",{},{},{},{}\n",
            b.kernel,
            b.predicted_p_f,
            opt(b.lower),
            opt(b.upper),
            b.contains_prediction
        ));
    }
    std::fs::write(out_dir.join("brackets.csv"), brackets)?;
    write_json(&out_dir.join("sweep.json"), s)
}

fn colour(class: CellClass) -> &'static str {
    match class {
        CellClass::SystematicBlowup => "#c0392b",
        CellClass::ExtinctionCapable => "#2e86c1",
        CellClass::Inconclusive => "#aab7b8",
        CellClass::Failed => "#000000",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One row per kernel, one column per p; a tick marks the predicted p_F.
pub fn render_svg(plan: &SweepPlan, s: &SweepSummary) -> String {
    let (cw, ch, left, top) = (60.0, 30.0, 260.0, 30.0);
    let width = left + cw * plan.p.len() as f64 + 20.0;
    let height = top + ch * plan.kernels.len() as f64 + 40.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    for (pi, p) in plan.p.iter().enumerate() {
        let x = left + cw * (pi as f64 + 0.5);
        out.push_str(&format!("<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">p={p}</text>\n", top - 10.0));
    }
    for c in &s.cells {
        let x = left + cw * c.p_index as f64;
        let y = top + ch * c.kernel_index as f64;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"white\"><title>{}</title></rect>\n",
            cw,
            ch,
            colour(c.class),
            c.class.label()
        ));
    }
    for (ki, b) in s.brackets.iter().enumerate() {
        let y = top + ch * ki as f64;
        out.push_str(&format!(
            "<text x=\"5\" y=\"{}\">{}</text>\n",
            y + ch * 0.65,
            escape(&b.kernel)
        ));
        // Place the p_F tick by linear interpolation between column centres.
        let centres: Vec<f64> = (0..plan.p.len()).map(|i| left + cw * (i as f64 + 0.5)).collect();
        let pf = b.predicted_p_f;
        let x = match plan.p.iter().position(|&p| p >= pf) {
            Some(0) => centres[0],
            Some(i) => {
                let (p0, p1) = (plan.p[i - 1], plan.p[i]);
                centres[i - 1] + (pf - p0) / (p1 - p0) * cw
            }
            None => *centres.last().unwrap_or(&left),
        };
        out.push_str(&format!(
            "<line x1=\"{x}\" x2=\"{x}\" y1=\"{y}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            y + ch
        ));
    }
    let legend_y = top + ch * plan.kernels.len() as f64 + 25.0;
    for (i, class) in [CellClass::SystematicBlowup, CellClass::ExtinctionCapable, CellClass::Inconclusive]
        .into_iter()
        .enumerate()
    {
        let x = left + 130.0 * i as f64;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{}\" y=\"{legend_y}\">{}</text>\n",
            legend_y - 10.0,
            colour(class),
            x + 14.0,
            class.label()
        ));
    }
    out.push_str("</svg>\n");
    out
}
