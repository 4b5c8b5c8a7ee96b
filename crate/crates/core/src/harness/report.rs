//! Cross-run comparison: per-schedule performance and sharpness, and depth of
//! local minima by post-transition phase.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::RunSummary;
use crate::error::{Error, Result};
use crate::landscape::DepthReport;
use crate::reward::Schedule;

/// Mean and sample standard deviation (zero for fewer than two values).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, std, n }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub schedule: String,
    pub runs: Vec<String>,
    pub seeds: usize,
    pub final_return: Stat,
    pub success_rate: Stat,
    pub sharpness: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub env: String,
    pub schedules: Vec<ScheduleRow>,
    /// Seed-averaged depth series per schedule.
    pub depth: Vec<DepthReport>,
}

fn schedule_order(name: &str) -> (usize, String) {
    let pos = Schedule::ALL.iter().position(|s| s.name() == name).unwrap_or(Schedule::ALL.len());
    (pos, name.to_string())
}

pub fn compare_report(runs: &[RunSummary]) -> Result<Report> {
    if runs.len() < 2 {
        return Err(Error::Precondition("a comparison needs at least two runs".into()));
    }
    let env = runs[0].env.clone();
    if let Some(r) = runs.iter().find(|r| r.env != env) {
        return Err(Error::Precondition(format!("runs cover different environments: {env} and {}", r.env)));
    }
    let mut names: Vec<String> = runs.iter().map(|r| r.schedule.clone()).collect();
    names.sort_by_key(|n| schedule_order(n));
    names.dedup();

    let mut schedules = Vec::new();
    let mut depth = Vec::new();
    for name in names {
        let group: Vec<&RunSummary> = runs.iter().filter(|r| r.schedule == name).collect();
        let seeds: Vec<_> = group.iter().flat_map(|r| &r.seeds).filter(|s| s.error.is_none()).collect();
        let returns: Vec<f64> = seeds.iter().map(|s| s.final_return).collect();
        let success: Vec<f64> = seeds.iter().map(|s| s.success_rate).collect();
        let sharp: Vec<f64> = seeds.iter().filter_map(|s| s.sharpness).collect();
        schedules.push(ScheduleRow {
            schedule: name.clone(),
            runs: group.iter().map(|r| r.run_id.clone()).collect(),
            seeds: seeds.len(),
            final_return: Stat::of(&returns),
            success_rate: Stat::of(&success),
            sharpness: (!sharp.is_empty()).then(|| Stat::of(&sharp)),
        });

        let series: Vec<&DepthReport> = seeds.iter().filter_map(|s| s.depth.as_ref()).collect();
        if let Some(first) = series.first() {
            let same: Vec<&&DepthReport> = series.iter().filter(|d| d.checkpoints == first.checkpoints).collect();
            let k = first.depths.len();
            let means = (0..k).map(|i| same.iter().map(|d| d.depths[i]).sum::<f64>() / same.len() as f64).collect();
            depth.push(DepthReport::new(name.clone(), first.checkpoints.clone(), means));
        }
    }
    Ok(Report { env, schedules, depth })
}

fn pm(s: &Stat) -> String {
    format!("{:.4} ± {:.4}", s.mean, s.std)
}

impl Report {
    /// Aligned plain-text rendering of both tables.
    pub fn to_text(&self) -> String {
        let mut rows = vec![vec![
            "schedule".to_string(),
            "seeds".to_string(),
            "final return".to_string(),
            "success rate".to_string(),
            "sharpness".to_string(),
        ]];
        for r in &self.schedules {
            rows.push(vec![
                r.schedule.clone(),
                r.seeds.to_string(),
                pm(&r.final_return),
                pm(&r.success_rate),
                r.sharpness.as_ref().map(pm).unwrap_or_else(|| "-".into()),
            ]);
        }
        let mut out = format!("environment: {}\n\n", self.env);
        out.push_str(&align(&rows));

        if !self.depth.is_empty() {
            out.push_str("\ndepth of local minima by phase (updates after transition)\n\n");
            for d in &self.depth {
                let mut rows = vec![vec!["".to_string()], vec![d.schedule.clone()], vec!["delta".to_string()]];
                for (i, (p, c)) in d.phases.iter().zip(&d.checkpoints).enumerate() {
                    rows[0].push(format!("{p} ({c})"));
                    rows[1].push(format!("{:.4}", d.depths[i]));
                    rows[2].push(if i == 0 { "-".into() } else { format!("{:+.4}", d.deltas[i - 1]) });
                }
                out.push_str(&align(&rows));
                out.push('\n');
            }
        }
        out
    }
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
