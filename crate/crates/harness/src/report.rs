//! Figure data: CSV tables, simple SVG plots and a manifest of content
//! hashes. Output depends only on the sweep result, so emitting the same
//! result twice gives byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::HarnessError;
use crate::run::{EvalSummary, SweepResult};
use crate::stats::{pooled_se, spread_in_pooled_se, MeanSe};

pub const FIGURE_CSVS: [&str; 7] = [
    "fig4_provider_reward.csv",
    "fig5_pareto.csv",
    "fig6_decomposition.csv",
    "fig8_scatter.csv",
    "fig9_linear.csv",
    "fig11_subgroup.csv",
    "fig12_rec_counts.csv",
];

/// Nine significant digits; `NA` for NaN.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Trim trailing zeros so equal values print identically however they
    // were computed.
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

fn fmt_se(m: &MeanSe) -> String {
    m.se.map_or_else(|| "NA".into(), fmt_num)
}

struct Table {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &'static [&'static str]) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// (agent label, lambda cell, learning-rate cell, summary) for every row a
/// per-agent table reports: the selected model per lambda, then the random
/// agent.
fn agent_rows(r: &SweepResult) -> Vec<(&'static str, String, String, &EvalSummary)> {
    let mut rows: Vec<_> = r
        .selected_entries()
        .map(|e| ("eco", fmt_num(e.lambda), fmt_num(e.learning_rate), &e.eval))
        .collect();
    if let Some(rand) = &r.random {
        rows.push(("random", "NA".into(), "NA".into(), rand));
    }
    rows
}

fn fig4(r: &SweepResult) -> Table {
    let mut t = Table::new(&[
        "agent",
        "lambda",
        "learning_rate",
        "provider_reward_mean",
        "provider_reward_se",
        "viable_providers_mean",
        "viable_providers_se",
    ]);
    for (agent, lambda, lr, s) in agent_rows(r) {
        t.push(vec![
            agent.into(),
            lambda,
            lr,
            fmt_num(s.provider_reward.mean),
            fmt_se(&s.provider_reward),
            fmt_num(s.viable_providers.mean),
            fmt_se(&s.viable_providers),
        ]);
    }
    t
}

fn fig5(r: &SweepResult) -> Table {
    let mut t = Table::new(&[
        "lambda",
        "user_reward_mean",
        "user_reward_se",
        "provider_reward_mean",
        "provider_reward_se",
    ]);
    // The random agent is the row with lambda NA.
    for (_, lambda, _, s) in agent_rows(r) {
        t.push(vec![
            lambda,
            fmt_num(s.user_reward.mean),
            fmt_se(&s.user_reward),
            fmt_num(s.provider_reward.mean),
            fmt_se(&s.provider_reward),
        ]);
    }
    t
}

fn fig6(r: &SweepResult) -> Table {
    let mut t = Table::new(&[
        "agent",
        "lambda",
        "rec_part_mean",
        "rec_part_se",
        "feedback_part_mean",
        "feedback_part_se",
        "drift_part_mean",
        "drift_part_se",
    ]);
    for (agent, lambda, _, s) in agent_rows(r) {
        t.push(vec![
            agent.into(),
            lambda,
            fmt_num(s.rec_part.mean),
            fmt_se(&s.rec_part),
            fmt_num(s.feedback_part.mean),
            fmt_se(&s.feedback_part),
            fmt_num(s.drift_part.mean),
            fmt_se(&s.drift_part),
        ]);
    }
    t
}

fn fig8(r: &SweepResult) -> Table {
    let mut t = Table::new(&["lambda", "satisfaction", "uplift"]);
    for e in r.selected_entries() {
        for &(s, u) in &e.eval.scatter {
            t.push(vec![fmt_num(e.lambda), fmt_num(s), fmt_num(u)]);
        }
    }
    t
}

fn fig9(r: &SweepResult) -> Table {
    let mut t = Table::new(&[
        "lambda",
        "provider_reward_mean",
        "provider_reward_se",
        "pooled_se",
        "spread_over_pooled_se",
    ]);
    let rewards: Vec<MeanSe> = r
        .selected_entries()
        .map(|e| e.eval.provider_reward)
        .collect();
    let pooled = pooled_se(&rewards).map_or_else(|| "NA".into(), fmt_num);
    let spread = spread_in_pooled_se(&rewards).map_or_else(|| "NA".into(), fmt_num);
    for e in r.selected_entries() {
        t.push(vec![
            fmt_num(e.lambda),
            fmt_num(e.eval.provider_reward.mean),
            fmt_se(&e.eval.provider_reward),
            pooled.clone(),
            spread.clone(),
        ]);
    }
    t
}

fn fig11(r: &SweepResult) -> Table {
    let mut t = Table::new(&[
        "agent",
        "lambda",
        "group",
        "provider_reward_mean",
        "provider_reward_se",
        "viable_providers_mean",
        "viable_providers_se",
    ]);
    for (agent, lambda, _, s) in agent_rows(r) {
        for (g, name) in r.group_names.iter().enumerate() {
            let (pr, v) = (&s.group_provider_reward[g], &s.group_viable[g]);
            t.push(vec![
                agent.into(),
                lambda.clone(),
                name.clone(),
                fmt_num(pr.mean),
                fmt_se(pr),
                fmt_num(v.mean),
                fmt_se(v),
            ]);
        }
    }
    t
}

fn fig12(r: &SweepResult) -> Table {
    let mut t = Table::new(&["agent", "lambda", "group", "rec_count_mean", "rec_count_se"]);
    for (agent, lambda, _, s) in agent_rows(r) {
        for (g, name) in r.group_names.iter().enumerate() {
            let c = &s.group_rec_counts[g];
            t.push(vec![
                agent.into(),
                lambda.clone(),
                name.clone(),
                fmt_num(c.mean),
                fmt_se(c),
            ]);
        }
    }
    t
}

struct Series {
    name: String,
    /// (x, y, standard error)
    points: Vec<(f64, f64, Option<f64>)>,
    connect: bool,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

fn short(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return fmt_num(x);
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (2 - exp).clamp(0, 6) as usize;
    format!("{x:.decimals$}")
}

/// A plain x-y chart with optional error bars and a legend.
fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|p| p.0.is_finite() && p.1.is_finite())
    };
    let mut xr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut yr = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, se) in pts() {
        let e = se.unwrap_or(0.0);
        xr = (xr.0.min(x), xr.1.max(x));
        yr = (yr.0.min(y - e), yr.1.max(y + e));
    }
    if !xr.0.is_finite() {
        xr = (0.0, 1.0);
        yr = (0.0, 1.0);
    }
    let pad = |r: (f64, f64)| {
        let w = r.1 - r.0;
        if w > 0.0 {
            (r.0 - 0.05 * w, r.1 + 0.05 * w)
        } else {
            (r.0 - 0.5, r.1 + 0.5)
        }
    };
    let (xr, yr) = (pad(xr), pad(yr));
    let px = |x: f64| L + (x - xr.0) / (xr.1 - xr.0) * (W - L - R);
    let py = |y: f64| H - B - (y - yr.0) / (yr.1 - yr.0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - L - R,
        H - T - B
    );
    for i in 0..=4 {
        let fx = xr.0 + (xr.1 - xr.0) * i as f64 / 4.0;
        let fy = yr.0 + (yr.1 - yr.0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(fx),
            H - B + 16.0,
            short(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            L - 6.0,
            py(fy) + 4.0,
            short(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (L + W - R) / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(ylabel),
        y = (T + H - B) / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<_> = ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .collect();
        if ser.connect && finite.len() > 1 {
            let path: Vec<String> = finite
                .iter()
                .map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
                path.join(" ")
            );
        }
        for p in &finite {
            if let Some(e) = p.2.filter(|e| *e > 0.0) {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                    py(p.1 - e),
                    py(p.1 + e),
                    x = px(p.0)
                );
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="{}" fill="{color}"/>"#,
                px(p.0),
                py(p.1),
                if ser.connect { 3 } else { 2 }
            );
        }
        let ly = T + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#,
            W - R - 150.0,
            ly - 9.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}">{}</text>"#,
            W - R - 134.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn lambda_series(r: &SweepResult, name: &str, f: impl Fn(&EvalSummary) -> MeanSe) -> Series {
    Series {
        name: name.into(),
        points: r
            .selected_entries()
            .map(|e| {
                let m = f(&e.eval);
                (e.lambda, m.mean, m.se)
            })
            .collect(),
        connect: true,
    }
}

fn plots(r: &SweepResult) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    out.push((
        "fig4_provider_reward.svg",
        svg_plot(
            "Provider accumulated reward",
            "lambda",
            "provider reward",
            &[lambda_series(r, "EcoAgent", |s| s.provider_reward)],
        ),
    ));
    out.push((
        "fig4_viable_providers.svg",
        svg_plot(
            "Viable providers at episode end",
            "lambda",
            "viable providers",
            &[lambda_series(r, "EcoAgent", |s| s.viable_providers)],
        ),
    ));
    let mut pareto = vec![Series {
        name: "EcoAgent".into(),
        points: r
            .selected_entries()
            .map(|e| {
                (
                    e.eval.user_reward.mean,
                    e.eval.provider_reward.mean,
                    e.eval.provider_reward.se,
                )
            })
            .collect(),
        connect: true,
    }];
    if let Some(rand) = &r.random {
        pareto.push(Series {
            name: "random".into(),
            points: vec![(
                rand.user_reward.mean,
                rand.provider_reward.mean,
                rand.provider_reward.se,
            )],
            connect: false,
        });
    }
    out.push((
        "fig5_pareto.svg",
        svg_plot(
            "User vs provider reward",
            "user reward",
            "provider reward",
            &pareto,
        ),
    ));
    out.push((
        "fig6_decomposition.svg",
        svg_plot(
            "Provider reward by source",
            "lambda",
            "reward",
            &[
                lambda_series(r, "recommendation", |s| s.rec_part),
                lambda_series(r, "user feedback", |s| s.feedback_part),
                lambda_series(r, "drift", |s| s.drift_part),
            ],
        ),
    ));
    let scatter: Vec<Series> = r
        .selected_entries()
        .map(|e| Series {
            name: format!("lambda {}", short(e.lambda)),
            points: e.eval.scatter.iter().map(|&(s, u)| (s, u, None)).collect(),
            connect: false,
        })
        .collect();
    out.push((
        "fig8_scatter.svg",
        svg_plot(
            "Predicted uplift vs satisfaction",
            "satisfaction",
            "uplift",
            &scatter,
        ),
    ));
    let groups = |f: &dyn Fn(&EvalSummary, usize) -> MeanSe| -> Vec<Series> {
        r.group_names
            .iter()
            .enumerate()
            .map(|(g, name)| lambda_series(r, name, |s| f(s, g)))
            .collect()
    };
    out.push((
        "fig11_subgroup.svg",
        svg_plot(
            "Viable providers by group",
            "lambda",
            "viable providers",
            &groups(&|s, g| s.group_viable[g]),
        ),
    ));
    out.push((
        "fig12_rec_counts.svg",
        svg_plot(
            "Recommendations by group",
            "lambda",
            "recommendations",
            &groups(&|s, g| s.group_rec_counts[g]),
        ),
    ));
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    files: BTreeMap<String, String>,
}

/// Writes the figure CSVs, SVG plots and `manifest.json` into `dir`,
/// creating it if needed. Returns the written paths, manifest last.
pub fn emit_report(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let tables = [
        fig4(result),
        fig5(result),
        fig6(result),
        fig8(result),
        fig9(result),
        fig11(result),
        fig12(result),
    ];
    let mut files: Vec<(String, String)> = FIGURE_CSVS
        .iter()
        .zip(tables.iter())
        .map(|(name, t)| (name.to_string(), t.render()))
        .collect();
    files.extend(plots(result).into_iter().map(|(n, s)| (n.to_string(), s)));

    let mut written = Vec::with_capacity(files.len() + 1);
    let mut hashes = BTreeMap::new();
    for (name, body) in &files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        hashes.insert(name.clone(), hex::encode(Sha256::digest(body.as_bytes())));
        written.push(path);
    }
    let manifest = Manifest {
        scenario: result.scenario.as_str(),
        files: hashes,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    let path = dir.join("manifest.json");
    std::fs::write(&path, json)?;
    written.push(path);
    Ok(written)
}
