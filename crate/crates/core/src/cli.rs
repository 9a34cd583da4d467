//! The `hca2e` command-line tool: `generate`, `run`, `sweep` and `report`.
//!
//! All outputs are pure functions of the effective configuration and the input log, so repeated
//! invocations write byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::controller::WindowReport;
use crate::error::{Error, Result};
use crate::io::{write_log, LogFile};
use crate::model::{ExposureTemplate, Request};
use crate::simulator::generator::RequestGenerator;
use crate::simulator::metrics::{advantage, RunMetrics};
use crate::simulator::run::{Experiment, RunObserver, ServedRequest, StrategyFamily};
use crate::simulator::sweep::{pareto_front, pareto_sweep_with, SweepRow};

#[derive(Debug, Parser)]
#[command(name = "hca2e", version, about = "Adaptive ad exposure: template search, controller, baselines and simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic request log.
    Generate(CommonArgs),
    /// Replay the log under each configured strategy.
    Run(CommonArgs),
    /// Sweep alpha for each strategy and extract Pareto fronts.
    Sweep(CommonArgs),
    /// Summarize the tables written by `run` and `sweep`.
    Report(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set generator.seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Shorthand for `--set generator.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    fn config(&self) -> Result<Config> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("generator.seed={seed}"));
        }
        Config::load(self.config.as_deref(), &overrides)
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let args = match &cli.command {
        Command::Generate(a) | Command::Run(a) | Command::Sweep(a) | Command::Report(a) => a,
    };
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(Error::config("--jobs", "must be >= 1"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(&a.config()?, &a.out),
        Command::Run(a) => cmd_run(&a.config()?, &a.out),
        Command::Sweep(a) => cmd_sweep(&a.config()?, &a.out),
        Command::Report(a) => cmd_report(&a.out),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a Config,
    outputs: BTreeMap<String, String>,
}

fn write_manifest(out: &Path, name: &str, command: &str, cfg: &Config, outputs: &[&str]) -> Result<()> {
    let mut hashes = BTreeMap::new();
    for f in outputs {
        hashes.insert(f.to_string(), file_sha256(&out.join(f))?);
    }
    let manifest = Manifest {
        command,
        seed: cfg.generator.seed,
        config_hash: cfg.hash(),
        config: cfg,
        outputs: hashes,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(out.join(name), text)?;
    Ok(())
}

pub fn cmd_generate(cfg: &Config, out: &Path) -> Result<()> {
    create_dir(out)?;
    let n = write_log(&out.join("requests.jsonl"), RequestGenerator::new(&cfg.generator)?)?;
    write_manifest(out, "manifest.json", "generate", cfg, &["requests.jsonl"])?;
    println!("wrote {n} requests to {}", out.join("requests.jsonl").display());
    Ok(())
}

fn open_log(configured: Option<&Path>, out: &Path) -> Result<LogFile> {
    let path = configured.map_or_else(|| out.join("requests.jsonl"), Path::to_path_buf);
    LogFile::new(&path).map_err(|_| {
        Error::MissingInput(format!(
            "request log {} (run `hca2e generate` first or set run.log)",
            path.display()
        ))
    })
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: String,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub beam_size: Option<usize>,
    pub m_star: f64,
    pub requests: u64,
    pub rev: f64,
    pub gmv: f64,
    pub clk: u64,
    pub ctr: f64,
    pub expected_m: f64,
    pub realized_m: f64,
    pub avg_ad_position: f64,
    pub knob: Option<f64>,
    pub delta_rev_pct: Option<f64>,
    pub delta_gmv_pct: Option<f64>,
    pub delta_clk_pct: Option<f64>,
    pub delta_ctr_pct: Option<f64>,
}

impl MetricsRow {
    fn new(m: &RunMetrics, fixed: Option<&RunMetrics>) -> Self {
        let delta = |f: fn(&RunMetrics) -> f64| fixed.and_then(|b| advantage(f(m), f(b)).ok());
        MetricsRow {
            strategy: m.strategy.clone(),
            alpha: m.alpha,
            beam_size: m.beam_size,
            m_star: m.m_star,
            requests: m.requests,
            rev: m.rev,
            gmv: m.gmv,
            clk: m.clk,
            ctr: m.ctr,
            expected_m: m.expected_m,
            realized_m: m.realized_m,
            avg_ad_position: m.avg_ad_position,
            knob: m.knob,
            delta_rev_pct: delta(|x| x.rev),
            delta_gmv_pct: delta(|x| x.gmv),
            delta_clk_pct: delta(|x| x.clk as f64),
            delta_ctr_pct: delta(|x| x.ctr),
        }
    }

    fn series(&self) -> String {
        series(&self.strategy, self.beam_size)
    }
}

fn series(strategy: &str, beam_size: Option<usize>) -> String {
    match beam_size {
        Some(b) => format!("{strategy}(B={b})"),
        None => strategy.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub strategy: String,
    #[serde(rename = "B")]
    pub beam_size: Option<usize>,
    pub m_star: f64,
    pub window_index: usize,
    pub realized_m: f64,
    pub relative_deviation: f64,
    pub rho_before: f64,
    pub rho_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRow {
    pub strategy: String,
    #[serde(rename = "B")]
    pub beam_size: Option<usize>,
    pub m_star: f64,
    pub bucket_start: usize,
    pub bucket_end: usize,
    pub share: f64,
}

#[derive(Serialize)]
struct EventRecord<'a> {
    strategy: &'a str,
    #[serde(rename = "B")]
    beam_size: Option<usize>,
    m_star: f64,
    request_id: u64,
    template: String,
    rho_thres: Option<f64>,
    scroll_depth: usize,
    ad_slots: &'a [usize],
    clicks: &'a [usize],
    conversions: &'a [usize],
    revenue: f64,
    gmv: f64,
}

struct EventWriter<'w> {
    out: Option<&'w mut BufWriter<File>>,
    strategy: &'static str,
    beam_size: Option<usize>,
    m_star: f64,
}

impl RunObserver for EventWriter<'_> {
    fn on_request(&mut self, r: &Request, s: &ServedRequest) -> Result<()> {
        let Some(w) = self.out.as_mut() else {
            return Ok(());
        };
        let rec = EventRecord {
            strategy: self.strategy,
            beam_size: self.beam_size,
            m_star: self.m_star,
            request_id: r.request_id,
            template: template_string(&s.template),
            rho_thres: s.rho_thres,
            scroll_depth: s.event.scroll_depth,
            ad_slots: &s.event.ad_slots,
            clicks: &s.event.clicks,
            conversions: &s.event.conversions,
            revenue: s.event.revenue,
            gmv: s.event.gmv,
        };
        serde_json::to_writer(&mut **w, &rec)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

fn template_string(t: &ExposureTemplate) -> String {
    t.to_string()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

pub fn cmd_run(cfg: &Config, out: &Path) -> Result<()> {
    create_dir(out)?;
    let log = open_log(cfg.run.log.as_deref(), out)?;
    let q = cfg.exposure_model()?;
    let families = cfg.run_families()?;
    let alpha = cfg.run.alpha;

    let events_path = out.join("events.jsonl");
    let mut events = if cfg.run.write_events {
        Some(BufWriter::new(File::create(&events_path)?))
    } else {
        if events_path.exists() {
            fs::remove_file(&events_path)?;
        }
        None
    };
    let mut metrics_rows = Vec::new();
    let mut window_rows = Vec::new();
    let mut position_rows = Vec::new();
    for &m_star in &cfg.run.m_stars {
        let exp = Experiment::new(
            &log,
            q.clone(),
            cfg.run.user_seed,
            cfg.calibration.clone(),
            cfg.controller.config(m_star),
        )?;
        let fixed = exp.run_cell(StrategyFamily::Fixed, alpha, m_star, &mut ())?.metrics;
        for &family in &families {
            let mut observer = EventWriter {
                out: events.as_mut(),
                strategy: family.label(),
                beam_size: family.beam_size(),
                m_star,
            };
            let output = exp.run_cell(family, alpha, m_star, &mut observer)?;
            let m = &output.metrics;
            metrics_rows.push(MetricsRow::new(m, Some(&fixed)));
            window_rows.extend(output.windows.iter().map(|w: &WindowReport| WindowRow {
                strategy: m.strategy.clone(),
                beam_size: m.beam_size,
                m_star,
                window_index: w.window_index,
                realized_m: w.realized_m,
                relative_deviation: (w.realized_m - m_star) / m_star,
                rho_before: w.rho_before,
                rho_after: w.rho_after,
            }));
            position_rows.extend(m.ad_position_histogram.iter().map(|b| PositionRow {
                strategy: m.strategy.clone(),
                beam_size: m.beam_size,
                m_star,
                bucket_start: b.start,
                bucket_end: b.end,
                share: b.share,
            }));
            eprintln!(
                "{:<12} m*={m_star:<5} rev={:.4} gmv={:.4} realized_m={:.4} expected_m={:.4}",
                series(&m.strategy, m.beam_size),
                m.rev,
                m.gmv,
                m.realized_m,
                m.expected_m
            );
        }
    }
    if let Some(w) = events.as_mut() {
        w.flush()?;
    }
    write_csv(&out.join("metrics.csv"), &metrics_rows)?;
    write_csv(&out.join("windows.csv"), &window_rows)?;
    write_csv(&out.join("ad_positions.csv"), &position_rows)?;
    let mut outputs = vec!["metrics.csv", "windows.csv", "ad_positions.csv"];
    if cfg.run.write_events {
        outputs.push("events.jsonl");
    }
    write_manifest(out, "run_manifest.json", "run", cfg, &outputs)
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedCell {
    key: String,
    metrics: RunMetrics,
}

fn cell_key(cfg_hash: &str, family: StrategyFamily, alpha: f64, m_star: f64) -> String {
    format!(
        "{}_{}_a{alpha}_m{m_star}_{}",
        family.label(),
        family.beam_size().map_or("-".to_string(), |b| b.to_string()),
        &cfg_hash[..16]
    )
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub strategy: String,
    #[serde(rename = "B")]
    pub beam_size: Option<usize>,
    pub alpha: f64,
    pub m_star: f64,
    pub delta_rev_pct: f64,
    pub delta_gmv_pct: f64,
    pub realized_m: f64,
    pub expected_m: f64,
    pub on_front: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub strategy: String,
    pub alpha: f64,
    pub m_star: f64,
    pub metric: String,
    pub value: f64,
}

/// Marks each row that lies on its own series' Pareto front for its target.
pub fn mark_fronts(rows: &[SweepRow]) -> Vec<bool> {
    let mut on_front = vec![false; rows.len()];
    let mut groups: BTreeMap<(String, u64), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry((r.series(), r.m_star.to_bits())).or_default().push(i);
    }
    for idx in groups.values() {
        let pts: Vec<(f64, f64)> = idx.iter().map(|&i| (rows[i].delta_rev_pct, rows[i].delta_gmv_pct)).collect();
        for k in pareto_front(&pts) {
            on_front[idx[k]] = true;
        }
    }
    on_front
}

pub fn cmd_sweep(cfg: &Config, out: &Path) -> Result<()> {
    create_dir(out)?;
    let cells = out.join("cells");
    create_dir(&cells)?;
    let log = open_log(cfg.sweep.log.as_deref().or(cfg.run.log.as_deref()), out)?;
    let q = cfg.exposure_model()?;
    let families = cfg.sweep_families()?;
    let cache_hash = {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&(&cfg.generator, &cfg.exposure, &cfg.controller, &cfg.calibration, cfg.run.user_seed))?);
        h.update(file_sha256(log.path())?.as_bytes());
        hex::encode(h.finalize())
    };
    let mut rows = Vec::new();
    for &m_star in &cfg.sweep.m_stars {
        let exp = Experiment::new(
            &log,
            q.clone(),
            cfg.run.user_seed,
            cfg.calibration.clone(),
            cfg.controller.config(m_star),
        )?;
        rows.extend(pareto_sweep_with(&cfg.sweep.alphas, &families, m_star, |family, alpha| {
            let key = cell_key(&cache_hash, family, alpha, m_star);
            let path = cells.join(format!("{key}.json"));
            if let Ok(text) = fs::read_to_string(&path) {
                if let Ok(cell) = serde_json::from_str::<CachedCell>(&text) {
                    if cell.key == key {
                        return Ok(cell.metrics);
                    }
                }
            }
            let metrics = exp.run_cell(family, alpha, m_star, &mut ())?.metrics;
            let cell = CachedCell { key, metrics };
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, serde_json::to_string(&cell)?)?;
            fs::rename(&tmp, &path)?;
            eprintln!(
                "{:<12} alpha={alpha:<4} m*={m_star:<5} rev={:.4} gmv={:.4} realized_m={:.4}",
                series(family.label(), family.beam_size()),
                cell.metrics.rev,
                cell.metrics.gmv,
                cell.metrics.realized_m
            );
            Ok(cell.metrics)
        })?);
    }
    let on_front = mark_fronts(&rows);
    let table: Vec<SweepCsvRow> = rows
        .iter()
        .zip(&on_front)
        .map(|(r, &f)| SweepCsvRow {
            strategy: r.strategy.clone(),
            beam_size: r.beam_size,
            alpha: r.alpha,
            m_star: r.m_star,
            delta_rev_pct: r.delta_rev_pct,
            delta_gmv_pct: r.delta_gmv_pct,
            realized_m: r.realized_m,
            expected_m: r.expected_m,
            on_front: f,
        })
        .collect();
    let long: Vec<LongRow> = rows
        .iter()
        .flat_map(|r| {
            [
                ("delta_rev_pct", r.delta_rev_pct),
                ("delta_gmv_pct", r.delta_gmv_pct),
                ("realized_m", r.realized_m),
                ("expected_m", r.expected_m),
            ]
            .map(|(metric, value)| LongRow {
                strategy: r.series(),
                alpha: r.alpha,
                m_star: r.m_star,
                metric: metric.to_string(),
                value,
            })
        })
        .collect();
    let front: Vec<SweepCsvRow> = table.iter().filter(|r| r.on_front).cloned().collect();
    write_csv(&out.join("sweep.csv"), &table)?;
    write_csv(&out.join("sweep_long.csv"), &long)?;
    write_csv(&out.join("pareto_front.csv"), &front)?;
    write_manifest(
        out,
        "sweep_manifest.json",
        "sweep",
        cfg,
        &["sweep.csv", "sweep_long.csv", "pareto_front.csv"],
    )
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".to_string(), |v| format!("{v:+.2}"))
}

/// Renders the Markdown summary of whatever `run` and `sweep` tables exist under `out`.
pub fn render_report(out: &Path) -> Result<String> {
    let metrics_path = out.join("metrics.csv");
    let sweep_path = out.join("sweep.csv");
    if !metrics_path.is_file() && !sweep_path.is_file() {
        return Err(Error::MissingInput(format!(
            "neither {} nor {} exists; run `hca2e run` or `hca2e sweep` first",
            metrics_path.display(),
            sweep_path.display()
        )));
    }
    let mut s = String::from("# HCA2E report\n");
    if metrics_path.is_file() {
        let rows: Vec<MetricsRow> = read_csv(&metrics_path)?;
        let mut by_target: BTreeMap<u64, Vec<&MetricsRow>> = BTreeMap::new();
        for r in &rows {
            by_target.entry(r.m_star.to_bits()).or_default().push(r);
        }
        s.push_str("\n## Advantage over the fixed baseline\n");
        for (bits, group) in &by_target {
            let _ = write!(
                s,
                "\n### m* = {:.1}%\n\n| strategy | m | REV | GMV | ΔREV% | ΔGMV% | ΔCLK% | ΔCTR% |\n|---|---|---|---|---|---|---|---|\n",
                f64::from_bits(*bits) * 100.0
            );
            for r in group {
                let _ = writeln!(
                    s,
                    "| {} | {:.2}% | {:.2} | {:.2} | {} | {} | {} | {} |",
                    r.series(),
                    r.realized_m * 100.0,
                    r.rev,
                    r.gmv,
                    fmt_opt(r.delta_rev_pct),
                    fmt_opt(r.delta_gmv_pct),
                    fmt_opt(r.delta_clk_pct),
                    fmt_opt(r.delta_ctr_pct)
                );
            }
        }
        let _ = write!(s, "\n## Average ad position\n\n| strategy | m* | avg slot |\n|---|---|---|\n");
        for r in &rows {
            let _ = writeln!(s, "| {} | {} | {:.2} |", r.series(), r.m_star, r.avg_ad_position);
        }
    }
    let positions_path = out.join("ad_positions.csv");
    if positions_path.is_file() {
        let rows: Vec<PositionRow> = read_csv(&positions_path)?;
        let mut series_order: Vec<String> = Vec::new();
        let mut buckets: Vec<(usize, usize)> = Vec::new();
        let mut share: BTreeMap<(String, usize), f64> = BTreeMap::new();
        for r in &rows {
            let name = format!("{} m*={}", series(&r.strategy, r.beam_size), r.m_star);
            if !series_order.contains(&name) {
                series_order.push(name.clone());
            }
            if !buckets.contains(&(r.bucket_start, r.bucket_end)) {
                buckets.push((r.bucket_start, r.bucket_end));
            }
            share.insert((name, r.bucket_start), r.share);
        }
        buckets.sort_unstable();
        if !buckets.is_empty() {
            s.push_str("\n## Ad share by slot bucket\n\n| slots |");
            for name in &series_order {
                let _ = write!(s, " {name} |");
            }
            s.push_str("\n|---|");
            s.push_str(&"---|".repeat(series_order.len()));
            s.push('\n');
            for (a, b) in &buckets {
                let _ = write!(s, "| {a}:{b} |");
                for name in &series_order {
                    let v = share.get(&(name.clone(), *a)).copied().unwrap_or(0.0);
                    let _ = write!(s, " {:.3} |", v);
                }
                s.push('\n');
            }
        }
    }
    let windows_path = out.join("windows.csv");
    if windows_path.is_file() {
        let rows: Vec<WindowRow> = read_csv(&windows_path)?;
        if !rows.is_empty() {
            s.push_str("\n## Monetization-rate deviation per control window\n\n| strategy | m* | window | (m - m*)/m* | rho |\n|---|---|---|---|---|\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {:+.4} | {:.6e} |",
                    series(&r.strategy, r.beam_size),
                    r.m_star,
                    r.window_index,
                    r.relative_deviation,
                    r.rho_after
                );
            }
        }
    }
    if sweep_path.is_file() {
        let rows: Vec<SweepCsvRow> = read_csv(&sweep_path)?;
        s.push_str("\n## Alpha sweep (Pareto front members marked *)\n\n| strategy | m* | alpha | ΔREV% | ΔGMV% | m |\n|---|---|---|---|---|---|\n");
        for r in &rows {
            let _ = writeln!(
                s,
                "| {}{} | {} | {} | {:+.2} | {:+.2} | {:.2}% |",
                series(&r.strategy, r.beam_size),
                if r.on_front { " *" } else { "" },
                r.m_star,
                r.alpha,
                r.delta_rev_pct,
                r.delta_gmv_pct,
                r.realized_m * 100.0
            );
        }
    }
    Ok(s)
}

pub fn cmd_report(out: &Path) -> Result<()> {
    let text = render_report(out)?;
    fs::write(out.join("report.md"), &text)?;
    print!("{text}");
    Ok(())
}
