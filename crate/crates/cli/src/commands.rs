use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use lobfit::data_io::{
    build_sample, infer_grid, load_quotes, load_trades, match_trades, parse_time_of_day, quotes_from_history,
    sessions, trades_from_history, write_quotes, write_trades, MatchReport, QuoteRecord, SessionData, SessionWindow,
    Side,
};
use lobfit::estimator::{
    fit, moment_cap_filter, prediction_power, select_model, wilcoxon_signed_rank, FilterReport, FitOptions,
    FitResult, MeanBasis, Mode, OptBudget, PredictionReport, Sample, SelectOptions, SelectionOutcome, StopReason,
    WilcoxonResult,
};
use lobfit::model::{preset, ModelParams, ParamMap, Preset, TickGrid, Variant};
use lobfit::report::{fit_table, selection_table, Report, RunConfig};
use lobfit::simulator::{simulate as run_simulation, GziConfig, SimConfig};
use lobfit::LobError;
use serde::{Deserialize, Serialize};

fn flag<T: ToString>(cfg: &mut RunConfig, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        cfg.set(key, v.to_string());
    }
}

fn write_report<T: Serialize>(path: &Path, report: &Report<T>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, report.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_report(path: &Path) -> anyhow::Result<Report<serde_json::Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    LobError::Input(msg.into()).into()
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// smith, cont, luckock or stigler.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    events: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of price ticks.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Simulate the generalized model (market order volumes, eta).
    #[arg(long)]
    gzi: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    pub tick_size: f64,
    pub price_offset: f64,
}

impl GridInfo {
    fn of(g: &TickGrid) -> Self {
        Self { n: g.n(), tick_size: g.tick_size(), price_offset: g.price_offset() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub grid: GridInfo,
    pub events_simulated: usize,
    pub event_counts: BTreeMap<String, u64>,
    pub quote_rows: usize,
    pub trade_rows: usize,
    pub absorbed: bool,
}

fn build_preset(cfg: &RunConfig) -> anyhow::Result<Preset> {
    let name: String = cfg.get("preset")?;
    Ok(match name.to_ascii_lowercase().as_str() {
        "smith" => Preset::Smith { theta: cfg.get("theta")?, kappa: cfg.get("kappa")?, rho: cfg.get("rho")? },
        "cont" => Preset::Cont { theta: cfg.get("theta")?, kappa: cfg.get_list("kappa")?, rho: cfg.get_list("rho")? },
        "luckock" => Preset::Luckock { k_cdf: cfg.get_list("k_cdf")?, l_cdf: cfg.get_list("l_cdf")? },
        "stigler" => Preset::Stigler,
        other => return Err(input_err(format!("unknown preset {other:?}"))),
    })
}

pub fn simulate(mut cfg: RunConfig, a: &SimulateArgs, _table: bool) -> anyhow::Result<()> {
    flag(&mut cfg, "preset", &a.preset);
    flag(&mut cfg, "events", &a.events);
    flag(&mut cfg, "seed", &a.seed);
    flag(&mut cfg, "n", &a.n);
    flag(&mut cfg, "burn_in", &a.burn_in);
    flag(&mut cfg, "out", &a.out.as_ref().map(|p| p.display().to_string()));
    if a.gzi {
        cfg.set("gzi", true);
    }
    for (k, v) in [
        ("preset", "smith"),
        ("theta", "1"),
        ("kappa", "0.5"),
        ("rho", "1"),
        ("n", "50"),
        ("tick_size", "0.01"),
        ("price_offset", "10"),
        ("events", "10000"),
        ("burn_in", "0"),
        ("seed", "0"),
        ("stream", "0"),
        ("gzi", "false"),
        ("eta", "1"),
        ("mo_volume_law", "1"),
        ("volume_cap", "1000000"),
        ("out", "."),
    ] {
        cfg.default_to(k, v);
    }
    let n: usize = cfg.get("n")?;
    cfg.default_to("initial_bid", (n / 2).saturating_sub(1).max(1));
    cfg.default_to("initial_ask", n / 2 + 1);

    let grid = TickGrid::new(n, cfg.get("tick_size")?, cfg.get("price_offset")?)?;
    let spec = preset(&build_preset(&cfg)?, &grid)?;
    let mut sc = SimConfig::new(spec, grid.clone(), cfg.get("initial_bid")?, cfg.get("initial_ask")?);
    sc.max_events = cfg.get("events")?;
    sc.burn_in_events = cfg.get("burn_in")?;
    sc.seed = cfg.get("seed")?;
    sc.stream = cfg.get("stream")?;
    if cfg.get::<bool>("gzi")? {
        let mut g = GziConfig::unit(cfg.get("volume_cap")?);
        g.eta = cfg.get("eta")?;
        g.mo_volume_law = cfg.get_list("mo_volume_law")?;
        sc.gzi = Some(g);
    }
    let out = run_simulation(&sc)?;

    let dir: PathBuf = cfg.get("out")?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let quotes = quotes_from_history(&out.history, &grid);
    let trades = trades_from_history(&out.history, &grid);
    let qf = fs::File::create(dir.join("quotes.csv")).context("creating quotes.csv")?;
    write_quotes(BufWriter::new(qf), &quotes)?;
    let tf = fs::File::create(dir.join("trades.csv")).context("creating trades.csv")?;
    write_trades(BufWriter::new(tf), &trades)?;
    let manifest = Manifest {
        grid: GridInfo::of(&grid),
        events_simulated: out.events_simulated,
        event_counts: out.event_counts,
        quote_rows: quotes.len(),
        trade_rows: trades.len(),
        absorbed: out.absorbed,
    };
    write_report(&dir.join("manifest.json"), &Report::new("simulate", &cfg, manifest))?;
    if out.absorbed {
        anyhow::bail!("the chain was absorbed after {} events (total intensity zero)", out.events_simulated);
    }
    Ok(())
}

// ---------------------------------------------------------- shared input

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Directory with quotes.csv, trades.csv and optionally manifest.json.
    #[arg(long)]
    data: Option<PathBuf>,
    /// zi or gzi.
    #[arg(long)]
    mode: Option<String>,
    /// In-sample cap.
    #[arg(long)]
    cap: Option<usize>,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        flag(cfg, "data", &self.data.as_ref().map(|p| p.display().to_string()));
        flag(cfg, "mode", &self.mode);
        flag(cfg, "cap", &self.cap);
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleSummary {
    pub sessions: usize,
    pub available: usize,
    pub n_in: usize,
    pub n_out: usize,
    pub reordered_rows: usize,
    /// Share of ask-side trades matched to quote changes (GZI only).
    pub match_rate: Option<f64>,
}

struct Input {
    sessions: Vec<SessionData>,
    grid: TickGrid,
    reordered: usize,
}

fn data_defaults(cfg: &mut RunConfig) {
    for (k, v) in [
        ("data", "."),
        ("mode", "zi"),
        ("cap", "5000"),
        ("session_start", "09:40"),
        ("session_end", "15:30"),
        ("match_window_ns", "1000000000"),
        ("grid_margin", "64"),
    ] {
        cfg.default_to(k, v);
    }
}

fn window(cfg: &RunConfig) -> anyhow::Result<SessionWindow> {
    let start = parse_time_of_day(&cfg.get::<String>("session_start")?)?;
    let end = parse_time_of_day(&cfg.get::<String>("session_end")?)?;
    Ok(SessionWindow::new(start, end)?)
}

/// Grid from explicit settings, else the manifest next to the data, else
/// inferred from the quotes. The result is written back into `cfg`.
fn resolve_grid(cfg: &mut RunConfig, dir: &Path, quotes: &[QuoteRecord]) -> anyhow::Result<TickGrid> {
    let grid = if cfg.raw("grid_n").is_some() {
        TickGrid::new(cfg.get("grid_n")?, cfg.get("tick_size")?, cfg.get("price_offset")?)?
    } else if dir.join("manifest.json").exists() {
        let m = read_report(&dir.join("manifest.json"))?;
        let g: GridInfo = serde_json::from_value(m.result["grid"].clone()).context("manifest grid")?;
        TickGrid::new(g.n, g.tick_size, g.price_offset)?
    } else {
        cfg.default_to("tick_size", "0.01");
        infer_grid(quotes, cfg.get("tick_size")?, cfg.get("grid_margin")?)?
    };
    cfg.set("grid_n", grid.n());
    cfg.set("tick_size", grid.tick_size());
    cfg.set("price_offset", grid.price_offset());
    Ok(grid)
}

fn load_input(cfg: &mut RunConfig) -> anyhow::Result<Input> {
    let dir: PathBuf = cfg.get("data")?;
    let q = load_quotes(dir.join("quotes.csv"))?;
    let t = load_trades(dir.join("trades.csv"))?;
    let grid = resolve_grid(cfg, &dir, &q.records)?;
    let sessions = sessions(&q.records, &t.records, &window(cfg)?)?;
    Ok(Input { sessions, grid, reordered: q.reordered + t.reordered })
}

fn mode_of(cfg: &RunConfig) -> anyhow::Result<Mode> {
    Ok(cfg.get::<String>("mode")?.parse::<Mode>()?)
}

fn load_sample(cfg: &mut RunConfig) -> anyhow::Result<(Sample, SampleSummary)> {
    let input = load_input(cfg)?;
    let mode = mode_of(cfg)?;
    let (sample, reports) = build_sample(&input.sessions, &input.grid, mode, cfg.get("match_window_ns")?, cfg.get("cap")?)?;
    let summary = SampleSummary {
        sessions: sample.sessions.len(),
        available: sample.available,
        n_in: sample.n_in,
        n_out: sample.n_out,
        reordered_rows: input.reordered,
        match_rate: (mode == Mode::Gzi).then(|| overall_rate(&reports)),
    };
    tracing::info!(sessions = summary.sessions, available = sample.available, n_in = sample.n_in, n_out = sample.n_out, "sample built");
    if sample.is_insufficient() {
        return Err(LobError::InsufficientData(format!(
            "{} usable observations in {} sessions",
            sample.available, summary.sessions
        ))
        .into());
    }
    Ok((sample, summary))
}

fn overall_rate(reports: &[MatchReport]) -> f64 {
    let matched: usize = reports.iter().map(|r| r.matched.len()).sum();
    let total = matched + reports.iter().map(|r| r.unmatched_count).sum::<usize>();
    if total == 0 {
        0.0
    } else {
        matched as f64 / total as f64
    }
}

// ------------------------------------------------------ estimate / select

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// S, T1, T2 or T3 (estimate only).
    #[arg(long)]
    variant: Option<String>,
    /// Per-fit time limit in seconds; 0 stops before optimizing.
    #[arg(long)]
    time_limit: Option<f64>,
    /// GZI only: hold eta fixed.
    #[arg(long)]
    fix_eta: Option<f64>,
    /// Report path.
    #[arg(long, default_value = "fit_report.json")]
    output: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Timings {
    pub load_secs: f64,
    pub fit_secs: f64,
}

#[derive(Debug, Serialize)]
pub struct EstimateResult {
    pub sample: SampleSummary,
    pub fit: FitResult,
    pub timings: Timings,
}

#[derive(Debug, Serialize)]
pub struct SelectResult {
    pub sample: SampleSummary,
    pub selection: SelectionOutcome,
    pub timings: Timings,
}

fn fit_defaults(cfg: &mut RunConfig) {
    for (k, v) in [
        ("variant", "S"),
        ("param_map", "log"),
        ("fix_eta", "none"),
        ("max_iter", "500"),
        ("time_limit", "2500"),
        ("grad_tol", "0.001"),
        ("significance", "0.05"),
        ("global_time_limit", "2500"),
        ("retry_cap", "1000"),
    ] {
        cfg.default_to(k, v);
    }
}

fn fit_options(cfg: &RunConfig) -> anyhow::Result<FitOptions> {
    let map = match cfg.get::<String>("param_map")?.as_str() {
        "log" => ParamMap::Log,
        "softplus" => ParamMap::Softplus,
        other => return Err(input_err(format!("unknown param_map {other:?}"))),
    };
    Ok(FitOptions {
        map,
        fix_eta: cfg.get_opt("fix_eta")?,
        budget: OptBudget {
            max_iter: cfg.get("max_iter")?,
            time_limit_secs: cfg.get_opt("time_limit")?,
            grad_tol: cfg.get("grad_tol")?,
        },
        significance: cfg.get("significance")?,
    })
}

fn prepare_fit(mut cfg: RunConfig, a: &EstimateArgs) -> anyhow::Result<RunConfig> {
    a.data.apply(&mut cfg);
    flag(&mut cfg, "variant", &a.variant);
    flag(&mut cfg, "time_limit", &a.time_limit);
    flag(&mut cfg, "fix_eta", &a.fix_eta);
    data_defaults(&mut cfg);
    fit_defaults(&mut cfg);
    Ok(cfg)
}

pub fn estimate(cfg: RunConfig, a: &EstimateArgs, table: bool) -> anyhow::Result<()> {
    let mut cfg = prepare_fit(cfg, a)?;
    let t0 = Instant::now();
    let (sample, summary) = load_sample(&mut cfg)?;
    let load_secs = t0.elapsed().as_secs_f64();
    let variant: Variant = cfg.get("variant")?;
    let opts = fit_options(&cfg)?;
    let t1 = Instant::now();
    let f = fit(&sample, variant, mode_of(&cfg)?, None, &opts)?;
    let timings = Timings { load_secs, fit_secs: t1.elapsed().as_secs_f64() };
    if table {
        print!("{}", fit_table(&f));
    }
    let timed_out = f.timed_out;
    write_report(&a.output, &Report::new("estimate", &cfg, EstimateResult { sample: summary, fit: f, timings }))?;
    if timed_out {
        return Err(LobError::Timeout.into());
    }
    Ok(())
}

pub fn select(cfg: RunConfig, a: &EstimateArgs, table: bool) -> anyhow::Result<()> {
    let mut cfg = prepare_fit(cfg, a)?;
    let t0 = Instant::now();
    let (sample, summary) = load_sample(&mut cfg)?;
    let load_secs = t0.elapsed().as_secs_f64();
    let opts = SelectOptions {
        fit: fit_options(&cfg)?,
        global_secs: cfg.get_opt("global_time_limit")?,
        retry_cap: cfg.get("retry_cap")?,
    };
    let t1 = Instant::now();
    let sel = select_model(&sample, mode_of(&cfg)?, &opts)?;
    let timings = Timings { load_secs, fit_secs: t1.elapsed().as_secs_f64() };
    if table {
        print!("{}", selection_table(&sel));
    }
    let timed_out = sel.chosen.is_none() && sel.stopped_reason == StopReason::Timeout;
    write_report(&a.output, &Report::new("select", &cfg, SelectResult { sample: summary, selection: sel, timings }))?;
    if timed_out {
        return Err(LobError::Timeout.into());
    }
    Ok(())
}

// ---------------------------------------------------------------- predict

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Report written by `estimate` or `select`.
    #[arg(long)]
    fit: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Pairing key for `compare` (defaults to the data directory name).
    #[arg(long)]
    label: Option<String>,
    /// in_sample or full_sample: segment for the naive mean forecast.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long, default_value = "prediction_report.json")]
    output: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictResult {
    pub label: String,
    pub variant: Variant,
    pub mode: Mode,
    pub prediction: PredictionReport,
    pub filter: Option<FilterReport>,
}

fn fitted_params(report: &Report<serde_json::Value>) -> anyhow::Result<ModelParams> {
    let fit = match report.command.as_str() {
        "estimate" => report.result["fit"].clone(),
        "select" => {
            let sel = &report.result["selection"];
            let chosen = sel["chosen"].as_str().ok_or_else(|| input_err("selection report has no chosen variant"))?;
            sel["ladder"]
                .as_array()
                .and_then(|l| l.iter().find(|e| e["variant"] == chosen))
                .map(|e| e["fit"].clone())
                .ok_or_else(|| input_err(format!("chosen variant {chosen} missing from the ladder")))?
        }
        other => return Err(input_err(format!("expected an estimate or select report, got {other:?}"))),
    };
    serde_json::from_value(fit["params"].clone()).context("fitted parameters")
}

pub fn predict(user: RunConfig, a: &PredictArgs, table: bool) -> anyhow::Result<()> {
    let fit_report = read_report(&a.fit)?;
    let params = fitted_params(&fit_report)?;
    // sample settings come from the fit so the split is reproduced
    let mut cfg = RunConfig::new();
    for key in ["data", "mode", "cap", "session_start", "session_end", "match_window_ns", "grid_margin", "grid_n", "tick_size", "price_offset"] {
        if let Some(v) = fit_report.config.raw(key) {
            cfg.set(key, v);
        }
    }
    for (k, v) in user.iter() {
        cfg.set(k, v);
    }
    a.data.apply(&mut cfg);
    flag(&mut cfg, "label", &a.label);
    flag(&mut cfg, "basis", &a.basis);
    cfg.set("fit", a.fit.display().to_string());
    data_defaults(&mut cfg);
    cfg.default_to("basis", "in_sample");
    cfg.default_to("moment_order", "none");
    cfg.default_to("moment_cap", "none");
    let data: PathBuf = cfg.get("data")?;
    let default_label = fs::canonicalize(&data)
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| data.display().to_string());
    cfg.default_to("label", default_label);

    let basis = match cfg.get::<String>("basis")?.as_str() {
        "in_sample" => MeanBasis::InSample,
        "full_sample" => MeanBasis::FullSample,
        other => return Err(input_err(format!("unknown basis {other:?}"))),
    };
    let mode = mode_of(&cfg)?;
    let (mut sample, _) = load_sample(&mut cfg)?;
    let mut filter = None;
    if let (Some(k), Some(cap)) = (cfg.get_opt::<f64>("moment_order")?, cfg.get_opt::<f64>("moment_cap")?) {
        let (s, rep) = moment_cap_filter(&sample, &params, mode, k, cap)?;
        sample = s;
        filter = Some(rep);
    }
    let prediction = prediction_power(&sample, &params, mode, basis)?;
    if table {
        println!("P_m = {} over {} out-of-sample jumps", prediction.p_m, prediction.n_out);
    }
    let result = PredictResult { label: cfg.get("label")?, variant: params.variant, mode, prediction, filter };
    write_report(&a.output, &Report::new("predict", &cfg, result))
}

// ------------------------------------------------------------------ match

#[derive(Args, Debug)]
pub struct MatchArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// ask or bid.
    #[arg(long)]
    side: Option<String>,
    #[arg(long, default_value = "match_report.json")]
    output: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionMatch {
    pub day: i64,
    pub trades: usize,
    pub matched: usize,
    pub unmatched: usize,
    pub match_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchResult {
    pub side: Side,
    pub sessions: Vec<SessionMatch>,
    pub match_rate: f64,
}

pub fn match_cmd(mut cfg: RunConfig, a: &MatchArgs, table: bool) -> anyhow::Result<()> {
    flag(&mut cfg, "data", &a.data.as_ref().map(|p| p.display().to_string()));
    flag(&mut cfg, "side", &a.side);
    data_defaults(&mut cfg);
    cfg.default_to("side", "ask");
    let side = match cfg.get::<String>("side")?.as_str() {
        "ask" => Side::Ask,
        "bid" => Side::Bid,
        other => return Err(input_err(format!("unknown side {other:?}"))),
    };
    let input = load_input(&mut cfg)?;
    let window_ns: i64 = cfg.get("match_window_ns")?;
    let reports: Vec<MatchReport> = input
        .sessions
        .iter()
        .map(|s| match_trades(&s.quotes, &s.trades, input.grid.tick_size(), window_ns, side))
        .collect();
    let sessions: Vec<SessionMatch> = input
        .sessions
        .iter()
        .zip(&reports)
        .map(|(s, r)| SessionMatch {
            day: s.day,
            trades: s.trades.len(),
            matched: r.matched.len(),
            unmatched: r.unmatched_count,
            match_rate: r.match_rate,
        })
        .collect();
    let result = MatchResult { side, sessions, match_rate: overall_rate(&reports) };
    if table {
        for s in &result.sessions {
            println!("day {}: {} of {} matched ({:.3})", s.day, s.matched, s.matched + s.unmatched, s.match_rate);
        }
        println!("overall match rate {:.3}", result.match_rate);
    }
    write_report(&a.output, &Report::new("match", &cfg, result))
}

// ---------------------------------------------------------------- compare

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Prediction reports of the first model.
    #[arg(long, num_args = 1.., required = true)]
    x: Vec<PathBuf>,
    /// Prediction reports of the second model, paired with `x` by label.
    #[arg(long, num_args = 1.., required = true)]
    y: Vec<PathBuf>,
    #[arg(long, default_value = "wilcoxon_report.json")]
    output: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairedScore {
    pub label: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize)]
pub struct CompareResult {
    pub pairs: Vec<PairedScore>,
    /// Labels dropped because a score was not finite.
    pub dropped: Vec<String>,
    pub test: WilcoxonResult,
}

fn scores(paths: &[PathBuf]) -> anyhow::Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: Report<PredictResult> = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        if out.insert(r.result.label.clone(), r.result.prediction.p_m).is_some() {
            return Err(input_err(format!("duplicate label {:?} in {}", r.result.label, p.display())));
        }
    }
    Ok(out)
}

pub fn compare(mut cfg: RunConfig, a: &CompareArgs, table: bool) -> anyhow::Result<()> {
    let join = |v: &[PathBuf]| v.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
    cfg.set("x", join(&a.x));
    cfg.set("y", join(&a.y));
    cfg.default_to("min_pairs", "6");
    let xs = scores(&a.x)?;
    let ys = scores(&a.y)?;
    let kx: BTreeSet<&String> = xs.keys().collect();
    let ky: BTreeSet<&String> = ys.keys().collect();
    if kx != ky {
        let only_x: Vec<&&String> = kx.difference(&ky).collect();
        let only_y: Vec<&&String> = ky.difference(&kx).collect();
        return Err(input_err(format!("unpaired labels: only in x {only_x:?}, only in y {only_y:?}")));
    }
    let mut pairs = Vec::new();
    let mut dropped = Vec::new();
    for (label, &x) in &xs {
        let y = ys[label];
        if x.is_finite() && y.is_finite() {
            pairs.push(PairedScore { label: label.clone(), x, y });
        } else {
            dropped.push(label.clone());
        }
    }
    let min_pairs: usize = cfg.get("min_pairs")?;
    if pairs.len() < min_pairs {
        return Err(LobError::InsufficientData(format!("{} usable pairs, need {min_pairs}", pairs.len())).into());
    }
    let test = wilcoxon_signed_rank(&pairs.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>());
    if table {
        println!(
            "n = {}, W+ = {}, W- = {}, p = {:.4}, median x = {:.4}, median y = {:.4}",
            test.n, test.w_plus, test.w_minus, test.p_value, test.median_x, test.median_y
        );
    }
    write_report(&a.output, &Report::new("compare", &cfg, CompareResult { pairs, dropped, test }))
}
