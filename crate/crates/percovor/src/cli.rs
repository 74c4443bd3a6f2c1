//! Command line driver. Parses flags plus an optional flat `key = value`
//! config file (flags win), dispatches to one of the named experiments, and
//! writes CSV or JSON tables, a JSON summary with per-assertion results, and
//! a manifest listing every artifact with its content hash.
//!
//! Exit codes: 0 all assertions pass, 1 an assertion failed, 2 usage or
//! configuration error, 3 I/O failure. No artifact is written unless the
//! whole run succeeds.

use crate::error::Error;
use crate::gamma::{
    gamma_upper_experiment, lambda_scaling_experiment, GammaConfig, MRule, PolygonSet,
};
use crate::geom::{polygon_area, Point};
use crate::geometry::{build_tessellation, sample_poisson, Tessellation, Window};
use crate::metric::{estimate_tau, TauConfig, TauSample};
use crate::polyomino::{contour_decompose, polyomino_ratio_stats};
use crate::regular::{
    alpha_cluster, classify_blocks, classify_regular, channel_count, tau_alpha, ChannelRect,
};
use crate::spin::{scaled_energy, SpinConfig};
use crate::util::{coefficient_of_variation, linear_fit, mean, mix_seed, r_squared};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "percovor", version, about = "Poisson-Voronoi spin energies and first-passage surface tension experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    ///
    /// Experiments: tessellate, energy, tau, tau_alpha, channels, polyomino,
    /// decompose, gamma_upper, lambda_scaling, blocks.
    Run {
        experiment: String,
        /// Flat key = value config file; flags override its entries.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Poisson intensity; a comma list for lambda_scaling.
        #[arg(long)]
        intensity: Option<String>,
        /// Core half-width of the sampling window.
        #[arg(long)]
        half_width: Option<String>,
        /// Sampling buffer beyond the core; default 6/sqrt(intensity).
        #[arg(long)]
        buffer: Option<String>,
        /// Seed list "1,2,3", count "20" (seeds 0..20), or "base+count".
        #[arg(long)]
        seeds: Option<String>,
        /// Distance list for tau experiments; size list for polyomino.
        #[arg(long)]
        t: Option<String>,
        /// Direction count (evenly spread over 180 degrees) or degree list.
        #[arg(long)]
        dirs: Option<String>,
        /// Regularity parameter list.
        #[arg(long)]
        alpha: Option<String>,
        /// Contour-size exponent in (0, 1/2).
        #[arg(long)]
        gamma: Option<String>,
        /// Scale schedule; entries may be fractions like 1/25.
        #[arg(long)]
        eps: Option<String>,
        /// Boundary subdivision rule: "sqrt" or a fixed integer.
        #[arg(long)]
        m_rule: Option<String>,
        /// Block subsquare side; lattice unit for polyomino.
        #[arg(long = "L")]
        l: Option<String>,
        /// Block point cap; samples per size for polyomino.
        #[arg(long = "K")]
        k: Option<String>,
        /// Channel aspect parameter in (0, 1).
        #[arg(long)]
        delta: Option<String>,
        /// Channel length list.
        #[arg(long = "T")]
        t_len: Option<String>,
        /// Target shape for gamma_upper: "square" or "ngon64".
        #[arg(long)]
        target: Option<String>,
        /// Output directory; env PERCOVOR_OUT overrides.
        #[arg(long)]
        out: Option<String>,
        /// Worker threads; default: available parallelism.
        #[arg(long)]
        jobs: Option<String>,
        /// Table format: csv (default) or json.
        #[arg(long)]
        format: Option<String>,
    },
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        experiment,
        config,
        intensity,
        half_width,
        buffer,
        seeds,
        t,
        dirs,
        alpha,
        gamma,
        eps,
        m_rule,
        l,
        k,
        delta,
        t_len,
        target,
        out,
        jobs,
        format,
    } = cli.command;

    let mut map: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &config {
        match std::fs::read_to_string(path) {
            Ok(text) => {
                if let Err(msg) = parse_config_file(&text, &mut map) {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(3);
            }
        }
    }
    let flags = [
        ("intensity", intensity),
        ("half_width", half_width),
        ("buffer", buffer),
        ("seeds", seeds),
        ("t", t),
        ("dirs", dirs),
        ("alpha", alpha),
        ("gamma", gamma),
        ("eps", eps),
        ("m_rule", m_rule),
        ("L", l),
        ("K", k),
        ("delta", delta),
        ("T", t_len),
        ("target", target),
        ("out", out),
        ("jobs", jobs),
        ("format", format),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    }
    if let Ok(dir) = std::env::var("PERCOVOR_OUT") {
        map.insert("out".into(), dir);
    }
    match run_experiment(&experiment, &Params { map }) {
        Ok(code) => code,
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

enum RunError {
    Usage(String),
    Io(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) => RunError::Io(e.to_string()),
            other => RunError::Usage(other.to_string()),
        }
    }
}

fn parse_config_file(text: &str, map: &mut BTreeMap<String, String>) -> Result<(), String> {
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key = value", ln + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(())
}

const KNOWN_KEYS: &[&str] = &[
    "intensity", "half_width", "buffer", "seeds", "t", "dirs", "alpha", "gamma", "eps", "m_rule",
    "L", "K", "delta", "T", "target", "out", "jobs", "format", "adversarial", "rescaled",
    "tau_ref",
];

/// Merged configuration with typed accessors; every parse failure is a usage
/// error.
struct Params {
    map: BTreeMap<String, String>,
}

impl Params {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => parse_fraction(s)
                .ok_or_else(|| RunError::Usage(format!("bad value for {key}: {s}"))),
        }
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, RunError> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => parse_fraction(s)
                .map(Some)
                .ok_or_else(|| RunError::Usage(format!("bad value for {key}: {s}"))),
        }
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| RunError::Usage(format!("bad value for {key}: {s}"))),
        }
    }

    fn bool_or(&self, key: &str, default: bool) -> Result<bool, RunError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(s) => Err(RunError::Usage(format!("bad value for {key}: {s}"))),
        }
    }

    fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, RunError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| parse_fraction(p.trim()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| RunError::Usage(format!("bad list for {key}: {s}"))),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, RunError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| p.trim().parse().ok())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| RunError::Usage(format!("bad list for {key}: {s}"))),
        }
    }

    /// "1,2,3" is a seed list, "20" means seeds 0..20, "100+20" means
    /// 100..120.
    fn seeds(&self, default_count: u64) -> Result<Vec<u64>, RunError> {
        let raw = self.get("seeds").unwrap_or("");
        let bad = || RunError::Usage(format!("bad seeds: {raw}"));
        if raw.is_empty() {
            return Ok((0..default_count).collect());
        }
        if let Some((base, count)) = raw.split_once('+') {
            let base: u64 = base.trim().parse().map_err(|_| bad())?;
            let count: u64 = count.trim().parse().map_err(|_| bad())?;
            return Ok((base..base + count).collect());
        }
        if raw.contains(',') {
            return raw
                .split(',')
                .map(|p| p.trim().parse().ok())
                .collect::<Option<Vec<u64>>>()
                .ok_or_else(bad);
        }
        let count: u64 = raw.trim().parse().map_err(|_| bad())?;
        Ok((0..count).collect())
    }

    /// A bare integer is a direction count, evenly spread over 180 degrees;
    /// anything else is a degree list.
    fn directions(&self, default_count: usize) -> Result<Vec<f64>, RunError> {
        match self.get("dirs") {
            None => Ok(spread_directions(default_count)),
            Some(s) if !s.contains(',') && !s.contains('.') => {
                let n: usize = s
                    .trim()
                    .parse()
                    .map_err(|_| RunError::Usage(format!("bad dirs: {s}")))?;
                Ok(spread_directions(n))
            }
            Some(_) => self.f64_list_or("dirs", &[]),
        }
    }

    fn m_rule(&self) -> Result<MRule, RunError> {
        match self.get("m_rule") {
            None | Some("sqrt") => Ok(MRule::SqrtInv),
            Some(s) => s
                .parse()
                .map(MRule::Fixed)
                .map_err(|_| RunError::Usage(format!("bad m_rule: {s}"))),
        }
    }

    fn target(&self) -> Result<PolygonSet, RunError> {
        match self.get("target").unwrap_or("square") {
            "square" => Ok(PolygonSet::square(Point::new(0.0, 0.0), 1.0)?),
            "ngon64" => Ok(PolygonSet::regular_polygon(Point::new(0.0, 0.0), 64, 4.0)?),
            other => Err(RunError::Usage(format!("unknown target: {other}"))),
        }
    }

    fn digest(&self, experiment: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(experiment.as_bytes());
        hasher.update(b"\n");
        for (key, value) in &self.map {
            // the output directory does not change the results
            if key == "out" || key == "jobs" {
                continue;
            }
            hasher.update(format!("{key}={value}\n").as_bytes());
        }
        hex(&hasher.finalize())
    }

    fn validate_keys(&self) -> Result<(), RunError> {
        for key in self.map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(RunError::Usage(format!("unknown config key: {key}")));
            }
        }
        Ok(())
    }
}

fn spread_directions(n: usize) -> Vec<f64> {
    (0..n).map(|k| 180.0 * k as f64 / n.max(1) as f64).collect()
}

/// Accepts plain floats and fractions like "1/25".
fn parse_fraction(s: &str) -> Option<f64> {
    if let Some((num, den)) = s.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        return Some(num / den);
    }
    s.trim().parse().ok().filter(|v: &f64| v.is_finite())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A table is a header plus already-formatted field rows; the writer renders
/// it as CSV or as a JSON array of objects.
struct Table {
    name: String,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Table {
        Table {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> String {
        let mut s = String::from("[\n");
        for (i, row) in self.rows.iter().enumerate() {
            s.push('{');
            for (j, (key, value)) in self.header.iter().zip(row).enumerate() {
                if j > 0 {
                    s.push_str(", ");
                }
                let _ = write!(s, "\"{key}\": {}", json_value(value));
            }
            s.push('}');
            s.push_str(if i + 1 < self.rows.len() { ",\n" } else { "\n" });
        }
        s.push_str("]\n");
        s
    }
}

/// Bare numbers and booleans stay unquoted; everything else is a string.
fn json_value(v: &str) -> String {
    if v == "true" || v == "false" || v.parse::<f64>().is_ok_and(|x| x.is_finite()) {
        v.to_string()
    } else {
        format!("\"{v}\"")
    }
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    format_json: bool,
}

impl Artifacts {
    fn add_table(&mut self, table: &Table) {
        if self.format_json {
            self.files
                .push((format!("{}.json", table.name), table.to_json().into_bytes()));
        } else {
            self.files
                .push((format!("{}.csv", table.name), table.to_csv().into_bytes()));
        }
    }

    fn add_text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }
}

type Assertion = (String, bool);

fn assert_on(assertions: &mut Vec<Assertion>, name: &str, pass: bool) {
    assertions.push((name.to_string(), pass));
}

fn run_experiment(name: &str, params: &Params) -> Result<ExitCode, RunError> {
    params.validate_keys()?;
    if let Some(jobs) = params.get("jobs") {
        let n: usize = jobs
            .parse()
            .map_err(|_| RunError::Usage(format!("bad jobs: {jobs}")))?;
        // a pool may already exist when called twice in-process; that is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let start = std::time::Instant::now();
    let mut artifacts = Artifacts {
        files: Vec::new(),
        format_json: match params.get("format").unwrap_or("csv") {
            "csv" => false,
            "json" => true,
            other => return Err(RunError::Usage(format!("unknown format: {other}"))),
        },
    };
    let mut assertions: Vec<Assertion> = Vec::new();
    let mut extra_summary = String::new();

    match name {
        "tessellate" => exp_tessellate(params, &mut artifacts)?,
        "energy" => exp_energy(params, &mut artifacts, &mut assertions)?,
        "tau" => exp_tau(params, &mut artifacts, &mut assertions, &mut extra_summary)?,
        "tau_alpha" => exp_tau_alpha(params, &mut artifacts, &mut assertions, &mut extra_summary)?,
        "channels" => exp_channels(params, &mut artifacts, &mut assertions, &mut extra_summary)?,
        "polyomino" => exp_polyomino(params, &mut artifacts, &mut assertions, &mut extra_summary)?,
        "decompose" => exp_decompose(params, &mut artifacts, &mut assertions)?,
        "gamma_upper" => exp_gamma_upper(params, &mut artifacts, &mut assertions, &mut extra_summary)?,
        "lambda_scaling" => exp_lambda_scaling(params, &mut artifacts, &mut assertions)?,
        "blocks" => exp_blocks(params, &mut artifacts, &mut assertions)?,
        other => return Err(RunError::Usage(format!("unknown experiment: {other}"))),
    }

    let digest = params.digest(name);
    let mut summary = String::from("{\n");
    let _ = write!(summary, "\"name\": \"{name}\",\n\"config_digest\": \"{digest}\",\n");
    summary.push_str(&extra_summary);
    summary.push_str("\"assertions\": [\n");
    for (i, (aname, pass)) in assertions.iter().enumerate() {
        let _ = write!(
            summary,
            "{{\"name\": \"{aname}\", \"pass\": {pass}}}{}\n",
            if i + 1 < assertions.len() { "," } else { "" }
        );
    }
    summary.push_str("]\n}\n");
    artifacts.add_text("summary.json", summary);

    let out_dir = PathBuf::from(params.get("out").unwrap_or("percovor_out"));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| RunError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut manifest = String::from("{\n");
    let _ = write!(
        manifest,
        "\"experiment\": \"{name}\",\n\"config_digest\": \"{digest}\",\n\"library_version\": \"{}\",\n\"wall_time_secs\": {:.3},\n\"files\": [\n",
        env!("CARGO_PKG_VERSION"),
        start.elapsed().as_secs_f64()
    );
    for (i, (fname, bytes)) in artifacts.files.iter().enumerate() {
        let path = out_dir.join(fname);
        std::fs::write(&path, bytes)
            .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let _ = write!(
            manifest,
            "{{\"name\": \"{fname}\", \"sha256\": \"{}\"}}{}\n",
            hex(&hasher.finalize()),
            if i + 1 < artifacts.files.len() { "," } else { "" }
        );
    }
    manifest.push_str("]\n}\n");
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, manifest)
        .map_err(|e| RunError::Io(format!("cannot write {}: {e}", path.display())))?;

    let failed: Vec<&str> = assertions
        .iter()
        .filter(|(_, pass)| !pass)
        .map(|(n, _)| n.as_str())
        .collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failed {
            eprintln!("assertion failed: {f}");
        }
        Ok(ExitCode::from(1))
    }
}

fn window_from(params: &Params, default_half_width: f64, intensity: f64) -> Result<Window, RunError> {
    let hw = params.f64_or("half_width", default_half_width)?;
    let buffer = params
        .f64_opt("buffer")?
        .unwrap_or_else(|| Window::default_buffer(intensity));
    Ok(Window::new(Point::new(0.0, 0.0), hw, buffer)?)
}

fn fresh_tessellation(
    intensity: f64,
    window: Window,
    sub_seed: u64,
) -> Result<Tessellation, RunError> {
    Ok(build_tessellation(&sample_poisson(intensity, window, sub_seed)?)?)
}

fn exp_tessellate(params: &Params, artifacts: &mut Artifacts) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    let window = window_from(params, 20.0, intensity)?;
    for seed in params.seeds(1)? {
        let tess = fresh_tessellation(intensity, window, seed)?;
        artifacts.add_text(
            &format!("tessellation_{seed}.json"),
            crate::tess_io::to_json(&tess),
        );
    }
    Ok(())
}

fn exp_energy(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    let eps_list = params.f64_list_or("eps", &[0.1])?;
    let window = window_from(params, 30.0, intensity)?;
    let mut table = Table::new("energy", &["seed", "epsilon", "energy", "boundary_edge_count"]);
    let mut all_nonnegative = true;
    for seed in params.seeds(5)? {
        let tess = fresh_tessellation(intensity, window, mix_seed(&[seed, 1]))?;
        for &eps in &eps_list {
            let spin = SpinConfig::random(&tess, eps, mix_seed(&[seed, 2]))?;
            let result = scaled_energy(&tess, &spin, None)?;
            all_nonnegative &= result.energy >= 0.0;
            table.push(vec![
                seed.to_string(),
                eps.to_string(),
                result.energy.to_string(),
                result.boundary_edges.len().to_string(),
            ]);
        }
    }
    artifacts.add_table(&table);
    assert_on(assertions, "energy_nonnegative", all_nonnegative);
    Ok(())
}

fn tau_table(name: &str, experiment: &str, samples: &[TauSample]) -> Table {
    let mut table = Table::new(
        name,
        &[
            "experiment", "seed", "intensity", "alpha", "t", "dir_deg", "offset_x", "offset_y",
            "hops", "tau_sample",
        ],
    );
    for s in samples {
        table.push(vec![
            experiment.to_string(),
            s.seed.to_string(),
            s.intensity.to_string(),
            s.alpha.to_string(),
            s.t.to_string(),
            s.dir_deg.to_string(),
            s.offset.x.to_string(),
            s.offset.y.to_string(),
            s.hops.to_string(),
            s.tau_sample.to_string(),
        ]);
    }
    table
}

fn base_tau_config(
    params: &Params,
    default_dirs: usize,
    intensity: f64,
) -> Result<TauConfig, RunError> {
    let ts = params.f64_list_or("t", &[50.0, 100.0])?;
    let dirs = params.directions(default_dirs)?;
    let seeds = params.seeds(5)?;
    let mut cfg = TauConfig::new(intensity, ts, dirs, seeds);
    cfg.buffer = params.f64_opt("buffer")?;
    Ok(cfg)
}

/// Coefficient of variation of the zero-offset samples at one distance.
fn cv_at(samples: &[TauSample], t: f64) -> f64 {
    let vals: Vec<f64> = samples
        .iter()
        .filter(|s| s.t == t && s.offset == Point::new(0.0, 0.0))
        .map(|s| s.tau_sample)
        .collect();
    coefficient_of_variation(&vals)
}

fn exp_tau(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
    extra: &mut String,
) -> Result<(), RunError> {
    let cfg = base_tau_config(params, 4, params.f64_or("intensity", 1.0)?)?;
    let est = estimate_tau(&cfg, None)?;
    artifacts.add_table(&tau_table("tau", "tau", &est.samples));
    let _ = write!(
        extra,
        "\"tau_hat\": {}, \"ci_halfwidth\": {}, \"n_samples\": {},\n\"per_direction\": [{}],\n",
        est.tau_hat,
        est.ci_halfwidth,
        est.n_samples,
        est.per_direction
            .iter()
            .map(|(d, m)| format!("[{d}, {m}]"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    assert_on(assertions, "tau_positive", est.tau_hat > 0.0);
    let mut ts = cfg.ts.clone();
    ts.sort_by(f64::total_cmp);
    if ts.len() >= 2 {
        let first = cv_at(&est.samples, ts[0]);
        let last = cv_at(&est.samples, ts[ts.len() - 1]);
        assert_on(assertions, "cv_improves_with_t", last <= first);
    }
    Ok(())
}

fn exp_tau_alpha(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
    extra: &mut String,
) -> Result<(), RunError> {
    let mut alphas = params.f64_list_or("alpha", &[0.05])?;
    alphas.sort_by(|a, b| b.total_cmp(a)); // strictest first
    let mut table: Option<Table> = None;
    let mut per_alpha = Vec::new();
    for &alpha in &alphas {
        let mut cfg = base_tau_config(params, 4, params.f64_or("intensity", 1.0)?)?;
        cfg.alpha = alpha;
        let result = tau_alpha(&cfg)?;
        let t = tau_table("tau_alpha", "tau_alpha", &result.estimate.samples);
        match &mut table {
            None => table = Some(t),
            Some(existing) => existing.rows.extend(t.rows),
        }
        per_alpha.push((alpha, result));
    }
    artifacts.add_table(table.as_ref().unwrap());
    let entries: Vec<String> = per_alpha
        .iter()
        .map(|(alpha, r)| {
            format!(
                "{{\"alpha\": {alpha}, \"tau_hat\": {}, \"ci_halfwidth\": {}, \"attempts\": {}, \"rejections\": {}}}",
                r.estimate.tau_hat, r.estimate.ci_halfwidth, r.attempts, r.rejections
            )
        })
        .collect();
    let _ = write!(extra, "\"per_alpha\": [{}],\n", entries.join(", "));
    // relaxing alpha (smaller) only widens the cluster, so tau should not rise
    let monotone = per_alpha.windows(2).all(|w| {
        let (stricter, looser) = (&w[0].1.estimate, &w[1].1.estimate);
        looser.tau_hat <= stricter.tau_hat + stricter.ci_halfwidth + looser.ci_halfwidth
    });
    assert_on(assertions, "tau_monotone_in_alpha", monotone);
    Ok(())
}

fn exp_channels(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
    extra: &mut String,
) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    let alpha = params.f64_list_or("alpha", &[0.05])?[0];
    let delta = params.f64_or("delta", 0.2)?;
    let t_lens = params.f64_list_or("T", &[25.0, 50.0, 100.0])?;
    let max_t = t_lens.iter().cloned().fold(0.0f64, f64::max);
    let window = window_from(params, 0.75 * max_t + 5.0, intensity)?;
    let seeds = params.seeds(5)?;

    let mut table = Table::new("channels", &["seed", "alpha", "delta", "T", "count"]);
    let mut counts_by_t: Vec<Vec<f64>> = vec![Vec::new(); t_lens.len()];
    let mut fractions = Vec::new();
    let mut spans = 0usize;
    let mut hole_means = Vec::new();
    for &seed in &seeds {
        let tess = fresh_tessellation(intensity, window, mix_seed(&[seed, 7]))?;
        let report = classify_regular(&tess, alpha)?;
        let cluster = alpha_cluster(&report, &tess)?;
        fractions.push(report.regular_fraction());
        spans += cluster.spanning as usize;
        hole_means.push(if cluster.holes.is_empty() {
            0.0
        } else {
            mean(&cluster.holes.iter().map(|h| h.size as f64).collect::<Vec<_>>())
        });
        for (ti, &t_len) in t_lens.iter().enumerate() {
            let rect = ChannelRect {
                center: Point::new(0.0, 0.0),
                nu_deg: 0.0,
                t_len,
                delta,
            };
            let count = channel_count(&cluster, &tess, &rect)?.count;
            counts_by_t[ti].push(count as f64);
            table.push(vec![
                seed.to_string(),
                alpha.to_string(),
                delta.to_string(),
                t_len.to_string(),
                count.to_string(),
            ]);
        }
    }
    artifacts.add_table(&table);

    let mean_counts: Vec<f64> = counts_by_t.iter().map(|c| mean(c)).collect();
    let (slope, _) = linear_fit(&t_lens, &mean_counts);
    let r2 = r_squared(&t_lens, &mean_counts);
    let mut summary = Table::new(
        "regular_summary",
        &["alpha", "regular_fraction", "spanning_rate", "mean_hole", "channel_slope"],
    );
    summary.push(vec![
        alpha.to_string(),
        mean(&fractions).to_string(),
        (spans as f64 / seeds.len() as f64).to_string(),
        mean(&hole_means).to_string(),
        slope.to_string(),
    ]);
    artifacts.add_table(&summary);
    let _ = write!(extra, "\"channel_slope\": {slope}, \"r_squared\": {r2},\n");
    assert_on(assertions, "channel_slope_positive", slope > 0.0);
    Ok(())
}

fn exp_polyomino(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
    extra: &mut String,
) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    let sizes = params.usize_list_or("T", &[100, 1000])?;
    let per_size = params.usize_or("K", 3)?;
    let unit = params.f64_or("L", 1.0)?;
    let adversarial = params.bool_or("adversarial", false)?;
    let max_size = sizes.iter().cloned().max().unwrap_or(100);
    let default_hw = (max_size as f64 / intensity).sqrt() * 0.85 + 15.0;
    let window = window_from(params, default_hw, intensity)?;

    let mut table = Table::new(
        "polyomino",
        &["seed", "size", "n_cells", "footprint", "ratio_over", "ratio_under"],
    );
    let mut max_per_size: BTreeMap<usize, f64> = BTreeMap::new();
    let mut all_at_least_one = true;
    for seed in params.seeds(3)? {
        let tess = fresh_tessellation(intensity, window, mix_seed(&[seed, 11]))?;
        let stats = polyomino_ratio_stats(&tess, &sizes, per_size, unit, seed, adversarial)?;
        for s in &stats.samples {
            all_at_least_one &= s.ratio_over >= 1.0 || s.ratio_under >= 1.0;
            let worst = s.ratio_over.max(s.ratio_under);
            let entry = max_per_size.entry(s.size).or_insert(0.0);
            *entry = entry.max(worst);
            table.push(vec![
                seed.to_string(),
                s.size.to_string(),
                s.n_cells.to_string(),
                s.footprint.to_string(),
                s.ratio_over.to_string(),
                s.ratio_under.to_string(),
            ]);
        }
    }
    artifacts.add_table(&table);
    let entries: Vec<String> = max_per_size
        .iter()
        .map(|(size, c)| format!("[{size}, {c}]"))
        .collect();
    let _ = write!(extra, "\"max_ratio_per_size\": [{}],\n", entries.join(", "));
    assert_on(assertions, "ratios_at_least_one", all_at_least_one);
    Ok(())
}

fn exp_decompose(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    let eps_list = params.f64_list_or("eps", &[1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0])?;
    let gamma = params.f64_or("gamma", 0.25)?;
    let window = window_from(params, 40.0, intensity)?;
    let seeds = params.seeds(5)?;

    let mut table = Table::new(
        "decompose",
        &[
            "seed", "epsilon", "gamma", "n_plus", "n_minus", "area_Bp", "area_Bpp",
            "perimeter_Aeps", "energy",
        ],
    );
    let mut shrinking = 0usize;
    for &seed in &seeds {
        let tess = fresh_tessellation(intensity, window, mix_seed(&[seed, 13]))?;
        let base = SpinConfig::random(&tess, 1.0, mix_seed(&[seed, 14]))?;
        let mut b_areas = Vec::new();
        for &eps in &eps_list {
            let spin = SpinConfig::new(base.values.clone(), eps)?;
            let dec = contour_decompose(&tess, &spin, gamma)?;
            // the + 0.0 canonicalizes the -0.0 that empty float sums produce
            let cell_area = |sites: &[u32]| {
                eps * eps
                    * sites
                        .iter()
                        .map(|&s| polygon_area(&tess.cells[s as usize].polygon))
                        .sum::<f64>()
                    + 0.0
            };
            let area_bp = cell_area(&dec.b_prime);
            let area_bpp = cell_area(&dec.b_dprime);
            b_areas.push(area_bp + area_bpp);
            let energy = scaled_energy(&tess, &spin, None)?.energy;
            table.push(vec![
                seed.to_string(),
                eps.to_string(),
                gamma.to_string(),
                dec.contours_plus.len().to_string(),
                dec.contours_minus.len().to_string(),
                area_bp.to_string(),
                area_bpp.to_string(),
                dec.perimeter.to_string(),
                energy.to_string(),
            ]);
        }
        if b_areas.windows(2).all(|w| w[1] <= w[0]) {
            shrinking += 1;
        }
    }
    artifacts.add_table(&table);
    if eps_list.len() >= 2 {
        assert_on(
            assertions,
            "b_area_shrinks_majority",
            shrinking * 2 >= seeds.len(),
        );
    }
    Ok(())
}

fn exp_gamma_upper(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
    extra: &mut String,
) -> Result<(), RunError> {
    let cfg = GammaConfig {
        target: params.target()?,
        intensity: params.f64_or("intensity", 1.0)?,
        eps_schedule: params.f64_list_or("eps", &[1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0])?,
        m_rule: params.m_rule()?,
        seeds: params.seeds(5)?,
    };
    let result = gamma_upper_experiment(&cfg)?;
    let mut table = Table::new(
        "gamma_upper",
        &["seed", "epsilon", "m", "energy", "ratio", "hausdorff_gap", "symdiff"],
    );
    let mut all_covered = true;
    for row in &result.rows {
        all_covered &= row.boundary_in_paths;
        table.push(vec![
            row.seed.to_string(),
            row.epsilon.to_string(),
            row.m.to_string(),
            row.energy.to_string(),
            row.ratio.to_string(),
            row.hausdorff_gap.to_string(),
            row.symdiff.to_string(),
        ]);
    }
    artifacts.add_table(&table);
    let finest = cfg.eps_schedule[cfg.eps_schedule.len() - 1];
    let finest_ratios: Vec<f64> = result
        .rows
        .iter()
        .filter(|r| r.epsilon == finest)
        .map(|r| r.ratio)
        .collect();
    let ratio_mean = mean(&finest_ratios);
    let _ = write!(
        extra,
        "\"target_perimeter\": {}, \"final_ratio_mean\": {ratio_mean},\n",
        result.target_perimeter
    );
    assert_on(assertions, "paths_cover_boundary", all_covered);
    if let Some(tau_ref) = params.f64_opt("tau_ref")? {
        let _ = write!(extra, "\"tau_hat_ref\": {tau_ref},\n");
        assert_on(
            assertions,
            "ratio_matches_tau_ref",
            (ratio_mean / tau_ref - 1.0).abs() <= 0.1,
        );
    }
    Ok(())
}

fn exp_lambda_scaling(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
) -> Result<(), RunError> {
    let lambdas = params.f64_list_or("intensity", &[1.0, 4.0])?;
    let base = base_tau_config(params, 4, lambdas[0])?;
    let rescaled = params.bool_or("rescaled", false)?;
    let rows = lambda_scaling_experiment(&lambdas, &base, rescaled)?;
    let mut table = Table::new(
        "lambda_scaling",
        &["lambda", "route", "tau_hat", "ci_halfwidth", "ratio", "sqrt_lambda"],
    );
    for row in &rows {
        table.push(vec![
            row.lambda.to_string(),
            row.route.to_string(),
            row.tau_hat.to_string(),
            row.ci_halfwidth.to_string(),
            row.ratio.to_string(),
            row.sqrt_lambda.to_string(),
        ]);
    }
    artifacts.add_table(&table);
    let direct: Vec<f64> = rows
        .iter()
        .filter(|r| r.route == "direct")
        .map(|r| r.tau_hat)
        .collect();
    let sorted_lambdas = lambdas.windows(2).all(|w| w[1] > w[0]);
    assert_on(
        assertions,
        "tau_grows_with_lambda",
        !sorted_lambdas || direct.windows(2).all(|w| w[1] >= w[0]),
    );
    Ok(())
}

fn exp_blocks(
    params: &Params,
    artifacts: &mut Artifacts,
    assertions: &mut Vec<Assertion>,
) -> Result<(), RunError> {
    let intensity = params.f64_or("intensity", 1.0)?;
    // a block of side 10L must have every L-subsquare occupied (c1), at most
    // K points (c2) and no pair within 2 alpha (c3); the defaults make all
    // three plausible at intensity 1
    let l = params.f64_or("L", 2.5)?;
    let k = params.usize_or("K", 700)?;
    let alpha = params.f64_list_or("alpha", &[0.005])?[0];
    let window = window_from(params, 40.0, intensity)?;
    let mut table = Table::new(
        "blocks",
        &["seed", "L", "K", "alpha", "blocks", "open_fraction"],
    );
    let mut in_range = true;
    for seed in params.seeds(3)? {
        let points = sample_poisson(intensity, window, mix_seed(&[seed, 17]))?;
        let grid = classify_blocks(&points, l, k, alpha)?;
        in_range &= (0.0..=1.0).contains(&grid.open_fraction);
        table.push(vec![
            seed.to_string(),
            l.to_string(),
            k.to_string(),
            alpha.to_string(),
            grid.blocks.iter().filter(|b| !b.skipped).count().to_string(),
            grid.open_fraction.to_string(),
        ]);

        // boolean matrix over the index range, rows by jy then jx ascending
        let active: Vec<_> = grid.blocks.iter().filter(|b| !b.skipped).collect();
        let (jx_min, jx_max) = match active.iter().map(|b| b.j.0).minmax() {
            Some(p) => p,
            None => (0, -1),
        };
        let (jy_min, jy_max) = match active.iter().map(|b| b.j.1).minmax() {
            Some(p) => p,
            None => (0, -1),
        };
        let mut open = std::collections::HashSet::new();
        for b in &active {
            if b.open {
                open.insert(b.j);
            }
        }
        let mut dump = String::from("{\n");
        let _ = write!(
            dump,
            "\"L\": {l}, \"K\": {k}, \"alpha\": {alpha}, \"seed\": {seed},\n\"jx_range\": [{jx_min}, {jx_max}], \"jy_range\": [{jy_min}, {jy_max}],\n\"open\": [\n"
        );
        for jy in jy_min..=jy_max {
            let row: Vec<&str> = (jx_min..=jx_max)
                .map(|jx| if open.contains(&(jx, jy)) { "true" } else { "false" })
                .collect();
            let _ = write!(
                dump,
                "[{}]{}\n",
                row.join(", "),
                if jy < jy_max { "," } else { "" }
            );
        }
        dump.push_str("]\n}\n");
        artifacts.add_text(&format!("blocks_{seed}.json"), dump);
    }
    artifacts.add_table(&table);
    assert_on(assertions, "open_fraction_in_range", in_range);
    Ok(())
}

trait MinMax<T> {
    fn minmax(self) -> Option<(T, T)>;
}

impl<I: Iterator<Item = i64>> MinMax<i64> for I {
    fn minmax(self) -> Option<(i64, i64)> {
        let mut out: Option<(i64, i64)> = None;
        for v in self {
            out = Some(match out {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            });
        }
        out
    }
}
