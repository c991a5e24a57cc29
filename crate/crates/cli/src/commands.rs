//! The `simulate-paths`, `yield-curves` and `option-surface` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use randmix_core::{
    option_surface, sample_states, simulate_paths, value_states, Prior, RngStream,
    TermStructureModel, TimeGrid,
};
use serde::Serialize;

use crate::config::{BuiltModel, Format, ScenarioConfig};
use crate::output::{write_csv, write_json, Cell};
use crate::with_model;

/// Sub-stream ids of the run seed. Each command draws from its own stream so
/// that changing one output never perturbs another.
pub const STREAM_PATHS: u64 = 1;
pub const STREAM_STATES: u64 = 2;
pub const STREAM_OPTION_STATE: u64 = 3;
pub const STREAM_OPTION_PATHS: u64 = 4;
pub const STREAM_VALIDATE: u64 = 5;

/// Command-line overrides merged over the `[run]` and `[output]` tables.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config_path: PathBuf,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub paths: Option<usize>,
}

impl RunOptions {
    pub fn resolve(
        cfg: &ScenarioConfig,
        config_path: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
        format: Option<Format>,
        paths: Option<usize>,
    ) -> Self {
        Self {
            config_path: config_path.to_path_buf(),
            seed: seed.unwrap_or(cfg.run.seed),
            out: out.unwrap_or_else(|| cfg.output.directory.clone()),
            format: format.unwrap_or(cfg.output.format),
            paths,
        }
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    config: String,
    description: &'a str,
    model: &'static str,
    seed: u64,
    streams: BTreeMap<&'static str, u64>,
    files: Vec<String>,
    version: &'static str,
}

fn write_metadata(
    cfg: &ScenarioConfig,
    model: &BuiltModel,
    opts: &RunOptions,
    command: &str,
    streams: &[(&'static str, u64)],
    files: &[PathBuf],
) -> Result<PathBuf> {
    let meta = Metadata {
        command,
        config: opts.config_path.display().to_string(),
        description: &cfg.description,
        model: model.kind(),
        seed: opts.seed,
        streams: streams.iter().copied().collect(),
        files: files
            .iter()
            .map(|f| {
                f.file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned()
            })
            .collect(),
        version: env!("CARGO_PKG_VERSION"),
    };
    let path = opts.file("metadata.json");
    write_json(&path, &meta)?;
    Ok(path)
}

/// Values along simulated paths, indexed `[time][path]`.
struct PathTable {
    name: String,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct PathsJson<'a> {
    t: &'a [f64],
    bond_maturity: f64,
    hidden: Vec<f64>,
    /// `series[name][path][time]`
    series: BTreeMap<&'a str, Vec<Vec<f64>>>,
}

/// Simulates driver, information, short rate, bond price and pricing kernel
/// paths. Returns the files written.
pub fn simulate_paths_cmd(
    cfg: &ScenarioConfig,
    model: &BuiltModel,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>> {
    opts.prepare()?;
    let mut files = with_model!(model, m => simulate_paths_for(m, cfg, opts))?;
    if cfg.run.write_mixer {
        files.push(write_mixer(cfg, opts)?);
    }
    files.push(write_metadata(
        cfg,
        model,
        opts,
        "simulate-paths",
        &[("paths", STREAM_PATHS)],
        &files,
    )?);
    Ok(files)
}

fn simulate_paths_for<M: TermStructureModel>(
    m: &M,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>> {
    let run = &cfg.run;
    let n = opts.paths.unwrap_or(run.n_paths);
    ensure!(n > 0, "need at least one path");
    let grid = TimeGrid::uniform(run.horizon(), run.dt)?;
    let paths = simulate_paths(m, &grid, run.dt, n, RngStream::new(opts.seed, STREAM_PATHS))?;
    let times = grid.times();

    let driver_names = cfg.driver_names();
    let mut tables: Vec<PathTable> = driver_names
        .iter()
        .cloned()
        .chain(["I", "r", "P", "pi"].map(String::from))
        .map(|name| PathTable {
            name,
            values: Vec::with_capacity(times.len()),
        })
        .collect();
    let nd = driver_names.len();
    for (k, &t) in times.iter().enumerate() {
        let states: Vec<M::State> = paths.iter().map(|p| p.states[k].clone()).collect();
        let vals = value_states(m, t, &states, &[run.bond_maturity])?;
        let drivers: Vec<Vec<f64>> = states.iter().map(|s| m.driver_values(s)).collect();
        for (j, table) in tables.iter_mut().take(nd).enumerate() {
            table.values.push(drivers.iter().map(|d| d[j]).collect());
        }
        tables[nd]
            .values
            .push(states.iter().map(|s| m.info_value(s)).collect());
        tables[nd + 1]
            .values
            .push(vals.iter().map(|v| v.short_rate).collect());
        tables[nd + 2]
            .values
            .push(vals.iter().map(|v| v.bond(0)).collect());
        tables[nd + 3]
            .values
            .push(vals.iter().map(|v| v.kernel).collect());
    }
    let hidden: Vec<f64> = paths.iter().map(|p| p.x).collect();

    let mut files = Vec::new();
    match opts.format {
        Format::Csv => {
            let header: Vec<String> = std::iter::once("t".to_string())
                .chain((0..n).map(|i| format!("path_{i}")))
                .collect();
            for table in &tables {
                let path = opts.file(&format!("{}.csv", table.name));
                let rows = times.iter().zip(&table.values).map(|(&t, row)| {
                    std::iter::once(Cell::from(t)).chain(row.iter().map(|&v| Cell::from(v)))
                });
                write_csv(&path, &header, rows)?;
                files.push(path);
            }
            let path = opts.file("hidden.csv");
            let header = ["path_id".to_string(), "x".to_string()];
            write_csv(
                &path,
                &header,
                hidden
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| [Cell::from(i), Cell::from(x)]),
            )?;
            files.push(path);
        }
        Format::Json => {
            let series = tables
                .iter()
                .map(|table| {
                    let by_path = (0..n)
                        .map(|i| table.values.iter().map(|row| row[i]).collect())
                        .collect();
                    (table.name.as_str(), by_path)
                })
                .collect();
            let path = opts.file("paths.json");
            write_json(
                &path,
                &PathsJson {
                    t: times,
                    bond_maturity: run.bond_maturity,
                    hidden,
                    series,
                },
            )?;
            files.push(path);
        }
    }
    Ok(files)
}

/// Points at which the mixer is tabulated: the atoms of a discrete prior, or
/// five evenly spaced points of a uniform one.
fn mixer_points(prior: &Prior) -> Vec<f64> {
    match prior {
        Prior::Discrete { points, .. } => points.clone(),
        Prior::Uniform { a, b } => (0..5).map(|i| a + (b - a) * i as f64 / 4.0).collect(),
    }
}

#[derive(Serialize)]
struct MixerJson {
    u: Vec<f64>,
    x: Vec<f64>,
    /// `h[k][i] = h(u_i, x_k)`
    h: Vec<Vec<f64>>,
}

fn write_mixer(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<PathBuf> {
    let mixer = cfg.primary_mixer();
    let xs = mixer_points(cfg.prior());
    let horizon = cfg.run.horizon();
    let steps = (horizon / 0.05).round().max(1.0) as usize;
    let us: Vec<f64> = (0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect();
    match opts.format {
        Format::Csv => {
            let path = opts.file("mixer.csv");
            let header: Vec<String> = std::iter::once("u".to_string())
                .chain(xs.iter().map(|x| format!("x={x}")))
                .collect();
            let rows = us.iter().map(|&u| {
                std::iter::once(Cell::from(u))
                    .chain(xs.iter().map(move |&x| Cell::from(mixer.evaluate(u, x))))
            });
            write_csv(&path, &header, rows)?;
            Ok(path)
        }
        Format::Json => {
            let path = opts.file("mixer.json");
            let h = xs
                .iter()
                .map(|&x| us.iter().map(|&u| mixer.evaluate(u, x)).collect())
                .collect();
            write_json(&path, &MixerJson { u: us, x: xs, h })?;
            Ok(path)
        }
    }
}

/// One row of `curves.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub t: f64,
    pub tau: f64,
    #[serde(rename = "P")]
    pub price: f64,
    #[serde(rename = "Y")]
    pub yield_: f64,
    pub path_id: usize,
}

/// Bond and yield curves at each valuation time on `n` simulated paths. The
/// same path id refers to the same trajectory at every valuation time.
pub fn curve_rows<M: TermStructureModel>(
    m: &M,
    valuation_times: &[f64],
    tenors: &[f64],
    n: usize,
    dt: f64,
    stream: RngStream,
) -> Result<Vec<CurveRow>> {
    ensure!(n > 0, "need at least one path");
    ensure!(
        !valuation_times.is_empty() && !tenors.is_empty(),
        "need valuation times and tenors"
    );
    let mut vts = valuation_times.to_vec();
    vts.sort_by(f64::total_cmp);
    vts.dedup();
    let last = *vts.last().unwrap();
    let grid = TimeGrid::uniform_with_marks(last.max(dt), dt, &vts)?;
    let paths = simulate_paths(m, &grid, dt, n, stream)?;
    let mut rows = Vec::with_capacity(vts.len() * tenors.len() * n);
    for &t in &vts {
        let k = grid
            .times()
            .iter()
            .position(|&g| (g - t).abs() < 1e-12)
            .expect("valuation times are grid points");
        let states: Vec<M::State> = paths.iter().map(|p| p.states[k].clone()).collect();
        let maturities: Vec<f64> = tenors.iter().map(|tau| t + tau).collect();
        let vals = value_states(m, t, &states, &maturities)?;
        for (path_id, v) in vals.iter().enumerate() {
            for (i, &tau) in tenors.iter().enumerate() {
                let price = v.bond(i);
                rows.push(CurveRow {
                    t,
                    tau,
                    price,
                    yield_: -price.ln() / tau,
                    path_id,
                });
            }
        }
    }
    Ok(rows)
}

pub fn yield_curves_cmd(
    cfg: &ScenarioConfig,
    model: &BuiltModel,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>> {
    opts.prepare()?;
    let run = &cfg.run;
    let n = opts.paths.unwrap_or(run.n_states);
    let stream = RngStream::new(opts.seed, STREAM_STATES);
    let rows = with_model!(model, m => curve_rows(m, &run.valuation_times, &run.tenors, n, run.dt, stream))?;
    let path = match opts.format {
        Format::Csv => {
            let path = opts.file("curves.csv");
            let header = ["t", "tau", "P", "Y", "path_id"].map(String::from);
            write_csv(
                &path,
                &header,
                rows.iter().map(|r| {
                    [
                        Cell::from(r.t),
                        Cell::from(r.tau),
                        Cell::from(r.price),
                        Cell::from(r.yield_),
                        Cell::from(r.path_id),
                    ]
                }),
            )?;
            path
        }
        Format::Json => {
            let path = opts.file("curves.json");
            write_json(&path, &rows)?;
            path
        }
    };
    let mut files = vec![path];
    files.push(write_metadata(
        cfg,
        model,
        opts,
        "yield-curves",
        &[("states", STREAM_STATES)],
        &files,
    )?);
    Ok(files)
}

/// Rows of `surface.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub expiry: f64,
    pub strike: f64,
    pub price: f64,
    pub std_error: f64,
}

/// Prices calls on the `bond_maturity` bond from a state at
/// `valuation_time` drawn on one simulated path.
pub fn surface_rows<M: TermStructureModel>(
    m: &M,
    cfg: &ScenarioConfig,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<SurfaceRow>> {
    let run = &cfg.run;
    ensure!(!run.expiries.is_empty(), "run.expiries is empty");
    ensure!(!run.strikes.is_empty(), "run.strikes is empty");
    ensure!(
        run.expiries.iter().all(|&e| e < run.bond_maturity),
        "every expiry must precede run.bond_maturity"
    );
    let state = sample_states(
        m,
        run.valuation_time,
        run.dt,
        1,
        RngStream::new(seed, STREAM_OPTION_STATE),
    )?
    .pop()
    .expect("one state");
    let surface = option_surface(
        m,
        &state,
        run.bond_maturity,
        &run.expiries,
        &run.strikes,
        n_paths,
        run.dt,
        RngStream::new(seed, STREAM_OPTION_PATHS),
    )?;
    Ok(surface
        .into_iter()
        .map(|p| SurfaceRow {
            expiry: p.expiry,
            strike: p.strike,
            price: p.quote.price,
            std_error: p.quote.std_error,
        })
        .collect())
}

pub fn option_surface_cmd(
    cfg: &ScenarioConfig,
    model: &BuiltModel,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>> {
    opts.prepare()?;
    for &k in &cfg.run.strikes {
        if !(k > 0.0 && k < 1.0) {
            eprintln!("warning: strike {k} lies outside (0, 1); the call is priced as given");
        }
    }
    let n = opts.paths.unwrap_or(cfg.run.option_paths);
    let rows = with_model!(model, m => surface_rows(m, cfg, opts.seed, n))?;
    let path = match opts.format {
        Format::Csv => {
            let path = opts.file("surface.csv");
            let header = ["expiry", "strike", "price", "std_error"].map(String::from);
            write_csv(
                &path,
                &header,
                rows.iter().map(|r| {
                    [
                        Cell::from(r.expiry),
                        Cell::from(r.strike),
                        Cell::from(r.price),
                        Cell::from(r.std_error),
                    ]
                }),
            )?;
            path
        }
        Format::Json => {
            let path = opts.file("surface.json");
            write_json(&path, &rows)?;
            path
        }
    };
    let mut files = vec![path];
    files.push(write_metadata(
        cfg,
        model,
        opts,
        "option-surface",
        &[
            ("option-state", STREAM_OPTION_STATE),
            ("option-paths", STREAM_OPTION_PATHS),
        ],
        &files,
    )?);
    Ok(files)
}
