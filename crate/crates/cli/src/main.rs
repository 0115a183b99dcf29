//! `phic`: Φ-entropy class checks, SDPI constants, ribbons and box wirings.
//!
//! Exit status: 0 on success (including "no violation found" and FAIL-free
//! property reports), 1 on usage, I/O or input errors, 2 when a property
//! check contradicts a theorem at tolerance.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use phic_core::boxes::{
    box_ribbon_membership, check_wiring_monotonicity, is_no_signaling, verify_markov_chains, wire, wired_box,
    MonotonicityOptions, NsBox, WiringStrategy, BOX_TOL,
};
use phic_core::phi::{check_class_f, check_class_f1, check_class_f2, parse_phi, PhiClass};
use phic_core::ribbon::{point_grid, ribbon_boundary, ribbon_membership, RibbonOptions, RibbonPoint};
use phic_core::schema::{box_from_json, box_to_file, joint_from_json, strategy_from_json};
use phic_core::sdpi::{eta_phi, verify_maximizer_at_zero, EtaOptions, ZChannelSource};
use phic_core::{Error, GridSpec, Result};

#[derive(Debug, Parser, Serialize)]
#[command(name = "phic", version, about = "Φ-entropy dependence measures on finite alphabets")]
struct Cli {
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tolerance for no-signaling and Markov-chain checks.
    #[arg(long, global = true, default_value_t = BOX_TOL)]
    tol: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Grid test of Φ against the class 𝓕, 𝓕₁ or 𝓕₂.
    Check {
        #[arg(long)]
        phi: String,
        #[arg(long, value_parser = ["F", "F1", "F2"])]
        class: String,
        #[arg(long)]
        grid: String,
    },
    /// η_Φ for a Z-channel source or a joint from file.
    Sdpi(SdpiArgs),
    /// Per-(s, d) check that the η maximizer has f_X(1) at the box bottom.
    Theorem2 {
        #[arg(long)]
        phi: String,
        #[arg(long, default_value = "0.05:0.95:20")]
        s_grid: String,
        #[arg(long, default_value = "0.05:0.95:20")]
        d_grid: String,
        /// f search box and class-check grid.
        #[arg(long, default_value = "0.01:10:200")]
        grid: String,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// Ribbon membership at a point, or the ribbon boundary.
    Ribbon(RibbonArgs),
    /// No-signaling boxes and wirings.
    #[command(subcommand, name = "box")]
    Box(BoxCommand),
}

#[derive(Debug, Args, Serialize)]
struct SdpiArgs {
    #[arg(long)]
    phi: String,
    /// `z` for a Z-channel source given by --s and --d.
    #[arg(long, conflicts_with = "joint")]
    source: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    joint: Option<PathBuf>,
    #[arg(long, default_value = "X")]
    x: String,
    #[arg(long, default_value = "Y")]
    y: String,
    /// Pin f_X(1) to the bottom of the f box.
    #[arg(long)]
    pin_v0: bool,
    /// f search box `lo:hi`.
    #[arg(long)]
    fbox: Option<String>,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
}

#[derive(Debug, Args, Serialize)]
struct RibbonArgs {
    #[arg(long)]
    phi: String,
    #[arg(long)]
    joint: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    /// `l1,l2`.
    #[arg(long, required_unless_present = "boundary")]
    pt: Option<String>,
    #[arg(long, conflicts_with = "pt")]
    boundary: bool,
    #[arg(long, default_value = "0.05:1.5:30")]
    l2_grid: String,
    #[arg(long)]
    fbox: Option<String>,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum BoxCommand {
    /// Validate a box file and test no-signaling.
    Check { file: PathBuf },
    /// Wire boxes under a strategy and write the wired box.
    Wire(WiringArgs),
    /// Markov-chain residuals of the wired joint at every (x′, y′).
    Chains(WiringArgs),
    /// Ribbon monotonicity of the wiring on a λ grid.
    Monotone {
        #[arg(long)]
        phi: String,
        #[command(flatten)]
        wiring: WiringArgs,
        /// λ grid `lo:hi:n`, used for both coordinates.
        #[arg(long, default_value = "0.2:1:5")]
        grid: String,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        #[arg(long, default_value_t = 10)]
        f_samples: usize,
    },
}

#[derive(Debug, Args, Serialize)]
struct WiringArgs {
    /// Comma-separated box files, in box order.
    #[arg(long, value_delimiter = ',', required = true)]
    boxes: Vec<PathBuf>,
    #[arg(long)]
    strategy: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Sdpi(_) => "sdpi",
            Command::Theorem2 { .. } => "theorem2",
            Command::Ribbon(_) => "ribbon",
            Command::Box(BoxCommand::Check { .. }) => "box check",
            Command::Box(BoxCommand::Wire(_)) => "box wire",
            Command::Box(BoxCommand::Chains(_)) => "box chains",
            Command::Box(BoxCommand::Monotone { .. }) => "box monotone",
        }
    }
}

/// A failed run: the message and the exit status to report.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

/// A finished report and whether it records a property FAIL.
struct Report {
    body: Body,
    property_fail: bool,
}

enum Body {
    Json(Value),
    Csv(String),
    /// JSON written as-is, without the envelope.
    Raw(Value),
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn grid(s: &str) -> CliResult<GridSpec> {
    Ok(s.parse::<GridSpec>()?)
}

fn fbox(s: &Option<String>) -> CliResult<Option<(f64, f64)>> {
    let Some(s) = s else { return Ok(None) };
    let bad = || usage(format!("expected lo:hi, got `{s}`"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok(Some((lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?)))
}

fn load_boxes(paths: &[PathBuf]) -> CliResult<Vec<NsBox>> {
    paths
        .iter()
        .map(|p| Ok(box_from_json(&read(p)?, &p.display().to_string())?))
        .collect()
}

fn load_wiring(w: &WiringArgs) -> CliResult<(Vec<NsBox>, WiringStrategy)> {
    let boxes = load_boxes(&w.boxes)?;
    let s = strategy_from_json(&read(&w.strategy)?, &w.strategy.display().to_string(), &boxes)?;
    Ok((boxes, s))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    output::to_csv(header, rows).map_err(|e| usage(format!("csv output: {e}")))
}

fn run(cli: &Cli) -> CliResult<Report> {
    let fmt = |default: Format, csv_ok: bool| -> CliResult<Format> {
        let f = cli.format.unwrap_or(default);
        if f == Format::Csv && !csv_ok {
            return Err(usage("this command has no CSV output"));
        }
        Ok(f)
    };
    let search = |restarts: usize| RibbonOptions {
        search: phic_core::optim::SearchOptions {
            restarts,
            seed: cli.seed,
            ..RibbonOptions::default().search
        },
        ..RibbonOptions::default()
    };
    match &cli.command {
        Command::Check { phi, class, grid: g } => {
            fmt(Format::Json, false)?;
            let phi = parse_phi(phi)?;
            let g = grid(g)?;
            let class: PhiClass = class.parse()?;
            let res = match class {
                PhiClass::F => check_class_f(&phi, &g),
                PhiClass::F1 => check_class_f1(&phi, &g),
                PhiClass::F2 => check_class_f2(&phi, &g),
            };
            let body = match res {
                Ok(r) => to_value(&r),
                Err(Error::Degenerate { points }) => json!({
                    "class": class,
                    "member": "undecided",
                    "witnesses": [],
                    "degenerate_points": points,
                    "grid": g,
                }),
                Err(e) => return Err(e.into()),
            };
            Ok(Report {
                body: Body::Json(body),
                property_fail: false,
            })
        }
        Command::Sdpi(a) => {
            fmt(Format::Json, false)?;
            let phi = parse_phi(&a.phi)?;
            let (joint, xv, yv) = match (&a.source, &a.joint) {
                (Some(src), None) => {
                    if src != "z" {
                        return Err(usage(format!("unknown source `{src}`; only `z` is built in")));
                    }
                    let (Some(s), Some(d)) = (a.s, a.d) else {
                        return Err(usage("--source z needs --s and --d"));
                    };
                    (ZChannelSource::new(s, d)?.joint(), "X".to_string(), "Y".to_string())
                }
                (None, Some(p)) => (
                    joint_from_json(&read(p)?, &p.display().to_string())?,
                    a.x.clone(),
                    a.y.clone(),
                ),
                _ => return Err(usage("give either --source z or --joint FILE")),
            };
            let mut opts = EtaOptions {
                fbox: fbox(&a.fbox)?,
                ..EtaOptions::default()
            };
            opts.search.restarts = a.restarts;
            opts.search.seed = cli.seed;
            if a.pin_v0 {
                let lo = opts.fbox.unwrap_or_else(|| phi.default_fbox()).0;
                opts.pinned = vec![(1, lo)];
            }
            let r = eta_phi(&phi, &joint, &xv, &yv, &opts)?;
            let mut body = to_value(&r);
            if let [u, v] = r.argmax_f.table[..] {
                body["argmax"] = json!({"u": u, "v": v});
            }
            Ok(Report {
                body: Body::Json(body),
                property_fail: false,
            })
        }
        Command::Theorem2 {
            phi,
            s_grid,
            d_grid,
            grid: g,
            restarts,
        } => {
            let f = fmt(Format::Csv, true)?;
            let phi = parse_phi(phi)?;
            let (sg, dg, g) = (grid(s_grid)?, grid(d_grid)?, grid(g)?);
            let mut opts = EtaOptions::default();
            opts.search.restarts = *restarts;
            opts.search.seed = cli.seed;
            let mut reports = Vec::new();
            for s in sg.points() {
                for d in dg.points() {
                    reports.push(verify_maximizer_at_zero(&phi, &ZChannelSource::new(s, d)?, &g, &opts)?);
                }
            }
            let property_fail = reports.iter().any(|r| r.hypothesis_verified && !r.pass);
            let body = match f {
                Format::Json => Body::Json(json!({
                    "cells": reports,
                    "pass": reports.iter().all(|r| r.pass),
                })),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = reports
                        .iter()
                        .map(|r| {
                            vec![
                                output::fmt_f64(r.source.s),
                                output::fmt_f64(r.source.d),
                                r.phi.clone(),
                                r.hypothesis_verified.to_string(),
                                output::fmt_f64(r.eta_unrestricted),
                                output::fmt_f64(r.eta_restricted),
                                output::fmt_f64(r.argmax_u),
                                output::fmt_f64(r.argmax_v),
                                r.pass.to_string(),
                            ]
                        })
                        .collect();
                    Body::Csv(csv_text(
                        &["s", "d", "phi", "hypothesis_verified", "eta_unrestricted", "eta_restricted", "argmax_u", "argmax_v", "pass"],
                        &rows,
                    )?)
                }
            };
            Ok(Report { body, property_fail })
        }
        Command::Ribbon(a) => {
            let phi = parse_phi(&a.phi)?;
            let joint = joint_from_json(&read(&a.joint)?, &a.joint.display().to_string())?;
            let mut opts = search(a.restarts);
            opts.fbox = fbox(&a.fbox)?;
            let (av, bv) = ([a.a.as_str()], [a.b.as_str()]);
            if a.boundary {
                let f = fmt(Format::Csv, true)?;
                let est = ribbon_boundary(&phi, &joint, &av, &bv, &grid(&a.l2_grid)?, &opts)?;
                let body = match f {
                    Format::Json => Body::Json(to_value(&est)),
                    Format::Csv => {
                        let rows: Vec<Vec<String>> = est
                            .points
                            .iter()
                            .map(|p| {
                                vec![
                                    output::fmt_f64(p.lambda2),
                                    output::fmt_f64(p.lambda1_low),
                                    output::fmt_f64(p.lambda1_high),
                                ]
                            })
                            .collect();
                        Body::Csv(csv_text(&["lambda2", "lambda1_low", "lambda1_high"], &rows)?)
                    }
                };
                Ok(Report {
                    body,
                    property_fail: false,
                })
            } else {
                fmt(Format::Json, false)?;
                let pt: RibbonPoint = a.pt.as_deref().unwrap_or_default().parse()?;
                let v = ribbon_membership(&phi, &joint, &av, &bv, pt, &opts)?;
                Ok(Report {
                    body: Body::Json(json!({"point": pt, "verdict": v})),
                    property_fail: false,
                })
            }
        }
        Command::Box(BoxCommand::Check { file }) => {
            fmt(Format::Json, false)?;
            let b = box_from_json(&read(file)?, &file.display().to_string())?;
            let r = is_no_signaling(&b, cli.tol);
            Ok(Report {
                body: Body::Json(json!({"sizes": b.sizes(), "tol": cli.tol, "report": r, "no_signaling": r.no_signaling})),
                property_fail: false,
            })
        }
        Command::Box(BoxCommand::Wire(w)) => {
            fmt(Format::Json, false)?;
            let (boxes, s) = load_wiring(w)?;
            let wired = wired_box(&boxes, &s)?;
            let mut file = to_value(&box_to_file(&wired));
            file["meta"] = envelope(cli, json!({"no_signaling": is_no_signaling(&wired, cli.tol).no_signaling}));
            Ok(Report {
                body: Body::Raw(file),
                property_fail: false,
            })
        }
        Command::Box(BoxCommand::Chains(w)) => {
            fmt(Format::Json, false)?;
            let (boxes, s) = load_wiring(w)?;
            let mut cells = Vec::new();
            let mut all_pass = true;
            for x in 0..s.inputs[0] as u32 {
                for y in 0..s.inputs[1] as u32 {
                    let wj = wire(&boxes, &s, x, y)?;
                    let chains = verify_markov_chains(&wj, cli.tol);
                    all_pass &= chains.iter().all(|c| c.pass);
                    cells.push(json!({"x_prime": x, "y_prime": y, "raw_mass": wj.raw_mass, "chains": chains}));
                }
            }
            let components_ns = boxes.iter().all(|b| is_no_signaling(b, BOX_TOL).no_signaling);
            Ok(Report {
                body: Body::Json(json!({"cells": cells, "pass": all_pass, "components_no_signaling": components_ns})),
                property_fail: components_ns && !all_pass,
            })
        }
        Command::Box(BoxCommand::Monotone {
            phi,
            wiring,
            grid: g,
            restarts,
            f_samples,
        }) => {
            let f = fmt(Format::Json, true)?;
            let phi = parse_phi(phi)?;
            let (boxes, s) = load_wiring(wiring)?;
            let g = grid(g)?;
            let opts = MonotonicityOptions {
                ribbon: search(*restarts),
                f_samples: *f_samples,
            };
            let r = check_wiring_monotonicity(&phi, &boxes, &s, &point_grid(&g, &g), &opts)?;
            let wired = wired_box(&boxes, &s)?;
            let one = RibbonPoint::new(1.0, 1.0)?;
            log::info!(
                "wired box at (1,1): {:?}",
                box_ribbon_membership(&phi, &wired, one, &opts.ribbon)?.status
            );
            let body = match f {
                Format::Json => Body::Json(to_value(&r)),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = r
                        .ribbon
                        .checks
                        .iter()
                        .map(|c| {
                            vec![
                                output::fmt_f64(c.point.lambda1),
                                output::fmt_f64(c.point.lambda2),
                                c.implication.clone(),
                                c.pass.to_string(),
                                output::fmt_f64(c.margin),
                            ]
                        })
                        .collect();
                    Body::Csv(csv_text(&["lambda1", "lambda2", "implication", "pass", "margin"], &rows)?)
                }
            };
            Ok(Report {
                body,
                property_fail: !r.pass,
            })
        }
    }
}

fn envelope(cli: &Cli, result: Value) -> Value {
    json!({
        "tool": "phic",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "config": to_value(cli),
        "seed": cli.seed,
        "result": result,
    })
}

fn finish(cli: &Cli, report: Report) -> Result<()> {
    let text = match report.body {
        Body::Json(v) => output::to_json(&envelope(cli, v))?,
        Body::Raw(v) => output::to_json(&v)?,
        Body::Csv(t) => format!("# phic {} seed={}\n{t}", env!("CARGO_PKG_VERSION"), cli.seed),
    };
    output::emit(&text, cli.out.as_deref())
        .map_err(|e| Error::InvalidArgument(format!("cannot write output: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(report) => {
            let fail = report.property_fail;
            if let Err(e) = finish(&cli, report) {
                eprintln!("phic: {e}");
                return ExitCode::from(1);
            }
            ExitCode::from(if fail { 2 } else { 0 })
        }
        Err(f) => {
            eprintln!("phic: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
