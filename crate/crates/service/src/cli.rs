//! The `cct` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cct_core::ingest::{read, write_folded, write_literal, Format};
use cct_core::ops::{derive, speedup, BinaryOp, DerivedKind, DerivedMetricSpec, DEFAULT_SPEEDUP_CLAMP};
use cct_core::prune::{mass_prune, toggle_collapse, ViewState, ViewStateDoc};
use cct_core::query::{apply, from_view, parse};
use cct_core::{node_path, resolve_path, GraphFrame};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{ServiceError, ServiceResult};
use crate::http::{serve, AppState};
use crate::render::{full_view, render, RenderOptions};
use crate::session::Source;

#[derive(Parser, Debug)]
#[command(name = "cct", version, about = "Explore calling context trees")]
pub struct Cli {
    /// Report errors on stderr as JSON objects.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Literal,
    Folded,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Literal => Format::Literal,
            FormatArg::Folded => Format::Folded,
        }
    }
}

#[derive(Args, Debug)]
pub struct Output {
    /// Write the result here instead of standard output.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    #[arg(long = "out-format", value_enum, default_value = "literal")]
    pub out_format: FormatArg,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Print the tree as an indented outline.
    View {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Metric printed and used for coloring (default `time (inc)`).
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        no_color: bool,
        /// Show only what this saved view state leaves visible.
        #[arg(long)]
        viewstate: Option<PathBuf>,
    },
    /// Per-node ratio `metric(A) / metric(B)` over the nodes common to both.
    ///
    /// A is the numerator, so values above 1 mean B ran faster.
    Speedup {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value = "time")]
        metric: String,
        /// Magnitude substituted for `x/0`.
        #[arg(long, default_value_t = DEFAULT_SPEEDUP_CLAMP)]
        clamp: f64,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        out: Output,
    },
    /// Add a derived metric column.
    Derive {
        file: PathBuf,
        /// Name of the new column.
        #[arg(long)]
        name: String,
        /// Percent of the root total of this metric.
        #[arg(long, conflicts_with_all = ["op", "imbalance_with"])]
        percent: Option<String>,
        /// Elementwise `lhs <op> rhs`, one of add, sub, mul, div.
        #[arg(long, requires_all = ["lhs", "rhs"], conflicts_with = "imbalance_with")]
        op: Option<String>,
        #[arg(long)]
        lhs: Option<String>,
        #[arg(long)]
        rhs: Option<String>,
        /// Variance of `--metric` across this file and these.
        #[arg(long, num_args = 1.., requires = "metric")]
        imbalance_with: Vec<PathBuf>,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        overwrite: bool,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[command(flatten)]
        out: Output,
    },
    /// Apply, check or export path queries.
    Query {
        /// Keep the nodes the query selects, plus their ancestors.
        #[arg(long, value_name = "QUERY", conflicts_with_all = ["check", "export"])]
        apply: Option<String>,
        /// Validate query syntax only.
        #[arg(long, value_name = "QUERY", conflicts_with = "export")]
        check: Option<String>,
        /// Print the query that selects the visible part of a view.
        #[arg(long)]
        export: bool,
        file: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        viewstate: Option<PathBuf>,
        #[arg(long)]
        metric: Option<String>,
        /// Mass-prune to the nodes whose metric lies in `[LO, HI]`.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
        range: Option<Vec<f64>>,
        /// Collapse the subtree at this node path (repeatable).
        #[arg(long)]
        collapse: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// Start the HTTP API.
    Serve {
        /// Profile opened by `POST /sessions` with an empty body.
        file: Option<PathBuf>,
        #[arg(long, env = "CCT_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Persist sessions here and restore them on start.
        #[arg(long)]
        state_dir: Option<PathBuf>,
    },
}

fn load(path: &Path, format: Option<FormatArg>) -> ServiceResult<GraphFrame> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    Ok(read(&text, format.map(Format::from))?)
}

fn load_doc(path: &Path) -> ServiceResult<ViewStateDoc> {
    let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| ServiceError::BadRequest(format!("{}: {e}", path.display())))
}

fn emit(text: &str, dest: &Option<PathBuf>, out: &mut dyn Write) -> ServiceResult<()> {
    match dest {
        Some(path) => std::fs::write(path, text).map_err(|e| ServiceError::io(path, e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| ServiceError::io("<stdout>", e)),
    }
}

fn write_frame(gf: &GraphFrame, o: &Output, out: &mut dyn Write) -> ServiceResult<()> {
    let text = match o.out_format {
        FormatArg::Literal => write_literal(gf) + "\n",
        FormatArg::Folded => write_folded(gf)?,
    };
    emit(&text, &o.output, out)
}

fn view_state(gf: &GraphFrame, metric: &Option<String>) -> ServiceResult<ViewState> {
    let mut vs = ViewState::new(gf)?;
    if let Some(m) = metric {
        gf.metric_index(m)?;
        vs.primary = m.clone();
    }
    Ok(vs)
}

fn execute(cmd: Cmd, out: &mut dyn Write, err: &mut dyn Write) -> ServiceResult<()> {
    match cmd {
        Cmd::View {
            file,
            format,
            metric,
            no_color,
            viewstate,
        } => {
            let gf = load(&file, format)?;
            let vs = match viewstate {
                Some(p) => {
                    let mut vs = load_doc(&p)?.to_view(&gf)?;
                    if let Some(m) = &metric {
                        gf.metric_index(m)?;
                        vs.primary = m.clone();
                    }
                    vs
                }
                None => full_view(&gf, &view_state(&gf, &metric)?)?,
            };
            let text = render(&gf, &vs, RenderOptions { color: !no_color })?;
            emit(&text, &None, out)
        }
        Cmd::Speedup {
            a,
            b,
            metric,
            clamp,
            format,
            out: o,
        } => {
            if !(clamp.is_finite() && clamp > 0.0) {
                return Err(ServiceError::BadRequest("--clamp must be positive and finite".into()));
            }
            let (ga, gb) = (load(&a, format)?, load(&b, format)?);
            let r = speedup(&ga, &gb, &metric, clamp)?;
            for w in &r.warnings {
                let _ = writeln!(
                    err,
                    "warning: {metric} is 0 in {} at `{}` but {} in {}; speedup clamped to {}",
                    b.display(),
                    node_path(&ga, w.node)?,
                    w.numerator,
                    a.display(),
                    clamp.copysign(w.numerator),
                );
            }
            write_frame(&r.frame, &o, out)
        }
        Cmd::Derive {
            file,
            name,
            percent,
            op,
            lhs,
            rhs,
            imbalance_with,
            metric,
            overwrite,
            format,
            out: o,
        } => {
            let gf = load(&file, format)?;
            let others: Vec<GraphFrame> = imbalance_with
                .iter()
                .map(|p| load(p, format))
                .collect::<ServiceResult<_>>()?;
            let kind = if let Some(m) = percent {
                DerivedKind::PercentOfTotal { metric: m }
            } else if let Some(op) = op {
                DerivedKind::Binary {
                    op: op.parse::<BinaryOp>()?,
                    lhs: lhs.expect("clap requires --lhs"),
                    rhs: rhs.expect("clap requires --rhs"),
                }
            } else if !others.is_empty() {
                DerivedKind::Imbalance {
                    others: others.iter().collect(),
                    metric: metric.expect("clap requires --metric"),
                }
            } else {
                return Err(ServiceError::BadRequest(
                    "give one of --percent, --op or --imbalance-with".into(),
                ));
            };
            let spec = DerivedMetricSpec { name, kind, overwrite };
            write_frame(&derive(&gf, &spec)?, &o, out)
        }
        Cmd::Query {
            apply: apply_text,
            check,
            export,
            file,
            format,
            viewstate,
            metric,
            range,
            collapse,
            out: o,
        } => {
            if let Some(q) = check {
                parse(&q)?;
                return emit("ok\n", &None, out);
            }
            let file = file.ok_or_else(|| ServiceError::BadRequest("a profile file is required".into()))?;
            let gf = load(&file, format)?;
            if let Some(q) = apply_text {
                let q = parse(&q)?;
                return write_frame(&apply(&gf, &q)?, &o, out);
            }
            if !export {
                return Err(ServiceError::BadRequest(
                    "give one of --apply, --check or --export".into(),
                ));
            }
            let mut vs = match &viewstate {
                Some(p) => load_doc(p)?.to_view(&gf)?,
                None => view_state(&gf, &metric)?,
            };
            if let Some(r) = range {
                vs = mass_prune(&gf, &vs, r[0], r[1])?;
            }
            for p in &collapse {
                vs = toggle_collapse(&gf, &vs, resolve_path(&gf, p)?)?;
            }
            emit(&format!("{}\n", from_view(&gf, &vs)?), &o.output, out)
        }
        Cmd::Serve {
            file,
            port,
            host,
            state_dir,
        } => {
            let source = file.map(|path| Source::File { path, format: None });
            if let Some(s) = &source {
                s.load()?;
            }
            let mut state = AppState::new(source);
            if let Some(dir) = state_dir {
                let (restored, failed) = state.with_state_dir(dir)?;
                for (path, why) in failed {
                    let _ = writeln!(err, "warning: could not restore {}: {why}", path.display());
                }
                state = restored;
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::io("<runtime>", e))?;
            let addr = format!("{host}:{port}");
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| ServiceError::io(&addr, e))?;
                let local = listener.local_addr().map_err(|e| ServiceError::io(&addr, e))?;
                let _ = writeln!(err, "listening on http://{local}");
                serve(listener, Arc::new(state))
                    .await
                    .map_err(|e| ServiceError::io(&addr, e))
            })
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let json = cli.json_errors;
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            if json {
                let _ = writeln!(err, "{}", e.to_json());
            } else {
                let _ = writeln!(err, "error: {e}");
            }
            e.exit_code()
        }
    }
}
