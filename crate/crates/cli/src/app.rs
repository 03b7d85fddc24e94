//! Argument parsing and dispatch for the `canopy` binary.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use canopy_service::ServiceOptions;
use clap::{Parser, Subcommand};

use crate::commands::{self, ScoreFormat};
use crate::config::{load_config, to_toml, Overrides};
use crate::ErrorBody;

#[derive(Debug, Parser)]
#[command(name = "canopy", version, about = "Light-distribution scoring and pruning simulation for tree point clouds")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score clouds as one comparison set.
    Score {
        #[arg(required = true)]
        clouds: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: ScoreFormat,
    },
    /// Remove the branches behind a set of cut points.
    Prune {
        cloud: PathBuf,
        /// Point file with one cut location per row.
        #[arg(long)]
        cuts: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Suggest cuts and score each one.
    Suggest {
        cloud: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Prune-and-rescan benchmark on synthetic stands.
    Benchmark {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        replicates: Option<usize>,
        /// Comma-separated tree spacings in meters.
        #[arg(long, value_delimiter = ',')]
        spacings: Option<Vec<f64>>,
    },
    /// Serve the HTTP API (and a built UI, if given).
    Serve {
        #[arg(short, long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Allowed CORS origin; any origin when unset.
        #[arg(long)]
        cors_origin: Option<String>,
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
    },
    /// Print the effective config as TOML.
    Config,
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let mut config = load_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Score { clouds, output, format } => {
            let scores = commands::score(&clouds, &config)?;
            for t in &scores.trees {
                if let Some(e) = &t.error {
                    writeln!(err, "{}", serde_json::to_string(e)?)?;
                }
            }
            if scores.failures() == scores.trees.len() {
                bail!("no cloud could be scored");
            }
            let text = scores.render(format)?;
            match output {
                Some(path) => commands::write_file(&path, text.as_bytes())?,
                None => out.write_all(text.as_bytes())?,
            }
            if scores.failures() > 0 {
                return Ok(1);
            }
        }
        Command::Prune { cloud, cuts, out_dir } => {
            let cuts = commands::read_cuts(&cuts, config.cut_radius())?;
            let pruned = commands::prune(&cloud, &cuts, &out_dir, &config)?;
            log::info!("kept {} points, removed {}", pruned.kept_points, pruned.removed_points);
        }
        Command::Suggest { cloud, out_dir } => {
            let set = commands::suggest_cuts(&cloud, &out_dir, &config)?;
            for w in &set.warnings {
                log::warn!("{w}");
            }
            out.write_all(set.to_csv().as_bytes())?;
        }
        Command::Benchmark {
            out_dir,
            replicates,
            spacings,
        } => {
            if let Some(r) = replicates {
                config.benchmark.replicates = r;
            }
            if let Some(s) = spacings {
                config.benchmark.spacings = s;
            }
            config.validate()?;
            let (report, _) = commands::benchmark(&out_dir, &config)?;
            for f in &report.failures {
                log::warn!("tree {} at {} m failed: {}", f.slot, f.spacing, f.message);
            }
            out.write_all(report.spacing_csv().as_bytes())?;
        }
        Command::Serve {
            port,
            host,
            ui_dir,
            cors_origin,
            snapshot_dir,
        } => {
            let app = canopy_service::router(
                config,
                ServiceOptions {
                    snapshot_dir,
                    ui_dir,
                    cors_origin,
                },
            )?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .context("starting async runtime")?;
            runtime.block_on(canopy_service::serve(SocketAddr::new(host, port), app))?;
        }
        Command::Config => out.write_all(to_toml(&config)?.as_bytes())?,
    }
    Ok(0)
}

fn write_error(err: &mut dyn Write, body: &ErrorBody) {
    let _ = writeln!(err, "{}", serde_json::to_string(body).expect("error body serializes"));
}

/// Parses `args` (program name first) and runs the command, writing what
/// the binary would print to `out` and `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{}", e.render());
            return 0;
        }
        Err(e) => {
            let body = ErrorBody {
                code: "usage".into(),
                message: e.to_string().trim_end().to_string(),
            };
            write_error(err, &body);
            return 2;
        }
    };
    let code = match run(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            write_error(err, &ErrorBody::from_error(&e));
            1
        }
    };
    let _ = out.flush();
    code
}
