use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latwave_cli::commands::{self, AnalyzeKind};
use latwave_cli::{CliError, RunConfig};

/// Dispersion, resonances, localized waveforms and transient simulation of
/// discrete mass-spring lattices.
#[derive(Parser)]
#[command(name = "latwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frequency surface on a grid over the zone box.
    Dispersion(Common),
    /// Equifrequency contour at `--omega`.
    Contour(Common),
    /// Group-velocity field.
    Groupvel(Common),
    /// Resonance catalog.
    Resonances(Common),
    /// Localized primitive waveforms with residual and time-evolution checks.
    Lpw(Common),
    /// Driven transient run from rest.
    Simulate(Common),
    /// Post-processing of a simulation output directory.
    Analyze {
        #[arg(value_enum)]
        kind: AnalyzeKind,
        /// Directory holding an earlier `simulate` output (default: `--out`).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Snapshot number for `beaming` (default: the last one).
        #[arg(long)]
        index: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
}

/// Flags mirror the configuration keys; they override `--config`.
#[derive(Args)]
struct Common {
    /// `key = value` file, `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    gx: Option<String>,
    #[arg(long)]
    gy: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    mass: Option<String>,
    #[arg(long)]
    branch: Option<String>,
    #[arg(long)]
    res: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    /// `physical` or `index`.
    #[arg(long)]
    frame: Option<String>,
    /// `kinematic` or `force`.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    omega0: Option<String>,
    #[arg(long)]
    amplitude: Option<String>,
    /// `m,n[,sub]`.
    #[arg(long)]
    source_node: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    /// `auto`, `probe-safe` or `m_lo:m_hi:n_lo:n_hi`.
    #[arg(long)]
    window: Option<String>,
    /// `fixed` or `periodic`.
    #[arg(long)]
    boundary: Option<String>,
    /// Probe node `m,n[,sub]`; repeatable.
    #[arg(long)]
    probe: Vec<String>,
    /// Snapshot time; repeatable.
    #[arg(long)]
    snapshot: Vec<String>,
    #[arg(long)]
    probe_stride: Option<String>,
    /// Accept an explicit window the wavefront would reach.
    #[arg(long)]
    allow_small_window: bool,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    lpw_steps: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    min_radius: Option<String>,
    #[arg(long)]
    t_from: Option<String>,
    #[arg(long)]
    t_to: Option<String>,
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        let pairs = [
            ("family", &self.family),
            ("l", &self.l),
            ("gx", &self.gx),
            ("gy", &self.gy),
            ("gamma", &self.gamma),
            ("mass", &self.mass),
            ("branch", &self.branch),
            ("res", &self.res),
            ("omega", &self.omega),
            ("frame", &self.frame),
            ("source", &self.source),
            ("omega0", &self.omega0),
            ("amplitude", &self.amplitude),
            ("source_node", &self.source_node),
            ("dt", &self.dt),
            ("t_end", &self.t_end),
            ("window", &self.window),
            ("boundary", &self.boundary),
            ("probe_stride", &self.probe_stride),
            ("workers", &self.workers),
            ("lpw_steps", &self.lpw_steps),
            ("threshold", &self.threshold),
            ("min_radius", &self.min_radius),
            ("t_from", &self.t_from),
            ("t_to", &self.t_to),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if !self.probe.is_empty() {
            cfg.set("probes", &self.probe.join(";"))?;
        }
        if !self.snapshot.is_empty() {
            cfg.set("snapshots", &self.snapshot.join(";"))?;
        }
        if self.allow_small_window {
            cfg.allow_small_window = true;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (name, files) = match &cli.command {
        Command::Analyze { kind, input, index, common } => {
            let input = input.clone().unwrap_or_else(|| common.out.clone());
            let mut cfg = commands::input_config(&input)?.unwrap_or_default();
            common.apply(&mut cfg)?;
            let files = commands::analyze(*kind, &cfg, &input, *index, &common.out)?;
            let name = format!("analyze {}", format!("{kind:?}").to_lowercase());
            commands::manifest(&name, &cfg, &common.out)?;
            (name, files)
        }
        other => {
            let (name, common, f): (&str, &Common, fn(&RunConfig, &std::path::Path) -> Result<Vec<PathBuf>, CliError>) = match other {
                Command::Dispersion(c) => ("dispersion", c, commands::dispersion),
                Command::Contour(c) => ("contour", c, commands::contour),
                Command::Groupvel(c) => ("groupvel", c, commands::groupvel),
                Command::Resonances(c) => ("resonances", c, commands::resonances),
                Command::Lpw(c) => ("lpw", c, commands::lpw),
                Command::Simulate(c) => ("simulate", c, commands::simulate),
                Command::Analyze { .. } => unreachable!(),
            };
            let mut cfg = RunConfig::default();
            common.apply(&mut cfg)?;
            let files = f(&cfg, &common.out)?;
            commands::manifest(name, &cfg, &common.out)?;
            (name.to_string(), files)
        }
    };
    for p in files {
        println!("{name}: wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", kind_tag(&e));
            ExitCode::from(e.exit_code())
        }
    }
}

fn kind_tag(e: &CliError) -> &'static str {
    match e {
        CliError::Usage(_) => "Usage",
        CliError::Config(_) => "Config",
        CliError::Lattice(l) => l.name(),
        CliError::Io(_) => "Io",
        CliError::Csv(_) => "Csv",
    }
}
