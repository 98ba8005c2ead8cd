use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attnflow::community::{community_report_with, write_report_csv, write_size_gamma_csv};
use attnflow::impact::{surfer_oracle, SurferEstimate};
use attnflow::layout::two_level_layout;
use attnflow::netmodel::{
    load_labels, load_network, planted_communities, synth_network, write_labels, write_network,
    FlowNetwork, LabelMap, PlantedLaw,
};
use attnflow::output::{fmt_sig, write_json};
use attnflow::robustness::{backbone_sweep, reshuffle_battery_with, write_sweep_csv, ReshuffleMode};
use attnflow::scaling::{fit_scaling_with, FitOptions, DEFAULT_KS_ALPHA};
use attnflow::{analyze, balance, Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "attnflow", version, about = "Circulation impact and scaling analysis of flow networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct Input {
    /// Edge list CSV (`src,dst,weight`).
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct Fit {
    /// Significance level of the KS check.
    #[arg(long, default_value_t = DEFAULT_KS_ALPHA)]
    ks_alpha: f64,
}

impl Fit {
    fn options(&self) -> FitOptions {
        FitOptions {
            ks_alpha: self.ks_alpha,
            ..FitOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Impact table and scaling fit.
    Analyze {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        fit: Fit,
        #[command(flatten)]
        output: Output,
    },
    /// Scaling fit across backbone thinning levels.
    Backbone {
        #[command(flatten)]
        input: Input,
        /// Retained fractions, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1")]
        alpha: Vec<f64>,
        #[command(flatten)]
        fit: Fit,
        #[command(flatten)]
        output: Output,
    },
    /// Null-model battery over the eight reshuffling modes.
    Reshuffle {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to these mode labels (a-h), comma separated.
        #[arg(long, value_delimiter = ',')]
        modes: Vec<String>,
        #[command(flatten)]
        fit: Fit,
        #[command(flatten)]
        output: Output,
    },
    /// Per-label scaling fits.
    Communities {
        #[command(flatten)]
        input: Input,
        /// Node label CSV (`node,label`).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_sites: usize,
        #[command(flatten)]
        fit: Fit,
        #[command(flatten)]
        output: Output,
    },
    /// Two-level spring layout coordinates.
    Layout {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo random-surfer estimate of impact.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1_000_000)]
        walkers: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Writes a synthetic fixture network.
    Synth {
        #[arg(long, value_enum, default_value_t = SynthKind::Attachment)]
        kind: SynthKind,
        /// Nodes of the attachment network.
        #[arg(long, default_value_t = 1200)]
        nodes: usize,
        /// Links added per new node.
        #[arg(long, default_value_t = 10)]
        links: usize,
        /// Label groups of the planted network.
        #[arg(long, default_value_t = 3)]
        groups: usize,
        /// Exponent of the planted network.
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// Heavy-tailed preferential attachment network.
    Attachment,
    /// Labeled groups following an exact power law.
    Planted,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_input_error() {
        1
    } else if matches!(err, Error::InsufficientData(_)) {
        3
    } else {
        2
    }
}

/// Creates the output directory and resolves `names` inside it, refusing to
/// clobber existing files unless asked to.
fn prepare(output: &Output, names: &[&str]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&output.out).map_err(|e| Error::Io {
        path: output.out.clone(),
        source: e,
    })?;
    let paths: Vec<PathBuf> = names.iter().map(|n| output.out.join(n)).collect();
    if !output.overwrite {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::Validation(format!(
                "{} exists; pass --overwrite to replace it",
                p.display()
            )));
        }
    }
    Ok(paths)
}

fn load(input: &Input) -> Result<FlowNetwork> {
    let (net, report) = load_network(&input.input)?;
    eprintln!(
        "read {} rows ({} merged, {} skipped): {} nodes, {} edges",
        report.rows_read, report.edges_merged, report.rows_dropped, report.nodes, report.edges
    );
    Ok(net)
}

fn load_labeled(input: &Input, labels: &Path) -> Result<(FlowNetwork, LabelMap)> {
    let net = load(input)?;
    let (labels, report) = load_labels(labels, &net)?;
    if !report.unknown_nodes.is_empty() || !report.unlabeled_nodes.is_empty() {
        eprintln!(
            "labels: {} rows for unknown nodes skipped, {} nodes unlabeled",
            report.unknown_nodes.len(),
            report.unlabeled_nodes.len()
        );
    }
    Ok((net, labels))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Analyze { input, fit, output } => {
            let paths = prepare(&output, &["impact.csv", "fit.json"])?;
            let net = load(&input)?;
            let an = analyze(&net)?;
            an.table.write_csv(&paths[0])?;
            let f = fit_scaling_with(&an.table, &fit.options())?;
            write_json(&f, &paths[1])?;
            println!(
                "n={} gamma={} r2={} rho={} D={} D*={}",
                net.n_nodes(),
                fmt_sig(f.gamma, 6),
                fmt_sig(f.r2, 6),
                fmt_sig(f.rho, 6),
                fmt_sig(f.d, 6),
                fmt_sig(f.d_threshold, 6)
            );
        }
        Command::Backbone {
            input,
            alpha,
            fit,
            output,
        } => {
            let paths = prepare(&output, &["backbone.csv"])?;
            let net = load(&input)?;
            let points = backbone_sweep(&net, &alpha, &fit.options())?;
            write_sweep_csv(&points, &paths[0])?;
            for p in &points {
                if let Err(e) = &p.fit {
                    eprintln!("alpha {}: {e}", p.alpha);
                }
            }
            if points.iter().all(|p| p.fit.is_err()) {
                return Err(Error::Numerical("no backbone level could be analyzed".into()));
            }
        }
        Command::Reshuffle {
            input,
            runs,
            seed,
            modes,
            fit,
            output,
        } => {
            let modes = if modes.is_empty() {
                ReshuffleMode::ALL.to_vec()
            } else {
                modes
                    .iter()
                    .map(|m| ReshuffleMode::from_label(m))
                    .collect::<Result<_>>()?
            };
            let paths = prepare(&output, &["reshuffle.json"])?;
            let net = load(&input)?;
            let report = reshuffle_battery_with(&net, &modes, runs, seed, &fit.options())?;
            report.write_json(&paths[0])?;
            for m in &report.modes {
                println!(
                    "{} ok={} failed={} gamma={} r2={} rho={} D={}",
                    m.label,
                    m.runs_ok,
                    m.runs_failed,
                    fmt_sig(m.gamma.mean, 4),
                    fmt_sig(m.r2.mean, 4),
                    fmt_sig(m.rho.mean, 4),
                    fmt_sig(m.d.mean, 4)
                );
            }
        }
        Command::Communities {
            input,
            labels,
            min_sites,
            fit,
            output,
        } => {
            let paths = prepare(&output, &["communities.csv", "community_sizes.csv"])?;
            let (net, labels) = load_labeled(&input, &labels)?;
            let stats = community_report_with(&net, &labels, min_sites, &fit.options())?;
            write_report_csv(&stats, &paths[0])?;
            write_size_gamma_csv(&stats, &paths[1])?;
        }
        Command::Layout {
            input,
            labels,
            seed,
            output,
        } => {
            let paths = prepare(&output, &["layout.json"])?;
            let (net, labels) = load_labeled(&input, &labels)?;
            two_level_layout(&net, &labels, seed)?.write_json(&paths[0])?;
        }
        Command::Simulate {
            input,
            walkers,
            seed,
            output,
        } => {
            let paths = prepare(&output, &["surfer.csv"])?;
            let net = load(&input)?;
            let est = surfer_oracle(&balance(&net)?, walkers, seed)?;
            fs::write(&paths[0], surfer_csv(&est)).map_err(|e| Error::Io {
                path: paths[0].clone(),
                source: e,
            })?;
        }
        Command::Synth {
            kind,
            nodes,
            links,
            groups,
            gamma,
            seed,
            output,
        } => match kind {
            SynthKind::Attachment => {
                let paths = prepare(&output, &["edges.csv"])?;
                write_network(&synth_network(nodes, links, seed)?, &paths[0])?;
            }
            SynthKind::Planted => {
                let paths = prepare(&output, &["edges.csv", "labels.csv"])?;
                let (net, labels) = planted_communities(&PlantedLaw {
                    groups,
                    gamma,
                    seed,
                    cross_edges: true,
                })?;
                write_network(&net, &paths[0])?;
                write_labels(&labels, &paths[1])?;
            }
        },
    }
    Ok(())
}

fn surfer_csv(est: &SurferEstimate) -> String {
    let mut out = String::from("node,visits,visits_se,c_hat,c_hat_se\n");
    for (i, node) in est.nodes.iter().enumerate() {
        out.push_str(&format!(
            "{node},{},{},{},{}\n",
            est.visits[i], est.visits_se[i], est.c_hat[i], est.c_hat_se[i]
        ));
    }
    out
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var("ATTNFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("ATTNFLOW_THREADS must be a non-negative integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
