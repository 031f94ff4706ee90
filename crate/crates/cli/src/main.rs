use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use qoepolicy_core::corpus::{
    self, AuditSettings, CorpusSpec, LiveAuditor, OfflineAuditor, PageAuditor, RankBin,
};
use qoepolicy_core::enforce;
use qoepolicy_core::fetch::{self, FetchConfig, FetchedPage};
use qoepolicy_core::headers::parse_headers;
use qoepolicy_core::model::{FeatureKind, FontDisplay, NetworkProfile, PolicySet, ViewportConfig};
use qoepolicy_core::synth::{self, SynthParams};
use qoepolicy_proxy::Mode;

/// Audit pages against QoE document policies and simulate their enforcement.
#[derive(Parser, Debug)]
#[command(name = "qoepolicy", version)]
struct Cli {
    /// Emulated viewport as WIDTHxHEIGHT@DPR.
    #[arg(long, global = true, default_value = "360x640@3")]
    viewport: ViewportConfig,

    /// Network profile as RTT_MS,DOWN_KBPS,UP_KBPS.
    #[arg(long, global = true, default_value = "150,1600,750")]
    network: NetworkProfile,

    /// Upper bound on concurrent subresource requests.
    #[arg(
        long,
        global = true,
        env = "QOEPOLICY_MAX_IN_FLIGHT",
        default_value_t = 8
    )]
    max_in_flight: usize,

    /// Delay between requests to the same host, in milliseconds.
    #[arg(
        long,
        global = true,
        env = "QOEPOLICY_POLITENESS_MS",
        default_value_t = 250
    )]
    politeness_ms: u64,

    /// Per-request timeout in seconds.
    #[arg(long, global = true, env = "QOEPOLICY_TIMEOUT_S", default_value_t = 30)]
    timeout: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Audit one page and print its report as JSON.
    Audit(TargetArgs),
    /// Print the page as it would look with the policy enforced, with its report.
    Enforce(TargetArgs),
    /// Run a forward proxy that injects the policy into HTML responses.
    Proxy {
        #[arg(long)]
        listen: SocketAddr,
        /// Policy file (one header value per line) or an inline header value.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        report_only: bool,
    },
    /// Sample, audit and aggregate a ranked corpus.
    Corpus {
        /// TOML study description.
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Audit pages from DIR/<domain>/index.html instead of the network.
        #[arg(long, value_name = "DIR")]
        offline: Option<PathBuf>,
        /// Only audit these bins, e.g. `1-100,101-1000`.
        #[arg(long, value_delimiter = ',')]
        bins: Vec<RankBin>,
        #[arg(long, default_value = "corpus-out")]
        out: PathBuf,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Write a synthetic page violating one feature (or `all`).
    Synth {
        feature: String,
        out_dir: PathBuf,
        #[arg(long, short = 'n', default_value_t = 1)]
        count: usize,
        #[arg(long)]
        font_display: Option<FontDisplay>,
        #[arg(long)]
        policy: Option<String>,
    },
}

#[derive(Args, Debug)]
struct TargetArgs {
    /// URL or path to a local HTML file.
    target: String,
    /// Policy file (one header value per line) or an inline header value.
    /// Defaults to every feature at its default parameter.
    #[arg(long)]
    policy: Option<String>,
    /// URL a local file is addressed as.
    #[arg(long)]
    base_url: Option<String>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn fetch_config(cli: &Cli) -> FetchConfig {
    FetchConfig {
        timeout: Duration::from_secs(cli.timeout),
        max_in_flight: cli.max_in_flight.max(1),
        politeness_delay: Duration::from_millis(cli.politeness_ms),
        ..FetchConfig::default()
    }
}

/// Reads a policy from a file of header values, or parses `arg` as one.
fn load_policy(arg: Option<&str>) -> anyhow::Result<PolicySet> {
    let Some(arg) = arg else {
        return Ok(PolicySet::all_defaults());
    };
    let path = Path::new(arg);
    let lines: Vec<String> = if path.is_file() {
        std::fs::read_to_string(path)
            .with_context(|| format!("reading policy file {}", path.display()))?
            .lines()
            .map(str::to_owned)
            .collect()
    } else {
        vec![arg.to_owned()]
    };
    let mut policy = PolicySet::new();
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let header = parse_headers(line).with_context(|| format!("policy line {}", i + 1))?;
        for name in header.passthrough_names() {
            eprintln!("warning: ignoring policy member {name}, which restricts nothing");
        }
        for f in header.policy.iter() {
            policy.insert(*f);
        }
    }
    Ok(qoepolicy_core::model::validate_policy_set(policy)?)
}

fn load_target(cli: &Cli, args: &TargetArgs) -> anyhow::Result<FetchedPage> {
    let cfg = fetch_config(cli);
    let path = Path::new(&args.target);
    if path.exists() {
        let file = if path.is_dir() {
            path.join("index.html")
        } else {
            path.to_path_buf()
        };
        return Ok(fetch::load_local(&file, args.base_url.as_deref(), &cfg)?);
    }
    Ok(fetch::fetch_page(&args.target, &cfg)?)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    print!("{}", corpus::to_sorted_json(value)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Audit(args) => {
            let policy = load_policy(args.policy.as_deref())?;
            let page = load_target(&cli, args)?;
            let report = enforce::report(&page.snapshot(), &policy, &cli.viewport, &cli.network);
            print_json(&report)?;
            Ok(if report.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Enforce(args) => {
            let policy = load_policy(args.policy.as_deref())?;
            let page = load_target(&cli, args)?;
            let snapshot = page.snapshot();
            let report = enforce::report(&snapshot, &policy, &cli.viewport, &cli.network);
            let enforced = enforce::enforce(&snapshot, &policy, &cli.viewport);
            print_json(&serde_json::json!({ "report": report, "enforced": enforced }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Proxy {
            listen,
            policy,
            report_only,
        } => {
            let policy = load_policy(Some(policy))?;
            let mode = if *report_only {
                Mode::ReportOnly
            } else {
                Mode::Enforce
            };
            let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
            rt.block_on(async {
                tokio::select! {
                    served = qoepolicy_proxy::run_proxy(*listen, policy, mode) => served.map_err(anyhow::Error::from),
                    _ = tokio::signal::ctrl_c() => Ok(()),
                }
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Corpus {
            spec,
            seed,
            offline,
            bins,
            out,
            policy,
        } => {
            let mut study = CorpusSpec::load(spec)?;
            if let Some(seed) = seed {
                study.seed = *seed;
            }
            if !bins.is_empty() {
                study.restrict_bins(bins)?;
            }
            let entries = corpus::load_ranked_list(&study.ranked_list)?;
            let settings = AuditSettings {
                policy: load_policy(policy.as_deref())?,
                viewport: cli.viewport,
                network: cli.network,
            };
            let fetch = fetch_config(&cli);
            let auditor: Box<dyn PageAuditor> = match offline {
                Some(dir) => Box::new(OfflineAuditor {
                    dir: dir.clone(),
                    settings,
                    fetch,
                }),
                None => Box::new(LiveAuditor { settings, fetch }),
            };
            let output = corpus::run_corpus(&study, &entries, auditor.as_ref())?;
            for b in &output.bins {
                if b.reports.len() < study.samples_per_bin {
                    eprintln!(
                        "warning: bin {} has only {} accessible pages of {} wanted",
                        b.bin,
                        b.reports.len(),
                        study.samples_per_bin
                    );
                }
            }
            for path in corpus::write_outputs(&output, out)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            feature,
            out_dir,
            count,
            font_display,
            policy,
        } => {
            let params = SynthParams {
                count: *count,
                font_display: *font_display,
                viewport: cli.viewport,
                policy: load_policy(policy.as_deref())?,
                ..SynthParams::default()
            };
            if feature == "all" {
                for kind in FeatureKind::ALL {
                    let dir = out_dir.join(kind.name());
                    let index = synth::generate_synthetic(kind, &params)?.write_to(&dir)?;
                    eprintln!("wrote {}", index.display());
                }
            } else {
                let kind: FeatureKind = match feature.parse() {
                    Ok(k) => k,
                    Err(e) => bail!("{e}"),
                };
                let index = synth::generate_synthetic(kind, &params)?.write_to(out_dir)?;
                eprintln!("wrote {}", index.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
