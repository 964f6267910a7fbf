use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use digstack_core::dns::Name;
use digstack_core::netsim::{DEFAULT_FRAME_SIZE, WORST_CASE_OVERHEAD};
use digstack_gateway::client::{self, CliConfig, CliError, DnsEndpoint, Report};
use digstack_gateway::config::DigcoveryConfig;
use digstack_gateway::{digcovery_server, digrectory_server};

/// Two-tier service discovery for IPv6 smart objects.
#[derive(Parser)]
#[command(name = "digstack", version)]
struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seconds to wait on any network exchange.
    #[arg(long, global = true, default_value_t = 5.0)]
    timeout: f64,
    /// Base URL of digcovery.
    #[arg(
        long,
        global = true,
        env = "DIGCOVERY_URL",
        default_value = "http://127.0.0.1:8080"
    )]
    digcovery_url: String,
    /// Base URL of the digrectory register endpoint.
    #[arg(
        long,
        global = true,
        env = "DIGRECTORY_URL",
        default_value = "http://127.0.0.1:5380"
    )]
    digrectory_url: String,
    /// Digrectory DNS servers, `host:port` or `domain=host:port`.
    #[arg(
        long,
        global = true,
        env = "DIGRECTORY_DNS",
        value_delimiter = ',',
        default_value = "127.0.0.1:5300"
    )]
    digrectory_dns: Vec<DnsEndpoint>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a local directory.
    Digrectory(DigrectoryArgs),
    /// Run the global pointer index.
    Digcovery(DigcoveryArgs),
    /// Register the entries of a fixture or journal file.
    Register { file: PathBuf },
    /// List domains offering a service path pattern, or run a query file.
    Discover {
        #[arg(required_unless_present = "query", conflicts_with = "query")]
        pattern: Option<String>,
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Resolve an instance directly against its domain's directory.
    Resolve { instance: String, domain: String },
    /// Byte and frame counts of the reference exchanges.
    CompareFrames {
        #[arg(long, default_value_t = DEFAULT_FRAME_SIZE)]
        frame_size: usize,
        #[arg(long, default_value_t = WORST_CASE_OVERHEAD)]
        overhead: usize,
    },
}

#[derive(Args)]
struct DigrectoryArgs {
    #[arg(long)]
    domain: Name,
    #[arg(long, default_value_t = 5300)]
    dns_port: u16,
    /// Address the DNS socket binds to.
    #[arg(long, default_value = "127.0.0.1")]
    bind: std::net::IpAddr,
    /// Register endpoint.
    #[arg(long, default_value = "127.0.0.1:5380")]
    http: SocketAddr,
    #[arg(long, env = "DIGCOVERY_URL")]
    digcovery: Option<String>,
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Seconds between publishes.
    #[arg(long, default_value_t = 30)]
    publish_interval: u64,
    /// Host announced to digcovery; defaults to the bind address.
    #[arg(long)]
    advertise_host: Option<String>,
}

#[derive(Args)]
struct DigcoveryArgs {
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// DNS front address.
    #[arg(long)]
    dns_listen: Option<SocketAddr>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cache_capacity: Option<usize>,
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Runtime::new().map_err(|e| CliError::Config(e.to_string()))
}

fn run_digcovery(a: DigcoveryArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => DigcoveryConfig::load(p).map_err(CliError::Config)?,
        None => DigcoveryConfig::default(),
    };
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(d) = a.dns_listen {
        cfg.dns_listen = Some(d);
    }
    if let Some(c) = a.cache_capacity {
        cfg.cache_capacity = c;
    }
    cfg.validate().map_err(CliError::Config)?;
    runtime()?.block_on(async {
        let h = digcovery_server::spawn(&cfg)
            .await
            .map_err(|e| CliError::Config(format!("bind: {e}")))?;
        eprint!("digcovery http on {}", h.http);
        match h.dns {
            Some(d) => eprintln!(", dns on {d}"),
            None => eprintln!(),
        }
        let _ = tokio::signal::ctrl_c().await;
        Ok(())
    })
}

fn run_digrectory(a: DigrectoryArgs, timeout: Duration) -> Result<(), CliError> {
    if a.publish_interval == 0 {
        return Err(CliError::Config("publish interval must be positive".into()));
    }
    let cfg = digrectory_server::DirectoryConfig {
        domain: a.domain,
        dns_listen: (a.bind, a.dns_port).into(),
        http_listen: a.http,
        digcovery: a.digcovery,
        journal: a.journal,
        publish_interval: Duration::from_secs(a.publish_interval),
        advertise_host: a.advertise_host.unwrap_or_else(|| a.bind.to_string()),
        timeout,
    };
    let domain = cfg.domain.clone();
    runtime()?.block_on(async {
        let h = digrectory_server::spawn(cfg)
            .await
            .map_err(|e| CliError::Config(e.to_string()))?;
        eprintln!("digrectory {domain}: dns on {}, http on {}", h.dns, h.http);
        let _ = tokio::signal::ctrl_c().await;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<Option<String>, CliError> {
    let mut cfg = CliConfig::new(
        &cli.digcovery_url,
        &cli.digrectory_url,
        cli.digrectory_dns,
        cli.timeout,
    )?;
    cfg.json = cli.json;
    let out = match cli.command {
        Command::Digrectory(a) => return run_digrectory(a, cfg.timeout).map(|_| None),
        Command::Digcovery(a) => return run_digcovery(a).map(|_| None),
        Command::Register { file } => client::register(&cfg, &file)?.render(cfg.json),
        Command::Discover {
            pattern: Some(p), ..
        } => client::discover(&cfg, &p)?.render(cfg.json),
        Command::Discover { query: Some(q), .. } => client::query(&cfg, &q)?.render(cfg.json),
        Command::Discover { .. } => unreachable!("clap requires a pattern or a query"),
        Command::Resolve { instance, domain } => {
            client::resolve(&cfg, &instance, &domain)?.render(cfg.json)
        }
        Command::CompareFrames {
            frame_size,
            overhead,
        } => client::compare_frames(frame_size, overhead)?.render(cfg.json),
    };
    Ok(Some(out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            if let Some(s) = out {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "error": e.to_string(), "code": e.exit_code() })
                );
            } else {
                eprintln!("digstack: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
