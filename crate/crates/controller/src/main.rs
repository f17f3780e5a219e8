use std::fs;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use testbed_controller::{router, AppState, ControllerConfig};
use testbed_core::discovery::{
    emit_provisioning_plan, DhcpListener, LeaseRegistry, DEFAULT_DHCP_PORT, DEFAULT_POOL,
};
use testbed_core::emulator::{
    benchmark_prefix_install, parse_experiment_spec, run_experiment_with, RunDirectory,
};
use testbed_core::evalkit::{
    export_csv, export_runs_csv, phase_runtime_series, summarize_repetition, table_size_series,
    Metric,
};
use testbed_core::logrepo::{shared_store, SyslogListener, DEFAULT_SYSLOG_PORT};
use testbed_core::topo::{compile_node_configs, parse_adjacency};
use testbed_core::SimTime;

#[derive(Parser)]
#[command(name = "testbed", version, about = "NDN/IP testbed controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API together with the syslog collector and DHCP listener.
    Serve(ServeArgs),
    /// Print the IP and NDN routes compiled for each node of a topology.
    Routes {
        /// Adjacency document (JSON).
        topology: PathBuf,
        /// Only this node.
        #[arg(long)]
        node: Option<String>,
    },
    /// Run an experiment document and export its metrics.
    Run {
        /// Experiment document (JSON) with an inline topology.
        spec: PathBuf,
        /// Write logs, events and the manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        bucket_ms: u64,
    },
    /// Time prefix installation on a ring of nodes.
    Bench {
        #[arg(long, default_value_t = 10)]
        nodes: usize,
        #[arg(long, default_value_t = 1000)]
        prefixes: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Provisioning plans for leased nodes of a topology.
    Plan {
        #[arg(long)]
        topology: PathBuf,
        /// Lease file as written by `serve` (one JSON lease per line).
        #[arg(long)]
        leases: PathBuf,
        #[arg(long, env = "TESTBED_LOG_SINK", default_value = "10.0.0.1:514")]
        log_sink: SocketAddr,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// HTTP address. The syslog and DHCP listeners use the same IP.
    #[arg(long, env = "TESTBED_BIND", default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, env = "TESTBED_SYSLOG_PORT", default_value_t = DEFAULT_SYSLOG_PORT)]
    syslog_port: u16,
    #[arg(long, env = "TESTBED_DHCP_PORT", default_value_t = DEFAULT_DHCP_PORT)]
    dhcp_port: u16,
    /// Run directories and the lease file live here.
    #[arg(long, env = "TESTBED_DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Syslog address put into provisioning plans; defaults to the bind IP
    /// and syslog port.
    #[arg(long, env = "TESTBED_LOG_SINK")]
    log_sink: Option<SocketAddr>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Serve(args) => serve(args),
        Command::Routes { topology, node } => routes(&topology, node.as_deref()),
        Command::Run {
            spec,
            out,
            csv,
            bucket_ms,
        } => run(&spec, out, csv, bucket_ms),
        Command::Bench {
            nodes,
            prefixes,
            csv,
        } => bench(nodes, prefixes, csv),
        Command::Plan {
            topology,
            leases,
            log_sink,
        } => plan(&topology, &leases, log_sink),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_leases(path: &Path) -> Result<LeaseRegistry> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(LeaseRegistry::load(DEFAULT_POOL.0, DEFAULT_POOL.1, BufReader::new(file))?)
}

fn save_leases(registry: &RwLock<LeaseRegistry>, path: &Path) -> Result<()> {
    let snapshot = registry.read().unwrap_or_else(|e| e.into_inner()).clone();
    let tmp = path.with_extension("tmp");
    let mut file = io::BufWriter::new(fs::File::create(&tmp)?);
    snapshot.save(&mut file)?;
    file.flush()?;
    drop(file);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let lease_file = args.data_dir.as_ref().map(|d| d.join("leases.jsonl"));
    if let Some(dir) = &args.data_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let registry = match &lease_file {
        Some(path) if path.exists() => load_leases(path)?,
        _ => LeaseRegistry::default_pool(),
    };
    let leases = Arc::new(RwLock::new(registry));
    let logs = shared_store();

    let ip = args.bind.ip();
    let syslog = SyslogListener::bind(SocketAddr::new(ip, args.syslog_port), logs.clone())
        .context("binding the syslog listener")?;
    let dhcp = DhcpListener::bind(SocketAddr::new(ip, args.dhcp_port), leases.clone())
        .context("binding the DHCP listener")?;
    log::info!("syslog on udp {}, dhcp on udp {}", syslog.local_addr(), dhcp.local_addr());

    let config = ControllerConfig {
        data_dir: args.data_dir.clone(),
        log_sink: args.log_sink.unwrap_or(syslog.local_addr()),
        ..ControllerConfig::default()
    };
    let state = AppState::with_registries(config, logs, leases.clone());

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.bind)
            .await
            .with_context(|| format!("binding {}", args.bind))?;
        log::info!("http on {}", listener.local_addr()?);
        if let Some(path) = lease_file.clone() {
            let leases = leases.clone();
            tokio::spawn(async move {
                let mut tick = tokio::time::interval(std::time::Duration::from_secs(10));
                loop {
                    tick.tick().await;
                    if let Err(e) = save_leases(&leases, &path) {
                        log::warn!("saving leases: {e:#}");
                    }
                }
            });
        }
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                log::info!("shutting down");
            })
            .await?;
        anyhow::Ok(())
    })?;

    syslog.shutdown();
    dhcp.shutdown();
    if let Some(path) = lease_file {
        save_leases(&leases, &path)?;
    }
    Ok(())
}

fn routes(path: &Path, only: Option<&str>) -> Result<()> {
    let topo = parse_adjacency(&read(path)?)?;
    if let Some(label) = only {
        topo.find(label)?;
    }
    let mut out = io::stdout().lock();
    for config in compile_node_configs(&topo) {
        if only.is_some_and(|l| l != config.node.label) {
            continue;
        }
        writeln!(out, "{} {} {}", config.node, config.address, config.name_prefix)?;
        for r in &config.ip_routes {
            writeln!(out, "  ip  {:<18} via {:<6} cost {}", r.destination, r.next_hop, r.cost)?;
        }
        for r in &config.ndn_routes {
            writeln!(out, "  ndn {:<18} via {:<6} cost {}", r.destination, r.next_hop, r.cost)?;
        }
        for r in &config.ndn_alternates {
            writeln!(out, "  alt {:<18} via {:<6} cost {}", r.destination, r.next_hop, r.cost)?;
        }
    }
    Ok(())
}

fn run(path: &Path, out: Option<PathBuf>, csv: Option<PathBuf>, bucket_ms: u64) -> Result<()> {
    if bucket_ms == 0 {
        bail!("--bucket-ms must be positive");
    }
    let spec = parse_experiment_spec(&read(path)?)?;
    let bucket = SimTime::from_millis(bucket_ms);
    let dir = out
        .map(|root| RunDirectory::create(root, &spec))
        .transpose()?
        .map(Mutex::new);
    let summaries = run_experiment_with(&spec, |rep| {
        if let Some(dir) = &dir {
            let written = dir.lock().unwrap_or_else(|e| e.into_inner()).write_repetition(&rep);
            if let Err(e) = written {
                log::error!("writing repetition {}: {e}", rep.repetition);
            }
        }
        summarize_repetition(&spec, &rep, bucket)
    })?;
    if let Some(dir) = dir {
        let dir = dir.into_inner().unwrap_or_else(|e| e.into_inner());
        let root = dir.root().to_path_buf();
        dir.finish()?;
        eprintln!("run directory: {}", root.display());
    }

    let consumer = &spec.consumer.label;
    for s in &summaries {
        let means: Vec<String> = s
            .windows
            .iter()
            .map(|w| {
                let mean = s
                    .aggregate(Metric::ThroughputMbps, consumer, *w)
                    .and_then(|a| a.mean)
                    .map_or("-".to_string(), |m| format!("{m:.2}"));
                format!("[{}, {}) {mean} Mb/s", w.0, w.1)
            })
            .collect();
        eprintln!("rep {:03}: {}", s.repetition, means.join("  "));
    }
    let text = export_runs_csv(&summaries);
    match csv {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn bench(nodes: usize, prefixes: usize, csv: Option<PathBuf>) -> Result<()> {
    if nodes < 2 {
        bail!("--nodes must be at least 2");
    }
    let report = benchmark_prefix_install(nodes, prefixes);
    for p in &report.phases {
        println!("{:<12} {:>10.4} s", format!("{:?}", p.phase), p.seconds);
    }
    for t in &report.table_sizes {
        println!("{:<12} {:>10} FIB entries", t.node.label, t.remote_entries);
    }
    if let Some(path) = csv {
        let mut series = phase_runtime_series(&report);
        series.extend(table_size_series(&report));
        fs::write(&path, export_csv(&series))?;
    }
    Ok(())
}

fn plan(topology: &Path, leases: &Path, log_sink: SocketAddr) -> Result<()> {
    let topo = parse_adjacency(&read(topology)?)?;
    let configs = compile_node_configs(&topo);
    let registry = load_leases(leases)?;
    let plans: Vec<_> = registry
        .leases()
        .filter_map(|lease| {
            let config = configs.iter().find(|c| c.address == lease.ip)?;
            Some(emit_provisioning_plan(lease, config, log_sink))
        })
        .collect();
    serde_json::to_writer_pretty(io::stdout().lock(), &plans)?;
    println!();
    Ok(())
}
