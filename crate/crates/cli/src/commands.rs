//! Subcommand implementations.
//!
//! Every file lands via write-to-temp-then-rename, so readers never see a
//! partial artifact and a crashed run leaves at most a stray temp file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dosm_core::doco::{default_params, dmfw_block_sizes, Role};
use dosm_core::eval::{sublinearity_fit, RegretTrace};
use dosm_core::network::{build_lazy_metropolis, spectral, NetworkError, Topology};
use dosm_core::rng::SeedStream;
use dosm_core::verify;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::runner::{self, execute};
use crate::{plot, CliError};

pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// `trace.csv` stays as-is for a single seed; with several seeds each run
/// writes `trace-s<seed>.csv`.
fn seeded_path(dir: &Path, name: &str, seed: u64, multi: bool) -> PathBuf {
    let base = dir.join(name);
    if !multi {
        return base;
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let ext = base
        .extension()
        .map(|s| format!(".{}", s.to_string_lossy()))
        .unwrap_or_default();
    base.with_file_name(format!("{stem}-s{seed}{ext}"))
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Default)]
pub struct SpectrumArgs {
    pub config: Option<PathBuf>,
    /// `path:4`, `ring:8`, `complete:5`, `star:6`, or `random:6:2`.
    pub topology: Option<String>,
    /// Edge-list file, one `i j` pair per line.
    pub edges: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub dimension: Option<usize>,
    pub export_matrix: Option<PathBuf>,
}

fn parse_topology_arg(arg: &str, seed: u64) -> Result<Topology, CliError> {
    let parts: Vec<&str> = arg.split(':').collect();
    let bad = || CliError::invalid(format!("cannot parse topology {arg:?}"));
    let n: usize = parts.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let topo = match parts[0] {
        "path" if parts.len() == 2 => Topology::path(n),
        "ring" if parts.len() == 2 => Topology::ring(n),
        "complete" if parts.len() == 2 => Topology::complete(n),
        "star" if parts.len() == 2 => Topology::star(n),
        "random" if parts.len() == 3 => {
            let extra: usize = parts[2].parse().map_err(|_| bad())?;
            let mut rng = SeedStream::new(seed).stream("net");
            Topology::random_connected(n, extra, &mut rng)
        }
        _ => return Err(bad()),
    };
    topo.map_err(|e| CliError::invalid(format!("topology: {e}")))
}

/// Connected components of a loose edge list, for the error message when
/// the strict parser rejects a disconnected graph.
fn components_of(text: &str) -> Vec<Vec<usize>> {
    let mut edges = Vec::new();
    let mut max_node = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().filter_map(|t| t.parse::<usize>().ok());
        if let (Some(a), Some(b)) = (it.next(), it.next()) {
            max_node = max_node.max(a).max(b);
            edges.push((a, b));
        }
    }
    let n = max_node + 1;
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

fn load_edge_topology(path: &Path) -> Result<Topology, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))?;
    Topology::from_edge_list(&text).map_err(|e| match e {
        NetworkError::Disconnected => {
            let comps: Vec<String> = components_of(&text)
                .iter()
                .map(|c| {
                    let ids: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                    format!("[{}]", ids.join(" "))
                })
                .collect();
            CliError::invalid(format!(
                "graph is not connected; components: {}",
                comps.join(" ")
            ))
        }
        other => CliError::invalid(format!("edge list: {e}", e = other)),
    })
}

pub fn cmd_spectrum(args: &SpectrumArgs, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let sources =
        args.config.is_some() as u8 + args.topology.is_some() as u8 + args.edges.is_some() as u8;
    if sources != 1 {
        return Err(CliError::invalid(
            "pass exactly one of --config, --topology, or --edges",
        ));
    }
    let (topo, mut horizon, mut dim) = if let Some(path) = &args.config {
        let cfg = RunConfig::from_path(path)?;
        let topo = cfg.build_topology(&SeedStream::new(seed))?;
        (topo, cfg.horizon, cfg.dimension)
    } else if let Some(arg) = &args.topology {
        (parse_topology_arg(arg, seed)?, 1024, 2)
    } else {
        (load_edge_topology(args.edges.as_ref().unwrap())?, 1024, 2)
    };
    if let Some(t) = args.horizon {
        horizon = t;
    }
    if let Some(d) = args.dimension {
        dim = d;
    }
    if horizon == 0 || dim == 0 {
        return Err(CliError::invalid("horizon and dimension must be positive"));
    }

    let a = build_lazy_metropolis(&topo);
    let profile =
        spectral(&a, horizon, 1).map_err(|e| CliError::invalid(format!("topology: {e}")))?;
    println!("nodes={} edges={}", topo.nodes(), topo.edges().len());
    println!("sigma2={}", profile.sigma2);
    println!("rho={}", profile.rho);
    println!("theta={}", profile.theta);
    println!("C={}", profile.c);
    println!("C_prime={}", profile.c_prime);

    println!("default parameters at G=1, d={dim}, T={horizon}:");
    let roles = [
        ("smooth-blocked", Role::SmoothDoco),
        ("linear-blocked", Role::LinearDoco),
        ("perturbed-leader", Role::Dftpl),
    ];
    for (label, role) in roles {
        let p = default_params(&profile, 1.0, dim, horizon, role)
            .map_err(|e| CliError::runtime(format!("parameters for {label}: {e}")))?;
        println!(
            "params {label}: L={} K={} theta={} eta={}",
            p.l, p.k, p.theta, p.eta
        );
    }
    let (stages, inner) = dmfw_block_sizes(&profile, horizon)
        .map_err(|e| CliError::runtime(format!("chain sizes: {e}")))?;
    let p = default_params(&profile, 1.0, dim, horizon, Role::DmfwInner)
        .map_err(|e| CliError::runtime(format!("chain parameters: {e}")))?;
    println!(
        "params chain: stages={stages} inner_block={inner} theta={} eta={}",
        p.theta, p.eta
    );

    if let Some(path) = &args.export_matrix {
        let path = out_dir.join(path);
        atomic_write(&path, a.to_csv().as_bytes())?;
        println!("mixing matrix written to {}", path.display());
    }
    Ok(())
}

// --------------------------------------------------------------------- run

pub fn cmd_run(config: &Path, seed_override: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::from_path(config)?;
    let seeds = seed_override
        .map(|s| vec![s])
        .unwrap_or_else(|| cfg.seeds.clone());
    let multi = seeds.len() > 1;
    for seed in seeds {
        let keep = cfg.output.decisions.is_some();
        let out = execute(&cfg, seed, keep)?;
        let comments = vec![
            format!("config {}", cfg.hash(seed)),
            format!(
                "nominal_horizon {} padded_horizon {} block {} optimum {}",
                out.nominal_horizon, out.padded_horizon, out.block, out.optimum.value
            ),
        ];
        let trace_path = seeded_path(out_dir, &cfg.output.trace, seed, multi);
        atomic_write(&trace_path, out.trace.to_csv(&comments).as_bytes())?;
        if let Some(name) = &cfg.output.decisions {
            let dump = runner::decisions_csv(&cfg, seed, &out)?;
            atomic_write(&seeded_path(out_dir, name, seed, multi), dump.as_bytes())?;
        }
        let finals = out.trace.final_regrets();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let finals_str: Vec<String> = finals.iter().map(|r| format!("{r:.4}")).collect();
        println!(
            "run algo={} seed={seed} T={} padded={} alpha={:.6} optimum={:.6} \
             mean_final_regret={mean:.4} final_regret=[{}] max_consensus={:.3e} \
             exchanges_per_round={:.2} trace={}",
            cfg.algo_label(),
            out.nominal_horizon,
            out.padded_horizon,
            out.alpha,
            out.optimum.value,
            finals_str.join(", "),
            out.max_consensus,
            out.exchanges as f64 / out.nominal_horizon as f64,
            trace_path.display(),
        );
    }
    Ok(())
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub horizon: usize,
    /// Final alpha-regret averaged over seeds and nodes.
    pub mean: f64,
    /// Standard error of the per-seed means.
    pub se: f64,
    /// Log-log slope fitted over horizons up to this row; `None` until four
    /// horizons with positive mean regret exist.
    pub slope: Option<f64>,
}

/// Final mean regret per horizon, across the config's seeds.
pub fn sweep_series(
    cfg: &RunConfig,
    horizons: &[usize],
    jobs: Option<usize>,
) -> Result<Vec<SweepRow>, CliError> {
    if horizons.is_empty() {
        return Err(CliError::invalid("sweep needs at least one horizon"));
    }
    if horizons.iter().any(|&t| t == 0) {
        return Err(CliError::invalid("horizons must be positive"));
    }
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    let grid: Vec<(usize, u64)> = hs
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    let per_run: Result<Vec<f64>, CliError> = pool.install(|| {
        grid.par_iter()
            .map(|&(t, s)| {
                let out = execute(&cfg.with_horizon(t), s, false)?;
                let finals = out.trace.final_regrets();
                Ok(finals.iter().sum::<f64>() / finals.len() as f64)
            })
            .collect()
    });
    let per_run = per_run?;

    let s = cfg.seeds.len();
    let mut rows = Vec::with_capacity(hs.len());
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (bi, &t) in hs.iter().enumerate() {
        let chunk = &per_run[bi * s..(bi + 1) * s];
        let mean = chunk.iter().sum::<f64>() / s as f64;
        let var = if s > 1 {
            chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s as f64 - 1.0)
        } else {
            0.0
        };
        pts.push((t as f64, mean));
        rows.push(SweepRow {
            horizon: t,
            mean,
            se: (var / s as f64).sqrt(),
            slope: sublinearity_fit(&pts).ok().map(|f| f.slope),
        });
    }
    if rows.last().and_then(|r| r.slope).is_none() {
        log::warn!(
            "fewer than 4 horizons with positive mean regret; slope column left empty"
        );
    }
    Ok(rows)
}

pub fn sweep_csv(cfg: &RunConfig, rows: &[SweepRow]) -> String {
    let mut text = format!("# config {}\n", cfg.hash_base());
    text.push_str("T,mean_final_regret,se,slope_so_far\n");
    for r in rows {
        let slope = r.slope.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!("{},{},{},{slope}\n", r.horizon, r.mean, r.se));
    }
    text
}

pub fn cmd_sweep(
    config: &Path,
    horizons_flag: &[usize],
    seed_override: Option<u64>,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::from_path(config)?;
    if let Some(s) = seed_override {
        cfg.seeds = vec![s];
    }
    let horizons = if horizons_flag.is_empty() {
        cfg.sweep_horizons.clone()
    } else {
        horizons_flag.to_vec()
    };
    if horizons.is_empty() {
        return Err(CliError::invalid(
            "no horizons: pass --horizons or set sweep_horizons in the config",
        ));
    }
    let rows = sweep_series(&cfg, &horizons, jobs)?;
    for r in &rows {
        let slope = r
            .slope
            .map(|v| format!("{v:.4}"))
            .unwrap_or_else(|| "n/a".into());
        println!(
            "T={} mean_final_regret={:.6} se={:.6} slope_so_far={slope}",
            r.horizon, r.mean, r.se
        );
    }
    let path = out_dir.join(&cfg.output.sweep);
    atomic_write(&path, sweep_csv(&cfg, &rows).as_bytes())?;
    println!("sweep written to {}", path.display());
    Ok(())
}

// ------------------------------------------------------------------ verify

const SUITES: [(&str, fn(u64) -> verify::SuiteReport); 10] = [
    ("boosting-inequality", verify::boosting_inequality_suite),
    ("reward-properties", verify::reward_property_suite),
    ("scale-samplers", verify::sampler_suite),
    ("estimator-unbiasedness", verify::estimator_unbiasedness_suite),
    ("gossip-contraction", verify::gossip_contraction_suite),
    (
        "perturbed-leader-consensus",
        verify::perturbed_leader_consensus_suite,
    ),
    ("accelerated-consensus", verify::accelerated_consensus_suite),
    ("chain-feasibility", verify::chain_feasibility_suite),
    ("linear-regret-bounds", verify::linear_regret_bound_suite),
    ("regret-decomposition", verify::regret_decomposition_suite),
];

pub fn cmd_verify(suite: Option<&str>, seed: u64) -> Result<(), CliError> {
    let reports = match suite {
        None => SUITES
            .iter()
            .map(|(_, run)| {
                let r = run(seed);
                println!("{r}");
                r
            })
            .collect::<Vec<_>>(),
        Some(name) => {
            let (_, run) = SUITES.iter().find(|(n, _)| *n == name).ok_or_else(|| {
                let names: Vec<&str> = SUITES.iter().map(|(n, _)| *n).collect();
                CliError::invalid(format!(
                    "unknown suite {name:?}; available: {}",
                    names.join(", ")
                ))
            })?;
            let r = run(seed);
            println!("{r}");
            vec![r]
        }
    };
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        Err(CliError::runtime(format!(
            "{failed} of {} suites failed",
            reports.len()
        )))
    } else {
        Ok(())
    }
}

// -------------------------------------------------------------------- plot

pub fn cmd_plot(input: &Path, output: Option<&Path>, out_dir: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::invalid(format!("cannot read {}: {e}", input.display())))?;
    let trace =
        RegretTrace::from_csv(&text).map_err(|e| CliError::invalid(format!("trace: {e}")))?;
    let svg = plot::render(&trace);
    let path = match output {
        Some(p) => out_dir.join(p),
        None => {
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".into());
            out_dir.join(format!("{stem}.svg"))
        }
    };
    atomic_write(&path, svg.as_bytes())?;
    println!("plot written to {}", path.display());
    Ok(())
}
