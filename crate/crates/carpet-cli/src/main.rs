//! Command-line driver: validation reports, graph exports, constants tables,
//! extension audits, trace and metric experiments, and the sliding scan.

use anyhow::Context;
use carpet::besov::trace_ratio_experiment;
use carpet::brick::{brick_function, chain_resistance, linear_boundary_function};
use carpet::geometry::CarpetSpec;
use carpet::io::{builtin_spec, fmt_float, spec_from_json, spec_hash, CsvDoc, TOOL_VERSION};
use carpet::metric::{sliding_scan, theta_ratio_scan};
use carpet::poincare::{format_contact_key, renorm_factor, sigma_estimate};
use carpet::rational::{format_ratio, parse_ratio, Ratio};
use carpet::{Error, SolverConfig};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "carpet", version, about = "Unconstrained Sierpinski carpet laboratory")]
struct Cli {
    /// JSON config file; command-line flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Relative CG residual target.
    #[arg(long, global = true)]
    cg_tol: Option<f64>,
    /// CG iteration cap as a multiple of the dimension.
    #[arg(long, global = true)]
    cg_max_mult: Option<usize>,
    /// Ritz stabilization target for gap solves.
    #[arg(long, global = true)]
    lanczos_tol: Option<f64>,
    /// Seed for all randomized experiments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (also via CARPET_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArg {
    /// Builtin name (`sc3`, `slide:z=p/q`) or a path to a spec JSON file.
    spec: String,
}

#[derive(Subcommand)]
enum Command {
    /// Check the defining conditions and write a report.
    Validate(SpecArg),
    /// Export the level-n adjacency graph as an edge list.
    Graph {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2)]
        level: u32,
    },
    /// Per-level constants and the renormalization estimate.
    Constants {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 4)]
        n_max: u32,
        /// Blowup depth for the pair constants table.
        #[arg(long, default_value_t = 1)]
        sigma_m: u32,
        /// Level cap for the contact-class scan.
        #[arg(long, default_value_t = 2)]
        sigma_levels: u32,
    },
    /// Building-brick extension audit.
    Extension {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 3)]
        n: u32,
    },
    /// Harmonic trace ratio experiment.
    Trace {
        #[command(flatten)]
        spec: SpecArg,
        /// Skeleton level.
        #[arg(long, default_value_t = 0)]
        n: u32,
        /// Solve level.
        #[arg(long, default_value_t = 3)]
        m: u32,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Renormalization factor to use; estimated when absent.
        #[arg(long)]
        r_hat: Option<f64>,
    },
    /// Resistance vs geodesic exponent scan.
    Metrics {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 4)]
        m: u32,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long)]
        r_hat: Option<f64>,
    },
    /// Sliding-family scan over the slide parameter.
    Slide {
        /// Grid step, e.g. 1/448.
        #[arg(long, default_value = "1/112")]
        grid: String,
        /// Scan range, inclusive.
        #[arg(long, default_value = "0")]
        z_min: String,
        #[arg(long, default_value = "1/14")]
        z_max: String,
        #[arg(long, default_value_t = 3)]
        m: u32,
        /// Mesh level for the modulus column.
        #[arg(long, default_value_t = 2)]
        modulus_level: u32,
        /// Euclidean window for the modulus.
        #[arg(long, default_value = "1/100")]
        delta: String,
    },
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    cg_tol: Option<f64>,
    cg_max_mult: Option<usize>,
    lanczos_tol: Option<f64>,
    seed: Option<u64>,
    threads: Option<usize>,
}

struct Run {
    cfg: SolverConfig,
    seed: u64,
    out: PathBuf,
    config_hash: String,
}

const EXIT_PARSE: i32 = 2;
const EXIT_VALIDATION: i32 = 3;

/// Input that failed to parse (config files, fraction strings).
#[derive(Debug)]
struct ParseFailure(String);

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "parse error: {}", self.0)
    }
}

impl std::error::Error for ParseFailure {}
const EXIT_RESOURCE: i32 = 4;
const EXIT_SOLVER: i32 = 5;

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::LevelTooLarge { .. } => EXIT_RESOURCE,
        Error::NonConvergence { .. } => EXIT_SOLVER,
        Error::InvalidSpec(_) | Error::OutOfRange(_) => EXIT_VALIDATION,
        _ => 1,
    }
}

fn load_spec(name: &str) -> Result<CarpetSpec, Error> {
    if name == "sc3" || name.starts_with("slide:") {
        return builtin_spec(name);
    }
    let text = std::fs::read_to_string(name)
        .map_err(|e| Error::InvalidSpec(format!("cannot read {name}: {e}")))?;
    spec_from_json(&text)
}

fn write_artifact(run: &Run, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&run.out)
        .with_context(|| format!("creating {}", run.out.display()))?;
    let path = run.out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn csv_with_meta(run: &Run, doc: &mut CsvDoc, spec: Option<&CarpetSpec>) {
    if let Some(s) = spec {
        doc.meta("spec_hash", &spec_hash(s));
    }
    doc.meta("config_hash", &run.config_hash);
    doc.meta("tool_version", TOOL_VERSION);
}

fn main() {
    let cli = Cli::parse();
    let code = match real_main(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<ParseFailure>().is_some() {
                EXIT_PARSE
            } else {
                match err.downcast_ref::<Error>() {
                    Some(e) => exit_code_for(e),
                    None => 1,
                }
            }
        }
    };
    std::process::exit(code);
}

fn real_main(cli: Cli) -> anyhow::Result<()> {
    let file_cfg: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| ParseFailure(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let mut cfg = SolverConfig::default();
    if let Some(v) = cli.cg_tol.or(file_cfg.cg_tol) {
        cfg.cg_tol = v;
    }
    if let Some(v) = cli.cg_max_mult.or(file_cfg.cg_max_mult) {
        cfg.cg_max_mult = v;
    }
    if let Some(v) = cli.lanczos_tol.or(file_cfg.lanczos_tol) {
        cfg.lanczos_tol = v;
    }
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(0x5EED);
    cfg.seed = seed;

    let threads = cli
        .threads
        .or(file_cfg.threads)
        .or_else(|| std::env::var("CARPET_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("building thread pool")?;
    }

    let config_hash = carpet::io::hash_text(&format!(
        "cg_tol={:e};cg_max_mult={};lanczos_tol={:e};seed={}",
        cfg.cg_tol, cfg.cg_max_mult, cfg.lanczos_tol, seed
    ));
    let run = Run { cfg, seed, out: cli.out.clone(), config_hash };

    match cli.command {
        Command::Validate(spec_arg) => cmd_validate(&run, &spec_arg.spec),
        Command::Graph { spec, level } => cmd_graph(&run, &spec.spec, level),
        Command::Constants { spec, n_max, sigma_m, sigma_levels } => {
            cmd_constants(&run, &spec.spec, n_max, sigma_m, sigma_levels)
        }
        Command::Extension { spec, n } => cmd_extension(&run, &spec.spec, n),
        Command::Trace { spec, n, m, trials, r_hat } => {
            cmd_trace(&run, &spec.spec, n, m, trials, r_hat)
        }
        Command::Metrics { spec, m, pairs, r_hat } => {
            cmd_metrics(&run, &spec.spec, m, pairs, r_hat)
        }
        Command::Slide { grid, z_min, z_max, m, modulus_level, delta } => {
            cmd_slide(&run, &grid, &z_min, &z_max, m, modulus_level, &delta)
        }
    }
}

fn cmd_validate(run: &Run, name: &str) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let report = spec.validate();
    let mut rows = Vec::new();
    for (check, result) in report.all() {
        rows.push(serde_json::json!({
            "check": check,
            "pass": result.passed(),
            "witness": match result {
                carpet::geometry::CheckResult::Pass => serde_json::Value::Null,
                carpet::geometry::CheckResult::Fail(w) => serde_json::Value::String(w.clone()),
            },
        }));
    }
    let doc = serde_json::json!({
        "spec_hash": spec_hash(&spec),
        "k": spec.k,
        "N": spec.n_maps(),
        "ok": report.ok(),
        "checks": rows,
    });
    write_artifact(run, &format!("validate_{}.json", sanitize(name)), &format!("{doc:#}\n"))?;
    if !report.ok() {
        let (check, witness) = report.first_failure().unwrap();
        anyhow::bail!(Error::InvalidSpec(format!("{check}: {witness}")));
    }
    println!("validate {name}: ok");
    Ok(())
}

fn cmd_graph(run: &Run, name: &str, level: u32) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let graph = carpet::graph::build_graph(&spec, level, None)?;
    let text = graph.export_edge_list();
    write_artifact(run, &format!("graph_{}_L{}.txt", sanitize(name), level), &text)?;
    // the harmonic cross function doubles as a word,value export example
    let h = carpet::brick::cross_minimizer(&spec, level, &run.cfg)?;
    let csv = carpet::graph::export_function_csv(&graph, &h.values);
    write_artifact(run, &format!("cross_{}_L{}.csv", sanitize(name), level), &csv)?;
    Ok(())
}

fn cmd_constants(
    run: &Run,
    name: &str,
    n_max: u32,
    sigma_m: u32,
    sigma_levels: u32,
) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let est = renorm_factor(&spec, n_max, &run.cfg)?;
    let mut doc = CsvDoc::new("n,lambda_n,cross_R_n,cross_R_bt,r_lambda,r_cross");
    for d in &est.per_level {
        doc.row(&[
            d.n.to_string(),
            fmt_float(d.lambda),
            fmt_float(d.cross_lr),
            fmt_float(d.cross_bt),
            fmt_float(d.r_lambda),
            fmt_float(d.r_cross),
        ]);
    }
    doc.meta("r_hat", &fmt_float(est.r_hat));
    doc.meta("theta_hat", &fmt_float(est.theta_hat));
    doc.meta("sigma_exponent", &fmt_float(est.sigma_exponent));
    doc.meta("d_h", &fmt_float(est.d_h));
    doc.meta("d_w", &fmt_float(est.d_w));
    doc.meta("valid_bracket", &est.valid.to_string());
    doc.meta("estimator_gap", &fmt_float(est.estimator_gap));
    csv_with_meta(run, &mut doc, Some(&spec));
    write_artifact(
        run,
        &format!("constants_{}_n{}.csv", sanitize(name), n_max),
        &doc.render(),
    )?;

    let classes = sigma_estimate(&spec, sigma_m, sigma_levels, &run.cfg)?;
    let mut doc = CsvDoc::new("level,contact_class,multiplicity,sigma_m");
    for c in &classes.classes {
        doc.row(&[
            c.level.to_string(),
            format_contact_key(&c.key),
            c.multiplicity.to_string(),
            fmt_float(c.sigma),
        ]);
    }
    doc.meta("sigma_estimate", &fmt_float(classes.value));
    doc.meta("blowup_m", &sigma_m.to_string());
    csv_with_meta(run, &mut doc, Some(&spec));
    write_artifact(
        run,
        &format!("sigma_classes_{}_m{}.csv", sanitize(name), sigma_m),
        &doc.render(),
    )?;
    println!(
        "constants {name}: r_hat = {:.6} (lambda {:.6}, cross {:.6})",
        est.r_hat, est.r_lambda_final, est.r_cross_final
    );
    Ok(())
}

fn cmd_extension(run: &Run, name: &str, n: u32) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let mut audits = Vec::new();
    for level in 2..=n {
        let b = brick_function(&spec, level, &run.cfg)?;
        let lb = linear_boundary_function(&spec, level, &run.cfg)?;
        let denom: f64 = b.ingredient_energies.iter().sum();
        let annulus_vs_two_below = if level >= 3 {
            let older = carpet::brick::cross_minimizer(&spec, level - 2, &run.cfg)?;
            let annulus = carpet::brick::annulus_minimizer(&spec, level - 1, &run.cfg)?;
            Some(annulus.energy / older.energy)
        } else {
            None
        };
        audits.push(serde_json::json!({
            "level": level,
            "brick_energy": b.energy,
            "cross_energy": b.ingredient_energies[0],
            "prev_cross_energy": b.ingredient_energies[1],
            "prev_annulus_energy": b.ingredient_energies[2],
            "brick_constant": b.energy / denom,
            "brick_boundary_error": b.raw_boundary_error,
            "linear_boundary_energy": lb.energy,
            "linear_boundary_error": lb.boundary_max_error,
            "annulus_vs_two_below": annulus_vs_two_below,
        }));
    }
    let mut chains = Vec::new();
    for l in [2u32, 3] {
        for depth in 1..=2u32 {
            let r = chain_resistance(&spec, depth, l, &run.cfg)?;
            chains.push(serde_json::json!({"l": l, "n": depth, "resistance": r}));
        }
    }
    let doc = serde_json::json!({
        "spec_hash": spec_hash(&spec),
        "config_hash": run.config_hash,
        "levels": audits,
        "chains": chains,
    });
    write_artifact(run, &format!("extension_{}_n{}.json", sanitize(name), n), &format!("{doc:#}\n"))?;
    Ok(())
}

fn cmd_trace(
    run: &Run,
    name: &str,
    n: u32,
    m: u32,
    trials: usize,
    r_hat: Option<f64>,
) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let r_hat = match r_hat {
        Some(v) => v,
        None => renorm_factor(&spec, 2.min(m.saturating_sub(1)).max(1), &run.cfg)?.r_hat,
    };
    let rep = trace_ratio_experiment(&spec, n, m, r_hat, trials, run.seed, &run.cfg)?;
    let mut doc = CsvDoc::new("trial,seminorm_sq,energy_proxy,ratio");
    for t in &rep.trials {
        doc.row(&[
            t.trial.to_string(),
            fmt_float(t.seminorm_sq),
            fmt_float(t.energy_proxy),
            fmt_float(t.ratio),
        ]);
    }
    doc.row(&[
        "summary".into(),
        fmt_float(rep.min_ratio),
        fmt_float(rep.max_ratio),
        fmt_float(rep.spread),
    ]);
    doc.meta("n", &n.to_string());
    doc.meta("m", &m.to_string());
    doc.meta("r_hat", &fmt_float(r_hat));
    csv_with_meta(run, &mut doc, Some(&spec));
    write_artifact(run, &format!("trace_{}_n{}_m{}.csv", sanitize(name), n, m), &doc.render())?;
    println!("trace {name}: spread = {:.3}", rep.spread);
    Ok(())
}

fn cmd_metrics(
    run: &Run,
    name: &str,
    m: u32,
    pairs: usize,
    r_hat: Option<f64>,
) -> anyhow::Result<()> {
    let spec = load_spec(name)?;
    let r_hat = match r_hat {
        Some(v) => v,
        None => renorm_factor(&spec, 2, &run.cfg)?.r_hat,
    };
    let scan = theta_ratio_scan(&spec, pairs, m, r_hat, run.seed, &run.cfg)?;
    let mut doc = CsvDoc::new("geodesic,resistance,ratio");
    for e in &scan.entries {
        doc.row(&[fmt_float(e.geodesic), fmt_float(e.resistance), fmt_float(e.ratio)]);
    }
    doc.meta("theta", &fmt_float(scan.theta));
    doc.meta("m", &m.to_string());
    doc.meta("spread", &fmt_float(scan.spread));
    csv_with_meta(run, &mut doc, Some(&spec));
    write_artifact(run, &format!("metrics_{}_m{}.csv", sanitize(name), m), &doc.render())?;
    println!("metrics {name}: spread = {:.3} over {} pairs", scan.spread, scan.entries.len());
    Ok(())
}

fn cmd_slide(
    run: &Run,
    grid: &str,
    z_min: &str,
    z_max: &str,
    m: u32,
    modulus_level: u32,
    delta: &str,
) -> anyhow::Result<()> {
    let step = parse_ratio(grid).map_err(ParseFailure)?;
    let lo = parse_ratio(z_min).map_err(ParseFailure)?;
    let hi = parse_ratio(z_max).map_err(ParseFailure)?;
    let delta_r = parse_ratio(delta).map_err(ParseFailure)?;
    let mut zs: Vec<Ratio> = Vec::new();
    let mut z = lo.clone();
    while z <= hi {
        zs.push(z.clone());
        z = &z + &step;
    }
    let samples = sliding_scan(
        &zs,
        m,
        modulus_level,
        carpet::rational::ratio_to_f64(&delta_r),
        &run.cfg,
    )?;
    let mut doc = CsvDoc::new(
        "z,cross_R,R_probe_1,R_probe_2,R_probe_3,modulus_delta,r_hat,m,error_bound",
    );
    for s in &samples {
        doc.row(&[
            format_ratio(&s.z),
            fmt_float(s.cross_r),
            fmt_float(s.probe_r[0]),
            fmt_float(s.probe_r[1]),
            fmt_float(s.probe_r[2]),
            fmt_float(s.modulus),
            fmt_float(s.r_hat),
            s.level.to_string(),
            fmt_float(s.error_bound),
        ]);
    }
    doc.meta("delta", delta);
    doc.meta("modulus_level", &modulus_level.to_string());
    csv_with_meta(run, &mut doc, None);
    write_artifact(run, &format!("slide_m{}.csv", m), &doc.render())?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
