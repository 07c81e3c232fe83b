//! `wlibor`: fit, price, surface, simulate and verify from a JSON model config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wishart_libor::affine::AffineModel;
use wishart_libor::analytics::{
    atm_swaption_surface, atm_term_structure, build_caplet_surface, model_hash, par_swap_rate, SurfaceValues,
    SURFACE_SCHEMA_VERSION,
};
use wishart_libor::caps::{price_cap, price_caplet, price_floorlet, CapletSpec, Priced};
use wishart_libor::config::{ConfigError, ModelConfig};
use wishart_libor::libor::LiborModel;
use wishart_libor::oracle::{mc_price, simulate_jump_ou, simulate_wishart, Instrument, McConfig};
use wishart_libor::swaptions::{price_swaption, Side, SwaptionSpec};
use wishart_libor::verify::{self, Suite};

#[derive(Parser)]
#[command(name = "wlibor", version, about = "Wishart Libor market model toolkit")]
struct Cli {
    /// Worker threads for parallel pricing and simulation.
    #[arg(long, env = "WLIBOR_THREADS", global = true)]
    threads: Option<usize>,
    /// Overrides the Monte Carlo seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the martingale family to the configured curve.
    Fit { config: PathBuf },
    /// Price one instrument.
    Price(PriceArgs),
    /// Write an implied-volatility or price surface.
    Surface(SurfaceArgs),
    /// Dump simulated state paths to CSV.
    Simulate(SimulateArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct PriceArgs {
    config: PathBuf,
    #[command(subcommand)]
    instrument: InstrumentArg,
    /// Cross-check against Monte Carlo; fails if the gap exceeds 3 standard errors.
    #[arg(long, global = true)]
    verify: bool,
    /// Monte Carlo path count (defaults to the config).
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand)]
enum InstrumentArg {
    /// Caplet on the Libor fixing at T_k; strike defaults to the forward.
    Caplet {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        strike: Option<f64>,
    },
    Floorlet {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        strike: Option<f64>,
    },
    Cap {
        #[arg(long)]
        first: usize,
        #[arg(long)]
        last: usize,
        #[arg(long)]
        strike: f64,
    },
    /// Swaption expiring at T_i on the swap over (T_i, T_m]; strike defaults to the par rate.
    Swaption {
        #[arg(long)]
        i: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        strike: Option<f64>,
        #[arg(long, value_enum, default_value = "receiver")]
        side: SideArg,
        /// Edgeworth order (defaults to the config).
        #[arg(long)]
        order: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Receiver,
    Payer,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SurfaceKindArg {
    Caplet,
    SwaptionAtm,
    AtmTerm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ValuesArg {
    Vols,
    Prices,
}

#[derive(Args)]
struct SurfaceArgs {
    config: PathBuf,
    #[arg(long, value_enum)]
    kind: SurfaceKindArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// CSV cell contents.
    #[arg(long, value_enum, default_value = "vols")]
    values: ValuesArg,
    /// Comma-separated strikes (caplet); default is the first forward ±4%.
    #[arg(long, value_delimiter = ',')]
    strikes: Option<Vec<f64>>,
    /// Comma-separated tenor indices (rows; expiries for swaptions).
    #[arg(long, value_delimiter = ',')]
    tenors: Option<Vec<usize>>,
    /// Comma-separated swap lengths in periods (swaption columns).
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
}

#[derive(Args)]
struct SimulateArgs {
    config: PathBuf,
    #[arg(long)]
    horizon: f64,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only the seed is read from it; the suite uses the benchmark setup.
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "quick")]
    suite: SuiteArg,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Quick,
    Full,
}

/// Exit status classes: 1 internal, 2 domain or config, 3 verification.
#[derive(Debug)]
enum Failure {
    Internal(String),
    Domain(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Domain(_) => 2,
            Failure::Verification(_) => 3,
        }
    }
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Fit { config } => cmd_fit(&config),
        Command::Price(a) => cmd_price(a, cli.seed),
        Command::Surface(a) => cmd_surface(a),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Verify(a) => cmd_verify(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Internal(m) | Failure::Domain(m) | Failure::Verification(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ModelConfig, Failure> {
    let cfg = ModelConfig::load(path)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("cannot write {}: {e}", path.display())))
}

fn cmd_fit(path: &Path) -> Result<(), Failure> {
    let cfg = load(path, None)?;
    let lm = cfg.fit()?;
    let fam = lm.family();
    let mut out = String::new();
    let _ = writeln!(out, "model {}", model_hash(&lm));
    match fam.scale() {
        Some(c) => {
            let _ = writeln!(out, "base direction -c·I with c = {c}");
        }
        None => {
            let _ = writeln!(out, "base direction from config");
        }
    }
    let _ = writeln!(out, "k,maturity,ratio,xi,relative_residual");
    for k in 1..=lm.n_tenors() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{:e}",
            lm.maturity(k),
            lm.curve().ratio(k),
            fam.xis()[k - 1],
            fam.residuals()[k - 1]
        );
    }
    print!("{out}");
    Ok(())
}

fn mc_config(cfg: &ModelConfig, paths: Option<usize>) -> McConfig {
    let mut mc = cfg.pricing.mc;
    if let Some(n) = paths {
        mc.n_paths = n;
    }
    mc
}

fn cmd_price(a: PriceArgs, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load(&a.config, seed)?;
    let lm = cfg.fit()?;
    let fc = cfg.pricing.fourier;
    let curve = lm.curve();
    let (label, priced, inst): (String, Priced, Instrument) = match a.instrument {
        InstrumentArg::Caplet { k, strike } => {
            check_tenor(&lm, k)?;
            let spec = CapletSpec::new(k, strike.unwrap_or_else(|| curve.forward_libor(k)));
            let p = price_caplet(&lm, &spec, &fc).map_err(domain)?;
            (format!("caplet k={k} strike={}", spec.strike), p, Instrument::Caplet(spec))
        }
        InstrumentArg::Floorlet { k, strike } => {
            check_tenor(&lm, k)?;
            let spec = CapletSpec::new(k, strike.unwrap_or_else(|| curve.forward_libor(k)));
            let p = price_floorlet(&lm, &spec, &fc).map_err(domain)?;
            (format!("floorlet k={k} strike={}", spec.strike), p, Instrument::Floorlet(spec))
        }
        InstrumentArg::Cap { first, last, strike } => {
            let p = price_cap(&lm, first, last, strike, &fc).map_err(domain)?;
            (
                format!("cap k={first}..={last} strike={strike}"),
                p,
                Instrument::Cap {
                    k_first: first,
                    k_last: last,
                    strike,
                },
            )
        }
        InstrumentArg::Swaption {
            i,
            m,
            strike,
            side,
            order,
        } => {
            if !(1 <= i && i < m && m <= lm.n_tenors()) {
                return Err(Failure::Domain(format!("need 1 <= i < m <= {}", lm.n_tenors())));
            }
            let strike = strike.unwrap_or_else(|| par_swap_rate(&lm, i, m).0);
            let side = match side {
                SideArg::Receiver => Side::Receiver,
                SideArg::Payer => Side::Payer,
            };
            let spec = SwaptionSpec::new(i, m, strike, side);
            let p = price_swaption(&lm, &spec, order.unwrap_or(cfg.pricing.edgeworth_order)).map_err(domain)?;
            (format!("{side:?} swaption {i}x{m} strike={strike}"), p, Instrument::Swaption(spec))
        }
    };
    println!("{label}");
    println!("price {:.12e}", priced.value);
    for d in &priced.diagnostics {
        println!("diagnostic {d:?}");
    }
    if a.verify {
        let mc = mc_config(&cfg, a.paths);
        let e = mc_price(&inst, &lm, &mc).map_err(domain)?;
        let z = e.z_score(priced.value);
        println!(
            "mc {:.12e} se {:.3e} paths {} seed {} z {:+.2}",
            e.mean, e.std_error, e.n_paths, mc.seed, z
        );
        if z.abs() > 3.0 {
            return Err(Failure::Verification(format!("MC gap of {z:.2} standard errors")));
        }
        println!("verify ok");
    }
    Ok(())
}

fn check_tenor(lm: &LiborModel, k: usize) -> Result<(), Failure> {
    if k < 1 || k >= lm.n_tenors() {
        return Err(Failure::Domain(format!("tenor index {k} outside 1..={}", lm.n_tenors() - 1)));
    }
    Ok(())
}

fn cmd_surface(a: SurfaceArgs) -> Result<(), Failure> {
    let cfg = load(&a.config, None)?;
    let lm = cfg.fit()?;
    let fc = cfg.pricing.fourier;
    let n = lm.n_tenors();
    let values = match a.values {
        ValuesArg::Vols => SurfaceValues::ImpliedVols,
        ValuesArg::Prices => SurfaceValues::Prices,
    };
    let text = match a.kind {
        SurfaceKindArg::Caplet => {
            let fwd = lm.curve().forward_libor(1);
            let strikes = a
                .strikes
                .unwrap_or_else(|| (-4..=4).map(|j| fwd * (1.0 + 0.01 * j as f64)).collect());
            let tenors = a.tenors.unwrap_or_else(|| (1..n).collect());
            let grid = build_caplet_surface(&lm, &strikes, &tenors, &fc).map_err(domain)?;
            render(a.format, grid.to_csv(values), grid.to_json())
        }
        SurfaceKindArg::SwaptionAtm => {
            let half = n / 2;
            let expiries = a.tenors.unwrap_or_else(|| (1..=half).collect());
            let lengths = a.lengths.unwrap_or_else(|| (1..=n - half).collect());
            let grid =
                atm_swaption_surface(&lm, &expiries, &lengths, cfg.pricing.edgeworth_order).map_err(domain)?;
            render(a.format, grid.to_csv(values), grid.to_json())
        }
        SurfaceKindArg::AtmTerm => {
            let tenors = a.tenors.unwrap_or_else(|| (1..n).collect());
            let points = atm_term_structure(&lm, &tenors, &fc).map_err(domain)?;
            let hash = model_hash(&lm);
            if a.format == Format::Json {
                let doc = serde_json::json!({
                    "schema_version": SURFACE_SCHEMA_VERSION,
                    "kind": "atm_term",
                    "model_hash": hash,
                    "points": points,
                });
                serde_json::to_string_pretty(&doc).expect("term structure serializes") + "\n"
            } else {
                let mut s = format!("# schema_version={SURFACE_SCHEMA_VERSION} kind=atm_term model={hash}\n");
                s.push_str("k,maturity,strike,price,implied_vol\n");
                for p in &points {
                    let vol = p.vol.map(|v| v.to_string()).unwrap_or_default();
                    let _ = writeln!(s, "{},{},{},{},{vol}", p.k, p.maturity, p.strike, p.price);
                }
                s
            }
        }
    };
    write_file(&a.out, &text)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn render(format: Format, csv: String, json: String) -> String {
    match format {
        Format::Csv => csv,
        Format::Json => json + "\n",
    }
}

fn cmd_simulate(a: SimulateArgs, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = load(&a.config, seed)?;
    let mc = mc_config(&cfg, a.paths);
    let set = match cfg.affine_model() {
        AffineModel::Wishart(p) => simulate_wishart(&p, a.horizon, &mc),
        AffineModel::JumpOu(p) => simulate_jump_ou(&p, a.horizon, &mc),
    }
    .map_err(domain)?;
    write_file(&a.out, &set.to_csv())?;
    println!(
        "wrote {} paths x {} steps to {}{}",
        set.paths.len(),
        set.times.len(),
        a.out.display(),
        if set.biased { " (biased scheme)" } else { "" }
    );
    Ok(())
}

fn cmd_verify(a: VerifyArgs, seed: Option<u64>) -> Result<(), Failure> {
    let base_seed = match &a.config {
        Some(p) => load(p, seed)?.pricing.mc.seed,
        None => seed.unwrap_or(ModelConfig::benchmark().pricing.mc.seed),
    };
    let suite = match a.suite {
        SuiteArg::Quick => Suite::Quick,
        SuiteArg::Full => Suite::Full,
    };
    let report = verify::run_with(suite, base_seed, |r| println!("{}", r.line()));
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_file(out, &json)?;
    }
    let failed = report.failed_ids();
    println!("{}/11 passed", 11 - failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("criteria {failed:?} failed")))
    }
}

