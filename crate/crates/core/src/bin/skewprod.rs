use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use skewprod::classify::{classify_with_graphs, compute_graphs, middle_xi};
use skewprod::config::ScenarioConfig;
use skewprod::dimension::{bernoulli_lower_bound, write_dimension_csv, DimensionOptions};
use skewprod::error::{Error, Result};
use skewprod::graphs::{middle_graph, pullback_graph, GraphKind, Sampling};
use skewprod::grid::Interval;
use skewprod::hypotheses::{check_hypotheses, scan_region};
use skewprod::lyapunov::{measure_exponent, MeasureModel};
use skewprod::output::{csv_writer, write_exponents};
use skewprod::scenario::{dimension_rows, run_scenario};
use skewprod::stablefibre::{integrate_fibre, StableField, FIBRE_CSV_HEADER};

#[derive(Parser)]
#[command(name = "skewprod", version, about = "Invariant graphs, stable fibres and pinching for forced interval maps over the baker map")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Parameters shared by every subcommand.  Values given on the command
/// line override the config file, which overrides the scenario preset.
#[derive(Args, Clone)]
struct Base {
    /// Flat TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset (fig1a, fig1b, fig1c, fig2) when no file is given.
    #[arg(long, default_value = "fig1a")]
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// Half width of `J`.
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    output_dir: Option<String>,
}

impl Base {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut c = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::preset(&self.scenario),
        };
        if let Some(v) = self.seed {
            c.seed = Some(v);
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        set!(r, eps, a, m, grid, depth, output_dir);
        if c.i_lo < -c.m || c.i_hi > c.m {
            c.i_lo = c.i_lo.max(-c.m);
            c.i_hi = c.i_hi.min(c.m);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify the standing hypotheses on I and J.
    CheckHypotheses {
        #[command(flatten)]
        base: Base,
        #[arg(long)]
        i_lo: Option<f64>,
        #[arg(long)]
        i_hi: Option<f64>,
        /// Nodes per axis.
        #[arg(long)]
        cert_grid: Option<usize>,
    },
    /// Certify a grid of (M, r) pairs at fixed eps.
    ScanRegion {
        #[command(flatten)]
        base: Base,
        #[arg(long, default_value_t = 0.5)]
        m_lo: f64,
        #[arg(long, default_value_t = 1.4)]
        m_hi: f64,
        #[arg(long, default_value_t = 0.8)]
        r_lo: f64,
        #[arg(long, default_value_t = 1.4)]
        r_hi: f64,
        #[arg(long, default_value_t = 100)]
        cells: usize,
        #[arg(long, default_value_t = 200)]
        cert_grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample an invariant graph.
    Graphs {
        #[command(flatten)]
        base: Base,
        #[arg(long, default_value = "upper")]
        kind: GraphKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a strong stable fibre through (x, y) for a seeded xi.
    Fibre {
        #[command(flatten)]
        base: Base,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
        #[arg(long, default_value_t = 0)]
        xi_index: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exponents of the graphs for one measure.
    Lyapunov {
        #[command(flatten)]
        base: Base,
        /// lebesgue, bernoulli:<p1> or periodic:<word>
        #[arg(long, default_value = "lebesgue")]
        measure: MeasureModel,
        #[arg(long, default_value_t = 4000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decide between the pinched and unpinched cases.
    Classify {
        #[command(flatten)]
        base: Base,
        /// Directory for the report and the margins CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dimension of the pinched set from the chosen graphs.
    Dimension {
        #[command(flatten)]
        base: Base,
        #[arg(long)]
        order: Option<usize>,
        /// Skip the primal cross-check.
        #[arg(long)]
        no_check: bool,
        /// Also sweep product measures with this many Monte Carlo blocks.
        #[arg(long)]
        bernoulli_mc: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write all artifacts.
    Scenario {
        #[command(flatten)]
        base: Base,
        #[arg(long)]
        steps: Option<u64>,
        /// Continue when the hypotheses are not certified.
        #[arg(long)]
        allow_uncertified: bool,
    },
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::CheckHypotheses { base, i_lo, i_hi, cert_grid } => {
            let mut c = base.resolve()?;
            c.i_lo = i_lo.unwrap_or(c.i_lo);
            c.i_hi = i_hi.unwrap_or(c.i_hi);
            let cert = check_hypotheses(&c.family()?, &c.system()?, c.i(), c.j(), cert_grid.unwrap_or(c.hypothesis_grid))?;
            print!("{}", cert.to_text());
            if !cert.pass() {
                return Err(Error::HypothesisFailed(format!("binding constraint {:?}", cert.binding)));
            }
        }
        Cmd::ScanRegion { base, m_lo, m_hi, r_lo, r_hi, cells, cert_grid, out } => {
            let c = base.resolve()?;
            let map = scan_region(c.eps, Interval::new(m_lo, m_hi)?, Interval::new(r_lo, r_hi)?, cells, cert_grid, &c.system()?)?;
            map.write_csv(&out)?;
            println!("pass: {} of {}", map.cells.iter().filter(|c| c.pass).count(), map.cells.len());
        }
        Cmd::Graphs { base, kind, out } => {
            let c = base.resolve()?;
            let (fam, sys, cc) = (c.family()?, c.system()?, c.classify_config());
            let g = match kind {
                GraphKind::Middle => middle_graph(&fam, &sys, &middle_xi(&sys, &cc, 0), c.grid, c.depth, 0.0, c.j())?,
                k => pullback_graph(&fam, &sys, k, c.grid, c.depth, c.m, Sampling::for_grid(c.grid, c.seed()?))?,
            };
            g.write_csv(&out)?;
            let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            println!("kind: {kind}\nmin: {lo}\nmax: {hi}\nescaped: {}", g.escaped());
        }
        Cmd::Fibre { base, x, y, xi_index, out } => {
            let c = base.resolve()?;
            let (fam, sys) = (c.family()?, c.system()?);
            let field = StableField::new(&fam, &sys, c.i(), c.j(), 1e-10)?;
            let xi = middle_xi(&sys, &c.classify_config(), xi_index);
            let fibre = integrate_fibre(&field, &xi, x, y, c.fibre_step)?;
            let mut w = csv_writer(&out, &FIBRE_CSV_HEADER)?;
            fibre.write_csv(&mut w, &sys)?;
            w.flush()?;
            let d = fibre.domain();
            println!("domain: [{}, {}]\ntruncation: {}", d.lo, d.hi, fibre.truncation);
        }
        Cmd::Lyapunov { base, measure, samples, out } => {
            let c = base.resolve()?;
            let (fam, sys) = (c.family()?, c.system()?);
            let graphs = compute_graphs(&fam, &sys, &c.classify_config())?;
            let mut rows = Vec::new();
            for g in [&graphs.upper, &graphs.middle, &graphs.lower] {
                let e = measure_exponent(&fam, &sys, g, &measure, samples, c.seed()?)?;
                println!("{} {}: {} +- {}", g.kind, measure, e.value, e.stderr);
                rows.push(skewprod::classify::ExponentRow {
                    graph: g.kind,
                    measure: measure.to_string(),
                    value: e.value,
                    stderr: e.stderr,
                    n: e.n,
                    note: e.note,
                });
            }
            write_exponents(&out, &c.scenario, &rows)?;
        }
        Cmd::Classify { base, out } => {
            let c = base.resolve()?;
            let (fam, sys, cc) = (c.family()?, c.system()?, c.classify_config());
            let graphs = compute_graphs(&fam, &sys, &cc)?;
            let report = classify_with_graphs(&fam, &sys, &cc, &graphs)?;
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("classification.txt"), report.to_text())?;
            report.write_margins_csv(&out.join("margins.csv"))?;
            print!("{}", report.to_text());
        }
        Cmd::Dimension { base, order, no_check, bernoulli_mc, out } => {
            let c = base.resolve()?;
            let (fam, sys) = (c.family()?, c.system()?);
            let graphs = compute_graphs(&fam, &sys, &c.classify_config())?;
            let opts = DimensionOptions { check_duality: !no_check };
            let (rows, notes) =
                dimension_rows(&fam, &sys, &graphs, &c.dimension_graphs()?, order.unwrap_or(c.dimension_order), opts)?;
            write_dimension_csv(&out, &c.scenario, &rows)?;
            for r in &rows {
                println!("{}: {:?} dim {:?} gap {:?}", r.provenance.map_or("-".into(), |k| k.to_string()), r.verdict, r.value, r.gap_diagnostic);
            }
            for n in notes {
                println!("note: {n}");
            }
            if let Some(mc) = bernoulli_mc {
                let p_grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
                let b = bernoulli_lower_bound(&fam, &sys, &graphs.upper, &p_grid, mc, c.seed()?)?;
                println!("bernoulli_bound: {:?} at p = {:?}", b.bound, b.best_p);
            }
        }
        Cmd::Scenario { base, steps, allow_uncertified } => {
            let mut c = base.resolve()?;
            if let Some(s) = steps {
                c.steps = s;
                c.burn_in = c.burn_in.min(s / 2);
            }
            c.allow_uncertified |= allow_uncertified;
            let summary = run_scenario(&c)?;
            print!("{}", summary.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
