use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use campaign_core::ec_probability::{state_win_probs, EcOracle};
use campaign_core::experiments::{region_rows, run_experiment, solve_ms_stochastic, write_region_csv, ExperimentConfig, ExperimentId, SUPPORT_TOL};
use campaign_core::instance_file::InstanceFile;
use campaign_core::simplex_dynamics::{gda_solve, write_trace_csv};
use campaign_core::{constrained_equilibrium, double_oracle_solve, payoff_qa, win_prob_ec, BarrierConfig, DoubleOracleConfig, GdaConfig, StateModel};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "campaign", version, about = "Equilibria of two-candidate campaign allocation games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print CSV on standard output.
    Solve {
        #[arg(value_enum)]
        solver: Solver,
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reproduce a table or figure into a directory of CSV files.
    Experiment {
        /// table1, table2, table3, fig4, table4, table7, table8, table9 or table10
        id: String,
        #[command(flatten)]
        common: Common,
        /// Noise levels, comma separated
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<f64>>,
        /// Abstention scalings, comma separated
        #[arg(long, value_delimiter = ',')]
        gs: Option<Vec<f64>>,
        /// Bias scalings, comma separated
        #[arg(long, value_delimiter = ',')]
        fs: Option<Vec<f64>>,
        /// Electoral-vote concentrations, comma separated
        #[arg(long, value_delimiter = ',')]
        nus: Option<Vec<f64>>,
        /// Instance sizes, comma separated
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        deviations: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    MsDet,
    MsStoch,
    EcPure,
    EcMixed,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo samples per batch
    #[arg(long)]
    batch_size: Option<usize>,
    /// Lattice resolution
    #[arg(long)]
    q: Option<u32>,
    /// Gradient step size
    #[arg(long)]
    rho: Option<f64>,
    /// Stopping tolerance on the complementary-slackness residual
    #[arg(long)]
    eps: Option<f64>,
    /// Iteration budget of the gradient method
    #[arg(long)]
    max_iters: Option<usize>,
    /// Use the k -> 0 state model under the electoral college
    #[arg(long)]
    limit_k0: bool,
    /// Output directory for traces and experiment artifacts
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn model(&self) -> StateModel {
        if self.limit_k0 {
            StateModel::LimitK0
        } else {
            StateModel::Beta
        }
    }

    fn apply_gda(&self, cfg: &mut GdaConfig) {
        if let Some(r) = self.rho {
            cfg.rho = r;
        }
        if let Some(e) = self.eps {
            cfg.epsilon = e;
        }
        if let Some(m) = self.max_iters {
            cfg.max_iters = m;
        }
    }

    fn oracle(&self, q: Option<u32>, seed: Option<u64>) -> DoubleOracleConfig {
        let mut cfg = DoubleOracleConfig { model: self.model(), ..Default::default() };
        if let Some(q) = self.q.or(q) {
            cfg.q = q;
        }
        if let Some(s) = self.seed.or(seed) {
            cfg.seed = s;
        }
        self.apply_gda(&mut cfg.br);
        cfg
    }
}

/// Solver did not converge; the message names the trace file.
#[derive(Debug)]
struct NotConverged(String);

impl std::fmt::Display for NotConverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NotConverged {}

fn trace_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.clone().unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn solve(solver: Solver, path: &Path, c: &Common) -> Result<()> {
    let file = InstanceFile::load(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = file.to_instance().with_context(|| format!("invalid instance {}", path.display()))?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match solver {
        Solver::MsDet => {
            let eq = constrained_equilibrium(&inst.clone().without_noise(), &BarrierConfig::default())?;
            write_region_csv(&region_rows(&inst, &eq), &mut out)?;
            eprintln!("Q^A = {}", payoff_qa(&inst, &eq));
        }
        Solver::MsStoch => {
            let mut s = campaign_core::experiments::MsSettings::default();
            if let Some(seed) = c.seed.or(file.seed) {
                s.seed = seed;
            }
            if let Some(b) = c.batch_size {
                s.batch_size = b;
            }
            c.apply_gda(&mut s.gda);
            let sol = solve_ms_stochastic(&inst, &s, None)?;
            write_region_csv(&region_rows(&inst, &sol.profile), &mut out)?;
            eprintln!("P(A wins) = {} +- {} after {} iterations", sol.win_prob, sol.win_se, sol.iterations);
        }
        Solver::EcPure => {
            let mut cfg = GdaConfig { rho: 1.0, epsilon: 1e-6, max_iters: 20_000, ..GdaConfig::exact() };
            c.apply_gda(&mut cfg);
            let model = c.model();
            let mut oracle = EcOracle { inst: &inst, model };
            let r = gda_solve(&mut oracle, &inst, &cfg, None)?;
            if !r.converged {
                let path = trace_dir(&c.out)?.join("ec_pure_trace.csv");
                write_trace_csv(&r.trace, std::fs::File::create(&path)?)?;
                return Err(NotConverged(format!("gradient method did not converge; trace written to {}", path.display())).into());
            }
            let p = state_win_probs(&inst, &r.profile, model)?;
            writeln!(out, "state,x,y,state_win_prob,x_pct,y_pct,state_win_prob_pct")?;
            for i in 0..inst.n() {
                let (x, y) = (r.profile.x[i], r.profile.y[i]);
                writeln!(out, "{},{x},{y},{},{:.1},{:.1},{:.1}", i + 1, p.p[i], x * 100.0, y * 100.0, p.p[i] * 100.0)?;
            }
            eprintln!("P(A wins) = {}", win_prob_ec(&inst, &r.profile, model)?);
        }
        Solver::EcMixed => {
            let cfg = c.oracle(file.q, file.seed);
            let r = double_oracle_solve(&inst, &cfg)?;
            if !r.converged {
                let path = trace_dir(&c.out)?.join("ec_mixed_log.csv");
                let mut f = std::fs::File::create(&path)?;
                writeln!(f, "iteration,size_a,size_b,value,br_value_a,br_value_b")?;
                for l in &r.log {
                    writeln!(f, "{},{},{},{},{},{}", l.iteration, l.size_a, l.size_b, l.value, l.br_value_a, l.br_value_b)?;
                }
                return Err(NotConverged(format!("double oracle hit its iteration cap; log written to {}", path.display())).into());
            }
            r.write_csv(&mut out, SUPPORT_TOL)?;
            eprintln!("value = {} after {} iterations", r.value(), r.iterations);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { solver, instance, common } => solve(solver, &instance, &common),
        Command::Experiment { id, common, ks, gs, fs, nus, ns, instances, restarts, deviations } => (|| {
            let id: ExperimentId = id.parse()?;
            let mut cfg = ExperimentConfig::new(id);
            if let Some(s) = common.seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(b) = common.batch_size {
                cfg.ms.batch_size = b;
            }
            common.apply_gda(&mut cfg.ms.gda);
            cfg.oracle = DoubleOracleConfig { seed: cfg.oracle.seed, ..common.oracle(None, None) };
            if common.rho.is_none() && common.eps.is_none() && common.max_iters.is_none() {
                cfg.oracle.br = DoubleOracleConfig::default().br;
            }
            cfg.ks = ks.unwrap_or(cfg.ks);
            cfg.gs = gs.unwrap_or(cfg.gs);
            cfg.fs = fs.unwrap_or(cfg.fs);
            cfg.nus = nus.unwrap_or(cfg.nus);
            cfg.ns = ns.unwrap_or(cfg.ns);
            cfg.instances = instances.unwrap_or(cfg.instances);
            cfg.restarts = restarts.unwrap_or(cfg.restarts);
            cfg.deviations = deviations.unwrap_or(cfg.deviations);
            let Some(dir) = common.out.clone() else { bail!("--out DIR is required for experiments") };
            for f in run_experiment(&cfg, &dir)? {
                println!("{}", f.display());
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<NotConverged>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
