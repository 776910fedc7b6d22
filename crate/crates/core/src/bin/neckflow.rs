use clap::{Args, Parser, Subcommand};
use neckflow::asymptotics::gamma_fn;
use neckflow::geometry::GeometryConfig;
use neckflow::harness::acceptance::{Acceptance, CriterionResult};
use neckflow::harness::{cached_mesh, run_case, run_sweep, write_solution, SweepSpec};
use neckflow::mesh::MeshOptions;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "neckflow", version, about = "p-Laplacian two-inclusion solver and asymptotics harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file: geometry for `solve`, sweep spec for `sweep` and `accept`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a single case and print its summary.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        target_h: f64,
        #[arg(long, default_value_t = 6)]
        layers: usize,
    },
    /// Run an eps sweep over several exponents.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Neck-integral and Gamma self-checks (no PDE).
    Oracle,
    /// Evaluate the acceptance matrix.
    Accept {
        #[command(flatten)]
        common: Common,
    },
}

fn sweep_spec(common: &Common, p: &[f64], eps: &[f64]) -> neckflow::Result<SweepSpec> {
    let mut spec = match &common.config {
        Some(path) => SweepSpec::load(path)?,
        None => SweepSpec::canonical(),
    };
    if !p.is_empty() {
        spec.p = p.to_vec();
    }
    if !eps.is_empty() {
        spec.eps = eps.to_vec();
    }
    if common.out.is_some() {
        spec.out = common.out.clone();
    }
    if common.workers.is_some() {
        spec.workers = common.workers;
    }
    spec.seed = common.seed;
    spec.validate()?;
    Ok(spec)
}

fn solve_cmd(common: &Common, p: f64, eps: Option<f64>, target_h: f64, layers: usize) -> neckflow::Result<ExitCode> {
    let mut gc = match &common.config {
        Some(path) => GeometryConfig::load(path)?,
        None => GeometryConfig::default(),
    };
    if let Some(e) = eps {
        gc.eps = e;
    }
    let g = gc.build()?;
    let mut spec = SweepSpec::canonical();
    spec.target_h = target_h;
    spec.neck_layers = layers;
    spec.p = vec![p];
    spec.eps = vec![g.eps];
    let m = cached_mesh(&g, &MeshOptions::new(target_h, layers), 0)?;
    let out = run_case(&g, &m, &spec, p);
    if let (Some(dir), Some(sol)) = (&common.out, &out.solution) {
        write_solution(dir, sol, &out.row)?;
    }
    println!("{}", serde_json::to_string_pretty(&out.row).expect("row serializes"));
    Ok(if out.row.ok() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn sweep_cmd(common: &Common, p: &[f64], eps: &[f64]) -> neckflow::Result<ExitCode> {
    let spec = sweep_spec(common, p, eps)?;
    let rep = run_sweep(&spec)?;
    for r in &rep.rows {
        println!(
            "p={:<4} eps={:<8e} ugap={:<12.6e} maxgrad={:<12.6e} kkt={:.1e} {}",
            r.p, r.eps, r.ugap, r.maxgrad, r.kkt_residual, r.status
        );
    }
    for s in &rep.regimes {
        match &s.slope {
            Some(f) => println!("p={}: slope {:.4} (expected {:.4})", s.p, f.slope, s.expected_slope),
            None => println!("p={}: slope {}", s.p, s.slope_note.as_deref().unwrap_or("unavailable")),
        }
        if let Some(f) = s.flux_estimate() {
            println!("p={}: flux estimate {f:.6}", s.p);
        }
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if rep.rows.iter().all(|r| r.ok()) { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn oracle_cmd() -> neckflow::Result<ExitCode> {
    let mut ok = true;
    for (z, want) in [(1.0, 1.0), (0.5, std::f64::consts::PI.sqrt()), (4.5, 11.631728396567448)] {
        let got = gamma_fn(z)?;
        let rel = ((got - want) / want).abs();
        ok &= rel <= 1e-12;
        println!("Gamma({z}) = {got:.15} (rel. error {rel:.1e})");
    }
    let r = Acceptance::default().run(8);
    println!("{r}");
    ok &= r.passed;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn accept_cmd(common: &Common) -> neckflow::Result<ExitCode> {
    let mut spec = sweep_spec(common, &[], &[])?;
    let out = spec.out.take();
    let acc = Acceptance::new(spec);
    let results: Vec<CriterionResult> = acc.run_all();
    for r in &results {
        println!("{r}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        if let Ok((rep, _)) = acc.sweep() {
            neckflow::harness::write_report(&dir, rep)?;
        }
        let text = serde_json::to_string_pretty(&results).expect("results serialize");
        std::fs::write(dir.join("acceptance.json"), text)?;
    }
    Ok(if results.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Solve {
            common,
            p,
            eps,
            target_h,
            layers,
        } => solve_cmd(common, *p, *eps, *target_h, *layers),
        Cmd::Sweep { common, p, eps } => sweep_cmd(common, p, eps),
        Cmd::Oracle => oracle_cmd(),
        Cmd::Accept { common } => accept_cmd(common),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
