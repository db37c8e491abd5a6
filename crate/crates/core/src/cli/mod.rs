//! Experiment driver behind the `msgfem` binary.

pub mod config;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, SubdomainSelection};

use crate::assembly::{AssembledSystem, LoadVector};
use crate::decomp::{Decomposition, DecompositionParams};
use crate::error::{Error, Result};
use crate::la::ordering::{self, FillOrdering};
use crate::la::CholeskyFactor;
use crate::msgfem::{
    approximate, decay_slope, detach_from_boundary, enclosed_holes, flat_prefix, harmonic_forms_dim, run_indexed,
    ApproximationReport, CoarsePolicy, CoarseSpace, LocalReduction, LocalSolver, LocalStage, StageOptions,
};
use crate::problems::{self, ProblemSpec};
use crate::solvers::{self, IterOptions, Preconditioner, SolveContext, Termination};
use crate::tolerances::Tolerances;

#[derive(Debug, Parser)]
#[command(name = "msgfem", version, about = "MS-GFEM coarse spaces and two-level Schwarz solvers for 2D H(curl) problems")]
pub struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Local eigenvalues of one or all subdomains, per oversampling size.
    Eigdecay(RunArgs),
    /// One-shot MS-GFEM errors and bounds over a sweep of local space sizes.
    Approx(RunArgs),
    /// Fine solve with the configured solver; writes the iteration log.
    Solve(RunArgs),
    /// Harmonic-form dimensions and flat eigenvalue prefixes per subdomain.
    Topo(RunArgs),
    /// Mesh and subdomain tables.
    MeshDump(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Eigdecay(a) | Command::Approx(a) | Command::Solve(a) | Command::Topo(a) | Command::MeshDump(a) => a,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::UnknownStrategy { .. } | Error::Problem(_) => 2,
        Error::Divergence(_) => 3,
        Error::Assertion(_) => 4,
        _ => 1,
    }
}

pub fn run(command: &Command) -> Result<()> {
    let a = command.args();
    let cfg = RunConfig::load(&a.config, &a.overrides)?;
    match command {
        Command::Eigdecay(_) => eigdecay(&cfg),
        Command::Approx(_) => approx(&cfg),
        Command::Solve(_) => solve(&cfg),
        Command::Topo(_) => topo(&cfg),
        Command::MeshDump(_) => mesh_dump(&cfg),
    }
}

/// Problem, assembled system and load, built from a validated config.
pub struct Setup {
    pub problem: ProblemSpec,
    pub system: AssembledSystem,
    pub load: LoadVector,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let problem = problems::default_registry().get(&cfg.problem)?.build(&cfg.params)?;
        let system = problem.assemble()?;
        let load = problem.load(&system)?;
        log::info!("{}: {} DOFs", problem.description, system.matrix.nrows());
        Ok(Self { problem, system, load })
    }

    pub fn decomposition(&self, cfg: &RunConfig, ovsp: usize) -> Result<Decomposition> {
        Decomposition::build(
            &self.problem.mesh,
            &self.system.dofs,
            DecompositionParams {
                m: cfg.m,
                overlap: cfg.overlap,
                ovsp,
            },
        )
    }

    pub fn reference(&self, ordering: &dyn FillOrdering) -> Result<Vec<f64>> {
        let f = CholeskyFactor::factor(&self.system.matrix, ordering, Tolerances::DEFAULT.cholesky_pivot)?;
        Ok(f.solve(&self.load.rhs))
    }
}

fn csv_writer(cfg: &RunConfig, name: &str) -> Result<(csv::Writer<std::fs::File>, PathBuf)> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "{}", cfg.provenance())?;
    Ok((csv::Writer::from_writer(f), path))
}

fn selected(cfg: &RunConfig, dec: &Decomposition) -> Vec<usize> {
    match cfg.subdomains {
        SubdomainSelection::MostInterior => vec![dec.most_interior()],
        SubdomainSelection::All => (0..dec.len()).collect(),
    }
}

/// All eigenvalues of the local problems of `which`.
fn local_spectra(setup: &Setup, dec: &Decomposition, which: &[usize], cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let ord = ordering::default_registry();
    let ord = ord.get(&cfg.ordering)?;
    run_indexed(cfg.workers, which.len(), |k| {
        let i = which[k];
        let solver = LocalSolver::build(&setup.system, dec, i, ord, &Tolerances::DEFAULT)?;
        let red = LocalReduction::build(&setup.problem.mesh, &setup.system, &dec.subdomains[i], &solver, 0)?;
        Ok(red.eigenvalues)
    })
}

fn eigdecay(cfg: &RunConfig) -> Result<()> {
    let setup = Setup::new(cfg)?;
    let (mut w, path) = csv_writer(cfg, "eigenvalues.csv")?;
    w.write_record(["subdomain", "k", "lambda", "ovsp"])?;
    println!("{:>6} {:>10} {:>8} {:>14} {:>12}", "ovsp", "subdomain", "count", "lambda_1", "slope[5,40]");
    for &ovsp in &cfg.ovsp_sweep {
        let dec = setup.decomposition(cfg, ovsp)?;
        let which = selected(cfg, &dec);
        let spectra = local_spectra(&setup, &dec, &which, cfg)?;
        for (&i, ev) in which.iter().zip(&spectra) {
            for (k, l) in ev.iter().enumerate() {
                w.write_record([i.to_string(), (k + 1).to_string(), format!("{l:e}"), ovsp.to_string()])?;
            }
            let slope = decay_slope(ev, 5, 40).map_or("-".into(), |s| format!("{s:.4}"));
            let l1 = ev.first().map_or("-".into(), |l| format!("{l:.4e}"));
            println!("{ovsp:>6} {i:>10} {:>8} {l1:>14} {slope:>12}", ev.len());
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn stage_options<'a>(cfg: &RunConfig, n_keep: Option<usize>, ord: &'a dyn FillOrdering) -> StageOptions<'a> {
    StageOptions {
        n_keep,
        workers: cfg.workers,
        ordering: ord,
        tol: Tolerances::DEFAULT,
    }
}

fn approx(cfg: &RunConfig) -> Result<()> {
    let setup = Setup::new(cfg)?;
    let ords = ordering::default_registry();
    let ord = ords.get(&cfg.ordering)?;
    let a = &setup.system.matrix;
    let uh = setup.reference(ord)?;
    let n_max = *cfg.n_loc_sweep.iter().max().unwrap();
    let dec = setup.decomposition(cfg, cfg.ovsp)?;
    let stage = LocalStage::build(&setup.problem.mesh, &setup.system, dec, stage_options(cfg, Some(n_max), ord))?;
    let (mut w, path) = csv_writer(cfg, "errors.csv")?;
    w.write_record([
        "n_loc",
        "coarse_dim",
        "dropped",
        "relative_error",
        "lambda",
        "error_over_lambda",
        "lambda_ge_1",
    ])?;
    println!("{:>6} {:>8} {:>14} {:>12} {:>8}", "n_loc", "dim", "rel. error", "Lambda", "bound");
    let mut violations = Vec::new();
    for &n in &cfg.n_loc_sweep {
        let coarse = CoarseSpace::build(a, &stage.reductions, CoarsePolicy::Fixed(n), Tolerances::DEFAULT.coarse_drop)?;
        let ug = approximate(a, &stage, &coarse, &setup.load.rhs, cfg.workers)?;
        let rep = ApproximationReport::new(a, &uh, &ug, stage.lambda_bound(&coarse));
        if !rep.bound_holds() {
            violations.push(n);
        }
        w.write_record([
            n.to_string(),
            coarse.dim().to_string(),
            coarse.n_dropped().to_string(),
            format!("{:e}", rep.relative_error),
            format!("{:e}", rep.lambda),
            format!("{:e}", rep.relative_error / rep.lambda),
            u8::from(rep.lambda >= 1.0).to_string(),
        ])?;
        println!(
            "{n:>6} {:>8} {:>14.4e} {:>12.4e} {:>8}",
            coarse.dim(),
            rep.relative_error,
            rep.lambda,
            if rep.bound_holds() { "ok" } else { "VIOLATED" }
        );
    }
    w.flush()?;
    println!("wrote {}", path.display());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Assertion(format!("error exceeds Lambda for n_loc in {violations:?}")))
    }
}

fn solve(cfg: &RunConfig) -> Result<()> {
    let setup = Setup::new(cfg)?;
    let ords = ordering::default_registry();
    let ord = ords.get(&cfg.ordering)?;
    let solvers_reg = solvers::default_registry();
    let solver = solvers_reg.get(&cfg.solver)?;
    let inners = solvers::inner_product_registry();
    let inner = inners.get(&cfg.inner)?;
    let a = &setup.system.matrix;
    let uh = setup.reference(ord)?;

    let n_keep = match cfg.coarse {
        CoarsePolicy::Fixed(0) => None,
        CoarsePolicy::Fixed(n) => Some(n),
        CoarsePolicy::Tolerance(_) => Some(usize::MAX),
    };
    let needs_stage = cfg.solver != "direct";
    let stage = if needs_stage {
        let dec = setup.decomposition(cfg, cfg.ovsp)?;
        Some(LocalStage::build(&setup.problem.mesh, &setup.system, dec, stage_options(cfg, n_keep, ord))?)
    } else {
        None
    };
    let coarse = match &stage {
        Some(s) if !s.reductions.is_empty() => Some(CoarseSpace::build(
            a,
            &s.reductions,
            cfg.coarse,
            Tolerances::DEFAULT.coarse_drop,
        )?),
        _ => None,
    };
    let lambda = match (&stage, &coarse) {
        (Some(s), Some(c)) => Some(s.lambda_bound(c)),
        _ => None,
    };
    let precond = stage.as_ref().map(|s| match &coarse {
        Some(c) => Preconditioner::two_level(a, s, c, cfg.workers),
        None => Preconditioner::one_level(a, s, cfg.workers),
    });
    let mut options = IterOptions::new(inner);
    options.tol = cfg.tol;
    options.max_iter = cfg.max_iter;
    options.reference = Some(&uh);
    options.lambda = lambda;
    let ctx = SolveContext {
        a,
        f: &setup.load.rhs,
        u0: None,
        precond,
        options,
        ordering: ord,
    };
    let start = Instant::now();
    let out = solver.solve(&ctx)?;
    let (_, path) = csv_writer(cfg, "iterations.csv")?;
    out.log.write_csv(&path, &cfg.provenance())?;
    let norm = a.bilinear(&uh, &uh).max(0.0).sqrt();
    let err = solvers::energy_distance(a, &out.u, &uh);
    println!("solver        {}", cfg.solver);
    println!("status        {:?}", out.status);
    println!("iterations    {}", out.iterations());
    if let Some(c) = &coarse {
        println!("coarse dim    {}", c.dim());
    }
    if let Some(l) = lambda {
        println!("Lambda        {l:.4e}");
    }
    println!("energy norm   {norm:.6e}");
    println!("rel. error    {:.4e}", if norm > 0.0 { err / norm } else { err });
    println!("seconds       {:.3}", start.elapsed().as_secs_f64());
    println!("wrote {}", path.display());
    if out.status == Termination::MaxIter {
        log::warn!("no convergence within max_iter = {}", cfg.max_iter);
    }
    out.into_result().map(|_| ())
}

fn topo(cfg: &RunConfig) -> Result<()> {
    let setup = Setup::new(cfg)?;
    let mesh = &setup.problem.mesh;
    let dec = setup.decomposition(cfg, cfg.ovsp)?;
    let which = selected(cfg, &dec);
    let spectra = local_spectra(&setup, &dec, &which, cfg)?;
    let (mut w, path) = csv_writer(cfg, "topology.csv")?;
    w.write_record(["subdomain", "dim_harmonic_forms", "hole_count", "relative_dim", "flat_prefix"])?;
    println!("{:>10} {:>6} {:>6} {:>9} {:>6}", "subdomain", "dim", "holes", "relative", "flat");
    for (&i, ev) in which.iter().zip(&spectra) {
        let elements = &dec.subdomains[i].elements;
        let dim = harmonic_forms_dim(mesh, &detach_from_boundary(mesh, elements))?.dim;
        let rel = harmonic_forms_dim(mesh, elements)?.dim;
        let holes = enclosed_holes(mesh, elements);
        let flat = flat_prefix(ev, cfg.flat_tol);
        w.write_record([i.to_string(), dim.to_string(), holes.to_string(), rel.to_string(), flat.to_string()])?;
        println!("{i:>10} {dim:>6} {holes:>6} {rel:>9} {flat:>6}");
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn mesh_dump(cfg: &RunConfig) -> Result<()> {
    let problem = problems::default_registry().get(&cfg.problem)?.build(&cfg.params)?;
    let system = problem.assemble()?;
    let dir = cfg.out_dir();
    problem.mesh.write_csv(&dir, &cfg.provenance())?;
    let dec = Decomposition::build(
        &problem.mesh,
        &system.dofs,
        DecompositionParams {
            m: cfg.m,
            overlap: cfg.overlap,
            ovsp: cfg.ovsp,
        },
    )?;
    dec.write_csv(&problem.mesh, &dir, &cfg.provenance())?;
    let m = &problem.mesh;
    let (v, t, e) = (m.n_vertices(), m.n_triangles(), m.n_edges());
    println!("{}: {v} vertices, {t} triangles, {e} edges, {} subdomains", problem.description, dec.len());
    println!("wrote {}", dir.display());
    Ok(())
}
