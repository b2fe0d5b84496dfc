use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neumann_hole::config::{load_config, SweepConfig};
use neumann_hole::coupling::Condition;
use neumann_hole::experiments::{
    dbar_svg, delta_svg, run_lemma_suite, run_sweep, solve_all, split_ring_study, write_csv, write_pollution_csv,
    write_pollution_summary, write_summary,
};
use neumann_hole::geometry::{build_domain, build_hole, check_property_star, triangulate};
use neumann_hole::{lemmas, Error, Result};

#[derive(Parser)]
#[command(name = "neumann-hole", version, about = "Magnetic Neumann Laplacian on domains with a small hole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Sweep configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Progress messages on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Worker threads (default: all cores). Never changes the output.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the Ω mesh and every carved Ω \ K_ε mesh.
    Mesh,
    /// Lowest eigenvalues of Ω and of each Ω \ K_ε.
    Solve,
    /// Full ε sweep: CSV, summary and SVG charts.
    Sweep,
    /// Empirical closeness constants for all seven conditions.
    Closeness,
    /// Numerical checks of the auxiliary estimates.
    Lemmas,
    /// Axis half-line test for every hole in the sweep.
    PropertyStar,
    /// Split-ring pollution study with disk and open-ring controls.
    SplitRing,
}

struct Ctx {
    cfg: SweepConfig,
    out: PathBuf,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Error::io(format!("cannot create {}", path.display()), e))
    }

    fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(format!("cannot write {}", self.out.join(name).display()), e))?;
        self.note(&format!("wrote {}", self.out.join(name).display()));
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let Some(path) = cli.config.as_deref() else {
        return Err(Error::config("--config", "a configuration file is required"));
    };
    let cfg = load_config(path)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(format!("cannot create {}", cli.out.display()), e))?;
    let ctx = Ctx {
        cfg,
        out: cli.out.clone(),
        verbose: cli.verbose > 0,
    };
    let command = cli.command;
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(command, &ctx))
        }
        None => dispatch(command, &ctx),
    }
}

fn dispatch(command: Command, ctx: &Ctx) -> Result<()> {
    match command {
        Command::Mesh => mesh(ctx),
        Command::Solve => solve(ctx),
        Command::Sweep => sweep(ctx),
        Command::Closeness => closeness(ctx),
        Command::Lemmas => lemma_checks(ctx),
        Command::PropertyStar => property_star(ctx),
        Command::SplitRing => split_ring(ctx),
    }
}

fn mesh(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let omega = triangulate(&cfg.domain, None, cfg.h)?;
    ctx.write_with("mesh_omega.txt", |w| omega.write_text(w))?;
    let mut lines = vec![format!("omega: {} nodes, {} triangles, h {}", omega.num_nodes(), omega.num_triangles(), cfg.h)];
    for &e in &cfg.epsilons {
        let carved = omega.carve(&cfg.hole.at(e)).map_err(|err| err.at_epsilon(e))?;
        carved.validate(Some(&omega)).map_err(|err| err.at_epsilon(e))?;
        ctx.write_with(&format!("mesh_eps_{e}.txt"), |w| carved.write_text(w))?;
        lines.push(format!("epsilon {e}: {} nodes, {} triangles", carved.num_nodes(), carved.num_triangles()));
    }
    ctx.write_with("mesh_summary.txt", |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))
}

fn solve(ctx: &Ctx) -> Result<()> {
    let (omega, holes) = solve_all(&ctx.cfg)?;
    ctx.write_with("eigenvalues.txt", |w| {
        writeln!(w, "omega: {omega:?}")?;
        for (e, n, vals) in &holes {
            writeln!(w, "epsilon {e} ({n} nodes): {vals:?}")?;
        }
        Ok(())
    })
}

fn sweep(ctx: &Ctx) -> Result<()> {
    ctx.note("running sweep");
    let r = run_sweep(&ctx.cfg)?;
    ctx.write_with("sweep.csv", |w| write_csv(&r, w))?;
    ctx.write_with("summary.txt", |w| write_summary(&r, w))?;
    ctx.write_with("dbar.svg", |w| w.write_all(dbar_svg(&r).as_bytes()))?;
    ctx.write_with("delta.svg", |w| w.write_all(delta_svg(&r).as_bytes()))?;
    let json = serde_json::to_string_pretty(&r).map_err(|e| Error::Internal(e.to_string()))?;
    ctx.write_with("sweep.json", |w| writeln!(w, "{json}"))?;
    if ctx.cfg.timing {
        ctx.write_with("timings.txt", |w| {
            r.rows.iter().zip(&r.timings_ms).try_for_each(|(row, t)| writeln!(w, "{} {t}", row.epsilon))
        })?;
    }
    Ok(())
}

fn closeness(ctx: &Ctx) -> Result<()> {
    let r = run_sweep(&ctx.cfg)?;
    ctx.write_with("closeness.csv", |w| {
        writeln!(w, "epsilon,h,seed,delta1,delta2,delta3,delta4,delta5p,delta6,delta7")?;
        for row in &r.rows {
            let d: Vec<String> = Condition::ALL.iter().map(|&c| row.delta(c).to_string()).collect();
            writeln!(w, "{},{},{},{}", row.epsilon, row.h, ctx.cfg.seed, d.join(","))?;
        }
        Ok(())
    })?;
    ctx.write_with("closeness.txt", |w| {
        for row in &r.rows {
            if let Some(c) = &row.closeness {
                writeln!(w, "epsilon {}: test set {}", row.epsilon, c.test_set)?;
                for k in Condition::ALL {
                    writeln!(w, "  ({}) {}", k.label(), c.get(k))?;
                }
            }
        }
        writeln!(w, "values are maxima over a finite test set, hence lower bounds")
    })
}

fn lemma_checks(ctx: &Ctx) -> Result<()> {
    let reports = run_lemma_suite(&ctx.cfg)?;
    ctx.write_with("lemmas.csv", |w| lemmas::write_csv(&reports, w))?;
    ctx.write_with("lemmas.txt", |w| reports.iter().try_for_each(|r| r.write_text(&mut *w)))?;
    for r in &reports {
        println!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.lemma);
    }
    Ok(())
}

fn property_star(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let domain = build_domain(&cfg.domain)?;
    let mut lines = Vec::new();
    for &e in &cfg.epsilons {
        let hole = build_hole(&cfg.hole.at(e)).map_err(|err| err.at_epsilon(e))?;
        let r = check_property_star(&domain, &hole, 256).map_err(|err| err.at_epsilon(e))?;
        let mut line = format!(
            "epsilon {e}: {} ({} of {} samples violate)",
            if r.compliant { "compliant" } else { "violated" },
            r.violations,
            r.samples_tested
        );
        if let Some(wit) = &r.witness {
            line.push_str(&format!("; witness ({}, {})", wit.point.x, wit.point.y));
        }
        println!("{line}");
        lines.push(line);
    }
    ctx.write_with("property_star.txt", |w| lines.iter().try_for_each(|l| writeln!(w, "{l}")))
}

fn split_ring(ctx: &Ctx) -> Result<()> {
    let r = split_ring_study(&ctx.cfg)?;
    ctx.write_with("pollution.csv", |w| write_pollution_csv(&r, w))?;
    ctx.write_with("pollution.txt", |w| write_pollution_summary(&r, w))?;
    for row in &r.rows {
        println!(
            "epsilon {}: split ring {} unpaired, disk {}, open ring {}",
            row.epsilon, row.split_ring, row.disk, row.control
        );
    }
    Ok(())
}
