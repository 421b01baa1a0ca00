mod emit;
mod inputs;
mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use padic_polygon::frobenius::{
    descent_certify, pushforward_matrix, pushforward_radii, young_certify, FrobContext, DEFAULT_RANK_CAP,
};
use padic_polygon::radii_engine::PROFILE_RANK_CAP;
use padic_polygon::scalars::approx;
use padic_polygon::spectral::{
    cyclic_operator, radius_oracle, radius_oracle_op, small_radius_certify, spectral_polygon_at,
};
use padic_polygon::{
    audit_main_theorem, build_profile, check_criterion, prune_to_controlling_graph, AuditReport, CriterionReport,
    DescentConfig, DescentReport, DifferentialOperator, NewtonPolygon, Point, Prime, QLog, SpectralRadii,
};
use serde::Serialize;

use crate::emit::GraphExport;
use crate::inputs::System;
use crate::manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "padic-polygon", version, about = "Convergence Newton polygons of p-adic differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// The prime p.
    #[arg(short = 'p', global = true)]
    prime: Option<u64>,
    /// Depth of the Taylor recursion used by the oracle.
    #[arg(short = 'N', global = true, default_value_t = 150)]
    depth: usize,
    /// Maximal number of Frobenius push-forwards.
    #[arg(long, global = true, default_value_t = 6)]
    max_frobenius: u32,
    /// Maximal rank of a push-forward (default 9 for profiles, 64 at points).
    #[arg(long, global = true)]
    rank_cap: Option<usize>,
    /// Candidate vectors tried by the cyclic-vector search.
    #[arg(long, global = true, default_value_t = 12)]
    cyclic_attempts: usize,
    /// Radius index i, 1-based.
    #[arg(long, global = true, default_value_t = 1)]
    index: usize,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Add floating-point columns to CSV output.
    #[arg(long, global = true)]
    approx: bool,
    /// Output file; standard output if absent.
    #[arg(short = 'o', long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Radii profile of an operator on an affinoid domain.
    Profile {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(short = 'd', long)]
        domain: PathBuf,
    },
    /// Controlling graph of R_i from a profile.
    Graph {
        #[arg(short = 'i', long)]
        input: PathBuf,
    },
    /// Structural audit and finiteness criterion of a profile.
    Audit {
        #[arg(short = 'i', long)]
        input: PathBuf,
    },
    /// Spectral polygon and certified radii at a point.
    Polygon {
        #[arg(short = 'i', long)]
        input: PathBuf,
        /// The point `c,L`.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Taylor-recursion estimate of the first radius at a point.
    Oracle {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Frobenius push-forward tools.
    Frobenius {
        #[command(subcommand)]
        action: FrobeniusCommand,
    },
}

#[derive(Subcommand, Debug)]
enum FrobeniusCommand {
    /// Matrix of the push-forward.
    Push {
        #[arg(short = 'i', long)]
        input: PathBuf,
    },
    /// Spectral radii of the push-forward predicted from the input radii.
    Radii {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Radii certified by iterated push-forwards.
    Descend {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

/// Whether every audit passed.
#[derive(Debug, PartialEq, Eq)]
enum Outcome {
    Clean,
    Violations,
}

struct Run<'a> {
    cli: &'a Cli,
    manifest: RunManifest,
}

impl Run<'_> {
    fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = inputs::read(path)?;
        self.manifest.input(role, &bytes);
        Ok(bytes)
    }

    fn prime(&mut self) -> Result<Prime> {
        let p = inputs::parse_prime(self.cli.prime)?;
        self.manifest.p = Some(p.get());
        Ok(p)
    }

    fn config(&mut self, default_cap: usize) -> DescentConfig {
        let cfg = DescentConfig {
            max_iter: self.cli.max_frobenius,
            rank_cap: self.cli.rank_cap.unwrap_or(default_cap),
            cyclic_attempts: self.cli.cyclic_attempts,
        };
        self.manifest.flag("max_frobenius", cfg.max_iter);
        self.manifest.flag("rank_cap", cfg.rank_cap);
        self.manifest.flag("cyclic_attempts", cfg.cyclic_attempts);
        cfg
    }

    fn format(&mut self, allowed: &[Format]) -> Result<Format> {
        let f = self.cli.format.unwrap_or(allowed[0]);
        if !allowed.contains(&f) {
            bail!("format {f:?} is not available for `{}`", self.manifest.command);
        }
        self.manifest.flag("format", format!("{f:?}").to_lowercase());
        if self.cli.approx {
            self.manifest.flag("approx", true);
        }
        Ok(f)
    }

    fn operator(&self, sys: &System) -> Result<DifferentialOperator> {
        match sys {
            System::Operator(op) => Ok(op.clone()),
            System::Matrix(m) => Ok(cyclic_operator(m, self.cli.cyclic_attempts)?.0),
        }
    }

    fn point(&mut self, at: &str) -> Result<Point> {
        let x = inputs::parse_point(at)?;
        self.manifest.flag("at", format!("{},{}", padic_polygon::scalars::fmt_q(&x.center), x.log_radius));
        Ok(x)
    }
}

#[derive(Serialize)]
struct AuditOutput {
    passed: bool,
    audit: AuditReport,
    criteria: Vec<CriterionReport>,
}

#[derive(Serialize)]
struct PolygonOutput {
    at: Point,
    polygon: NewtonPolygon,
    slopes: Vec<QLog>,
    young: SpectralRadii,
    descent: Option<DescentReport>,
    descent_error: Option<String>,
}

#[derive(Serialize)]
struct OracleOutput {
    at: Point,
    depth: usize,
    estimate: QLog,
    #[serde(skip_serializing_if = "Option::is_none")]
    approx: Option<f64>,
}

#[derive(Serialize)]
struct FrobeniusRadiiOutput {
    input: SpectralRadii,
    context: FrobContext,
    pushforward: SpectralRadii,
}

fn run(cli: &Cli) -> Result<(String, RunManifest, Outcome)> {
    let name = match &cli.command {
        Command::Profile { .. } => "profile",
        Command::Graph { .. } => "graph",
        Command::Audit { .. } => "audit",
        Command::Polygon { .. } => "polygon",
        Command::Oracle { .. } => "oracle",
        Command::Frobenius { action: FrobeniusCommand::Push { .. } } => "frobenius push",
        Command::Frobenius { action: FrobeniusCommand::Radii { .. } } => "frobenius radii",
        Command::Frobenius { action: FrobeniusCommand::Descend { .. } } => "frobenius descend",
    };
    let mut run = Run { cli, manifest: RunManifest::new(name) };
    let mut outcome = Outcome::Clean;
    let text = match &cli.command {
        Command::Profile { input, domain } => {
            let sys = inputs::parse_system(&run.read("operator", input)?)?;
            let p = run.prime()?;
            let dom = inputs::parse_domain(&run.read("domain", domain)?, p)?;
            let cfg = run.config(PROFILE_RANK_CAP);
            let fmt = run.format(&[Format::Json, Format::Csv])?;
            let System::Operator(op) = sys else { bail!("profiles need an operator with factored coefficients") };
            let profile = build_profile(&op, &dom, p, &cfg)?;
            match fmt {
                Format::Csv => emit::profile_csv(&profile, cli.approx, &run.manifest),
                _ => emit::json(&profile, &run.manifest),
            }
        }
        Command::Graph { input } => {
            let profile = inputs::parse_profile(&run.read("profile", input)?)?;
            check_index(cli.index, profile.rank)?;
            run.manifest.p = Some(profile.p.get());
            run.manifest.flag("index", cli.index);
            let fmt = run.format(&[Format::Dot, Format::Json, Format::Csv])?;
            let g = GraphExport::new(&profile, cli.index);
            match fmt {
                Format::Dot => emit::graph_dot(&g, &run.manifest),
                Format::Csv => emit::graph_csv(&g, &run.manifest),
                Format::Json => emit::json(&g, &run.manifest),
            }
        }
        Command::Audit { input } => {
            let profile = inputs::parse_profile(&run.read("profile", input)?)?;
            run.manifest.p = Some(profile.p.get());
            let fmt = run.format(&[Format::Json, Format::Csv])?;
            let audit = audit_main_theorem(&profile);
            let criteria: Vec<CriterionReport> = (1..=profile.rank)
                .map(|i| {
                    let cg = prune_to_controlling_graph(&profile, i);
                    check_criterion(&profile, i, &cg.graph, &audit.exceptional[i - 1])
                })
                .collect();
            let passed = audit.is_clean() && criteria.iter().all(|c| c.passed());
            if !passed {
                outcome = Outcome::Violations;
            }
            match fmt {
                Format::Csv => emit::violations_csv(&audit.violations, &run.manifest),
                _ => emit::json(&AuditOutput { passed, audit, criteria }, &run.manifest),
            }
        }
        Command::Polygon { input, at } => {
            let sys = inputs::parse_system(&run.read("system", input)?)?;
            let p = run.prime()?;
            let x = run.point(at)?;
            let cfg = run.config(DEFAULT_RANK_CAP);
            run.format(&[Format::Json])?;
            let op = run.operator(&sys)?;
            let polygon = spectral_polygon_at(&op, &x, p)?;
            let young = small_radius_certify(&polygon, &x, p);
            let (descent, descent_error) = match descent_certify(&op, &x, p, &cfg) {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let out = PolygonOutput { at: x, slopes: polygon.slopes(), polygon, young, descent, descent_error };
            emit::json(&out, &run.manifest)
        }
        Command::Oracle { input, at } => {
            let sys = inputs::parse_system(&run.read("system", input)?)?;
            let p = run.prime()?;
            let x = run.point(at)?;
            run.manifest.flag("N", cli.depth);
            run.format(&[Format::Json])?;
            let estimate = match &sys {
                System::Operator(op) => radius_oracle_op(op, &x, cli.depth, p)?,
                System::Matrix(m) => radius_oracle(m, &x, cli.depth, p)?,
            };
            let approx = cli.approx.then(|| estimate.fin().map(approx)).flatten();
            emit::json(&OracleOutput { at: x, depth: cli.depth, estimate, approx }, &run.manifest)
        }
        Command::Frobenius { action } => match action {
            FrobeniusCommand::Push { input } => {
                let sys = inputs::parse_system(&run.read("system", input)?)?;
                let p = run.prime()?;
                run.format(&[Format::Json])?;
                emit::json(&pushforward_matrix(&sys.matrix(), p)?, &run.manifest)
            }
            FrobeniusCommand::Radii { input, at } => {
                let sys = inputs::parse_system(&run.read("system", input)?)?;
                let p = run.prime()?;
                let x = run.point(at)?;
                run.format(&[Format::Json])?;
                let op = run.operator(&sys)?;
                let s = young_certify(&op, &x, p)?;
                let ctx = FrobContext::new(&x, &s.values, p)?;
                let pushforward = pushforward_radii(&s, &ctx);
                emit::json(&FrobeniusRadiiOutput { input: s, context: ctx, pushforward }, &run.manifest)
            }
            FrobeniusCommand::Descend { input, at } => {
                let sys = inputs::parse_system(&run.read("system", input)?)?;
                let p = run.prime()?;
                let x = run.point(at)?;
                let cfg = run.config(DEFAULT_RANK_CAP);
                run.format(&[Format::Json])?;
                let op = run.operator(&sys)?;
                emit::json(&descent_certify(&op, &x, p, &cfg)?, &run.manifest)
            }
        },
    };
    Ok((text, run.manifest, outcome))
}

fn check_index(i: usize, r: usize) -> Result<()> {
    if i == 0 || i > r {
        bail!("index {i} outside 1..={r}");
    }
    Ok(())
}

fn write_output(cli: &Cli, text: &str, manifest: &RunManifest, started: Instant) -> Result<()> {
    match &cli.output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            manifest.write_sidecar(path, started.elapsed().as_millis())
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    match run(&cli).and_then(|(text, manifest, outcome)| write_output(&cli, &text, &manifest, started).map(|_| outcome))
    {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
