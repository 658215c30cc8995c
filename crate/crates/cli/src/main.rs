use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shellhom::cellform::{gamma_sweep, solve_cell_form, CellFormError, CellProblem};
use shellhom::config::{ConfigError, ExperimentKind, RegimeSection, RunConfig};
use shellhom::energy::{bending_energy, cell_forms_for, BendingState, EnergyError};
use shellhom::geometry::Domain;
use shellhom::harness::{
    limsup_check, osc_z_pairing, strain_expansion_check, strong_norm_check, three_scale_pairing, HarnessError,
};
use shellhom::io;
use shellhom::suites::{run_suite, Suite, SuiteError};

#[derive(Parser)]
#[command(name = "shellhom", version, about = "Homogenized bending forms and limit energies for multiscale shells")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one cell problem.
    Cellform {
        /// `gamma1=<0|inf|number>`.
        #[arg(long)]
        regime: Option<String>,
        /// Parameter point `u,v`; defaults to the centre of the domain.
        #[arg(long)]
        point: Option<String>,
    },
    /// Cell forms over a γ₁ grid `a:b:<n>log` or `a:b:<n>lin`.
    Sweep {
        #[arg(long)]
        gamma1: String,
        #[arg(long)]
        point: Option<String>,
    },
    /// Evaluate the limit bending energy of the configured immersion.
    Energy {
        #[arg(long)]
        regime: Option<String>,
    },
    /// Run an invariant suite.
    Verify {
        /// `geometry`, `material` or `relaxation`.
        suite: String,
    },
    /// Run the pairing experiments of the config.
    Threescale,
    /// Run the recovery-sequence experiments of the config.
    Limsup,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl ToString) -> Failure {
        Failure { code: 2, message: message.to_string() }
    }

    fn solver(message: impl ToString) -> Failure {
        Failure { code: 3, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<CellFormError> for Failure {
    fn from(e: CellFormError) -> Self {
        match e {
            CellFormError::InvalidGamma(_) | CellFormError::InvalidGrid => Failure::config(e),
            other => Failure::solver(other),
        }
    }
}

impl From<EnergyError> for Failure {
    fn from(e: EnergyError) -> Self {
        Failure::solver(e)
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Unknown(_) => Failure::config(e),
            other => Failure::solver(other),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        use HarnessError::*;
        match e {
            Parse(_) | UnderResolved { .. } | CostGuard { .. } | NonZeroMeanRho { .. } | MissingProfile(_)
            | WrongRegimeProfile { .. } | NonZeroMeanProfile { .. } | InconsistentEpsLaw { .. } | BadSequence
            | NotPeriodic { .. } => Failure::config(e),
            other => Failure::solver(other),
        }
    }
}

/// Files produced by a subcommand, in write order.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
    notes: Vec<String>,
    verification_failed: bool,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }
}

fn parse_point(s: &str) -> Result<[f64; 2], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(u), Ok(v)) => Ok([u, v]),
            _ => Err(Failure::config(format!("bad --point `{s}`"))),
        },
        _ => Err(Failure::config(format!("--point needs `u,v`, got `{s}`"))),
    }
}

fn centre(d: Domain) -> [f64; 2] {
    match d {
        Domain::Rect { u, v } => [0.5 * (u[0] + u[1]), 0.5 * (v[0] + v[1])],
        Domain::Disk { .. } => [0.0, 0.0],
    }
}

/// `a:b:<n>log` or `a:b:<n>lin`.
fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::config(format!("bad --gamma1 grid `{s}` (expected a:b:<n>log or a:b:<n>lin)"));
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, spec] = parts.as_slice() else { return Err(bad()) };
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    let (n, log) = if let Some(n) = spec.strip_suffix("log") {
        (n, true)
    } else if let Some(n) = spec.strip_suffix("lin") {
        (n, false)
    } else {
        return Err(bad());
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    if n < 2 || !(a > 0.0) || !(b > a) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            if log {
                10f64.powf(a.log10() + f * (b.log10() - a.log10()))
            } else {
                a + f * (b - a)
            }
        })
        .collect())
}

fn apply_regime_flag(cfg: &mut RunConfig, flag: &Option<String>) -> Result<(), Failure> {
    if let Some(r) = flag {
        let value = r.strip_prefix("gamma1=").ok_or_else(|| Failure::config(format!("--regime needs `gamma1=<value>`, got `{r}`")))?;
        cfg.regime = Some(RegimeSection { gamma1: shellhom::config::FieldValue::Text(value.into()) });
    }
    Ok(())
}

fn run(cli: &Cli, cfg: &mut RunConfig, out: &mut Outputs) -> Result<(), Failure> {
    match &cli.command {
        Command::Cellform { regime, point } => {
            apply_regime_flag(cfg, regime)?;
            let surface = cfg.surface()?;
            let material = cfg.material()?;
            let disc = cfg.discretization()?;
            let regime = cfg.regime()?;
            let x = match point {
                Some(p) => parse_point(p)?,
                None => centre(surface.domain()),
            };
            let form = solve_cell_form(x, &surface, &material, regime, disc)?;
            out.add("cellform.json", io::cellform_json(&form));
        }
        Command::Sweep { gamma1, point } => {
            let grid = parse_grid(gamma1)?;
            let surface = cfg.surface()?;
            let material = cfg.material()?;
            let disc = cfg.discretization()?;
            let x = match point {
                Some(p) => parse_point(p)?,
                None => centre(surface.domain()),
            };
            let problem = CellProblem::new(x, &surface, &material, disc)?;
            let forms = gamma_sweep(&problem, &grid)?;
            let inner: Vec<_> = forms.into_iter().filter(|f| matches!(f.regime, shellhom::Regime::Finite(_))).collect();
            out.add("sweep.csv", io::sweep_csv(&inner));
        }
        Command::Energy { regime } => {
            apply_regime_flag(cfg, regime)?;
            let surface = cfg.surface()?;
            let material = cfg.material()?;
            let disc = cfg.discretization()?;
            let regime = cfg.regime()?;
            let (immersion, _) = cfg.immersion()?;
            let state = BendingState::new(&surface, &immersion)?;
            let forms = cell_forms_for(&surface, &material, regime, disc)?;
            let e = bending_energy(&state, &forms)?;
            if !e.finite {
                out.notes.push(format!("immersion is not isometric (violation {})", io::fmt_f64(e.iso_violation)));
            }
            out.add("energy.json", io::energy_json(&e));
        }
        Command::Verify { suite } => {
            let suite = Suite::parse(suite)?;
            let surface = cfg.surface()?;
            let material = cfg.material()?;
            let report = run_suite(suite, &surface, &material, cfg.seed)?;
            for c in report.checks.iter().filter(|c| !c.pass) {
                out.notes.push(format!("FAIL {}: worst {} > limit {}", c.name, io::fmt_f64(c.worst), io::fmt_f64(c.limit)));
            }
            out.verification_failed = !report.passed();
            out.add(format!("verify-{}.json", suite.name()), io::to_json(&report));
        }
        Command::Threescale => {
            let exps: Vec<_> = cfg
                .experiment
                .iter()
                .filter(|e| matches!(e.kind, ExperimentKind::Threescale | ExperimentKind::Strong | ExperimentKind::OscZ))
                .collect();
            if exps.is_empty() {
                return Err(Failure::config("no [[experiment]] of kind threescale, strong or osc-z"));
            }
            for e in exps {
                let (exp, rho) = cfg.pairing(e)?;
                let rows = match (e.kind, rho) {
                    (ExperimentKind::Strong, _) => strong_norm_check(&exp)?,
                    (ExperimentKind::OscZ, Some(rho)) => osc_z_pairing(&exp, &rho)?,
                    _ => three_scale_pairing(&exp)?,
                };
                out.add(format!("threescale-{}.csv", e.name), io::pairing_csv(&rows));
            }
        }
        Command::Limsup => {
            let exps: Vec<_> = cfg
                .experiment
                .iter()
                .filter(|e| matches!(e.kind, ExperimentKind::Limsup | ExperimentKind::Strain))
                .collect();
            if exps.is_empty() {
                return Err(Failure::config("no [[experiment]] of kind limsup or strain"));
            }
            for e in exps {
                let rc = cfg.recovery(e)?;
                if e.kind == ExperimentKind::Strain {
                    out.add(format!("strain-{}.csv", e.name), io::strain_csv(&strain_expansion_check(&rc)?));
                } else {
                    let material = cfg.material()?;
                    out.add(format!("limsup-{}.csv", e.name), io::limsup_csv(&limsup_check(&rc, &material)?));
                }
            }
        }
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Cellform { .. } => "cellform",
        Command::Sweep { .. } => "sweep",
        Command::Energy { .. } => "energy",
        Command::Verify { .. } => "verify",
        Command::Threescale => "threescale",
        Command::Limsup => "limsup",
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let path = common.config.as_ref().ok_or_else(|| Failure::config("--config is required"))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = o.display().to_string();
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("SHELLHOM_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Failure::config(format!("SHELLHOM_THREADS must be an integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Failure::config(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn write_all(out: &Outputs, diagnostics: &str, resolved: Option<&str>) -> std::io::Result<()> {
    fs::create_dir_all(&out.dir)?;
    for (name, content) in &out.files {
        fs::write(out.dir.join(name), content)?;
    }
    if let Some(r) = resolved {
        fs::write(out.dir.join("resolved-config.toml"), r)?;
    }
    fs::write(out.dir.join("diagnostics.txt"), diagnostics)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = command_name(&cli.command);
    let mut out = Outputs {
        dir: cli.common.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        files: Vec::new(),
        notes: Vec::new(),
        verification_failed: false,
    };
    let mut resolved = None;
    let result = configure_threads().and_then(|_| load(&cli.common)).and_then(|mut cfg| {
        out.dir = Path::new(&cfg.output).to_path_buf();
        let r = run(&cli, &mut cfg, &mut out);
        resolved = Some(cfg.to_toml());
        r
    });
    let code = match &result {
        Ok(()) if out.verification_failed => 4,
        Ok(()) => 0,
        Err(f) => f.code,
    };
    let mut diag = String::new();
    let _ = writeln!(diag, "command: {name}");
    let _ = writeln!(diag, "exit: {code}");
    match &result {
        Ok(()) => {
            let status = if out.verification_failed { "verification failed" } else { "ok" };
            let _ = writeln!(diag, "status: {status}");
        }
        Err(f) => {
            let _ = writeln!(diag, "status: error");
            let _ = writeln!(diag, "error: {}", f.message);
        }
    }
    for n in &out.notes {
        let _ = writeln!(diag, "note: {n}");
    }
    for (file, _) in &out.files {
        let _ = writeln!(diag, "wrote: {file}");
    }
    if let Err(e) = write_all(&out, &diag, resolved.as_deref()) {
        eprintln!("shellhom: cannot write outputs to {}: {e}", out.dir.display());
        return ExitCode::from(3);
    }
    for (_, content) in &out.files {
        print!("{content}");
    }
    if let Err(f) = &result {
        eprintln!("shellhom {name}: {}", f.message);
    }
    ExitCode::from(code)
}
