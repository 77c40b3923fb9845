//! `rhoharm` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rhoharm::exponents::ExponentField;
use rhoharm::extrapolation::{rubio_de_francia_majorant_with, MLocal, MTheta, MajorantConfig, SublinearOperator};
use rhoharm::gridio::{read_any, write_any};
use rhoharm::harness::{emit_report, run_suite, ExperimentConfig, DEFAULTS};
use rhoharm::maximal::{m_local, m_theta, sharp, BallFamily};
use rhoharm::potential::{critical_radius, verify_rho_bounds, CriticalRadiusField, PotentialField};
use rhoharm::schrodinger::{
    build_l, build_operator, extract_kernel, kernel_size_check, kernel_smoothness_check, read_operator,
    write_operator, KernelCheckParams, OperatorName, OperatorParams, SizeMode, SmoothnessMode,
};
use rhoharm::spec::{parse_grid, FieldSpec};
use rhoharm::weights::{
    a1_rho_constant, ap_constant, ap_rho_constant, apvar_constant, apvar_loc_constant, apvar_rho_constant,
    apvar_rho_sweep, theta_ladder, WeightField,
};
use rhoharm::{Grid, GridFunction};

#[derive(Parser)]
#[command(name = "rhoharm", version, about = "Critical-radius harmonic analysis on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical radius functions.
    #[command(subcommand)]
    Rho(RhoCmd),
    /// Maximal and sharp maximal operators.
    #[command(subcommand)]
    Maximal(MaximalCmd),
    /// Weight-class constants.
    #[command(subcommand)]
    Weights(WeightsCmd),
    /// Discrete Schrödinger operators and their kernels.
    #[command(subcommand)]
    Op(OpCmd),
    /// Rubio de Francia majorants.
    #[command(subcommand)]
    Extrapolate(ExtrapolateCmd),
    /// Config-driven verification suites.
    #[command(subcommand)]
    Harness(HarnessCmd),
}

#[derive(Subcommand)]
enum RhoCmd {
    /// Computes ρ from a potential and writes it as a grid file.
    Compute {
        /// Potential descriptor (`const:c`, `power:a`, `oscillator`, `halfspace:c`, `file:<path>`).
        #[arg(long)]
        potential: String,
        /// Grid spec `d=3,n=16,h=0.25`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Searches the (c_ρ, N_ρ) lattice for the two-sided comparability bounds.
    VerifyBounds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        pairs: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MaximalOp {
    M,
    Mtheta,
    Mlocal,
    Sharp,
}

#[derive(Subcommand)]
enum MaximalCmd {
    /// Applies a maximal operator to a grid function.
    Apply {
        #[arg(long, value_enum)]
        op: MaximalOp,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Family scale β of the critical balls.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        rho: RhoSource,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightClassArg {
    Ap,
    A1rho,
    Aprho,
    Apvar,
    ApvarRho,
    ApvarLoc,
}

#[derive(Subcommand)]
enum WeightsCmd {
    /// Constant of a weight in a class, with the worst ball.
    Constant {
        #[arg(long, value_enum)]
        class: WeightClassArg,
        /// Exponent descriptor (`const:p`, `radial:a,b`, `file:<path>`).
        #[arg(long, default_value = "const:2")]
        p: String,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Weight descriptor (`const:c`, `power:a`, `exp:a`, `file:<path>`).
        #[arg(long)]
        weight: String,
        /// Grid spec; needed unless the weight or ρ comes from a binary file.
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        rho: RhoSource,
        /// Family scale β for `apvar-loc`.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Report the θ ladder instead of a single θ (ρ classes only).
        #[arg(long)]
        sweep_theta: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelMode {
    Pointwise,
    Integral,
    FarField,
    AnnulusSum,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Condition {
    Size,
    Smoothness,
    Both,
}

#[derive(Subcommand)]
enum OpCmd {
    /// Builds a registered operator and writes the binary container.
    Build {
        #[arg(long)]
        name: String,
        #[arg(long)]
        potential: String,
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kernel size / smoothness constants of a stored operator.
    KernelCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: KernelMode,
        #[arg(long, value_enum, default_value = "both")]
        condition: Condition,
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        #[arg(long = "N", default_value_t = 1.0)]
        n: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, default_value_t = 64)]
        centers: usize,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[command(flatten)]
        rho: RhoSource,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SublinearArg {
    Mtheta,
    Mlocal,
}

#[derive(Subcommand)]
enum ExtrapolateCmd {
    /// Builds the truncated Rubio de Francia majorant of `h`.
    Majorant {
        #[arg(long)]
        h: PathBuf,
        #[arg(long = "S", value_enum, default_value = "mtheta")]
        s: SublinearArg,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        norm_bound: f64,
        #[arg(long, default_value_t = rhoharm::extrapolation::DEFAULT_TERMS)]
        terms: usize,
        #[arg(long, default_value_t = rhoharm::extrapolation::DEFAULT_TAIL_TOLERANCE)]
        tail_tolerance: f64,
        #[command(flatten)]
        rho: RhoSource,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum HarnessCmd {
    /// Runs a suite; exits 0 iff every pass flag is true.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `section.key=value`, repeatable.
        #[arg(long = "override")]
        overrides: Vec<String>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Prints the embedded defaults file.
    Defaults,
}

/// Where ρ comes from: a grid file, or a potential descriptor.
#[derive(Args, Clone)]
struct RhoSource {
    /// ρ as a grid file.
    #[arg(long = "rho")]
    rho_file: Option<PathBuf>,
    /// Potential descriptor from which ρ is computed.
    #[arg(long = "rho-potential")]
    rho_potential: Option<String>,
}

impl RhoSource {
    fn resolve(&self, grid: &Grid) -> Result<Option<CriticalRadiusField>> {
        match (&self.rho_file, &self.rho_potential) {
            (Some(_), Some(_)) => bail!("give either --rho or --rho-potential, not both"),
            (Some(path), None) => Ok(Some(CriticalRadiusField::from_values(read_any(path, Some(grid))?)?)),
            (None, Some(spec)) => {
                let v = PotentialField::from_spec(grid, &FieldSpec::parse(spec)?)?;
                Ok(Some(critical_radius(&v)))
            }
            (None, None) => Ok(None),
        }
    }

    fn require(&self, grid: &Grid) -> Result<CriticalRadiusField> {
        self.resolve(grid)?
            .context("this command needs ρ: pass --rho <file> or --rho-potential <spec>")
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn read_function(path: &Path, grid: Option<&Grid>) -> Result<GridFunction> {
    read_any(path, grid).with_context(|| format!("reading {}", path.display()))
}

fn rho_cmd(cmd: RhoCmd) -> Result<ExitCode> {
    match cmd {
        RhoCmd::Compute { potential, grid, out } => {
            let grid = parse_grid(&grid)?;
            let v = PotentialField::from_spec(&grid, &FieldSpec::parse(&potential)?)?;
            let rho = critical_radius(&v);
            write_any(rho.field(), &out)?;
            let vals = rho.values();
            print_json(&json!({
                "potential": v.descriptor(),
                "out": out,
                "min": vals.iter().copied().fold(f64::INFINITY, f64::min),
                "max": vals.iter().copied().fold(0.0, f64::max),
                "capped_fraction": rho.capped_fraction(),
                "floored_fraction": rho.floored_fraction(),
                "low_dimension": rho.low_dimension(),
            }))?;
        }
        RhoCmd::VerifyBounds { input, pairs } => {
            let rho = CriticalRadiusField::from_values(read_function(&input, None)?)?;
            print_json(&serde_json::to_value(verify_rho_bounds(&rho, pairs)?)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn maximal_cmd(cmd: MaximalCmd) -> Result<ExitCode> {
    let MaximalCmd::Apply {
        op,
        theta,
        scale,
        input,
        rho,
        out,
    } = cmd;
    let f = read_function(&input, None)?;
    let grid = f.grid().clone();
    let g = match op {
        MaximalOp::M => {
            let r = rho.resolve(&grid)?.map_or_else(|| CriticalRadiusField::constant(&grid, 1.0), Ok)?;
            m_theta(&f, &r, 0.0)?
        }
        MaximalOp::Mtheta => m_theta(&f, &rho.require(&grid)?, theta)?,
        MaximalOp::Mlocal => m_local(&f, &BallFamily::critical(&rho.require(&grid)?, scale)?)?,
        MaximalOp::Sharp => sharp(&f, &BallFamily::critical(&rho.require(&grid)?, scale)?)?,
    };
    write_any(&g, &out)?;
    print_json(&json!({ "out": out, "max": g.max_abs() }))?;
    Ok(ExitCode::SUCCESS)
}

fn weights_cmd(cmd: WeightsCmd) -> Result<ExitCode> {
    let WeightsCmd::Constant {
        class,
        p,
        theta,
        weight,
        grid,
        rho,
        scale,
        sweep_theta,
    } = cmd;
    let wspec = FieldSpec::parse(&weight)?;
    let grid = match (&grid, &wspec, &rho.rho_file) {
        (Some(g), _, _) => parse_grid(g)?,
        (None, FieldSpec::File(path), _) | (None, _, Some(path)) => read_function(path, None)?.grid().clone(),
        _ => bail!("--grid is required when neither the weight nor ρ is a binary file"),
    };
    let w = WeightField::from_spec(&grid, &wspec)?;
    let ladder = BallFamily::ladder(&grid);
    let pfield = || -> Result<ExponentField> { Ok(ExponentField::from_spec(&grid, &FieldSpec::parse(&p)?)?) };
    let constant_p = || -> Result<f64> {
        match FieldSpec::parse(&p)? {
            FieldSpec::Const(v) => Ok(v),
            other => bail!("class needs a constant exponent, got '{other}'"),
        }
    };
    let thetas = if sweep_theta { theta_ladder() } else { vec![theta] };
    let reports = match class {
        WeightClassArg::Ap => vec![ap_constant(&w, constant_p()?, &ladder)?],
        WeightClassArg::Apvar => vec![apvar_constant(&w, &pfield()?, &ladder)?],
        WeightClassArg::ApvarLoc => {
            vec![apvar_loc_constant(&w, &pfield()?, &BallFamily::critical(&rho.require(&grid)?, scale)?)?]
        }
        WeightClassArg::A1rho => {
            let r = rho.require(&grid)?;
            thetas
                .iter()
                .map(|&t| a1_rho_constant(&w, &r, t, &ladder))
                .collect::<rhoharm::Result<Vec<_>>>()?
        }
        WeightClassArg::Aprho => {
            let r = rho.require(&grid)?;
            let pc = constant_p()?;
            thetas
                .iter()
                .map(|&t| ap_rho_constant(&w, &r, pc, t, &ladder))
                .collect::<rhoharm::Result<Vec<_>>>()?
        }
        WeightClassArg::ApvarRho => {
            let r = rho.require(&grid)?;
            if sweep_theta {
                apvar_rho_sweep(&w, &pfield()?, &r, &thetas, &ladder)?
            } else {
                vec![apvar_rho_constant(&w, &pfield()?, &r, theta, &ladder)?]
            }
        }
    };
    let value = if reports.len() == 1 {
        serde_json::to_value(&reports[0])?
    } else {
        serde_json::to_value(&reports)?
    };
    print_json(&value)?;
    Ok(ExitCode::SUCCESS)
}

fn op_cmd(cmd: OpCmd) -> Result<ExitCode> {
    match cmd {
        OpCmd::Build {
            name,
            potential,
            grid,
            gamma,
            alpha,
            out,
        } => {
            let grid = parse_grid(&grid)?;
            let v = PotentialField::from_spec(&grid, &FieldSpec::parse(&potential)?)?;
            let l = build_l(&v)?;
            let op = build_operator(OperatorName::parse(&name)?, &OperatorParams { gamma, alpha }, &v, &l)?;
            write_operator(&op, &out)?;
            print_json(&json!({
                "out": out,
                "provenance": op.provenance(),
                "potential": op.potential(),
                "matrices": op.component_count(),
                "complex": op.is_complex(),
                "lambda_min": l.eigenvalues().map(|e| e[0]),
            }))?;
        }
        OpCmd::KernelCheck {
            input,
            mode,
            condition,
            s,
            n,
            delta,
            centers,
            points,
            rho,
        } => {
            let op = read_operator(&input)?;
            let grid = op.grid().clone();
            let rho = match rho.resolve(&grid)? {
                Some(r) => r,
                None => {
                    let spec = op
                        .potential()
                        .context("operator records no potential; pass --rho or --rho-potential")?;
                    critical_radius(&PotentialField::from_spec(&grid, &FieldSpec::parse(spec)?)?)
                }
            };
            let k = extract_kernel(&op);
            let params = KernelCheckParams {
                s,
                n,
                delta,
                center_budget: centers,
                point_budget: points,
            };
            let size_mode = match mode {
                KernelMode::Pointwise => Some(SizeMode::Pointwise),
                KernelMode::Integral => Some(SizeMode::Integral),
                KernelMode::FarField => Some(SizeMode::FarField),
                KernelMode::AnnulusSum => None,
            };
            let smooth_mode = match mode {
                KernelMode::Pointwise => Some(SmoothnessMode::Pointwise),
                KernelMode::Integral => Some(SmoothnessMode::Integral),
                KernelMode::AnnulusSum => Some(SmoothnessMode::AnnulusSum),
                KernelMode::FarField => None,
            };
            let mut reports = serde_json::Map::new();
            if condition != Condition::Smoothness {
                match size_mode {
                    Some(m) => {
                        reports.insert("size".into(), serde_json::to_value(kernel_size_check(&k, &rho, m, &params)?)?);
                    }
                    None if condition == Condition::Size => bail!("annulus-sum is a smoothness mode"),
                    None => {}
                }
            }
            if condition != Condition::Size {
                match smooth_mode {
                    Some(m) => {
                        reports.insert(
                            "smoothness".into(),
                            serde_json::to_value(kernel_smoothness_check(&k, &rho, m, &params)?)?,
                        );
                    }
                    None if condition == Condition::Smoothness => bail!("far-field is a size mode"),
                    None => {}
                }
            }
            print_json(&serde_json::Value::Object(reports))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn extrapolate_cmd(cmd: ExtrapolateCmd) -> Result<ExitCode> {
    let ExtrapolateCmd::Majorant {
        h,
        s,
        theta,
        scale,
        norm_bound,
        terms,
        tail_tolerance,
        rho,
        out,
    } = cmd;
    let h = read_function(&h, None)?;
    let grid = h.grid().clone();
    let rho = rho.require(&grid)?;
    let op: Box<dyn SublinearOperator> = match s {
        SublinearArg::Mtheta => Box::new(MTheta { rho, theta }),
        SublinearArg::Mlocal => Box::new(MLocal(BallFamily::critical(&rho, scale)?)),
    };
    let config = MajorantConfig {
        norm_bound,
        terms,
        tail_tolerance,
    };
    let m = rubio_de_francia_majorant_with(&h, op.as_ref(), config)?;
    write_any(&m.majorant, &out)?;
    print_json(&json!({
        "out": out,
        "operator": m.operator,
        "norm_bound": norm_bound,
        "terms": terms,
        "tail_max": m.tail_max,
        "majorant_max": m.majorant.max_abs(),
        "geometric_slack": m.geometric_slack,
        "fixed_point_excess": m.fixed_point_excess(op.as_ref())?,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn harness_cmd(cmd: HarnessCmd) -> Result<ExitCode> {
    match cmd {
        HarnessCmd::Defaults => {
            print!("{DEFAULTS}");
            Ok(ExitCode::SUCCESS)
        }
        HarnessCmd::Run {
            config,
            overrides,
            out_dir,
        } => {
            let cfg = ExperimentConfig::load(&config, &overrides)?;
            let report = run_suite(&cfg)?;
            if let Some(dir) = out_dir.as_ref().or(cfg.output_dir.as_ref()) {
                for path in emit_report(&report, dir, &cfg.formats)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            for s in &report.series {
                let growth: Vec<String> = s.growth.iter().map(|g| format!("{:.4}", g.0)).collect();
                println!(
                    "{:<5} {}  C = {}  growth = [{}]{}",
                    if !s.gated {
                        "info"
                    } else if s.pass {
                        "PASS"
                    } else {
                        "FAIL"
                    },
                    s.label,
                    s.max_ratio,
                    growth.join(", "),
                    if s.notes.is_empty() { String::new() } else { format!("  ({})", s.notes.join("; ")) }
                );
            }
            println!("{} {}: {}", report.suite, report.name, if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rho(c) => rho_cmd(c),
        Command::Maximal(c) => maximal_cmd(c),
        Command::Weights(c) => weights_cmd(c),
        Command::Op(c) => op_cmd(c),
        Command::Extrapolate(c) => extrapolate_cmd(c),
        Command::Harness(c) => harness_cmd(c),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
