//! Thin command-line front end over the library. Every subcommand maps onto
//! one library entry point; exit codes are 0 (ok), 1 (a property violation
//! was found), 2 (usage or IO error).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gmdp::casedata;
use gmdp::coupling::min_delta_lifting;
use gmdp::demo::{self, OfficeConfig, PipelineConfig, TwoZoneConfig};
use gmdp::io::{self, Provenance};
use gmdp::linalg::{chi_square_inv, Col, Mat};
use gmdp::model::InputPoint;
use gmdp::refine::RecoveryPolicy;
use gmdp::safety::{decorrelate, value_iteration_safety, Grid, OutputBox};
use gmdp::simrel::{
    certify_by_sampling, tradeoff_normbound, tradeoff_sprocedure, ErrorSystem, LtiInterface,
};
use gmdp::validate::sandwich_suite;

#[derive(Parser)]
#[command(name = "gmdp", version, about = "Approximate simulation relations, controller refinement, and grid-based safety verification for Markov decision processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root seed for all randomized work.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,

    /// Output directory for emitted files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Tolerance profile for statistical checks.
    #[arg(long, global = true, value_enum, default_value_t = ToleranceProfile::Default)]
    tolerance_profile: ToleranceProfile,
}

#[derive(Copy, Clone, ValueEnum)]
enum ToleranceProfile {
    Default,
    Strict,
}

impl ToleranceProfile {
    fn enumeration_slack(self) -> f64 {
        match self {
            ToleranceProfile::Default => 1e-9,
            ToleranceProfile::Strict => 0.0,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Minimal-δ lifting of two distributions over a relation mask.
    LiftMinDelta(LiftArgs),
    /// Balanced-truncation reduction of an LTI model.
    Reduce(ReduceArgs),
    /// Interface gains for a concrete/reduced model pair.
    Interface(InterfaceArgs),
    /// ε(δ) trade-off curve for a certified pair.
    Tradeoff(TradeoffArgs),
    /// Sampling falsifier for a certificate.
    Certify(CertifyArgs),
    /// Grid safety value iteration.
    GridDp(GridDpArgs),
    /// Refined-controller simulation trials.
    RefineSimulate(RefineSimArgs),
    /// Randomized exact-enumeration suite for the refinement bounds.
    Verify(VerifyArgs),
    /// Run a bundled end-to-end demo.
    Demo(DemoArgs),
    /// Run a staged pipeline from a configuration file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct LiftArgs {
    /// JSON file with fields `delta`, `theta`, `relation`.
    #[arg(long)]
    input: PathBuf,
    /// Write the coupling matrix JSON here.
    #[arg(long)]
    coupling_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Model JSON path, or `office` for the embedded model.
    #[arg(long, default_value = "office")]
    model: String,
    #[arg(long)]
    order: usize,
    /// Input weight of the stabilizing Riccati prefeedback; omit to reduce
    /// the native dynamics.
    #[arg(long)]
    prefeedback_weight: Option<f64>,
}

#[derive(Args)]
struct InterfaceArgs {
    /// Concrete model JSON path, or `office`.
    #[arg(long, default_value = "office")]
    model: String,
    /// Reduced model JSON path, or `office-reference`.
    #[arg(long, default_value = "office-reference")]
    reduced: String,
}

#[derive(Args)]
struct TradeoffArgs {
    /// Certification method.
    #[arg(long, value_enum, default_value_t = TradeoffMethod::Normbound)]
    method: TradeoffMethod,
    /// Comma-separated δ grid.
    #[arg(long, default_value = "1e-1,1e-2,1e-3")]
    delta_grid: String,
    /// Input-freedom bound `u_s² ≤ c1`.
    #[arg(long, default_value_t = 0.04)]
    c1: f64,
    /// Degrees of freedom of the χ² disturbance quantile.
    #[arg(long, default_value_t = 3)]
    dof: usize,
    /// Certificate JSON with `m, p, r, q, k`; defaults to the embedded
    /// office reference data.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Concrete model JSON path, or `office`.
    #[arg(long, default_value = "office")]
    model: String,
    /// Abstract/reduced model JSON path, or `office-reference`.
    #[arg(long, default_value = "office-reference")]
    reduced: String,
}

#[derive(Copy, Clone, ValueEnum)]
enum TradeoffMethod {
    Normbound,
    Sproc,
}

#[derive(Args)]
struct CertifyArgs {
    /// Certificate JSON (`m,p,r,q,k,epsilon,delta,c1,dof`).
    #[arg(long)]
    certificate: Option<PathBuf>,
    #[arg(long, default_value = "office")]
    model: String,
    #[arg(long, default_value = "office-reference")]
    reduced: String,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
}

#[derive(Args)]
struct GridDpArgs {
    /// Model JSON path, or `office-reduced` for the embedded reduced model.
    #[arg(long, default_value = "office-reduced")]
    model: String,
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    /// Comma-separated cell widths per decorrelated state axis.
    #[arg(long)]
    delta_cells: String,
    /// Number of evenly spaced inputs over the admissible input interval.
    #[arg(long, default_value_t = 21)]
    inputs: usize,
    /// Safe output interval `lo,hi`.
    #[arg(long, default_value = "-0.2986,0.2986", allow_hyphen_values = true)]
    safe: String,
    /// Grid box half-width in stationary standard deviations.
    #[arg(long, default_value_t = 3.0)]
    box_sigmas: f64,
}

#[derive(Args)]
struct RefineSimArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = RecoveryArg::Reset)]
    recovery: RecoveryArg,
    /// Output-error level defining the relation ball.
    #[arg(long, default_value_t = 0.16)]
    epsilon: f64,
}

#[derive(Copy, Clone, ValueEnum)]
enum RecoveryArg {
    Reset,
    Hold,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run the randomized two-sided-bound suite.
    #[arg(long, alias = "paper-sandwich", default_value_t = true)]
    sandwich: bool,
    #[arg(long, default_value_t = 500)]
    instances: usize,
}

#[derive(Args)]
struct DemoArgs {
    /// `two-zone` (alias `case1`) or `office` (alias `case2`).
    id: String,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration JSON.
    #[arg(long)]
    config: PathBuf,
}

fn parse_f64_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow::anyhow!("bad number {t:?}: {e}")))
        .collect()
}

fn load_lti(name: &str) -> anyhow::Result<gmdp::model::GaussianLtiGmdp> {
    match name {
        "office" => Ok(casedata::office_full()),
        "office-reduced" | "office-reference" => Ok(casedata::office_reduced_reference()),
        "two-zone" => Ok(casedata::two_zone_concrete()),
        "two-zone-abstract" => Ok(casedata::two_zone_abstract()),
        path => {
            let json: io::ModelJson = io::read_json(std::path::Path::new(path))?;
            Ok(json.into_lti()?)
        }
    }
}

fn reference_interface() -> (LtiInterface, Mat) {
    let r = casedata::office_reference();
    (
        LtiInterface {
            r: Mat::from_row_slice(1, 1, &[r.r]),
            q: r.q.clone(),
            k: r.k.clone(),
            p: r.p.clone(),
        },
        r.m.clone(),
    )
}

fn interface_from_certificate(cert: &io::CertificateJson) -> anyhow::Result<(LtiInterface, Mat)> {
    Ok((
        LtiInterface {
            r: io::rows_to_mat(&cert.r)?,
            q: io::rows_to_mat(&cert.q)?,
            k: io::rows_to_mat(&cert.k)?,
            p: io::rows_to_mat(&cert.p)?,
        },
        io::rows_to_mat(&cert.m)?,
    ))
}

/// Exit code 1 marks a found property violation, 2 a usage/IO failure.
fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global().ok();
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let prov = |tag: &str| Provenance {
        seed: cli.seed,
        config_hash: io::config_hash(&format!("{tag}:seed={}", cli.seed)),
    };

    match &cli.command {
        Command::LiftMinDelta(args) => {
            let problem: io::LiftProblemJson = io::read_json(&args.input)?;
            let coupling = min_delta_lifting(
                &Col::from_row_slice(&problem.delta),
                &Col::from_row_slice(&problem.theta),
                &problem.relation,
            )?;
            println!("delta = {:.12}", coupling.delta);
            if let Some(out) = &args.coupling_out {
                io::write_json(
                    out,
                    &serde_json::json!({
                        "delta": coupling.delta,
                        "w": io::mat_to_rows(&coupling.w),
                    }),
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reduce(args) => {
            let model = load_lti(&args.model)?;
            let f = match args.prefeedback_weight {
                Some(w) => Some(gmdp::reduction::prefeedback_gain(&model, w)?),
                None => None,
            };
            let red = gmdp::reduction::balanced_truncation(&model, args.order, f.as_ref())?;
            io::write_json(
                &cli.out_dir.join("reduced.json"),
                &io::ModelJson::from_lti(&red.model),
            )?;
            io::write_csv(
                &cli.out_dir.join("hankel.csv"),
                &prov("reduce"),
                &["index", "hankel_value"],
                red.hankel_values
                    .iter()
                    .enumerate()
                    .map(|(i, h)| vec![i.to_string(), format!("{h:.12}")]),
            )?;
            println!(
                "reduced to order {} (hankel values: {})",
                args.order,
                red.hankel_values.iter().map(|h| format!("{h:.4e}")).collect::<Vec<_>>().join(", ")
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Interface(args) => {
            let model = load_lti(&args.model)?;
            let reduced_model = load_lti(&args.reduced)?;
            let red = gmdp::reduction::ReducedModel {
                model: reduced_model,
                hankel_values: vec![],
                source: gmdp::reduction::ReductionSource::Plain,
            };
            let iface = gmdp::simrel::synthesize_interface(&model, &red, None)?;
            io::write_json(
                &cli.out_dir.join("interface.json"),
                &serde_json::json!({
                    "p": io::mat_to_rows(&iface.p),
                    "q": io::mat_to_rows(&iface.q),
                    "r": io::mat_to_rows(&iface.r),
                    "k": io::mat_to_rows(&iface.k),
                }),
            )?;
            println!("interface gains written to {}", cli.out_dir.join("interface.json").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Tradeoff(args) => {
            let model = load_lti(&args.model)?;
            let reduced = load_lti(&args.reduced)?;
            let (iface, m) = match &args.certificate {
                Some(path) => interface_from_certificate(&io::read_json(path)?)?,
                None => reference_interface(),
            };
            let err = ErrorSystem::build(&model, &reduced, &iface, &m)?;
            let grid = parse_f64_list(&args.delta_grid)?;
            let curve = match args.method {
                TradeoffMethod::Normbound => tradeoff_normbound(&err, &grid, args.c1, args.dof)?,
                TradeoffMethod::Sproc => tradeoff_sprocedure(&err, &grid, args.c1, args.dof)?,
            };
            let path = cli.out_dir.join("tradeoff.csv");
            io::write_csv(
                &path,
                &prov("tradeoff"),
                &["delta", "epsilon"],
                curve
                    .points
                    .iter()
                    .map(|(d, e)| vec![format!("{d:.9}"), format!("{e:.9}")]),
            )?;
            for (d, e) in &curve.points {
                println!("delta = {d:.6}  epsilon = {e:.6}");
            }
            println!("written to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify(args) => {
            let model = load_lti(&args.model)?;
            let reduced = load_lti(&args.reduced)?;
            let (iface, m, eps, delta, c1, dof) = match &args.certificate {
                Some(path) => {
                    let cert: io::CertificateJson = io::read_json(path)?;
                    let (i, m) = interface_from_certificate(&cert)?;
                    (i, m, cert.epsilon, cert.delta, cert.c1, cert.dof)
                }
                None => {
                    let (i, m) = reference_interface();
                    (i, m, 0.2014, 1e-2, 0.04, 2)
                }
            };
            let err = ErrorSystem::build(&model, &reduced, &iface, &m)?;
            let c_w = if delta >= 1.0 { 0.0 } else { chi_square_inv(dof, 1.0 - delta)? };
            match certify_by_sampling(&err, eps, c_w, c1, args.samples, cli.seed) {
                gmdp::simrel::CertifyOutcome::Ok => {
                    println!("ok: no counterexample in {} boundary samples", args.samples);
                    Ok(ExitCode::SUCCESS)
                }
                gmdp::simrel::CertifyOutcome::Counterexample { error_norm, epsilon, .. } => {
                    println!(
                        "counterexample: one-step error {error_norm:.6} exceeds epsilon {epsilon:.6}"
                    );
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::GridDp(args) => {
            let model = load_lti(&args.model)?;
            let widths = parse_f64_list(&args.delta_cells)?;
            let safe_lohi = parse_f64_list(&args.safe)?;
            if safe_lohi.len() != 2 {
                anyhow::bail!("--safe takes lo,hi");
            }
            let safe = OutputBox::new(
                Col::from_row_slice(&[safe_lohi[0]]),
                Col::from_row_slice(&[safe_lohi[1]]),
            )?;
            let dec = decorrelate(&model)?;
            // box from the stationary spread, cells from the widths
            let probe = gmdp::safety::default_grid(&dec, &vec![1; model.n_states()], args.box_sigmas)?;
            let mut cells = Vec::new();
            for d in 0..model.n_states() {
                let span = probe.hi[d] - probe.lo[d];
                cells.push(((span / widths[d]).ceil() as usize).max(1));
            }
            let grid = Grid::new(probe.lo.clone(), probe.hi.clone(), cells)?;
            let c1 = model.input_bound.unwrap_or(0.04);
            let inputs = demo::input_levels(args.inputs, c1);
            let vf = value_iteration_safety(&model, &grid, &safe, &inputs, args.horizon)?;
            io::write_csv(
                &cli.out_dir.join("grid_v0.csv"),
                &prov("grid-dp"),
                &["cell", "value"],
                (0..grid.n_cells()).map(|c| {
                    let z = grid.center(c);
                    let coords: Vec<String> = z.iter().map(|v| format!("{v:.6}")).collect();
                    vec![coords.join(" "), format!("{:.9}", vf.values[0][c])]
                }),
            )?;
            io::write_csv(
                &cli.out_dir.join("grid_policy.csv"),
                &prov("grid-dp"),
                &["t", "cell", "input_index"],
                (0..args.horizon).flat_map(|t| {
                    let row = vf.policy[t].clone();
                    row.into_iter()
                        .enumerate()
                        .map(move |(c, u)| vec![t.to_string(), c.to_string(), u.to_string()])
                }),
            )?;
            println!(
                "grid {} cells, error bound {:.4}; V0 written to {}",
                grid.n_cells(),
                vf.error_bound,
                cli.out_dir.join("grid_v0.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::RefineSimulate(args) => {
            let cfg = TwoZoneConfig {
                seed: cli.seed,
                trials: args.trials,
                horizon: args.horizon,
                epsilon: args.epsilon,
                ..Default::default()
            };
            let recovery = match args.recovery {
                RecoveryArg::Reset => RecoveryPolicy::ResetAbstract,
                RecoveryArg::Hold => {
                    RecoveryPolicy::HoldInput(InputPoint::Vector(Col::zeros(2)))
                }
            };
            let report = demo::two_zone_refine_trials(&cli.out_dir, &cfg, recovery)?;
            let exits = report.exits.as_ref().map(|e| e.total_exits).unwrap_or(0);
            println!(
                "{} trials over {} steps: {} relation exits total ({:.3} per trial)",
                args.trials,
                args.horizon,
                exits,
                exits as f64 / args.trials as f64
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            if !args.sandwich {
                anyhow::bail!("nothing to verify; enable --sandwich");
            }
            let outcomes =
                sandwich_suite(args.instances, cli.seed, cli.tolerance_profile.enumeration_slack())?;
            io::write_csv(
                &cli.out_dir.join("sandwich_suite.csv"),
                &prov("verify"),
                &["index", "exact", "delta", "gamma", "tv_gap", "pass"],
                outcomes.iter().map(|o| {
                    vec![
                        o.index.to_string(),
                        (o.exact as u8).to_string(),
                        format!("{:.9}", o.delta),
                        format!("{:.9}", o.gamma),
                        format!("{:.3e}", o.tv_gap),
                        (o.pass as u8).to_string(),
                    ]
                }),
            )?;
            let failures = outcomes.iter().filter(|o| !o.pass).count();
            println!(
                "{} instances: {} passed, {failures} failed",
                outcomes.len(),
                outcomes.len() - failures
            );
            if failures > 0 {
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo(args) => match args.id.as_str() {
            "case1" | "two-zone" => {
                let cfg = TwoZoneConfig { seed: cli.seed, ..Default::default() };
                let report = demo::run_two_zone(&cli.out_dir, &cfg)?;
                println!(
                    "two-zone: delta({}) = {:.6} (exact {:.6})",
                    report.epsilon, report.delta, report.delta_exact
                );
                println!(
                    "excursions over {} steps: mean {:.3} <= bound {:.3} + 3se {:.3}: {}",
                    report.horizon,
                    report.mean_excursions,
                    report.excursion_bound,
                    3.0 * report.excursion_std_error,
                    if report.bound_holds { "PASS" } else { "FAIL" }
                );
                Ok(if report.bound_holds { ExitCode::SUCCESS } else { ExitCode::from(1) })
            }
            "case2" | "office" => {
                let cfg = OfficeConfig { seed: cli.seed, ..Default::default() };
                let report = demo::run_office(&cli.out_dir, &cfg)?;
                println!(
                    "office: epsilon normbound {:.4}, sproc {:.4} (dof2 {:.4}) at delta {:.0e}",
                    report.epsilon_normbound, report.epsilon_sproc, report.epsilon_sproc_dof2,
                    report.delta
                );
                println!(
                    "dp value at origin {:.4} (error bound {:.3}); abstract {:.4}, concrete {:.4}, lower bound {:.4}",
                    report.dp_value_at_origin,
                    report.dp_error_bound,
                    report.abstract_safe_fraction,
                    report.concrete_safe_fraction,
                    report.lower_bound
                );
                println!("sandwich report: {}", if report.sandwich_pass { "PASS" } else { "FAIL" });
                Ok(if report.sandwich_pass && report.certificate_sampling_ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
            other => anyhow::bail!("unknown demo id {other:?} (expected two-zone/case1 or office/case2)"),
        },
        Command::Pipeline(args) => {
            let cfg: PipelineConfig = io::read_json(&args.config)?;
            let report = demo::run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            let ok = match &report {
                demo::PipelineReport::TwoZone(r) => r.bound_holds,
                demo::PipelineReport::Office(r) => r.sandwich_pass,
            };
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
