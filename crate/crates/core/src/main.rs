use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lakes::biot_savart::{build_basis, CirculationVector};
use lakes::config::{parse_config, ExperimentSpec, ScenarioConfig, SequenceRuleSpec};
use lakes::diagnostics::{conserved_quantities, cz_probe, DiagnosticsRecord};
use lakes::geometry::{DepthProfile, LakeGeometry, Point};
use lakes::grid::{build_grid, dump_field, parse_field_dump, ScalarField};
use lakes::harness::{
    gamma_probe_experiment, halved, lake_sequence_experiment, nonsmooth_lake_experiment,
    strictly_decreasing, viscosity_sweep, ExperimentBase, SequenceRule,
};
use lakes::transport::{run, SchemeConfig};

#[derive(Parser)]
#[command(name = "lakes", version, about = "Finite-volume lake-equations solver and convergence harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the scenario's `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the grid cell size.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario and write diagnostics and field dumps.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Deliberately corrupt the conservation ledger (test hook).
        #[arg(long, hide = true)]
        corrupt_conservation: bool,
    },
    /// Lake-sequence stability experiment.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Increasing smooth ladder for a non-smooth target lake.
    Nonsmooth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Vanishing-viscosity sweep.
    Viscosity {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Gamma-convergence probe on eroded domains.
    Gamma {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Diagnostics of a stored vorticity dump, no time stepping.
    Probe {
        #[command(flatten)]
        common: CommonArgs,
        /// Vorticity field dump to analyze.
        #[arg(long)]
        state: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common, corrupt_conservation } => {
            with_scenario(common, |sc| cmd_run(sc, *corrupt_conservation))
        }
        Command::Converge { common } => with_scenario(common, cmd_converge),
        Command::Nonsmooth { common } => with_scenario(common, cmd_nonsmooth),
        Command::Viscosity { common } => with_scenario(common, cmd_viscosity),
        Command::Gamma { common } => with_scenario(common, cmd_gamma),
        Command::Probe { common, state } => {
            with_scenario(common, |sc| cmd_probe(sc, state))
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Everything a subcommand needs, resolved from the config and overrides.
struct Scenario {
    config: ScenarioConfig,
    geom: LakeGeometry,
    profile: DepthProfile,
    h: f64,
    omega0: Box<dyn Fn(Point) -> f64 + Send + Sync>,
    out_dir: PathBuf,
}

impl Scenario {
    fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            epsilon: self.config.scheme.epsilon,
            cfl: self.config.scheme.cfl,
            t_end: self.config.scheme.t_end,
            output_cadence: self.config.scheme.t_end / self.config.scheme.snapshots as f64,
        }
    }

    fn base(&self) -> ExperimentBase<&(dyn Fn(Point) -> f64 + Send + Sync)> {
        ExperimentBase {
            geom: self.geom.clone(),
            profile: self.profile.clone(),
            omega0: self.omega0.as_ref(),
            gamma: self.config.circulations.clone(),
            h: self.h,
            cfl: self.config.scheme.cfl,
            t_end: self.config.scheme.t_end,
            snapshots: self.config.scheme.snapshots,
            epsilon: self.config.scheme.epsilon,
        }
    }
}

fn with_scenario(
    common: &CommonArgs,
    f: impl FnOnce(&Scenario) -> Result<bool, Box<dyn std::error::Error>>,
) -> Result<bool, Box<dyn std::error::Error>> {
    let mut config = parse_config(&common.config)?;
    if let Some(h) = common.grid_h {
        config.grid.h = Some(h);
        config.grid.n = None;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.directory = out.display().to_string();
    }
    let outer = config.outer.build()?;
    let islands: Result<Vec<_>, _> = config.islands.iter().map(|s| s.build()).collect();
    let geom = LakeGeometry::new(outer, islands?)?;
    let h = config
        .grid
        .cell_size(geom.bounding_box.width())
        .ok_or("grid: give either h or n")?;
    let profile = config.depth.build(h);
    let omega0 = config.vorticity.build().map_err(|e| format!("vorticity: {e}"))?;
    let out_dir = PathBuf::from(&config.output.directory);
    std::fs::create_dir_all(&out_dir)?;
    let scenario = Scenario {
        geom,
        profile,
        h,
        omega0,
        out_dir,
        config,
    };
    // echo the resolved configuration next to the outputs
    std::fs::write(
        scenario.out_dir.join("resolved_config.toml"),
        lakes::config::emit_config(&scenario.config),
    )?;
    f(&scenario)
}

fn write(out_dir: &Path, name: &str, content: &str) -> std::io::Result<()> {
    std::fs::write(out_dir.join(name), content)
}

fn diagnostics_csv(records: &[DiagnosticsRecord], islands: usize) -> String {
    let mut s = DiagnosticsRecord::csv_header(islands);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn cmd_run(sc: &Scenario, corrupt: bool) -> Result<bool, Box<dyn std::error::Error>> {
    let grid = build_grid(&sc.geom, &sc.profile, sc.h)?;
    let basis = build_basis(&grid, &sc.geom)?;
    let omega0 = ScalarField::from_fn(&grid, &sc.omega0);
    let gamma = CirculationVector(sc.config.circulations.clone());
    let scheme = sc.scheme();
    let mut traj = run(&grid, &basis, &omega0, gamma, &scheme)?;

    if corrupt {
        // test hook: falsify the recorded mass of the final snapshot
        if let Some(last) = traj.diagnostics.last_mut() {
            last.mass += 1e-3 * last.mass.abs().max(1.0);
        }
    }

    for (k, snap) in traj.snapshots.iter().enumerate() {
        write(&sc.out_dir, &format!("omega_{k:04}.txt"), &dump_field(&snap.omega))?;
    }
    write(&sc.out_dir, "psi_final.txt", &dump_field(&traj.final_state.psi))?;
    write(
        &sc.out_dir,
        "diagnostics.csv",
        &diagnostics_csv(&traj.diagnostics, sc.geom.island_count()),
    )?;

    for r in &traj.diagnostics {
        println!(
            "t = {:.4}  mass = {:+.6e}  sup = {:.6e}  energy = {:.6e}",
            r.t, r.mass, r.sup_omega, r.energy_v
        );
    }

    // assertions: exact mass conservation for the inviscid scheme and
    // monotone sup norm always
    let mut ok = true;
    let d = &traj.diagnostics;
    if scheme.epsilon == 0.0 {
        let m0 = d.first().map_or(0.0, |r| r.mass);
        let drift = d
            .iter()
            .map(|r| (r.mass - m0).abs() / m0.abs().max(1.0))
            .fold(0.0, f64::max);
        if drift > 1e-10 {
            eprintln!("assertion failed: mass drift {drift:e} exceeds 1e-10");
            ok = false;
        }
    }
    if !d.windows(2).all(|w| w[1].sup_omega <= w[0].sup_omega * (1.0 + 1e-12)) {
        eprintln!("assertion failed: sup |omega| grew between snapshots");
        ok = false;
    }
    println!(
        "run finished: {} steps to t = {}, outputs in {}",
        traj.final_state.step_count,
        traj.final_state.t,
        sc.out_dir.display()
    );
    Ok(ok)
}

fn cmd_converge(sc: &Scenario) -> Result<bool, Box<dyn std::error::Error>> {
    let Some(ExperimentSpec::LakeSequence { parameters, rule }) = &sc.config.experiment else {
        return Err("converge needs [experiment] kind = \"lake_sequence\"".into());
    };
    let rule = match rule {
        SequenceRuleSpec::DepthShift => SequenceRule::DepthShift,
        SequenceRuleSpec::DomainErosion { delta0 } => SequenceRule::DomainErosion { delta0: *delta0 },
        SequenceRuleSpec::Constant => SequenceRule::Constant,
    };
    let table = lake_sequence_experiment(&sc.base(), &rule, parameters)?;
    write(&sc.out_dir, "lake_sequence.csv", &table.csv())?;
    print!("{}", table.csv());
    let errs = table.velocity_errors();
    let decreasing = strictly_decreasing(&errs);
    let drop = halved(&errs);
    let constant_rule = matches!(rule, SequenceRule::Constant);
    let ok = constant_rule || (decreasing && drop);
    println!(
        "verdict: errors {} and {}",
        if decreasing { "strictly decreasing" } else { "NOT decreasing" },
        if drop { "halved from first to last" } else { "NOT halved" },
    );
    Ok(ok)
}

fn cmd_nonsmooth(sc: &Scenario) -> Result<bool, Box<dyn std::error::Error>> {
    let rungs = match &sc.config.experiment {
        Some(ExperimentSpec::Nonsmooth { rungs }) => *rungs,
        _ => 3,
    };
    let report = nonsmooth_lake_experiment(&sc.base(), rungs)?;
    write(&sc.out_dir, "nonsmooth.csv", &report.csv())?;
    write(
        &sc.out_dir,
        "nonsmooth_solution_omega.txt",
        &dump_field(&report.solution.final_state.omega),
    )?;
    print!("{}", report.csv());
    let cauchy_ok = strictly_decreasing(&report.cauchy_differences);
    let invariants_ok = report
        .rungs
        .iter()
        .all(|r| r.mass_drift_rel <= 1e-10 && r.sup_monotone && r.lp_monotone);
    println!(
        "verdict: cauchy differences {}, invariant suite {}",
        if cauchy_ok { "decreasing" } else { "NOT decreasing" },
        if invariants_ok { "passed on every rung" } else { "FAILED on a rung" },
    );
    Ok(cauchy_ok && invariants_ok)
}

fn cmd_viscosity(sc: &Scenario) -> Result<bool, Box<dyn std::error::Error>> {
    let Some(ExperimentSpec::Viscosity { epsilons }) = &sc.config.experiment else {
        return Err("viscosity needs [experiment] kind = \"viscosity\"".into());
    };
    let sweep = viscosity_sweep(&sc.base(), epsilons)?;
    write(&sc.out_dir, "viscosity.csv", &sweep.csv())?;
    print!("{}", sweep.csv());
    let errs: Vec<f64> = sweep.rows.iter().map(|r| r.error_omega_l2).collect();
    let decreasing = strictly_decreasing(&errs);
    let ledger_ok = sweep.rows.iter().all(|r| r.ledger_margin >= -1e-8);
    let mass_ok = sweep.inviscid_mass_drift <= 1e-12;
    println!(
        "verdict: errors {}, ledger {}, inviscid mass drift {:e}",
        if decreasing { "decreasing" } else { "NOT decreasing" },
        if ledger_ok { "holds" } else { "VIOLATED" },
        sweep.inviscid_mass_drift,
    );
    Ok(decreasing && ledger_ok && mass_ok)
}

fn cmd_gamma(sc: &Scenario) -> Result<bool, Box<dyn std::error::Error>> {
    let (parameters, shrink0) = match &sc.config.experiment {
        Some(ExperimentSpec::Gamma { parameters, shrink0 }) => (parameters.clone(), *shrink0),
        _ => return Err("gamma needs [experiment] kind = \"gamma\"".into()),
    };
    let rec = gamma_probe_experiment(&sc.geom, shrink0, &parameters, sc.h)?;
    let mut csv = String::from("n,h1_distance\n");
    for (n, d) in parameters.iter().zip(&rec.distances) {
        csv.push_str(&format!("{n},{d}\n"));
    }
    write(&sc.out_dir, "gamma.csv", &csv)?;
    print!("{csv}");
    println!("limit center value: {}", rec.limit_center_value);
    let ok = strictly_decreasing(&rec.distances);
    println!(
        "verdict: H1 distances {}",
        if ok { "strictly decreasing" } else { "NOT decreasing" },
    );
    Ok(ok)
}

fn cmd_probe(sc: &Scenario, state_path: &Path) -> Result<bool, Box<dyn std::error::Error>> {
    let grid = build_grid(&sc.geom, &sc.profile, sc.h)?;
    let text = std::fs::read_to_string(state_path)?;
    let dump = parse_field_dump(&text)?;
    if dump.nx != grid.nx || dump.ny != grid.ny {
        return Err(format!(
            "state dump is {}x{} but the scenario grid is {}x{}",
            dump.nx, dump.ny, grid.nx, grid.ny
        )
        .into());
    }
    let mut omega = ScalarField {
        grid: grid.clone(),
        values: dump.values,
    };
    omega.clamp_to_mask();
    let basis = build_basis(&grid, &sc.geom)?;
    let gamma = CirculationVector(sc.config.circulations.clone());
    let state = lakes::transport::init_state(&grid, &basis, &omega, gamma)?;
    let record = conserved_quantities(&state, &grid, &basis.cutoffs)?;
    let smooth = geometry_is_analytic(&sc.geom);
    if !smooth {
        eprintln!("warning: polygonal boundary; the gradient growth table is informational only");
    }
    let cz = cz_probe(&grid, &basis, &omega, &state.gamma, smooth)?;

    let mut out = diagnostics_csv(&[record], sc.geom.island_count());
    out.push('\n');
    out.push_str("p,grad_norm,ratio\n");
    for row in &cz.rows {
        out.push_str(&format!("{},{},{}\n", row.p, row.grad_norm, row.ratio));
    }
    write(&sc.out_dir, "probe.csv", &out)?;
    print!("{out}");
    Ok(true)
}

fn geometry_is_analytic(geom: &LakeGeometry) -> bool {
    let analytic = |c: &lakes::geometry::Curve| {
        !matches!(c, lakes::geometry::Curve::Polygon(_))
    };
    analytic(&geom.outer) && geom.islands.iter().all(analytic)
}
