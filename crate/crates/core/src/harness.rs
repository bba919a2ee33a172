//! Convergence experiments: lake-sequence stability, non-smooth lake
//! construction by increasing smooth ladders, vanishing viscosity, and
//! the gamma-convergence probe.
//!
//! Every comparison zero-extends fields to the common bounding box and
//! reuses one grid resolution, so the tables measure solution distances
//! and not interpolation artifacts. Trend verdicts are expressed as
//! "last below half of first", which is robust at the 3-5 sequence
//! points a desk-scale study affords.

use std::fmt::Write as _;
use std::time::Instant;

use thiserror::Error;

use crate::biot_savart::{build_basis, BiotSavartError, CirculationVector};
use crate::diagnostics::DiagnosticsRecord;
use crate::elliptic::{gamma_probe, EllipticError, GammaProbeRecord};
use crate::geometry::{
    approximating_sequence, geometry_hausdorff, DepthProfile, GeometryError, LakeGeometry, Point,
};
use crate::grid::{build_grid, GridError, ScalarField};
use crate::transport::{run, SchemeConfig, Trajectory, TransportError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("experiment plan invalid: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    BiotSavart(#[from] BiotSavartError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// The base scenario every experiment perturbs: one lake, one initial
/// vorticity rule, fixed circulations, one grid resolution over the
/// shared box.
pub struct ExperimentBase<F: Fn(Point) -> f64> {
    pub geom: LakeGeometry,
    pub profile: DepthProfile,
    pub omega0: F,
    pub gamma: Vec<f64>,
    pub h: f64,
    pub cfl: f64,
    pub t_end: f64,
    /// Number of output intervals over `[0, t_end]`.
    pub snapshots: usize,
    pub epsilon: f64,
}

impl<F: Fn(Point) -> f64> ExperimentBase<F> {
    fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            epsilon: self.epsilon,
            cfl: self.cfl,
            t_end: self.t_end,
            output_cadence: self.t_end / self.snapshots as f64,
        }
    }

    fn run_lake(
        &self,
        geom: &LakeGeometry,
        profile: &DepthProfile,
        scheme: &SchemeConfig,
    ) -> Result<Trajectory, HarnessError> {
        let grid = build_grid(geom, profile, self.h)?;
        let basis = build_basis(&grid, geom)?;
        let omega0 = ScalarField::from_fn(&grid, &self.omega0);
        let gamma = CirculationVector(self.gamma.clone());
        Ok(run(&grid, &basis, &omega0, gamma, scheme)?)
    }
}

/// How the `n`-th member of a lake sequence is produced.
pub enum SequenceRule {
    /// Fixed domain, `b_n = b + 1/n`: the passage from vanishing to
    /// non-vanishing topography.
    DepthShift,
    /// Fixed bottom, domain offset inward (outer) and outward (islands)
    /// by `delta0 / n`.
    DomainErosion { delta0: f64 },
    /// The constant sequence, a self-comparison control.
    Constant,
}

impl SequenceRule {
    fn member(
        &self,
        geom: &LakeGeometry,
        profile: &DepthProfile,
        n: usize,
    ) -> Result<(LakeGeometry, DepthProfile), HarnessError> {
        match self {
            SequenceRule::DepthShift => {
                let mut p = profile.clone();
                p.floor += 1.0 / n as f64;
                Ok((geom.clone(), p))
            }
            SequenceRule::DomainErosion { delta0 } => {
                let d = delta0 / n as f64;
                let outer = geom.outer.offset(-d)?;
                let islands = geom
                    .islands
                    .iter()
                    .map(|c| c.offset(d))
                    .collect::<Result<Vec<_>, _>>()?;
                let g = LakeGeometry::with_bounding_box(outer, islands, geom.bounding_box)?;
                Ok((g, profile.clone()))
            }
            SequenceRule::Constant => Ok((geom.clone(), profile.clone())),
        }
    }
}

/// One row of a lake-sequence convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub parameter: f64,
    /// `|| sqrt(b_n) v_n - sqrt(b) v ||_{L^2((0,T) x D)}`
    pub error_velocity_l2: f64,
    /// `| int int phi (omega_n - omega) |` for the fixed probe
    pub error_omega_weak: f64,
    pub hausdorff: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn csv(&self) -> String {
        let mut s = String::from("parameter,error_velocity_l2,error_omega_weak,hausdorff,runtime_s\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.parameter, r.error_velocity_l2, r.error_omega_weak, r.hausdorff, r.runtime_s
            );
        }
        s
    }

    pub fn velocity_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error_velocity_l2).collect()
    }
}

/// Trend verdict used by every experiment: the last value must fall
/// below half of the first.
pub fn halved(values: &[f64]) -> bool {
    match (values.first(), values.last()) {
        (Some(a), Some(b)) => *b < *a / 2.0,
        _ => false,
    }
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn check_parameters(ns: &[usize]) -> Result<(), HarnessError> {
    if ns.len() < 3 {
        return Err(HarnessError::InvalidPlan(format!(
            "need at least 3 sequence points, got {}",
            ns.len()
        )));
    }
    if !ns.windows(2).all(|w| w[1] > w[0]) {
        return Err(HarnessError::InvalidPlan(
            "sequence parameters must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Space-time `L^2` distance of the depth-weighted velocities of two
/// trajectories over the shared box, by trapezoidal quadrature over the
/// common snapshot times.
pub fn velocity_l2_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.snapshots.len(), b.snapshots.len(), "snapshot counts differ");
    let mut sq = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        debug_assert!((sa.t - sb.t).abs() < 1e-9, "snapshot times diverged");
        let ga = &sa.v.grid;
        let gb = &sb.v.grid;
        let mut e2 = 0.0;
        for idx in 0..sa.v.x.len() {
            let va = weighted_face(sa.v.x[idx], ga.weight_x[idx]);
            let vb = weighted_face(sb.v.x[idx], gb.weight_x[idx]);
            e2 += (va - vb) * (va - vb);
        }
        for idx in 0..sa.v.y.len() {
            let va = weighted_face(sa.v.y[idx], ga.weight_y[idx]);
            let vb = weighted_face(sb.v.y[idx], gb.weight_y[idx]);
            e2 += (va - vb) * (va - vb);
        }
        sq.push(e2 * ga.h * ga.h);
    }
    trapezoid(a, &sq).sqrt()
}

#[inline]
fn weighted_face(v: f64, w: f64) -> f64 {
    if w > 0.0 {
        v / w.sqrt()
    } else {
        0.0
    }
}

/// `| int int phi (omega_a - omega_b) |` for a fixed smooth probe.
pub fn omega_weak_distance<F: Fn(Point) -> f64>(a: &Trajectory, b: &Trajectory, probe: F) -> f64 {
    let ga = &a.final_state.omega.grid;
    let mut phi = vec![0.0; ga.nx * ga.ny];
    for j in 0..ga.ny {
        for i in 0..ga.nx {
            phi[j * ga.nx + i] = probe(ga.cell_center(i, j));
        }
    }
    let mut vals = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let mut s = 0.0;
        for c in 0..phi.len() {
            s += phi[c] * (sa.omega.values[c] - sb.omega.values[c]);
        }
        vals.push(s * ga.h * ga.h);
    }
    trapezoid(a, &vals).abs()
}

fn trapezoid(traj: &Trajectory, values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..values.len() {
        let dt = traj.snapshots[k].t - traj.snapshots[k - 1].t;
        acc += 0.5 * dt * (values[k] + values[k - 1]);
    }
    acc
}

/// Run the sequence lakes and the reference lake to `t_end` on one grid
/// and tabulate the distances of each member to the reference.
pub fn lake_sequence_experiment<F: Fn(Point) -> f64>(
    base: &ExperimentBase<F>,
    rule: &SequenceRule,
    ns: &[usize],
) -> Result<ConvergenceTable, HarnessError> {
    check_parameters(ns)?;
    let scheme = base.scheme();
    let reference = base.run_lake(&base.geom, &base.profile, &scheme)?;
    let center = Point::new(
        0.5 * (base.geom.bounding_box.x0 + base.geom.bounding_box.x1),
        0.5 * (base.geom.bounding_box.y0 + base.geom.bounding_box.y1),
    );
    let width = base.geom.bounding_box.width().max(base.geom.bounding_box.height());
    let probe = |p: Point| {
        let r = p.dist(center) / (0.45 * width);
        if r < 1.0 {
            (1.0 - r * r).powi(3)
        } else {
            0.0
        }
    };
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let started = Instant::now();
        let (geom_n, profile_n) = rule.member(&base.geom, &base.profile, n)?;
        let traj_n = base.run_lake(&geom_n, &profile_n, &scheme)?;
        let hausdorff = match rule {
            SequenceRule::DomainErosion { .. } => {
                geometry_hausdorff(&geom_n, &base.geom, base.h / 2.0)?
            }
            _ => 0.0,
        };
        rows.push(ConvergenceRow {
            parameter: n as f64,
            error_velocity_l2: velocity_l2_distance(&traj_n, &reference),
            error_omega_weak: omega_weak_distance(&traj_n, &reference, probe),
            hausdorff,
            runtime_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(ConvergenceTable { rows })
}

/// Invariant verdicts of one rung of the non-smooth ladder.
#[derive(Debug, Clone)]
pub struct RungReport {
    pub n: usize,
    pub mass_drift_rel: f64,
    pub sup_monotone: bool,
    pub lp_monotone: bool,
    pub hausdorff_to_target: f64,
}

pub struct NonsmoothReport {
    pub rungs: Vec<RungReport>,
    /// `|| sqrt(b_n) v_n - sqrt(b_m) v_m ||` between consecutive rungs.
    pub cauchy_differences: Vec<f64>,
    /// The finest rung, declared the constructed weak solution.
    pub solution: Trajectory,
}

impl NonsmoothReport {
    pub fn csv(&self) -> String {
        let mut s = String::from("rung,hausdorff,mass_drift_rel,sup_monotone,lp_monotone,cauchy_to_next\n");
        for (k, r) in self.rungs.iter().enumerate() {
            let cauchy = if k + 1 < self.rungs.len() {
                format!("{}", self.cauchy_differences[k])
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.n, r.hausdorff_to_target, r.mass_drift_rel, r.sup_monotone, r.lp_monotone, cauchy
            );
        }
        s
    }
}

fn invariant_report(n: usize, traj: &Trajectory, hausdorff: f64) -> RungReport {
    let d = &traj.diagnostics;
    let mass0 = d.first().map_or(0.0, |r| r.mass);
    let mass_drift_rel = d
        .iter()
        .map(|r| (r.mass - mass0).abs() / mass0.abs().max(1e-300))
        .fold(0.0, f64::max);
    let tol = 1.0 + 1e-12;
    let sup_monotone = d.windows(2).all(|w| w[1].sup_omega <= w[0].sup_omega * tol);
    let lp_monotone = d.windows(2).all(|w| {
        (0..3).all(|i| w[1].lp_omega[i] <= w[0].lp_omega[i] * tol)
    });
    RungReport {
        n,
        mass_drift_rel,
        sup_monotone,
        lp_monotone,
        hausdorff_to_target: hausdorff,
    }
}

/// Build the increasing smooth ladder for a possibly non-smooth target
/// lake, run every rung, and report Cauchy differences between
/// consecutive rungs together with the conservation suite per rung.
pub fn nonsmooth_lake_experiment<F: Fn(Point) -> f64>(
    base: &ExperimentBase<F>,
    rungs: usize,
) -> Result<NonsmoothReport, HarnessError> {
    if rungs < 2 {
        return Err(HarnessError::InvalidPlan(format!(
            "ladder needs at least 2 rungs, got {rungs}"
        )));
    }
    let scheme = base.scheme();
    let mut reports = Vec::with_capacity(rungs);
    let mut trajectories: Vec<Trajectory> = Vec::with_capacity(rungs);
    for n in 1..=rungs {
        let (geom_n, profile_n) = approximating_sequence(&base.geom, &base.profile, n)?;
        let hausdorff = geometry_hausdorff(&geom_n, &base.geom, base.h / 2.0)?;
        let traj = base.run_lake(&geom_n, &profile_n, &scheme)?;
        reports.push(invariant_report(n, &traj, hausdorff));
        trajectories.push(traj);
    }
    let cauchy: Vec<f64> = trajectories
        .windows(2)
        .map(|w| velocity_l2_distance(&w[0], &w[1]))
        .collect();
    let solution = trajectories.pop().expect("at least two rungs");
    Ok(NonsmoothReport {
        rungs: reports,
        cauchy_differences: cauchy,
        solution,
    })
}

/// One viscosity level of the sweep.
#[derive(Debug, Clone, Copy)]
pub struct ViscosityRow {
    pub epsilon: f64,
    /// `|| omega_eps - omega_0 ||_{L^2((0,T) x Omega)}`
    pub error_omega_l2: f64,
    /// Slack of the energy ledger at its tightest snapshot:
    /// `initial - max_t (l2_sq + dissipation)`.
    pub ledger_margin: f64,
    pub runtime_s: f64,
}

pub struct ViscositySweep {
    pub rows: Vec<ViscosityRow>,
    /// Relative mass drift of the inviscid reference run.
    pub inviscid_mass_drift: f64,
}

impl ViscositySweep {
    pub fn csv(&self) -> String {
        let mut s = String::from("epsilon,error_omega_l2,ledger_margin,runtime_s\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.epsilon, r.error_omega_l2, r.ledger_margin, r.runtime_s);
        }
        s
    }
}

/// Run the viscous scheme for each `eps` and the inviscid limit run,
/// and tabulate the space-time distances to the limit.
pub fn viscosity_sweep<F: Fn(Point) -> f64>(
    base: &ExperimentBase<F>,
    epsilons: &[f64],
) -> Result<ViscositySweep, HarnessError> {
    if epsilons.len() < 2 {
        return Err(HarnessError::InvalidPlan(format!(
            "sweep needs at least 2 viscosities, got {}",
            epsilons.len()
        )));
    }
    if !epsilons.windows(2).all(|w| w[1] < w[0]) {
        return Err(HarnessError::InvalidPlan(
            "viscosities must be strictly decreasing".into(),
        ));
    }
    let mut scheme = base.scheme();
    scheme.epsilon = 0.0;
    let reference = base.run_lake(&base.geom, &base.profile, &scheme)?;
    let inviscid_mass_drift = invariant_report(0, &reference, 0.0).mass_drift_rel;
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let started = Instant::now();
        let mut s = base.scheme();
        s.epsilon = eps;
        let traj = base.run_lake(&base.geom, &base.profile, &s)?;
        let error_omega_l2 = omega_l2_distance(&traj, &reference);
        let initial = traj.final_state.initial_l2_sq;
        let ledger_margin = traj
            .energy_ledger
            .iter()
            .map(|e| initial - (e.l2_sq + e.dissipation))
            .fold(f64::INFINITY, f64::min);
        rows.push(ViscosityRow {
            epsilon: eps,
            error_omega_l2,
            ledger_margin,
            runtime_s: started.elapsed().as_secs_f64(),
        });
    }
    Ok(ViscositySweep {
        rows,
        inviscid_mass_drift,
    })
}

/// Space-time `L^2` distance of the vorticities of two runs on the same
/// grid.
pub fn omega_l2_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let g = &a.final_state.omega.grid;
    let mut vals = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let mut s = 0.0;
        for c in 0..sa.omega.values.len() {
            let d = sa.omega.values[c] - sb.omega.values[c];
            s += d * d;
        }
        vals.push(s * g.h * g.h);
    }
    trapezoid(a, &vals).sqrt()
}

/// Increasing-domain gamma probe: erode the lake by `shrink0 / n` for
/// each `n` and hand the sequence to the elliptic probe.
pub fn gamma_probe_experiment(
    geom: &LakeGeometry,
    shrink0: f64,
    ns: &[usize],
    h: f64,
) -> Result<GammaProbeRecord, HarnessError> {
    check_parameters(ns)?;
    let mut sequence = Vec::with_capacity(ns.len());
    for &n in ns {
        let d = shrink0 / n as f64;
        let outer = geom.outer.offset(-d)?;
        let islands = geom
            .islands
            .iter()
            .map(|c| c.offset(d))
            .collect::<Result<Vec<_>, _>>()?;
        sequence.push(LakeGeometry::with_bounding_box(
            outer,
            islands,
            geom.bounding_box,
        )?);
    }
    Ok(gamma_probe(&sequence, geom, |_| 1.0, h)?)
}

/// Textual summary shared by the CLI: one verdict line per experiment.
pub fn summarize_diagnostics(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "t = {:.4}  mass = {:+.6e}  sup = {:.6e}  energy = {:.6e}",
            r.t, r.mass, r.sup_omega, r.energy_v
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curve;

    fn small_disk_base() -> ExperimentBase<impl Fn(Point) -> f64> {
        let geom = LakeGeometry::new(
            Curve::Circle { center: Point::new(0.0, 0.0), radius: 1.0 },
            vec![],
        )
        .unwrap();
        ExperimentBase {
            geom,
            profile: DepthProfile::constant(1.0),
            omega0: |p: Point| {
                if p.dist(Point::new(0.35, 0.0)) < 0.3 { 1.0 } else { 0.0 }
            },
            gamma: vec![],
            h: 1.0 / 32.0,
            cfl: 0.4,
            t_end: 0.25,
            snapshots: 5,
            epsilon: 0.0,
        }
    }

    #[test]
    fn constant_sequence_compares_to_itself() {
        let base = small_disk_base();
        let table =
            lake_sequence_experiment(&base, &SequenceRule::Constant, &[2, 4, 8]).unwrap();
        for row in &table.rows {
            assert!(row.error_velocity_l2 < 1e-12, "self-comparison {}", row.error_velocity_l2);
            assert!(row.error_omega_weak < 1e-12);
            assert_eq!(row.hausdorff, 0.0);
        }
    }

    #[test]
    fn depth_shift_sequence_converges() {
        let base = small_disk_base();
        let table =
            lake_sequence_experiment(&base, &SequenceRule::DepthShift, &[2, 4, 8]).unwrap();
        let errs = table.velocity_errors();
        assert!(strictly_decreasing(&errs), "errors not decreasing: {errs:?}");
        assert!(halved(&errs), "no factor-2 drop: {errs:?}");
    }

    #[test]
    fn plan_validation() {
        let base = small_disk_base();
        assert!(matches!(
            lake_sequence_experiment(&base, &SequenceRule::Constant, &[2, 4]),
            Err(HarnessError::InvalidPlan(_))
        ));
        assert!(matches!(
            lake_sequence_experiment(&base, &SequenceRule::Constant, &[4, 2, 8]),
            Err(HarnessError::InvalidPlan(_))
        ));
        assert!(matches!(
            viscosity_sweep(&base, &[0.001, 0.01]),
            Err(HarnessError::InvalidPlan(_))
        ));
    }

    #[test]
    fn viscosity_sweep_converges_and_respects_ledger() {
        let base = small_disk_base();
        let sweep = viscosity_sweep(&base, &[0.02, 0.01, 0.005]).unwrap();
        let errs: Vec<f64> = sweep.rows.iter().map(|r| r.error_omega_l2).collect();
        assert!(strictly_decreasing(&errs), "sweep errors {errs:?}");
        for r in &sweep.rows {
            assert!(r.ledger_margin >= -1e-8 * 1.0, "ledger margin {}", r.ledger_margin);
        }
        assert!(sweep.inviscid_mass_drift <= 1e-12);
    }

    #[test]
    fn nonsmooth_ladder_on_square_lake() {
        let outer = Curve::polygon(vec![
            Point::new(-0.5, -0.5),
            Point::new(0.5, -0.5),
            Point::new(0.5, 0.5),
            Point::new(-0.5, 0.5),
        ])
        .unwrap();
        let island = Curve::Circle { center: Point::new(0.0, 0.0), radius: 0.1 };
        let geom = LakeGeometry::new(outer, vec![island]).unwrap();
        let h = 1.0 / 128.0;
        let base = ExperimentBase {
            geom,
            profile: DepthProfile::distance_power(1.0, 1.0).with_floor(h * h),
            omega0: |p: Point| {
                if p.dist(Point::new(0.25, 0.0)) < 0.12 { 1.0 } else { 0.0 }
            },
            gamma: vec![0.2],
            h,
            cfl: 0.4,
            t_end: 0.2,
            snapshots: 4,
            epsilon: 0.0,
        };
        let report = nonsmooth_lake_experiment(&base, 3).unwrap();
        assert_eq!(report.rungs.len(), 3);
        assert_eq!(report.cauchy_differences.len(), 2);
        assert!(
            report.cauchy_differences[1] < report.cauchy_differences[0],
            "cauchy differences {:?}",
            report.cauchy_differences
        );
        for rung in &report.rungs {
            assert!(rung.mass_drift_rel <= 1e-12, "rung {} drift {}", rung.n, rung.mass_drift_rel);
            assert!(rung.sup_monotone && rung.lp_monotone);
        }
        // rungs approach the target in the Hausdorff metric
        let hs: Vec<f64> = report.rungs.iter().map(|r| r.hausdorff_to_target).collect();
        assert!(strictly_decreasing(&hs), "hausdorff ladder {hs:?}");
    }

    #[test]
    fn gamma_probe_experiment_on_unit_disk() {
        let geom = LakeGeometry::new(
            Curve::Circle { center: Point::new(0.0, 0.0), radius: 1.0 },
            vec![],
        )
        .unwrap();
        let h = 1.0 / 48.0;
        let rec = gamma_probe_experiment(&geom, 1.0, &[2, 3, 4], h).unwrap();
        assert!(strictly_decreasing(&rec.distances), "{:?}", rec.distances);
        assert!((rec.limit_center_value + 0.25).abs() < 3.0 * h);
    }
}
