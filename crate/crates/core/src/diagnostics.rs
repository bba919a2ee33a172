//! Conserved-quantity ledgers and analytic-inequality probes: weighted
//! `L^p` norms of the vorticity, weak circulations, the shore Hardy
//! ratio, the Calderon-Zygmund growth table and weak-form residuals.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::biot_savart::{circulation, reconstruct_velocity, BiotSavartBasis, BiotSavartError, CirculationVector, CutoffFamily};
use crate::geometry::{LakeGeometry, Point};
use crate::grid::{dot_cells, grad, lp_norm, Grid, GridError, ScalarField};
use crate::transport::{SimState, Trajectory};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("strip width {r} below the resolvable minimum {min}")]
    StripTooThin { r: f64, min: f64 },
    #[error("test function support touches the boundary (nonzero within 2h)")]
    SupportTouchesBoundary,
    #[error("time window [{0}, {1}] covers fewer than two snapshots")]
    EmptyWindow(f64, f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    BiotSavart(#[from] BiotSavartError),
}

/// Snapshot of every conserved or bounded quantity the theory tracks.
#[derive(Debug, Clone)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// `int b omega`
    pub mass: f64,
    /// `|| b^(1/p) omega ||_p` for p = 1, 2, 4
    pub lp_omega: [f64; 3],
    pub sup_omega: f64,
    /// `|| sqrt(b) v ||_2`
    pub energy_v: f64,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl DiagnosticsRecord {
    pub fn csv_header(islands: usize) -> String {
        let mut s = String::from("t,mass,l1,l2,l4,linf,energy_v");
        for k in 1..=islands {
            let _ = write!(s, ",gamma_{k}");
        }
        for k in 1..=islands {
            let _ = write!(s, ",alpha_{k}");
        }
        s
    }

    pub fn csv_row(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{},{},{}",
            self.t,
            self.mass,
            self.lp_omega[0],
            self.lp_omega[1],
            self.lp_omega[2],
            self.sup_omega,
            self.energy_v
        );
        for g in &self.gamma {
            let _ = write!(s, ",{g}");
        }
        for a in &self.alpha {
            let _ = write!(s, ",{a}");
        }
        s
    }
}

/// Evaluate the record for a state: masses and norms by grid quadrature,
/// circulations through the weak cutoff formula with the transported
/// `b omega` as the curl.
pub fn conserved_quantities(
    state: &SimState,
    grid: &Arc<Grid>,
    cutoffs: &CutoffFamily,
) -> Result<DiagnosticsRecord, BiotSavartError> {
    let b_field = ScalarField {
        grid: grid.clone(),
        values: grid.b_reg.clone(),
    };
    let mut q = ScalarField::zeros(grid);
    for &c in grid.active_cells() {
        q.values[c] = grid.b_reg[c] * state.omega.values[c];
    }
    let mass = crate::grid::integrate(&q);
    let lp_omega = [
        lp_norm(&state.omega, 1.0, Some(&b_field))?,
        lp_norm(&state.omega, 2.0, Some(&b_field))?,
        lp_norm(&state.omega, 4.0, Some(&b_field))?,
    ];
    let sup_omega = lp_norm(&state.omega, f64::INFINITY, None)?;
    let energy_v = weighted_velocity_norm(grid, state);
    let mut gamma = Vec::with_capacity(cutoffs.island_count());
    for k in 0..cutoffs.island_count() {
        gamma.push(circulation(grid, cutoffs, &state.v, &q, k)?);
    }
    Ok(DiagnosticsRecord {
        t: state.t,
        mass,
        lp_omega,
        sup_omega,
        energy_v,
        gamma,
        alpha: state.alpha.clone(),
    })
}

/// `|| sqrt(b) v ||_2` by face quadrature (`b` on faces is the inverse
/// of the stored weight).
pub fn weighted_velocity_norm(grid: &Arc<Grid>, state: &SimState) -> f64 {
    let mut s = 0.0;
    for (v, w) in state.v.x.iter().zip(&grid.weight_x) {
        if *w > 0.0 {
            s += v * v / w;
        }
    }
    for (v, w) in state.v.y.iter().zip(&grid.weight_y) {
        if *w > 0.0 {
            s += v * v / w;
        }
    }
    (s * grid.h * grid.h).sqrt()
}

/// Hardy ratio over the shore strip of width `r`:
/// `||b^(-1/2) f/d||_L2(strip) / ||b^(-1/2) grad f||_L2(strip)`.
#[derive(Debug, Clone, Copy)]
pub struct HardyReport {
    pub ratio: f64,
    pub zero_denominator: bool,
}

pub fn hardy_ratio(
    grid: &Arc<Grid>,
    geom: &LakeGeometry,
    f: &ScalarField,
    r: f64,
) -> Result<HardyReport, DiagnosticsError> {
    if r < 4.0 * grid.h {
        return Err(DiagnosticsError::StripTooThin { r, min: 4.0 * grid.h });
    }
    let g = grid;
    let mut num = 0.0;
    for &c in g.active_cells() {
        let d = g.dist[c];
        if d <= r {
            let val = f.values[c] / d;
            num += val * val / g.b_reg[c];
        }
    }
    let gf = grad(f);
    let mut den = 0.0;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let w = g.weight_x[g.xface(i, j)];
            if w == 0.0 {
                continue;
            }
            let p = Point::new(g.origin.x + i as f64 * g.h, g.origin.y + (j as f64 + 0.5) * g.h);
            let d = geom.signed_distance(p);
            if d >= 0.0 && d <= r {
                let v = gf.x[g.xface(i, j)];
                den += w * v * v;
            }
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let w = g.weight_y[g.yface(i, j)];
            if w == 0.0 {
                continue;
            }
            let p = Point::new(g.origin.x + (i as f64 + 0.5) * g.h, g.origin.y + j as f64 * g.h);
            let d = geom.signed_distance(p);
            if d >= 0.0 && d <= r {
                let v = gf.y[g.yface(i, j)];
                den += w * v * v;
            }
        }
    }
    if den == 0.0 {
        return Ok(HardyReport {
            ratio: 0.0,
            zero_denominator: true,
        });
    }
    Ok(HardyReport {
        ratio: (num / den).sqrt(),
        zero_denominator: false,
    })
}

/// One row of the gradient-growth table.
#[derive(Debug, Clone, Copy)]
pub struct CzRow {
    pub p: f64,
    pub grad_norm: f64,
    /// `||grad v||_p / (p (||b omega||_p + ||b v||_2))`
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct CzReport {
    pub rows: Vec<CzRow>,
    /// False when the geometry has polygonal boundary pieces; the growth
    /// law is only backed by theory for smooth shores.
    pub smooth_geometry: bool,
}

/// Reconstruct the velocity of `(omega, gamma)` and tabulate the
/// interior `L^p` norms of its gradient against the growth envelope.
pub fn cz_probe(
    grid: &Arc<Grid>,
    basis: &BiotSavartBasis,
    omega: &ScalarField,
    gamma: &CirculationVector,
    smooth_geometry: bool,
) -> Result<CzReport, BiotSavartError> {
    let rec = reconstruct_velocity(grid, basis, omega, gamma)?;
    let g = grid;
    let h = g.h;

    // centered gradient of the face components at interior cells
    let mut grad_mag = Vec::new();
    for &c in g.active_cells() {
        let (i, j) = (c % g.nx, c / g.nx);
        if g.dist[c] < 3.0 * h {
            continue;
        }
        let ux = |i: usize, j: usize| rec.v.x[g.xface(i, j)];
        let uy = |i: usize, j: usize| rec.v.y[g.yface(i, j)];
        let du_dx = (ux(i + 1, j) - ux(i, j)) / h;
        let u_bar = |jj: usize| 0.5 * (ux(i, jj) + ux(i + 1, jj));
        let du_dy = (u_bar(j + 1) - u_bar(j - 1)) / (2.0 * h);
        let dv_dy = (uy(i, j + 1) - uy(i, j)) / h;
        let v_bar = |ii: usize| 0.5 * (uy(ii, j) + uy(ii, j + 1));
        let dv_dx = (v_bar(i + 1) - v_bar(i - 1)) / (2.0 * h);
        grad_mag.push(
            (du_dx * du_dx + du_dy * du_dy + dv_dx * dv_dx + dv_dy * dv_dy).sqrt(),
        );
    }

    let mut q = ScalarField::zeros(grid);
    for &c in g.active_cells() {
        q.values[c] = g.b_reg[c] * omega.values[c];
    }
    let bv_l2 = {
        let mut s = 0.0;
        for v in rec.mass_flux.x.iter().chain(rec.mass_flux.y.iter()) {
            s += v * v;
        }
        (s * h * h).sqrt()
    };

    let mut rows = Vec::new();
    for &p in &[5.0, 8.0, 16.0, 32.0] {
        let grad_norm = (grad_mag.iter().map(|m| m.powf(p)).sum::<f64>() * h * h).powf(1.0 / p);
        let q_norm = (q
            .values
            .iter()
            .map(|v| v.abs().powf(p))
            .sum::<f64>()
            * h
            * h)
            .powf(1.0 / p);
        let denom = p * (q_norm + bv_l2);
        let ratio = if denom > 0.0 { grad_norm / denom } else { 0.0 };
        rows.push(CzRow { p, grad_norm, ratio });
    }
    Ok(CzReport {
        rows,
        smooth_geometry,
    })
}

/// Separable space-time test function `phi(t, x) = g(t) f(x)`.
pub struct TestFunction {
    pub spatial: ScalarField,
    pub profile: TimeProfile,
}

#[derive(Debug, Clone)]
pub enum TimeProfile {
    Constant,
    /// Coefficients of `g(t) = c0 + c1 t + c2 t^2 + ...`
    Polynomial(Vec<f64>),
    /// `g(t) = cos(w t)`
    Cosine(f64),
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * t + ci),
            TimeProfile::Cosine(w) => (w * t).cos(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 0.0,
            TimeProfile::Polynomial(c) => {
                let mut acc = 0.0;
                for (k, ci) in c.iter().enumerate().skip(1) {
                    acc += k as f64 * ci * t.powi(k as i32 - 1);
                }
                acc
            }
            TimeProfile::Cosine(w) => -w * (w * t).sin(),
        }
    }
}

/// Signed weak-form residual of a trajectory against a test function over
/// a time window, by trapezoidal quadrature over the stored snapshots.
///
/// The final-time boundary term is included, so the residual measures
/// the transport identity on the window even for test functions that do
/// not die out before the window ends.
pub fn weak_residual(
    trajectory: &Trajectory,
    grid: &Arc<Grid>,
    test: &TestFunction,
    window: (f64, f64),
) -> Result<f64, DiagnosticsError> {
    for &c in grid.active_cells() {
        if grid.dist[c] < 2.0 * grid.h && test.spatial.values[c] != 0.0 {
            return Err(DiagnosticsError::SupportTouchesBoundary);
        }
    }
    let (a, b) = window;
    let snaps: Vec<&crate::transport::Snapshot> = trajectory
        .snapshots
        .iter()
        .filter(|s| s.t >= a - 1e-12 && s.t <= b + 1e-12)
        .collect();
    if snaps.len() < 2 {
        return Err(DiagnosticsError::EmptyWindow(a, b));
    }
    let gphi = grad(&test.spatial);
    let g = grid;
    let integrand = |snap: &crate::transport::Snapshot| -> Result<(f64, f64), GridError> {
        let mut q = ScalarField::zeros(grid);
        for &c in g.active_cells() {
            q.values[c] = g.b_reg[c] * snap.omega.values[c];
        }
        let phi_mass = dot_cells(&test.spatial, &q)?;
        // transport term with the exactly divergence-free mass flux and
        // arithmetic face averages of omega
        let mut tr = 0.0;
        for j in 0..g.ny {
            for i in 1..g.nx {
                let f = g.xface(i, j);
                let flux = snap.mass_flux.x[f];
                if flux != 0.0 {
                    let om = 0.5 * (snap.omega.values[g.idx(i - 1, j)] + snap.omega.values[g.idx(i, j)]);
                    tr += gphi.x[f] * flux * om;
                }
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let f = g.yface(i, j);
                let flux = snap.mass_flux.y[f];
                if flux != 0.0 {
                    let om = 0.5 * (snap.omega.values[g.idx(i, j - 1)] + snap.omega.values[g.idx(i, j)]);
                    tr += gphi.y[f] * flux * om;
                }
            }
        }
        Ok((phi_mass, tr * g.h * g.h))
    };

    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut first_mass = 0.0;
    let mut last_mass = 0.0;
    for (k, snap) in snaps.iter().enumerate() {
        let (phi_mass, transport) = integrand(snap)?;
        let val = test.profile.deriv(snap.t) * phi_mass + test.profile.eval(snap.t) * transport;
        if k == 0 {
            first_mass = test.profile.eval(snap.t) * phi_mass;
        }
        if k == snaps.len() - 1 {
            last_mass = test.profile.eval(snap.t) * phi_mass;
        }
        if let Some((t_prev, val_prev)) = prev {
            total += 0.5 * (snap.t - t_prev) * (val + val_prev);
        }
        prev = Some((snap.t, val));
    }
    Ok(total + first_mass - last_mass)
}
