//! Ground truth: closed forms where they exist, and a certified
//! finite-difference solver for viscous Burgers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Jet2;
use crate::problems::{ProblemKind, ProblemSpec};

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("{0} has no closed-form solution; use the finite-difference reference")]
    NoClosedForm(String),
    #[error("explicit step unstable: dt = {dt:.3e} exceeds {limit:.3e}; use nt >= {min_nt}")]
    Unstable { dt: f64, limit: f64, min_nt: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("query ({x}, {t}) outside the grid")]
    OutOfGrid { x: f64, t: f64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed-form solution with all derivative channels.
pub fn exact_field(spec: &ProblemSpec, x: f64, t: f64) -> Result<Jet2<f64>, ReferenceError> {
    spec.exact(x, t).ok_or_else(|| ReferenceError::NoClosedForm(spec.name.clone()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub scheme: String,
    pub nu: f64,
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    pub dx: f64,
    /// `dt * max|u| / dx` at the start.
    pub cfl_convective: f64,
    /// `dt * nu / dx^2`.
    pub cfl_diffusive: f64,
}

/// Solution on a uniform space-time grid; `values[n][i]` is `u(x_i, t_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSolution {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub meta: GridMeta,
}

const SAFETY: f64 = 0.9;

/// Largest stable step for the explicit scheme on `nx` cells of [-1, 1].
pub fn burgers_dt_limit(nx: usize, nu: f64, u_max: f64) -> f64 {
    let dx = 2.0 / nx as f64;
    let diff = if nu > 0.0 { 0.5 * dx * dx / nu } else { f64::INFINITY };
    let conv = if u_max > 0.0 { dx / u_max } else { f64::INFINITY };
    SAFETY * diff.min(conv)
}

/// Smallest step count over `[0, t_end]` that passes the stability check,
/// rounded up to a multiple of `multiple`.
pub fn burgers_min_nt(nx: usize, nu: f64, t_end: f64, multiple: usize) -> usize {
    let n = (t_end / burgers_dt_limit(nx, nu, 1.0)).ceil() as usize;
    let m = multiple.max(1);
    n.div_ceil(m).max(1) * m
}

/// Viscous Burgers on [-1, 1] with `u0 = -sin(pi x)` and zero walls.
///
/// Conservative flux `u^2/2` with central differences, central diffusion,
/// classical RK4 in time. Nodes are `x_i = (2i - nx)/nx` so the grid is
/// exactly symmetric and the odd symmetry of the data survives rounding.
pub fn burgers_fd_solve(nx: usize, nt: usize, nu: f64, t_end: f64) -> Result<GridSolution, ReferenceError> {
    if nx < 4 || nx % 2 != 0 {
        return Err(ReferenceError::InvalidGrid(format!("nx must be even and >= 4, got {nx}")));
    }
    if nt == 0 || !(t_end > 0.0) || !(nu >= 0.0) {
        return Err(ReferenceError::InvalidGrid(format!("nt={nt}, t_end={t_end}, nu={nu}")));
    }
    let dx = 2.0 / nx as f64;
    let dt = t_end / nt as f64;
    let x: Vec<f64> = (0..=nx).map(|i| (2.0 * i as f64 - nx as f64) / nx as f64).collect();
    let mut u: Vec<f64> = x.iter().map(|&xi| -(std::f64::consts::PI * xi).sin()).collect();
    u[0] = 0.0;
    u[nx] = 0.0;
    let u_max = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = burgers_dt_limit(nx, nu, u_max);
    if dt > limit {
        return Err(ReferenceError::Unstable {
            dt,
            limit,
            min_nt: (t_end / limit).ceil() as usize,
        });
    }

    let rhs = |u: &[f64], out: &mut [f64]| {
        let (a, b) = (1.0 / (2.0 * dx), nu / (dx * dx));
        out[0] = 0.0;
        out[nx] = 0.0;
        for i in 1..nx {
            let flux = 0.5 * u[i + 1] * u[i + 1] - 0.5 * u[i - 1] * u[i - 1];
            out[i] = -a * flux + b * ((u[i - 1] + u[i + 1]) - 2.0 * u[i]);
        }
    };

    let mut values = Vec::with_capacity(nt + 1);
    values.push(u.clone());
    let n = nx + 1;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for _ in 0..nt {
        rhs(&u, &mut k1);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = u[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = u[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..n {
            u[i] += dt / 6.0 * ((k1[i] + 2.0 * k2[i]) + (2.0 * k3[i] + k4[i]));
        }
        values.push(u.clone());
    }
    let t = (0..=nt).map(|k| t_end * k as f64 / nt as f64).collect();
    Ok(GridSolution {
        x,
        t,
        values,
        meta: GridMeta {
            scheme: "central-conservative-flux+central-diffusion/rk4".into(),
            nu,
            nx,
            nt,
            dt,
            dx,
            cfl_convective: dt * u_max / dx,
            cfl_diffusive: dt * nu / (dx * dx),
        },
    })
}

fn bracket(grid: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    let (lo, hi) = (grid[0], grid[n - 1]);
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    if !(v >= lo - tol && v <= hi + tol) {
        return None;
    }
    let h = (hi - lo) / (n - 1) as f64;
    let s = ((v - lo) / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    Some((i, s - i as f64))
}

impl GridSolution {
    pub fn nx(&self) -> usize {
        self.x.len() - 1
    }

    pub fn nt(&self) -> usize {
        self.t.len() - 1
    }

    /// Bilinear interpolation in `(x, t)`.
    pub fn sample(&self, x: f64, t: f64) -> Result<f64, ReferenceError> {
        let (i, fx) = bracket(&self.x, x).ok_or(ReferenceError::OutOfGrid { x, t })?;
        let (n, ft) = bracket(&self.t, t).ok_or(ReferenceError::OutOfGrid { x, t })?;
        let lerp = |row: &[f64]| {
            if fx == 0.0 {
                row[i]
            } else {
                row[i] * (1.0 - fx) + row[i + 1] * fx
            }
        };
        let a = lerp(&self.values[n]);
        if ft == 0.0 {
            return Ok(a);
        }
        let b = lerp(&self.values[n + 1]);
        Ok(a * (1.0 - ft) + b * ft)
    }

    /// CSV: header row of x nodes (first cell `t`), then one row per step.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ReferenceError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.x.iter().map(|x| x.to_string()));
        out.write_record(&header)?;
        for (t, row) in self.t.iter().zip(&self.values) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `solution.csv` and `solution.json` (metadata) into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, report: Option<&RichardsonReport>) -> Result<(), ReferenceError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("solution.csv"))?))?;
        let sidecar = serde_json::json!({
            "meta": self.meta,
            "x_range": [self.x[0], self.x[self.nx()]],
            "t_range": [self.t[0], self.t[self.nt()]],
            "richardson": report,
        });
        std::fs::write(dir.join("solution.json"), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    pub grids: Vec<usize>,
    /// RMS difference between successive grids at shared nodes.
    pub errors: Vec<f64>,
    /// Max-norm difference between successive grids at shared nodes.
    pub errors_max: Vec<f64>,
    /// `log2(e_k / e_{k+1})`; `None` when undefined.
    pub orders: Vec<Option<f64>>,
    pub check_times: Vec<f64>,
    pub passed: bool,
    pub flag: Option<String>,
}

pub const ORDER_BAND: (f64, f64) = (1.7, 2.3);

/// Observed convergence order from solutions on nested grids.
///
/// Successive solutions are compared at the nodes of the coarsest grid and
/// at `check_times`; grids must double.
pub fn richardson_verify<F>(mut solver: F, grids: &[usize], check_times: &[f64]) -> Result<RichardsonReport, ReferenceError>
where
    F: FnMut(usize) -> Result<GridSolution, ReferenceError>,
{
    if grids.len() < 3 {
        return Err(ReferenceError::InvalidGrid("need at least three nested grids".into()));
    }
    if grids.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(ReferenceError::InvalidGrid(format!("grids must double: {grids:?}")));
    }
    let sols = grids.iter().map(|&n| solver(n)).collect::<Result<Vec<_>, _>>()?;
    let coarse_x = sols[0].x.clone();
    let mut errors = Vec::new();
    let mut errors_max = Vec::new();
    for pair in sols.windows(2) {
        let (mut ss, mut mx, mut cnt) = (0.0, 0.0f64, 0usize);
        for &t in check_times {
            for &x in &coarse_x {
                let d = pair[0].sample(x, t)? - pair[1].sample(x, t)?;
                ss += d * d;
                mx = mx.max(d.abs());
                cnt += 1;
            }
        }
        errors.push((ss / cnt as f64).sqrt());
        errors_max.push(mx);
    }
    let roundoff = 1e-13;
    let mut flag = None;
    let orders: Vec<Option<f64>> = errors
        .windows(2)
        .map(|e| (e[0] > roundoff && e[1] > roundoff).then(|| (e[0] / e[1]).log2()))
        .collect();
    if errors.iter().any(|&e| e <= roundoff) {
        flag = Some("differences at round-off level; order undefined".to_string());
    } else if errors.windows(2).any(|e| e[1] >= e[0]) {
        flag = Some("errors do not decrease; grids are not in the asymptotic regime".to_string());
    }
    let passed = flag.is_none()
        && orders
            .iter()
            .all(|o| matches!(o, Some(p) if (ORDER_BAND.0..=ORDER_BAND.1).contains(p)));
    Ok(RichardsonReport {
        grids: grids.to_vec(),
        errors,
        errors_max,
        orders,
        check_times: check_times.to_vec(),
        passed,
        flag,
    })
}

/// Certified Burgers reference: the finest of three nested grids, plus the
/// Richardson report that certifies it.
pub fn certified_burgers(nu: f64, t_end: f64, coarse_nx: usize) -> Result<(GridSolution, RichardsonReport), ReferenceError> {
    let grids = [coarse_nx, 2 * coarse_nx, 4 * coarse_nx];
    let checks: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|f| f * t_end).collect();
    let mut finest = None;
    let report = richardson_verify(
        |nx| {
            let s = burgers_fd_solve(nx, burgers_min_nt(nx, nu, t_end, 4), nu, t_end)?;
            if nx == grids[2] {
                finest = Some(s.clone());
            }
            Ok(s)
        },
        &grids,
        &checks,
    )?;
    Ok((finest.expect("finest grid solved"), report))
}

/// Reference values for a problem: closed form or certified grid.
#[derive(Clone, Debug)]
pub enum Reference {
    Analytic(ProblemSpec),
    Grid(Box<GridSolution>, RichardsonReport),
}

impl Reference {
    /// Builds the reference for `spec`; Burgers triggers the FD
    /// certification on grids 512/1024/2048.
    pub fn for_problem(spec: &ProblemSpec) -> Result<Self, ReferenceError> {
        match spec.kind {
            ProblemKind::Burgers { nu } => {
                let (g, r) = certified_burgers(nu, spec.domain.t_end, 512)?;
                Ok(Reference::Grid(Box::new(g), r))
            }
            _ => Ok(Reference::Analytic(spec.clone())),
        }
    }

    pub fn provenance(&self) -> &'static str {
        match self {
            Reference::Analytic(_) => "analytic",
            Reference::Grid(..) => "fd-certified",
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64, ReferenceError> {
        match self {
            Reference::Analytic(spec) => Ok(exact_field(spec, x, t)?.value),
            Reference::Grid(g, _) => g.sample(x, t),
        }
    }

    pub fn certification(&self) -> Option<&RichardsonReport> {
        match self {
            Reference::Grid(_, r) => Some(r),
            Reference::Analytic(_) => None,
        }
    }
}
