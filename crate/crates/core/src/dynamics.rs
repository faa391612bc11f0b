//! Equations of motion generated by Dirac brackets, fixed-step trajectory
//! integration with constraint-drift monitoring, and the closed-form
//! acceleration of the rolling ball for cross-checks.

use crate::error::{Error, Result};
use crate::mechanics::{dirac_bracket, BallParams, ConstrainedSystem};
use crate::phase_algebra::{PhasePoint, Poly};

/// Tolerance on the constraint residuals of an initial point.
pub const SURFACE_TOL: f64 = 1e-9;

/// A time-ordered list of phase points with the worst constraint residual
/// seen per constraint.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    /// Max |Φ_l| along the trajectory, by constraint label order.
    pub drift: Vec<f64>,
}

/// The Dirac-bracket flow: one rate polynomial per phase variable.
#[derive(Debug, Clone)]
pub struct EomField {
    rates: Vec<Poly>,
}

impl EomField {
    pub fn rate(&self, var_idx: usize) -> &Poly {
        &self.rates[var_idx]
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let pt = PhasePoint::new(state.to_vec());
        self.rates.iter().map(|r| r.eval(&pt)).collect()
    }
}

/// Builds the flow `v̇ = {v, H}_D` for every phase variable. Requires a
/// classified system with its multipliers solved.
pub fn eom_vector_field(system: &ConstrainedSystem) -> Result<EomField> {
    if !system.is_classified() {
        return Err(Error::IncompleteSystem(
            "constraints are not classified".into(),
        ));
    }
    if system.multipliers().is_none() {
        return Err(Error::IncompleteSystem(
            "second-class multipliers are not solved".into(),
        ));
    }
    let space = system.space();
    let h = system.hamiltonian();
    let rates = (0..space.num_vars())
        .map(|idx| {
            let v = Poly::var(space.num_vars(), idx);
            dirac_bracket(&v, h, system)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EomField { rates })
}

/// Classical fixed-step fourth-order Runge-Kutta trajectory from `pt0`,
/// which must lie on the constraint surface. Drift is monitored, never
/// projected away; see [`integrate_projected`] for the opt-in hook.
pub fn integrate(
    system: &ConstrainedSystem,
    pt0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_impl(system, pt0, t_end, dt, false)
}

/// Same stepper, but after every step the state is orthogonally projected
/// back onto the (linear) constraint surface. Off by default since the raw
/// drift is itself a useful health signal.
pub fn integrate_projected(
    system: &ConstrainedSystem,
    pt0: &PhasePoint,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_impl(system, pt0, t_end, dt, true)
}

fn integrate_impl(
    system: &ConstrainedSystem,
    pt0: &PhasePoint,
    t_end: f64,
    dt: f64,
    project: bool,
) -> Result<Trajectory> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "t_end must be a nonnegative real, got {t_end}"
        )));
    }
    if t_end > 0.0 && (!(dt > 0.0) || !dt.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "dt must be a positive real, got {dt}"
        )));
    }
    for c in system.constraints() {
        let value = c.expr.eval(pt0)?.abs();
        if value > SURFACE_TOL {
            return Err(Error::OffSurface {
                label: c.label,
                value,
            });
        }
    }

    // Orthogonal projector onto the constraint surface, built once.
    let projector = if project {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(system.constraints().len());
        let mut consts = Vec::with_capacity(system.constraints().len());
        for c in system.constraints() {
            let (coeffs, k) = c.expr.linear_form().ok_or_else(|| {
                Error::Unsupported("drift projection requires linear constraints".into())
            })?;
            rows.push(coeffs);
            consts.push(k);
        }
        let gram: Vec<Vec<f64>> = rows
            .iter()
            .map(|a| rows.iter().map(|b| crate::linalg::dot(a, b)).collect())
            .collect();
        let gram_inv = crate::linalg::invert(&gram, 1e-10).ok_or_else(|| {
            Error::DegenerateConstraint("dependent constraints in drift projection".into())
        })?;
        Some((rows, consts, gram_inv))
    } else {
        None
    };
    let apply_projection = |y: &mut [f64]| {
        if let Some((rows, consts, gram_inv)) = &projector {
            let residuals: Vec<f64> = rows
                .iter()
                .zip(consts)
                .map(|(row, k)| crate::linalg::dot(row, y) + k)
                .collect();
            let weights = crate::linalg::mat_vec(gram_inv, &residuals);
            for (w, row) in weights.iter().zip(rows) {
                for (yj, rj) in y.iter_mut().zip(row) {
                    *yj -= w * rj;
                }
            }
        }
    };

    let field = eom_vector_field(system)?;
    let nvars = system.space().num_vars();
    let mut times = vec![0.0];
    let mut states = vec![pt0.clone()];
    let mut drift = vec![0.0; system.constraints().len()];
    let record_drift = |drift: &mut [f64], pt: &PhasePoint| -> Result<()> {
        for (d, c) in drift.iter_mut().zip(system.constraints()) {
            *d = d.max(c.expr.eval(pt)?.abs());
        }
        Ok(())
    };
    record_drift(&mut drift, pt0)?;

    let mut y = pt0.values.clone();
    let mut t = 0.0;
    // Index-based step targets so rounding never creates a sliver step; the
    // final step lands exactly on t_end.
    let steps = if t_end > 0.0 {
        ((t_end / dt) - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    for i in 1..=steps {
        let target = if i == steps { t_end } else { i as f64 * dt };
        let h = target - t;
        let k1 = field.eval(&y)?;
        let k2 = field.eval(&offset(&y, &k1, h / 2.0))?;
        let k3 = field.eval(&offset(&y, &k2, h / 2.0))?;
        let k4 = field.eval(&offset(&y, &k3, h))?;
        for v in 0..nvars {
            y[v] += h / 6.0 * (k1[v] + 2.0 * k2[v] + 2.0 * k3[v] + k4[v]);
        }
        apply_projection(&mut y);
        t = target;
        let pt = PhasePoint::new(y.clone());
        record_drift(&mut drift, &pt)?;
        times.push(t);
        states.push(pt);
    }

    Ok(Trajectory {
        times,
        states,
        drift,
    })
}

fn offset(y: &[f64], k: &[f64], h: f64) -> Vec<f64> {
    y.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

/// Closed-form downhill acceleration of the rolling ball,
/// `g (a+3)/(a+5) sin(2φ)/2`.
pub fn intrinsic_acceleration(params: &BallParams) -> f64 {
    params.g * (params.a + 3.0) / (params.a + 5.0) * (2.0 * params.phi).sin() / 2.0
}
