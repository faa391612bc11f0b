//! Bound-state spectra of the two regularised linear-potential problems the
//! rolling ball reduces to: a linear ramp cut off by an infinite wall at the
//! origin, and the symmetric wedge `f |x|`. Energies come from the negative
//! zeros of Ai (wall and odd wedge levels) and of Ai' (even wedge levels);
//! normalisation constants come from the closed form of the Ai² tail
//! integral.

use crate::airy::{ai_prime_zero, ai_squared_tail, ai_zero, airy_eval};
use crate::error::{Error, Result};
use crate::mechanics::BallParams;

/// Effective one-dimensional parameters: mass `M = m sec²φ (a+5)/(a+3)`,
/// force `f = m g tanφ`, and the action constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntrinsicParams {
    pub mass: f64,
    pub force: f64,
    pub hbar: f64,
}

impl IntrinsicParams {
    pub fn new(mass: f64, force: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && force > 0.0 && hbar > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "intrinsic parameters must be positive, got M={mass}, f={force}, hbar={hbar}"
            )));
        }
        Ok(IntrinsicParams { mass, force, hbar })
    }

    /// Parameters with both characteristic scales equal to one, so energies
    /// are plain root moduli.
    pub fn unit_scale() -> Self {
        IntrinsicParams {
            mass: 0.5,
            force: 1.0,
            hbar: 1.0,
        }
    }

    /// Energy scale ε = (ħ² f² / 2M)^(1/3).
    pub fn energy_scale(&self) -> f64 {
        (self.hbar * self.hbar * self.force * self.force / (2.0 * self.mass)).cbrt()
    }

    /// Length scale ℓ = (ħ² / 2Mf)^(1/3).
    pub fn length_scale(&self) -> f64 {
        (self.hbar * self.hbar / (2.0 * self.mass * self.force)).cbrt()
    }
}

/// Effective parameters of the ball on the incline. Fails on a flat incline,
/// where the potential loses its slope and the spectrum is continuous.
pub fn intrinsic_params(ball: &BallParams, hbar: f64) -> Result<IntrinsicParams> {
    if ball.phi == 0.0 {
        return Err(Error::ZeroForce);
    }
    let sec = 1.0 / ball.phi.cos();
    let mass = ball.m * sec * sec * (ball.a + 5.0) / (ball.a + 3.0);
    let force = ball.m * ball.g * ball.phi.tan();
    if force <= 0.0 {
        return Err(Error::ZeroForce);
    }
    IntrinsicParams::new(mass, force, hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// Wall problem: supported on x < 0 only.
    Wall,
    Odd,
    Even,
}

impl Parity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parity::Wall => "wall",
            Parity::Odd => "odd",
            Parity::Even => "even",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootFamily {
    Ai,
    AiPrime,
}

impl RootFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootFamily::Ai => "ai",
            RootFamily::AiPrime => "ai_prime",
        }
    }
}

/// One bound state: ascending-energy rank, energy, parity, which Airy-zero
/// family and index produced it, and the squared normalisation constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenpair {
    pub rank: usize,
    pub energy: f64,
    pub parity: Parity,
    pub root_family: RootFamily,
    pub root_index: usize,
    /// |C|² of the Airy amplitude in the eigenstate formula.
    pub norm_sq: f64,
}

impl Eigenpair {
    /// Interleaved family label: odd levels sit at 2n-1, even levels at 2n.
    /// Wall levels are just n. Note the 2n-1/2n numbering is not ascending
    /// in energy (the first even level lies below the first odd one).
    pub fn family_label(&self) -> usize {
        match self.parity {
            Parity::Wall => self.root_index,
            Parity::Odd => 2 * self.root_index - 1,
            Parity::Even => 2 * self.root_index,
        }
    }
}

/// Levels of the walled ramp: E_n = ε |a_n| with a_n the n-th zero of Ai,
/// and |C_n|² = (2Mf/ħ²)^(1/3) / Ai'(a_n)².
pub fn wall_spectrum(params: &IntrinsicParams, n_max: usize) -> Result<Vec<Eigenpair>> {
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    let eps = params.energy_scale();
    let inv_len = 1.0 / params.length_scale();
    (1..=n_max)
        .map(|n| {
            let root = ai_zero(n)?;
            let slope = airy_eval(root)?.ai_prime;
            Ok(Eigenpair {
                rank: n,
                energy: eps * root.abs(),
                parity: Parity::Wall,
                root_family: RootFamily::Ai,
                root_index: n,
                norm_sq: inv_len / (slope * slope),
            })
        })
        .collect()
}

/// Levels of the symmetric wedge, ascending in energy: even levels from the
/// zeros of Ai' (the ground state first), odd levels from the zeros of Ai.
/// |C|² follows from the Ai² tail integral over either half line.
pub fn wedge_spectrum(params: &IntrinsicParams, n_max: usize) -> Result<Vec<Eigenpair>> {
    if n_max == 0 {
        return Err(Error::InvalidConfig("n_max must be at least 1".into()));
    }
    let eps = params.energy_scale();
    let inv_len = 1.0 / params.length_scale();
    let mut levels = Vec::with_capacity(2 * n_max);
    for n in 1..=n_max {
        let root = ai_zero(n)?;
        levels.push(Eigenpair {
            rank: 0,
            energy: eps * root.abs(),
            parity: Parity::Odd,
            root_family: RootFamily::Ai,
            root_index: n,
            norm_sq: inv_len / (2.0 * ai_squared_tail(root)?),
        });
        let root = ai_prime_zero(n)?;
        levels.push(Eigenpair {
            rank: 0,
            energy: eps * root.abs(),
            parity: Parity::Even,
            root_family: RootFamily::AiPrime,
            root_index: n,
            norm_sq: inv_len / (2.0 * ai_squared_tail(root)?),
        });
    }
    levels.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    levels.truncate(n_max);
    for (i, level) in levels.iter_mut().enumerate() {
        level.rank = i + 1;
    }
    Ok(levels)
}

fn check_pair(pair: &Eigenpair, params: &IntrinsicParams) -> Result<()> {
    let root = match pair.root_family {
        RootFamily::Ai => ai_zero(pair.root_index)?,
        RootFamily::AiPrime => ai_prime_zero(pair.root_index)?,
    };
    let expected = params.energy_scale() * root.abs();
    if (pair.energy - expected).abs() > 1e-9 * expected.max(1.0) {
        return Err(Error::ParamsMismatch(
            "eigenpair was produced with different intrinsic parameters".into(),
        ));
    }
    Ok(())
}

/// Value of the eigenstate at `x`. Wall states vanish identically on x ≥ 0;
/// wedge states are built from the two mirror Airy branches, with x = 0
/// assigned to the right branch.
pub fn eigenstate_eval(pair: &Eigenpair, params: &IntrinsicParams, x: f64) -> Result<f64> {
    check_pair(pair, params)?;
    let eps = params.energy_scale();
    let amp = pair.norm_sq.sqrt();
    match pair.parity {
        Parity::Wall => {
            if x >= 0.0 {
                Ok(0.0)
            } else {
                let arg = -(params.force * x + pair.energy) / eps;
                Ok(amp * airy_eval(arg)?.ai)
            }
        }
        Parity::Even | Parity::Odd => {
            let arg = (params.force * x.abs() - pair.energy) / eps;
            let base = amp * airy_eval(arg)?.ai;
            if pair.parity == Parity::Even {
                Ok(base)
            } else if x >= 0.0 {
                Ok(-base)
            } else {
                Ok(base)
            }
        }
    }
}

/// |Ψ(x)|².
pub fn probability_density(pair: &Eigenpair, params: &IntrinsicParams, x: f64) -> Result<f64> {
    let psi = eigenstate_eval(pair, params, x)?;
    Ok(psi * psi)
}

/// Time factor of a stationary state, `e^(-i E (t - t0)/ħ)`, as (re, im).
/// Unit modulus by construction, so densities never depend on time; the
/// overall amplitude freedom is fixed to one and absorbed into the
/// normalisation constants.
pub fn stationary_phase(energy: f64, t: f64, t0: f64, hbar: f64) -> (f64, f64) {
    let arg = -energy * (t - t0) / hbar;
    (arg.cos(), arg.sin())
}
