//! The quantum side of the constrained description: the commutator algebra
//! induced by the Dirac brackets, constraint and Hamiltonian operators over
//! a fixed six-symbol alphabet, the rank-deficient momentum representation,
//! and the reduction to the one-dimensional intrinsic Hamiltonian on the
//! physical subspace.
//!
//! Everything is coefficient-level: no Hilbert space is constructed. The
//! position-space representation appears only through its coefficient
//! matrix, whose rank-one structure encodes the operator identities that
//! hold on physical states.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::mechanics::{
    ball_system, dirac_bracket, reduce_modulo_span, BallParams, ConstrainedSystem,
};
use crate::phase_algebra::Poly;

/// The operator alphabet. The identity is handled separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum OpSymbol {
    X,
    Y,
    Theta,
    Px,
    Py,
    Ptheta,
}

pub const SYMBOLS: [OpSymbol; 6] = [
    OpSymbol::X,
    OpSymbol::Y,
    OpSymbol::Theta,
    OpSymbol::Px,
    OpSymbol::Py,
    OpSymbol::Ptheta,
];

impl OpSymbol {
    pub fn as_str(&self) -> &'static str {
        match self {
            OpSymbol::X => "x",
            OpSymbol::Y => "y",
            OpSymbol::Theta => "theta",
            OpSymbol::Px => "P_x",
            OpSymbol::Py => "P_y",
            OpSymbol::Ptheta => "P_theta",
        }
    }

    /// Phase-space variable name backing each symbol.
    fn var_name(&self) -> &'static str {
        self.as_str()
    }
}

/// A complex coefficient graded by powers of ħ: map from ħ-power to (re, im).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coeff {
    terms: BTreeMap<u32, (f64, f64)>,
}

impl Coeff {
    pub fn zero() -> Self {
        Coeff::default()
    }

    pub fn real(x: f64) -> Self {
        let mut c = Coeff::default();
        if x != 0.0 {
            c.terms.insert(0, (x, 0.0));
        }
        c
    }

    /// i·ħ·x.
    pub fn i_hbar(x: f64) -> Self {
        let mut c = Coeff::default();
        if x != 0.0 {
            c.terms.insert(1, (0.0, x));
        }
        c
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Coeff) -> Coeff {
        let mut out = self.clone();
        for (&p, &(re, im)) in &other.terms {
            let e = out.terms.entry(p).or_insert((0.0, 0.0));
            e.0 += re;
            e.1 += im;
        }
        out.prune();
        out
    }

    pub fn neg(&self) -> Coeff {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            v.0 = -v.0;
            v.1 = -v.1;
        }
        out
    }

    pub fn mul(&self, other: &Coeff) -> Coeff {
        let mut out = Coeff::default();
        for (&pa, &(ra, ia)) in &self.terms {
            for (&pb, &(rb, ib)) in &other.terms {
                let e = out.terms.entry(pa + pb).or_insert((0.0, 0.0));
                e.0 += ra * rb - ia * ib;
                e.1 += ra * ib + ia * rb;
            }
        }
        out.prune();
        out
    }

    pub fn scale(&self, s: f64) -> Coeff {
        self.mul(&Coeff::real(s))
    }

    /// (re, im) at the given ħ-power.
    pub fn at_power(&self, p: u32) -> (f64, f64) {
        self.terms.get(&p).copied().unwrap_or((0.0, 0.0))
    }

    /// Numeric complex value with ħ substituted.
    pub fn eval(&self, hbar: f64) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (&p, &(r, i)) in &self.terms {
            let w = hbar.powi(p as i32);
            re += r * w;
            im += i * w;
        }
        (re, im)
    }

    fn prune(&mut self) {
        self.terms
            .retain(|_, (re, im)| re.abs() > 1e-300 || im.abs() > 1e-300);
    }
}

/// ħ-graded linear/quadratic combination over the operator alphabet plus the
/// identity. Quadratic coefficients are real and keyed by the ordered symbol
/// pair; no products of conjugate symbols arise in this problem, so no
/// ordering prescription is needed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OperatorExpr {
    pub linear: BTreeMap<OpSymbol, Coeff>,
    pub quadratic: BTreeMap<(OpSymbol, OpSymbol), f64>,
    pub identity: Coeff,
}

impl OperatorExpr {
    pub fn zero() -> Self {
        OperatorExpr::default()
    }

    pub fn symbol(s: OpSymbol) -> Self {
        let mut e = OperatorExpr::default();
        e.linear.insert(s, Coeff::real(1.0));
        e
    }

    pub fn with_linear(mut self, s: OpSymbol, c: f64) -> Self {
        if c != 0.0 {
            let updated = self
                .linear
                .get(&s)
                .cloned()
                .unwrap_or_default()
                .add(&Coeff::real(c));
            self.linear.insert(s, updated);
        }
        self
    }

    pub fn with_quadratic(mut self, a: OpSymbol, b: OpSymbol, c: f64) -> Self {
        if c != 0.0 {
            let key = if a <= b { (a, b) } else { (b, a) };
            *self.quadratic.entry(key).or_insert(0.0) += c;
        }
        self
    }

    pub fn is_linear(&self) -> bool {
        self.quadratic.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.identity.is_zero()
            && self.linear.values().all(Coeff::is_zero)
            && self.quadratic.values().all(|&c| c == 0.0)
    }

    pub fn add(&self, other: &OperatorExpr) -> OperatorExpr {
        let mut out = self.clone();
        for (s, c) in &other.linear {
            let e = out.linear.entry(*s).or_default();
            *e = e.add(c);
        }
        for (k, c) in &other.quadratic {
            *out.quadratic.entry(*k).or_insert(0.0) += c;
        }
        out.identity = out.identity.add(&other.identity);
        out.cleanup();
        out
    }

    pub fn neg(&self) -> OperatorExpr {
        let mut out = self.clone();
        for c in out.linear.values_mut() {
            *c = c.neg();
        }
        for c in out.quadratic.values_mut() {
            *c = -*c;
        }
        out.identity = out.identity.neg();
        out
    }

    /// Replaces `target` with `factor ·replacement` in linear and quadratic
    /// parts. Used for the operator identities valid on physical states.
    pub fn substitute(&self, target: OpSymbol, factor: f64, replacement: OpSymbol) -> OperatorExpr {
        let mut out = OperatorExpr {
            identity: self.identity.clone(),
            ..OperatorExpr::default()
        };
        for (s, c) in &self.linear {
            let (sym, coeff) = if *s == target {
                (replacement, c.scale(factor))
            } else {
                (*s, c.clone())
            };
            let e = out.linear.entry(sym).or_default();
            *e = e.add(&coeff);
        }
        for (&(a, b), &c) in &self.quadratic {
            let (a2, fa) = if a == target {
                (replacement, factor)
            } else {
                (a, 1.0)
            };
            let (b2, fb) = if b == target {
                (replacement, factor)
            } else {
                (b, 1.0)
            };
            let key = if a2 <= b2 { (a2, b2) } else { (b2, a2) };
            *out.quadratic.entry(key).or_insert(0.0) += c * fa * fb;
        }
        out.cleanup();
        out
    }

    fn cleanup(&mut self) {
        self.linear.retain(|_, c| !c.is_zero());
        self.quadratic.retain(|_, c| c.abs() > 1e-300);
    }
}

/// Pairwise commutators of the alphabet: `[Â, B̂] = iħ·c·Î` with `c` the
/// Dirac-bracket constant, stored as plain reals in units of ħ.
#[derive(Debug, Clone)]
pub struct CommutatorTable {
    pub hbar: f64,
    entries: BTreeMap<(OpSymbol, OpSymbol), f64>,
}

impl CommutatorTable {
    /// Dirac-bracket constant {a, b}_D (antisymmetric in its arguments).
    pub fn dirac(&self, a: OpSymbol, b: OpSymbol) -> f64 {
        if a == b {
            0.0
        } else if a < b {
            self.entries.get(&(a, b)).copied().unwrap_or(0.0)
        } else {
            -self.entries.get(&(b, a)).copied().unwrap_or(0.0)
        }
    }

    /// Coefficient of Î in [Â, B̂], as an ħ-graded complex.
    pub fn commutator_value(&self, a: OpSymbol, b: OpSymbol) -> Coeff {
        Coeff::i_hbar(self.dirac(a, b))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(OpSymbol, OpSymbol), &f64)> {
        self.entries.iter()
    }
}

/// Builds the commutator table of a classified system by evaluating every
/// pairwise Dirac bracket of the six symbols. Each bracket must reduce to a
/// constant on the constraint surface.
pub fn build_commutator_table(system: &ConstrainedSystem, hbar: f64) -> Result<CommutatorTable> {
    let space = system.space();
    let span: Vec<&Poly> = system.constraints().iter().map(|c| &c.expr).collect();
    let polys: Vec<Poly> = SYMBOLS
        .iter()
        .map(|s| space.var(s.var_name()))
        .collect::<Result<_>>()?;
    let mut entries = BTreeMap::new();
    for i in 0..SYMBOLS.len() {
        for j in (i + 1)..SYMBOLS.len() {
            let bracket = dirac_bracket(&polys[i], &polys[j], system)?;
            let reduced = reduce_modulo_span(&bracket, &span);
            if !reduced.is_constant() {
                return Err(Error::UnsupportedQuantisation(format!(
                    "Dirac bracket of {} and {} is not constant on the constraint surface",
                    SYMBOLS[i].as_str(),
                    SYMBOLS[j].as_str()
                )));
            }
            let value = reduced.constant_part();
            if value != 0.0 {
                entries.insert((SYMBOLS[i], SYMBOLS[j]), value);
            }
        }
    }
    Ok(CommutatorTable { hbar, entries })
}

/// Bilinear commutator of two operator expressions using the table, with the
/// derivation rule `[Â, B̂Ĉ] = [Â, B̂]Ĉ + B̂[Â, Ĉ]`. At least one argument
/// must be linear; commutators of two quadratics are refused.
pub fn commutator(
    a: &OperatorExpr,
    b: &OperatorExpr,
    table: &CommutatorTable,
) -> Result<OperatorExpr> {
    match (a.is_linear(), b.is_linear()) {
        (false, false) => Err(Error::UnsupportedOrder(
            "commutator of two quadratic expressions".into(),
        )),
        (false, true) => Ok(commutator_linear_first(b, a, table).neg()),
        _ => Ok(commutator_linear_first(a, b, table)),
    }
}

fn commutator_linear_first(
    a: &OperatorExpr,
    b: &OperatorExpr,
    table: &CommutatorTable,
) -> OperatorExpr {
    let mut out = OperatorExpr::zero();
    for (&s, cs) in &a.linear {
        // [ŝ, linear part of b] lands on the identity
        for (&t, ct) in &b.linear {
            let val = table.commutator_value(s, t);
            if !val.is_zero() {
                out.identity = out.identity.add(&cs.mul(ct).mul(&val));
            }
        }
        // [ŝ, t̂û] = [ŝ, t̂]û + t̂[ŝ, û]
        for (&(t, u), &q) in &b.quadratic {
            let st = table.commutator_value(s, t);
            if !st.is_zero() {
                let add = cs.mul(&st).scale(q);
                let e = out.linear.entry(u).or_default();
                *e = e.add(&add);
            }
            let su = table.commutator_value(s, u);
            if !su.is_zero() {
                let add = cs.mul(&su).scale(q);
                let e = out.linear.entry(t).or_default();
                *e = e.add(&add);
            }
        }
    }
    out.cleanup();
    out
}

/// Lifts the second-class constraints of the system (the first-class pair
/// having been gauge-fixed away) to linear operator expressions, in label
/// order.
pub fn constraint_operators(system: &ConstrainedSystem) -> Result<Vec<OperatorExpr>> {
    let space = system.space();
    let mut out = Vec::new();
    for idx in system.second_class_indices() {
        let c = &system.constraints()[idx];
        let (coeffs, constant) = c.expr.linear_form().ok_or_else(|| {
            Error::Unsupported(format!(
                "constraint {} is nonlinear and cannot be lifted",
                c.label
            ))
        })?;
        let mut expr = OperatorExpr::zero();
        expr.identity = Coeff::real(constant);
        for (var, &coeff) in coeffs.iter().enumerate() {
            if coeff != 0.0 {
                let name = space.var_name(var);
                let sym = SYMBOLS.iter().find(|s| s.as_str() == name).ok_or_else(|| {
                    Error::Unsupported(format!(
                        "constraint {} involves `{name}`, outside the operator alphabet",
                        c.label
                    ))
                })?;
                expr = expr.with_linear(*sym, coeff);
            }
        }
        out.push(expr);
    }
    Ok(out)
}

/// The Hamiltonian operator of the constrained description,
/// `P̂x²/2m + P̂y²/2m + (a+3)P̂θ²/4mR² + m g ŷ`.
pub fn hamiltonian_operator(params: &BallParams) -> OperatorExpr {
    OperatorExpr::zero()
        .with_quadratic(OpSymbol::Px, OpSymbol::Px, 1.0 / (2.0 * params.m))
        .with_quadratic(OpSymbol::Py, OpSymbol::Py, 1.0 / (2.0 * params.m))
        .with_quadratic(
            OpSymbol::Ptheta,
            OpSymbol::Ptheta,
            (params.a + 3.0) / (4.0 * params.m * params.r * params.r),
        )
        .with_linear(OpSymbol::Y, params.m * params.g)
}

/// Coefficient matrix mapping (∂x, ∂y, ∂θ) to (P̂x, P̂y, P̂θ) in the
/// position representation, together with its numerical rank. Row `i` is
/// the Dirac-bracket row `{q_j, P_i}_D`; the matrix is rank one, which is
/// what forbids inverting the representation.
pub fn momentum_representation_matrix(params: &BallParams) -> Result<(Mat, usize)> {
    let system = ball_system(params)?;
    let space = system.space();
    let positions = [OpSymbol::X, OpSymbol::Y, OpSymbol::Theta];
    let momenta = [OpSymbol::Px, OpSymbol::Py, OpSymbol::Ptheta];
    let span: Vec<&Poly> = system.constraints().iter().map(|c| &c.expr).collect();
    let mut m = linalg::zeros(3, 3);
    for (i, p) in momenta.iter().enumerate() {
        for (j, q) in positions.iter().enumerate() {
            let b = dirac_bracket(
                &space.var(q.var_name())?,
                &space.var(p.var_name())?,
                &system,
            )?;
            let reduced = reduce_modulo_span(&b, &span);
            if !reduced.is_constant() {
                return Err(Error::UnsupportedQuantisation(
                    "momentum representation entry is not constant".into(),
                ));
            }
            m[i][j] = reduced.constant_part();
        }
    }
    let rank = linalg::rank(&m, 1e-10);
    Ok((m, rank))
}

/// The two proportionality factors of the rank-one momentum representation:
/// `P̂y = -tanφ P̂x` and `P̂θ = (2R secφ/(a+3)) P̂x`.
pub fn momentum_proportions(params: &BallParams) -> (f64, f64) {
    let py_factor = -params.phi.tan();
    let ptheta_factor = 2.0 * params.r / ((params.a + 3.0) * params.phi.cos());
    (py_factor, ptheta_factor)
}

/// Reduced coefficients of the Hamiltonian on the physical subspace, after
/// substituting the operator identities `P̂y = -tanφ P̂x`,
/// `P̂θ = (2R secφ/(a+3)) P̂x` and `ŷ = -tanφ x̂`: returns the coefficient
/// of P̂x² and of x̂.
pub fn physical_reduction(params: &BallParams, _hbar: f64) -> Result<(f64, f64)> {
    let h = hamiltonian_operator(params);
    let (py_f, pth_f) = momentum_proportions(params);
    let reduced = h
        .substitute(OpSymbol::Py, py_f, OpSymbol::Px)
        .substitute(OpSymbol::Ptheta, pth_f, OpSymbol::Px)
        .substitute(OpSymbol::Y, -params.phi.tan(), OpSymbol::X);
    let kinetic = reduced
        .quadratic
        .get(&(OpSymbol::Px, OpSymbol::Px))
        .copied()
        .unwrap_or(0.0);
    let potential = reduced
        .linear
        .get(&OpSymbol::X)
        .map(|c| c.at_power(0).0)
        .unwrap_or(0.0);
    Ok((kinetic, potential))
}

#[derive(Debug, Clone)]
pub struct EquivalenceCheck {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub pass: bool,
}

/// Report of the checks tying the constrained quantisation back to the
/// one-dimensional intrinsic one.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub checks: Vec<EquivalenceCheck>,
    pub all_pass: bool,
}

/// Verifies, coefficient by coefficient, that the reduced constrained
/// Hamiltonian matches the intrinsic one, and that the rescaled momentum
/// `P̂ = ((a+5)/(a+3)) sec²φ P̂x` is canonically conjugate to x̂.
pub fn intrinsic_equivalence_check(params: &BallParams, hbar: f64) -> Result<EquivalenceReport> {
    let tol = 1e-12;
    let sec2 = 1.0 / (params.phi.cos() * params.phi.cos());
    let lambda = (params.a + 5.0) / (params.a + 3.0) * sec2;
    let eff_mass = params.m * sec2 * (params.a + 5.0) / (params.a + 3.0);

    let system = ball_system(params)?;
    let table = build_commutator_table(&system, hbar)?;
    let (kinetic, potential) = physical_reduction(params, hbar)?;
    let (matrix, rank) = momentum_representation_matrix(params)?;
    let _ = matrix;

    let mut checks = Vec::new();
    let mut push = |name: &'static str, value: f64, expected: f64| {
        let pass = (value - expected).abs() <= tol * expected.abs().max(1.0);
        checks.push(EquivalenceCheck {
            name,
            value,
            expected,
            pass,
        });
    };

    // [x̂, P̂] = λ [x̂, P̂x] must be iħ.
    let x_p = lambda * hbar * table.dirac(OpSymbol::X, OpSymbol::Px);
    push("x_p_commutator", x_p, hbar);
    // Kinetic coefficient of P̂x² and its rewrite as 1/(2M) in terms of P̂.
    push(
        "kinetic_px2",
        kinetic,
        sec2 / (2.0 * params.m) * (params.a + 5.0) / (params.a + 3.0),
    );
    push(
        "kinetic_phat",
        kinetic / (lambda * lambda),
        1.0 / (2.0 * eff_mass),
    );
    // Linear coefficient of x̂ is minus the effective force.
    push(
        "potential_x",
        potential,
        -params.m * params.g * params.phi.tan(),
    );
    push("momentum_rank", rank as f64, 1.0);

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(EquivalenceReport { checks, all_pass })
}
