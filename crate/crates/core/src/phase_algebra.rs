//! Sparse multivariate polynomial algebra over a declared set of canonical
//! pairs, with Poisson brackets, partial derivatives and evaluation.
//!
//! A [`PhaseSpace`] fixes an ordered list of (position, momentum) name pairs;
//! a [`Poly`] is a sparse real-coefficient polynomial over those 2n variables.
//! All operations are pure and the values are immutable after construction,
//! so everything here is safe to share across threads.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Threshold factor for pruning near-zero coefficients after arithmetic.
pub const COEFF_EPS: f64 = 1e-12;

/// Which half of a canonical pair a variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Position,
    Momentum,
}

/// An ordered set of canonical pairs. Variable indices are laid out as
/// positions `0..n` followed by momenta `n..2n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSpace {
    positions: Vec<String>,
    momenta: Vec<String>,
}

impl PhaseSpace {
    /// Builds a phase space from (position, momentum) name pairs.
    /// Names must be unique across both lists.
    pub fn new<S: Into<String> + Clone>(pairs: &[(S, S)]) -> Result<Self> {
        let positions: Vec<String> = pairs.iter().map(|(q, _)| q.clone().into()).collect();
        let momenta: Vec<String> = pairs.iter().map(|(_, p)| p.clone().into()).collect();
        let mut seen = std::collections::BTreeSet::new();
        for name in positions.iter().chain(momenta.iter()) {
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate variable name `{name}`"
                )));
            }
        }
        Ok(PhaseSpace { positions, momenta })
    }

    /// Number of canonical pairs.
    pub fn dim(&self) -> usize {
        self.positions.len()
    }

    /// Total number of variables (2n).
    pub fn num_vars(&self) -> usize {
        2 * self.positions.len()
    }

    pub fn position_name(&self, i: usize) -> &str {
        &self.positions[i]
    }

    pub fn momentum_name(&self, i: usize) -> &str {
        &self.momenta[i]
    }

    /// Flat variable name by index (positions first, then momenta).
    pub fn var_name(&self, idx: usize) -> &str {
        let n = self.dim();
        if idx < n {
            &self.positions[idx]
        } else {
            &self.momenta[idx - n]
        }
    }

    /// Flat index and kind of a named variable.
    pub fn var_index(&self, name: &str) -> Result<(usize, VarKind)> {
        if let Some(i) = self.positions.iter().position(|s| s == name) {
            return Ok((i, VarKind::Position));
        }
        if let Some(i) = self.momenta.iter().position(|s| s == name) {
            return Ok((self.dim() + i, VarKind::Momentum));
        }
        Err(Error::UnknownVariable(name.to_string()))
    }

    /// Degree-one polynomial for a named variable.
    pub fn var(&self, name: &str) -> Result<Poly> {
        let (idx, _) = self.var_index(name)?;
        Ok(Poly::var(self.num_vars(), idx))
    }

    /// Degree-one polynomial for the i-th position.
    pub fn position(&self, i: usize) -> Poly {
        Poly::var(self.num_vars(), i)
    }

    /// Degree-one polynomial for the i-th momentum.
    pub fn momentum(&self, i: usize) -> Poly {
        Poly::var(self.num_vars(), self.dim() + i)
    }

    pub fn constant(&self, c: f64) -> Poly {
        Poly::constant(self.num_vars(), c)
    }

    pub fn zero(&self) -> Poly {
        Poly::zero(self.num_vars())
    }

    fn check(&self, p: &Poly) -> Result<()> {
        if p.num_vars != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "polynomial over {} variables used with a {}-pair phase space",
                p.num_vars,
                self.dim()
            )));
        }
        Ok(())
    }
}

/// A point of phase space, indexed like the flat variable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub values: Vec<f64>,
}

impl PhasePoint {
    pub fn new(values: Vec<f64>) -> Self {
        PhasePoint { values }
    }

    pub fn origin(space: &PhaseSpace) -> Self {
        PhasePoint {
            values: vec![0.0; space.num_vars()],
        }
    }
}

/// Sparse multivariate polynomial with real coefficients. Terms are keyed by
/// a dense exponent vector of length 2n; the map ordering makes iteration,
/// printing and arithmetic deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(num_vars: usize) -> Self {
        Poly {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, c: f64) -> Self {
        let mut p = Poly::zero(num_vars);
        if c != 0.0 {
            p.terms.insert(vec![0; num_vars], c);
        }
        p
    }

    pub fn var(num_vars: usize, idx: usize) -> Self {
        assert!(idx < num_vars, "variable index out of range");
        let mut exps = vec![0u32; num_vars];
        exps[idx] = 1;
        let mut p = Poly::zero(num_vars);
        p.terms.insert(exps, 1.0);
        p
    }

    /// Builds a polynomial from explicit (exponents, coefficient) terms.
    pub fn from_terms(num_vars: usize, terms: &[(Vec<u32>, f64)]) -> Result<Self> {
        let mut p = Poly::zero(num_vars);
        for (exps, c) in terms {
            if exps.len() != num_vars {
                return Err(Error::DimensionMismatch(
                    "exponent vector length does not match variable count".into(),
                ));
            }
            *p.terms.entry(exps.clone()).or_insert(0.0) += c;
        }
        p.prune(1.0);
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|&x| x == 0))
    }

    /// Coefficient of the constant monomial.
    pub fn constant_part(&self) -> f64 {
        self.terms
            .get(&vec![0u32; self.num_vars])
            .copied()
            .unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// True when some term carries a positive exponent on variable `idx`.
    pub fn depends_on(&self, idx: usize) -> bool {
        self.terms.keys().any(|e| e[idx] > 0)
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0f64, |acc, c| acc.max(c.abs()))
    }

    /// Iterate terms as (exponents, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    /// For an affine polynomial, the (per-variable coefficients, constant)
    /// representation; `None` when any term has total degree > 1.
    pub fn linear_form(&self) -> Option<(Vec<f64>, f64)> {
        let mut coeffs = vec![0.0; self.num_vars];
        let mut constant = 0.0;
        for (exps, c) in &self.terms {
            match exps.iter().sum::<u32>() {
                0 => constant = *c,
                1 => {
                    let idx = exps.iter().position(|&e| e == 1).unwrap();
                    coeffs[idx] = *c;
                }
                _ => return None,
            }
        }
        Some((coeffs, constant))
    }

    fn prune(&mut self, scale: f64) {
        let tol = COEFF_EPS * scale.max(1.0);
        self.terms.retain(|_, c| c.abs() > tol);
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.num_vars, other.num_vars);
        let scale = self.max_coeff().max(other.max_coeff());
        let mut out = self.clone();
        for (exps, c) in &other.terms {
            *out.terms.entry(exps.clone()).or_insert(0.0) += c;
        }
        out.prune(scale);
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Poly {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c = -*c);
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= s);
        out.prune(self.max_coeff() * s.abs());
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.num_vars, other.num_vars);
        let scale = (self.max_coeff() * other.max_coeff()).max(1.0);
        let mut out = Poly::zero(self.num_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                *out.terms.entry(exps).or_insert(0.0) += ca * cb;
            }
        }
        out.prune(scale);
        out
    }

    /// Formal partial derivative with respect to variable `idx`.
    pub fn partial_idx(&self, idx: usize) -> Poly {
        let mut out = Poly::zero(self.num_vars);
        for (exps, c) in &self.terms {
            let e = exps[idx];
            if e > 0 {
                let mut d = exps.clone();
                d[idx] = e - 1;
                *out.terms.entry(d).or_insert(0.0) += c * e as f64;
            }
        }
        out.prune(self.max_coeff());
        out
    }

    /// Numeric value at a phase point.
    pub fn eval(&self, pt: &PhasePoint) -> Result<f64> {
        if pt.values.len() != self.num_vars {
            return Err(Error::DimensionMismatch(format!(
                "point of length {} for a polynomial over {} variables",
                pt.values.len(),
                self.num_vars
            )));
        }
        let mut total = 0.0;
        for (exps, c) in &self.terms {
            let mut v = *c;
            for (x, &e) in pt.values.iter().zip(exps.iter()) {
                for _ in 0..e {
                    v *= x;
                }
            }
            total += v;
        }
        Ok(total)
    }

    /// Renders the polynomial with variable names from `space`.
    pub fn display<'a>(&'a self, space: &'a PhaseSpace) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, space }
    }
}

/// Formal partial derivative of `f` with respect to a named variable.
pub fn partial(f: &Poly, var: &str, space: &PhaseSpace) -> Result<Poly> {
    space.check(f)?;
    let (idx, _) = space.var_index(var)?;
    Ok(f.partial_idx(idx))
}

/// Numeric value of `f` at `pt`.
pub fn evaluate(f: &Poly, pt: &PhasePoint) -> Result<f64> {
    f.eval(pt)
}

/// Poisson bracket {f, g} = Σ_μ (∂f/∂q^μ ∂g/∂p_μ − ∂g/∂q^μ ∂f/∂p_μ).
pub fn poisson_bracket(f: &Poly, g: &Poly, space: &PhaseSpace) -> Result<Poly> {
    space.check(f)?;
    space.check(g)?;
    let n = space.dim();
    let mut out = Poly::zero(space.num_vars());
    for mu in 0..n {
        let df_dq = f.partial_idx(mu);
        let dg_dp = g.partial_idx(n + mu);
        if !df_dq.is_zero() && !dg_dp.is_zero() {
            out = out.add(&df_dq.mul(&dg_dp));
        }
        let dg_dq = g.partial_idx(mu);
        let df_dp = f.partial_idx(n + mu);
        if !dg_dq.is_zero() && !df_dp.is_zero() {
            out = out.sub(&dg_dq.mul(&df_dp));
        }
    }
    Ok(out)
}

pub struct PolyDisplay<'a> {
    poly: &'a Poly,
    space: &'a PhaseSpace,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (exps, &c) in &self.poly.terms {
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
                first = false;
            } else if c < 0.0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{}", crate::output::fmt_float(c.abs()))?;
            for (idx, &e) in exps.iter().enumerate() {
                if e == 1 {
                    write!(f, "*{}", self.space.var_name(idx))?;
                } else if e > 1 {
                    write!(f, "*{}^{}", self.space.var_name(idx), e)?;
                }
            }
        }
        Ok(())
    }
}
