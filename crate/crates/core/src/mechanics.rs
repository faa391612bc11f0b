//! Constrained Hamiltonian mechanics: degenerate Legendre transform, the
//! staged constraint-consistency loop, constraint classification, the
//! antisymmetric bracket matrix with singular-block handling, multiplier
//! solving and Dirac brackets.
//!
//! The worked system is a ball of mass `m` and radius `R` rolling without
//! slipping down a plane inclined at angle `phi`, described redundantly by
//! five canonical pairs `(x, y, theta, chi1, chi2)` /
//! `(P_x, P_y, P_theta, Pi1, Pi2)`, where `chi1`, `chi2` are the Lagrange
//! multiplier coordinates enforcing the incline and rolling conditions.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::phase_algebra::{poisson_bracket, PhasePoint, PhaseSpace, Poly};

const PIVOT_TOL: f64 = 1e-10;
const SPAN_TOL: f64 = 1e-12;

/// Physical parameters of the rolling ball. `a` selects the moment of
/// inertia: 0 for a hollow shell, 2 for a solid ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallParams {
    pub m: f64,
    pub g: f64,
    pub r: f64,
    pub phi: f64,
    pub a: f64,
}

impl BallParams {
    pub fn new(m: f64, g: f64, r: f64, phi: f64, a: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mass must be positive, got {m}"
            )));
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "gravity must be positive, got {g}"
            )));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "radius must be positive, got {r}"
            )));
        }
        if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidConfig(format!(
                "incline angle must lie in (0, pi/2) radians, got {phi}"
            )));
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "shape selector must be a nonnegative real, got {a}"
            )));
        }
        if a != 0.0 && a != 2.0 {
            log::warn!("shape selector a = {a} is neither hollow (0) nor solid (2)");
        }
        Ok(BallParams { m, g, r, phi, a })
    }

    /// Moment of inertia 2mR²/(a+3).
    pub fn inertia(&self) -> f64 {
        2.0 * self.m * self.r * self.r / (self.a + 3.0)
    }
}

/// A Lagrangian of the form `L = ½ q̇ᵀ M q̇ − V(q)` over a phase space.
/// Zero rows of the mass matrix make the Legendre transform degenerate.
#[derive(Debug, Clone)]
pub struct LagrangianSpec {
    pub space: PhaseSpace,
    pub mass_matrix: Mat,
    pub potential: Poly,
}

impl LagrangianSpec {
    pub fn new(space: PhaseSpace, mass_matrix: Mat, potential: Poly) -> Result<Self> {
        let n = space.dim();
        if mass_matrix.len() != n || mass_matrix.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "mass matrix must be {n}x{n}"
            )));
        }
        let scale = mass_matrix
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (mass_matrix[i][j] - mass_matrix[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidConfig("mass matrix must be symmetric".into()));
                }
            }
        }
        if potential.num_vars() != space.num_vars() {
            return Err(Error::DimensionMismatch(
                "potential defined over a different phase space".into(),
            ));
        }
        for i in 0..n {
            if potential.depends_on(n + i) {
                return Err(Error::InvalidConfig(
                    "potential must depend on positions only".into(),
                ));
            }
        }
        Ok(LagrangianSpec {
            space,
            mass_matrix,
            potential,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Primary,
    /// Found at the k-th pass of the consistency loop.
    Secondary(usize),
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Primary => write!(f, "primary"),
            Stage::Secondary(k) => write!(f, "secondary({k})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    First,
    Second,
    Unclassified,
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Class::First => write!(f, "first"),
            Class::Second => write!(f, "second"),
            Class::Unclassified => write!(f, "unclassified"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub expr: Poly,
    pub stage: Stage,
    pub class: Class,
    /// 1-based index; fixed once the consistency loop finishes.
    pub label: usize,
}

impl Constraint {
    pub fn primary(expr: Poly) -> Self {
        Constraint {
            expr,
            stage: Stage::Primary,
            class: Class::Unclassified,
            label: 0,
        }
    }
}

/// Antisymmetric matrix of pairwise constraint brackets, with its rank and
/// the inverses of the invertible blocks of its nonzero part.
#[derive(Debug, Clone)]
pub struct ThetaMatrix {
    /// On-surface values of the pairwise brackets, indexed by label - 1.
    pub entries: Mat,
    pub rank: usize,
    /// Connected components of the nonzero pattern, with their inverses.
    pub blocks: Vec<ThetaBlock>,
    /// Pairs whose bracket is not constant on the constraint surface.
    /// Block inversion is refused while this is nonempty.
    pub nonconstant: Vec<(usize, usize, Poly)>,
}

#[derive(Debug, Clone)]
pub struct ThetaBlock {
    pub indices: Vec<usize>,
    pub inverse: Option<Mat>,
}

impl ThetaMatrix {
    /// Indices (label - 1) whose row is not identically zero.
    pub fn nonzero_rows(&self) -> Vec<usize> {
        let scale = self
            .entries
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
            .max(1.0);
        (0..self.entries.len())
            .filter(|&j| self.entries[j].iter().any(|v| v.abs() > PIVOT_TOL * scale))
            .collect()
    }

    /// Inverse of the submatrix over `indices`, assembled from block
    /// inverses. `None` when some needed block is singular or was refused.
    pub fn sub_inverse(&self, indices: &[usize]) -> Option<Mat> {
        if !self.nonconstant.is_empty() {
            return None;
        }
        let pos: std::collections::BTreeMap<usize, usize> = indices
            .iter()
            .enumerate()
            .map(|(local, &global)| (global, local))
            .collect();
        let mut out = linalg::zeros(indices.len(), indices.len());
        for block in &self.blocks {
            if block.indices.iter().all(|i| pos.contains_key(i)) {
                let inv = block.inverse.as_ref()?;
                for (bi, &gi) in block.indices.iter().enumerate() {
                    for (bj, &gj) in block.indices.iter().enumerate() {
                        out[pos[&gi]][pos[&gj]] = inv[bi][bj];
                    }
                }
            } else if block.indices.iter().any(|i| pos.contains_key(i)) {
                return None; // partial overlap cannot be inverted blockwise
            }
        }
        Some(out)
    }
}

/// How each multiplier in the total Hamiltonian ended up.
#[derive(Debug, Clone)]
pub enum Multiplier {
    /// Determined by the consistency system; constant on the surface.
    Solved { poly: Poly, on_surface: f64 },
    /// Determined, but a combination of constraint functions, hence zero
    /// everywhere on the surface.
    ZeroOnSurface { poly: Poly },
    /// Undetermined (gauge); carries the chosen gauge value.
    Free { gauge_value: f64 },
}

impl Multiplier {
    pub fn kind(&self) -> &'static str {
        match self {
            Multiplier::Solved { .. } => "solved",
            Multiplier::ZeroOnSurface { .. } => "zero-on-surface",
            Multiplier::Free { .. } => "free",
        }
    }
}

/// A Hamiltonian system with its staged constraints, bracket matrix and
/// multiplier assignment. Immutable and shareable once construction is done.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    space: PhaseSpace,
    h_input: Poly,
    h_core: Poly,
    constraints: Vec<Constraint>,
    iterations: usize,
    theta: ThetaMatrix,
    multipliers: Option<Vec<Multiplier>>,
    classified: bool,
}

impl ConstrainedSystem {
    /// A system with no constraints at all; its Dirac bracket is the plain
    /// Poisson bracket.
    pub fn unconstrained(space: PhaseSpace, h: Poly) -> Self {
        ConstrainedSystem {
            space,
            h_input: h.clone(),
            h_core: h,
            constraints: Vec::new(),
            iterations: 0,
            theta: ThetaMatrix {
                entries: Vec::new(),
                rank: 0,
                blocks: Vec::new(),
                nonconstant: Vec::new(),
            },
            multipliers: Some(Vec::new()),
            classified: true,
        }
    }

    /// Assembles a system from an already-known constraint set without
    /// classifying it or solving multipliers.
    pub fn from_parts(space: PhaseSpace, h: Poly, constraints: Vec<Constraint>) -> Result<Self> {
        let theta = theta_matrix(&constraints, &space)?;
        Ok(ConstrainedSystem {
            space,
            h_input: h.clone(),
            h_core: h,
            constraints,
            iterations: 0,
            theta,
            multipliers: None,
            classified: false,
        })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    /// The Hamiltonian handed to the consistency loop.
    pub fn hamiltonian_input(&self) -> &Poly {
        &self.h_input
    }

    /// The Hamiltonian with the multiplier-coordinate terms stripped; this
    /// is what drives the equations of motion and the multiplier system.
    pub fn hamiltonian(&self) -> &Poly {
        &self.h_core
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint_by_label(&self, label: usize) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    /// Passes of the consistency loop, counting the final pass that added
    /// nothing.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn theta(&self) -> &ThetaMatrix {
        &self.theta
    }

    pub fn multipliers(&self) -> Option<&[Multiplier]> {
        self.multipliers.as_deref()
    }

    pub fn is_classified(&self) -> bool {
        self.classified
    }

    /// Indices (label - 1) of the second-class constraints.
    pub fn second_class_indices(&self) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.class == Class::Second)
            .map(|(i, _)| i)
            .collect()
    }

    /// Overrides the gauge value of a free multiplier (1-based label).
    pub fn set_gauge(&mut self, label: usize, value: f64) -> Result<()> {
        let idx = label
            .checked_sub(1)
            .filter(|&i| i < self.constraints.len())
            .ok_or_else(|| Error::InvalidConfig(format!("no constraint with label {label}")))?;
        match self.multipliers.as_mut() {
            Some(ms) => match &mut ms[idx] {
                Multiplier::Free { gauge_value } => {
                    *gauge_value = value;
                    Ok(())
                }
                _ => Err(Error::InvalidConfig(format!(
                    "multiplier {label} is determined, not gauge"
                ))),
            },
            None => Err(Error::IncompleteSystem("multipliers not solved".into())),
        }
    }

    /// Marks each constraint first- or second-class: first-class means a
    /// numerically zero bracket row and a weakly vanishing bracket with the
    /// Hamiltonian.
    pub fn classify_constraints(&mut self) -> Result<()> {
        if self.constraints.is_empty() {
            self.classified = true;
            return Ok(());
        }
        let span: Vec<&Poly> = self.constraints.iter().map(|c| &c.expr).collect();
        let nonzero: std::collections::BTreeSet<usize> =
            self.theta.nonzero_rows().into_iter().collect();
        let mut classes = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            if nonzero.contains(&i) {
                classes.push(Class::Second);
            } else {
                let db = poisson_bracket(&c.expr, &self.h_core, &self.space)?;
                let residual = reduce_modulo_span(&db, &span);
                classes.push(if residual.is_zero() {
                    Class::First
                } else {
                    Class::Second
                });
            }
        }
        for (c, class) in self.constraints.iter_mut().zip(classes) {
            c.class = class;
        }
        self.classified = true;
        Ok(())
    }

    /// Solves the linear consistency system for the multipliers, block by
    /// block. First-class rows leave their multipliers free (gauge), and the
    /// solved ones are kept in polynomial form together with their constant
    /// value on the constraint surface.
    pub fn solve_multipliers(&mut self) -> Result<()> {
        if !self.classified {
            self.classify_constraints()?;
        }
        let m = self.constraints.len();
        if m == 0 {
            self.multipliers = Some(Vec::new());
            return Ok(());
        }
        let span: Vec<&Poly> = self.constraints.iter().map(|c| &c.expr).collect();
        let rhs: Vec<Poly> = self
            .constraints
            .iter()
            .map(|c| poisson_bracket(&c.expr, &self.h_core, &self.space).map(|b| b.neg()))
            .collect::<Result<_>>()?;

        let nonzero = self.theta.nonzero_rows();
        let zero_rows: Vec<usize> = (0..m).filter(|i| !nonzero.contains(i)).collect();
        for &j in &zero_rows {
            if !reduce_modulo_span(&rhs[j], &span).is_zero() {
                return Err(Error::InconsistentDynamics(format!(
                    "constraint {} has vanishing bracket row but a nonzero consistency source",
                    j + 1
                )));
            }
        }

        let mut multipliers: Vec<Multiplier> = (0..m)
            .map(|_| Multiplier::Free { gauge_value: 0.0 })
            .collect();
        for block in &self.theta.blocks {
            let k = block.indices.len();
            let sub_rhs: Vec<&Poly> = block.indices.iter().map(|&j| &rhs[j]).collect();
            let inv = match &block.inverse {
                Some(inv) => inv,
                None => {
                    let all_zero = sub_rhs
                        .iter()
                        .all(|p| reduce_modulo_span(p, &span).is_zero());
                    if all_zero {
                        continue; // underdetermined; leave the block free
                    }
                    return Err(Error::InconsistentDynamics(
                        "singular bracket block with a nonzero consistency source".into(),
                    ));
                }
            };
            for row in 0..k {
                let mut poly = Poly::zero(self.space.num_vars());
                for col in 0..k {
                    if inv[row][col] != 0.0 {
                        poly = poly.add(&sub_rhs[col].scale(inv[row][col]));
                    }
                }
                let reduced = reduce_modulo_span(&poly, &span);
                let idx = block.indices[row];
                multipliers[idx] = if reduced.is_zero() && !poly.is_zero() {
                    Multiplier::ZeroOnSurface { poly }
                } else if reduced.is_constant() {
                    let on_surface = reduced.constant_part();
                    Multiplier::Solved { poly, on_surface }
                } else {
                    return Err(Error::Unsupported(format!(
                        "multiplier {} is not constant on the constraint surface",
                        idx + 1
                    )));
                };
            }
        }
        self.multipliers = Some(multipliers);
        Ok(())
    }

    /// An affine chart of the constraint surface: particular point plus a
    /// basis of the homogeneous solution space.
    pub fn surface_chart(&self) -> Result<SurfaceChart> {
        let nv = self.space.num_vars();
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut consts = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            let (coeffs, k) = c.expr.linear_form().ok_or_else(|| {
                Error::Unsupported("surface chart requires linear constraints".into())
            })?;
            rows.push(coeffs);
            consts.push(-k);
        }
        let particular = if consts.iter().all(|&c| c == 0.0) {
            vec![0.0; nv]
        } else {
            // minimum-norm solution of C z = -k via the Gram system
            let ct: Mat = rows.clone();
            let gram: Mat = (0..ct.len())
                .map(|i| (0..ct.len()).map(|j| linalg::dot(&ct[i], &ct[j])).collect())
                .collect();
            let ginv = linalg::invert(&gram, PIVOT_TOL).ok_or_else(|| {
                Error::DegenerateConstraint("dependent constraints in surface solve".into())
            })?;
            let w = linalg::mat_vec(&ginv, &consts);
            let mut z = vec![0.0; nv];
            for (wi, row) in w.iter().zip(&ct) {
                for (zj, rj) in z.iter_mut().zip(row) {
                    *zj += wi * rj;
                }
            }
            z
        };
        let basis = linalg::nullspace(&rows, PIVOT_TOL);
        Ok(SurfaceChart { particular, basis })
    }
}

/// Parameterization of the constraint surface.
#[derive(Debug, Clone)]
pub struct SurfaceChart {
    pub particular: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl SurfaceChart {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Point with the given chart coordinates (length = `dim()`).
    pub fn point(&self, coords: &[f64]) -> PhasePoint {
        let mut v = self.particular.clone();
        for (t, b) in coords.iter().zip(&self.basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += t * bi;
            }
        }
        PhasePoint::new(v)
    }
}

/// Momenta from `p = M q̇`; every zero row of the mass matrix yields a
/// primary constraint `p ≈ 0`, and the nondegenerate block is inverted to
/// form `H = ½ pᵀ M⁺ p + V`.
pub fn legendre_transform(spec: &LagrangianSpec) -> Result<(Poly, Vec<Constraint>)> {
    let n = spec.space.dim();
    let scale = spec
        .mass_matrix
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let tol = 1e-12 * scale;
    let zero_rows: Vec<usize> = (0..n)
        .filter(|&i| spec.mass_matrix[i].iter().all(|v| v.abs() <= tol))
        .collect();
    let live: Vec<usize> = (0..n).filter(|i| !zero_rows.contains(i)).collect();

    for &i in &live {
        for &z in &zero_rows {
            if spec.mass_matrix[i][z].abs() > tol {
                return Err(Error::InvalidConfig(
                    "mass matrix couples degenerate and nondegenerate velocities".into(),
                ));
            }
        }
    }

    let mut h = spec.potential.clone();
    if !live.is_empty() {
        let block: Mat = live
            .iter()
            .map(|&i| live.iter().map(|&j| spec.mass_matrix[i][j]).collect())
            .collect();
        if !linalg::is_positive_definite(&block) {
            return Err(Error::NonPhysicalKinetic);
        }
        let inv = linalg::invert(&block, PIVOT_TOL).ok_or(Error::NonPhysicalKinetic)?;
        for (bi, &i) in live.iter().enumerate() {
            for (bj, &j) in live.iter().enumerate() {
                let c = 0.5 * inv[bi][bj];
                if c != 0.0 {
                    let term = spec.space.momentum(i).mul(&spec.space.momentum(j)).scale(c);
                    h = h.add(&term);
                }
            }
        }
    }

    let primaries = zero_rows
        .iter()
        .map(|&i| Constraint::primary(spec.space.momentum(i)))
        .collect();
    Ok((h, primaries))
}

/// Origin of a constraint, used to fix the label order: constraints enforced
/// by multiplier coordinates come first, then the primaries, then everything
/// found later.
#[derive(Debug, Clone, Copy)]
enum Origin {
    CoordMultiplier(usize),
    PrimaryInput(usize),
    Later(usize),
}

/// Runs the consistency loop on the primary constraints of `h`, then builds
/// the bracket matrix, classifies the constraints and solves the multiplier
/// system.
///
/// Positions conjugate to primary momentum constraints are treated as
/// multiplier coordinates: `h` must be at most linear in them, the
/// constraints they enforce are read off as `∂h/∂coordinate`, and those
/// terms are stripped from the core Hamiltonian that drives the dynamics.
pub fn dirac_bergmann(
    h: &Poly,
    primaries: Vec<Constraint>,
    space: &PhaseSpace,
    max_iter: usize,
) -> Result<ConstrainedSystem> {
    if primaries.is_empty() {
        return Err(Error::InvalidConfig(
            "consistency loop needs at least one primary constraint".into(),
        ));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let n = space.dim();

    // Multiplier coordinates: conjugates of primaries of the form p_mu ~ 0.
    let mut mult_coords: Vec<(usize, usize)> = Vec::new(); // (primary idx, coord idx)
    for (pi, c) in primaries.iter().enumerate() {
        if let Some((coeffs, k)) = c.expr.linear_form() {
            if k == 0.0 {
                let nonzero: Vec<usize> = (0..space.num_vars())
                    .filter(|&i| coeffs[i] != 0.0)
                    .collect();
                if nonzero.len() == 1 && nonzero[0] >= n {
                    mult_coords.push((pi, nonzero[0] - n));
                }
            }
        }
    }

    let mut h_core = h.clone();
    for &(_, coord) in &mult_coords {
        if h.terms().any(|(exps, _)| exps[coord] > 1) {
            return Err(Error::Unsupported(
                "Hamiltonian is nonlinear in a multiplier coordinate".into(),
            ));
        }
        let g = h.partial_idx(coord);
        for &(_, other) in &mult_coords {
            if g.depends_on(other) {
                return Err(Error::Unsupported(
                    "multiplier coordinates multiply each other in the Hamiltonian".into(),
                ));
            }
        }
        h_core = h_core.sub(&space.position(coord).mul(&g));
    }

    struct Entry {
        expr: Poly,
        stage: Stage,
        origin: Origin,
        has_symbol: bool,
    }
    let mut active: Vec<Entry> = primaries
        .into_iter()
        .enumerate()
        .map(|(i, c)| Entry {
            expr: c.expr,
            stage: Stage::Primary,
            origin: Origin::PrimaryInput(i),
            has_symbol: true,
        })
        .collect();
    let mult_coord_of_primary = |pi: usize| -> Option<usize> {
        mult_coords.iter().find(|&&(p, _)| p == pi).map(|&(_, c)| c)
    };

    let mut iterations = 0;
    let mut later_counter = 0;
    let mut finished = false;
    for pass in 1..=max_iter {
        iterations = pass;
        let snapshot = active.len();
        let mut added = 0;
        for j in 0..snapshot {
            let drift = poisson_bracket(&active[j].expr, h, space)?;
            let span: Vec<&Poly> = active.iter().map(|e| &e.expr).collect();
            let residual = reduce_modulo_span(&drift, &span);

            // Brackets against the constraints that carried an undetermined
            // multiplier at the start of this pass: nonzero means this row
            // fixes multipliers instead of creating a constraint.
            let mut fixes_multiplier = false;
            for e in active[..snapshot].iter().filter(|e| e.has_symbol) {
                let b = poisson_bracket(&active[j].expr, &e.expr, space)?;
                if !reduce_modulo_span(&b, &span).is_zero() {
                    fixes_multiplier = true;
                    break;
                }
            }
            if fixes_multiplier {
                continue; // recorded implicitly; re-derived in the final solve
            }
            if residual.is_zero() {
                continue;
            }
            if mult_coords.iter().any(|&(_, c)| residual.depends_on(c)) {
                // A linear relation among the multiplier coordinates, not a
                // constraint on the physical variables; the final solve
                // recovers it as a multiplier equation.
                continue;
            }
            if residual.is_constant() {
                return Err(Error::InconsistentDynamics(format!(
                    "consistency of constraint {} demands the nonzero constant {}",
                    j + 1,
                    residual.constant_part()
                )));
            }

            // The reduced residual only certifies novelty; the constraint
            // itself is kept in the raw form the bracket produced, so staged
            // families keep their natural coefficients.
            let (expr, origin) = match (active[j].stage, active[j].origin) {
                (Stage::Primary, Origin::PrimaryInput(pi)) => {
                    if let Some(coord) = mult_coord_of_primary(pi) {
                        // Drift is -dh/dcoord; store the enforced
                        // constraint itself.
                        (drift.neg(), Origin::CoordMultiplier(coord))
                    } else {
                        later_counter += 1;
                        (sign_fix(&drift), Origin::Later(later_counter))
                    }
                }
                _ => {
                    later_counter += 1;
                    (
                        inherit_scale(&drift, &active[j].expr, space),
                        Origin::Later(later_counter),
                    )
                }
            };
            let is_coord = matches!(origin, Origin::CoordMultiplier(_));
            active.push(Entry {
                expr,
                stage: Stage::Secondary(pass),
                origin,
                has_symbol: !is_coord,
            });
            added += 1;
        }
        if added == 0 {
            finished = true;
            break;
        }
    }
    if !finished {
        return Err(Error::IterationLimit(max_iter));
    }

    // Canonical label order: coordinate-multiplier constraints by coordinate
    // index, then primaries in input order, then later finds in discovery
    // order.
    let mut order: Vec<usize> = (0..active.len()).collect();
    let key = |e: &Entry| -> (u8, usize) {
        match e.origin {
            Origin::CoordMultiplier(c) => (0, c),
            Origin::PrimaryInput(i) => (1, i),
            Origin::Later(i) => (2, i),
        }
    };
    order.sort_by_key(|&i| key(&active[i]));
    let constraints: Vec<Constraint> = order
        .iter()
        .enumerate()
        .map(|(label0, &i)| Constraint {
            expr: active[i].expr.clone(),
            stage: active[i].stage,
            class: Class::Unclassified,
            label: label0 + 1,
        })
        .collect();

    let theta = theta_matrix(&constraints, space)?;
    let mut system = ConstrainedSystem {
        space: space.clone(),
        h_input: h.clone(),
        h_core,
        constraints,
        iterations,
        theta,
        multipliers: None,
        classified: false,
    };
    system.classify_constraints()?;
    system.solve_multipliers()?;
    Ok(system)
}

/// All pairwise constraint brackets, reduced to their on-surface values,
/// with the thresholded rank and the inverses of the invertible blocks of
/// the nonzero pattern.
pub fn theta_matrix(constraints: &[Constraint], space: &PhaseSpace) -> Result<ThetaMatrix> {
    let m = constraints.len();
    if m == 0 {
        return Err(Error::InvalidConfig(
            "bracket matrix needs at least one constraint".into(),
        ));
    }
    let span: Vec<&Poly> = constraints.iter().map(|c| &c.expr).collect();
    let mut entries = linalg::zeros(m, m);
    let mut nonconstant = Vec::new();
    for j in 0..m {
        for l in (j + 1)..m {
            let b = poisson_bracket(&constraints[j].expr, &constraints[l].expr, space)?;
            let reduced = reduce_modulo_span(&b, &span);
            if reduced.is_constant() {
                entries[j][l] = reduced.constant_part();
                entries[l][j] = -reduced.constant_part();
            } else {
                entries[j][l] = reduced.constant_part();
                entries[l][j] = -reduced.constant_part();
                nonconstant.push((j, l, reduced));
            }
        }
    }
    let rank = linalg::rank(&entries, PIVOT_TOL);

    // Connected components of the nonzero pattern.
    let scale = entries
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1.0);
    let tol = PIVOT_TOL * scale;
    let live: Vec<usize> = (0..m)
        .filter(|&j| entries[j].iter().any(|v| v.abs() > tol))
        .collect();
    let mut seen = vec![false; m];
    let mut blocks = Vec::new();
    for &start in &live {
        if seen[start] {
            continue;
        }
        let mut component = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(j) = stack.pop() {
            component.push(j);
            for &l in &live {
                if !seen[l] && entries[j][l].abs() > tol {
                    seen[l] = true;
                    stack.push(l);
                }
            }
        }
        component.sort_unstable();
        let inverse = if nonconstant.is_empty() {
            let sub: Mat = component
                .iter()
                .map(|&j| component.iter().map(|&l| entries[j][l]).collect())
                .collect();
            linalg::invert(&sub, PIVOT_TOL)
        } else {
            None
        };
        blocks.push(ThetaBlock {
            indices: component,
            inverse,
        });
    }

    Ok(ThetaMatrix {
        entries,
        rank,
        blocks,
        nonconstant,
    })
}

/// Dirac bracket `{f, g} − Σ {f, Φ_j} (Θ̃⁻¹)_{jl} {Φ_l, g}`, the sum running
/// over the second-class constraints only (the free multipliers having been
/// gauge-fixed). With no constraints it degrades to the Poisson bracket.
pub fn dirac_bracket(f: &Poly, g: &Poly, system: &ConstrainedSystem) -> Result<Poly> {
    if !system.classified {
        return Err(Error::IncompleteSystem(
            "constraints are not classified".into(),
        ));
    }
    let plain = poisson_bracket(f, g, &system.space)?;
    let second: Vec<usize> = system.second_class_indices();
    if second.is_empty() {
        return Ok(plain);
    }
    let w = system.theta.sub_inverse(&second).ok_or_else(|| {
        Error::DegenerateConstraint("second-class bracket block is not invertible".into())
    })?;
    let f_brackets: Vec<Poly> = second
        .iter()
        .map(|&j| poisson_bracket(f, &system.constraints[j].expr, &system.space))
        .collect::<Result<_>>()?;
    let g_brackets: Vec<Poly> = second
        .iter()
        .map(|&l| poisson_bracket(&system.constraints[l].expr, g, &system.space))
        .collect::<Result<_>>()?;
    let mut out = plain;
    for (j, fb) in f_brackets.iter().enumerate() {
        if fb.is_zero() {
            continue;
        }
        for (l, gb) in g_brackets.iter().enumerate() {
            let wjl = w[j][l];
            if wjl != 0.0 && !gb.is_zero() {
                out = out.sub(&fb.mul(gb).scale(wjl));
            }
        }
    }
    Ok(out)
}

/// Residual of `candidate` after projecting out the linear span of the
/// given polynomials, with span-scaled coefficient pruning. A zero residual
/// is what "weakly zero" means for linear constraint sets.
pub fn reduce_modulo_span(candidate: &Poly, span: &[&Poly]) -> Poly {
    if candidate.is_zero() || span.is_empty() {
        return candidate.clone();
    }
    let mut monomials: std::collections::BTreeSet<Vec<u32>> = std::collections::BTreeSet::new();
    for p in span {
        monomials.extend(p.terms().map(|(e, _)| e.clone()));
    }
    monomials.extend(candidate.terms().map(|(e, _)| e.clone()));
    let index: std::collections::BTreeMap<&Vec<u32>, usize> =
        monomials.iter().enumerate().map(|(i, e)| (e, i)).collect();

    let to_vec = |p: &Poly| -> Vec<f64> {
        let mut v = vec![0.0; monomials.len()];
        for (e, c) in p.terms() {
            v[index[e]] = c;
        }
        v
    };
    let rows: Vec<Vec<f64>> = span.iter().map(|p| to_vec(p)).collect();
    let basis = linalg::orthonormal_basis(&rows, PIVOT_TOL);
    let residual = linalg::project_out(&to_vec(candidate), &basis);

    let tol = SPAN_TOL * candidate.max_coeff().max(1.0);
    let terms: Vec<(Vec<u32>, f64)> = monomials
        .iter()
        .zip(&residual)
        .filter(|(_, &c)| c.abs() > tol)
        .map(|(e, &c)| (e.clone(), c))
        .collect();
    Poly::from_terms(candidate.num_vars(), &terms).expect("consistent monomials")
}

fn sign_fix(p: &Poly) -> Poly {
    if let Some((coeffs, k)) = p.linear_form() {
        let lead = coeffs.iter().copied().find(|c| *c != 0.0).unwrap_or(k);
        if lead < 0.0 {
            return p.neg();
        }
    }
    p.clone()
}

/// Scale a freshly discovered constraint so that the coefficient on the
/// momentum (position) dual to the source constraint's leading position
/// (momentum) matches the source's own coefficient there. This keeps staged
/// families of constraints on the same footing as their parents; when no
/// dual pairing exists the sign is fixed and the scale left alone.
fn inherit_scale(residual: &Poly, source: &Poly, space: &PhaseSpace) -> Poly {
    let n = space.dim();
    if let (Some((sc, _)), Some((rc, _))) = (source.linear_form(), residual.linear_form()) {
        for idx in 0..space.num_vars() {
            if sc[idx].abs() > 1e-14 {
                let dual = if idx < n { idx + n } else { idx - n };
                if rc[dual].abs() > 1e-14 {
                    return residual.scale(sc[idx] / rc[dual]);
                }
            }
        }
    }
    sign_fix(residual)
}

/// Phase space of the rolling-ball system: the three geometric coordinates
/// plus the two multiplier coordinates and all their conjugate momenta.
pub fn ball_phase_space() -> PhaseSpace {
    PhaseSpace::new(&[
        ("x", "P_x"),
        ("y", "P_y"),
        ("theta", "P_theta"),
        ("chi1", "Pi1"),
        ("chi2", "Pi2"),
    ])
    .expect("static names are unique")
}

/// The velocity-quadratic Lagrangian of the rolling ball with both holonomic
/// conditions enforced through multiplier coordinates:
/// kinetic `diag(m, m, 2mR²/(a+3), 0, 0)` and potential
/// `m g y + chi1 (tanφ x + y) + chi2 (secφ x − R θ)`.
pub fn ball_lagrangian(params: &BallParams) -> Result<LagrangianSpec> {
    let space = ball_phase_space();
    let mut mass = linalg::zeros(5, 5);
    mass[0][0] = params.m;
    mass[1][1] = params.m;
    mass[2][2] = 2.0 * params.m * params.r * params.r / (params.a + 3.0);

    let (tan, sec) = (params.phi.tan(), 1.0 / params.phi.cos());
    let x = space.position(0);
    let y = space.position(1);
    let th = space.position(2);
    let chi1 = space.position(3);
    let chi2 = space.position(4);

    let incline = x.scale(tan).add(&y);
    let rolling = x.scale(sec).sub(&th.scale(params.r));
    let potential = y
        .scale(params.m * params.g)
        .add(&chi1.mul(&incline))
        .add(&chi2.mul(&rolling));
    LagrangianSpec::new(space, mass, potential)
}

/// Full pipeline for the rolling ball: Legendre transform, consistency loop,
/// classification and multiplier solve.
pub fn ball_system(params: &BallParams) -> Result<ConstrainedSystem> {
    let spec = ball_lagrangian(params)?;
    let (h, primaries) = legendre_transform(&spec)?;
    dirac_bergmann(&h, primaries, &spec.space, 10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_relative_eq;

    fn solid_ball() -> BallParams {
        BallParams::new(1.0, 9.8, 1.0, std::f64::consts::FRAC_PI_4, 2.0).unwrap()
    }

    /// The six reference constraint polynomials in label order.
    fn reference_constraints(params: &BallParams, space: &PhaseSpace) -> Vec<Poly> {
        let (tan, sec) = (params.phi.tan(), 1.0 / params.phi.cos());
        let (x, y, th) = (space.position(0), space.position(1), space.position(2));
        let (px, py, pth) = (space.momentum(0), space.momentum(1), space.momentum(2));
        vec![
            x.scale(tan).add(&y),
            x.scale(sec).sub(&th.scale(params.r)),
            space.momentum(3),
            space.momentum(4),
            px.scale(tan).add(&py),
            px.scale(sec)
                .sub(&pth.scale((params.a + 3.0) / (2.0 * params.r))),
        ]
    }

    fn coeff_distance(a: &Poly, b: &Poly) -> f64 {
        a.sub(b).max_coeff()
    }

    #[test]
    fn ball_params_validation() {
        assert!(BallParams::new(0.0, 9.8, 1.0, 0.5, 2.0).is_err());
        assert!(BallParams::new(1.0, 9.8, 1.0, 0.0, 2.0).is_err());
        assert!(BallParams::new(1.0, 9.8, 1.0, 2.0, 2.0).is_err());
        assert!(BallParams::new(1.0, 9.8, 1.0, 0.5, -1.0).is_err());
        // accepted with a warning
        assert!(BallParams::new(1.0, 9.8, 1.0, 0.5, 1.3).is_ok());
    }

    #[test]
    fn lagrangian_shape_validation() {
        let space = PhaseSpace::new(&[("q1", "p1"), ("q2", "p2")]).unwrap();
        // asymmetric kinetic matrix
        let asym = vec![vec![1.0, 0.5], vec![0.0, 1.0]];
        assert!(LagrangianSpec::new(space.clone(), asym, space.zero()).is_err());
        // momentum-dependent potential
        let sym = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(LagrangianSpec::new(space.clone(), sym.clone(), space.momentum(0)).is_err());
        // wrong dimensions
        assert!(LagrangianSpec::new(space.clone(), vec![vec![1.0]], space.zero()).is_err());
        assert!(LagrangianSpec::new(space, sym, Poly::zero(4)).is_ok());
    }

    #[test]
    fn too_small_iteration_budget_is_reported() {
        let params = solid_ball();
        let spec = ball_lagrangian(&params).unwrap();
        let (h, primaries) = legendre_transform(&spec).unwrap();
        assert!(matches!(
            dirac_bergmann(&h, primaries, &spec.space, 1),
            Err(Error::IterationLimit(1))
        ));
    }

    #[test]
    fn singular_coupled_block_with_a_source_is_inconsistent() {
        // Three pairwise-coupled constraints form an odd (hence singular)
        // block; a Hamiltonian sourcing one of them cannot be balanced.
        let space = PhaseSpace::new(&[("q1", "p1"), ("q2", "p2")]).unwrap();
        let constraints = vec![
            Constraint {
                expr: space.position(0),
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: 1,
            },
            Constraint {
                expr: space.position(1),
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: 2,
            },
            Constraint {
                expr: space.momentum(0).add(&space.momentum(1)),
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: 3,
            },
        ];
        let h = space.momentum(0);
        let mut system = ConstrainedSystem::from_parts(space.clone(), h, constraints).unwrap();
        system.classify_constraints().unwrap();
        assert!(matches!(
            system.solve_multipliers(),
            Err(Error::InconsistentDynamics(_))
        ));
        // the same singular block also blocks Dirac brackets
        assert!(matches!(
            dirac_bracket(&space.position(0), &space.momentum(0), &system),
            Err(Error::DegenerateConstraint(_))
        ));
    }

    #[test]
    fn theta_matrix_requires_constraints() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        assert!(theta_matrix(&[], &space).is_err());
    }

    #[test]
    fn legendre_emits_the_two_degenerate_primaries() {
        let spec = ball_lagrangian(&solid_ball()).unwrap();
        let (_, primaries) = legendre_transform(&spec).unwrap();
        assert_eq!(primaries.len(), 2);
        assert_eq!(
            coeff_distance(&primaries[0].expr, &spec.space.momentum(3)),
            0.0
        );
        assert_eq!(
            coeff_distance(&primaries[1].expr, &spec.space.momentum(4)),
            0.0
        );
        assert!(primaries.iter().all(|c| c.stage == Stage::Primary));
    }

    #[test]
    fn legendre_nondegenerate_has_no_primaries() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        let m = 2.0;
        let q = space.position(0);
        let potential = q.mul(&q);
        let spec = LagrangianSpec::new(space.clone(), vec![vec![m]], potential.clone()).unwrap();
        let (h, primaries) = legendre_transform(&spec).unwrap();
        assert!(primaries.is_empty());
        let p = space.momentum(0);
        let expected = p.mul(&p).scale(1.0 / (2.0 * m)).add(&potential);
        assert!(coeff_distance(&h, &expected) < 1e-15);
    }

    #[test]
    fn ball_kinetic_part_matches_closed_form() {
        let params = solid_ball();
        let spec = ball_lagrangian(&params).unwrap();
        let (h, _) = legendre_transform(&spec).unwrap();
        let kinetic = h.sub(&spec.potential);
        let space = &spec.space;
        let (px, py, pth) = (space.momentum(0), space.momentum(1), space.momentum(2));
        let expected = px
            .mul(&px)
            .scale(1.0 / (2.0 * params.m))
            .add(&py.mul(&py).scale(1.0 / (2.0 * params.m)))
            .add(
                &pth.mul(&pth)
                    .scale((params.a + 3.0) / (4.0 * params.m * params.r * params.r)),
            );
        assert!(coeff_distance(&kinetic, &expected) < 1e-14);
    }

    #[test]
    fn indefinite_kinetic_matrix_is_rejected() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        let spec = LagrangianSpec::new(space.clone(), vec![vec![-1.0]], space.zero()).unwrap();
        assert!(matches!(
            legendre_transform(&spec),
            Err(Error::NonPhysicalKinetic)
        ));
    }

    #[test]
    fn ball_discovery_stages_and_labels() {
        let system = ball_system(&solid_ball()).unwrap();
        assert_eq!(system.constraints().len(), 6);
        assert_eq!(system.iterations(), 3);
        let stages: Vec<Stage> = system.constraints().iter().map(|c| c.stage).collect();
        assert_eq!(
            stages,
            vec![
                Stage::Secondary(1),
                Stage::Secondary(1),
                Stage::Primary,
                Stage::Primary,
                Stage::Secondary(2),
                Stage::Secondary(2),
            ]
        );
        let labels: Vec<usize> = system.constraints().iter().map(|c| c.label).collect();
        assert_eq!(labels, vec![1, 2, 3, 4, 5, 6]);

        // Each stored constraint is the reference polynomial itself.
        let params = solid_ball();
        let reference = reference_constraints(&params, system.space());
        for (c, r) in system.constraints().iter().zip(&reference) {
            assert!(
                coeff_distance(&c.expr, r) < 1e-12,
                "constraint {} drifted from its reference form",
                c.label
            );
        }
    }

    #[test]
    fn empty_primaries_are_rejected() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        let h = space.zero();
        assert!(dirac_bergmann(&h, Vec::new(), &space, 10).is_err());
    }

    #[test]
    fn toy_primary_with_decoupled_hamiltonian_is_first_class() {
        let space = PhaseSpace::new(&[("x", "P_x"), ("chi", "Pi")]).unwrap();
        let px = space.momentum(0);
        let h = px.mul(&px).scale(0.5);
        let primaries = vec![Constraint::primary(space.momentum(1))];
        let system = dirac_bergmann(&h, primaries, &space, 10).unwrap();
        assert_eq!(system.iterations(), 1);
        assert_eq!(system.constraints().len(), 1);
        assert_eq!(system.constraints()[0].class, Class::First);
        assert!(matches!(
            system.multipliers().unwrap()[0],
            Multiplier::Free { .. }
        ));
    }

    #[test]
    fn constant_consistency_source_is_inconsistent_dynamics() {
        // H = p²/2 + chi: consistency of Pi ≈ 0 demands the constant -1 ≈ 0.
        let space = PhaseSpace::new(&[("x", "P_x"), ("chi", "Pi")]).unwrap();
        let px = space.momentum(0);
        let h = px.mul(&px).scale(0.5).add(&space.position(1));
        let primaries = vec![Constraint::primary(space.momentum(1))];
        assert!(matches!(
            dirac_bergmann(&h, primaries, &space, 10),
            Err(Error::InconsistentDynamics(_))
        ));
    }

    #[test]
    fn solved_multipliers_match_closed_forms() {
        let params = solid_ball();
        let system = ball_system(&params).unwrap();
        let ms = system.multipliers().unwrap();
        match &ms[0] {
            Multiplier::Solved { on_surface, .. } => {
                assert_relative_eq!(*on_surface, -6.3, max_relative = 1e-12)
            }
            other => panic!("chi1 should be solved, got {}", other.kind()),
        }
        match &ms[1] {
            Multiplier::Solved { on_surface, .. } => {
                assert_relative_eq!(*on_surface, 1.9798989873223329, max_relative = 1e-12)
            }
            other => panic!("chi2 should be solved, got {}", other.kind()),
        }
        assert!(matches!(ms[2], Multiplier::Free { .. }));
        assert!(matches!(ms[3], Multiplier::Free { .. }));
        assert!(matches!(ms[4], Multiplier::ZeroOnSurface { .. }));
        assert!(matches!(ms[5], Multiplier::ZeroOnSurface { .. }));
    }

    #[test]
    fn zero_on_surface_multipliers_vanish_at_sampled_points() {
        let system = ball_system(&solid_ball()).unwrap();
        let chart = system.surface_chart().unwrap();
        assert_eq!(chart.dim(), 4);
        let ms = system.multipliers().unwrap();
        let mut state = 0.37f64;
        for _ in 0..40 {
            let coords: Vec<f64> = (0..chart.dim())
                .map(|_| {
                    state = (state * 997.0 + 0.1234).fract();
                    2.0 * state - 1.0
                })
                .collect();
            let pt = chart.point(&coords);
            for c in system.constraints() {
                assert!(c.expr.eval(&pt).unwrap().abs() < 1e-12);
            }
            for m in &ms[4..6] {
                if let Multiplier::ZeroOnSurface { poly } = m {
                    assert!(poly.eval(&pt).unwrap().abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn classification_matches_gauge_structure() {
        let system = ball_system(&solid_ball()).unwrap();
        let classes: Vec<Class> = system.constraints().iter().map(|c| c.class).collect();
        assert_eq!(
            classes,
            vec![
                Class::Second,
                Class::Second,
                Class::First,
                Class::First,
                Class::Second,
                Class::Second,
            ]
        );
    }

    #[test]
    fn classify_on_empty_constraint_set_is_vacuous() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        let mut system = ConstrainedSystem::unconstrained(space, Poly::zero(2));
        assert!(system.classify_constraints().is_ok());
        assert!(system.second_class_indices().is_empty());
    }

    #[test]
    fn theta_block_at_zero_angle() {
        // Reference constraints evaluated at φ = 0, a = 2 (built directly;
        // the parameter type itself insists on a genuine slope).
        let space = ball_phase_space();
        let params = BallParams {
            m: 1.0,
            g: 9.8,
            r: 1.0,
            phi: 0.0,
            a: 2.0,
        };
        let constraints: Vec<Constraint> = reference_constraints(&params, &space)
            .into_iter()
            .enumerate()
            .map(|(i, expr)| Constraint {
                expr,
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: i + 1,
            })
            .collect();
        let theta = theta_matrix(&constraints, &space).unwrap();
        // rows (5,6) x cols (1,2) should be -[[1,0],[0,3.5]]
        assert_relative_eq!(theta.entries[4][0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(theta.entries[4][1], 0.0);
        assert_relative_eq!(theta.entries[5][0], 0.0);
        assert_relative_eq!(theta.entries[5][1], -3.5, max_relative = 1e-14);
    }

    #[test]
    fn theta_structure_of_the_ball_system() {
        let params = solid_ball();
        let system = ball_system(&params).unwrap();
        let theta = system.theta();
        let m = theta.entries.len();
        assert_eq!(m, 6);
        assert_eq!(theta.rank, 4);
        // exact antisymmetry as stored
        for j in 0..m {
            for l in 0..m {
                assert_eq!(theta.entries[j][l], -theta.entries[l][j]);
            }
        }
        // rows and columns 3, 4 identically zero
        for idx in [2usize, 3] {
            assert!(theta.entries[idx].iter().all(|&v| v == 0.0));
            assert!((0..m).all(|j| theta.entries[j][idx] == 0.0));
        }
        // closed-form block: rows (5,6) x cols (1,2)
        let (tan, sec) = (params.phi.tan(), 1.0 / params.phi.cos());
        let s11 = sec * sec;
        let s12 = sec * tan;
        let s22 = sec * sec + (params.a + 3.0) / 2.0;
        assert_relative_eq!(theta.entries[4][0], -s11, max_relative = 1e-13);
        assert_relative_eq!(theta.entries[4][1], -s12, max_relative = 1e-13);
        assert_relative_eq!(theta.entries[5][0], -s12, max_relative = 1e-13);
        assert_relative_eq!(theta.entries[5][1], -s22, max_relative = 1e-13);

        // Inverse of that block: minus the (a+5)-normalised cofactor form.
        let second = system.second_class_indices();
        let w = theta.sub_inverse(&second).unwrap();
        // w is indexed over (1,2,5,6); the block mapping rows (5,6) back to
        // (1,2) sits at rows 0..2, cols 2..4.
        let a5 = params.a + 5.0;
        let closed = [
            [
                ((params.a + 3.0) * params.phi.cos().powi(2) + 2.0) / a5,
                -2.0 * params.phi.sin() / a5,
            ],
            [-2.0 * params.phi.sin() / a5, 2.0 / a5],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(w[r][2 + c], -closed[r][c], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn nonconstant_bracket_entries_refuse_inversion() {
        let space = PhaseSpace::new(&[("x", "P_x"), ("y", "P_y")]).unwrap();
        let x = space.position(0);
        let constraints = vec![
            Constraint {
                expr: x.mul(&x),
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: 1,
            },
            Constraint {
                expr: space.momentum(0),
                stage: Stage::Primary,
                class: Class::Unclassified,
                label: 2,
            },
        ];
        let theta = theta_matrix(&constraints, &space).unwrap();
        assert!(!theta.nonconstant.is_empty());
        assert!(theta.sub_inverse(&[0, 1]).is_none());
    }

    #[test]
    fn dirac_bracket_closed_forms() {
        let params = BallParams::new(1.0, 9.8, 1.0, std::f64::consts::FRAC_PI_6, 2.0).unwrap();
        let system = ball_system(&params).unwrap();
        let space = system.space();
        let x = space.var("x").unwrap();
        let px = space.var("P_x").unwrap();
        let b = dirac_bracket(&x, &px, &system).unwrap();
        assert_relative_eq!(b.constant_part(), 15.0 / 28.0, max_relative = 1e-12);

        let same = dirac_bracket(&x, &x, &system).unwrap();
        assert!(same.is_zero());

        let th = space.var("theta").unwrap();
        let pth = space.var("P_theta").unwrap();
        let b = dirac_bracket(&th, &pth, &system).unwrap();
        assert_relative_eq!(b.constant_part(), 2.0 / 7.0, max_relative = 1e-12);
    }

    #[test]
    fn dirac_bracket_reduces_to_poisson_without_constraints() {
        let space = PhaseSpace::new(&[("q", "p")]).unwrap();
        let system = ConstrainedSystem::unconstrained(space.clone(), space.zero());
        let q = space.position(0);
        let p = space.momentum(0);
        let lhs = dirac_bracket(&q, &p, &system).unwrap();
        let rhs = poisson_bracket(&q, &p, &space).unwrap();
        assert_eq!(coeff_distance(&lhs, &rhs), 0.0);
    }

    #[test]
    fn second_class_constraints_have_degenerate_dirac_brackets() {
        let system = ball_system(&solid_ball()).unwrap();
        let chart = system.surface_chart().unwrap();
        let space = system.space();
        // a handful of sampled degree ≤ 2 observables
        let x = space.var("x").unwrap();
        let py = space.var("P_y").unwrap();
        let th = space.var("theta").unwrap();
        let observables = vec![
            x.clone(),
            py.clone(),
            x.mul(&py),
            th.mul(&th).scale(0.5).add(&x.scale(-2.0)),
        ];
        let mut state = 0.11f64;
        for idx in system.second_class_indices() {
            let phi = &system.constraints()[idx].expr;
            for f in &observables {
                let b = dirac_bracket(phi, f, &system).unwrap();
                for _ in 0..100 {
                    let coords: Vec<f64> = (0..chart.dim())
                        .map(|_| {
                            state = (state * 997.0 + 0.1234).fract();
                            2.0 * state - 1.0
                        })
                        .collect();
                    let value = b.eval(&chart.point(&coords)).unwrap();
                    assert!(
                        value.abs() < 1e-9 * b.max_coeff().max(1.0),
                        "constraint {} bracket leaks {value:e}",
                        idx + 1
                    );
                }
            }
        }
    }

    #[test]
    fn multiplier_solutions_satisfy_the_consistency_system() {
        let system = ball_system(&solid_ball()).unwrap();
        let ms = system.multipliers().unwrap();
        let theta = &system.theta().entries;
        let chart = system.surface_chart().unwrap();
        let mut state = 0.77f64;
        for (j, c) in system.constraints().iter().enumerate() {
            let source = poisson_bracket(&c.expr, system.hamiltonian(), system.space()).unwrap();
            for _ in 0..20 {
                let coords: Vec<f64> = (0..chart.dim())
                    .map(|_| {
                        state = (state * 997.0 + 0.1234).fract();
                        2.0 * state - 1.0
                    })
                    .collect();
                let pt = chart.point(&coords);
                let mut residual = source.eval(&pt).unwrap();
                for (l, m) in ms.iter().enumerate() {
                    let lambda = match m {
                        Multiplier::Solved { poly, .. } | Multiplier::ZeroOnSurface { poly } => {
                            poly.eval(&pt).unwrap()
                        }
                        Multiplier::Free { gauge_value } => *gauge_value,
                    };
                    residual += theta[j][l] * lambda;
                }
                assert!(residual.abs() < 1e-10, "row {j} residual {residual:e}");
            }
        }
    }

    #[test]
    fn gauge_override_only_touches_free_multipliers() {
        let mut system = ball_system(&solid_ball()).unwrap();
        system.set_gauge(3, 0.25).unwrap();
        assert!(matches!(
            system.multipliers().unwrap()[2],
            Multiplier::Free { gauge_value } if gauge_value == 0.25
        ));
        assert!(system.set_gauge(1, 1.0).is_err());
        assert!(system.set_gauge(99, 1.0).is_err());
    }
}
