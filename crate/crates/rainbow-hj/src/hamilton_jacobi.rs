//! Numerical Legendre transform and Hopf-Lax solver for first-order
//! Hamilton-Jacobi initial-value problems
//!
//! ```text
//! U_t + H(DU) = 0,  U(x, 0) = g(x),
//! ```
//!
//! with convex H and Lipschitz g, in one spatial dimension. The solution is
//! the variational formula
//!
//! ```text
//! U(x, t) = min over y of { t L((x - y) / t) + g(y) },
//! ```
//!
//! where L is the convex conjugate (Legendre transform) of H. L is computed
//! as a table on a velocity grid; the minimization is a grid scan refined by
//! golden-section search with local quadratic interpolation of the table.
//! The module also ships the diagnostics that make the construction
//! trustworthy: convexity and superlinearity probes, Lipschitz estimation,
//! and a semigroup (restart) residual.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::grid::{AxisSpec, ValueSurface};

/// Tolerance for the discrete convexity checks on tables.
pub const CONVEXITY_TOL: f64 = 1e-9;
/// Growth factor between the half-radius and full-radius shells that the
/// superlinearity probe requires.
pub const SUPERLINEAR_GROWTH: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HjError {
    #[error("supremum not bracketed by the p grid at q nodes {q_nodes:?}")]
    SupremumNotBracketed { q_nodes: Vec<f64> },
    #[error("minimizer {argmin} lies on the y-grid boundary at (x={x}, t={t})")]
    MinimizerOnBoundary { x: f64, t: f64, argmin: f64 },
    #[error("no feasible velocity: (x - y)/t exits the Lagrangian table at (x={x}, t={t})")]
    LagrangianGapped { x: f64, t: f64 },
    #[error("sample pair {index} has coincident points")]
    CoincidentPair { index: usize },
    #[error("time must be strictly positive, got {t}")]
    NonPositiveTime { t: f64 },
    #[error("need 0 < t1 <= t2, got t1={t1}, t2={t2}")]
    BadTimes { t1: f64, t2: f64 },
    #[error("axis bounds are not finite and increasing")]
    BadAxis,
    #[error("table has {got} values for a {expected}-node axis")]
    TableShape { expected: usize, got: usize },
    #[error("table value at node {index} is NaN or -inf")]
    InvalidTableValue { index: usize },
    #[error("table violates convexity near node {index}")]
    NonConvexTable { index: usize },
    #[error("table has no finite values")]
    EmptyTable,
    #[error("Hamilton-Jacobi operations support dimension 1, got {n}")]
    UnsupportedDimension { n: usize },
}

type SharedEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A Hamiltonian H(p) given by an evaluator over momentum vectors.
#[derive(Clone)]
pub struct HamiltonianSpec {
    dim: usize,
    declared_convex: bool,
    eval: SharedEval,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("dim", &self.dim)
            .field("declared_convex", &self.declared_convex)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSpec {
    pub fn new(
        dim: usize,
        declared_convex: bool,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        HamiltonianSpec {
            dim,
            declared_convex,
            eval: Arc::new(eval),
        }
    }

    /// H(p) = p^2 / 2, the self-conjugate Hamiltonian.
    pub fn quadratic() -> Self {
        Self::new(1, true, |p| 0.5 * p[0] * p[0])
    }

    /// H(p) = p^4 / 4.
    pub fn quartic() -> Self {
        Self::new(1, true, |p| 0.25 * p[0].powi(4))
    }

    /// H(p) = |p|; its conjugate is the indicator of the unit velocity ball.
    pub fn abs_norm() -> Self {
        Self::new(1, true, |p| p[0].abs())
    }

    /// H(p) = sum of coeffs[k] * p^k; convexity is not claimed.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::new(1, false, move |p| {
            coeffs.iter().rev().fold(0.0, |acc, &c| acc * p[0] + c)
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn declared_convex(&self) -> bool {
        self.declared_convex
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert_eq!(p.len(), self.dim);
        (self.eval)(p)
    }
}

/// The Cauchy problem data: a Hamiltonian and a Lipschitz initial datum.
#[derive(Clone)]
pub struct HJProblem {
    hamiltonian: HamiltonianSpec,
    initial: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lipschitz_bound: f64,
}

impl fmt::Debug for HJProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HJProblem")
            .field("hamiltonian", &self.hamiltonian)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish_non_exhaustive()
    }
}

impl HJProblem {
    pub fn new(
        hamiltonian: HamiltonianSpec,
        lipschitz_bound: f64,
        initial: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, HjError> {
        if hamiltonian.dim() != 1 {
            return Err(HjError::UnsupportedDimension {
                n: hamiltonian.dim(),
            });
        }
        Ok(HJProblem {
            hamiltonian,
            initial: Arc::new(initial),
            lipschitz_bound,
        })
    }

    pub fn hamiltonian(&self) -> &HamiltonianSpec {
        &self.hamiltonian
    }

    pub fn initial(&self, x: f64) -> f64 {
        (self.initial)(x)
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }
}

/// The Lagrangian L(q) tabulated on a uniform velocity axis. +inf marks
/// velocities outside the conjugate's domain; the finite part must be
/// contiguous and discretely convex.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianTable {
    q_axis: AxisSpec,
    values: Vec<f64>,
    finite_first: usize,
    finite_last: usize,
}

impl LagrangianTable {
    pub fn new(q_axis: AxisSpec, values: Vec<f64>) -> Result<Self, HjError> {
        if !q_axis.is_valid() {
            return Err(HjError::BadAxis);
        }
        if values.len() != q_axis.nodes {
            return Err(HjError::TableShape {
                expected: q_axis.nodes,
                got: values.len(),
            });
        }
        for (index, &v) in values.iter().enumerate() {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(HjError::InvalidTableValue { index });
            }
        }
        let finite_first = values
            .iter()
            .position(|v| v.is_finite())
            .ok_or(HjError::EmptyTable)?;
        let finite_last = values.len() - 1 - values.iter().rev().position(|v| v.is_finite()).unwrap();
        for (index, &v) in values.iter().enumerate().take(finite_last).skip(finite_first) {
            if !v.is_finite() {
                // An interior +inf breaks lower semicontinuity on the grid.
                return Err(HjError::NonConvexTable { index });
            }
        }
        for j in finite_first + 1..finite_last {
            if values[j - 1] + values[j + 1] - 2.0 * values[j] < -CONVEXITY_TOL {
                return Err(HjError::NonConvexTable { index: j });
            }
        }
        Ok(LagrangianTable {
            q_axis,
            values,
            finite_first,
            finite_last,
        })
    }

    pub fn q_axis(&self) -> AxisSpec {
        self.q_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// Index range (first, last) of the finite part.
    pub fn finite_range(&self) -> (usize, usize) {
        (self.finite_first, self.finite_last)
    }

    /// Local quadratic interpolation through the three nodes nearest q
    /// (exact whenever the table samples a quadratic). None outside the
    /// finite part of the table.
    pub fn interpolate(&self, q: f64) -> Option<f64> {
        let h = self.q_axis.step();
        let pos = (q - self.q_axis.x_min) / h;
        let (first, last) = (self.finite_first as f64, self.finite_last as f64);
        if !(first - 1e-9..=last + 1e-9).contains(&pos) {
            return None;
        }
        let run = self.finite_last - self.finite_first;
        if run == 0 {
            return ((pos - first).abs() < 1e-6).then(|| self.values[self.finite_first]);
        }
        if run == 1 {
            let s = (pos - first).clamp(0.0, 1.0);
            let v0 = self.values[self.finite_first];
            let v1 = self.values[self.finite_last];
            return Some(v0 + s * (v1 - v0));
        }
        let b = (pos.round() as isize)
            .clamp(self.finite_first as isize + 1, self.finite_last as isize - 1)
            as usize;
        let s = pos - b as f64;
        let (vm, v0, vp) = (self.values[b - 1], self.values[b], self.values[b + 1]);
        Some(v0 + 0.5 * s * (vp - vm) + 0.5 * s * s * (vp - 2.0 * v0 + vm))
    }
}

/// Shared conjugate scan: for each target slope, maximize slope * coord -
/// value over the candidate (coord, value) list, flagging targets whose
/// maximum is attained only at the candidate boundary.
fn conjugate_values(
    candidates: &[(f64, f64)],
    targets: &[f64],
) -> (Vec<f64>, Vec<bool>) {
    let last = candidates.len() - 1;
    let mut values = Vec::with_capacity(targets.len());
    let mut bracketed = Vec::with_capacity(targets.len());
    for &q in targets {
        let mut best = f64::NEG_INFINITY;
        for &(p, h) in candidates {
            let v = p * q - h;
            if v > best {
                best = v;
            }
        }
        let interior = candidates[1..last]
            .iter()
            .any(|&(p, h)| p * q - h == best);
        values.push(best);
        bracketed.push(interior);
    }
    (values, bracketed)
}

/// Legendre transform L(q) = max over the p grid of (p q - H(p)).
///
/// Fails listing every q whose supremum is attained only on the p-grid
/// boundary (the true supremum is then not bracketed).
pub fn legendre_transform(
    hamiltonian: &HamiltonianSpec,
    p_axis: AxisSpec,
    q_axis: AxisSpec,
) -> Result<LagrangianTable, HjError> {
    let (values, bracketed) = legendre_scan(hamiltonian, p_axis, q_axis)?;
    let offending: Vec<f64> = q_axis
        .coords()
        .iter()
        .zip(&bracketed)
        .filter(|(_, &ok)| !ok)
        .map(|(&q, _)| q)
        .collect();
    if !offending.is_empty() {
        return Err(HjError::SupremumNotBracketed { q_nodes: offending });
    }
    LagrangianTable::new(q_axis, values)
}

/// Like [`legendre_transform`] but records +inf at unbracketed q nodes
/// instead of failing; use for Hamiltonians whose conjugate has bounded
/// domain (for example H(p) = |p|).
pub fn legendre_transform_saturating(
    hamiltonian: &HamiltonianSpec,
    p_axis: AxisSpec,
    q_axis: AxisSpec,
) -> Result<LagrangianTable, HjError> {
    let (mut values, bracketed) = legendre_scan(hamiltonian, p_axis, q_axis)?;
    for (v, ok) in values.iter_mut().zip(&bracketed) {
        if !ok {
            *v = f64::INFINITY;
        }
    }
    LagrangianTable::new(q_axis, values)
}

fn legendre_scan(
    hamiltonian: &HamiltonianSpec,
    p_axis: AxisSpec,
    q_axis: AxisSpec,
) -> Result<(Vec<f64>, Vec<bool>), HjError> {
    if hamiltonian.dim() != 1 {
        return Err(HjError::UnsupportedDimension {
            n: hamiltonian.dim(),
        });
    }
    if !p_axis.is_valid() || !q_axis.is_valid() || p_axis.nodes < 3 {
        return Err(HjError::BadAxis);
    }
    let candidates: Vec<(f64, f64)> = p_axis
        .coords()
        .iter()
        .map(|&p| (p, hamiltonian.eval(&[p])))
        .collect();
    Ok(conjugate_values(&candidates, &q_axis.coords()))
}

/// Conjugate of a tabulated function, scanning its finite nodes as the
/// momentum grid. Used for round-trip (involution) checks.
pub fn legendre_transform_table(
    table: &LagrangianTable,
    q_axis: AxisSpec,
) -> Result<LagrangianTable, HjError> {
    if !q_axis.is_valid() {
        return Err(HjError::BadAxis);
    }
    let (first, last) = table.finite_range();
    if last - first < 2 {
        return Err(HjError::EmptyTable);
    }
    let coords = table.q_axis().coords();
    let candidates: Vec<(f64, f64)> = (first..=last)
        .map(|j| (coords[j], table.value(j)))
        .collect();
    let (values, bracketed) = conjugate_values(&candidates, &q_axis.coords());
    let offending: Vec<f64> = q_axis
        .coords()
        .iter()
        .zip(&bracketed)
        .filter(|(_, &ok)| !ok)
        .map(|(&q, _)| q)
        .collect();
    if !offending.is_empty() {
        return Err(HjError::SupremumNotBracketed { q_nodes: offending });
    }
    LagrangianTable::new(q_axis, values)
}

/// One midpoint-inequality violation: f(mid) exceeds the chord average.
#[derive(Debug, Clone, PartialEq)]
pub struct MidpointViolation {
    pub left: usize,
    pub mid: usize,
    pub right: usize,
    pub excess: f64,
}

/// Outcome of the convexity and superlinearity probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub convex: bool,
    pub violations: Vec<MidpointViolation>,
    pub superlinear: bool,
    /// Growth of f(q)/|q| from the half-radius shell to the outermost shell.
    pub growth_ratio: f64,
}

/// Checks midpoint convexity (f(mid) <= chord average + tolerance) over
/// same-parity node pairs and probes superlinear growth by comparing
/// f(q)/|q| on the outermost nodes against the half-radius nodes.
pub fn verify_convex_superlinear(axis: AxisSpec, values: &[f64]) -> ConvexityReport {
    assert_eq!(values.len(), axis.nodes, "value count must match the axis");
    let n = axis.nodes;
    let mut violations = Vec::new();
    let check = |i: usize, j: usize, violations: &mut Vec<MidpointViolation>| {
        let m = (i + j) / 2;
        let chord = 0.5 * (values[i] + values[j]);
        if chord.is_nan() || chord == f64::INFINITY {
            return;
        }
        let excess = values[m] - chord;
        if excess > CONVEXITY_TOL {
            violations.push(MidpointViolation {
                left: i,
                mid: m,
                right: j,
                excess,
            });
        }
    };
    let mut span = 2;
    while span < n {
        for i in 0..n - span {
            check(i, i + span, &mut violations);
        }
        span *= 2;
    }
    violations.truncate(32);

    let ratio_at = |j: usize| -> Option<f64> {
        let q = axis.coord(j);
        (q.abs() > 1e-12 && values[j].is_finite()).then(|| values[j] / q.abs())
    };
    let nearest = |target: f64| -> usize {
        ((target - axis.x_min) / axis.step()).round().clamp(0.0, (n - 1) as f64) as usize
    };
    let mut growth_ratio = f64::NAN;
    for end in [0, n - 1] {
        let outer = match ratio_at(end) {
            Some(r) => r,
            None => continue,
        };
        let inner_idx = nearest(axis.coord(end) / 2.0);
        let inner = match ratio_at(inner_idx) {
            Some(r) => r,
            None => continue,
        };
        let g = if inner > 0.0 {
            outer / inner
        } else if outer > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        if growth_ratio.is_nan() || g > growth_ratio {
            growth_ratio = g;
        }
    }
    ConvexityReport {
        convex: violations.is_empty(),
        violations,
        superlinear: growth_ratio >= SUPERLINEAR_GROWTH,
        growth_ratio,
    }
}

/// A refined Hopf-Lax value with its minimizer and the search bound used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfLaxValue {
    pub value: f64,
    pub argmin: f64,
    /// Certified spatial search radius t * R around x (see
    /// [`bracketing_radius`]).
    pub bracket_radius: f64,
}

/// Velocity-space radius R beyond which no minimizer can lie: outside it
/// L(q) exceeds L(0) + Lip(g) |q|, so staying at y = x is always cheaper.
/// One grid step of margin is added.
pub fn bracketing_radius(problem: &HJProblem, table: &LagrangianTable) -> f64 {
    let coords = table.q_axis().coords();
    let (first, last) = table.finite_range();
    let zero_idx = ((0.0 - table.q_axis().x_min) / table.q_axis().step())
        .round()
        .clamp(first as f64, last as f64) as usize;
    let l0 = table.value(zero_idx);
    let lip = problem.lipschitz_bound();
    let mut r: f64 = 0.0;
    for (j, &q) in coords.iter().enumerate().take(last + 1).skip(first) {
        if table.value(j) <= l0 + lip * q.abs() {
            r = r.max(q.abs());
        }
    }
    r + table.q_axis().step()
}

/// Uniform y grid centered on x covering the certified minimizer bracket
/// for evaluation at time t.
pub fn suggested_y_axis(
    problem: &HJProblem,
    table: &LagrangianTable,
    x: f64,
    t: f64,
    nodes: usize,
) -> AxisSpec {
    let radius = t * bracketing_radius(problem, table);
    AxisSpec::new(x - radius, x + radius, nodes)
}

fn objective(problem: &HJProblem, table: &LagrangianTable, x: f64, t: f64, y: f64) -> Option<f64> {
    let q = (x - y) / t;
    table
        .interpolate(q)
        .filter(|l| l.is_finite())
        .map(|l| t * l + problem.initial(y))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of f over [a, b]; f may return +inf near the
/// bracket edges. Returns (argmin, min).
fn golden_min(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Hopf-Lax value U(x, t) = min over y of { t L((x-y)/t) + g(y) }: grid scan
/// over y_axis, then golden-section refinement in the winning cell.
pub fn hopf_lax_evaluate(
    problem: &HJProblem,
    table: &LagrangianTable,
    x: f64,
    t: f64,
    y_axis: AxisSpec,
) -> Result<HopfLaxValue, HjError> {
    if !(t > 0.0) {
        return Err(HjError::NonPositiveTime { t });
    }
    if !y_axis.is_valid() {
        return Err(HjError::BadAxis);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for (j, &y) in y_axis.coords().iter().enumerate() {
        if let Some(v) = objective(problem, table, x, t, y) {
            if best.is_none_or(|(_, _, bv)| v < bv) {
                best = Some((j, y, v));
            }
        }
    }
    let (j, y_best, v_best) = best.ok_or(HjError::LagrangianGapped { x, t })?;
    if j == 0 || j + 1 == y_axis.nodes {
        return Err(HjError::MinimizerOnBoundary { x, t, argmin: y_best });
    }
    let h = y_axis.step();
    let (argmin, value) = refine(problem, table, x, t, y_best, v_best, h);
    Ok(HopfLaxValue {
        value,
        argmin,
        bracket_radius: t * bracketing_radius(problem, table),
    })
}

fn refine(
    problem: &HJProblem,
    table: &LagrangianTable,
    x: f64,
    t: f64,
    y_best: f64,
    v_best: f64,
    h: f64,
) -> (f64, f64) {
    let f = |y: f64| objective(problem, table, x, t, y).unwrap_or(f64::INFINITY);
    let (yg, vg) = golden_min(y_best - h, y_best + h, f);
    if vg < v_best {
        (yg, vg)
    } else {
        (y_best, v_best)
    }
}

/// Solves U on x_grid at each requested time (ascending, starting at >= 0).
///
/// A time of exactly 0 reports g sampled on the grid. For t > 0 the y scan
/// is aligned with the table: y = x - t q_k over the finite table nodes
/// within the certified bracket, so L is read off exactly and only g is
/// evaluated off-grid; golden-section refinement then polishes the winner.
pub fn hopf_lax_solve(
    problem: &HJProblem,
    table: &LagrangianTable,
    x_axis: AxisSpec,
    times: &[f64],
) -> Result<ValueSurface, HjError> {
    if !x_axis.is_valid() {
        return Err(HjError::BadAxis);
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(HjError::BadTimes {
            t1: *times.first().unwrap_or(&f64::NAN),
            t2: *times.last().unwrap_or(&f64::NAN),
        });
    }
    let coords = table.q_axis().coords();
    let (first, last) = table.finite_range();
    let radius = bracketing_radius(problem, table);
    // Restrict the scan to |q| <= R; fall back to the whole finite run if
    // that window is empty (asymmetric tables).
    let mut w_lo = first;
    let mut w_hi = last;
    while w_lo < w_hi && coords[w_lo] < -radius {
        w_lo += 1;
    }
    while w_hi > w_lo && coords[w_hi] > radius {
        w_hi -= 1;
    }
    if w_lo >= w_hi {
        w_lo = first;
        w_hi = last;
    }

    let xs = x_axis.coords();
    let mut slices = Vec::with_capacity(times.len());
    for &t in times {
        if t == 0.0 {
            slices.push(xs.iter().map(|&x| problem.initial(x)).collect());
            continue;
        }
        let slice: Vec<f64> = xs
            .par_iter()
            .map(|&x| {
                let scan = |a: usize, b: usize| {
                    let mut best = (w_lo, f64::INFINITY);
                    for (k, &qk) in coords.iter().enumerate().take(b + 1).skip(a) {
                        let y = x - t * qk;
                        let v = t * table.value(k) + problem.initial(y);
                        if v < best.1 {
                            best = (k, v);
                        }
                    }
                    best
                };
                let (mut k, mut v) = scan(w_lo, w_hi);
                if (k == w_lo && w_lo > first) || (k == w_hi && w_hi < last) {
                    // Bracket estimate too tight for this x; rescan fully.
                    (k, v) = scan(first, last);
                }
                let y = x - t * coords[k];
                refine(problem, table, x, t, y, v, t * table.q_axis().step()).1
            })
            .collect();
        slices.push(slice);
    }
    Ok(ValueSurface::new(vec![x_axis], times.to_vec(), slices)
        .expect("hopf-lax output is well-formed"))
}

/// Dynamic-programming residual: solve to t2 directly, versus solving to t1,
/// restarting from the (piecewise-linear interpolated) t1 slice, and
/// continuing for t2 - t1. Returns the max absolute deviation on x_grid.
/// Zero by construction when t1 == t2.
pub fn semigroup_residual(
    problem: &HJProblem,
    table: &LagrangianTable,
    x_axis: AxisSpec,
    t1: f64,
    t2: f64,
) -> Result<f64, HjError> {
    if !(t1 > 0.0) || t2 < t1 {
        return Err(HjError::BadTimes { t1, t2 });
    }
    if t1 == t2 {
        return Ok(0.0);
    }
    let direct = hopf_lax_solve(problem, table, x_axis, &[t2])?;
    let stage = hopf_lax_solve(problem, table, x_axis, &[t1])?;
    let stage_values: Vec<f64> = stage.slice(0).to_vec();
    let restart_initial = move |x: f64| interp_linear_extrapolating(x_axis, &stage_values, x);
    let restarted_problem = HJProblem::new(
        problem.hamiltonian.clone(),
        problem.lipschitz_bound(),
        restart_initial,
    )?;
    let restarted = hopf_lax_solve(&restarted_problem, table, x_axis, &[t2 - t1])?;
    let mut worst = 0.0_f64;
    for j in 0..x_axis.nodes {
        worst = worst.max((direct.slice(0)[j] - restarted.slice(0)[j]).abs());
    }
    Ok(worst)
}

/// Piecewise-linear evaluation that extends the end segments beyond the
/// hull (the restart initial datum must be total on R).
fn interp_linear_extrapolating(axis: AxisSpec, values: &[f64], x: f64) -> f64 {
    let pos = (x - axis.x_min) / axis.step();
    let j = (pos.floor() as isize).clamp(0, axis.nodes as isize - 2) as usize;
    let frac = pos - j as f64;
    values[j] + frac * (values[j + 1] - values[j])
}

/// Largest difference quotient |f(a) - f(b)| / ||a - b|| over the supplied
/// pairs: a lower bound on the Lipschitz constant.
pub fn lipschitz_estimate(
    f: impl Fn(&[f64]) -> f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<f64, HjError> {
    let mut best = 0.0_f64;
    for (index, (a, b)) in pairs.iter().enumerate() {
        let dist = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            return Err(HjError::CoincidentPair { index });
        }
        best = best.max((f(a) - f(b)).abs() / dist);
    }
    Ok(best)
}
