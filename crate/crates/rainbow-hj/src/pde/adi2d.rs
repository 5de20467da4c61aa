//! Two-dimensional schemes: Douglas-style ADI with explicit cross term and a
//! Craig-Sneyd corrector, and a fully explicit scheme guarded by a CFL check.
//!
//! Splitting: A1 and A2 are the one-dimensional operators along each axis
//! (each carrying half the reaction term), A0 is the mixed derivative. One
//! step with weight theta = 1/2:
//!
//! ```text
//! y0 = u + dtau (A0 + A1 + A2) u            predictor (Douglas)
//! (I - theta dtau A1) y1 = y0 - theta dtau A1 u
//! (I - theta dtau A2) y2 = y1 - theta dtau A2 u
//! z0 = y0 + (dtau / 2) (A0 y2 - A0 u)       corrector (Craig-Sneyd)
//! (I - theta dtau A1) z1 = z0 - theta dtau A1 u
//! (I - theta dtau A2) z2 = z1 - theta dtau A2 u
//! ```
//!
//! The corrector re-evaluates the explicit mixed term at the predicted
//! state; without it the splitting is only first order in time whenever the
//! assets are correlated. The step is run in both sweep orders (A1 first,
//! then A2 first) and the results averaged, which restores the scheme's
//! symmetry under swapping the two assets.
//!
//! Grid layout is row-major with the second axis fastest: node (i1, i2) is
//! flat index i1 * n2 + i2.

use crate::grid::AxisSpec;
use crate::pde::theta1d::{operator_bands, solve_tridiagonal, Bands};
use crate::pde::{ConvectionDiffusionCoefficients, PdeError};

const ADI_THETA: f64 = 0.5;

struct Op2d {
    n1: usize,
    n2: usize,
    bands: [Bands; 2],
    /// Full mixed-derivative coefficient rho sigma1 sigma2.
    cross: f64,
    steps: [f64; 2],
    /// e^{h} per axis, for the s-linear ghost extension.
    ehs: [f64; 2],
}

impl Op2d {
    fn new(coeffs: &ConvectionDiffusionCoefficients, axes: [AxisSpec; 2]) -> Self {
        let half_reaction = 0.5 * coeffs.reaction();
        Op2d {
            n1: axes[0].nodes,
            n2: axes[1].nodes,
            bands: [
                operator_bands(
                    coeffs.diffusion(0, 0),
                    coeffs.convection(0),
                    half_reaction,
                    axes[0],
                ),
                operator_bands(
                    coeffs.diffusion(1, 1),
                    coeffs.convection(1),
                    half_reaction,
                    axes[1],
                ),
            ],
            cross: coeffs.cross_total(0, 1),
            steps: [axes[0].step(), axes[1].step()],
            ehs: [axes[0].step().exp(), axes[1].step().exp()],
        }
    }

    /// Applies the directional operator A_{d+1} to the full array.
    fn apply_dir(&self, d: usize, u: &[f64], out: &mut [f64], line: &mut Line) {
        match d {
            0 => {
                for i2 in 0..self.n2 {
                    gather(u, self.n1, self.n2, i2, &mut line.a);
                    line.b.resize(self.n1, 0.0);
                    self.bands[0].apply(&line.a, &mut line.b);
                    scatter(&line.b, self.n1, self.n2, i2, out);
                }
            }
            _ => {
                for i1 in 0..self.n1 {
                    let row = &u[i1 * self.n2..(i1 + 1) * self.n2];
                    self.bands[1].apply(row, &mut out[i1 * self.n2..(i1 + 1) * self.n2]);
                }
            }
        }
    }

    /// Applies the mixed term A0 = cross * d2/dx1 dx2 with the same ghost
    /// extensions as the directional stencils (the two extensions commute,
    /// so corner ghosts are unambiguous).
    fn apply_cross(&self, u: &[f64], out: &mut [f64]) {
        let scale = self.cross / (4.0 * self.steps[0] * self.steps[1]);
        let (n1, n2) = (self.n1, self.n2);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let v = if i1 > 0 && i1 + 1 < n1 && i2 > 0 && i2 + 1 < n2 {
                    u[(i1 + 1) * n2 + i2 + 1] - u[(i1 + 1) * n2 + i2 - 1]
                        - u[(i1 - 1) * n2 + i2 + 1]
                        + u[(i1 - 1) * n2 + i2 - 1]
                } else {
                    let (j1, j2) = (i1 as isize, i2 as isize);
                    ghost(u, n1, n2, self.ehs, j1 + 1, j2 + 1)
                        - ghost(u, n1, n2, self.ehs, j1 + 1, j2 - 1)
                        - ghost(u, n1, n2, self.ehs, j1 - 1, j2 + 1)
                        + ghost(u, n1, n2, self.ehs, j1 - 1, j2 - 1)
                };
                out[i1 * n2 + i2] = scale * v;
            }
        }
    }
}

/// Value at a (possibly ghost) index pair: reflected at the low edges,
/// s-linear extension at the high edges, recursing at corners.
fn ghost(u: &[f64], n1: usize, n2: usize, ehs: [f64; 2], i1: isize, i2: isize) -> f64 {
    if i1 < 0 {
        return ghost(u, n1, n2, ehs, 1, i2);
    }
    if i1 >= n1 as isize {
        let a = ghost(u, n1, n2, ehs, n1 as isize - 1, i2);
        let b = ghost(u, n1, n2, ehs, n1 as isize - 2, i2);
        return a + ehs[0] * (a - b);
    }
    if i2 < 0 {
        return ghost(u, n1, n2, ehs, i1, 1);
    }
    if i2 >= n2 as isize {
        let a = ghost(u, n1, n2, ehs, i1, n2 as isize - 1);
        let b = ghost(u, n1, n2, ehs, i1, n2 as isize - 2);
        return a + ehs[1] * (a - b);
    }
    u[i1 as usize * n2 + i2 as usize]
}

struct Line {
    a: Vec<f64>,
    b: Vec<f64>,
    scratch: (Vec<f64>, Vec<f64>),
}

fn gather(u: &[f64], n1: usize, n2: usize, i2: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..n1).map(|i1| u[i1 * n2 + i2]));
}

fn scatter(line: &[f64], n1: usize, n2: usize, i2: usize, out: &mut [f64]) {
    for i1 in 0..n1 {
        out[i1 * n2 + i2] = line[i1];
    }
}

/// Bands of I - theta dtau A_d.
fn implicit_bands(bands: &Bands, dtau: f64) -> Bands {
    Bands {
        lo: bands.lo.iter().map(|&v| -ADI_THETA * dtau * v).collect(),
        mid: bands
            .mid
            .iter()
            .map(|&v| 1.0 - ADI_THETA * dtau * v)
            .collect(),
        hi: bands.hi.iter().map(|&v| -ADI_THETA * dtau * v).collect(),
    }
}

fn solve_dir(
    op: &Op2d,
    imp: &Bands,
    d: usize,
    rhs: &[f64],
    out: &mut [f64],
    line: &mut Line,
) {
    match d {
        0 => {
            for i2 in 0..op.n2 {
                gather(rhs, op.n1, op.n2, i2, &mut line.a);
                line.b.resize(op.n1, 0.0);
                solve_tridiagonal(&imp.lo, &imp.mid, &imp.hi, &line.a, &mut line.scratch, &mut line.b);
                scatter(&line.b, op.n1, op.n2, i2, out);
            }
        }
        _ => {
            for i1 in 0..op.n1 {
                let row = &rhs[i1 * op.n2..(i1 + 1) * op.n2];
                solve_tridiagonal(
                    &imp.lo,
                    &imp.mid,
                    &imp.hi,
                    row,
                    &mut line.scratch,
                    &mut out[i1 * op.n2..(i1 + 1) * op.n2],
                );
            }
        }
    }
}

fn payoff_slice(axes: [AxisSpec; 2], payoff: &impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let coords1 = axes[0].coords();
    let coords2 = axes[1].coords();
    let mut u = Vec::with_capacity(coords1.len() * coords2.len());
    for &x1 in &coords1 {
        for &x2 in &coords2 {
            u.push(payoff(&[x1.exp(), x2.exp()]));
        }
    }
    u
}

/// Scratch buffers reused across the time loop.
struct Workspace {
    a0u: Vec<f64>,
    a1u: Vec<f64>,
    a2u: Vec<f64>,
    y0: Vec<f64>,
    rhs: Vec<f64>,
    stage: Vec<f64>,
    pred: Vec<f64>,
    base: Vec<f64>,
    fwd: Vec<f64>,
    rev: Vec<f64>,
    line: Line,
}

impl Workspace {
    fn new(sz: usize) -> Self {
        Workspace {
            a0u: vec![0.0; sz],
            a1u: vec![0.0; sz],
            a2u: vec![0.0; sz],
            y0: vec![0.0; sz],
            rhs: vec![0.0; sz],
            stage: vec![0.0; sz],
            pred: vec![0.0; sz],
            base: vec![0.0; sz],
            fwd: vec![0.0; sz],
            rev: vec![0.0; sz],
            line: Line {
                a: Vec::new(),
                b: Vec::new(),
                scratch: (Vec::new(), Vec::new()),
            },
        }
    }
}

/// Two implicit sweeps (I - theta dtau A_d) starting from `base`, directions
/// taken in the order (first, other); the result lands in `out`.
#[allow(clippy::too_many_arguments)]
fn sweep_pair(
    op: &Op2d,
    imp: &[Bands; 2],
    dtau: f64,
    base: &[f64],
    a_dir: [&[f64]; 2],
    first: usize,
    rhs: &mut [f64],
    stage: &mut [f64],
    out: &mut [f64],
    line: &mut Line,
) {
    let second = 1 - first;
    for k in 0..base.len() {
        rhs[k] = base[k] - ADI_THETA * dtau * a_dir[first][k];
    }
    solve_dir(op, &imp[first], first, rhs, stage, line);
    for k in 0..base.len() {
        rhs[k] = stage[k] - ADI_THETA * dtau * a_dir[second][k];
    }
    solve_dir(op, &imp[second], second, rhs, out, line);
}

/// One time step in a fixed sweep order: Douglas predictor followed by a
/// Craig-Sneyd corrector that re-evaluates the explicit mixed term at the
/// predicted state. The corrector restores second order in time, which the
/// plain Douglas splitting loses whenever the mixed term is active.
#[allow(clippy::too_many_arguments)]
fn step_one_order(op: &Op2d, imp: &[Bands; 2], dtau: f64, first: usize, ws: &mut Workspace) {
    let sz = ws.y0.len();
    // Predictor.
    sweep_pair(
        op,
        imp,
        dtau,
        &ws.y0,
        [&ws.a1u, &ws.a2u],
        first,
        &mut ws.rhs,
        &mut ws.stage,
        &mut ws.pred,
        &mut ws.line,
    );
    // Corrector base: y0 + (dtau / 2) (A0 pred - A0 u).
    op.apply_cross(&ws.pred, &mut ws.base);
    for k in 0..sz {
        ws.base[k] = ws.y0[k] + 0.5 * dtau * (ws.base[k] - ws.a0u[k]);
    }
    let out = if first == 0 { &mut ws.fwd } else { &mut ws.rev };
    sweep_pair(
        op,
        imp,
        dtau,
        &ws.base,
        [&ws.a1u, &ws.a2u],
        first,
        &mut ws.rhs,
        &mut ws.stage,
        out,
        &mut ws.line,
    );
}

// Indexed loops march several same-length buffers in lockstep.
#[allow(clippy::needless_range_loop)]
pub(super) fn solve_douglas(
    coeffs: &ConvectionDiffusionCoefficients,
    axes: [AxisSpec; 2],
    time_steps: usize,
    maturity: f64,
    payoff: impl Fn(&[f64]) -> f64,
) -> Vec<Vec<f64>> {
    let op = Op2d::new(coeffs, axes);
    let sz = op.n1 * op.n2;
    let dtau = maturity / time_steps as f64;
    let imp = [implicit_bands(&op.bands[0], dtau), implicit_bands(&op.bands[1], dtau)];

    let mut u = payoff_slice(axes, &payoff);
    let mut snapshots = Vec::with_capacity(time_steps + 1);
    snapshots.push(u.clone());
    let mut ws = Workspace::new(sz);

    for _ in 0..time_steps {
        op.apply_dir(0, &u, &mut ws.a1u, &mut ws.line);
        op.apply_dir(1, &u, &mut ws.a2u, &mut ws.line);
        op.apply_cross(&u, &mut ws.a0u);
        for k in 0..sz {
            ws.y0[k] = u[k] + dtau * (ws.a0u[k] + ws.a1u[k] + ws.a2u[k]);
        }
        // Run both sweep orders and average; a single fixed order breaks
        // the exact symmetry under swapping the two assets.
        step_one_order(&op, &imp, dtau, 0, &mut ws);
        step_one_order(&op, &imp, dtau, 1, &mut ws);
        for k in 0..sz {
            u[k] = 0.5 * (ws.fwd[k] + ws.rev[k]);
        }
        snapshots.push(u.clone());
    }
    snapshots.reverse();
    snapshots
}

pub(super) fn solve_explicit(
    coeffs: &ConvectionDiffusionCoefficients,
    axes: [AxisSpec; 2],
    time_steps: usize,
    maturity: f64,
    payoff: impl Fn(&[f64]) -> f64,
) -> Result<Vec<Vec<f64>>, PdeError> {
    let op = Op2d::new(coeffs, axes);
    let dtau = maturity / time_steps as f64;
    let (h1, h2) = (op.steps[0], op.steps[1]);
    // Conservative stability bound: sum of the magnitudes each stencil can
    // contribute to the diagonal must stay below 1/dtau.
    let denom = 2.0 * coeffs.diffusion(0, 0) / (h1 * h1)
        + 2.0 * coeffs.diffusion(1, 1) / (h2 * h2)
        + op.cross.abs() / (h1 * h2)
        + coeffs.convection(0).abs() / h1
        + coeffs.convection(1).abs() / h2
        + coeffs.reaction().abs();
    let limit = 1.0 / denom;
    if dtau > limit {
        return Err(PdeError::CflViolation { limit, step: dtau });
    }

    let sz = op.n1 * op.n2;
    let mut u = payoff_slice(axes, &payoff);
    let mut snapshots = Vec::with_capacity(time_steps + 1);
    snapshots.push(u.clone());
    let mut a0u = vec![0.0; sz];
    let mut a1u = vec![0.0; sz];
    let mut a2u = vec![0.0; sz];
    let mut line = Line {
        a: Vec::new(),
        b: Vec::new(),
        scratch: (Vec::new(), Vec::new()),
    };
    for _ in 0..time_steps {
        op.apply_dir(0, &u, &mut a1u, &mut line);
        op.apply_dir(1, &u, &mut a2u, &mut line);
        op.apply_cross(&u, &mut a0u);
        for k in 0..sz {
            u[k] += dtau * (a0u[k] + a1u[k] + a2u[k]);
        }
        snapshots.push(u.clone());
    }
    snapshots.reverse();
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use crate::grid::AxisSpec;
    use crate::market::{CorrelationMatrix, MarketModel, OptionSpec, ValidatedModel};
    use crate::pde::{bs_closed_form_1d, solve_bs_pde, GridSpec, PdeError, Scheme};

    fn model_2d(vols: [f64; 2], rho: f64) -> ValidatedModel {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        MarketModel::new(vec![100.0, 100.0], vols.to_vec(), 0.05, corr)
            .validate()
            .unwrap()
    }

    fn grid_2d(axes: [AxisSpec; 2], steps: usize, scheme: Scheme) -> GridSpec {
        GridSpec {
            axes: axes.to_vec(),
            time_steps: steps,
            scheme,
            theta: 0.5,
        }
    }

    fn centered_axis(spot: f64, half_width: f64, nodes: usize) -> AxisSpec {
        AxisSpec::new(spot.ln() - half_width, spot.ln() + half_width, nodes)
    }

    #[test]
    fn terminal_slice_is_exact_payoff() {
        let model = model_2d([0.2, 0.3], 0.5);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axes = [centered_axis(100.0, 1.0, 11), centered_axis(100.0, 1.0, 13)];
        let surface =
            solve_bs_pde(&model, &option, &grid_2d(axes, 3, Scheme::Adi2d)).unwrap();
        let last = surface.times().len() - 1;
        for i1 in 0..11 {
            for i2 in 0..13 {
                let s1 = axes[0].coord(i1).exp();
                let s2 = axes[1].coord(i2).exp();
                let want = (s1.max(s2) - 100.0).max(0.0);
                assert_eq!(surface.value(last, &[i1, i2]), want);
            }
        }
    }

    #[test]
    fn solution_symmetric_under_asset_swap() {
        // Identical vols and axes: the value surface must be symmetric in
        // (i1, i2) because the averaged sweeps remove the ordering bias.
        let model = model_2d([0.25, 0.25], 0.4);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axis = centered_axis(100.0, 1.0, 41);
        let surface =
            solve_bs_pde(&model, &option, &grid_2d([axis, axis], 50, Scheme::Adi2d)).unwrap();
        let mut worst = 0.0_f64;
        for i1 in 0..41 {
            for i2 in 0..41 {
                let d = (surface.value(0, &[i1, i2]) - surface.value(0, &[i2, i1])).abs();
                worst = worst.max(d);
            }
        }
        assert!(worst < 1e-9, "swap asymmetry {worst}");
    }

    #[test]
    fn degenerate_second_asset_reduces_to_one_dimensional_price() {
        // Asset 2 lives around s = 0.01 so max(s1, s2) = s1 on the whole
        // grid; with rho = 0 the solution must match the 1d solver.
        let model = {
            let corr = CorrelationMatrix::identity(2);
            MarketModel::new(vec![100.0, 0.01], vec![0.2, 0.3], 0.05, corr)
                .validate()
                .unwrap()
        };
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axes = [centered_axis(100.0, 1.0, 101), centered_axis(0.01, 1.0, 41)];
        let surface =
            solve_bs_pde(&model, &option, &grid_2d(axes, 80, Scheme::Adi2d)).unwrap();
        let price = surface
            .interpolate(0, &[100.0_f64.ln(), 0.01_f64.ln()])
            .unwrap();
        let cf = bs_closed_form_1d(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!(
            (price - cf).abs() < 0.01 * cf,
            "2d price {price} vs closed form {cf}"
        );
    }

    #[test]
    fn explicit_agrees_with_adi_inside_cfl_region() {
        let model = model_2d([0.2, 0.3], 0.5);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axes = [centered_axis(100.0, 1.0, 41), centered_axis(100.0, 1.0, 41)];
        let adi = solve_bs_pde(&model, &option, &grid_2d(axes, 100, Scheme::Adi2d)).unwrap();
        let exp =
            solve_bs_pde(&model, &option, &grid_2d(axes, 100, Scheme::Explicit2d)).unwrap();
        let at = [100.0_f64.ln(), 100.0_f64.ln()];
        let pa = adi.interpolate(0, &at).unwrap();
        let pe = exp.interpolate(0, &at).unwrap();
        assert!((pa - pe).abs() < 0.1, "adi {pa} vs explicit {pe}");
    }

    #[test]
    fn explicit_rejects_time_step_above_cfl_limit() {
        let model = model_2d([0.2, 0.3], 0.5);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axes = [centered_axis(100.0, 1.0, 41), centered_axis(100.0, 1.0, 41)];
        let err = solve_bs_pde(&model, &option, &grid_2d(axes, 20, Scheme::Explicit2d))
            .unwrap_err();
        match err {
            PdeError::CflViolation { limit, step } => {
                assert!(step > limit);
                assert!((step - 0.05).abs() < 1e-12);
            }
            other => panic!("expected CflViolation, got {other:?}"),
        }
    }

    #[test]
    fn scheme_dimension_mismatches_are_rejected() {
        let model = model_2d([0.2, 0.3], 0.5);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let one_axis = grid_2d(
            [centered_axis(100.0, 1.0, 11), centered_axis(100.0, 1.0, 11)],
            5,
            Scheme::Theta1d,
        );
        assert!(matches!(
            solve_bs_pde(&model, &option, &one_axis),
            Err(PdeError::SchemeMismatch { .. })
        ));
        let model_1d = MarketModel::new(
            vec![100.0],
            vec![0.2],
            0.05,
            CorrelationMatrix::identity(1),
        )
        .validate()
        .unwrap();
        let wrong_axes = GridSpec {
            axes: vec![centered_axis(100.0, 1.0, 11)],
            time_steps: 5,
            scheme: Scheme::Adi2d,
            theta: 0.5,
        };
        assert!(matches!(
            solve_bs_pde(&model_1d, &option, &wrong_axes),
            Err(PdeError::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn value_dominates_forward_intrinsic_in_the_interior()
    {
        let model = model_2d([0.2, 0.3], 0.5);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let axes = [centered_axis(100.0, 1.2, 61), centered_axis(100.0, 1.2, 61)];
        let surface =
            solve_bs_pde(&model, &option, &grid_2d(axes, 60, Scheme::Adi2d)).unwrap();
        let df = (-0.05_f64).exp();
        for i1 in 15..46 {
            for i2 in 15..46 {
                let s1 = axes[0].coord(i1).exp();
                let s2 = axes[1].coord(i2).exp();
                let v = surface.value(0, &[i1, i2]);
                let bound = (s1.max(s2) - 100.0 * df).max(0.0);
                assert!(
                    v >= bound - 1e-3,
                    "({s1:.2},{s2:.2}): {v} below forward bound {bound}"
                );
            }
        }
    }
}
