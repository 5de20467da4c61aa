//! One-dimensional theta scheme on a uniform log-price axis.
//!
//! Each step solves (I - theta dtau L) u_next = (I + (1-theta) dtau L) u with
//! L the tridiagonal discretization of a d2/dx2 + b d/dx + c. theta = 0.5 is
//! Crank-Nicolson, theta = 1 fully implicit, theta = 0 explicit.

use crate::grid::AxisSpec;
use crate::pde::ConvectionDiffusionCoefficients;

/// Tridiagonal stencil rows stored as (lo, mid, hi) bands; lo[0] and
/// hi[last] are unused.
pub(super) struct Bands {
    pub lo: Vec<f64>,
    pub mid: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Discretizes a d2/dx2 + b d/dx + c on a uniform axis with a zero-gradient
/// ghost at the low edge and an s-linear ghost at the high edge.
///
/// Low edge, reflected ghost u[-1] = u[1]:  L u_0 = 2a/h^2 (u_1 - u_0) + c u_0.
/// High edge, ghost u[M] = u[M-1] + e^h (u[M-1] - u[M-2]) (exact for values
/// affine in s = e^x): L u_{M-1} = kappa (u_{M-1} - u_{M-2}) + c u_{M-1} with
/// kappa = a (e^h - 1)/h^2 + b (1 + e^h)/(2h).
pub(super) fn operator_bands(a: f64, b: f64, c: f64, axis: AxisSpec) -> Bands {
    let m = axis.nodes;
    let h = axis.step();
    let mut lo = vec![0.0; m];
    let mut mid = vec![0.0; m];
    let mut hi = vec![0.0; m];
    for j in 1..m - 1 {
        lo[j] = a / (h * h) - b / (2.0 * h);
        mid[j] = -2.0 * a / (h * h) + c;
        hi[j] = a / (h * h) + b / (2.0 * h);
    }
    mid[0] = -2.0 * a / (h * h) + c;
    hi[0] = 2.0 * a / (h * h);
    let eh = h.exp();
    let kappa = a * (eh - 1.0) / (h * h) + b * (1.0 + eh) / (2.0 * h);
    lo[m - 1] = -kappa;
    mid[m - 1] = kappa + c;
    Bands { lo, mid, hi }
}

impl Bands {
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        out[0] = self.mid[0] * u[0] + self.hi[0] * u[1];
        for j in 1..m - 1 {
            out[j] = self.lo[j] * u[j - 1] + self.mid[j] * u[j] + self.hi[j] * u[j + 1];
        }
        out[m - 1] = self.lo[m - 1] * u[m - 2] + self.mid[m - 1] * u[m - 1];
    }
}

/// Thomas algorithm for a tridiagonal system; scratch holds the modified
/// upper band and right-hand side.
pub(super) fn solve_tridiagonal(
    lo: &[f64],
    mid: &[f64],
    hi: &[f64],
    rhs: &[f64],
    scratch: &mut (Vec<f64>, Vec<f64>),
    out: &mut [f64],
) {
    let m = rhs.len();
    let (cp, dp) = scratch;
    cp.resize(m, 0.0);
    dp.resize(m, 0.0);
    cp[0] = hi[0] / mid[0];
    dp[0] = rhs[0] / mid[0];
    for j in 1..m {
        let w = mid[j] - lo[j] * cp[j - 1];
        cp[j] = hi[j] / w;
        dp[j] = (rhs[j] - lo[j] * dp[j - 1]) / w;
    }
    out[m - 1] = dp[m - 1];
    for j in (0..m - 1).rev() {
        out[j] = dp[j] - cp[j] * out[j + 1];
    }
}

/// Steps the payoff from tau = 0 to tau = maturity and returns the value
/// slices ascending in calendar time t = maturity - tau (so index 0 is the
/// valuation-date slice and the last index is the payoff).
pub(super) fn solve(
    coeffs: &ConvectionDiffusionCoefficients,
    axis: AxisSpec,
    time_steps: usize,
    theta: f64,
    maturity: f64,
    payoff: impl Fn(f64) -> f64,
) -> Vec<Vec<f64>> {
    let m = axis.nodes;
    let dtau = maturity / time_steps as f64;
    let bands = operator_bands(
        coeffs.diffusion(0, 0),
        coeffs.convection(0),
        coeffs.reaction(),
        axis,
    );
    // Implicit matrix I - theta dtau L.
    let ilo: Vec<f64> = bands.lo.iter().map(|&v| -theta * dtau * v).collect();
    let imid: Vec<f64> = bands.mid.iter().map(|&v| 1.0 - theta * dtau * v).collect();
    let ihi: Vec<f64> = bands.hi.iter().map(|&v| -theta * dtau * v).collect();

    let mut u: Vec<f64> = axis.coords().iter().map(|&x| payoff(x.exp())).collect();
    let mut snapshots = Vec::with_capacity(time_steps + 1);
    snapshots.push(u.clone());
    let mut lu = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut scratch = (Vec::new(), Vec::new());
    for _ in 0..time_steps {
        bands.apply(&u, &mut lu);
        for j in 0..m {
            rhs[j] = u[j] + (1.0 - theta) * dtau * lu[j];
        }
        if theta == 0.0 {
            next.copy_from_slice(&rhs);
        } else {
            solve_tridiagonal(&ilo, &imid, &ihi, &rhs, &mut scratch, &mut next);
        }
        std::mem::swap(&mut u, &mut next);
        snapshots.push(u.clone());
    }
    snapshots.reverse();
    snapshots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisSpec;
    use crate::market::{CorrelationMatrix, MarketModel, OptionSpec};
    use crate::pde::{
        bs_closed_form_1d, delta_vector, norm_cdf, solve_bs_pde, GridSpec, Scheme,
    };

    fn model_1d(vol: f64, rate: f64) -> crate::market::ValidatedModel {
        MarketModel::new(vec![100.0], vec![vol], rate, CorrelationMatrix::identity(1))
            .validate()
            .unwrap()
    }

    fn price_grid(nodes: usize, steps: usize, theta: f64) -> crate::grid::ValueSurface {
        let model = model_1d(0.2, 0.05);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let center = 100.0_f64.ln();
        let grid = GridSpec {
            axes: vec![AxisSpec::new(center - 1.0, center + 1.0, nodes)],
            time_steps: steps,
            scheme: Scheme::Theta1d,
            theta,
        };
        solve_bs_pde(&model, &option, &grid).unwrap()
    }

    #[test]
    fn tridiagonal_solver_reproduces_known_system() {
        // [2 1; 1 2 1; 1 2] x = [4, 8, 8] has solution [1, 2, 3].
        let lo = [0.0, 1.0, 1.0];
        let mid = [2.0, 2.0, 2.0];
        let hi = [1.0, 1.0, 0.0];
        let rhs = [4.0, 8.0, 8.0];
        let mut out = [0.0; 3];
        solve_tridiagonal(&lo, &mid, &hi, &rhs, &mut (Vec::new(), Vec::new()), &mut out);
        for (got, want) in out.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn high_edge_stencil_annihilates_s_affine_values() {
        // u = 3 + 2 e^x is in the ghost's exact family, so the last-row
        // second-difference part must vanish and only convection/reaction act.
        let axis = AxisSpec::new(0.0, 1.0, 41);
        let (a, b, c) = (0.02, 0.03, -0.05);
        let bands = operator_bands(a, b, c, axis);
        let u: Vec<f64> = axis.coords().iter().map(|&x| 3.0 + 2.0 * x.exp()).collect();
        let mut lu = vec![0.0; 41];
        bands.apply(&u, &mut lu);
        let x = axis.coord(40);
        // Exact operator on 3 + 2 e^x: (a + b) 2 e^x + c u, with the a-part
        // discretized by the one-sided pair; expect agreement to O(h^2).
        let want = (a + b) * 2.0 * x.exp() + c * u[40];
        assert!(
            (lu[40] - want).abs() < 2e-3 * want.abs(),
            "got {} want {}",
            lu[40],
            want
        );
    }

    #[test]
    fn crank_nicolson_matches_closed_form_at_spot() {
        let surface = price_grid(201, 200, 0.5);
        let price = surface.interpolate(0, &[100.0_f64.ln()]).unwrap();
        let cf = bs_closed_form_1d(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!(
            (price - cf).abs() < 0.01,
            "pde {price} vs closed form {cf}"
        );
    }

    #[test]
    fn implicit_scheme_converges_more_slowly_but_converges() {
        let surface = price_grid(201, 200, 1.0);
        let price = surface.interpolate(0, &[100.0_f64.ln()]).unwrap();
        let cf = bs_closed_form_1d(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!((price - cf).abs() < 0.05, "pde {price} vs closed form {cf}");
    }

    #[test]
    fn explicit_theta_zero_is_stable_below_diffusion_limit() {
        // h = 0.02 gives a diffusion limit dtau <= h^2 / (2a) = 0.01;
        // 800 steps over T = 1 stays well inside it.
        let surface = price_grid(101, 800, 0.0);
        let price = surface.interpolate(0, &[100.0_f64.ln()]).unwrap();
        let cf = bs_closed_form_1d(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!((price - cf).abs() < 0.05, "pde {price} vs closed form {cf}");
    }

    #[test]
    fn terminal_slice_is_exact_payoff() {
        let surface = price_grid(101, 10, 0.5);
        let last = surface.times().len() - 1;
        for (j, &x) in surface.axes()[0].coords().iter().enumerate() {
            let want = (x.exp() - 100.0).max(0.0);
            assert_eq!(surface.value(last, &[j]), want);
        }
    }

    #[test]
    fn value_stays_between_payoff_bound_and_spot() {
        let surface = price_grid(201, 200, 0.5);
        let axis = surface.axes()[0];
        for (k, &t) in surface.times().iter().enumerate() {
            let tau = 1.0 - t;
            let df = (-0.05 * tau).exp();
            for j in 0..axis.nodes {
                let s = axis.coord(j).exp();
                let v = surface.value(k, &[j]);
                let lower = (s - 100.0 * df).max(0.0);
                assert!(
                    v >= lower - 1e-6,
                    "t={t} s={s}: value {v} below forward bound {lower}"
                );
                assert!(v <= s + 1e-9, "t={t} s={s}: value {v} above spot");
            }
        }
    }

    #[test]
    fn delta_matches_closed_form_gradient() {
        let surface = price_grid(201, 200, 0.5);
        // Node 100 sits exactly at x = ln 100.
        let deltas = delta_vector(&surface, 0, &[100]).unwrap();
        let d1 = ((0.05 + 0.02) * 1.0) / 0.2;
        let want = norm_cdf(d1);
        assert!(
            (deltas[0] - want).abs() < 2e-3,
            "delta {} vs closed form {}",
            deltas[0],
            want
        );
    }

    #[test]
    fn delta_rejects_boundary_nodes() {
        let surface = price_grid(11, 2, 0.5);
        assert!(matches!(
            delta_vector(&surface, 0, &[0]),
            Err(crate::pde::PdeError::BoundaryPoint { axis: 0 })
        ));
        assert!(matches!(
            delta_vector(&surface, 0, &[10]),
            Err(crate::pde::PdeError::BoundaryPoint { axis: 0 })
        ));
    }
}
