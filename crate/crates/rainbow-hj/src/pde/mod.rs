//! Finite-difference pricing of the corrected multi-asset Black-Scholes PDE
//! (n = 1, 2), the one-asset closed form and the normal CDF.
//!
//! In the price variables the equation is
//!
//! ```text
//! dv/dt + sum_i (sigma_i^2/2) s_i^2 d2v/ds_i^2
//!       + sum_{i<j} rho_ij sigma_i sigma_j s_i s_j d2v/ds_i ds_j
//!       + sum_i r s_i dv/ds_i - r v = 0,   v(s, T) = payoff(s).
//! ```
//!
//! The solvers work in log-price coordinates x_i = ln s_i and reversed time
//! tau = T - t, where the coefficients become constant:
//! du/dtau = sum a_ij d2u/dx_i dx_j + sum b_i du/dx_i + c u (see
//! [`to_log_coordinates`] for the coefficient convention).
//!
//! Boundary conditions: zero gradient at each lower edge (the payoff is flat
//! far out of the money), value linear in the price variable s at each upper
//! edge (deep in the money the value approaches s - K e^{-r tau}), both
//! imposed through ghost-node elimination so every scheme stays tridiagonal.

mod adi2d;
mod theta1d;

use thiserror::Error;

use crate::grid::{AxisSpec, ValueSurface};
use crate::market::{payoff_max_call, OptionSpec, ValidatedModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error("PDE solver supports n in {{1, 2}}, got n = {n}")]
    UnsupportedDimension { n: usize },
    #[error("explicit scheme unstable: time step {step} exceeds CFL limit {limit}")]
    CflViolation { limit: f64, step: f64 },
    #[error("axis {axis} has {nodes} nodes, need at least 3")]
    GridTooCoarse { axis: usize, nodes: usize },
    #[error("grid has {got} axes, model has {expected} assets")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("axis {axis} bounds are not finite and increasing")]
    InvalidAxis { axis: usize },
    #[error("theta = {value} outside [0, 1]")]
    InvalidTheta { value: f64 },
    #[error("time_steps must be at least 1")]
    InvalidTimeSteps,
    #[error("scheme {scheme:?} does not apply to a {n}-asset model")]
    SchemeMismatch { scheme: Scheme, n: usize },
    #[error("point touches the grid boundary on axis {axis}")]
    BoundaryPoint { axis: usize },
    #[error("time index {index} out of range ({len} slices)")]
    TimeIndexOutOfRange { index: usize, len: usize },
}

/// Time-stepping scheme identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// One-dimensional theta scheme (theta = 0.5 is Crank-Nicolson).
    Theta1d,
    /// Two-dimensional Douglas-style ADI, cross term explicit, sweeps run in
    /// both orders and averaged.
    Adi2d,
    /// Two-dimensional fully explicit scheme with a CFL guard.
    Explicit2d,
}

/// Space-time discretization request.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
    pub time_steps: usize,
    pub scheme: Scheme,
    /// Implicit weight for the 1d scheme; ignored by the 2d schemes.
    pub theta: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), PdeError> {
        for (axis, a) in self.axes.iter().enumerate() {
            if !a.is_valid() {
                return Err(PdeError::InvalidAxis { axis });
            }
            if a.nodes < 3 {
                return Err(PdeError::GridTooCoarse {
                    axis,
                    nodes: a.nodes,
                });
            }
        }
        if self.time_steps < 1 {
            return Err(PdeError::InvalidTimeSteps);
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(PdeError::InvalidTheta { value: self.theta });
        }
        Ok(())
    }
}

/// Constant coefficients of the log-coordinate equation
/// du/dtau = sum_{i,j} a_ij d2u/dx_i dx_j + sum_i b_i du/dx_i + c u.
///
/// The diffusion matrix is stored symmetrically over ordered pairs: the
/// diagonal holds a_ii = sigma_i^2/2 and each off-diagonal entry holds
/// rho_ij sigma_i sigma_j / 2, so that the two ordered entries of a pair sum
/// to the PDE's single cross coefficient rho_ij sigma_i sigma_j.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvectionDiffusionCoefficients {
    n: usize,
    diffusion: Vec<f64>,
    convection: Vec<f64>,
    reaction: f64,
}

impl ConvectionDiffusionCoefficients {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Symmetric-counting entry a_ij (off-diagonals halved; see type docs).
    pub fn diffusion(&self, i: usize, j: usize) -> f64 {
        self.diffusion[i * self.n + j]
    }

    /// Total coefficient of d2u/dx_i dx_j for i != j: rho_ij sigma_i sigma_j.
    pub fn cross_total(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        2.0 * self.diffusion(i, j)
    }

    pub fn convection(&self, i: usize) -> f64 {
        self.convection[i]
    }

    pub fn reaction(&self) -> f64 {
        self.reaction
    }
}

/// Change of variables x_i = ln s_i, tau = T - t: constant coefficients for
/// the forward-in-tau convection-diffusion-reaction form.
pub fn to_log_coordinates(model: &ValidatedModel) -> ConvectionDiffusionCoefficients {
    let n = model.n();
    let vols = model.vols();
    let mut diffusion = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            diffusion[i * n + j] = if i == j {
                0.5 * vols[i] * vols[i]
            } else {
                0.5 * model.corr().entry(i, j) * vols[i] * vols[j]
            };
        }
    }
    let convection = vols
        .iter()
        .map(|&v| model.rate() - 0.5 * v * v)
        .collect();
    ConvectionDiffusionCoefficients {
        n,
        diffusion,
        convection,
        reaction: -model.rate(),
    }
}

/// Solves the pricing PDE backward from the payoff at t = T to t = 0.
///
/// Returns the value surface on the grid's log-price axes at every computed
/// time level, ascending in t from 0 to T; the t = T slice is the payoff
/// sampled exactly at the nodes.
pub fn solve_bs_pde(
    model: &ValidatedModel,
    option: &OptionSpec,
    grid: &GridSpec,
) -> Result<ValueSurface, PdeError> {
    grid.validate()?;
    let n = model.n();
    if n > 2 {
        return Err(PdeError::UnsupportedDimension { n });
    }
    if grid.axes.len() != n {
        return Err(PdeError::DimensionMismatch {
            expected: n,
            got: grid.axes.len(),
        });
    }
    match (grid.scheme, n) {
        (Scheme::Theta1d, 1) | (Scheme::Adi2d, 2) | (Scheme::Explicit2d, 2) => {}
        (scheme, n) => return Err(PdeError::SchemeMismatch { scheme, n }),
    }

    let coeffs = to_log_coordinates(model);
    let strike = option.strike;
    let maturity = option.maturity;
    let slices = match grid.scheme {
        Scheme::Theta1d => theta1d::solve(
            &coeffs,
            grid.axes[0],
            grid.time_steps,
            grid.theta,
            maturity,
            |s| payoff_max_call(&[s], strike).expect("single spot"),
        ),
        Scheme::Adi2d => adi2d::solve_douglas(
            &coeffs,
            [grid.axes[0], grid.axes[1]],
            grid.time_steps,
            maturity,
            |s| payoff_max_call(s, strike).expect("two spots"),
        ),
        Scheme::Explicit2d => adi2d::solve_explicit(
            &coeffs,
            [grid.axes[0], grid.axes[1]],
            grid.time_steps,
            maturity,
            |s| payoff_max_call(s, strike).expect("two spots"),
        )?,
    };

    let dt = maturity / grid.time_steps as f64;
    let times = (0..=grid.time_steps)
        .map(|k| if k == grid.time_steps { maturity } else { k as f64 * dt })
        .collect();
    let surface =
        ValueSurface::new(grid.axes.clone(), times, slices).expect("solver output is well-formed");
    Ok(surface)
}

/// Hedge ratios at a grid node: central differences in the log coordinate,
/// chain rule back to the price variable (dV/ds_i = e^{-x_i} dV/dx_i).
pub fn delta_vector(
    surface: &ValueSurface,
    time_index: usize,
    point: &[usize],
) -> Result<Vec<f64>, PdeError> {
    if time_index >= surface.times().len() {
        return Err(PdeError::TimeIndexOutOfRange {
            index: time_index,
            len: surface.times().len(),
        });
    }
    let axes = surface.axes();
    debug_assert_eq!(point.len(), axes.len());
    for (axis, (&i, a)) in point.iter().zip(axes).enumerate() {
        if i == 0 || i + 1 >= a.nodes {
            return Err(PdeError::BoundaryPoint { axis });
        }
    }
    let mut deltas = Vec::with_capacity(axes.len());
    let mut lo = point.to_vec();
    let mut hi = point.to_vec();
    for (d, a) in axes.iter().enumerate() {
        lo[d] -= 1;
        hi[d] += 1;
        let dv_dx = (surface.value(time_index, &hi) - surface.value(time_index, &lo))
            / (2.0 * a.step());
        deltas.push(dv_dx * (-a.coord(point[d])).exp());
        lo[d] += 1;
        hi[d] -= 1;
    }
    Ok(deltas)
}

/// Samples the one-asset closed form on a log-price axis at the given times,
/// producing a surface with the same layout as [`solve_bs_pde`]'s output.
pub fn sample_closed_form_surface(
    model: &ValidatedModel,
    option: &OptionSpec,
    axis: AxisSpec,
    times: Vec<f64>,
) -> Result<ValueSurface, PdeError> {
    if model.n() != 1 {
        return Err(PdeError::UnsupportedDimension { n: model.n() });
    }
    let slices = times
        .iter()
        .map(|&t| {
            let tau = option.maturity - t;
            axis.coords()
                .iter()
                .map(|&x| {
                    let s = x.exp();
                    if tau <= 0.0 {
                        payoff_max_call(&[s], option.strike).expect("single spot")
                    } else {
                        bs_closed_form_1d(s, option.strike, model.rate(), model.vols()[0], tau)
                    }
                })
                .collect()
        })
        .collect();
    Ok(ValueSurface::new(vec![axis], times, slices).expect("closed form is finite"))
}

/// Standard normal CDF, absolute error below 1e-12 everywhere.
///
/// Phi(x) = erfc(-x / sqrt(2)) / 2 with erfc evaluated by Cody's rational
/// approximations (the CALERF scheme), accurate to near machine precision.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc_cody(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// One-asset Black-Scholes call value: s N(d1) - K e^{-rT} N(d2).
///
/// sigma = 0 degenerates to the deterministic forward payoff
/// max(s - K e^{-rT}, 0).
pub fn bs_closed_form_1d(spot: f64, strike: f64, rate: f64, vol: f64, maturity: f64) -> f64 {
    debug_assert!(spot > 0.0 && strike > 0.0 && maturity > 0.0 && vol >= 0.0);
    let df = (-rate * maturity).exp();
    let sig = vol * maturity.sqrt();
    if sig == 0.0 {
        return (spot - strike * df).max(0.0);
    }
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * maturity) / sig;
    let d2 = d1 - sig;
    spot * norm_cdf(d1) - strike * df * norm_cdf(d2)
}

const ERFC_THRESH: f64 = 0.46875;
const ERFC_XBIG: f64 = 26.543;
const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_56e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_47e3,
    1.857_777_061_846_031_53e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_09e1,
    2.440_246_379_344_441_73e2,
    1.282_616_526_077_372_28e3,
    2.844_236_833_439_170_62e3,
];
const ERF_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_94e0,
    6.611_919_063_714_162_95e1,
    2.986_351_381_974_001_31e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_58e3,
    2.051_078_377_826_071_47e3,
    1.230_339_354_797_997_25e3,
    2.153_115_354_744_038_46e-8,
];
const ERF_D: [f64; 8] = [
    1.574_492_611_070_983_47e1,
    1.176_939_508_913_124_99e2,
    5.371_811_018_620_098_58e2,
    1.621_389_574_566_690_19e3,
    3.290_799_235_733_459_63e3,
    4.362_619_090_143_247_16e3,
    3.439_367_674_143_721_64e3,
    1.230_339_354_803_749_42e3,
];
const ERF_P: [f64; 6] = [
    3.053_266_349_612_323_44e-1,
    3.603_448_999_498_044_39e-1,
    1.257_817_261_112_292_46e-1,
    1.608_378_514_874_227_66e-2,
    6.587_491_615_298_378_03e-4,
    1.631_538_713_730_209_78e-2,
];
const ERF_Q: [f64; 5] = [
    2.568_520_192_289_822_42e0,
    1.872_952_849_923_460_47e0,
    5.279_051_029_514_284_12e-1,
    6.051_834_131_244_131_91e-2,
    2.335_204_976_268_691_85e-3,
];

/// Complementary error function after W. J. Cody: three rational regimes with
/// the split-exponential trick for the tails.
fn erfc_cody(x: f64) -> f64 {
    let y = x.abs();
    if y <= ERFC_THRESH {
        // erfc via erf on the central interval.
        let z = if y > 1.11e-16 { y * y } else { 0.0 };
        let mut num = ERF_A[4] * z;
        let mut den = z;
        for i in 0..3 {
            num = (num + ERF_A[i]) * z;
            den = (den + ERF_B[i]) * z;
        }
        return 1.0 - x * (num + ERF_A[3]) / (den + ERF_B[3]);
    }
    let result = if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        scaled_tail((num + ERF_C[7]) / (den + ERF_D[7]), y)
    } else if y < ERFC_XBIG {
        let z = 1.0 / (y * y);
        let mut num = ERF_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERF_P[i]) * z;
            den = (den + ERF_Q[i]) * z;
        }
        let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
        scaled_tail((FRAC_1_SQRT_PI - r) / y, y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Multiplies by e^{-y^2} split as e^{-ysq^2} e^{-del} to avoid cancellation
/// in the exponent (ysq is y truncated to 1/16ths).
fn scaled_tail(r: f64, y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * r
}
