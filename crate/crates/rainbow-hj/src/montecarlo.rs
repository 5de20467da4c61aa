//! Deterministic risk-neutral Monte Carlo pricing over exactly-sampled
//! correlated geometric Brownian motion.
//!
//! The payoff is European and path-independent, so each asset is sampled in
//! one exact lognormal step to maturity: the only error is statistical.
//! Randomness comes from a counter-based generator: draw k is a pure function
//! of (seed, k), so results are bit-identical regardless of thread count or
//! evaluation order. Accumulation uses a fixed blockwise reduction order for
//! the same reason.

use rayon::prelude::*;
use thiserror::Error;

use crate::market::{payoff_max_call, LowerTriangular, OptionSpec, ValidatedModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("n_paths must be at least 1")]
    ZeroPaths,
    #[error("antithetic sampling needs an even path count, got {n_paths}")]
    OddAntitheticPaths { n_paths: usize },
}

/// Simulation request: how many paths, which random stream, and whether
/// paths come in antithetic (mirrored-noise) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl PathConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.n_paths == 0 {
            return Err(McError::ZeroPaths);
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(McError::OddAntitheticPaths {
                n_paths: self.n_paths,
            });
        }
        Ok(())
    }
}

/// Monte Carlo price with its statistical uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub price: f64,
    /// Unbiased sample standard deviation of discounted payoffs / sqrt(n).
    pub std_error: f64,
    pub n_paths: usize,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn counter_u64(seed: u64, k: u64) -> u64 {
    mix64(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform draw strictly inside (0, 1): top 53 bits, centered in the cell.
fn counter_uniform(seed: u64, k: u64) -> f64 {
    ((counter_u64(seed, k) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

fn counter_normal(seed: u64, k: u64) -> f64 {
    normal_inv_cdf(counter_uniform(seed, k))
}

const PPND_A: [f64; 8] = [
    3.387_132_872_796_366_608e0,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const PPND_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const PPND_C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_9e0,
    5.769_497_221_460_691_405_5e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const PPND_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_4e0,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const PPND_E: [f64; 8] = [
    6.657_904_643_501_103_777_2e0,
    5.463_784_911_164_114_369_9e0,
    1.784_826_539_917_291_335_8e0,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const PPND_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

fn poly(coeffs: &[f64; 8], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

/// Inverse standard normal CDF (Wichura's PPND16 rational approximations),
/// relative accuracy near machine precision on (0, 1).
pub fn normal_inv_cdf(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&PPND_A, r) / poly(&PPND_B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&PPND_C, r) / poly(&PPND_D, r)
    } else {
        r -= 5.0;
        poly(&PPND_E, r) / poly(&PPND_F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Sample k of the correlated-normal stream: z' = L z with z i.i.d. standard
/// normal, a pure function of (seed, k).
pub fn sample_correlated_normals(
    factor: &LowerTriangular,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let n = factor.dim() as u64;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let z: Vec<f64> = (0..n)
                .map(|d| counter_normal(seed, k as u64 * n + d))
                .collect();
            factor.transform(&z)
        })
        .collect()
}

fn terminal_spots_for_path(
    model: &ValidatedModel,
    maturity: f64,
    config: &PathConfig,
    path: u64,
) -> Vec<f64> {
    let n = model.n() as u64;
    let (draw_index, sign) = if config.antithetic {
        (path / 2, if path.is_multiple_of(2) { 1.0 } else { -1.0 })
    } else {
        (path, 1.0)
    };
    let z: Vec<f64> = (0..n)
        .map(|d| sign * counter_normal(config.seed, draw_index * n + d))
        .collect();
    let w = model.cholesky().transform(&z);
    let sqrt_t = maturity.sqrt();
    model
        .spots()
        .iter()
        .zip(model.vols())
        .zip(&w)
        .map(|((&s, &vol), &wi)| {
            s * ((model.rate() - 0.5 * vol * vol) * maturity + vol * sqrt_t * wi).exp()
        })
        .collect()
}

/// One exact lognormal step to maturity per path (risk-neutral drift).
pub fn simulate_terminal_spots(
    model: &ValidatedModel,
    maturity: f64,
    config: &PathConfig,
) -> Result<Vec<Vec<f64>>, McError> {
    config.validate()?;
    Ok((0..config.n_paths)
        .into_par_iter()
        .map(|p| terminal_spots_for_path(model, maturity, config, p as u64))
        .collect())
}

/// Discounted expectation of the max-call payoff over simulated paths.
///
/// With antithetic sampling enabled, paths 2m and 2m+1 share draw index m
/// with mirrored noise. Mirrored paths are correlated, so the independent
/// statistical unit is the pair: the standard error is then computed over
/// pair averages, which is where the variance reduction shows up.
pub fn mc_price(
    model: &ValidatedModel,
    option: &OptionSpec,
    config: &PathConfig,
) -> Result<McEstimate, McError> {
    config.validate()?;
    let df = (-model.rate() * option.maturity).exp();
    let strike = option.strike;
    let payoffs: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let spots = terminal_spots_for_path(model, option.maturity, config, p as u64);
            df * payoff_max_call(&spots, strike).expect("model has at least one asset")
        })
        .collect();
    let (price, std_error) = if config.antithetic {
        let pair_means: Vec<f64> = payoffs
            .chunks_exact(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect();
        blockwise_mean_stderr(&pair_means)
    } else {
        blockwise_mean_stderr(&payoffs)
    };
    Ok(McEstimate {
        price,
        std_error,
        n_paths: config.n_paths,
    })
}

const SUM_BLOCK: usize = 4096;

/// Two-pass mean and standard error with a fixed blockwise summation order.
/// A constant sample short-circuits to zero variance so degenerate models
/// report std_error exactly 0.
fn blockwise_mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    debug_assert!(n >= 1);
    let (mut lo, mut hi) = (xs[0], xs[0]);
    for &x in xs {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo == hi {
        return (lo, 0.0);
    }
    let total: f64 = xs
        .chunks(SUM_BLOCK)
        .map(|c| c.iter().sum::<f64>())
        .sum();
    let mean = total / n as f64;
    let ss: f64 = xs
        .chunks(SUM_BLOCK)
        .map(|c| {
            c.iter()
                .map(|&x| {
                    let d = x - mean;
                    d * d
                })
                .sum::<f64>()
        })
        .sum();
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{cholesky_factor, CorrelationMatrix, MarketModel};
    use crate::pde::{bs_closed_form_1d, norm_cdf};

    fn model_1d(vol: f64) -> ValidatedModel {
        MarketModel::new(vec![100.0], vec![vol], 0.05, CorrelationMatrix::identity(1))
            .validate()
            .unwrap()
    }

    fn model_2d(rho: f64, vols: [f64; 2]) -> ValidatedModel {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        MarketModel::new(vec![100.0, 100.0], vols.to_vec(), 0.05, corr)
            .validate()
            .unwrap()
    }

    #[test]
    fn inverse_cdf_round_trips_through_cdf() {
        // Relative accuracy across the whole unit interval, including tails.
        for k in 1..=999 {
            let p = k as f64 / 1000.0;
            let x = normal_inv_cdf(p);
            assert!(
                (norm_cdf(x) - p).abs() <= 1e-12,
                "central round trip at p={p}"
            );
        }
        for &p in &[1e-12, 1e-9, 1e-6, 1e-3, 1.0 - 1e-6, 1.0 - 1e-9] {
            let x = normal_inv_cdf(p);
            let back = norm_cdf(x);
            assert!(
                ((back - p) / p.min(1.0 - p)).abs() <= 1e-9,
                "tail round trip at p={p}: got {back}"
            );
        }
    }

    #[test]
    fn inverse_cdf_reference_points() {
        assert_eq!(normal_inv_cdf(0.5), 0.0);
        assert!((normal_inv_cdf(0.975_002_104_851_779_5) - 1.96).abs() < 1e-9);
        assert_eq!(normal_inv_cdf(0.25), -normal_inv_cdf(0.75));
        assert_eq!(normal_inv_cdf(0.0), f64::NEG_INFINITY);
        assert_eq!(normal_inv_cdf(1.0), f64::INFINITY);
    }

    #[test]
    fn uniforms_stay_strictly_inside_the_unit_interval() {
        let mut sum = 0.0;
        for k in 0..100_000u64 {
            let u = counter_uniform(7, k);
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        let mean = sum / 100_000.0;
        assert!((mean - 0.5).abs() < 0.005, "uniform mean {mean}");
    }

    #[test]
    fn correlated_normals_have_target_moments() {
        let id = cholesky_factor(&CorrelationMatrix::identity(1)).unwrap();
        let samples = sample_correlated_normals(&id, 1_000_000, 42);
        let mean: f64 = samples.iter().map(|v| v[0]).sum::<f64>() / 1e6;
        assert!(mean.abs() < 4e-3, "sample mean {mean}");

        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky_factor(&corr).unwrap();
        let pairs = sample_correlated_normals(&l, 1_000_000, 42);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for v in &pairs {
            sxy += v[0] * v[1];
            sxx += v[0] * v[0];
            syy += v[1] * v[1];
        }
        let rho_hat = sxy / (sxx * syy).sqrt();
        assert!((rho_hat - 0.5).abs() < 0.01, "empirical rho {rho_hat}");
    }

    #[test]
    fn perfectly_correlated_components_coincide() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let l = cholesky_factor(&corr).unwrap();
        for v in sample_correlated_normals(&l, 100, 3) {
            assert_eq!(v[0], v[1]);
        }
    }

    #[test]
    fn zero_vol_paths_are_deterministic_forwards() {
        let model = model_1d(0.0);
        let config = PathConfig {
            n_paths: 10,
            seed: 1,
            antithetic: false,
        };
        let want = 100.0 * (0.05_f64).exp();
        for spots in simulate_terminal_spots(&model, 1.0, &config).unwrap() {
            assert_eq!(spots[0], want);
        }
    }

    #[test]
    fn terminal_spot_mean_recovers_the_forward() {
        let model = model_1d(0.2);
        let config = PathConfig {
            n_paths: 200_000,
            seed: 11,
            antithetic: false,
        };
        let spots = simulate_terminal_spots(&model, 1.0, &config).unwrap();
        let xs: Vec<f64> = spots.iter().map(|v| v[0]).collect();
        let (mean, se) = blockwise_mean_stderr(&xs);
        let forward = 100.0 * (0.05_f64).exp();
        assert!(
            (mean - forward).abs() <= 3.0 * se,
            "mean {mean} vs forward {forward} (se {se})"
        );
    }

    #[test]
    fn identical_noise_drives_equal_assets() {
        let model = model_2d(1.0, [0.2, 0.2]);
        let config = PathConfig {
            n_paths: 50,
            seed: 9,
            antithetic: false,
        };
        for spots in simulate_terminal_spots(&model, 1.0, &config).unwrap() {
            assert_eq!(spots[0], spots[1]);
        }
    }

    #[test]
    fn antithetic_pairs_mirror_the_noise() {
        let model = model_1d(0.2);
        let config = PathConfig {
            n_paths: 4,
            seed: 5,
            antithetic: true,
        };
        let spots = simulate_terminal_spots(&model, 1.0, &config).unwrap();
        // s_{2m} * s_{2m+1} = s0^2 e^{2(r - sigma^2/2)T} since the noise cancels.
        let want = 100.0_f64.powi(2) * (2.0_f64 * (0.05 - 0.02)).exp();
        for pair in spots.chunks(2) {
            let prod = pair[0][0] * pair[1][0];
            assert!((prod / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_model_prices_exactly_with_zero_error() {
        let model = model_1d(0.0);
        let option = OptionSpec::max_call(90.0, 1.0).unwrap();
        let config = PathConfig {
            n_paths: 1000,
            seed: 2,
            antithetic: false,
        };
        let est = mc_price(&model, &option, &config).unwrap();
        let want = (-0.05_f64).exp() * (100.0 * (0.05_f64).exp() - 90.0);
        assert_eq!(est.price, want);
        assert!((est.price - 14.3894).abs() < 5e-5);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn vanishing_strike_recovers_spot() {
        let model = model_1d(0.2);
        let option = OptionSpec::max_call(1e-9, 1.0).unwrap();
        let config = PathConfig {
            n_paths: 100_000,
            seed: 4,
            antithetic: false,
        };
        let est = mc_price(&model, &option, &config).unwrap();
        assert!(
            (est.price - 100.0).abs() <= 3.0 * est.std_error,
            "price {} se {}",
            est.price,
            est.std_error
        );
    }

    #[test]
    fn at_the_money_price_matches_closed_form() {
        let model = model_1d(0.2);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let config = PathConfig {
            n_paths: 100_000,
            seed: 7,
            antithetic: true,
        };
        let est = mc_price(&model, &option, &config).unwrap();
        let cf = bs_closed_form_1d(100.0, 100.0, 0.05, 0.2, 1.0);
        assert!(
            (est.price - cf).abs() <= 3.0 * est.std_error,
            "mc {} vs cf {} (se {})",
            est.price,
            cf,
            est.std_error
        );
        assert!(est.std_error < 0.1);
    }

    #[test]
    fn antithetic_variates_reduce_standard_error() {
        let model = model_1d(0.2);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let plain = mc_price(
            &model,
            &option,
            &PathConfig {
                n_paths: 20_000,
                seed: 13,
                antithetic: false,
            },
        )
        .unwrap();
        let anti = mc_price(
            &model,
            &option,
            &PathConfig {
                n_paths: 20_000,
                seed: 13,
                antithetic: true,
            },
        )
        .unwrap();
        assert!(
            anti.std_error < plain.std_error,
            "antithetic {} vs plain {}",
            anti.std_error,
            plain.std_error
        );
    }

    #[test]
    fn price_is_monotone_nonincreasing_in_strike() {
        let model = model_2d(0.3, [0.2, 0.3]);
        let config = PathConfig {
            n_paths: 10_000,
            seed: 21,
            antithetic: false,
        };
        let mut last = f64::INFINITY;
        for k in [60.0, 80.0, 100.0, 120.0, 140.0] {
            let option = OptionSpec::max_call(k, 1.0).unwrap();
            let est = mc_price(&model, &option, &config).unwrap();
            assert!(est.price <= last, "price must fall as strike rises");
            last = est.price;
        }
    }

    #[test]
    fn estimates_are_bit_identical_across_thread_counts() {
        let model = model_2d(0.5, [0.2, 0.3]);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let config = PathConfig {
            n_paths: 50_000,
            seed: 31,
            antithetic: true,
        };
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_price(&model, &option, &config).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.price.to_bits(), four.price.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn config_validation_rejects_bad_path_counts() {
        assert_eq!(
            PathConfig {
                n_paths: 0,
                seed: 0,
                antithetic: false
            }
            .validate(),
            Err(McError::ZeroPaths)
        );
        assert_eq!(
            PathConfig {
                n_paths: 7,
                seed: 0,
                antithetic: true
            }
            .validate(),
            Err(McError::OddAntitheticPaths { n_paths: 7 })
        );
    }

    #[test]
    fn single_path_reports_zero_standard_error() {
        let model = model_1d(0.2);
        let option = OptionSpec::max_call(100.0, 1.0).unwrap();
        let config = PathConfig {
            n_paths: 1,
            seed: 1,
            antithetic: false,
        };
        let est = mc_price(&model, &option, &config).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.n_paths, 1);
    }
}
