//! Market and contract data for rainbow (max-of-n) call pricing.
//!
//! A [`MarketModel`] collects spots s_i, volatilities sigma_i, pairwise
//! correlations rho_ij, the risk-free rate r and real-world drifts mu_i.
//! Drifts are carried for completeness only: pricing is risk-neutral, so
//! every consumer of a [`ValidatedModel`] uses r as the drift.
//!
//! Validation is all-at-once: [`MarketModel::validate`] returns either an
//! immutable [`ValidatedModel`] (the only input the pricing routines accept)
//! or the full list of violated invariants.

use thiserror::Error;

/// Cholesky pivot tolerance: pivots below the negated tolerance reject the
/// matrix, pivots within `[-PIVOT_TOL, 0]` are clamped to zero so borderline
/// rank-deficient correlations (rho = +/-1) factor cleanly.
pub const PIVOT_TOL: f64 = 1e-12;

/// A reason a model or contract failed validation. Index fields identify the
/// offending entry.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field}: expected length {expected}, got {got}")]
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("spot[{index}] = {value} must be strictly positive")]
    NonPositiveSpot { index: usize, value: f64 },
    #[error("vol[{index}] = {value} must be nonnegative")]
    NegativeVol { index: usize, value: f64 },
    #[error("rate = {value} must be finite")]
    NonFiniteRate { value: f64 },
    #[error("corr[{i}][{j}] = {value} outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },
    #[error("corr[{i}][{j}] != corr[{j}][{i}]")]
    NotSymmetric { i: usize, j: usize },
    #[error("corr[{index}][{index}] = {value} must equal 1")]
    UnitDiagonal { index: usize, value: f64 },
    #[error("correlation matrix is not positive semidefinite (pivot {pivot} at index {index})")]
    NotPositiveSemidefinite { index: usize, pivot: f64 },
    #[error("strike = {value} must be strictly positive")]
    NonPositiveStrike { value: f64 },
    #[error("maturity = {value} must be strictly positive")]
    NonPositiveMaturity { value: f64 },
}

/// Error from payoff evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayoffError {
    #[error("payoff requires at least one spot")]
    EmptySpotVector,
}

/// Symmetric correlation matrix with unit diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Identity correlations (independent assets).
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// Builds from rows; rejects non-square input. Entry-level invariants are
    /// checked by [`CorrelationMatrix::violations`] / [`MarketModel::validate`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::DimensionMismatch {
                    field: "corr row",
                    expected: n,
                    got: rows[i].len(),
                });
            }
        }
        let entries = rows.iter().flatten().copied().collect();
        Ok(Self { n, entries })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Entry-level invariant violations: symmetry, unit diagonal, range.
    /// Positive semidefiniteness is certified separately by [`cholesky_factor`].
    pub fn violations(&self) -> Vec<ModelError> {
        let mut errs = Vec::new();
        for i in 0..self.n {
            let d = self.entry(i, i);
            if d != 1.0 {
                errs.push(ModelError::UnitDiagonal { index: i, value: d });
            }
            for j in (i + 1)..self.n {
                let v = self.entry(i, j);
                if v != self.entry(j, i) {
                    errs.push(ModelError::NotSymmetric { i, j });
                }
                if !(-1.0..=1.0).contains(&v) {
                    errs.push(ModelError::CorrelationOutOfRange { i, j, value: v });
                }
            }
        }
        errs
    }
}

/// Lower-triangular Cholesky factor L with L·Lᵀ reproducing the source
/// correlation matrix. Used to color i.i.d. normal draws.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    n: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Applies the factor to a standard-normal vector: w = L·z.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        debug_assert_eq!(z.len(), self.n);
        (0..self.n)
            .map(|i| (0..=i).map(|j| self.entry(i, j) * z[j]).sum())
            .collect()
    }

    /// Max entrywise deviation of L·Lᵀ from `corr`.
    pub fn reconstruction_error(&self, corr: &CorrelationMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let k = i.min(j);
                let dot: f64 = (0..=k).map(|m| self.entry(i, m) * self.entry(j, m)).sum();
                worst = worst.max((dot - corr.entry(i, j)).abs());
            }
        }
        worst
    }
}

/// Cholesky factorization with pivot clamping.
///
/// Pivots below `-PIVOT_TOL` reject the matrix as not positive semidefinite;
/// pivots in `[-PIVOT_TOL, 0]` are clamped to zero, and the corresponding
/// column below the diagonal is zeroed (the exact-arithmetic value for a
/// semidefinite matrix). Rank-deficient correlations such as rho = 1 therefore
/// factor without error: [[1,1],[1,1]] -> [[1,0],[1,0]].
pub fn cholesky_factor(corr: &CorrelationMatrix) -> Result<LowerTriangular, ModelError> {
    let n = corr.dim();
    let mut l = vec![0.0_f64; n * n];
    for j in 0..n {
        let mut pivot = corr.entry(j, j);
        for k in 0..j {
            pivot -= l[j * n + k] * l[j * n + k];
        }
        if pivot < -PIVOT_TOL {
            return Err(ModelError::NotPositiveSemidefinite { index: j, pivot });
        }
        let diag = if pivot <= 0.0 { 0.0 } else { pivot.sqrt() };
        l[j * n + j] = diag;
        for i in (j + 1)..n {
            if diag == 0.0 {
                l[i * n + j] = 0.0;
                continue;
            }
            let mut acc = corr.entry(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = acc / diag;
        }
    }
    Ok(LowerTriangular { n, entries: l })
}

/// Raw market data as supplied by the user; validate before pricing.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    pub spots: Vec<f64>,
    pub vols: Vec<f64>,
    pub rate: f64,
    /// Real-world drifts mu_i; stored but unused (risk-neutral pricing uses `rate`).
    pub drifts: Vec<f64>,
    pub corr: CorrelationMatrix,
}

impl MarketModel {
    /// Model with zero drifts, the common case for pure pricing runs.
    pub fn new(spots: Vec<f64>, vols: Vec<f64>, rate: f64, corr: CorrelationMatrix) -> Self {
        let n = spots.len();
        Self {
            spots,
            vols,
            rate,
            drifts: vec![0.0; n],
            corr,
        }
    }

    /// Checks every invariant and certifies positive semidefiniteness through
    /// the Cholesky factorization. Returns all violations, not just the first.
    pub fn validate(self) -> Result<ValidatedModel, Vec<ModelError>> {
        let n = self.spots.len();
        let mut errs = Vec::new();
        if n == 0 {
            errs.push(ModelError::DimensionMismatch {
                field: "spots",
                expected: 1,
                got: 0,
            });
        }
        for (field, len) in [("vols", self.vols.len()), ("drifts", self.drifts.len())] {
            if len != n {
                errs.push(ModelError::DimensionMismatch {
                    field,
                    expected: n,
                    got: len,
                });
            }
        }
        if self.corr.dim() != n {
            errs.push(ModelError::DimensionMismatch {
                field: "corr",
                expected: n,
                got: self.corr.dim(),
            });
        }
        for (index, &value) in self.spots.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                errs.push(ModelError::NonPositiveSpot { index, value });
            }
        }
        for (index, &value) in self.vols.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                errs.push(ModelError::NegativeVol { index, value });
            }
        }
        if !self.rate.is_finite() {
            errs.push(ModelError::NonFiniteRate { value: self.rate });
        }
        errs.extend(self.corr.violations());
        if !errs.is_empty() {
            return Err(errs);
        }
        match cholesky_factor(&self.corr) {
            Ok(chol) => {
                // The factorization must actually reproduce the matrix; this is
                // the executable form of the PSD certificate.
                let recon = chol.reconstruction_error(&self.corr);
                if recon > PIVOT_TOL {
                    Err(vec![ModelError::NotPositiveSemidefinite {
                        index: 0,
                        pivot: recon,
                    }])
                } else {
                    Ok(ValidatedModel { model: self, chol })
                }
            }
            Err(e) => Err(vec![e]),
        }
    }
}

/// Immutable, fully validated model; the only input pricing operations accept.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    model: MarketModel,
    chol: LowerTriangular,
}

impl ValidatedModel {
    pub fn n(&self) -> usize {
        self.model.spots.len()
    }

    pub fn spots(&self) -> &[f64] {
        &self.model.spots
    }

    pub fn vols(&self) -> &[f64] {
        &self.model.vols
    }

    pub fn rate(&self) -> f64 {
        self.model.rate
    }

    pub fn drifts(&self) -> &[f64] {
        &self.model.drifts
    }

    pub fn corr(&self) -> &CorrelationMatrix {
        &self.model.corr
    }

    pub fn cholesky(&self) -> &LowerTriangular {
        &self.chol
    }
}

/// Payoff identifier. Only the rainbow max-call is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    MaxCall,
}

/// European contract terms: payoff kind, strike K and maturity T (years).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub kind: PayoffKind,
    pub strike: f64,
    pub maturity: f64,
}

impl OptionSpec {
    /// Max-call contract; rejects nonpositive strike or maturity.
    pub fn max_call(strike: f64, maturity: f64) -> Result<Self, Vec<ModelError>> {
        let mut errs = Vec::new();
        if !(strike > 0.0) || !strike.is_finite() {
            errs.push(ModelError::NonPositiveStrike { value: strike });
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            errs.push(ModelError::NonPositiveMaturity { value: maturity });
        }
        if errs.is_empty() {
            Ok(Self {
                kind: PayoffKind::MaxCall,
                strike,
                maturity,
            })
        } else {
            Err(errs)
        }
    }
}

/// Terminal payoff of the rainbow max-call: max(max_i s_i - K, 0).
///
/// Spots may be zero (an absorbed asset); domain restrictions such as
/// nonnegativity are the model's concern, not the payoff's. Only an empty
/// spot vector is rejected.
pub fn payoff_max_call(spots: &[f64], strike: f64) -> Result<f64, PayoffError> {
    let mut best = f64::NEG_INFINITY;
    for &s in spots {
        if s > best {
            best = s;
        }
    }
    if spots.is_empty() {
        return Err(PayoffError::EmptySpotVector);
    }
    Ok((best - strike).max(0.0))
}

/// Number of terms in the n-asset pricing PDE: (n² + 3n + 4)/2.
///
/// Reproduces the series 4, 7, 11, 16, 22 for n = 1..5; successive counts
/// differ by n + 2.
pub fn term_count(n: u64) -> u64 {
    (n * n + 3 * n + 4) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_market() -> MarketModel {
        MarketModel::new(
            vec![100.0],
            vec![0.2],
            0.05,
            CorrelationMatrix::identity(1),
        )
    }

    #[test]
    fn reference_single_asset_model_validates() {
        let v = unit_market().validate().expect("valid model");
        assert_eq!(v.n(), 1);
        assert_eq!(v.spots(), &[100.0]);
        assert_eq!(v.cholesky().entry(0, 0), 1.0);
    }

    #[test]
    fn correlation_above_one_is_rejected() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).unwrap();
        let model = MarketModel::new(vec![100.0, 100.0], vec![0.2, 0.2], 0.05, corr);
        let errs = model.validate().unwrap_err();
        assert!(errs.contains(&ModelError::CorrelationOutOfRange {
            i: 0,
            j: 1,
            value: 1.2
        }));
    }

    #[test]
    fn negative_spot_names_the_index() {
        let model = MarketModel::new(
            vec![100.0, -5.0],
            vec![0.2, 0.2],
            0.05,
            CorrelationMatrix::identity(2),
        );
        let errs = model.validate().unwrap_err();
        assert_eq!(
            errs,
            vec![ModelError::NonPositiveSpot {
                index: 1,
                value: -5.0
            }]
        );
    }

    #[test]
    fn validation_collects_all_violations() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 0.3], vec![0.2, 1.0]]).unwrap();
        let model = MarketModel::new(vec![-1.0, 100.0], vec![0.2, -0.1], f64::NAN, corr);
        let errs = model.validate().unwrap_err();
        assert!(errs.len() >= 4, "expected several violations, got {errs:?}");
        assert!(errs.contains(&ModelError::NotSymmetric { i: 0, j: 1 }));
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky_factor(&CorrelationMatrix::identity(2)).unwrap();
        assert_eq!(l.entry(0, 0), 1.0);
        assert_eq!(l.entry(1, 1), 1.0);
        assert_eq!(l.entry(1, 0), 0.0);
    }

    #[test]
    fn cholesky_half_correlation() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky_factor(&corr).unwrap();
        assert_eq!(l.entry(0, 0), 1.0);
        assert_eq!(l.entry(1, 0), 0.5);
        let expect = 0.75_f64.sqrt();
        assert!((l.entry(1, 1) - expect).abs() < 1e-15);
        assert!(l.reconstruction_error(&corr) <= 1e-12);
    }

    #[test]
    fn cholesky_rank_deficient_clamps_pivot() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let l = cholesky_factor(&corr).unwrap();
        assert_eq!(l.entry(0, 0), 1.0);
        assert_eq!(l.entry(1, 0), 1.0);
        assert_eq!(l.entry(1, 1), 0.0);
        assert!(l.reconstruction_error(&corr) <= 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        // rho_12 = rho_13 = 0.9, rho_23 = -0.9 is indefinite.
        let corr = CorrelationMatrix::from_rows(&[
            vec![1.0, 0.9, 0.9],
            vec![0.9, 1.0, -0.9],
            vec![0.9, -0.9, 1.0],
        ])
        .unwrap();
        match cholesky_factor(&corr) {
            Err(ModelError::NotPositiveSemidefinite { .. }) => {}
            other => panic!("expected NotPositiveSemidefinite, got {other:?}"),
        }
    }

    #[test]
    fn transform_colors_draws() {
        let corr = CorrelationMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let l = cholesky_factor(&corr).unwrap();
        let w = l.transform(&[1.0, 1.0]);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (0.5 + 0.75_f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff_max_call(&[120.0, 90.0], 100.0).unwrap(), 20.0);
        assert_eq!(payoff_max_call(&[80.0, 90.0, 95.0], 100.0).unwrap(), 0.0);
        assert_eq!(payoff_max_call(&[105.0], 100.0).unwrap(), 5.0);
        assert_eq!(
            payoff_max_call(&[], 100.0),
            Err(PayoffError::EmptySpotVector)
        );
    }

    #[test]
    fn option_spec_rejects_bad_terms() {
        assert!(OptionSpec::max_call(100.0, 1.0).is_ok());
        assert!(OptionSpec::max_call(0.0, 1.0).is_err());
        assert!(OptionSpec::max_call(100.0, -1.0).is_err());
    }

    #[test]
    fn term_count_series() {
        assert_eq!(term_count(1), 4);
        assert_eq!(term_count(2), 7);
        assert_eq!(term_count(3), 11);
        assert_eq!(term_count(4), 16);
        assert_eq!(term_count(5), 22);
    }

    #[test]
    fn term_count_difference_pattern() {
        // Raising n by one adds one diagonal second-derivative term, one
        // drift term, and n - 1 cross terms.
        for n in 2..50 {
            assert_eq!(term_count(n) - term_count(n - 1), n + 1);
        }
    }
}
