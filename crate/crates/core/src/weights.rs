//! Semivalue weight schemes on subset cardinalities.
//!
//! A weight scheme assigns a raw weight `w(j)` to every cardinality
//! `j in [1, n]`. The normalized form is `w~(j) = C(n-1, j-1) * w(j)`, and a
//! scheme is admissible when `sum_j w~(j) = n`. The Beta family has the
//! closed form
//!
//! ```text
//! w(j) = n * prod_{k=1..j-1}(beta + k - 1) * prod_{k=1..n-j}(alpha + k - 1)
//!          / prod_{k=1..n-1}(alpha + beta + k - 1)
//! ```
//!
//! Direct products overflow near `n ~ 200`, so every weight is evaluated as a
//! compensated sum of logarithms of the factors and exponentiated at the end.
//! The terms are grouped so that the uniform case `alpha = beta = 1` cancels
//! exactly and yields `w~(j) == 1.0` bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the admissibility sum `sum_j w~(j) = n`.
pub const ADMISSIBILITY_RTOL: f64 = 1e-9;

/// Positive hyperparameters of the Beta family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || alpha <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Beta parameters must be positive finite, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Where a scheme's weights came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeOrigin {
    Beta(BetaParams),
    Explicit,
    DataShapley,
    /// All normalized mass on cardinality 2: the value of adding a point to
    /// the best single companion subset.
    LooFirst,
    /// All normalized mass on cardinality n: `psi(z) = U(D) - U(D \ {z})`.
    LooLast,
}

/// Neumaier-compensated accumulator. Two states built from the same summand
/// sequence are bit-identical, which the uniform-cancellation trick relies on.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Prefix sums `state[m] = sum_{k=1..m} ln(offset + k - 1)` for `m in [0, n]`.
fn log_prefix(n: usize, offset: f64) -> Vec<Kahan> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Kahan::default();
    out.push(acc);
    for k in 1..=n {
        acc.add((offset + (k - 1) as f64).ln());
        out.push(acc);
    }
    out
}

/// Compensated difference of two prefix states.
fn diff(a: &Kahan, b: &Kahan) -> f64 {
    (a.sum - b.sum) + (a.comp - b.comp)
}

/// `ln C(n-1, j-1)` from factorial-log prefix sums.
fn ln_binomial(lf: &[Kahan], n: usize, j: usize) -> f64 {
    (lf[n - 1].sum - lf[j - 1].sum - lf[n - j].sum)
        + (lf[n - 1].comp - lf[j - 1].comp - lf[n - j].comp)
}

/// Closed-form Beta weight `w(j)` for one cardinality, in log space.
///
/// Cost is O(n); scheme construction amortizes the prefix sums instead.
pub fn beta_weight(n: usize, j: usize, params: &BetaParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if j < 1 || j > n {
        return Err(Error::InvalidParameter(format!(
            "cardinality j = {j} out of range [1, {n}]"
        )));
    }
    let (alpha, beta) = (params.alpha, params.beta);
    let mut num = Kahan::default();
    for k in 1..j {
        num.add((beta + (k - 1) as f64).ln());
    }
    for k in 1..=(n - j) {
        num.add((alpha + (k - 1) as f64).ln());
    }
    let mut den = Kahan::default();
    for k in 1..n {
        den.add((alpha + beta + (k - 1) as f64).ln());
    }
    Ok(((n as f64).ln() + num.value() - den.value()).exp())
}

/// A validated semivalue weight scheme on cardinalities `1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    n: usize,
    origin: SchemeOrigin,
    raw: Vec<f64>,
    normalized: Vec<f64>,
}

impl WeightScheme {
    /// Beta(alpha, beta) scheme via the closed form.
    pub fn beta(n: usize, params: BetaParams) -> Result<Self> {
        check_n(n)?;
        let (alpha, beta) = (params.alpha, params.beta);
        let lf = log_prefix(n - 1, 1.0);
        let pa = log_prefix(n - 1, alpha);
        let pb = log_prefix(n - 1, beta);
        let pab = log_prefix(n - 1, alpha + beta);

        // ln w~(j) = [ln n + LF(n-1) - Pab(n-1)]
        //          + [Pb(j-1) - LF(j-1)] + [Pa(n-j) - LF(n-j)]
        // Bracket 1 continues the LF accumulator with ln n so that for
        // alpha = beta = 1 all three brackets cancel bit-exactly.
        let mut head = lf[n - 1];
        head.add((n as f64).ln());
        let b1 = diff(&head, &pab[n - 1]);

        let mut raw = Vec::with_capacity(n);
        let mut normalized = Vec::with_capacity(n);
        for j in 1..=n {
            let ln_norm = b1 + diff(&pb[j - 1], &lf[j - 1]) + diff(&pa[n - j], &lf[n - j]);
            let w_norm = ln_norm.exp();
            normalized.push(w_norm);
            raw.push((ln_norm - ln_binomial(&lf, n, j)).exp());
        }
        Self::finish(n, SchemeOrigin::Beta(params), raw, normalized)
    }

    /// Uniform normalized weights: `w(j) = C(n-1, j-1)^-1`, `w~(j) = 1`.
    pub fn data_shapley(n: usize) -> Result<Self> {
        check_n(n)?;
        let lf = log_prefix(n - 1, 1.0);
        let raw = (1..=n).map(|j| (-ln_binomial(&lf, n, j)).exp()).collect();
        Self::finish(n, SchemeOrigin::DataShapley, raw, vec![1.0; n])
    }

    /// All mass on cardinality 2: `w~(2) = n`.
    pub fn loo_first(n: usize) -> Result<Self> {
        check_n(n)?;
        if n < 2 {
            return Err(Error::InvalidParameter(
                "loo-first needs at least 2 points (cardinality 2 must exist)".into(),
            ));
        }
        let mut raw = vec![0.0; n];
        let mut normalized = vec![0.0; n];
        raw[1] = n as f64 / (n - 1) as f64;
        normalized[1] = n as f64;
        Self::finish(n, SchemeOrigin::LooFirst, raw, normalized)
    }

    /// All mass on cardinality n: the leave-one-out value.
    pub fn loo_last(n: usize) -> Result<Self> {
        check_n(n)?;
        let mut raw = vec![0.0; n];
        let mut normalized = vec![0.0; n];
        raw[n - 1] = n as f64;
        normalized[n - 1] = n as f64;
        Self::finish(n, SchemeOrigin::LooLast, raw, normalized)
    }

    /// Scheme from caller-supplied raw weights. Signed entries are accepted
    /// as long as the admissibility sum holds.
    pub fn explicit(n: usize, raw: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if raw.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} raw weights, got {}",
                raw.len()
            )));
        }
        let lf = log_prefix(n - 1, 1.0);
        let normalized = raw
            .iter()
            .enumerate()
            .map(|(i, w)| w * ln_binomial(&lf, n, i + 1).exp())
            .collect();
        Self::finish(n, SchemeOrigin::Explicit, raw, normalized)
    }

    /// Scheme from caller-supplied normalized weights `w~`; the stored
    /// normalized vector is used verbatim (raw weights are derived).
    pub fn explicit_normalized(n: usize, normalized: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if normalized.len() != n {
            return Err(Error::InvalidParameter(format!(
                "expected {n} normalized weights, got {}",
                normalized.len()
            )));
        }
        let lf = log_prefix(n - 1, 1.0);
        let raw = normalized
            .iter()
            .enumerate()
            .map(|(i, w)| w * (-ln_binomial(&lf, n, i + 1)).exp())
            .collect();
        Self::finish(n, SchemeOrigin::Explicit, raw, normalized)
    }

    fn finish(
        n: usize,
        origin: SchemeOrigin,
        raw: Vec<f64>,
        normalized: Vec<f64>,
    ) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "raw weights must all be finite".into(),
            ));
        }
        if matches!(origin, SchemeOrigin::Beta(_)) && raw.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter(
                "Beta weights must be nonnegative".into(),
            ));
        }
        let mut sum = Kahan::default();
        for &w in &normalized {
            sum.add(w);
        }
        let relative_gap = (sum.value() - n as f64).abs() / n as f64;
        if !relative_gap.is_finite() || relative_gap > ADMISSIBILITY_RTOL {
            return Err(Error::AdmissibilityViolation { n, relative_gap });
        }
        Ok(Self {
            n,
            origin,
            raw,
            normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn origin(&self) -> SchemeOrigin {
        self.origin
    }

    /// Raw weights `w(1..=n)`.
    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Normalized weights `w~(1..=n) = C(n-1, j-1) * w(j)`.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Normalized weight at cardinality `j` (1-based).
    pub fn normalized_at(&self, j: usize) -> f64 {
        self.normalized[j - 1]
    }

    /// Smallest cardinality maximizing the normalized weight.
    pub fn argmax_cardinality(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.normalized.iter().enumerate() {
            if w > self.normalized[best] {
                best = i;
            }
        }
        best + 1
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(())
}

// --- JSON form: {n, origin, alpha?, beta?, raw[], normalized[]} ---

#[derive(Serialize, Deserialize)]
struct SchemeRepr {
    n: usize,
    origin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    raw: Vec<f64>,
    normalized: Vec<f64>,
}

impl Serialize for WeightScheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (origin, alpha, beta) = match self.origin {
            SchemeOrigin::Beta(p) => ("beta", Some(p.alpha), Some(p.beta)),
            SchemeOrigin::Explicit => ("explicit", None, None),
            SchemeOrigin::DataShapley => ("data-shapley", None, None),
            SchemeOrigin::LooFirst => ("loo-first", None, None),
            SchemeOrigin::LooLast => ("loo-last", None, None),
        };
        SchemeRepr {
            n: self.n,
            origin: origin.to_string(),
            alpha,
            beta,
            raw: self.raw.clone(),
            normalized: self.normalized.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightScheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = SchemeRepr::deserialize(deserializer)?;
        let origin = match repr.origin.as_str() {
            "beta" => {
                let (a, b) = (
                    repr.alpha.ok_or_else(|| DeError::custom("beta origin requires alpha"))?,
                    repr.beta.ok_or_else(|| DeError::custom("beta origin requires beta"))?,
                );
                SchemeOrigin::Beta(BetaParams::new(a, b).map_err(DeError::custom)?)
            }
            "explicit" => SchemeOrigin::Explicit,
            "data-shapley" => SchemeOrigin::DataShapley,
            "loo-first" => SchemeOrigin::LooFirst,
            "loo-last" => SchemeOrigin::LooLast,
            other => return Err(DeError::custom(format!("unknown scheme origin `{other}`"))),
        };
        if repr.raw.len() != repr.n || repr.normalized.len() != repr.n {
            return Err(DeError::custom("weight vectors must have length n"));
        }
        WeightScheme::finish(repr.n, origin, repr.raw, repr.normalized).map_err(DeError::custom)
    }
}
