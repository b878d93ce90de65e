use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// How the mass `t_M` beyond the last retained weight is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Scale the retained weights to sum to one.
    #[default]
    Renormalize,
    /// Add the tail mass to the `M`-step weight.
    LastTerm,
}

/// Weights `c_m` of `1 - (1 - z)^beta = sum_m c_m z^m`.
#[derive(Clone, Debug)]
pub struct SubordinationWeights {
    beta: f64,
    /// `c[m - 1] = c_m`.
    c: Vec<f64>,
    /// `tails[m] = t_m = 1 - sum_{i <= m} c_i`.
    tails: Vec<f64>,
}

impl SubordinationWeights {
    pub fn new(beta: f64, terms: usize) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1]")));
        }
        if terms == 0 {
            return Err(Error::InvalidParameter("at least one weight is needed".into()));
        }
        let mut c = Vec::with_capacity(terms);
        let mut tails = Vec::with_capacity(terms + 1);
        let mut t = 1.0;
        tails.push(t);
        for m in 1..=terms {
            let mf = m as f64;
            c.push(beta * t / mf);
            t *= (mf - beta) / mf;
            tails.push(t);
        }
        Ok(Self { beta, c, tails })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn terms(&self) -> usize {
        self.c.len()
    }

    /// `c_m` for `1 <= m <= M`.
    pub fn c(&self, m: usize) -> f64 {
        self.c[m - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }

    /// `t_m` for `0 <= m <= M`.
    pub fn tail_after(&self, m: usize) -> f64 {
        self.tails[m]
    }

    pub fn tail(&self) -> f64 {
        self.tails[self.c.len()]
    }

    /// Limit of `c_m m^(1+beta)`.
    pub fn asymptotic_constant(&self) -> f64 {
        if self.beta == 1.0 {
            return 0.0;
        }
        self.beta / gamma(1.0 - self.beta)
    }

    /// Retained weights with the tail mass redistributed.
    pub fn with_tail(&self, policy: TailPolicy) -> Vec<f64> {
        let t = self.tail();
        match policy {
            TailPolicy::Renormalize => self.c.iter().map(|c| c / (1.0 - t)).collect(),
            TailPolicy::LastTerm => {
                let mut w = self.c.clone();
                if let Some(last) = w.last_mut() {
                    *last += t;
                }
                w
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;

    /// `(-1)^(m+1) binom(beta, m)` from the falling factorial.
    fn binomial_weight(beta: &BigRational, m: usize) -> BigRational {
        let mut num = BigRational::one();
        let mut fact = BigRational::one();
        for i in 0..m {
            num *= beta - BigRational::from_integer(BigInt::from(i));
            fact *= BigRational::from_integer(BigInt::from(i + 1));
        }
        let b = num / fact;
        if m % 2 == 1 {
            b
        } else {
            -b
        }
    }

    #[test]
    fn half_power_weights() {
        let w = SubordinationWeights::new(0.5, 10).unwrap();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let expected = [(1, 2), (1, 8), (1, 16), (5, 128)];
        for (m, (n, d)) in expected.iter().enumerate() {
            let exact = binomial_weight(&half, m + 1);
            assert_eq!(exact, BigRational::new(BigInt::from(*n), BigInt::from(*d)));
            assert_eq!(w.c(m + 1), exact.to_f64().unwrap());
        }
    }

    #[test]
    fn beta_one_is_a_single_step() {
        let w = SubordinationWeights::new(1.0, 5).unwrap();
        assert_eq!(w.c(1), 1.0);
        assert!((2..=5).all(|m| w.c(m) == 0.0));
        assert_eq!(w.tail(), 0.0);
    }

    #[test]
    fn asymptotic_constant_at_ten_thousand() {
        let w = SubordinationWeights::new(0.5, 10_000).unwrap();
        let m = 10_000f64;
        let rel = (w.c(10_000) * m.powf(1.5) / w.asymptotic_constant() - 1.0).abs();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn tail_policies() {
        let w = SubordinationWeights::new(0.3, 50).unwrap();
        for p in [TailPolicy::Renormalize, TailPolicy::LastTerm] {
            let s: f64 = w.with_tail(p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn weights_are_positive_decreasing_and_sum_below_one(beta in 0.01f64..0.99, terms in 1usize..400) {
            let w = SubordinationWeights::new(beta, terms).unwrap();
            let mut sum = 0.0;
            for m in 1..=terms {
                prop_assert!(w.c(m) > 0.0);
                if m > 1 {
                    prop_assert!(w.c(m) < w.c(m - 1));
                }
                sum += w.c(m);
            }
            prop_assert!(sum <= 1.0 + 1e-12);
            prop_assert!((1.0 - sum - w.tail()).abs() < 1e-12);
        }

        #[test]
        fn recurrence_matches_binomial(num in 1i64..19, m in 1usize..12) {
            let beta = BigRational::new(BigInt::from(num), BigInt::from(20));
            let exact = binomial_weight(&beta, m);
            let w = SubordinationWeights::new(num as f64 / 20.0, m).unwrap();
            let got = w.c(m);
            let want = exact.to_f64().unwrap();
            prop_assert!(((got - want) / want).abs() < 1e-12);
            prop_assert!(!exact.is_zero());
        }
    }
}
