//! Model family: parameters, disorder realizations, Hamiltonian evaluation.
//!
//! The Gibbs measure is proportional to
//! `exp((theta/sqrt(n)) sum_{i<j} g_ij s_i s_j + (theta1/k) sum_{i<j in S} s_i s_j + sum_i h_i s_i)`.
//! The clique term uses the `theta1/k` normalization over unordered pairs;
//! this is the convention under which the mean-field equations
//! `mu = E[tanh(theta1 mu + h)]` solved elsewhere in this crate describe the
//! clique magnetization, and it is applied uniformly to the Gaussian,
//! universal, and Curie-Weiss-type special cases so they stay comparable.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Symmetric law of the external fields `h_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldDist {
    /// `h_i = 0`.
    Zero,
    /// `h_i = +a` or `-a` with probability 1/2 each.
    TwoPoint(f64),
    /// `h_i ~ N(0, s^2)`.
    CenteredGaussian(f64),
    /// `h_i = +-a + N(0, s^2)`; closure of `TwoPoint` under Gaussian
    /// convolution, produced by [`effective_field_params`].
    TwoPointPlusGaussian { a: f64, s: f64 },
}

impl FieldDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FieldDist::Zero => true,
            FieldDist::TwoPoint(a) => a > 0.0 && a.is_finite(),
            FieldDist::CenteredGaussian(s) => s > 0.0 && s.is_finite(),
            FieldDist::TwoPointPlusGaussian { a, s } => {
                a > 0.0 && a.is_finite() && s > 0.0 && s.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "field distribution must have positive finite scale: {self:?}"
            )))
        }
    }

    /// One draw of `h_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            FieldDist::Zero => 0.0,
            FieldDist::TwoPoint(a) => {
                if rng.gen::<bool>() {
                    a
                } else {
                    -a
                }
            }
            FieldDist::CenteredGaussian(s) => s * rng.sample::<f64, _>(StandardNormal),
            FieldDist::TwoPointPlusGaussian { a, s } => {
                let atom = if rng.gen::<bool>() { a } else { -a };
                atom + s * rng.sample::<f64, _>(StandardNormal)
            }
        }
    }

    /// Variance of the law.
    pub fn variance(&self) -> f64 {
        match *self {
            FieldDist::Zero => 0.0,
            FieldDist::TwoPoint(a) => a * a,
            FieldDist::CenteredGaussian(s) => s * s,
            FieldDist::TwoPointPlusGaussian { a, s } => a * a + s * s,
        }
    }

    /// Whether the law is the point mass at zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, FieldDist::Zero)
    }
}

/// Law of the couplings `g_ij`; all variants have mean 0, variance 1,
/// vanishing third moment, and finite fourth moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingDist {
    StandardGaussian,
    /// `+-1` equiprobable.
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]` (unit variance).
    ScaledUniform,
}

impl CouplingDist {
    /// One draw of `g_ij`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CouplingDist::StandardGaussian => rng.sample(StandardNormal),
            CouplingDist::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CouplingDist::ScaledUniform => {
                let r = 3.0_f64.sqrt();
                rng.gen_range(-r..r)
            }
        }
    }

    /// Fourth moment of the law.
    pub fn fourth_moment(&self) -> f64 {
        match self {
            CouplingDist::StandardGaussian => 3.0,
            CouplingDist::Rademacher => 1.0,
            CouplingDist::ScaledUniform => 9.0 / 5.0,
        }
    }
}

/// Full specification of one model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of spins.
    pub n: usize,
    /// Clique size.
    pub k: usize,
    /// SK coupling strength.
    pub theta: f64,
    /// Clique interaction strength (inverse temperature).
    pub theta1: f64,
    /// Sorted 0-based indices of the clique set `S`, `|S| = k`.
    pub clique: Vec<usize>,
    pub field_dist: FieldDist,
    pub coupling_dist: CouplingDist,
}

impl ModelParams {
    /// Instance with clique `{0, .., k-1}`, zero field, Gaussian couplings.
    pub fn new(n: usize, k: usize, theta: f64, theta1: f64) -> Result<Self> {
        let p = ModelParams {
            n,
            k,
            theta,
            theta1,
            clique: (0..k).collect(),
            field_dist: FieldDist::Zero,
            coupling_dist: CouplingDist::StandardGaussian,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_clique(mut self, clique: Vec<usize>) -> Result<Self> {
        self.clique = clique;
        self.clique.sort_unstable();
        self.validate()?;
        Ok(self)
    }

    pub fn with_field(mut self, field: FieldDist) -> Result<Self> {
        self.field_dist = field;
        self.validate()?;
        Ok(self)
    }

    pub fn with_couplings(mut self, couplings: CouplingDist) -> Self {
        self.coupling_dist = couplings;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return Err(Error::InvalidParams(format!(
                "need 1 <= k <= n, got n={} k={}",
                self.n, self.k
            )));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite())
            || !(self.theta1 >= 0.0 && self.theta1.is_finite())
        {
            return Err(Error::InvalidParams(format!(
                "coupling strengths must be finite and nonnegative, got theta={} theta1={}",
                self.theta, self.theta1
            )));
        }
        if self.clique.len() != self.k {
            return Err(Error::InvalidParams(format!(
                "clique has {} members, expected k={}",
                self.clique.len(),
                self.k
            )));
        }
        let mut prev: Option<usize> = None;
        for &i in &self.clique {
            if i >= self.n || prev.is_some_and(|p| p >= i) {
                return Err(Error::InvalidParams(
                    "clique must be strictly increasing indices in [0, n)".into(),
                ));
            }
            prev = Some(i);
        }
        self.field_dist.validate()?;
        Ok(())
    }

    /// Clique fraction `c = k/n`.
    pub fn c(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Membership mask of the clique.
    pub fn clique_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for &i in &self.clique {
            mask[i] = true;
        }
        mask
    }

    /// Copy with the clique interaction removed; the null hypothesis model.
    pub fn null_hypothesis(&self) -> ModelParams {
        let mut p = self.clone();
        p.theta1 = 0.0;
        p
    }
}

/// Index of the pair `(i, j)`, `i < j`, in the row-major upper triangle.
#[inline]
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// One quenched realization of couplings and fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    /// Upper-triangular couplings `g_ij` for `i < j`, row-major, length `n(n-1)/2`.
    pub couplings: Vec<f64>,
    /// Fields `h_i`, length `n`.
    pub fields: Vec<f64>,
}

impl Disorder {
    pub fn n(&self) -> usize {
        self.fields.len()
    }

    /// Coupling for an unordered pair of distinct sites.
    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.couplings[pair_index(a, b, self.n())]
    }

    /// Dense symmetric coupling matrix with zero diagonal, row-major.
    /// Used by sampling kernels for contiguous row access.
    pub fn symmetrized(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let g = self.couplings[pair_index(i, j, n)];
                m[i * n + j] = g;
                m[j * n + i] = g;
            }
        }
        m
    }
}

/// Disorder with the parameters and seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderFixture {
    pub params: ModelParams,
    pub seed: u64,
    pub disorder: Disorder,
}

impl DisorderFixture {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: DisorderFixture = serde_json::from_str(s)?;
        if f.disorder.fields.len() != f.params.n
            || f.disorder.couplings.len() != f.params.n * (f.params.n - 1) / 2
        {
            return Err(Error::Parse(
                "disorder dimensions disagree with params".into(),
            ));
        }
        Ok(f)
    }
}

/// One spin configuration, entries exactly `+-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinConfig {
    pub spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParams("spins must be +-1".into()));
        }
        Ok(SpinConfig { spins })
    }

    pub fn n(&self) -> usize {
        self.spins.len()
    }

    /// Total magnetization `sum_i s_i`.
    pub fn total_sum(&self) -> i64 {
        self.spins.iter().map(|&s| i64::from(s)).sum()
    }

    /// Clique magnetization `(1/k) sum_{i in S} s_i`.
    pub fn clique_mag(&self, clique: &[usize]) -> f64 {
        let s: i64 = clique.iter().map(|&i| i64::from(self.spins[i])).sum();
        s as f64 / clique.len() as f64
    }
}

/// Fresh disorder realization; deterministic given the stream state.
pub fn sample_disorder<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Disorder {
    let n = params.n;
    let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
    for _ in 0..n * (n - 1) / 2 {
        couplings.push(params.coupling_dist.sample(rng));
    }
    let fields = (0..n).map(|_| params.field_dist.sample(rng)).collect();
    Disorder { couplings, fields }
}

/// Energy of a configuration:
/// `-(theta/sqrt(n)) sum_{i<j} g_ij s_i s_j - (theta1/k) sum_{i<j in S} s_i s_j - sum_i h_i s_i`.
pub fn hamiltonian(params: &ModelParams, disorder: &Disorder, config: &SpinConfig) -> Result<f64> {
    let n = params.n;
    if config.n() != n || disorder.n() != n {
        return Err(Error::InvalidParams(format!(
            "dimension mismatch: params n={}, disorder n={}, config n={}",
            n,
            disorder.n(),
            config.n()
        )));
    }
    let s = &config.spins;
    let mut sk = 0.0;
    let mut idx = 0;
    for i in 0..n {
        let si = f64::from(s[i]);
        for &sj in &s[i + 1..] {
            sk += disorder.couplings[idx] * si * f64::from(sj);
            idx += 1;
        }
    }
    let mut clique = 0.0;
    for (a, &i) in params.clique.iter().enumerate() {
        for &j in &params.clique[(a + 1)..] {
            clique += f64::from(s[i]) * f64::from(s[j]);
        }
    }
    let field: f64 = (0..n).map(|i| disorder.fields[i] * f64::from(s[i])).sum();
    Ok(-(params.theta / (n as f64).sqrt()) * sk
        - (params.theta1 / params.k as f64) * clique
        - field)
}

/// Comparator parameter set with the SK term absorbed into the field law:
/// `theta = 0` and field convolved with independent `N(0, theta^2 q)` noise.
pub fn effective_field_params(params: &ModelParams, q: f64) -> Result<ModelParams> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParams(format!("q must be in [0,1), got {q}")));
    }
    let mut out = params.clone();
    let s_new = params.theta * q.sqrt();
    out.theta = 0.0;
    if s_new == 0.0 {
        return Ok(out);
    }
    out.field_dist = match params.field_dist {
        FieldDist::Zero => FieldDist::CenteredGaussian(s_new),
        FieldDist::TwoPoint(a) => FieldDist::TwoPointPlusGaussian { a, s: s_new },
        FieldDist::CenteredGaussian(s) => FieldDist::CenteredGaussian(s.hypot(s_new)),
        FieldDist::TwoPointPlusGaussian { a, s } => FieldDist::TwoPointPlusGaussian {
            a,
            s: s.hypot(s_new),
        },
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamRole};

    #[test]
    fn clique_only_energy() {
        let p = ModelParams::new(8, 4, 0.0, 1.0).unwrap();
        let d = Disorder {
            couplings: vec![0.0; 28],
            fields: vec![0.0; 8],
        };
        let cfg = SpinConfig::new(vec![1; 8]).unwrap();
        // 6 clique pairs at weight theta1/k = 1/4.
        let e = hamiltonian(&p, &d, &cfg).unwrap();
        assert!((e - (-1.5)).abs() < 1e-15);
    }

    #[test]
    fn global_flip_symmetry_without_field() {
        let p = ModelParams::new(6, 3, 0.7, 1.2).unwrap();
        let mut rng = substream(11, 0, StreamRole::Disorder);
        let d = sample_disorder(&p, &mut rng);
        for trial in 0..20 {
            let spins: Vec<i8> = (0..6)
                .map(|i| if (trial >> i) & 1 == 1 { 1 } else { -1 })
                .collect();
            let flipped: Vec<i8> = spins.iter().map(|&s| -s).collect();
            let a = hamiltonian(&p, &d, &SpinConfig::new(spins).unwrap()).unwrap();
            let b = hamiltonian(&p, &d, &SpinConfig::new(flipped).unwrap()).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_spin_energy() {
        let p = ModelParams {
            theta1: 0.0,
            ..ModelParams::new(2, 1, 0.9, 0.0).unwrap()
        };
        let d = Disorder {
            couplings: vec![1.7],
            fields: vec![0.0, 0.0],
        };
        let cfg = SpinConfig::new(vec![1, -1]).unwrap();
        let e = hamiltonian(&p, &d, &cfg).unwrap();
        assert!((e - 0.9 * 1.7 / 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn disorder_reproducible_and_validated() {
        let p = ModelParams::new(10, 3, 0.4, 0.8)
            .unwrap()
            .with_field(FieldDist::TwoPoint(0.3))
            .unwrap();
        let d1 = sample_disorder(&p, &mut substream(5, 0, StreamRole::Disorder));
        let d2 = sample_disorder(&p, &mut substream(5, 0, StreamRole::Disorder));
        assert_eq!(d1, d2);
        assert!(d1.fields.iter().all(|&h| h.abs() == 0.3));
        let json = DisorderFixture {
            params: p,
            seed: 5,
            disorder: d1.clone(),
        }
        .to_json()
        .unwrap();
        let back = DisorderFixture::from_json(&json).unwrap();
        assert_eq!(back.disorder, d1);
    }

    #[test]
    fn rademacher_moments() {
        let p = ModelParams::new(50, 5, 0.4, 0.8)
            .unwrap()
            .with_couplings(CouplingDist::Rademacher);
        let d = sample_disorder(&p, &mut substream(1, 0, StreamRole::Disorder));
        assert!(d.couplings.iter().all(|&g| g == 1.0 || g == -1.0));
        let m4: f64 = d.couplings.iter().map(|g| g.powi(4)).sum::<f64>() / d.couplings.len() as f64;
        assert_eq!(m4, 1.0);
    }

    #[test]
    fn gaussian_law_of_large_numbers() {
        let p = ModelParams::new(1500, 5, 0.4, 0.8).unwrap();
        let d = sample_disorder(&p, &mut substream(2, 0, StreamRole::Disorder));
        let n = d.couplings.len() as f64;
        let mean = d.couplings.iter().sum::<f64>() / n;
        let var = d.couplings.iter().map(|g| g * g).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn effective_field_composition() {
        let p = ModelParams::new(20, 4, 0.5, 0.8).unwrap();
        let eff = effective_field_params(&p, 0.16).unwrap();
        assert_eq!(eff.theta, 0.0);
        assert_eq!(eff.field_dist, FieldDist::CenteredGaussian(0.2));

        let p2 = p.clone().with_field(FieldDist::TwoPoint(0.3)).unwrap();
        let p2 = ModelParams { theta: 0.4, ..p2 };
        let eff2 = effective_field_params(&p2, 0.25).unwrap();
        assert_eq!(
            eff2.field_dist,
            FieldDist::TwoPointPlusGaussian { a: 0.3, s: 0.2 }
        );
        assert!((eff2.field_dist.variance() - (0.09 + 0.04)).abs() < 1e-15);

        let p3 = ModelParams {
            theta: 0.0,
            ..p.clone()
        };
        let eff3 = effective_field_params(&p3, 0.5).unwrap();
        assert_eq!(eff3, p3);
        assert!(effective_field_params(&p, 1.0).is_err());
    }

    #[test]
    fn clique_locality_with_theta_zero() {
        let p = ModelParams {
            theta: 0.0,
            ..ModelParams::new(9, 3, 0.0, 1.1).unwrap()
        };
        let p = p.with_field(FieldDist::TwoPoint(0.4)).unwrap();
        let d = sample_disorder(&p, &mut substream(3, 0, StreamRole::Disorder));
        let mut spins = vec![1i8; 9];
        let e0 = hamiltonian(&p, &d, &SpinConfig::new(spins.clone()).unwrap()).unwrap();
        // Site 7 is outside the clique {0,1,2}; flipping it moves the energy
        // by exactly twice its field term.
        spins[7] = -1;
        let e1 = hamiltonian(&p, &d, &SpinConfig::new(spins).unwrap()).unwrap();
        assert!((e1 - e0 - 2.0 * d.fields[7]).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(5, 6, 0.1, 0.1).is_err());
        assert!(ModelParams::new(0, 0, 0.1, 0.1).is_err());
        assert!(ModelParams::new(5, 2, -0.1, 0.1).is_err());
        assert!(ModelParams::new(5, 2, 0.1, 0.1)
            .unwrap()
            .with_clique(vec![1, 1])
            .is_err());
        assert!(ModelParams::new(5, 2, 0.1, 0.1)
            .unwrap()
            .with_clique(vec![3, 5])
            .is_err());
        assert!(SpinConfig::new(vec![1, 0, -1]).is_err());
    }
}
