//! Exact Gibbs expectations by exhaustive enumeration of all `2^n`
//! configurations; the ground truth for sampler and variance checks at
//! small `n`.
//!
//! Enumeration walks a Gray code so each step flips one spin and updates the
//! energy in `O(n)`. Accumulation is streamed (no `2^n` table) with
//! compensated summation, and index ranges are partitioned into fixed-size
//! chunks merged in order, so results are bit-stable for any worker count.

use crate::error::{Error, Result};
use crate::model::{hamiltonian, pair_index, sample_disorder, Disorder, ModelParams, SpinConfig};
use crate::rng::{substream, StreamRole};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest system the oracle will enumerate.
pub const MAX_EXACT_N: usize = 22;

const CHUNK_BITS: u32 = 16;

/// Exact moments of one Gibbs measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    /// `log Z`.
    pub log_partition: f64,
    /// `<s_i>` for every site.
    pub site_means: Vec<f64>,
    /// `<s_i s_j>` for `i < j`, row-major upper triangle.
    pub pair_means: Vec<f64>,
    /// `<m>` with `m = (1/k) sum_{i in S} s_i`.
    pub mean_clique_mag: f64,
    /// `<m^2>`.
    pub mean_sq_clique_mag: f64,
    /// `<R_{1,2}> = (1/n) sum_i <s_i>^2` for independent replicas.
    pub mean_replica_overlap: f64,
    /// `<|m|>`.
    pub mean_abs_mag: f64,
}

impl ExactMoments {
    /// `<s_i s_j>` for distinct sites.
    pub fn pair_mean(&self, i: usize, j: usize, n: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pair_means[pair_index(a, b, n)]
    }
}

/// Exact moments with provenance, the golden-fixture payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFixture {
    pub params: ModelParams,
    pub seed: u64,
    pub moments: ExactMoments,
}

/// Quenched (disorder-averaged) moments with Monte Carlo standard errors for
/// the scalar summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchedMoments {
    pub mean: ExactMoments,
    pub n_disorder: usize,
    pub se_log_partition: f64,
    pub se_clique_mag: f64,
    pub se_sq_clique_mag: f64,
    pub se_replica_overlap: f64,
    pub se_abs_mag: f64,
}

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn merge(&mut self, other: Kahan) {
        self.add(other.sum);
        self.add(-other.c);
    }

    fn total(self) -> f64 {
        self.sum - self.c
    }
}

struct Accum {
    z: Kahan,
    site: Vec<Kahan>,
    pair: Vec<Kahan>,
    m1: Kahan,
    m2: Kahan,
    mabs: Kahan,
}

impl Accum {
    fn new(n: usize) -> Self {
        Accum {
            z: Kahan::default(),
            site: vec![Kahan::default(); n],
            pair: vec![Kahan::default(); n * (n - 1) / 2],
            m1: Kahan::default(),
            m2: Kahan::default(),
            mabs: Kahan::default(),
        }
    }

    fn merge(&mut self, other: Accum) {
        self.z.merge(other.z);
        for (a, b) in self.site.iter_mut().zip(other.site) {
            a.merge(b);
        }
        for (a, b) in self.pair.iter_mut().zip(other.pair) {
            a.merge(b);
        }
        self.m1.merge(other.m1);
        self.m2.merge(other.m2);
        self.mabs.merge(other.mabs);
    }
}

/// State of the Gray-code walk: spins, clique sum, and current energy.
struct Walk<'a> {
    spins: Vec<f64>,
    clique_sum: f64,
    energy: f64,
    sym: &'a [f64],
    mask: &'a [bool],
    fields: &'a [f64],
    theta_s: f64,
    theta1_k: f64,
    n: usize,
}

impl<'a> Walk<'a> {
    fn at_index(
        params: &ModelParams,
        disorder: &'a Disorder,
        sym: &'a [f64],
        mask: &'a [bool],
        index: u64,
    ) -> Result<Self> {
        let n = params.n;
        let gray = index ^ (index >> 1);
        let spins_i8: Vec<i8> = (0..n)
            .map(|j| if (gray >> j) & 1 == 1 { 1 } else { -1 })
            .collect();
        let energy = hamiltonian(params, disorder, &SpinConfig::new(spins_i8.clone())?)?;
        let spins: Vec<f64> = spins_i8.iter().map(|&s| f64::from(s)).collect();
        let clique_sum = params.clique.iter().map(|&i| spins[i]).sum();
        Ok(Walk {
            spins,
            clique_sum,
            energy,
            sym,
            mask: &mask[..n],
            fields: &disorder.fields[..n],
            theta_s: params.theta / (n as f64).sqrt(),
            theta1_k: params.theta1 / params.k as f64,
            n,
        })
    }

    /// Flip site `b` and update the energy.
    #[inline]
    fn flip(&mut self, b: usize) {
        let row = &self.sym[b * self.n..(b + 1) * self.n];
        let mut dot = 0.0;
        for (g, s) in row.iter().zip(&self.spins) {
            dot += g * s;
        }
        let sb = self.spins[b];
        let mut local = self.theta_s * dot + self.fields[b];
        if self.mask[b] {
            local += self.theta1_k * (self.clique_sum - sb);
        }
        self.energy += 2.0 * sb * local;
        self.spins[b] = -sb;
        if self.mask[b] {
            self.clique_sum -= 2.0 * sb;
        }
    }
}

fn min_energy_in_range(
    params: &ModelParams,
    disorder: &Disorder,
    sym: &[f64],
    mask: &[bool],
    lo: u64,
    hi: u64,
) -> Result<f64> {
    let mut walk = Walk::at_index(params, disorder, sym, mask, lo)?;
    let mut best = walk.energy;
    for i in (lo + 1)..hi {
        walk.flip(i.trailing_zeros() as usize);
        best = best.min(walk.energy);
    }
    Ok(best)
}

fn accumulate_range(
    params: &ModelParams,
    disorder: &Disorder,
    sym: &[f64],
    mask: &[bool],
    shift: f64,
    lo: u64,
    hi: u64,
) -> Result<Accum> {
    let n = params.n;
    let k = params.k as f64;
    let mut walk = Walk::at_index(params, disorder, sym, mask, lo)?;
    let mut acc = Accum::new(n);
    let mut i = lo;
    loop {
        let w = (shift - walk.energy).exp();
        acc.z.add(w);
        for (site, s) in acc.site.iter_mut().zip(&walk.spins) {
            site.add(w * s);
        }
        let mut idx = 0;
        for a in 0..n {
            let wa = w * walk.spins[a];
            for b in (a + 1)..n {
                acc.pair[idx].add(wa * walk.spins[b]);
                idx += 1;
            }
        }
        let m = walk.clique_sum / k;
        acc.m1.add(w * m);
        acc.m2.add(w * m * m);
        acc.mabs.add(w * m.abs());
        i += 1;
        if i >= hi {
            break;
        }
        walk.flip(i.trailing_zeros() as usize);
    }
    Ok(acc)
}

/// Exact Gibbs moments of one instance; `n <= 22`.
pub fn exact_moments(params: &ModelParams, disorder: &Disorder) -> Result<ExactMoments> {
    params.validate()?;
    let n = params.n;
    if n > MAX_EXACT_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_EXACT_N,
        });
    }
    if disorder.n() != n || disorder.couplings.len() != n * (n - 1) / 2 {
        return Err(Error::InvalidParams(
            "disorder dimensions disagree with params".into(),
        ));
    }
    let sym = disorder.symmetrized();
    let mask = params.clique_mask();
    let total: u64 = 1 << n;
    let chunk: u64 = 1 << CHUNK_BITS.min(n as u32);
    let ranges: Vec<(u64, u64)> = (0..total.div_ceil(chunk))
        .map(|c| (c * chunk, ((c + 1) * chunk).min(total)))
        .collect();

    // Pass 1: ground-state shift for the log-sum-exp.
    let e_min = ranges
        .par_iter()
        .map(|&(lo, hi)| min_energy_in_range(params, disorder, &sym, &mask, lo, hi))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);

    // Pass 2: weighted accumulation with weights exp(e_min - H) <= 1.
    let parts = ranges
        .par_iter()
        .map(|&(lo, hi)| accumulate_range(params, disorder, &sym, &mask, e_min, lo, hi))
        .collect::<Result<Vec<Accum>>>()?;
    let mut acc = Accum::new(n);
    for p in parts {
        acc.merge(p);
    }

    let z = acc.z.total();
    let site_means: Vec<f64> = acc.site.iter().map(|s| s.total() / z).collect();
    let pair_means: Vec<f64> = acc.pair.iter().map(|s| s.total() / z).collect();
    let overlap = site_means.iter().map(|m| m * m).sum::<f64>() / n as f64;
    Ok(ExactMoments {
        log_partition: z.ln() - e_min,
        site_means,
        pair_means,
        mean_clique_mag: acc.m1.total() / z,
        mean_sq_clique_mag: acc.m2.total() / z,
        mean_replica_overlap: overlap,
        mean_abs_mag: acc.mabs.total() / z,
    })
}

/// Mean of [`exact_moments`] over `n_disorder` fresh disorder draws, with
/// standard errors of the scalar summaries.
pub fn quenched_average(
    params: &ModelParams,
    n_disorder: usize,
    seed: u64,
) -> Result<QuenchedMoments> {
    if n_disorder == 0 {
        return Err(Error::InvalidParams(
            "need at least one disorder draw".into(),
        ));
    }
    let all = (0..n_disorder as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i, StreamRole::Disorder);
            let disorder = sample_disorder(params, &mut rng);
            exact_moments(params, &disorder)
        })
        .collect::<Result<Vec<ExactMoments>>>()?;

    let n = params.n;
    let cnt = n_disorder as f64;
    let mut mean = ExactMoments {
        log_partition: 0.0,
        site_means: vec![0.0; n],
        pair_means: vec![0.0; n * (n - 1) / 2],
        mean_clique_mag: 0.0,
        mean_sq_clique_mag: 0.0,
        mean_replica_overlap: 0.0,
        mean_abs_mag: 0.0,
    };
    for m in &all {
        mean.log_partition += m.log_partition / cnt;
        for (a, b) in mean.site_means.iter_mut().zip(&m.site_means) {
            *a += b / cnt;
        }
        for (a, b) in mean.pair_means.iter_mut().zip(&m.pair_means) {
            *a += b / cnt;
        }
        mean.mean_clique_mag += m.mean_clique_mag / cnt;
        mean.mean_sq_clique_mag += m.mean_sq_clique_mag / cnt;
        mean.mean_replica_overlap += m.mean_replica_overlap / cnt;
        mean.mean_abs_mag += m.mean_abs_mag / cnt;
    }

    let se = |f: &dyn Fn(&ExactMoments) -> f64, mu: f64| -> f64 {
        if n_disorder < 2 {
            return f64::NAN;
        }
        let var = all.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / (cnt - 1.0);
        (var / cnt).sqrt()
    };
    Ok(QuenchedMoments {
        n_disorder,
        se_log_partition: se(&|m| m.log_partition, mean.log_partition),
        se_clique_mag: se(&|m| m.mean_clique_mag, mean.mean_clique_mag),
        se_sq_clique_mag: se(&|m| m.mean_sq_clique_mag, mean.mean_sq_clique_mag),
        se_replica_overlap: se(&|m| m.mean_replica_overlap, mean.mean_replica_overlap),
        se_abs_mag: se(&|m| m.mean_abs_mag, mean.mean_abs_mag),
        mean,
    })
}
