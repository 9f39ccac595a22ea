//! Heat-bath Gibbs sampling and batch observation drawing.
//!
//! Each observation runs its own chain on its own RNG substream, so batches
//! are reproducible bit-for-bit regardless of how the work is scheduled.
//! The sweep kernel keeps the symmetrized coupling matrix in row-major order
//! and the spins as `f64`, so the local-field dot product stays a contiguous
//! multiply-add loop.

use crate::error::{Error, Result};
use crate::model::{sample_disorder, Disorder, ModelParams, SpinConfig};
use crate::rng::{substream, StreamRole};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Chain initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    UniformRandom,
    AllPlus,
    AllMinus,
}

/// MCMC schedule for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burn_in_sweeps: usize,
    pub thin_sweeps: usize,
    pub init: Init,
}

impl ChainConfig {
    /// Conservative default schedule for system size `n`: burn-in `50 n`
    /// sweeps, thinning `n` sweeps.
    pub fn for_size(n: usize) -> Self {
        ChainConfig {
            burn_in_sweeps: 50 * n,
            thin_sweeps: n.max(1),
            init: Init::UniformRandom,
        }
    }

    /// Explicit schedule; mixing should be validated with the burn-in
    /// doubling probe on new parameter ranges.
    pub fn with_burn_in(burn_in_sweeps: usize) -> Self {
        ChainConfig {
            burn_in_sweeps,
            thin_sweeps: 1,
            init: Init::UniformRandom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin_sweeps == 0 {
            return Err(Error::InvalidParams("thin_sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// One heat-bath chain bound to a fixed disorder realization.
pub struct GibbsChain<'a> {
    n: usize,
    theta_scaled: f64,
    theta1_scaled: f64,
    sym: &'a [f64],
    fields: &'a [f64],
    mask: &'a [bool],
    spins: Vec<f64>,
    clique_sum: f64,
}

impl<'a> GibbsChain<'a> {
    /// `sym` is the dense symmetrized coupling matrix, `fields` the field
    /// vector, `mask` the clique membership mask.
    pub fn new<R: Rng + ?Sized>(
        params: &ModelParams,
        sym: &'a [f64],
        fields: &'a [f64],
        mask: &'a [bool],
        init: Init,
        rng: &mut R,
    ) -> Self {
        let n = params.n;
        let spins: Vec<f64> = match init {
            Init::AllPlus => vec![1.0; n],
            Init::AllMinus => vec![-1.0; n],
            Init::UniformRandom => (0..n)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        };
        let clique_sum = (0..n).filter(|&i| mask[i]).map(|i| spins[i]).sum();
        GibbsChain {
            n,
            theta_scaled: params.theta / (n as f64).sqrt(),
            theta1_scaled: params.theta1 / params.k as f64,
            sym,
            fields,
            mask,
            spins,
            clique_sum,
        }
    }

    /// Local field at site `i` under the current configuration.
    #[inline]
    fn local_field(&self, i: usize) -> f64 {
        let mut ell = self.fields[i];
        if self.theta_scaled != 0.0 {
            let row = &self.sym[i * self.n..(i + 1) * self.n];
            // Four independent accumulators keep the reduction vectorizable.
            let mut acc = [0.0f64; 4];
            let mut chunks_r = row.chunks_exact(4);
            let mut chunks_s = self.spins.chunks_exact(4);
            for (r, s) in (&mut chunks_r).zip(&mut chunks_s) {
                acc[0] += r[0] * s[0];
                acc[1] += r[1] * s[1];
                acc[2] += r[2] * s[2];
                acc[3] += r[3] * s[3];
            }
            let mut dot = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for (r, s) in chunks_r.remainder().iter().zip(chunks_s.remainder()) {
                dot += r * s;
            }
            ell += self.theta_scaled * dot;
        }
        if self.mask[i] {
            ell += self.theta1_scaled * (self.clique_sum - self.spins[i]);
        }
        ell
    }

    /// One full sweep in fixed site order with heat-bath updates
    /// `P(s_i = +1) = 1 / (1 + exp(-2 l_i))`.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for i in 0..self.n {
            let ell = self.local_field(i);
            let p_plus = 1.0 / (1.0 + (-2.0 * ell).exp());
            let new = if rng.gen::<f64>() < p_plus { 1.0 } else { -1.0 };
            let old = self.spins[i];
            if new != old {
                self.spins[i] = new;
                if self.mask[i] {
                    self.clique_sum += new - old;
                }
            }
        }
    }

    pub fn run_sweeps<R: Rng + ?Sized>(&mut self, sweeps: usize, rng: &mut R) {
        for _ in 0..sweeps {
            self.sweep(rng);
        }
    }

    pub fn config(&self) -> SpinConfig {
        SpinConfig {
            spins: self
                .spins
                .iter()
                .map(|&s| if s > 0.0 { 1 } else { -1 })
                .collect(),
        }
    }
}

/// One heat-bath sweep over a configuration; convenience wrapper that
/// rebuilds the dense coupling matrix on each call.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    config: &SpinConfig,
    params: &ModelParams,
    disorder: &Disorder,
    rng: &mut R,
) -> Result<SpinConfig> {
    params.validate()?;
    if config.n() != params.n || disorder.n() != params.n {
        return Err(Error::InvalidParams("dimension mismatch".into()));
    }
    let sym = disorder.symmetrized();
    let mask = params.clique_mask();
    let mut chain = GibbsChain::new(params, &sym, &disorder.fields, &mask, Init::AllPlus, rng);
    chain.spins = config.spins.iter().map(|&s| f64::from(s)).collect();
    chain.clique_sum = params.clique.iter().map(|&i| chain.spins[i]).sum();
    chain.sweep(rng);
    Ok(chain.config())
}

/// A batch of `m` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub params: ModelParams,
    pub seed: u64,
    pub fresh_disorder: bool,
    pub m: usize,
    /// Row-major `m x n` spins, entries `+-1`.
    pub spins: Vec<i8>,
}

impl SampleBatch {
    pub fn config(&self, j: usize) -> &[i8] {
        &self.spins[j * self.params.n..(j + 1) * self.params.n]
    }

    /// Clique magnetization `(1/k) sum_{i in S} s_i` per observation.
    pub fn clique_mags(&self) -> Vec<f64> {
        let k = self.params.k as f64;
        (0..self.m)
            .map(|j| {
                let row = self.config(j);
                self.params
                    .clique
                    .iter()
                    .map(|&i| f64::from(row[i]))
                    .sum::<f64>()
                    / k
            })
            .collect()
    }

    /// Total spin sum per observation.
    pub fn total_sums(&self) -> Vec<f64> {
        (0..self.m)
            .map(|j| self.config(j).iter().map(|&s| f64::from(s)).sum::<f64>())
            .collect()
    }

    /// Empirical second-moment matrix `(1/m) sum_j s s^T`, dense `n x n`.
    pub fn second_moment_matrix(&self) -> Vec<f64> {
        let n = self.params.n;
        let mut e = vec![0.0f64; n * n];
        for j in 0..self.m {
            let row = self.config(j);
            for a in 0..n {
                let sa = f64::from(row[a]);
                let out = &mut e[a * n..(a + 1) * n];
                for (b, v) in out.iter_mut().enumerate() {
                    *v += sa * f64::from(row[b]);
                }
            }
        }
        let inv = 1.0 / self.m as f64;
        for v in &mut e {
            *v *= inv;
        }
        e
    }

    const MAGIC: &'static [u8; 8] = b"GLSB0001";

    /// Compact binary encoding: magic, JSON header, then one bit per spin
    /// (bit set means `+1`), each observation padded to a byte boundary.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        #[derive(Serialize)]
        struct Header<'a> {
            params: &'a ModelParams,
            seed: u64,
            fresh_disorder: bool,
            m: usize,
        }
        let header = serde_json::to_vec(&Header {
            params: &self.params,
            seed: self.seed,
            fresh_disorder: self.fresh_disorder,
            m: self.m,
        })?;
        let n = self.params.n;
        let row_bytes = n.div_ceil(8);
        let mut out = Vec::with_capacity(16 + header.len() + self.m * row_bytes);
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for j in 0..self.m {
            let row = self.config(j);
            let mut bytes = vec![0u8; row_bytes];
            for (i, &s) in row.iter().enumerate() {
                if s > 0 {
                    bytes[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&bytes);
        }
        Ok(out)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            params: ModelParams,
            seed: u64,
            fresh_disorder: bool,
            m: usize,
        }
        if data.len() < 12 || &data[..8] != Self::MAGIC {
            return Err(Error::Parse("bad magic in batch file".into()));
        }
        let hlen = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
        let body = data
            .get(12..12 + hlen)
            .ok_or_else(|| Error::Parse("truncated batch header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        header.params.validate()?;
        let n = header.params.n;
        let row_bytes = n.div_ceil(8);
        let bits = &data[12 + hlen..];
        if bits.len() != header.m * row_bytes {
            return Err(Error::Parse("truncated batch payload".into()));
        }
        let mut spins = Vec::with_capacity(header.m * n);
        for j in 0..header.m {
            let row = &bits[j * row_bytes..(j + 1) * row_bytes];
            for i in 0..n {
                spins.push(if row[i / 8] >> (i % 8) & 1 == 1 {
                    1
                } else {
                    -1
                });
            }
        }
        Ok(SampleBatch {
            params: header.params,
            seed: header.seed,
            fresh_disorder: header.fresh_disorder,
            m: header.m,
            spins,
        })
    }

    pub fn write_binary(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes()?)?)
    }

    pub fn read_binary(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// CSV export, rows are observations and columns spins.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.params.n;
        let header: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.m {
            let row: Vec<String> = self.config(j).iter().map(|s| s.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn one_observation(
    params: &ModelParams,
    chain: &ChainConfig,
    shared: Option<&(Vec<f64>, Vec<f64>)>,
    mask: &[bool],
    seed: u64,
    obs: u64,
) -> Vec<i8> {
    let owned;
    let (sym, fields) = match shared {
        Some((sym, fields)) => (sym.as_slice(), fields.as_slice()),
        None => {
            let mut rng = substream(seed, obs, StreamRole::Disorder);
            let d = sample_disorder(params, &mut rng);
            owned = (d.symmetrized(), d.fields);
            (owned.0.as_slice(), owned.1.as_slice())
        }
    };
    let mut rng = substream(seed, obs, StreamRole::Chain(0));
    let mut gc = GibbsChain::new(params, sym, fields, mask, chain.init, &mut rng);
    gc.run_sweeps(chain.burn_in_sweeps, &mut rng);
    gc.config().spins
}

/// Draw `m` observations. With `fresh_disorder`, every observation gets an
/// independent disorder realization; otherwise one realization (derived from
/// observation index 0) is shared. Every observation runs its own burned-in
/// chain.
pub fn draw_batch(
    params: &ModelParams,
    m: usize,
    chain: &ChainConfig,
    fresh_disorder: bool,
    seed: u64,
) -> Result<SampleBatch> {
    params.validate()?;
    chain.validate()?;
    if m == 0 {
        return Err(Error::InvalidParams("need m >= 1 observations".into()));
    }
    let mask = params.clique_mask();
    let shared = if fresh_disorder {
        None
    } else {
        let mut rng = substream(seed, 0, StreamRole::Disorder);
        let d = sample_disorder(params, &mut rng);
        Some((d.symmetrized(), d.fields))
    };
    let rows: Vec<Vec<i8>> = (0..m as u64)
        .into_par_iter()
        .map(|obs| one_observation(params, chain, shared.as_ref(), &mask, seed, obs))
        .collect();
    let mut spins = Vec::with_capacity(m * params.n);
    for r in rows {
        spins.extend_from_slice(&r);
    }
    Ok(SampleBatch {
        params: params.clone(),
        seed,
        fresh_disorder,
        m,
        spins,
    })
}

/// Two independent chains on the same disorder; the replica pair behind
/// `R_{1,2} = (1/n) sum_i s_i^1 s_i^2`.
pub fn draw_replica_pair<R: Rng + ?Sized>(
    params: &ModelParams,
    disorder: &Disorder,
    chain: &ChainConfig,
    rng: &mut R,
) -> Result<(SpinConfig, SpinConfig)> {
    params.validate()?;
    chain.validate()?;
    let sym = disorder.symmetrized();
    let mask = params.clique_mask();
    let mut run = || {
        let mut gc = GibbsChain::new(params, &sym, &disorder.fields, &mask, chain.init, rng);
        gc.run_sweeps(chain.burn_in_sweeps, rng);
        gc.config()
    };
    Ok((run(), run()))
}

/// Batch of replica pairs with one disorder per pair (or shared).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaPairs {
    pub params: ModelParams,
    pub seed: u64,
    pub m: usize,
    pub a: Vec<i8>,
    pub b: Vec<i8>,
}

impl ReplicaPairs {
    /// Overlap `(1/n) sum_i a_i b_i` per pair.
    pub fn overlaps(&self) -> Vec<f64> {
        let n = self.params.n;
        (0..self.m)
            .map(|j| {
                let (xa, xb) = (&self.a[j * n..(j + 1) * n], &self.b[j * n..(j + 1) * n]);
                xa.iter()
                    .zip(xb)
                    .map(|(&x, &y)| f64::from(x * y))
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }
}

pub fn draw_replica_pairs(
    params: &ModelParams,
    m: usize,
    chain: &ChainConfig,
    fresh_disorder: bool,
    seed: u64,
) -> Result<ReplicaPairs> {
    params.validate()?;
    chain.validate()?;
    if m == 0 {
        return Err(Error::InvalidParams("need m >= 1 pairs".into()));
    }
    let mask = params.clique_mask();
    let shared = if fresh_disorder {
        None
    } else {
        let mut rng = substream(seed, 0, StreamRole::Disorder);
        let d = sample_disorder(params, &mut rng);
        Some((d.symmetrized(), d.fields))
    };
    let pairs: Vec<(Vec<i8>, Vec<i8>)> = (0..m as u64)
        .into_par_iter()
        .map(|obs| {
            let owned;
            let (sym, fields) = match &shared {
                Some((sym, fields)) => (sym.as_slice(), fields.as_slice()),
                None => {
                    let mut rng = substream(seed, obs, StreamRole::Disorder);
                    let d = sample_disorder(params, &mut rng);
                    owned = (d.symmetrized(), d.fields);
                    (owned.0.as_slice(), owned.1.as_slice())
                }
            };
            let run = |c: u32| {
                let mut rng = substream(seed, obs, StreamRole::Chain(c));
                let mut gc = GibbsChain::new(params, sym, fields, &mask, chain.init, &mut rng);
                gc.run_sweeps(chain.burn_in_sweeps, &mut rng);
                gc.config().spins
            };
            (run(0), run(1))
        })
        .collect();
    let mut a = Vec::with_capacity(m * params.n);
    let mut b = Vec::with_capacity(m * params.n);
    for (xa, xb) in pairs {
        a.extend_from_slice(&xa);
        b.extend_from_slice(&xb);
    }
    Ok(ReplicaPairs {
        params: params.clone(),
        seed,
        m,
        a,
        b,
    })
}

/// Successive thinned samples from a single chain on one disorder.
pub fn draw_thinned(
    params: &ModelParams,
    disorder: &Disorder,
    chain: &ChainConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<SpinConfig>> {
    params.validate()?;
    chain.validate()?;
    let sym = disorder.symmetrized();
    let mask = params.clique_mask();
    let mut rng = substream(seed, 0, StreamRole::Chain(0));
    let mut gc = GibbsChain::new(params, &sym, &disorder.fields, &mask, chain.init, &mut rng);
    gc.run_sweeps(chain.burn_in_sweeps, &mut rng);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        gc.run_sweeps(chain.thin_sweeps, &mut rng);
        out.push(gc.config());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldDist;

    #[test]
    fn batch_reproducible() {
        let p = ModelParams::new(12, 4, 0.3, 0.6).unwrap();
        let chain = ChainConfig {
            burn_in_sweeps: 30,
            thin_sweeps: 1,
            init: Init::UniformRandom,
        };
        let b1 = draw_batch(&p, 3, &chain, true, 42).unwrap();
        let b2 = draw_batch(&p, 3, &chain, true, 42).unwrap();
        assert_eq!(b1, b2);
        let b3 = draw_batch(&p, 3, &chain, true, 43).unwrap();
        assert_ne!(b1.spins, b3.spins);
    }

    #[test]
    fn saturated_field_aligns_all_spins() {
        let n = 10;
        let p = ModelParams::new(n, 2, 0.0, 0.0)
            .unwrap()
            .with_field(FieldDist::TwoPoint(10.0))
            .unwrap();
        let mut rng = substream(1, 0, StreamRole::Disorder);
        let d = sample_disorder(&p, &mut rng);
        let cfg = SpinConfig::new(vec![-1; n]).unwrap();
        let mut chain_rng = substream(1, 0, StreamRole::Chain(0));
        let out = gibbs_sweep(&cfg, &p, &d, &mut chain_rng).unwrap();
        for i in 0..n {
            assert_eq!(f64::from(out.spins[i]).signum(), d.fields[i].signum());
        }
    }

    #[test]
    fn fair_coins_at_infinite_temperature() {
        let p = ModelParams::new(16, 4, 0.0, 0.0).unwrap();
        let chain = ChainConfig {
            burn_in_sweeps: 2,
            thin_sweeps: 1,
            init: Init::AllPlus,
        };
        let b = draw_batch(&p, 2000, &chain, true, 7).unwrap();
        let mean: f64 = b.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / b.spins.len() as f64;
        // 4 sigma band for 32000 fair signs.
        assert!(
            mean.abs() < 4.0 / (b.spins.len() as f64).sqrt() + 1e-9,
            "mean {mean}"
        );
    }

    #[test]
    fn binary_and_csv_roundtrip() {
        let p = ModelParams::new(11, 3, 0.2, 0.4).unwrap();
        let chain = ChainConfig {
            burn_in_sweeps: 10,
            thin_sweeps: 1,
            init: Init::UniformRandom,
        };
        let b = draw_batch(&p, 5, &chain, false, 9).unwrap();
        let bytes = b.to_bytes().unwrap();
        let back = SampleBatch::from_bytes(&bytes).unwrap();
        assert_eq!(b, back);

        let mut csv = Vec::new();
        b.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .all(|t| t == "1" || t == "-1"));
    }

    #[test]
    fn replica_pair_deterministic_and_overlap_range() {
        let p = ModelParams::new(14, 5, 0.4, 0.9).unwrap();
        let chain = ChainConfig {
            burn_in_sweeps: 40,
            thin_sweeps: 1,
            init: Init::UniformRandom,
        };
        let r1 = draw_replica_pairs(&p, 4, &chain, true, 3).unwrap();
        let r2 = draw_replica_pairs(&p, 4, &chain, true, 3).unwrap();
        assert_eq!(r1, r2);
        for o in r1.overlaps() {
            assert!((-1.0..=1.0).contains(&o));
        }
    }

    #[test]
    fn second_moment_matrix_diagonal_is_one() {
        let p = ModelParams::new(9, 3, 0.3, 0.5).unwrap();
        let chain = ChainConfig {
            burn_in_sweeps: 20,
            thin_sweeps: 1,
            init: Init::UniformRandom,
        };
        let b = draw_batch(&p, 50, &chain, true, 11).unwrap();
        let e = b.second_moment_matrix();
        for i in 0..9 {
            assert!((e[i * 9 + i] - 1.0).abs() < 1e-12);
        }
        for i in 0..9 {
            for j in 0..9 {
                assert!((e[i * 9 + j] - e[j * 9 + i]).abs() < 1e-12);
            }
        }
    }
}
