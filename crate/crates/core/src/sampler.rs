//! Dynamic weighted sampling with O(1) multiplicative updates.
//!
//! Each live weight is stored as `frac * 2^(k + scale)` with `frac` in `[1, 2)`.
//! Entries sharing the exponent `k` form bucket `k`, i.e. the half-open weight
//! range `[2^k, 2^(k+1))` in units of `2^scale`. Sampling picks a bucket in
//! proportion to its sum by a linear scan over the nonempty buckets, then
//! rejection-samples a member, accepting with probability `frac / 2 >= 1/2`.
//!
//! Exponents are unbounded integers, so weights like `(1+eps)^y` never
//! overflow, and the ratio between any two entries is exactly the ratio of the
//! factors applied to them.
//!
//! Bucket sums are maintained incrementally and recomputed from their members
//! when a bucket has seen more updates than it has members or has shrunk to
//! half its size since the last recomputation; both costs amortize to O(1).

use rand::Rng;

use crate::error::{Error, Result};
use crate::scaled::{frexp, pow2, ScaledF64};

const NONE: u32 = u32::MAX;
const MIN_RECOMPUTE_OPS: usize = 64;

#[derive(Clone, Debug, Default)]
struct Bucket {
    members: Vec<u32>,
    sum: f64,
    ops_since_exact: usize,
    len_at_exact: usize,
    /// Position in `SamplableVector::nonempty`, or NONE.
    slot: u32,
}

/// Counters for amortized-cost audits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SamplerStats {
    pub updates: u64,
    pub bucket_moves: u64,
    pub recomputes: u64,
}

#[derive(Clone, Debug)]
pub struct SamplableVector {
    frac: Vec<f64>,
    exp: Vec<i64>,
    pos: Vec<u32>,
    buckets: Vec<Bucket>,
    base: i64,
    nonempty: Vec<i64>,
    scale: i64,
    live: usize,
    stats: SamplerStats,
}

impl SamplableVector {
    /// Builds the structure over nonnegative `weights`; zero weights are
    /// present but never sampled.
    pub fn build(weights: &[f64]) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Precondition(format!("weight {w} is not finite and nonnegative")));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(Error::Precondition("all weights are zero".into()));
        }
        let mut v = SamplableVector {
            frac: vec![0.0; weights.len()],
            exp: vec![0; weights.len()],
            pos: vec![NONE; weights.len()],
            buckets: Vec::new(),
            base: 0,
            nonempty: Vec::new(),
            scale: 0,
            live: 0,
            stats: SamplerStats::default(),
        };
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                let (m, e) = frexp(w);
                v.frac[i] = m;
                v.exp[i] = e;
                v.insert(i, e);
                v.live += 1;
            }
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.frac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frac.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn is_live(&self, i: usize) -> bool {
        self.pos[i] != NONE
    }

    pub fn stats(&self) -> SamplerStats {
        self.stats
    }

    pub fn nonempty_buckets(&self) -> usize {
        self.nonempty.len()
    }

    pub fn weight(&self, i: usize) -> ScaledF64 {
        if self.is_live(i) {
            ScaledF64::new(self.frac[i], self.exp[i] + self.scale)
        } else {
            ScaledF64::ZERO
        }
    }

    /// `|v|` from the maintained bucket sums.
    pub fn total(&self) -> ScaledF64 {
        let Some(top) = self.top_exponent() else {
            return ScaledF64::ZERO;
        };
        let rel: f64 = self.nonempty.iter().map(|&k| self.bucket(k).sum * pow2(k - top)).sum();
        ScaledF64::new(rel, top + self.scale)
    }

    /// `|v|` summed directly over the live entries.
    pub fn exact_total(&self) -> ScaledF64 {
        (0..self.len()).filter(|&i| self.is_live(i)).map(|i| self.weight(i)).sum()
    }

    /// Draws `i` with probability `v_i / |v|`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let top = self
            .top_exponent()
            .ok_or_else(|| Error::Precondition("sampling from an all-zero vector".into()))?;
        let rel = |k: i64| self.bucket(k).sum * pow2(k - top);
        let total: f64 = self.nonempty.iter().map(|&k| rel(k)).sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for &k in &self.nonempty {
            let w = rel(k);
            if w > 0.0 {
                chosen = Some(k);
                if u < w {
                    break;
                }
                u -= w;
            }
        }
        let k = chosen.unwrap_or(top);
        let members = &self.bucket(k).members;
        loop {
            let id = members[rng.random_range(0..members.len())] as usize;
            if rng.random::<f64>() * 2.0 < self.frac[id] {
                return Ok(id);
            }
        }
    }

    /// Multiplies `v_i` by a positive finite `factor`.
    pub fn scale_entry(&mut self, i: usize, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Precondition(format!("scale factor {factor} must be positive")));
        }
        if !self.is_live(i) {
            return Err(Error::Precondition(format!("entry {i} is zero")));
        }
        self.stats.updates += 1;
        let old = self.frac[i];
        let (m, de) = frexp(old * factor);
        if de == 0 {
            self.frac[i] = m;
            let k = self.exp[i];
            let b = self.bucket_mut(k);
            b.sum += m - old;
            b.ops_since_exact += 1;
            self.maybe_recompute(k);
        } else {
            let k = self.exp[i];
            self.remove(i);
            self.frac[i] = m;
            self.exp[i] = k + de;
            self.insert(i, k + de);
            self.stats.bucket_moves += 1;
        }
        Ok(())
    }

    /// Removes entry `i`; it is never sampled again.
    pub fn set_zero(&mut self, i: usize) -> Result<()> {
        if !self.is_live(i) {
            return Err(Error::Precondition(format!("entry {i} is already zero")));
        }
        self.stats.updates += 1;
        self.remove(i);
        self.frac[i] = 0.0;
        self.live -= 1;
        Ok(())
    }

    /// Divides every weight by `2^log2_factor` through the shared scale.
    pub fn renormalize(&mut self, log2_factor: i64) {
        self.scale -= log2_factor;
    }

    pub fn scale_exponent(&self) -> i64 {
        self.scale
    }

    fn top_exponent(&self) -> Option<i64> {
        self.nonempty.iter().copied().max()
    }

    fn bucket(&self, k: i64) -> &Bucket {
        &self.buckets[(k - self.base) as usize]
    }

    fn bucket_mut(&mut self, k: i64) -> &mut Bucket {
        let idx = (k - self.base) as usize;
        &mut self.buckets[idx]
    }

    fn ensure_bucket(&mut self, k: i64) {
        if self.buckets.is_empty() {
            self.base = k;
            self.buckets.push(Bucket { slot: NONE, ..Bucket::default() });
            return;
        }
        let hi = self.base + self.buckets.len() as i64;
        if k < self.base {
            let grow = ((self.base - k) as usize).max(self.buckets.len());
            let mut fresh: Vec<Bucket> =
                (0..grow).map(|_| Bucket { slot: NONE, ..Bucket::default() }).collect();
            fresh.append(&mut self.buckets);
            self.buckets = fresh;
            self.base -= grow as i64;
        } else if k >= hi {
            let grow = ((k - hi + 1) as usize).max(self.buckets.len());
            self.buckets.extend((0..grow).map(|_| Bucket { slot: NONE, ..Bucket::default() }));
        }
    }

    fn insert(&mut self, i: usize, k: i64) {
        self.ensure_bucket(k);
        let frac = self.frac[i];
        let next_slot = self.nonempty.len() as u32;
        let idx = (k - self.base) as usize;
        let b = &mut self.buckets[idx];
        let became_nonempty = b.members.is_empty();
        self.pos[i] = b.members.len() as u32;
        b.members.push(i as u32);
        b.sum += frac;
        b.ops_since_exact += 1;
        if became_nonempty {
            b.slot = next_slot;
            b.sum = frac;
            b.ops_since_exact = 0;
            b.len_at_exact = 1;
            self.nonempty.push(k);
        }
        self.maybe_recompute(k);
    }

    fn remove(&mut self, i: usize) {
        let k = self.exp[i];
        let p = self.pos[i] as usize;
        let frac = self.frac[i];
        let b = self.bucket_mut(k);
        b.members.swap_remove(p);
        let moved = b.members.get(p).copied();
        b.sum -= frac;
        b.ops_since_exact += 1;
        let now_empty = b.members.is_empty();
        let slot = b.slot;
        if let Some(m) = moved {
            self.pos[m as usize] = p as u32;
        }
        self.pos[i] = NONE;
        if now_empty {
            let b = self.bucket_mut(k);
            b.sum = 0.0;
            b.slot = NONE;
            b.ops_since_exact = 0;
            b.len_at_exact = 0;
            self.nonempty.swap_remove(slot as usize);
            if let Some(&other) = self.nonempty.get(slot as usize) {
                self.bucket_mut(other).slot = slot;
            }
        } else {
            self.maybe_recompute(k);
        }
    }

    fn maybe_recompute(&mut self, k: i64) {
        let idx = (k - self.base) as usize;
        let b = &self.buckets[idx];
        let len = b.members.len();
        if b.ops_since_exact > len.max(MIN_RECOMPUTE_OPS) || 2 * len < b.len_at_exact {
            let sum: f64 = b.members.iter().map(|&m| self.frac[m as usize]).sum();
            let b = &mut self.buckets[idx];
            b.sum = sum;
            b.ops_since_exact = 0;
            b.len_at_exact = len;
            self.stats.recomputes += 1;
        }
    }

    /// Structural audit: every live entry sits in the bucket matching its
    /// exponent, `frac` is in `[1, 2)`, and bucket sums match their members.
    pub fn check_invariants(&self, rel_tol: f64) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        let mut live = 0;
        for i in 0..self.len() {
            if !self.is_live(i) {
                continue;
            }
            live += 1;
            if !(1.0..2.0).contains(&self.frac[i]) {
                return bad(format!("entry {i} fraction {} out of [1,2)", self.frac[i]));
            }
            let b = self.bucket(self.exp[i]);
            if b.members.get(self.pos[i] as usize) != Some(&(i as u32)) {
                return bad(format!("entry {i} not at its recorded bucket position"));
            }
        }
        if live != self.live {
            return bad(format!("live count {} != {}", self.live, live));
        }
        for (s, &k) in self.nonempty.iter().enumerate() {
            let b = self.bucket(k);
            if b.members.is_empty() || b.slot as usize != s {
                return bad(format!("nonempty list corrupt at bucket {k}"));
            }
            let exact: f64 = b.members.iter().map(|&m| self.frac[m as usize]).sum();
            if (exact - b.sum).abs() > rel_tol * exact {
                return bad(format!("bucket {k} sum {} drifted from {}", b.sum, exact));
            }
        }
        let members: usize = self.nonempty.iter().map(|&k| self.bucket(k).members.len()).sum();
        if members != self.live {
            return bad("bucket membership does not cover live entries".into());
        }
        Ok(())
    }
}
