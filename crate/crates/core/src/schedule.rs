//! A-priori blocks, thresholds and cutoffs for the shrinkage estimator.
//!
//! Univariate blocks `B_k = [b_k, b_{k+1})` cover frequencies of the
//! response-only component. Bivariate blocks
//! `B_{k,tau} = [b'_k, b'_{k+1}) x (b'_tau, b'_{tau+1}]` cover the interaction
//! component (response frequency times predictor index `r >= 1`). Under the
//! line loss the response axis is continuous and the same edges are read as
//! u-interval endpoints.

use std::ops::Range;

use crate::data::Loss;
use crate::design::{MIN_SAMPLE_SIZE, PredictorDensity};
use crate::error::{Error, Result};
use crate::fourier::{cosine_unchecked, U_NODES_PER_UNIT, U_STEP};
use crate::model::TrueModel;
use crate::quadrature::{simpson_weights, GaussLegendre};

/// Default bound for the finite-n check `sum_{k<=K} L_k^-2 t_k^-5` on custom blocks.
pub const DEFAULT_SURROGATE_BOUND: f64 = 100.0;

/// User supplied univariate edges `b_1 = 0 < b_2 < ...` and thresholds `t_1, t_2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomUniBlocks {
    pub edges: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub surrogate_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum UniRule {
    Default,
    Custom(CustomUniBlocks),
}

/// Default univariate block lengths: 1, 2, then `ceil(L_k (1 + 1/ln(k+2)))`.
fn default_uni_length(k: usize, prev: usize) -> usize {
    match k {
        1 => 1,
        2 => 2,
        _ => {
            let km1 = (k - 1) as f64;
            (prev as f64 * (1.0 + 1.0 / (km1 + 2.0).ln())).ceil() as usize
        }
    }
}

/// `t_k = 1 / ln(k + 2)`.
pub fn default_uni_threshold(k: usize) -> f64 {
    1.0 / ((k + 2) as f64).ln()
}

/// `t_{k,tau} = 1 / lnln((k + 3)(tau + 3))`.
pub fn bivariate_threshold(k: usize, tau: usize) -> f64 {
    1.0 / (((k + 3) * (tau + 3)) as f64).ln().ln()
}

/// Edges `b_1 = 0, b_2 = 1, b_3 = 3, ...` of the default univariate blocks.
pub fn default_uni_edges(count: usize) -> Vec<usize> {
    let mut edges = Vec::with_capacity(count);
    let mut b = 0usize;
    let mut len = 0usize;
    for k in 1..=count {
        edges.push(b);
        len = default_uni_length(k, len);
        b += len;
    }
    edges
}

/// Bivariate edges `b'_1 .. b'_count` for sample size `n`.
pub fn bivariate_edges(n: usize, count: usize) -> Vec<usize> {
    let lnln = (n as f64).ln().ln();
    let b2 = 1 + (n as f64).ln().powf(0.75).floor() as usize;
    let growth = 1.0 + 1.0 / lnln;
    let mut edges = Vec::with_capacity(count);
    for s in 1..=count {
        let e = match s {
            1 => 0,
            2 => b2,
            _ => {
                let prev = edges[s - 2];
                prev + (b2 as f64 * growth.powi(s as i32 - 3)).floor() as usize
            }
        };
        edges.push(e);
    }
    edges
}

/// `n^(1/3) lnln(n)`, the level the last univariate edge must exceed.
pub fn uni_cutoff_level(n: usize) -> f64 {
    let nf = n as f64;
    nf.cbrt() * nf.ln().ln()
}

/// `n^(1/4) lnln(n)`, the level the last bivariate edge must exceed.
pub fn bi_cutoff_level(n: usize) -> f64 {
    let nf = n as f64;
    nf.powf(0.25) * nf.ln().ln()
}

/// Blocks, thresholds and cutoffs for one sample size and loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSchedule {
    n: usize,
    loss: Loss,
    uni_rule: UniRule,
    /// `b_1 ..= b_{K+1}`
    uni_edges: Vec<usize>,
    /// `t_1 ..= t_K`
    uni_thresholds: Vec<f64>,
    /// `b'_1 ..= b'_{T+1}`
    bi_edges: Vec<usize>,
    k_cut: usize,
    t_cut: usize,
}

/// Members of one bivariate block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockMembers {
    /// Square loss: the integer pairs `(j, r)`.
    Indices(Vec<(usize, usize)>),
    /// Line loss: `u` in `[u_lo, u_hi)` and `r` in `r_lo..=r_hi`.
    Strip {
        u_lo: f64,
        u_hi: f64,
        r_lo: usize,
        r_hi: usize,
    },
}

impl BlockMembers {
    pub fn len(&self) -> usize {
        match self {
            BlockMembers::Indices(v) => v.len(),
            BlockMembers::Strip { r_lo, r_hi, .. } => r_hi + 1 - r_lo,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the schedule; `custom` replaces the default univariate blocks.
pub fn build_schedule(n: usize, loss: Loss, custom: Option<CustomUniBlocks>) -> Result<BlockSchedule> {
    if n < MIN_SAMPLE_SIZE {
        return Err(Error::SampleTooSmall {
            n,
            min: MIN_SAMPLE_SIZE,
        });
    }
    let uni_level = uni_cutoff_level(n);
    let (rule, uni_edges, uni_thresholds) = match custom {
        None => {
            let mut count = 2;
            loop {
                let edges = default_uni_edges(count);
                if *edges.last().unwrap() as f64 > uni_level {
                    let k_cut = edges.len() - 1;
                    let t = (1..=k_cut).map(default_uni_threshold).collect();
                    break (UniRule::Default, edges, t);
                }
                count += 1;
            }
        }
        Some(spec) => {
            validate_custom(&spec)?;
            let pos = spec
                .edges
                .iter()
                .position(|&b| b as f64 > uni_level)
                .ok_or_else(|| {
                    Error::InvalidSchedule(format!(
                        "custom edges stop at {} but must exceed {uni_level:.4}",
                        spec.edges.last().copied().unwrap_or(0)
                    ))
                })?;
            let edges = spec.edges[..=pos].to_vec();
            let t = spec.thresholds[..pos].to_vec();
            let bound = spec.surrogate_bound;
            let surrogate: f64 = edges
                .windows(2)
                .zip(&t)
                .map(|(w, t)| ((w[1] - w[0]) as f64).powi(-2) * t.powi(-5))
                .sum();
            if surrogate > bound {
                return Err(Error::InvalidSchedule(format!(
                    "sum L_k^-2 t_k^-5 = {surrogate:.4} exceeds the declared bound {bound}"
                )));
            }
            (UniRule::Custom(spec), edges, t)
        }
    };

    let bi_level = bi_cutoff_level(n);
    let mut count = 2;
    let bi_edges = loop {
        let edges = bivariate_edges(n, count);
        if *edges.last().unwrap() as f64 > bi_level {
            break edges;
        }
        count += 1;
    };

    Ok(BlockSchedule {
        n,
        loss,
        uni_rule: rule,
        k_cut: uni_edges.len() - 1,
        t_cut: bi_edges.len() - 1,
        uni_edges,
        uni_thresholds,
        bi_edges,
    })
}

fn validate_custom(spec: &CustomUniBlocks) -> Result<()> {
    if spec.edges.first() != Some(&0) {
        return Err(Error::InvalidSchedule("first univariate edge must be 0".into()));
    }
    if spec.edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotAscending("univariate edges"));
    }
    if spec.thresholds.len() + 1 < spec.edges.len() {
        return Err(Error::InvalidSchedule(format!(
            "{} edges need at least {} thresholds",
            spec.edges.len(),
            spec.edges.len() - 1
        )));
    }
    if spec.thresholds.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidSchedule("thresholds must be positive".into()));
    }
    if spec.thresholds.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidSchedule("thresholds must be nonincreasing".into()));
    }
    Ok(())
}

impl BlockSchedule {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Number of univariate blocks kept (`K`).
    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    /// Number of bivariate blocks kept per axis (`T`).
    pub fn t_cut(&self) -> usize {
        self.t_cut
    }

    pub fn uni_edges(&self) -> &[usize] {
        &self.uni_edges
    }

    pub fn uni_thresholds(&self) -> &[f64] {
        &self.uni_thresholds
    }

    pub fn bi_edges(&self) -> &[usize] {
        &self.bi_edges
    }

    /// One past the largest univariate frequency kept (`b_{K+1}`).
    pub fn uni_extent(&self) -> usize {
        self.uni_edges[self.k_cut]
    }

    /// One past the largest bivariate response frequency kept (`b'_{T+1}`).
    pub fn bi_extent(&self) -> usize {
        self.bi_edges[self.t_cut]
    }

    /// `B_k` as a half-open index range, `1 <= k <= K`.
    pub fn uni_block(&self, k: usize) -> Range<usize> {
        assert!(k >= 1 && k <= self.k_cut, "univariate block {k} out of range");
        self.uni_edges[k - 1]..self.uni_edges[k]
    }

    pub fn uni_length(&self, k: usize) -> usize {
        let b = self.uni_block(k);
        b.end - b.start
    }

    pub fn uni_threshold(&self, k: usize) -> f64 {
        self.uni_thresholds[k - 1]
    }

    pub fn bi_threshold(&self, k: usize, tau: usize) -> f64 {
        bivariate_threshold(k, tau)
    }

    /// Response range `[b'_k, b'_{k+1})` of bivariate row-block `k`.
    pub fn bi_response_range(&self, k: usize) -> Range<usize> {
        self.bi_edges[k - 1]..self.bi_edges[k]
    }

    /// Predictor indices `(b'_tau, b'_{tau+1}]` of bivariate column-block `tau`.
    pub fn bi_predictor_range(&self, tau: usize) -> Range<usize> {
        self.bi_edges[tau - 1] + 1..self.bi_edges[tau] + 1
    }

    /// `L_{k,tau}`.
    pub fn bi_length(&self, k: usize, tau: usize) -> usize {
        let a = self.bi_response_range(k);
        let b = self.bi_predictor_range(tau);
        (a.end - a.start) * (b.end - b.start)
    }

    /// Univariate edges past the cutoff, for tail sums. Custom schedules only
    /// know the edges they were given.
    pub fn extended_uni_edges(&self, count: usize) -> Vec<usize> {
        match &self.uni_rule {
            UniRule::Default => default_uni_edges(count),
            UniRule::Custom(spec) => spec.edges.iter().copied().take(count).collect(),
        }
    }

    pub fn extended_bi_edges(&self, count: usize) -> Vec<usize> {
        bivariate_edges(self.n, count)
    }
}

/// Enumerates bivariate block `(k, tau)`, `1 <= k, tau <= T`.
pub fn block_members(schedule: &BlockSchedule, k: usize, tau: usize) -> Result<BlockMembers> {
    let t = schedule.t_cut();
    if k == 0 || tau == 0 || k > t || tau > t {
        return Err(Error::BlockOutOfRange { k, tau, cutoff: t });
    }
    let js = schedule.bi_response_range(k);
    let rs = schedule.bi_predictor_range(tau);
    Ok(match schedule.loss() {
        Loss::Square => BlockMembers::Indices(
            js.flat_map(|j| rs.clone().map(move |r| (j, r))).collect(),
        ),
        Loss::Line => BlockMembers::Strip {
            u_lo: js.start as f64,
            u_hi: js.end as f64,
            r_lo: rs.start,
            r_hi: rs.end - 1,
        },
    })
}

/// Adjusted length `L*_{k,tau}`: the block length over the block sum of
/// `|int p^-1 phi_2r| + int |int f phi_j dy|^2 dx` (square loss) or its
/// u-integral analog with `|h(u|x)|^2` (line loss).
pub fn adjusted_length(schedule: &BlockSchedule, k: usize, tau: usize, truth: &TrueModel) -> Result<f64> {
    let members = block_members(schedule, k, tau)?;
    let gl = GaussLegendre::new(8);
    let (xs, wx) = gl.composite(0.0, 1.0, 64);
    let design = truth.design();
    let inv_p: Vec<f64> = xs.iter().map(|&x| 1.0 / design.density(x)).collect();
    let design_term = |r: usize| -> f64 {
        xs.iter()
            .zip(&wx)
            .zip(&inv_p)
            .map(|((&x, w), ip)| w * ip * cosine_unchecked(2 * r, x))
            .sum::<f64>()
            .abs()
    };

    let denom = match members {
        BlockMembers::Indices(ref idx) => {
            let (ys, wy) = gl.composite(0.0, 1.0, 64);
            let jmax = idx.iter().map(|p| p.0).max().unwrap_or(0);
            // projections g_j(x) = int_0^1 f(y|x) phi_j(y) dy on the x nodes
            let mut proj = vec![vec![0.0; xs.len()]; jmax + 1];
            for (ix, &x) in xs.iter().enumerate() {
                for (y, w) in ys.iter().zip(&wy) {
                    let fw = w * truth.cd(*y, x);
                    for (j, row) in proj.iter_mut().enumerate() {
                        row[ix] += fw * cosine_unchecked(j, *y);
                    }
                }
            }
            let energy: Vec<f64> = proj
                .iter()
                .map(|row| row.iter().zip(&wx).map(|(g, w)| w * g * g).sum())
                .collect();
            idx.iter().map(|&(j, r)| design_term(r) + energy[j]).sum::<f64>()
        }
        BlockMembers::Strip {
            u_lo,
            u_hi,
            r_lo,
            r_hi,
        } => {
            let lo = u_lo as usize * U_NODES_PER_UNIT;
            let hi = u_hi as usize * U_NODES_PER_UNIT;
            let w = simpson_weights(hi - lo + 1, U_STEP);
            let mut char_energy = 0.0;
            for (m, wm) in (lo..=hi).zip(&w) {
                let u = m as f64 * U_STEP;
                let e: f64 = xs
                    .iter()
                    .zip(&wx)
                    .map(|(&x, wxk)| wxk * truth.char_at(u, x).norm_sqr())
                    .sum();
                char_energy += wm * e;
            }
            (r_lo..=r_hi)
                .map(|r| (u_hi - u_lo) * design_term(r) + char_energy)
                .sum::<f64>()
        }
    };
    if !(denom > 1e-12) {
        return Err(Error::DegenerateBlock { k, tau });
    }
    Ok(schedule.bi_length(k, tau) as f64 / denom)
}

/// `L*_k = L_k` for univariate blocks.
pub fn adjusted_uni_length(schedule: &BlockSchedule, k: usize) -> f64 {
    schedule.uni_length(k) as f64
}
