//! Diagonal-covariance Gaussian mixtures trained by EM with binary splitting.
//!
//! Training starts from the global mean and variance, then repeatedly splits
//! every component into two (means moved by +-0.2 standard deviations) and runs
//! a fixed number of EM iterations per stage. Variances are floored at a
//! fraction of the global per-dimension variance.
//!
//! Sufficient statistics are accumulated over a fixed partition of the frames
//! and summed in partition order, so results do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::matrix::Matrix;

const SPLIT_OFFSET: f64 = 0.2;
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-10;
/// Components whose total responsibility falls below this are considered dead.
const DEAD_COMPONENT: f64 = 1e-10;
const MAX_PARTITIONS: usize = 16;
const MIN_PARTITION_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmParams", into = "GmmParams")]
pub struct DiagGmm {
    weights: Vec<f64>,
    means: Matrix,
    variances: Matrix,
    // derived
    log_consts: Vec<f64>,
    inv_vars: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmmParams {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
}

impl From<DiagGmm> for GmmParams {
    fn from(g: DiagGmm) -> Self {
        GmmParams {
            means: g.means.iter_rows().map(<[f64]>::to_vec).collect(),
            variances: g.variances.iter_rows().map(<[f64]>::to_vec).collect(),
            weights: g.weights,
        }
    }
}

impl TryFrom<GmmParams> for DiagGmm {
    type Error = Error;

    fn try_from(p: GmmParams) -> Result<Self> {
        let dim = p.means.first().map_or(0, Vec::len);
        if p.means.iter().chain(&p.variances).any(|r| r.len() != dim) {
            return Err(Error::Schema("ragged GMM parameter rows".into()));
        }
        DiagGmm::new(p.weights, Matrix::from_rows(&p.means), Matrix::from_rows(&p.variances))
    }
}

impl DiagGmm {
    pub fn new(weights: Vec<f64>, means: Matrix, variances: Matrix) -> Result<Self> {
        let c = weights.len();
        if c == 0 || means.rows() != c || variances.rows() != c || means.cols() != variances.cols() {
            return Err(Error::InvalidConfig(format!(
                "inconsistent GMM shapes: {} weights, means {}x{}, variances {}x{}",
                c,
                means.rows(),
                means.cols(),
                variances.rows(),
                variances.cols()
            )));
        }
        if means.cols() == 0 {
            return Err(Error::InvalidConfig("GMM dimension must be >= 1".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("weights sum to {total}, not 1")));
        }
        if means.as_slice().iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("non-finite mean".into()));
        }
        if variances.as_slice().iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidConfig("variances must be finite and positive".into()));
        }
        let mut gmm = Self {
            weights,
            means,
            variances,
            log_consts: Vec::new(),
            inv_vars: Matrix::zeros(0, 0),
        };
        gmm.refresh();
        Ok(gmm)
    }

    fn refresh(&mut self) {
        self.inv_vars = Matrix::from_vec(
            self.variances.rows(),
            self.variances.cols(),
            self.variances.as_slice().iter().map(|v| 1.0 / v).collect(),
        );
        self.log_consts = self
            .weights
            .iter()
            .zip(self.variances.iter_rows())
            .map(|(&w, var)| {
                if w > 0.0 {
                    w.ln() - 0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    pub fn variances(&self) -> &Matrix {
        &self.variances
    }

    /// Per-component `log w_c + log N(y; mu_c, sigma_c^2)` into `out`.
    fn component_log_densities(&self, y: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let lc = self.log_consts[c];
            if lc == f64::NEG_INFINITY {
                *o = lc;
                continue;
            }
            let mahal: f64 = y
                .iter()
                .zip(self.means.row(c))
                .zip(self.inv_vars.row(c))
                .map(|((x, m), iv)| {
                    let d = x - m;
                    d * d * iv
                })
                .sum();
            *o = lc - 0.5 * mahal;
        }
    }

    /// `log sum_c w_c N(y; mu_c, diag sigma_c^2)`, evaluated with log-sum-exp.
    pub fn frame_log_likelihood(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let mut buf = vec![0.0; self.num_components()];
        self.component_log_densities(y, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    /// Mean per-frame log-likelihood over a frame matrix.
    pub fn avg_log_likelihood_frames(&self, frames: &Matrix) -> Result<f64> {
        if frames.cols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: frames.cols(),
            });
        }
        if frames.is_empty() {
            return Err(Error::EmptyFeatures);
        }
        let per_frame: Vec<f64> = (0..frames.rows())
            .into_par_iter()
            .map_init(
                || vec![0.0; self.num_components()],
                |buf, t| {
                    self.component_log_densities(frames.row(t), buf);
                    log_sum_exp(buf)
                },
            )
            .collect();
        Ok(per_frame.iter().sum::<f64>() / frames.rows() as f64)
    }

    pub fn avg_log_likelihood(&self, feats: &FeatureMatrix) -> Result<f64> {
        self.avg_log_likelihood_frames(&feats.frames)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmTrainConfig {
    pub target_components: usize,
    pub em_iters_per_stage: usize,
    pub variance_floor_factor: f64,
    pub seed: u64,
    pub convergence_tol: f64,
}

impl Default for GmmTrainConfig {
    fn default() -> Self {
        Self {
            target_components: 2048,
            em_iters_per_stage: 10,
            variance_floor_factor: 1e-3,
            seed: 0,
            convergence_tol: 1e-5,
        }
    }
}

impl GmmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_components == 0 {
            return Err(Error::InvalidConfig("target component count must be >= 1".into()));
        }
        if !(self.variance_floor_factor > 0.0 && self.variance_floor_factor.is_finite()) {
            return Err(Error::InvalidConfig("variance_floor_factor must be positive".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Average log-likelihood history of one splitting stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub components: usize,
    /// Entry 0 is the freshly split model; entry i is after i EM iterations.
    pub avg_log_likelihood: Vec<f64>,
}

struct Stats {
    occupancy: Vec<f64>,
    // first and second moments about the current component means
    first: Matrix,
    second: Matrix,
    total_ll: f64,
}

impl Stats {
    fn new(c: usize, d: usize) -> Self {
        Self {
            occupancy: vec![0.0; c],
            first: Matrix::zeros(c, d),
            second: Matrix::zeros(c, d),
            total_ll: 0.0,
        }
    }

    fn add(&mut self, other: &Stats) {
        for (a, b) in self.occupancy.iter_mut().zip(&other.occupancy) {
            *a += b;
        }
        for (a, b) in self.first.as_mut_slice().iter_mut().zip(other.first.as_slice()) {
            *a += b;
        }
        for (a, b) in self.second.as_mut_slice().iter_mut().zip(other.second.as_slice()) {
            *a += b;
        }
        self.total_ll += other.total_ll;
    }
}

fn partition_rows(m: usize) -> usize {
    m.div_ceil(MAX_PARTITIONS).max(MIN_PARTITION_ROWS)
}

fn e_step(gmm: &DiagGmm, frames: &Matrix) -> Stats {
    let c = gmm.num_components();
    let d = gmm.dim();
    let rows_per = partition_rows(frames.rows());
    let parts: Vec<Stats> = frames
        .as_slice()
        .par_chunks(rows_per * d)
        .map(|chunk| {
            let mut st = Stats::new(c, d);
            let mut logp = vec![0.0; c];
            for y in chunk.chunks_exact(d) {
                gmm.component_log_densities(y, &mut logp);
                let lse = log_sum_exp(&logp);
                st.total_ll += lse;
                for k in 0..c {
                    let g = (logp[k] - lse).exp();
                    if g == 0.0 {
                        continue;
                    }
                    st.occupancy[k] += g;
                    let mu = gmm.means.row(k);
                    let s1 = st.first.row_mut(k);
                    for j in 0..d {
                        s1[j] += g * (y[j] - mu[j]);
                    }
                    let s2 = st.second.row_mut(k);
                    for j in 0..d {
                        let dx = y[j] - mu[j];
                        s2[j] += g * dx * dx;
                    }
                }
            }
            st
        })
        .collect();
    let mut total = Stats::new(c, d);
    for p in &parts {
        total.add(p);
    }
    total
}

fn m_step(gmm: &DiagGmm, stats: &Stats, n_frames: usize, floor: &[f64]) -> DiagGmm {
    let c = gmm.num_components();
    let d = gmm.dim();
    let mut weights: Vec<f64> = stats.occupancy.iter().map(|n| n / n_frames as f64).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mut means = gmm.means.clone();
    let mut vars = gmm.variances.clone();
    for k in 0..c {
        let occ = stats.occupancy[k];
        if occ < DEAD_COMPONENT {
            continue;
        }
        let mu = means.row_mut(k);
        let s1 = stats.first.row(k);
        let s2 = stats.second.row(k);
        let var = vars.row_mut(k);
        for j in 0..d {
            let shift = s1[j] / occ;
            mu[j] += shift;
            var[j] = (s2[j] / occ - shift * shift).max(floor[j]);
        }
    }
    let mut out = DiagGmm {
        weights,
        means,
        variances: vars,
        log_consts: Vec::new(),
        inv_vars: Matrix::zeros(0, 0),
    };
    out.refresh();
    out
}

/// Split components in place. When `count` is less than the component total,
/// only the `count` heaviest components are split.
fn split(gmm: &DiagGmm, count: usize) -> DiagGmm {
    let c = gmm.num_components();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| gmm.weights[b].total_cmp(&gmm.weights[a]).then(a.cmp(&b)));
    let mut chosen = vec![false; c];
    for &k in order.iter().take(count) {
        chosen[k] = true;
    }
    let d = gmm.dim();
    let mut weights = Vec::with_capacity(c + count);
    let mut means = Vec::with_capacity((c + count) * d);
    let mut vars = Vec::with_capacity((c + count) * d);
    for k in 0..c {
        let mu = gmm.means.row(k);
        let var = gmm.variances.row(k);
        if chosen[k] {
            for sign in [1.0, -1.0] {
                weights.push(gmm.weights[k] / 2.0);
                means.extend(mu.iter().zip(var).map(|(m, v)| m + sign * SPLIT_OFFSET * v.sqrt()));
                vars.extend_from_slice(var);
            }
        } else {
            weights.push(gmm.weights[k]);
            means.extend_from_slice(mu);
            vars.extend_from_slice(var);
        }
    }
    let n = weights.len();
    let mut out = DiagGmm {
        weights,
        means: Matrix::from_vec(n, d, means),
        variances: Matrix::from_vec(n, d, vars),
        log_consts: Vec::new(),
        inv_vars: Matrix::zeros(0, 0),
    };
    out.refresh();
    out
}

/// Move dead components onto randomly chosen frames with the global variance.
fn revive_dead(gmm: &mut DiagGmm, frames: &Matrix, global_var: &[f64], rng: &mut ChaCha8Rng) {
    let dead: Vec<usize> = (0..gmm.num_components())
        .filter(|&k| gmm.weights[k] * (frames.rows() as f64) < DEAD_COMPONENT)
        .collect();
    if dead.is_empty() {
        return;
    }
    let share = 1.0 / (gmm.num_components() as f64 * frames.rows() as f64);
    for &k in &dead {
        let src = rng.gen_range(0..frames.rows());
        gmm.means.row_mut(k).copy_from_slice(frames.row(src));
        gmm.variances.row_mut(k).copy_from_slice(global_var);
        gmm.weights[k] = share;
    }
    let total: f64 = gmm.weights.iter().sum();
    for w in &mut gmm.weights {
        *w /= total;
    }
    gmm.refresh();
}

fn global_moments(frames: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = frames.rows() as f64;
    let d = frames.cols();
    let mut mean = vec![0.0; d];
    for r in frames.iter_rows() {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; d];
    for r in frames.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut var {
        *v /= n;
    }
    (mean, var)
}

/// EM training with a stage callback invoked after each completed stage.
pub fn train_gmm_with<F>(frames: &Matrix, config: &GmmTrainConfig, mut on_stage: F) -> Result<DiagGmm>
where
    F: FnMut(&DiagGmm, &StageTrace),
{
    config.validate()?;
    let m = frames.rows();
    let d = frames.cols();
    if d == 0 {
        return Err(Error::InvalidConfig("frames have zero dimension".into()));
    }
    if m < config.target_components || m == 0 {
        return Err(Error::TooFewFrames {
            frames: m,
            components: config.target_components,
        });
    }
    if frames.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite training frame".into()));
    }
    let first = frames.row(0);
    if frames.iter_rows().all(|r| r == first) {
        return Err(Error::DegenerateData);
    }
    let (mean, var) = global_moments(frames);
    let floor: Vec<f64> = var
        .iter()
        .map(|v| (v * config.variance_floor_factor).max(ABSOLUTE_VARIANCE_FLOOR))
        .collect();
    let init_var: Vec<f64> = var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let mut gmm = DiagGmm::new(
        vec![1.0],
        Matrix::from_vec(1, d, mean),
        Matrix::from_vec(1, d, init_var.clone()),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let ll0 = e_step(&gmm, frames).total_ll / m as f64;
    on_stage(
        &gmm,
        &StageTrace {
            components: 1,
            avg_log_likelihood: vec![ll0],
        },
    );

    while gmm.num_components() < config.target_components {
        let c = gmm.num_components();
        let grow = c.min(config.target_components - c);
        gmm = split(&gmm, grow);
        revive_dead(&mut gmm, frames, &init_var, &mut rng);

        let mut history = Vec::with_capacity(config.em_iters_per_stage + 1);
        for it in 0..=config.em_iters_per_stage {
            let stats = e_step(&gmm, frames);
            let ll = stats.total_ll / m as f64;
            if !ll.is_finite() {
                return Err(Error::Numerical(format!(
                    "log-likelihood became non-finite at {} components",
                    gmm.num_components()
                )));
            }
            let converged = history
                .last()
                .is_some_and(|&prev: &f64| (ll - prev).abs() < config.convergence_tol);
            history.push(ll);
            if it == config.em_iters_per_stage || converged {
                break;
            }
            gmm = m_step(&gmm, &stats, m, &floor);
        }
        on_stage(
            &gmm,
            &StageTrace {
                components: gmm.num_components(),
                avg_log_likelihood: history,
            },
        );
    }
    Ok(gmm)
}

/// Train a diagonal GMM on pooled frames.
pub fn train_gmm(frames: &Matrix, config: &GmmTrainConfig) -> Result<DiagGmm> {
    train_gmm_with(frames, config, |_, _| {})
}

/// Train once up to the largest requested size and keep the intermediate model
/// at each requested component count. Identical to training each size separately.
pub fn train_gmm_snapshots(
    frames: &Matrix,
    config: &GmmTrainConfig,
    sizes: &[usize],
) -> Result<Vec<DiagGmm>> {
    let target = sizes.iter().copied().max().unwrap_or(1);
    if let Some(bad) = sizes.iter().find(|s| !s.is_power_of_two()) {
        return Err(Error::InvalidConfig(format!(
            "snapshot size {bad} is not a power of two"
        )));
    }
    let cfg = GmmTrainConfig {
        target_components: target,
        ..config.clone()
    };
    let mut kept: Vec<Option<DiagGmm>> = vec![None; sizes.len()];
    train_gmm_with(frames, &cfg, |g, _| {
        for (slot, &s) in kept.iter_mut().zip(sizes) {
            if s == g.num_components() {
                *slot = Some(g.clone());
            }
        }
    })?;
    kept.into_iter()
        .map(|g| g.ok_or_else(|| Error::Numerical("missing GMM snapshot".into())))
        .collect()
}
