//! CQCC front end: log power, linearization of the geometric frequency axis,
//! cepstral truncation, dynamic coefficients and utterance-level CMVN.
//!
//! Block layout of a feature frame is fixed: `[static | delta | delta2]`
//! filtered by the config flags, where each block is `[c0?, c1, ..., cp]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::audio::AudioSignal;
use crate::cqt::{cqt_spectrogram, CqtConfig, CqtSpectrogram};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Power floor applied before the logarithm; silent frames stay finite.
pub const POWER_FLOOR: f64 = 1e-20;
/// Half-width of the delta regression window (5 frames).
pub const DELTA_WINDOW: usize = 2;
const CMVN_MIN_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqccConfig {
    pub num_ceps: usize,
    pub include_zeroth: bool,
    pub use_static: bool,
    pub use_delta: bool,
    pub use_delta2: bool,
    pub apply_cmvn: bool,
    pub resample_period: usize,
}

impl Default for CqccConfig {
    /// Deltas and double deltas of 29 CQCCs, no normalization.
    fn default() -> Self {
        Self {
            num_ceps: 29,
            include_zeroth: false,
            use_static: false,
            use_delta: true,
            use_delta2: true,
            apply_cmvn: false,
            resample_period: 16,
        }
    }
}

/// The eight front-end variants that combine static, delta and double-delta
/// blocks, by their short names.
pub const VARIANTS: [&str; 8] = [
    "stat",
    "d",
    "dd",
    "d+dd",
    "stat+d",
    "stat+dd",
    "stat+d+dd",
    "z+stat+d+dd",
];

impl CqccConfig {
    /// 30 static coefficients (zeroth included) with deltas and double deltas.
    pub fn full() -> Self {
        Self {
            include_zeroth: true,
            use_static: true,
            ..Self::default()
        }
    }

    /// Parse a variant name such as `d+dd` or `z+stat+d+dd` (`full` is an alias
    /// for the latter). Other fields keep their defaults.
    pub fn from_variant(name: &str, apply_cmvn: bool) -> Result<Self> {
        let name = if name == "full" { "z+stat+d+dd" } else { name };
        let mut cfg = Self {
            include_zeroth: false,
            use_static: false,
            use_delta: false,
            use_delta2: false,
            apply_cmvn,
            ..Self::default()
        };
        for part in name.split('+') {
            let flag = match part {
                "z" => &mut cfg.include_zeroth,
                "stat" => &mut cfg.use_static,
                "d" => &mut cfg.use_delta,
                "dd" => &mut cfg.use_delta2,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown front-end block '{other}' in variant '{name}'"
                    )))
                }
            };
            if *flag {
                return Err(Error::InvalidConfig(format!("repeated block in variant '{name}'")));
            }
            *flag = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`CqccConfig::from_variant`].
    pub fn variant_name(&self) -> String {
        let mut parts = Vec::new();
        if self.include_zeroth {
            parts.push("z");
        }
        if self.use_static {
            parts.push("stat");
        }
        if self.use_delta {
            parts.push("d");
        }
        if self.use_delta2 {
            parts.push("dd");
        }
        parts.join("+")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ceps == 0 {
            return Err(Error::InvalidConfig("num_ceps must be >= 1".into()));
        }
        if self.resample_period == 0 {
            return Err(Error::InvalidConfig("resample_period must be >= 1".into()));
        }
        if !(self.use_static || self.use_delta || self.use_delta2) {
            return Err(Error::InvalidConfig(
                "at least one of static, delta, delta2 must be enabled".into(),
            ));
        }
        Ok(())
    }

    /// Coefficients per block.
    pub fn block_dim(&self) -> usize {
        self.num_ceps + self.include_zeroth as usize
    }

    pub fn num_blocks(&self) -> usize {
        self.use_static as usize + self.use_delta as usize + self.use_delta2 as usize
    }

    pub fn dim(&self) -> usize {
        self.block_dim() * self.num_blocks()
    }
}

/// Per-utterance feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub frames: Matrix,
    pub source_id: String,
}

impl FeatureMatrix {
    pub fn new(frames: Matrix, source_id: impl Into<String>) -> Result<Self> {
        if frames.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite feature value".into()));
        }
        Ok(Self {
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }
}

/// `log(max(|X|^2, floor))` entrywise.
pub fn log_power(spec: &CqtSpectrogram, floor: f64) -> Matrix {
    let data = spec
        .magnitudes
        .as_slice()
        .iter()
        .map(|m| (m * m).max(floor).ln())
        .collect();
    Matrix::from_vec(spec.num_frames(), spec.num_bins(), data)
}

/// Uniform frequency grid the log spectrum is resampled onto.
///
/// The step is a `1/period` fraction of the first octave's width (`f_min`), and
/// the grid spans `[f_min, f_max]` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub f_min: f64,
    pub f_max: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn for_config(cqt: &CqtConfig, period: usize) -> Self {
        let intervals = period as f64 * (cqt.f_max / cqt.f_min - 1.0);
        Self {
            f_min: cqt.f_min,
            f_max: cqt.f_max,
            len: (intervals - 1e-9).ceil().max(1.0) as usize + 1,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.f_max - self.f_min) / (self.len - 1) as f64;
        (0..self.len)
            .map(|i| {
                if i + 1 == self.len {
                    self.f_max
                } else {
                    self.f_min + i as f64 * step
                }
            })
            .collect()
    }
}

/// Natural cubic spline through fixed knots, evaluated at fixed points.
///
/// The knot layout is shared by every frame, so the tridiagonal elimination
/// and the per-point interpolation weights are computed once.
struct SplineResampler {
    h: Vec<f64>,
    // forward-eliminated tridiagonal system for interior second derivatives
    diag: Vec<f64>,
    sub: Vec<f64>,
    // (interval, a, b, c, d): y = a*y_i + b*y_{i+1} + c*M_i + d*M_{i+1}
    weights: Vec<(usize, f64, f64, f64, f64)>,
}

impl SplineResampler {
    fn new(knots: &[f64], points: &[f64]) -> Self {
        let k = knots.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let interior = k.saturating_sub(2);
        let mut diag = vec![0.0; interior];
        let mut sub = vec![0.0; interior];
        for i in 0..interior {
            let d = 2.0 * (h[i] + h[i + 1]);
            if i == 0 {
                diag[i] = d;
            } else {
                sub[i] = h[i] / diag[i - 1];
                diag[i] = d - sub[i] * h[i];
            }
        }
        let weights = points
            .iter()
            .map(|&x| {
                // last interval whose left knot is <= x, clamped to a valid segment
                let idx = knots.partition_point(|&kn| kn <= x).clamp(1, k - 1) - 1;
                let hi = h[idx];
                let a = (knots[idx + 1] - x) / hi;
                let b = 1.0 - a;
                let c = (a * a * a - a) * hi * hi / 6.0;
                let d = (b * b * b - b) * hi * hi / 6.0;
                (idx, a, b, c, d)
            })
            .collect();
        Self {
            h,
            diag,
            sub,
            weights,
        }
    }

    fn apply(&self, y: &[f64], m: &mut Vec<f64>, out: &mut [f64]) {
        let k = y.len();
        let interior = k.saturating_sub(2);
        m.clear();
        m.resize(k, 0.0);
        if interior > 0 {
            let h = &self.h;
            let mut rhs: Vec<f64> = (0..interior)
                .map(|i| 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]))
                .collect();
            for i in 1..interior {
                rhs[i] -= self.sub[i] * rhs[i - 1];
            }
            m[interior] = rhs[interior - 1] / self.diag[interior - 1];
            for i in (0..interior - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / self.diag[i];
            }
        }
        for (o, &(i, a, b, c, d)) in out.iter_mut().zip(&self.weights) {
            *o = a * y[i] + b * y[i + 1] + c * m[i] + d * m[i + 1];
        }
    }
}

/// Interpolate each frame of a log spectrum sampled at `center_freqs` onto the
/// uniform `grid` with a natural cubic spline.
pub fn uniform_resample(log_spec: &Matrix, center_freqs: &[f64], grid: &UniformGrid) -> Result<Matrix> {
    if center_freqs.len() < 2 {
        return Err(Error::TooFewBins(center_freqs.len()));
    }
    if log_spec.cols() != center_freqs.len() {
        return Err(Error::DimMismatch {
            expected: center_freqs.len(),
            got: log_spec.cols(),
        });
    }
    let spline = SplineResampler::new(center_freqs, &grid.points());
    let mut out = Matrix::zeros(log_spec.rows(), grid.len);
    let mut m = Vec::new();
    for t in 0..log_spec.rows() {
        spline.apply(log_spec.row(t), &mut m, out.row_mut(t));
    }
    Ok(out)
}

/// Rows of the orthonormal DCT-II basis for coefficients `0..n_coeffs` over `len` points.
fn dct_basis(len: usize, n_coeffs: usize) -> Matrix {
    let mut basis = Matrix::zeros(n_coeffs, len);
    let l = len as f64;
    for k in 0..n_coeffs {
        let scale = if k == 0 { (1.0 / l).sqrt() } else { (2.0 / l).sqrt() };
        for (n, v) in basis.row_mut(k).iter_mut().enumerate() {
            *v = scale * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * l)).cos();
        }
    }
    basis
}

/// Orthonormal DCT-II of every row, keeping coefficients `1..=num_ceps`
/// (and coefficient 0 first when `include_zeroth`).
pub fn dct_truncate(uniform: &Matrix, num_ceps: usize, include_zeroth: bool) -> Result<Matrix> {
    let len = uniform.cols();
    if len < num_ceps + 1 {
        return Err(Error::GridTooSmall {
            grid: len,
            required: num_ceps + 1,
        });
    }
    let basis = dct_basis(len, num_ceps + 1);
    let first = if include_zeroth { 0 } else { 1 };
    let width = num_ceps + 1 - first;
    let mut out = Matrix::zeros(uniform.rows(), width);
    for t in 0..uniform.rows() {
        let row = uniform.row(t);
        for (j, o) in out.row_mut(t).iter_mut().enumerate() {
            *o = basis.row(first + j).iter().zip(row).map(|(b, x)| b * x).sum();
        }
    }
    Ok(out)
}

/// Regression deltas over `+-window` frames with edge replication.
pub fn deltas(feats: &Matrix, window: usize) -> Matrix {
    let n = feats.rows() as i64;
    let denom = 2.0 * (1..=window).map(|t| (t * t) as f64).sum::<f64>();
    let mut out = Matrix::zeros(feats.rows(), feats.cols());
    if n == 0 {
        return out;
    }
    let clamp = |t: i64| t.clamp(0, n - 1) as usize;
    for t in 0..n {
        let row = out.row_mut(t as usize);
        for tau in 1..=window as i64 {
            let fwd = feats.row(clamp(t + tau));
            let back = feats.row(clamp(t - tau));
            for ((o, f), b) in row.iter_mut().zip(fwd).zip(back) {
                *o += tau as f64 * (f - b);
            }
        }
        for o in row.iter_mut() {
            *o /= denom;
        }
    }
    out
}

/// Concatenate the static, delta and double-delta blocks enabled in `config`.
pub fn append_deltas(static_feats: &Matrix, config: &CqccConfig) -> Matrix {
    let d1 = (config.use_delta || config.use_delta2).then(|| deltas(static_feats, DELTA_WINDOW));
    let d2 = config
        .use_delta2
        .then(|| deltas(d1.as_ref().expect("delta computed"), DELTA_WINDOW));
    let mut blocks = Vec::with_capacity(3);
    if config.use_static {
        blocks.push(static_feats);
    }
    if config.use_delta {
        blocks.push(d1.as_ref().expect("delta computed"));
    }
    if let Some(d2) = &d2 {
        blocks.push(d2);
    }
    Matrix::hstack(&blocks)
}

/// Per-dimension standardization over the frames of one utterance.
/// Dimensions with (near) zero variance become all zeros.
pub fn cmvn_matrix(feats: &Matrix) -> Matrix {
    let n = feats.rows();
    let d = feats.cols();
    let mut out = feats.clone();
    if n == 0 {
        return out;
    }
    for c in 0..d {
        let mean = (0..n).map(|r| feats.get(r, c)).sum::<f64>() / n as f64;
        let var = (0..n).map(|r| (feats.get(r, c) - mean).powi(2)).sum::<f64>() / n as f64;
        if var < CMVN_MIN_VARIANCE {
            for r in 0..n {
                out.set(r, c, 0.0);
            }
        } else {
            let inv = 1.0 / var.sqrt();
            for r in 0..n {
                out.set(r, c, (feats.get(r, c) - mean) * inv);
            }
        }
    }
    out
}

pub fn cmvn(feats: &FeatureMatrix) -> FeatureMatrix {
    FeatureMatrix {
        frames: cmvn_matrix(&feats.frames),
        source_id: feats.source_id.clone(),
    }
}

/// Static cepstra for every frame: `[c0?, c1..c_num_ceps]`.
pub fn static_cepstra(
    signal: &AudioSignal,
    cqt_config: &CqtConfig,
    num_ceps: usize,
    include_zeroth: bool,
    resample_period: usize,
) -> Result<Matrix> {
    let spec = cqt_spectrogram(signal, cqt_config)?;
    let logp = log_power(&spec, POWER_FLOOR);
    let grid = UniformGrid::for_config(cqt_config, resample_period);
    let uniform = uniform_resample(&logp, &spec.center_freqs, &grid)?;
    dct_truncate(&uniform, num_ceps, include_zeroth)
}

/// Build features from static cepstra that include the zeroth coefficient.
///
/// Lets one CQT pass serve every front-end variant with the same `num_ceps`.
pub fn assemble_features(
    static_with_zeroth: &Matrix,
    config: &CqccConfig,
    source_id: &str,
) -> Result<FeatureMatrix> {
    config.validate()?;
    if static_with_zeroth.cols() != config.num_ceps + 1 {
        return Err(Error::DimMismatch {
            expected: config.num_ceps + 1,
            got: static_with_zeroth.cols(),
        });
    }
    let base;
    let stat = if config.include_zeroth {
        static_with_zeroth
    } else {
        let cols: Vec<usize> = (1..=config.num_ceps).collect();
        base = static_with_zeroth.select_cols(&cols);
        &base
    };
    let mut frames = append_deltas(stat, config);
    if config.apply_cmvn {
        frames = cmvn_matrix(&frames);
    }
    FeatureMatrix::new(frames, source_id)
}

/// Full CQCC pipeline for one utterance.
pub fn extract_cqcc(
    signal: &AudioSignal,
    cqt_config: &CqtConfig,
    cqcc_config: &CqccConfig,
    source_id: &str,
) -> Result<FeatureMatrix> {
    cqcc_config.validate()?;
    let stat = static_cepstra(
        signal,
        cqt_config,
        cqcc_config.num_ceps,
        cqcc_config.include_zeroth,
        cqcc_config.resample_period,
    )?;
    let mut frames = append_deltas(&stat, cqcc_config);
    if cqcc_config.apply_cmvn {
        frames = cmvn_matrix(&frames);
    }
    FeatureMatrix::new(frames, source_id)
}

const CACHE_MAGIC: &[u8; 8] = b"CQCCFEAT";
const CACHE_VERSION: u32 = 1;

/// Serialize features: 16-byte header (magic, version, reserved), then `u64`
/// dim, `u64` frame count and row-major little-endian `f64` values.
pub fn encode_feature_cache(feats: &FeatureMatrix) -> Vec<u8> {
    let m = &feats.frames;
    let mut out = Vec::with_capacity(32 + 8 * m.as_slice().len());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_cache(bytes: &[u8], source_id: &str) -> Result<FeatureMatrix> {
    if bytes.len() < 32 || &bytes[..8] != CACHE_MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported cache version {version}")));
    }
    let dim = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let frames = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes")) as usize;
    let expected = dim
        .checked_mul(frames)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Cache("size overflow".into()))?;
    let body = &bytes[32..];
    if body.len() != expected {
        return Err(Error::Cache(format!(
            "expected {expected} payload bytes, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    FeatureMatrix::new(Matrix::from_vec(frames, dim, data), source_id)
}

pub fn write_feature_cache(path: impl AsRef<Path>, feats: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_feature_cache(feats))
        .map_err(|e| Error::io(path, e))
}

pub fn read_feature_cache(path: impl AsRef<Path>, source_id: &str) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_cache(&bytes, source_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-3.0..3.0)).collect())
    }

    fn spec_from(mags: Vec<f64>, bins: usize) -> CqtSpectrogram {
        let frames = mags.len() / bins;
        CqtSpectrogram {
            magnitudes: Matrix::from_vec(frames, bins, mags),
            center_freqs: (0..bins).map(|k| 100.0 * 2f64.powf(k as f64 / 4.0)).collect(),
            frame_times: (0..frames).map(|t| t as f64 * 0.01).collect(),
        }
    }

    #[test]
    fn log_power_values() {
        let spec = spec_from(vec![1.0, 0.0, 10.0, 3.0], 2);
        let lp = log_power(&spec, 1e-20);
        assert_eq!(lp.get(0, 0), 0.0);
        assert!((lp.get(0, 1) - (-46.0517)).abs() < 1e-4);
        assert!((lp.get(1, 0) - 100f64.ln()).abs() < 1e-12);
        let scaled = spec_from(vec![10.0, 0.0, 100.0, 30.0], 2);
        let lp2 = log_power(&scaled, 1e-20);
        for (i, (a, b)) in lp.as_slice().iter().zip(lp2.as_slice()).enumerate() {
            if i != 1 {
                assert!((b - a - 100f64.ln()).abs() < 1e-12);
            }
        }
    }

    fn test_grid() -> (Vec<f64>, UniformGrid) {
        let cqt = CqtConfig {
            bins_per_octave: 12,
            f_min: 100.0,
            f_max: 800.0,
            hop: 1,
        };
        (cqt.center_freqs(), UniformGrid::for_config(&cqt, 4))
    }

    #[test]
    fn grid_construction() {
        let (_, grid) = test_grid();
        assert_eq!(grid.len, 4 * 7 + 1);
        let pts = grid.points();
        assert_eq!(pts[0], 100.0);
        assert_eq!(*pts.last().unwrap(), 800.0);
        for w in pts.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 25.0).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_constant_and_linear() {
        let (freqs, grid) = test_grid();
        let constant = Matrix::from_rows(&[vec![2.5; freqs.len()]]);
        let out = uniform_resample(&constant, &freqs, &grid).unwrap();
        assert!(out.as_slice().iter().all(|&v| (v - 2.5).abs() < 1e-12));

        let linear = Matrix::from_rows(&[freqs.iter().map(|f| 0.01 * f - 3.0).collect::<Vec<_>>()]);
        let out = uniform_resample(&linear, &freqs, &grid).unwrap();
        for (v, f) in out.row(0).iter().zip(grid.points()) {
            assert!((v - (0.01 * f - 3.0)).abs() < 1e-6, "{v} at {f}");
        }
    }

    #[test]
    fn spline_interpolates_knots() {
        // grid points that coincide with knots must reproduce the data
        let knots = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let grid = UniformGrid {
            f_min: 1.0,
            f_max: 5.0,
            len: 5,
        };
        let y = Matrix::from_rows(&[vec![0.3, -1.0, 2.0, 0.5, 0.0]]);
        let out = uniform_resample(&y, &knots, &grid).unwrap();
        for (a, b) in out.row(0).iter().zip(y.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_matches_dense_solve() {
        // natural spline second derivatives checked against Gaussian elimination
        let knots = vec![1.0, 1.5, 2.6, 3.0, 4.2, 5.0];
        let y = [0.2, 1.1, -0.4, 0.9, 0.0, 2.0];
        let n = knots.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut a = vec![vec![0.0; n + 1]; n];
        a[0][0] = 1.0;
        a[n - 1][n - 1] = 1.0;
        for i in 1..n - 1 {
            a[i][i - 1] = h[i - 1];
            a[i][i] = 2.0 * (h[i - 1] + h[i]);
            a[i][i + 1] = h[i];
            a[i][n] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        for c in 0..n {
            let p = (c..n).max_by(|&p, &q| a[p][c].abs().partial_cmp(&a[q][c].abs()).unwrap()).unwrap();
            a.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        let m_ref: Vec<f64> = (0..n).map(|i| a[i][n] / a[i][i]).collect();
        let sp = SplineResampler::new(&knots, &[2.0]);
        let mut m = Vec::new();
        let mut out = [0.0];
        sp.apply(&y, &mut m, &mut out);
        for (p, q) in m.iter().zip(&m_ref) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_bins() {
        let grid = UniformGrid {
            f_min: 1.0,
            f_max: 2.0,
            len: 10,
        };
        let m = Matrix::from_rows(&[vec![1.0]]);
        assert!(matches!(uniform_resample(&m, &[1.0], &grid), Err(Error::TooFewBins(1))));
    }

    #[test]
    fn dct_of_constant() {
        let l = 50;
        let c = 1.7;
        let m = Matrix::from_rows(&[vec![c; l]]);
        let out = dct_truncate(&m, 29, true).unwrap();
        assert_eq!(out.cols(), 30);
        assert!((out.get(0, 0) - c * (l as f64).sqrt()).abs() < 1e-12);
        for k in 1..30 {
            assert!(out.get(0, k).abs() < 1e-12);
        }
        let no_zeroth = dct_truncate(&m, 29, false).unwrap();
        assert_eq!(no_zeroth.cols(), 29);
    }

    #[test]
    fn dct_full_inverse_roundtrip() {
        let l = 40;
        let x = random_matrix(1, l, 11);
        let coeffs = dct_truncate(&x, l - 1, true).unwrap();
        // DCT-III written out independently
        for n in 0..l {
            let mut v = coeffs.get(0, 0) / (l as f64).sqrt();
            for k in 1..l {
                v += coeffs.get(0, k)
                    * (2.0 / l as f64).sqrt()
                    * (PI * k as f64 * (n as f64 + 0.5) / l as f64).cos();
            }
            assert!((v - x.get(0, n)).abs() < 1e-9);
        }
    }

    #[test]
    fn dct_grid_too_small() {
        let m = Matrix::from_rows(&[vec![0.0; 29]]);
        assert!(matches!(
            dct_truncate(&m, 29, true),
            Err(Error::GridTooSmall { grid: 29, required: 30 })
        ));
    }

    #[test]
    fn deltas_of_constant_and_single_frame() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        let cfg = CqccConfig::from_variant("stat+d+dd", false).unwrap();
        let out = append_deltas(&m, &cfg);
        assert_eq!(out.cols(), 6);
        for r in 0..3 {
            assert_eq!(&out.row(r)[2..], &[0.0; 4]);
        }
        let single = Matrix::from_rows(&[vec![5.0, -1.0]]);
        let out = append_deltas(&single, &cfg);
        assert_eq!(out.row(0), &[5.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn delta_of_ramp() {
        // regression slope of x_t = a t over a symmetric window is exactly a
        let a = 0.37;
        let rows: Vec<Vec<f64>> = (0..20).map(|t| vec![a * t as f64, -2.0 * a * t as f64]).collect();
        let d = deltas(&Matrix::from_rows(&rows), DELTA_WINDOW);
        for t in DELTA_WINDOW..20 - DELTA_WINDOW {
            assert!((d.get(t, 0) - a).abs() < 1e-9);
            assert!((d.get(t, 1) + 2.0 * a).abs() < 1e-9);
        }
        // first frame: replicated edge gives (1*(x1-x0) + 2*(x2-x0)) / 10 = 0.5a
        assert!((d.get(0, 0) - 0.5 * a).abs() < 1e-12);
    }

    #[test]
    fn block_order() {
        let m = random_matrix(6, 3, 2);
        let d1 = deltas(&m, 2);
        let d2 = deltas(&d1, 2);
        let out = append_deltas(&m, &CqccConfig::from_variant("stat+dd", false).unwrap());
        for r in 0..6 {
            assert_eq!(&out.row(r)[..3], m.row(r));
            assert_eq!(&out.row(r)[3..], d2.row(r));
        }
    }

    #[test]
    fn cmvn_statistics() {
        let m = random_matrix(50, 4, 5);
        let out = cmvn_matrix(&m);
        for c in 0..4 {
            let mean: f64 = (0..50).map(|r| out.get(r, c)).sum::<f64>() / 50.0;
            let var: f64 = (0..50).map(|r| (out.get(r, c) - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cmvn_constant_dimension_is_zeroed() {
        let m = Matrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 2.0], vec![3.0, 4.0]]);
        let out = cmvn_matrix(&m);
        assert!((0..3).all(|r| out.get(r, 0) == 0.0));
    }

    proptest! {
        #[test]
        fn cmvn_is_idempotent(seed in 0u64..1000, rows in 2usize..40, cols in 1usize..6) {
            let m = random_matrix(rows, cols, seed);
            let once = cmvn_matrix(&m);
            let twice = cmvn_matrix(&once);
            for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn dimension_formula(p in 1usize..40, z: bool, s: bool, d: bool, dd: bool) {
            prop_assume!(s || d || dd);
            let cfg = CqccConfig {
                num_ceps: p,
                include_zeroth: z,
                use_static: s,
                use_delta: d,
                use_delta2: dd,
                apply_cmvn: false,
                resample_period: 16,
            };
            let stat = random_matrix(7, p + z as usize, 1);
            let out = append_deltas(&stat, &cfg);
            prop_assert_eq!(out.cols(), cfg.dim());
            prop_assert_eq!(cfg.dim(), (p + z as usize) * (s as usize + d as usize + dd as usize));
        }

        #[test]
        fn feature_cache_roundtrip(seed in 0u64..100, rows in 0usize..20, cols in 1usize..8) {
            let fm = FeatureMatrix::new(random_matrix(rows, cols, seed), "u").unwrap();
            let back = decode_feature_cache(&encode_feature_cache(&fm), "u").unwrap();
            prop_assert_eq!(back, fm);
        }
    }

    #[test]
    fn variant_dimensions() {
        let dims: Vec<usize> = VARIANTS
            .iter()
            .map(|v| CqccConfig::from_variant(v, false).unwrap().dim())
            .collect();
        assert_eq!(dims, vec![29, 29, 29, 58, 58, 58, 87, 90]);
        assert_eq!(CqccConfig::full().dim(), 90);
        assert_eq!(CqccConfig::default().dim(), 58);
        for v in VARIANTS {
            assert_eq!(CqccConfig::from_variant(v, true).unwrap().variant_name(), v);
        }
        assert!(CqccConfig::from_variant("d+x", false).is_err());
        assert!(CqccConfig::from_variant("z", false).is_err());
        assert!(CqccConfig::from_variant("d+d", false).is_err());
    }

    #[test]
    fn cache_rejects_corruption() {
        let fm = FeatureMatrix::new(random_matrix(3, 2, 1), "u").unwrap();
        let mut bytes = encode_feature_cache(&fm);
        bytes.pop();
        assert!(decode_feature_cache(&bytes, "u").is_err());
        let mut bytes = encode_feature_cache(&fm);
        bytes[0] = b'X';
        assert!(decode_feature_cache(&bytes, "u").is_err());
    }

    mod pipeline {
        use super::*;

        fn cqt() -> CqtConfig {
            CqtConfig {
                bins_per_octave: 24,
                f_min: 250.0,
                f_max: 4000.0,
                hop: 80,
            }
        }

        fn noise(len: usize, amp: f64, seed: u64) -> AudioSignal {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            AudioSignal::new((0..len).map(|_| amp * rng.gen_range(-1.0..1.0)).collect(), 8000).unwrap()
        }

        #[test]
        fn output_dimensions() {
            let sig = noise(4000, 0.3, 1);
            let full = extract_cqcc(&sig, &cqt(), &CqccConfig::full(), "a").unwrap();
            assert_eq!(full.dim(), 90);
            assert_eq!(full.num_frames(), (4000 - 1) / 80 + 1);
            let dd = extract_cqcc(&sig, &cqt(), &CqccConfig::default(), "a").unwrap();
            assert_eq!(dd.dim(), 58);
        }

        #[test]
        fn short_signal_rejected() {
            let need = cqt().longest_window(8000);
            let sig = noise(need - 1, 0.3, 1);
            assert!(matches!(
                extract_cqcc(&sig, &cqt(), &CqccConfig::full(), "a"),
                Err(Error::SignalTooShort { .. })
            ));
        }

        #[test]
        fn deterministic() {
            let sig = noise(3000, 0.3, 4);
            let a = extract_cqcc(&sig, &cqt(), &CqccConfig::full(), "a").unwrap();
            let b = extract_cqcc(&sig, &cqt(), &CqccConfig::full(), "a").unwrap();
            assert_eq!(a, b);
        }

        #[test]
        fn scaling_moves_only_zeroth_static_coefficient() {
            let sig = noise(3000, 0.3, 9);
            let scaled = AudioSignal::new(sig.samples().iter().map(|v| v * 4.0).collect(), 8000).unwrap();
            let cfg = CqccConfig::full();
            let a = extract_cqcc(&sig, &cqt(), &cfg, "a").unwrap();
            let b = extract_cqcc(&scaled, &cqt(), &cfg, "b").unwrap();
            let grid_len = UniformGrid::for_config(&cqt(), cfg.resample_period).len as f64;
            let shift = 2.0 * 4f64.ln() * grid_len.sqrt();
            for t in 0..a.num_frames() {
                let (ra, rb) = (a.frames.row(t), b.frames.row(t));
                assert!((rb[0] - ra[0] - shift).abs() < 1e-6);
                for j in 1..90 {
                    assert!((ra[j] - rb[j]).abs() < 1e-6, "frame {t} coeff {j}");
                }
            }
        }

        #[test]
        fn assembled_matches_direct_extraction() {
            let sig = noise(3000, 0.3, 2);
            let stat = static_cepstra(&sig, &cqt(), 29, true, 16).unwrap();
            for v in VARIANTS {
                for cm in [false, true] {
                    let cfg = CqccConfig::from_variant(v, cm).unwrap();
                    let direct = extract_cqcc(&sig, &cqt(), &cfg, "x").unwrap();
                    let assembled = assemble_features(&stat, &cfg, "x").unwrap();
                    assert_eq!(direct, assembled, "{v} cmvn={cm}");
                }
            }
        }
    }
}
