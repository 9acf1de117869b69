//! Exact-in-law sampling of fractional Brownian motion on a uniform grid.
//!
//! Increments are fractional Gaussian noise with autocovariance
//! `rho(k) = (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2`, scaled by
//! `(T/n)^{2H}`. Power-of-two grids use circulant embedding (one complex
//! transform yields two independent paths); other grids up to
//! [`CHOLESKY_MAX_STEPS`] use a Cholesky factor; `H = 1` is the line `N t`.

use std::io::{self, BufRead, Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::closed_form::{Horizon, HurstExponent};
use crate::error::{domain, Error, Result};
use crate::rng::{stream_rng, StreamRng};

pub const CHOLESKY_MAX_STEPS: usize = 4096;
/// Largest embedding is `MAX_PADDING * n`.
pub const MAX_PADDING: usize = 16;
/// Eigenvalues above `-EIGEN_TOLERANCE * max` are clamped to zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;
/// Below this Hurst exponent the path metadata carries a conditioning flag.
pub const SMALL_HURST: f64 = 0.05;

/// Uniform grid `t_i = i T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_steps: usize,
    pub horizon: Horizon,
}

impl GridSpec {
    pub fn new(n_steps: usize, horizon: Horizon) -> Result<Self> {
        if n_steps < 2 {
            return domain(format!("grid needs at least 2 steps, got {n_steps}"));
        }
        Ok(Self { n_steps, horizon })
    }

    pub fn step(&self) -> f64 {
        self.horizon.value() / self.n_steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.horizon.value() / self.n_steps as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Circulant,
    Cholesky,
    DegenerateLinear,
}

impl SamplingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::Circulant => "circulant",
            SamplingMethod::Cholesky => "cholesky",
            SamplingMethod::DegenerateLinear => "degenerate_linear",
        }
    }

    fn code(self) -> u8 {
        match self {
            SamplingMethod::Circulant => 0,
            SamplingMethod::Cholesky => 1,
            SamplingMethod::DegenerateLinear => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SamplingMethod::Circulant),
            1 => Some(SamplingMethod::Cholesky),
            2 => Some(SamplingMethod::DegenerateLinear),
            _ => None,
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            SamplingMethod::Circulant,
            SamplingMethod::Cholesky,
            SamplingMethod::DegenerateLinear,
        ]
        .into_iter()
        .find(|m| m.name() == name)
    }
}

/// How the sampler was set up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    /// Size of the circulant, 0 for other methods.
    pub embedding_size: usize,
    pub clamped_eigenvalues: usize,
    /// Smallest eigenvalue divided by the largest, before clamping.
    pub min_eigenvalue_ratio: f64,
    pub small_hurst: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub values: Vec<f64>,
    pub hurst: HurstExponent,
    pub grid: GridSpec,
    pub seed: u64,
    pub method: SamplingMethod,
    pub diagnostics: SamplerDiagnostics,
}

/// Autocovariance of unit-spaced fractional Gaussian noise.
pub fn fgn_autocovariance(h: HurstExponent, lag: u64) -> f64 {
    let two_h = 2.0 * h.value();
    let k = lag as f64;
    let up = (k + 1.0).powf(two_h);
    let mid = k.powf(two_h);
    let down = (k - 1.0).abs().powf(two_h);
    0.5 * (up - 2.0 * mid + down)
}

#[derive(Clone)]
enum Backend {
    Circulant {
        // sqrt(lambda_k / m)
        weights: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky {
        lower: DMatrix<f64>,
    },
    Linear,
}

/// Precomputed sampler for a fixed `(H, grid)`.
#[derive(Clone)]
pub struct FbmSampler {
    hurst: HurstExponent,
    grid: GridSpec,
    backend: Backend,
    diagnostics: SamplerDiagnostics,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler")
            .field("hurst", &self.hurst)
            .field("grid", &self.grid)
            .field("method", &self.method())
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

fn circulant_eigenvalues(h: HurstExponent, n: usize, size: usize) -> Vec<f64> {
    let half = size / 2;
    let mut row: Vec<Complex64> = (0..size)
        .map(|j| {
            let lag = if j <= half { j } else { size - j };
            Complex64::new(fgn_autocovariance(h, lag as u64), 0.0)
        })
        .collect();
    debug_assert!(half >= n);
    FftPlanner::new().plan_fft_forward(size).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

impl FbmSampler {
    pub fn new(hurst: HurstExponent, grid: GridSpec) -> Result<Self> {
        let small_hurst = hurst.value() < SMALL_HURST;
        let n = grid.n_steps;
        if hurst.is_degenerate() {
            return Ok(Self {
                hurst,
                grid,
                backend: Backend::Linear,
                diagnostics: SamplerDiagnostics {
                    embedding_size: 0,
                    clamped_eigenvalues: 0,
                    min_eigenvalue_ratio: 0.0,
                    small_hurst,
                },
            });
        }
        let mut worst = 0.0;
        if n.is_power_of_two() {
            let mut size = 2 * n;
            while size <= MAX_PADDING * n {
                let mut eig = circulant_eigenvalues(hurst, n, size);
                let max = eig.iter().cloned().fold(f64::MIN, f64::max);
                let min = eig.iter().cloned().fold(f64::MAX, f64::min);
                worst = min;
                if min >= -EIGEN_TOLERANCE * max {
                    let mut clamped = 0;
                    for e in eig.iter_mut() {
                        if *e < 0.0 {
                            *e = 0.0;
                            clamped += 1;
                        }
                    }
                    let m = size as f64;
                    let weights = eig.iter().map(|e| (e / m).sqrt()).collect();
                    let fft = FftPlanner::new().plan_fft_forward(size);
                    return Ok(Self {
                        hurst,
                        grid,
                        backend: Backend::Circulant { weights, fft },
                        diagnostics: SamplerDiagnostics {
                            embedding_size: size,
                            clamped_eigenvalues: clamped,
                            min_eigenvalue_ratio: min / max,
                            small_hurst,
                        },
                    });
                }
                size *= 2;
            }
        }
        if n <= CHOLESKY_MAX_STEPS {
            let cov = DMatrix::from_fn(n, n, |i, j| {
                fgn_autocovariance(hurst, (i as i64 - j as i64).unsigned_abs())
            });
            let chol = cov.cholesky().ok_or_else(|| {
                Error::Numerical(format!(
                    "fGn covariance is not positive definite for H={}, n={n}",
                    hurst.value()
                ))
            })?;
            return Ok(Self {
                hurst,
                grid,
                backend: Backend::Cholesky { lower: chol.l() },
                diagnostics: SamplerDiagnostics {
                    embedding_size: 0,
                    clamped_eigenvalues: 0,
                    min_eigenvalue_ratio: 0.0,
                    small_hurst,
                },
            });
        }
        if !n.is_power_of_two() {
            return domain(format!(
                "grids above {CHOLESKY_MAX_STEPS} steps must be powers of two, got {n}"
            ));
        }
        Err(Error::Embedding {
            n_steps: n,
            min_eigenvalue: worst,
        })
    }

    pub fn hurst(&self) -> HurstExponent {
        self.hurst
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn diagnostics(&self) -> SamplerDiagnostics {
        self.diagnostics
    }

    pub fn method(&self) -> SamplingMethod {
        match self.backend {
            Backend::Circulant { .. } => SamplingMethod::Circulant,
            Backend::Cholesky { .. } => SamplingMethod::Cholesky,
            Backend::Linear => SamplingMethod::DegenerateLinear,
        }
    }

    /// Fills `a` and `b` (each of length `n_steps + 1`) with two independent
    /// paths drawn from `rng`.
    pub fn sample_pair_into(&self, rng: &mut StreamRng, a: &mut [f64], b: &mut [f64]) {
        let n = self.grid.n_steps;
        assert_eq!(a.len(), n + 1);
        assert_eq!(b.len(), n + 1);
        match &self.backend {
            Backend::Linear => {
                let za: f64 = rng.sample(StandardNormal);
                let zb: f64 = rng.sample(StandardNormal);
                for i in 0..=n {
                    let t = self.grid.time(i);
                    a[i] = za * t;
                    b[i] = zb * t;
                }
            }
            Backend::Circulant { weights, fft } => {
                let mut buf: Vec<Complex64> = weights
                    .iter()
                    .map(|w| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(w * re, w * im)
                    })
                    .collect();
                fft.process(&mut buf);
                let scale = self.grid.step().powf(self.hurst.value());
                a[0] = 0.0;
                b[0] = 0.0;
                for i in 0..n {
                    a[i + 1] = a[i] + scale * buf[i].re;
                    b[i + 1] = b[i] + scale * buf[i].im;
                }
            }
            Backend::Cholesky { lower } => {
                let scale = self.grid.step().powf(self.hurst.value());
                for out in [a, b] {
                    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    out[0] = 0.0;
                    for i in 0..n {
                        let incr: f64 = (0..=i).map(|j| lower[(i, j)] * z[j]).sum();
                        out[i + 1] = out[i] + scale * incr;
                    }
                }
            }
        }
    }

    /// The path for `seed`: the first of the pair drawn from stream 0.
    pub fn sample_path(&self, seed: u64) -> SamplePath {
        let n = self.grid.n_steps;
        let mut a = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        self.sample_pair_into(&mut stream_rng(seed, 0), &mut a, &mut b);
        SamplePath {
            values: a,
            hurst: self.hurst,
            grid: self.grid,
            seed,
            method: self.method(),
            diagnostics: self.diagnostics,
        }
    }
}

/// One fBm path on `grid`, a deterministic function of `(H, grid, seed)`.
pub fn sample_path(hurst: HurstExponent, grid: GridSpec, seed: u64) -> Result<SamplePath> {
    Ok(FbmSampler::new(hurst, grid)?.sample_path(seed))
}

const BINARY_MAGIC: &[u8; 8] = b"SUPFBMP1";

impl SamplePath {
    /// CSV dump: `#`-prefixed metadata lines, a `t,value` header, then one
    /// row per grid point.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# supfbm sample path")?;
        writeln!(
            w,
            "# hurst={} horizon={} n_steps={} seed={} method={}",
            self.hurst.value(),
            self.grid.horizon.value(),
            self.grid.n_steps,
            self.seed,
            self.method.name()
        )?;
        writeln!(w, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.time(i), v)?;
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<SamplePath> {
        let bad =
            |msg: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, msg.to_string()));
        let mut meta = std::collections::HashMap::new();
        let mut values = Vec::new();
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        meta.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }
            if line == "t,value" || line.is_empty() {
                continue;
            }
            let (_, v) = line.split_once(',').ok_or_else(|| bad("malformed row"))?;
            values.push(v.parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        let get = |k: &str| meta.get(k).ok_or_else(|| bad(&format!("missing {k}")));
        let parse_f = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|_| bad(&format!("bad {k}")))
        };
        let hurst = HurstExponent::new(parse_f("hurst")?)?;
        let horizon = Horizon::new(parse_f("horizon")?)?;
        let n_steps = get("n_steps")?
            .parse::<usize>()
            .map_err(|_| bad("bad n_steps"))?;
        let seed = get("seed")?.parse::<u64>().map_err(|_| bad("bad seed"))?;
        let method = SamplingMethod::from_name(get("method")?).ok_or_else(|| bad("bad method"))?;
        if values.len() != n_steps + 1 {
            return Err(bad("row count does not match n_steps"));
        }
        Ok(SamplePath {
            values,
            hurst,
            grid: GridSpec::new(n_steps, horizon)?,
            seed,
            method,
            diagnostics: SamplerDiagnostics {
                embedding_size: 0,
                clamped_eigenvalues: 0,
                min_eigenvalue_ratio: 0.0,
                small_hurst: hurst.value() < SMALL_HURST,
            },
        })
    }

    /// Little-endian binary dump: magic `SUPFBMP1`, `f64` H, `f64` T,
    /// `u64` n, `u64` seed, `u8` method (0 circulant, 1 cholesky,
    /// 2 degenerate_linear), then `n + 1` pairs of `f64` `(t_i, value_i)`.
    pub fn write_binary(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&self.hurst.value().to_le_bytes())?;
        w.write_all(&self.grid.horizon.value().to_le_bytes())?;
        w.write_all(&(self.grid.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&[self.method.code()])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_all(&self.grid.time(i).to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<SamplePath> {
        let bad =
            |msg: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, msg.to_string()));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(bad("not a supfbm path file"));
        }
        let mut b8 = [0u8; 8];
        let mut read_f64 = |r: &mut dyn Read| -> io::Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let hurst = HurstExponent::new(read_f64(&mut r)?)?;
        let horizon = Horizon::new(read_f64(&mut r)?)?;
        let mut u = [0u8; 8];
        r.read_exact(&mut u)?;
        let n_steps = u64::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let seed = u64::from_le_bytes(u);
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        let method = SamplingMethod::from_code(code[0]).ok_or_else(|| bad("bad method code"))?;
        let grid = GridSpec::new(n_steps, horizon)?;
        let mut values = Vec::with_capacity(n_steps + 1);
        for _ in 0..=n_steps {
            let _t = read_f64(&mut r)?;
            values.push(read_f64(&mut r)?);
        }
        Ok(SamplePath {
            values,
            hurst,
            grid,
            seed,
            method,
            diagnostics: SamplerDiagnostics {
                embedding_size: 0,
                clamped_eigenvalues: 0,
                min_eigenvalue_ratio: 0.0,
                small_hurst: hurst.value() < SMALL_HURST,
            },
        })
    }
}
