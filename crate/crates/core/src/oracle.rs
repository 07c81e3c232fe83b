//! Monte Carlo under the terminal measure P_{T_N}: state simulation,
//! instrument prices with Radon–Nikodym reweighting, and the statistics
//! used to cross-check the analytic modules.
//!
//! Every simulation unit (a path, or an antithetic pair) draws from its own
//! ChaCha8 stream, and units are reduced in fixed-size blocks in index
//! order, so estimates do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affine::{AffineError, AffineModel, JumpLaw, JumpOuParams, WishartParams};
use crate::caps::{CapletSpec, PricingError};
use crate::libor::{LiborError, LiborModel};
use crate::matcore::{cholesky, expm, sqrtm_psd_floor, sym_apply, sym_eigen, MatError, SquareMat, SymMat};
use crate::swaptions::{Side, SwaptionSpec};

const BLOCK: usize = 256;
pub const PATH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid Monte Carlo configuration: {0}")]
    Config(String),
    #[error("unsupported jump law: {0}")]
    UnsupportedLaw(String),
    #[error(transparent)]
    Affine(#[from] AffineError),
    #[error(transparent)]
    Libor(#[from] LiborError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Σ = XᵀX with X a κ×d Ornstein–Uhlenbeck matrix; needs integer κ.
    ExactSquaredOu,
    /// Euler–Maruyama with eigenvalues floored at zero after each step.
    EulerProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    /// Simulation step in years.
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub antithetic: bool,
}

impl McConfig {
    pub const MIN_PATHS: usize = 1000;

    /// Exact scheme with dt = ΔT/8, or Euler with dt = ΔT/32.
    pub fn for_tenor(delta_t: f64, scheme: Scheme, n_paths: usize, seed: u64) -> Self {
        let dt = match scheme {
            Scheme::ExactSquaredOu => delta_t / 8.0,
            Scheme::EulerProjected => delta_t / 32.0,
        };
        McConfig {
            n_paths,
            dt,
            seed,
            scheme,
            antithetic: false,
        }
    }

    pub fn with_antithetic(self, antithetic: bool) -> Self {
        McConfig { antithetic, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        McConfig { seed, ..self }
    }

    /// Checks the invariants; `delta_t` adds the dt ≤ ΔT/8 bound.
    pub fn validate(&self, delta_t: Option<f64>) -> Result<(), McError> {
        if self.n_paths < Self::MIN_PATHS {
            return Err(McError::Config(format!(
                "n_paths = {} below the minimum {}",
                self.n_paths,
                Self::MIN_PATHS
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(McError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(dt_max) = delta_t.map(|d| d / 8.0) {
            if self.dt > dt_max * (1.0 + 1e-12) {
                return Err(McError::Config(format!("dt = {} exceeds ΔT/8 = {dt_max}", self.dt)));
            }
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }

    fn paths_per_unit(&self) -> usize {
        if self.antithetic {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Set when the scheme has discretization bias.
    pub biased: bool,
}

impl McEstimate {
    /// (mean - target) / std_error; 0 when both coincide with zero error.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target).abs() <= n_se
    }
}

/// Running mean, M2, min and max (Welford, with Chan's merge).
#[derive(Debug, Clone, Copy)]
struct Stats {
    n: f64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Stats {
    fn new() -> Self {
        Stats {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(&mut self, o: &Stats) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    fn estimate(&self, paths_per_unit: usize, biased: bool) -> McEstimate {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        McEstimate {
            mean: self.mean,
            std_error: (var / self.n).sqrt(),
            n_paths: self.n as usize * paths_per_unit,
            biased,
        }
    }
}

/// Uniform dt grid on [0, horizon] merged with the observation times.
///
/// Returns the grid and, for each observation time, its grid index.
pub fn time_grid(obs: &[f64], dt: f64) -> (Vec<f64>, Vec<usize>) {
    let horizon = obs.iter().cloned().fold(0.0, f64::max);
    let n = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..=n).map(|j| (j as f64 * dt).min(horizon)).collect();
    times.extend_from_slice(obs);
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = 1e-10 * horizon.max(1.0);
    let mut grid: Vec<f64> = Vec::with_capacity(times.len());
    for t in times {
        match grid.last_mut() {
            Some(last) if (t - *last).abs() <= tol => *last = last.max(t),
            _ => grid.push(t),
        }
    }
    let idx = obs
        .iter()
        .map(|&t| grid.iter().position(|&g| (g - t).abs() <= tol).unwrap())
        .collect();
    (grid, idx)
}

fn flat(a: &SquareMat) -> Vec<f64> {
    a.as_slice().to_vec()
}

/// Jump-size sampler on SPD matrices.
#[derive(Debug, Clone)]
enum JumpSampler {
    /// Bartlett decomposition with scale factor L.
    Central { chol: SquareMat, chi: Vec<ChiSquared<f64>> },
    /// Sum of n outer products (Lz + μ_r)(Lz + μ_r)ᵀ, μ_r the columns of 𝓜.
    NonCentral { n: usize, chol: SquareMat, mm: SquareMat },
}

impl JumpSampler {
    fn new(law: &JumpLaw) -> Result<Self, McError> {
        let chol = cholesky(law.scale())?;
        let d = chol.dim();
        match law {
            JumpLaw::Wishart { n, .. } => {
                let chi = (0..d)
                    .map(|i| ChiSquared::new(n - i as f64).map_err(|e| McError::UnsupportedLaw(e.to_string())))
                    .collect::<Result<_, _>>()?;
                Ok(JumpSampler::Central { chol, chi })
            }
            JumpLaw::NonCentralWishart { n, mm, .. } => {
                if n.fract() != 0.0 || *n < d as f64 {
                    return Err(McError::UnsupportedLaw(format!(
                        "non-central jumps are sampled for integer n >= d only, got n = {n}"
                    )));
                }
                Ok(JumpSampler::NonCentral {
                    n: *n as usize,
                    chol,
                    mm: mm.clone(),
                })
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, sign: f64) -> SymMat {
        match self {
            JumpSampler::Central { chol, chi, .. } => {
                let d = chol.dim();
                let mut a = SquareMat::zeros(d);
                for i in 0..d {
                    a[(i, i)] = chi[i].sample(rng).sqrt();
                    for j in 0..i {
                        let z: f64 = rng.sample(StandardNormal);
                        a[(i, j)] = sign * z;
                    }
                }
                let la = chol * &a;
                SymMat::from_symmetric_part(&(&la * &la.transpose()))
            }
            JumpSampler::NonCentral { n, chol, mm } => {
                let d = chol.dim();
                let mut w = SquareMat::zeros(d);
                for r in 0..*n {
                    let z: Vec<f64> = (0..d).map(|_| sign * rng.sample::<f64, _>(StandardNormal)).collect();
                    let v: Vec<f64> = (0..d)
                        .map(|i| {
                            let lz: f64 = (0..=i).map(|j| chol[(i, j)] * z[j]).sum();
                            lz + if r < d { mm[(i, r)] } else { 0.0 }
                        })
                        .collect();
                    for i in 0..d {
                        for j in 0..d {
                            w[(i, j)] += v[i] * v[j];
                        }
                    }
                }
                SymMat::from_symmetric_part(&w)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    SquaredOu {
        rows: usize,
        d: usize,
        x0: Vec<f64>,
        /// Per step: e^{Mᵀh} and the symmetric root of the noise covariance.
        steps: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Euler {
        params: WishartParams,
        qtq: SquareMat,
        hs: Vec<f64>,
    },
    Jump {
        params: JumpOuParams,
        flows: Vec<SquareMat>,
        hs: Vec<f64>,
        sampler: JumpSampler,
    },
}

/// Draws state paths on a fixed time grid.
#[derive(Debug, Clone)]
pub struct Simulator {
    times: Vec<f64>,
    kernel: Kernel,
}

/// e^{Mh} and ∫₀^h e^{Ms} QᵀQ e^{Mᵀs} ds via one block exponential.
fn ou_transition(m: &SquareMat, qtq: &SquareMat, h: f64) -> Result<(SquareMat, SymMat), McError> {
    let d = m.dim();
    let gen = SquareMat::from_blocks(&(-m), qtq, &SquareMat::zeros(d), &m.transpose()).scale(h);
    let e = expm(&gen)?;
    let f12 = e.block(0, d, d);
    let f22t = e.block(d, d, d).transpose();
    let cov = SymMat::from_symmetric_part(&(&f22t * &f12));
    Ok((f22t, cov))
}

/// Exact covariance of one row increment of the squared-OU factor.
pub fn ou_noise_covariance(params: &WishartParams, h: f64) -> Result<SymMat, McError> {
    Ok(ou_transition(params.m(), params.qtq().as_mat(), h)?.1)
}

impl Simulator {
    pub fn new(model: &AffineModel, times: Vec<f64>, scheme: Scheme) -> Result<Self, McError> {
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(McError::Config("time grid must start at 0 and increase".into()));
        }
        let hs: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let kernel = match model {
            AffineModel::Wishart(p) => match scheme {
                Scheme::ExactSquaredOu => {
                    let kappa = p.kappa();
                    if kappa.fract() != 0.0 {
                        return Err(McError::Config(format!(
                            "exact squared-OU scheme needs integer kappa, got {kappa}; use euler_projected"
                        )));
                    }
                    let d = p.dim();
                    let rows = kappa as usize;
                    let l = cholesky(p.sigma0())?;
                    let mut x0 = vec![0.0; rows * d];
                    for i in 0..d {
                        for j in 0..d {
                            x0[i * d + j] = l[(j, i)];
                        }
                    }
                    let qtq = p.qtq();
                    let steps = hs
                        .iter()
                        .map(|&h| {
                            let (a, cov) = ou_transition(p.m(), qtq.as_mat(), h)?;
                            let at = a.transpose();
                            Ok((flat(&at), flat(sqrtm_psd_floor(&cov).as_mat())))
                        })
                        .collect::<Result<_, McError>>()?;
                    Kernel::SquaredOu { rows, d, x0, steps }
                }
                Scheme::EulerProjected => Kernel::Euler {
                    params: p.clone(),
                    qtq: p.qtq().as_mat().scale(p.kappa()),
                    hs,
                },
            },
            AffineModel::JumpOu(p) => Kernel::Jump {
                params: p.clone(),
                flows: hs.iter().map(|&h| expm(&p.m().scale(h))).collect::<Result<_, _>>()?,
                sampler: JumpSampler::new(p.law())?,
                hs,
            },
        };
        Ok(Simulator { times, kernel })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn biased(&self) -> bool {
        matches!(self.kernel, Kernel::Euler { .. })
    }

    /// Fills `out` with Σ at every grid time and returns the jump count.
    /// `sign` = -1 mirrors all Gaussian draws.
    pub fn path(&self, rng: &mut ChaCha8Rng, sign: f64, out: &mut Vec<SymMat>) -> usize {
        out.clear();
        match &self.kernel {
            Kernel::SquaredOu { rows, d, x0, steps } => {
                let (rows, d) = (*rows, *d);
                let mut x = x0.clone();
                let mut next = vec![0.0; rows * d];
                let mut z = vec![0.0; d];
                out.push(gram(&x, rows, d));
                for (at, s) in steps {
                    for r in 0..rows {
                        for zl in z.iter_mut() {
                            *zl = sign * rng.sample::<f64, _>(StandardNormal);
                        }
                        for j in 0..d {
                            let mut acc = 0.0;
                            for l in 0..d {
                                acc += x[r * d + l] * at[l * d + j] + z[l] * s[l * d + j];
                            }
                            next[r * d + j] = acc;
                        }
                    }
                    std::mem::swap(&mut x, &mut next);
                    out.push(gram(&x, rows, d));
                }
                0
            }
            Kernel::Euler { params, qtq, hs } => {
                let d = params.dim();
                let m = params.m();
                let q = params.q();
                let mut sigma = params.sigma0().clone();
                out.push(sigma.clone());
                for &h in hs {
                    let root = sqrtm_psd_floor(&sigma);
                    let mut dw = SquareMat::zeros(d);
                    for i in 0..d {
                        for j in 0..d {
                            dw[(i, j)] = sign * h.sqrt() * rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    let s = sigma.as_mat();
                    let drift = &(qtq + &(m * s)) + &(s * &m.transpose());
                    let noise = &(root.as_mat() * &dw) * q;
                    let raw = &(s + &drift.scale(h)) + &(&noise + &noise.transpose());
                    let (vals, vecs) = sym_eigen(&SymMat::from_symmetric_part(&raw));
                    sigma = sym_apply(&vals, &vecs, |v| v.max(0.0));
                    out.push(sigma.clone());
                }
                0
            }
            Kernel::Jump {
                params,
                flows,
                hs,
                sampler,
            } => {
                let mut sigma = params.sigma0().clone();
                let mut count = 0;
                out.push(sigma.clone());
                for (e, &h) in flows.iter().zip(hs) {
                    sigma = sigma.congruence(e);
                    let mean = params.lambda() * h;
                    if mean > 0.0 {
                        let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
                        for _ in 0..n {
                            let s: f64 = rng.random_range(0.0..h);
                            let jump = sampler.sample(rng, sign);
                            let prop = expm(&params.m().scale(h - s)).expect("finite flow");
                            sigma = sigma.add(&jump.congruence(&prop));
                        }
                        count += n;
                    }
                    out.push(sigma.clone());
                }
                count
            }
        }
    }

    /// Runs `cfg.n_paths` paths and estimates the mean of each of the
    /// `n_out` outputs written by `f(path, jump_count, out)`.
    pub fn estimate<F>(&self, cfg: &McConfig, n_out: usize, f: F) -> Vec<McEstimate>
    where
        F: Fn(&[SymMat], usize, &mut [f64]) + Sync,
    {
        let units = cfg.units();
        let n_blocks = units.div_ceil(BLOCK);
        let blocks: Vec<Vec<Stats>> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut stats = vec![Stats::new(); n_out];
                let mut path = Vec::with_capacity(self.times.len());
                let mut vals = vec![0.0; n_out];
                let mut anti = vec![0.0; n_out];
                for unit in b * BLOCK..((b + 1) * BLOCK).min(units) {
                    let mut rng = unit_rng(cfg.seed, unit);
                    let jumps = self.path(&mut rng, 1.0, &mut path);
                    f(&path, jumps, &mut vals);
                    if cfg.antithetic {
                        let mut rng = unit_rng(cfg.seed, unit);
                        let jumps = self.path(&mut rng, -1.0, &mut path);
                        f(&path, jumps, &mut anti);
                        for (v, a) in vals.iter_mut().zip(&anti) {
                            *v = 0.5 * (*v + a);
                        }
                    }
                    for (s, &v) in stats.iter_mut().zip(&vals) {
                        s.push(v);
                    }
                }
                stats
            })
            .collect();
        let mut total = vec![Stats::new(); n_out];
        for b in &blocks {
            for (t, s) in total.iter_mut().zip(b) {
                t.merge(s);
            }
        }
        total
            .iter()
            .map(|s| s.estimate(cfg.paths_per_unit(), self.biased()))
            .collect()
    }

    /// Like [`Simulator::estimate`] but also returns the smallest value of each output.
    fn estimate_with_min<F>(&self, cfg: &McConfig, n_out: usize, f: F) -> (Vec<McEstimate>, Vec<f64>)
    where
        F: Fn(&[SymMat], usize, &mut [f64]) + Sync,
    {
        let min_cell = std::sync::Mutex::new(vec![f64::INFINITY; n_out]);
        let est = self.estimate(cfg, n_out, |p, j, out| {
            f(p, j, out);
            let mut m = min_cell.lock().unwrap();
            for (a, &b) in m.iter_mut().zip(out.iter()) {
                *a = a.min(b);
            }
        });
        (est, min_cell.into_inner().unwrap())
    }
}

fn unit_rng(seed: u64, unit: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit as u64);
    rng
}

fn gram(x: &[f64], rows: usize, d: usize) -> SymMat {
    let mut s = SquareMat::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = (0..rows).map(|r| x[r * d + i] * x[r * d + j]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    SymMat::from_symmetric_part(&s)
}

/// Stored paths, for inspection and CSV dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<SymMat>>,
    pub jump_counts: Vec<usize>,
    pub biased: bool,
    pub seed: u64,
}

impl PathSet {
    /// Columnar CSV: path id, t, then vech(Σ) in row-major upper-triangle order.
    pub fn to_csv(&self) -> String {
        let d = self.paths.first().and_then(|p| p.first()).map_or(0, |s| s.dim());
        let mut cols = vec!["path".to_string(), "t".to_string()];
        for i in 0..d {
            for j in i..d {
                cols.push(format!("s{}{}", i + 1, j + 1));
            }
        }
        let mut out = format!(
            "# schema_version={PATH_SCHEMA_VERSION} seed={} biased={}\n{}\n",
            self.seed,
            self.biased,
            cols.join(",")
        );
        for (id, path) in self.paths.iter().enumerate() {
            for (t, s) in self.times.iter().zip(path) {
                let v: Vec<String> = s.vech().iter().map(|x| x.to_string()).collect();
                out.push_str(&format!("{id},{t},{}\n", v.join(",")));
            }
        }
        out
    }
}

fn collect_paths(model: &AffineModel, horizon: f64, cfg: &McConfig) -> Result<PathSet, McError> {
    cfg.validate(None)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(McError::Config(format!("horizon must be positive, got {horizon}")));
    }
    let (grid, _) = time_grid(&[horizon], cfg.dt);
    let sim = Simulator::new(model, grid.clone(), cfg.scheme)?;
    let units = cfg.units();
    let pairs: Vec<Vec<(Vec<SymMat>, usize)>> = (0..units)
        .into_par_iter()
        .map(|unit| {
            let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
            signs
                .iter()
                .map(|&sign| {
                    let mut rng = unit_rng(cfg.seed, unit);
                    let mut path = Vec::new();
                    let jumps = sim.path(&mut rng, sign, &mut path);
                    (path, jumps)
                })
                .collect()
        })
        .collect();
    let (paths, jump_counts) = pairs.into_iter().flatten().unzip();
    Ok(PathSet {
        times: grid,
        paths,
        jump_counts,
        biased: sim.biased(),
        seed: cfg.seed,
    })
}

/// Wishart paths on [0, horizon] with the configured scheme.
pub fn simulate_wishart(params: &WishartParams, horizon: f64, cfg: &McConfig) -> Result<PathSet, McError> {
    collect_paths(&AffineModel::Wishart(params.clone()), horizon, cfg)
}

/// Exact jump-OU paths: Poisson jump counts, uniform jump times, Wishart jump sizes.
pub fn simulate_jump_ou(params: &JumpOuParams, horizon: f64, cfg: &McConfig) -> Result<PathSet, McError> {
    collect_paths(&AffineModel::JumpOu(params.clone()), horizon, cfg)
}

/// MC estimate of E[exp(-tr[uΣ_t])].
pub fn mc_laplace(model: &AffineModel, t: f64, u: &SymMat, cfg: &McConfig) -> Result<McEstimate, McError> {
    cfg.validate(None)?;
    let (grid, idx) = time_grid(&[t], cfg.dt);
    let sim = Simulator::new(model, grid, cfg.scheme)?;
    let j = idx[0];
    Ok(sim.estimate(cfg, 1, |p, _, out| out[0] = (-u.trace_prod(&p[j])).exp())[0])
}

/// MC estimate of E[Σ_t] as vech entries.
pub fn mc_mean_state(model: &AffineModel, t: f64, cfg: &McConfig) -> Result<Vec<McEstimate>, McError> {
    cfg.validate(None)?;
    let (grid, idx) = time_grid(&[t], cfg.dt);
    let sim = Simulator::new(model, grid, cfg.scheme)?;
    let j = idx[0];
    let d = model.dim();
    Ok(sim.estimate(cfg, d * (d + 1) / 2, |p, _, out| out.copy_from_slice(&p[j].vech())))
}

/// MC estimate of the mean number of jumps on [0, horizon].
pub fn mc_jump_count(params: &JumpOuParams, horizon: f64, cfg: &McConfig) -> Result<McEstimate, McError> {
    cfg.validate(None)?;
    let (grid, _) = time_grid(&[horizon], cfg.dt);
    let sim = Simulator::new(&AffineModel::JumpOu(params.clone()), grid, cfg.scheme)?;
    Ok(sim.estimate(cfg, 1, |_, n, out| out[0] = n as f64)[0])
}

/// D_k(t) = B(t,T_k)/B(t,T_N) = ratio_k · M^{u_k}_t / M^{u_k}_0 at a set of times.
struct Deflators {
    /// Per time: (φ_k, ψ_k) at horizon T_N - t, k = 1..=N.
    coeffs: Vec<Vec<(f64, SymMat)>>,
    /// log ratio_k - log M^{u_k}_0.
    log_scale: Vec<f64>,
}

impl Deflators {
    fn new(lm: &LiborModel, times: &[f64]) -> Result<Self, McError> {
        let sigma0 = lm.model().sigma0();
        let start = lm.coeffs_at(0.0)?;
        let log_scale = start
            .iter()
            .enumerate()
            .map(|(j, c)| lm.curve().ratio(j + 1).ln() + c.phi + c.psi.trace_prod(sigma0))
            .collect();
        let coeffs = times
            .iter()
            .map(|&t| {
                Ok(lm
                    .coeffs_at(t)?
                    .into_iter()
                    .map(|c| (c.phi, c.psi))
                    .collect())
            })
            .collect::<Result<_, McError>>()?;
        Ok(Deflators { coeffs, log_scale })
    }

    /// D_k for k = 1..=N (index k-1) at the `i`-th time.
    fn values(&self, i: usize, sigma: &SymMat, out: &mut [f64]) {
        for (k, (phi, psi)) in self.coeffs[i].iter().enumerate() {
            out[k] = (self.log_scale[k] - phi - psi.trace_prod(sigma)).exp();
        }
    }

    /// M^{u_k}_t for k = 1..=N at the `i`-th time.
    fn martingales(&self, i: usize, sigma: &SymMat, out: &mut [f64]) {
        for (k, (phi, psi)) in self.coeffs[i].iter().enumerate() {
            out[k] = (-phi - psi.trace_prod(sigma)).exp();
        }
    }
}

/// Instruments priced by simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instrument {
    Caplet(CapletSpec),
    Floorlet(CapletSpec),
    Cap { k_first: usize, k_last: usize, strike: f64 },
    Swaption(SwaptionSpec),
}

/// A linear claim (Σ_j w_j D_j(T_e))^+ observed at T_e.
struct Leg {
    time_index: usize,
    weights: Vec<(usize, f64)>,
}

fn legs_for(lm: &LiborModel, inst: &Instrument) -> Result<(Vec<f64>, Vec<Leg>), McError> {
    let dt = lm.delta_t();
    let caplet_leg = |spec: &CapletSpec, call: bool, j: usize| -> Result<Leg, McError> {
        spec.validate(lm)?;
        let kf = spec.strike_factor(dt);
        let s = if call { 1.0 } else { -1.0 };
        Ok(Leg {
            time_index: j,
            weights: vec![(spec.k, s * spec.notional), (spec.k + 1, -s * kf * spec.notional)],
        })
    };
    match inst {
        Instrument::Caplet(s) => Ok((vec![lm.maturity(s.k)], vec![caplet_leg(s, true, 0)?])),
        Instrument::Floorlet(s) => Ok((vec![lm.maturity(s.k)], vec![caplet_leg(s, false, 0)?])),
        Instrument::Cap { k_first, k_last, strike } => {
            if k_first > k_last {
                return Err(PricingError::InvalidSpec("empty cap".into()).into());
            }
            let ks: Vec<usize> = (*k_first..=*k_last).collect();
            let legs = ks
                .iter()
                .enumerate()
                .map(|(j, &k)| caplet_leg(&CapletSpec::new(k, *strike), true, j))
                .collect::<Result<_, _>>()?;
            Ok((ks.iter().map(|&k| lm.maturity(k)).collect(), legs))
        }
        Instrument::Swaption(spec) => {
            spec.validate(lm)?;
            let s = if spec.side == Side::Receiver { 1.0 } else { -1.0 };
            let mut weights: Vec<(usize, f64)> =
                spec.coupons(dt).into_iter().map(|(k, c)| (k, s * c)).collect();
            weights.push((spec.i, -s));
            Ok((vec![lm.maturity(spec.i)], vec![Leg { time_index: 0, weights }]))
        }
    }
}

/// Price by simulation under P_{T_N}: B(0,T_N) · E[Σ legs (Σ w_j D_j)^+].
pub fn mc_price(inst: &Instrument, lm: &LiborModel, cfg: &McConfig) -> Result<McEstimate, McError> {
    cfg.validate(Some(lm.delta_t()))?;
    let (obs, legs) = legs_for(lm, inst)?;
    let (grid, idx) = time_grid(&obs, cfg.dt);
    let sim = Simulator::new(lm.model(), grid, cfg.scheme)?;
    let defl = Deflators::new(lm, &obs)?;
    let n = lm.n_tenors();
    let b_n = lm.curve().terminal_bond();
    Ok(sim.estimate(cfg, 1, |p, _, out| {
        let mut d = vec![0.0; n];
        let mut total = 0.0;
        for leg in &legs {
            defl.values(leg.time_index, &p[idx[leg.time_index]], &mut d);
            let v: f64 = leg.weights.iter().map(|&(k, w)| w * d[k - 1]).sum();
            total += v.max(0.0);
        }
        out[0] = b_n * total;
    })[0])
}

/// Caplet prices for several strikes and tenors from one set of paths.
///
/// Returns estimates indexed `[tenor][strike]`.
pub fn mc_caplet_grid(
    lm: &LiborModel,
    tenors: &[usize],
    strikes: &[f64],
    cfg: &McConfig,
) -> Result<Vec<Vec<McEstimate>>, McError> {
    cfg.validate(Some(lm.delta_t()))?;
    let dt = lm.delta_t();
    let n = lm.n_tenors();
    for &k in tenors {
        for &s in strikes {
            CapletSpec::new(k, s).validate(lm)?;
        }
    }
    let obs: Vec<f64> = tenors.iter().map(|&k| lm.maturity(k)).collect();
    let (grid, idx) = time_grid(&obs, cfg.dt);
    let sim = Simulator::new(lm.model(), grid, cfg.scheme)?;
    let defl = Deflators::new(lm, &obs)?;
    let b_n = lm.curve().terminal_bond();
    let ns = strikes.len();
    let flat = sim.estimate(cfg, tenors.len() * ns, |p, _, out| {
        let mut d = vec![0.0; n];
        for (r, &k) in tenors.iter().enumerate() {
            defl.values(r, &p[idx[r]], &mut d);
            for (c, &s) in strikes.iter().enumerate() {
                out[r * ns + c] = b_n * (d[k - 1] - (1.0 + dt * s) * d[k]).max(0.0);
            }
        }
    });
    Ok(flat.chunks(ns).map(|c| c.to_vec()).collect())
}

/// MC moments E^{P_{T_k}}[CB(T_i)^q], q = 1..=max_q, via the density M^{u_k}_{T_i}/M^{u_k}_0.
pub fn mc_coupon_bond_moments(
    lm: &LiborModel,
    spec: &SwaptionSpec,
    measure: usize,
    max_q: usize,
    cfg: &McConfig,
) -> Result<Vec<McEstimate>, McError> {
    cfg.validate(Some(lm.delta_t()))?;
    spec.validate(lm)?;
    if measure < spec.i || measure > spec.m {
        return Err(PricingError::InvalidSpec(format!("measure {measure} outside {}..={}", spec.i, spec.m)).into());
    }
    let t_i = lm.maturity(spec.i);
    let (grid, idx) = time_grid(&[t_i], cfg.dt);
    let sim = Simulator::new(lm.model(), grid, cfg.scheme)?;
    let defl = Deflators::new(lm, &[t_i])?;
    let coupons = spec.coupons(lm.delta_t());
    let n = lm.n_tenors();
    let ratio_k = lm.curve().ratio(measure);
    Ok(sim.estimate(cfg, max_q, |p, _, out| {
        let mut d = vec![0.0; n];
        defl.values(0, &p[idx[0]], &mut d);
        let cb: f64 = coupons.iter().map(|&(k, c)| c * d[k - 1]).sum::<f64>() / d[spec.i - 1];
        let rn = d[measure - 1] / ratio_k;
        let mut pow = rn;
        for o in out.iter_mut() {
            pow *= cb;
            *o = pow;
        }
    }))
}

/// E[M^{u_k}_{T_j}] against M^{u_k}_0 for one (k, j).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleCheck {
    pub k: usize,
    pub j: usize,
    pub estimate: McEstimate,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub checks: Vec<MartingaleCheck>,
    /// Smallest M^{u_k}_t over all paths, grid times and k < N.
    pub min_value: f64,
}

/// Martingale and positivity checks of the family on the simulation grid.
pub fn mc_martingale(lm: &LiborModel, cfg: &McConfig) -> Result<MartingaleReport, McError> {
    cfg.validate(Some(lm.delta_t()))?;
    let n = lm.n_tenors();
    let obs: Vec<f64> = (1..=n).map(|j| lm.maturity(j)).collect();
    let (grid, idx) = time_grid(&obs, cfg.dt);
    let sim = Simulator::new(lm.model(), grid.clone(), cfg.scheme)?;
    let defl = Deflators::new(lm, &grid)?;
    let pairs: Vec<(usize, usize)> = (1..n).flat_map(|k| (1..=k).map(move |j| (k, j))).collect();
    let n_pairs = pairs.len();
    let (est, mins) = sim.estimate_with_min(cfg, n_pairs + 1, |p, _, out| {
        let mut m = vec![0.0; n];
        let mut low = f64::INFINITY;
        for (g, sigma) in p.iter().enumerate() {
            defl.martingales(g, sigma, &mut m);
            low = m[..n - 1].iter().cloned().fold(low, f64::min);
        }
        for (o, &(k, j)) in out.iter_mut().zip(&pairs) {
            defl.martingales(idx[j - 1], &p[idx[j - 1]], &mut m);
            *o = m[k - 1];
        }
        out[n_pairs] = low;
    });
    let sigma0 = lm.model().sigma0().clone();
    let mut m0 = vec![0.0; n];
    defl.martingales(0, &sigma0, &mut m0);
    let checks = pairs
        .iter()
        .zip(&est)
        .map(|(&(k, j), e)| MartingaleCheck {
            k,
            j,
            estimate: *e,
            target: m0[k - 1],
        })
        .collect();
    Ok(MartingaleReport {
        checks,
        min_value: mins[n_pairs],
    })
}

/// Euler prices at dt and dt/2, for a discretization-bias check.
pub fn mc_price_richardson(
    inst: &Instrument,
    lm: &LiborModel,
    cfg: &McConfig,
) -> Result<(McEstimate, McEstimate), McError> {
    let coarse = mc_price(inst, lm, cfg)?;
    let fine = mc_price(inst, lm, &McConfig { dt: cfg.dt / 2.0, ..*cfg })?;
    Ok((coarse, fine))
}
