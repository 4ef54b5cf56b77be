//! Associated sequences, the maximal inequality for their partial sums, and
//! limit laws of randomly indexed sums.

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::Serialize;

use crate::clt::{Conditioning, SampleBatch, StatisticKind};
use crate::enumerate::enumerate_law;
use crate::error::{argument, check_probability, Error, Result};
use crate::estimators::nu_sample;
use crate::lattice::WetRow;
use crate::parallel::try_map_indexed;
use crate::rng::{domain, StreamKey};
use crate::stats::Estimate;

/// Largest number of coordinates for the exhaustive association check.
pub const MAX_ASSOCIATION_DIM: usize = 3;
pub const DEFAULT_MA_RANGE: usize = 10;

/// A probability table on `{0,1}^k`; bit `i` of the index is coordinate `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    dim: usize,
    probs: Vec<f64>,
}

impl JointLaw {
    pub fn new(dim: usize, probs: Vec<f64>) -> Result<Self> {
        if dim == 0 || dim > MAX_ASSOCIATION_DIM {
            return Err(argument(format!("dimension must be in 1..={MAX_ASSOCIATION_DIM}, got {dim}")));
        }
        if probs.len() != 1 << dim {
            return Err(argument(format!("expected {} probabilities, got {}", 1 << dim, probs.len())));
        }
        if probs.iter().any(|&q| !(0.0..=1.0 + 1e-12).contains(&q)) {
            return Err(argument("probabilities must lie in [0, 1]"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(argument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(JointLaw { dim, probs })
    }

    /// Independent coordinates with `P(X_i = 1) = marginals[i]`.
    pub fn product(marginals: &[f64]) -> Result<Self> {
        let dim = marginals.len();
        if dim > MAX_ASSOCIATION_DIM {
            return Err(argument(format!("dimension must be in 1..={MAX_ASSOCIATION_DIM}, got {dim}")));
        }
        let probs = (0..1usize << dim)
            .map(|x| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, &q)| if x >> i & 1 == 1 { q } else { 1.0 - q })
                    .product()
            })
            .collect();
        JointLaw::new(dim, probs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(x, &q)| q * f(x)).sum()
    }
}

/// Truth tables (bit `x` is `f(x)`) of every non-decreasing Boolean function
/// on `{0,1}^dim`.
pub fn monotone_boolean_functions(dim: usize) -> Vec<u64> {
    assert!(dim <= MAX_ASSOCIATION_DIM);
    let points = 1usize << dim;
    (0..1u64 << points)
        .filter(|&f| {
            (0..points).all(|x| {
                (0..dim).all(|i| {
                    let up = x | 1 << i;
                    f >> x & 1 <= f >> up & 1
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssociationReport {
    pub min_covariance: f64,
    /// Truth tables of a minimizing pair.
    pub pair: (u64, u64),
    pub pairs_checked: usize,
}

/// Smallest `cov(f(X), g(X))` over all pairs of non-decreasing Boolean
/// functions; non-negative exactly when the law is associated.
pub fn check_association_exhaustive(law: &JointLaw) -> AssociationReport {
    let funcs = monotone_boolean_functions(law.dim);
    let eval = |f: u64, x: usize| (f >> x & 1) as f64;
    let means: Vec<f64> = funcs.iter().map(|&f| law.expect(|x| eval(f, x))).collect();
    let mut best = AssociationReport {
        min_covariance: f64::INFINITY,
        pair: (0, 0),
        pairs_checked: 0,
    };
    for (i, &f) in funcs.iter().enumerate() {
        for (j, &g) in funcs.iter().enumerate() {
            let c = law.expect(|x| eval(f, x) * eval(g, x)) - means[i] * means[j];
            best.pairs_checked += 1;
            if c < best.min_covariance {
                best.min_covariance = c;
                best.pair = (f, g);
            }
        }
    }
    best
}

/// Exact joint law of the occupation of `sites` at level `level` for the
/// process started from the origin.
pub fn occupation_law(p: f64, level: u32, sites: &[i64]) -> Result<JointLaw> {
    if sites.is_empty() || sites.len() > MAX_ASSOCIATION_DIM {
        return Err(argument(format!("need 1..={MAX_ASSOCIATION_DIM} sites")));
    }
    let origin = WetRow::from_sites(0, [0])?;
    let law = enumerate_law(&origin, p, level, |rows| {
        let last = &rows[rows.len() - 1];
        sites
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &y)| acc | usize::from(last.contains(y)) << i)
    })?;
    let mut probs = vec![0.0; 1 << sites.len()];
    for (k, q) in law {
        probs[k] = q;
    }
    JointLaw::new(sites.len(), probs)
}

/// Centered unit-variance innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Gaussian,
    Rademacher,
}

impl Driver {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Driver::Gaussian => StandardNormal.sample(rng),
            Driver::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// A stationary associated sequence `X_1, X_2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SequenceGenerator {
    Independent { driver: Driver },
    /// `X_j = sum_r w_r Z_{j - r}` with non-negative weights.
    MovingAverage { weights: Vec<f64>, driver: Driver },
    /// `X_j = 1{y_j wet} - density` along consecutive sites `y_j` of a
    /// burnt-in full-line process. Moments are supplied by the caller.
    Percolation {
        p: f64,
        level: u32,
        density: f64,
        /// Covariance at lags `0, 1, 2, ...` (in sites); zero beyond.
        autocovariances: Vec<f64>,
    },
}

impl SequenceGenerator {
    pub fn moving_average(weights: Vec<f64>, driver: Driver) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().all(|&w| w == 0.0) {
            return Err(argument("moving-average weights must be non-negative and not all zero"));
        }
        Ok(SequenceGenerator::MovingAverage { weights, driver })
    }

    /// Range-10 moving average with geometric weights `0.8^r`.
    pub fn default_moving_average(driver: Driver) -> Self {
        let weights = (0..=DEFAULT_MA_RANGE).map(|r| 0.8f64.powi(r as i32)).collect();
        SequenceGenerator::MovingAverage { weights, driver }
    }

    pub fn percolation(p: f64, level: u32, density: f64, autocovariances: Vec<f64>) -> Result<Self> {
        check_probability(p)?;
        if !level.is_multiple_of(2) {
            return Err(argument("burn-in level must be even"));
        }
        if autocovariances.is_empty() {
            return Err(argument("need at least the lag-0 covariance"));
        }
        Ok(SequenceGenerator::Percolation {
            p,
            level,
            density,
            autocovariances,
        })
    }

    /// `cov(X_j, X_{j+h})`.
    pub fn autocovariance(&self, h: usize) -> f64 {
        match self {
            SequenceGenerator::Independent { .. } => f64::from(u8::from(h == 0)),
            SequenceGenerator::MovingAverage { weights, .. } => {
                weights.iter().zip(weights.iter().skip(h)).map(|(a, b)| a * b).sum()
            }
            SequenceGenerator::Percolation { autocovariances, .. } => {
                autocovariances.get(h).copied().unwrap_or(0.0)
            }
        }
    }

    fn range(&self) -> usize {
        match self {
            SequenceGenerator::Independent { .. } => 0,
            SequenceGenerator::MovingAverage { weights, .. } => weights.len() - 1,
            SequenceGenerator::Percolation { autocovariances, .. } => autocovariances.len() - 1,
        }
    }

    /// `lim Var(S_n) / n = gamma(0) + 2 sum_h gamma(h)`.
    pub fn sigma2(&self) -> f64 {
        self.autocovariance(0) + 2.0 * (1..=self.range()).map(|h| self.autocovariance(h)).sum::<f64>()
    }

    /// `Var(S_n)` from the autocovariances.
    pub fn partial_sum_variance(&self, n: usize) -> f64 {
        let mut v = n as f64 * self.autocovariance(0);
        for h in 1..=self.range().min(n.saturating_sub(1)) {
            v += 2.0 * (n - h) as f64 * self.autocovariance(h);
        }
        v
    }

    /// `X_1..X_len` of sample path `index`.
    pub fn path(&self, len: usize, seed: u64, index: u64) -> Result<Vec<f64>> {
        let key = StreamKey::new(seed, index).child(domain::SEQUENCE);
        match self {
            SequenceGenerator::Independent { driver } => {
                let mut rng = key.rng();
                Ok((0..len).map(|_| driver.draw(&mut rng)).collect())
            }
            SequenceGenerator::MovingAverage { weights, driver } => {
                let mut rng = key.rng();
                let r = weights.len();
                let z: Vec<f64> = (0..len + r - 1).map(|_| driver.draw(&mut rng)).collect();
                // z[j + r - 1] is Z_j; the weights look backwards from it.
                Ok((0..len)
                    .map(|j| weights.iter().enumerate().map(|(k, w)| w * z[j + r - 1 - k]).sum())
                    .collect())
            }
            SequenceGenerator::Percolation { p, level, density, .. } => {
                let half_width = (len as i64 + 1) / 2 * 2;
                let sample = nu_sample(*p, *level, half_width, seed, key.raw())?;
                Ok(sample.occupation[..len]
                    .iter()
                    .map(|&b| f64::from(u8::from(b)) - density)
                    .collect())
            }
        }
    }
}

/// Fluctuation of a random index around `theta t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexNoise {
    /// Uniform on `[-1, 1]`.
    Uniform,
    /// Standard Cauchy.
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexLaw {
    /// `N_t = [theta t]`.
    Exact,
    /// `N_t = [theta t + t^exponent]`.
    Drift { exponent: f64 },
    /// `N_t = [theta t + t^exponent * zeta]`, capped at `4 theta t`.
    Jitter { exponent: f64, noise: IndexNoise },
    /// `N_t = [factor t]`, whatever `theta` is declared.
    Scaled { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomIndexSpec {
    pub theta: f64,
    pub law: IndexLaw,
}

impl RandomIndexSpec {
    pub fn new(theta: f64, law: IndexLaw) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(argument(format!("theta must be positive and finite, got {theta}")));
        }
        Ok(RandomIndexSpec { theta, law })
    }

    /// `[theta t]`, the deterministic index the random one is compared with.
    pub fn reference(&self, t: f64) -> usize {
        ((self.theta * t).floor() as usize).max(1)
    }

    pub fn sample(&self, t: f64, seed: u64, index: u64) -> usize {
        let base = self.theta * t;
        let raw = match self.law {
            IndexLaw::Exact => base,
            IndexLaw::Drift { exponent } => base + t.powf(exponent),
            IndexLaw::Jitter { exponent, noise } => {
                let mut rng = StreamKey::new(seed, index).child(domain::INDEX).rng();
                let zeta = match noise {
                    IndexNoise::Uniform => rng.random_range(-1.0..=1.0),
                    IndexNoise::Cauchy => Cauchy::new(0.0, 1.0).expect("valid scale").sample(&mut rng),
                };
                (base + t.powf(exponent) * zeta).min(4.0 * base)
            }
            IndexLaw::Scaled { factor } => factor * t,
        };
        (raw.floor().max(1.0)) as usize
    }

    /// Longest path any sample can need.
    pub fn max_index(&self, t: f64) -> usize {
        let bound = match self.law {
            IndexLaw::Exact => self.theta * t,
            IndexLaw::Drift { exponent } => self.theta * t + t.powf(exponent),
            IndexLaw::Jitter { .. } => 4.0 * self.theta * t,
            IndexLaw::Scaled { factor } => factor * t,
        };
        (bound.floor() as usize).max(1)
    }
}

fn check_t(t: f64) -> Result<usize> {
    if !(t >= 1.0 && t.is_finite()) {
        return Err(argument(format!("t must be at least 1, got {t}")));
    }
    Ok(t.floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalReport {
    pub t: f64,
    pub epsilon: f64,
    /// `m(t) = [t (1 - eps)^3] + 1`, at least 1.
    pub m: usize,
    /// Empirical `P(max_{m <= k <= [t]} |S_k - S_[t]| >= eps sqrt([t]))`.
    pub lhs: Estimate,
    /// `8 / (eps^2 [t]) * (sum_k E X_k^2 + 2 sum_k cov(X_k, S_{k-1}))`, `k = m..=[t]`.
    pub rhs: f64,
}

impl MaximalReport {
    /// `lhs <= rhs + k * se`.
    pub fn holds(&self, k: f64) -> bool {
        self.lhs.value <= self.rhs + k * self.lhs.se
    }
}

/// The bound of the maximal inequality from the generator's moments.
pub fn maximal_bound(generator: &SequenceGenerator, t: f64, epsilon: f64) -> Result<(usize, f64)> {
    if !(epsilon > 0.0) {
        return Err(argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let tf = check_t(t)?;
    let m = (((t * (1.0 - epsilon).powi(3)).floor() + 1.0).max(1.0)) as usize;
    if m > tf {
        return Err(argument(format!("m(t) = {m} exceeds [t] = {tf}")));
    }
    let var0 = generator.autocovariance(0);
    let mut moments = 0.0;
    for k in m..=tf {
        // cov(X_k, S_{k-1}) = sum over the k - 1 predecessors.
        let past: f64 = (1..=generator.range().min(k - 1)).map(|h| generator.autocovariance(h)).sum();
        moments += var0 + 2.0 * past;
    }
    Ok((m, 8.0 / (epsilon * epsilon * tf as f64) * moments))
}

pub fn maximal_inequality_check(
    generator: &SequenceGenerator,
    t: f64,
    epsilon: f64,
    paths: u64,
    seed: u64,
    workers: usize,
) -> Result<MaximalReport> {
    let (m, rhs) = maximal_bound(generator, t, epsilon)?;
    let tf = t.floor() as usize;
    let threshold = epsilon * (tf as f64).sqrt();
    let hits = try_map_indexed(0..paths, workers, |i| {
        let x = generator.path(tf, seed, i)?;
        let mut s = 0.0;
        let mut partial = Vec::with_capacity(tf - m + 1);
        for (k, v) in x.iter().enumerate() {
            s += v;
            if k + 1 >= m {
                partial.push(s);
            }
        }
        Ok(partial.iter().any(|sk| (sk - s).abs() >= threshold))
    })?;
    let count = hits.iter().filter(|&&h| h).count() as u64;
    Ok(MaximalReport {
        t,
        epsilon,
        m,
        lhs: Estimate::proportion(count, paths),
        rhs,
    })
}

/// Per-path `(N_t, S_{N_t}, S_{[theta t]})`.
fn indexed_sums(
    generator: &SequenceGenerator,
    index: &RandomIndexSpec,
    t: f64,
    paths: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<(usize, f64, f64)>> {
    check_t(t)?;
    let reference = index.reference(t);
    try_map_indexed(0..paths, workers, |i| {
        let n = index.sample(t, seed, i);
        let x = generator.path(n.max(reference), seed, i)?;
        let sum = |k: usize| x[..k].iter().sum::<f64>();
        Ok((n, sum(n), sum(reference)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnscombeReport {
    pub t: f64,
    /// `(eps, P(|S_{N_t} - S_[theta t]| >= eps sqrt([theta t])))`.
    pub exceedance: Vec<(f64, Estimate)>,
}

pub fn anscombe_check(
    generator: &SequenceGenerator,
    index: &RandomIndexSpec,
    t: f64,
    epsilons: &[f64],
    paths: u64,
    seed: u64,
    workers: usize,
) -> Result<AnscombeReport> {
    if paths == 0 {
        return Err(argument("need at least one path"));
    }
    let sums = indexed_sums(generator, index, t, paths, seed, workers)?;
    let scale = (index.reference(t) as f64).sqrt();
    let exceedance = epsilons
        .iter()
        .map(|&eps| {
            let k = sums.iter().filter(|(_, a, b)| (a - b).abs() >= eps * scale).count() as u64;
            (eps, Estimate::proportion(k, paths))
        })
        .collect();
    Ok(AnscombeReport { t, exceedance })
}

/// `S_{N_t} / sqrt(N_t)` and `S_{N_t} / sqrt(theta t)` over independent paths.
pub fn random_index_clt(
    generator: &SequenceGenerator,
    index: &RandomIndexSpec,
    t: f64,
    paths: u64,
    seed: u64,
    workers: usize,
) -> Result<(SampleBatch, SampleBatch)> {
    let s2 = generator.sigma2();
    if !(s2 > 0.0) {
        return Err(argument(format!("the limit variance must be positive, got {s2}")));
    }
    let sums = indexed_sums(generator, index, t, paths, seed, workers)?;
    let theta_t = index.theta * t;
    let batch = |kind, values| SampleBatch {
        kind,
        level: t as u64,
        conditioning: Conditioning::Unconditioned,
        values,
        excluded: 0,
    };
    Ok((
        batch(
            StatisticKind::RandomIndexSelf,
            sums.iter().map(|(n, s, _)| s / (*n as f64).sqrt()).collect(),
        ),
        batch(
            StatisticKind::RandomIndexDeterministic,
            sums.iter().map(|(_, s, _)| s / theta_t.sqrt()).collect(),
        ),
    ))
}

/// `S_[t] / sqrt([t])` over independent paths.
pub fn fixed_index_sums(generator: &SequenceGenerator, t: f64, paths: u64, seed: u64, workers: usize) -> Result<Vec<f64>> {
    let tf = check_t(t)?;
    try_map_indexed(0..paths, workers, |i| {
        Ok(generator.path(tf, seed, i)?.iter().sum::<f64>() / (tf as f64).sqrt())
    })
}

/// Sample covariance of every pair of coordinates across paths, with the
/// standard error of the mean cross-product.
pub fn pairwise_covariances(paths: &[Vec<f64>]) -> Result<Vec<(usize, usize, Estimate)>> {
    let m = paths.len();
    if m < 2 {
        return Err(Error::InsufficientData("need at least two paths".into()));
    }
    let len = paths[0].len();
    if paths.iter().any(|p| p.len() != len) {
        return Err(argument("paths have different lengths"));
    }
    let means: Vec<f64> = (0..len).map(|j| paths.iter().map(|p| p[j]).sum::<f64>() / m as f64).collect();
    let mut out = Vec::new();
    for a in 0..len {
        for b in a + 1..len {
            let prods: Vec<f64> = paths.iter().map(|p| (p[a] - means[a]) * (p[b] - means[b])).collect();
            let e = Estimate::mean_of(&prods)?;
            out.push((a, b, Estimate::new(e.value * m as f64 / (m - 1) as f64, e.se)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedekind_counts() {
        assert_eq!(monotone_boolean_functions(1).len(), 3);
        assert_eq!(monotone_boolean_functions(2).len(), 6);
        assert_eq!(monotone_boolean_functions(3).len(), 20);
    }

    #[test]
    fn law_validation() {
        assert!(JointLaw::new(1, vec![0.5, 0.4]).is_err());
        assert!(JointLaw::new(2, vec![0.5, 0.5]).is_err());
        assert!(JointLaw::new(4, vec![1.0 / 16.0; 16]).is_err());
        assert!(JointLaw::new(1, vec![1.2, -0.2]).is_err());
        assert!(JointLaw::product(&[0.3, 0.6]).is_ok());
    }

    #[test]
    fn independent_law_is_associated() {
        let law = JointLaw::product(&[0.5, 0.5, 0.5]).unwrap();
        let r = check_association_exhaustive(&law);
        assert!(r.min_covariance >= -1e-15);
        assert_eq!(r.pairs_checked, 400);
    }

    #[test]
    fn anticorrelated_pair() {
        // (X, 1 - X): only 01 and 10 have mass.
        let law = JointLaw::new(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap();
        let r = check_association_exhaustive(&law);
        assert!((r.min_covariance + 0.25).abs() < 1e-15);
    }

    #[test]
    fn moving_average_moments() {
        let g = SequenceGenerator::moving_average(vec![1.0, 2.0], Driver::Gaussian).unwrap();
        assert_eq!(g.autocovariance(0), 5.0);
        assert_eq!(g.autocovariance(1), 2.0);
        assert_eq!(g.autocovariance(2), 0.0);
        assert_eq!(g.sigma2(), 9.0);
        assert_eq!(g.partial_sum_variance(3), 3.0 * 5.0 + 2.0 * 2.0 * 2.0);
        assert!(SequenceGenerator::moving_average(vec![1.0, -0.5], Driver::Gaussian).is_err());
        assert!(SequenceGenerator::moving_average(vec![], Driver::Gaussian).is_err());
    }

    #[test]
    fn moving_average_path_matches_definition() {
        let g = SequenceGenerator::moving_average(vec![1.0, 10.0], Driver::Rademacher).unwrap();
        let x = g.path(50, 3, 1).unwrap();
        assert_eq!(x.len(), 50);
        // Each value is +-1 +- 10.
        assert!(x.iter().all(|v| [11.0, 9.0, -9.0, -11.0].contains(v)));
        assert_eq!(x, g.path(50, 3, 1).unwrap());
        assert_ne!(x, g.path(50, 3, 2).unwrap());
    }

    #[test]
    fn exact_index_gives_zero_difference() {
        let g = SequenceGenerator::Independent { driver: Driver::Gaussian };
        let idx = RandomIndexSpec::new(1.0, IndexLaw::Exact).unwrap();
        let r = anscombe_check(&g, &idx, 500.0, &[0.01, 0.1], 50, 0, 1).unwrap();
        assert!(r.exceedance.iter().all(|(_, e)| e.value == 0.0));
    }

    #[test]
    fn index_samples() {
        let drift = RandomIndexSpec::new(1.0, IndexLaw::Drift { exponent: 0.5 }).unwrap();
        assert_eq!(drift.sample(100.0, 0, 0), 110);
        let scaled = RandomIndexSpec::new(1.0, IndexLaw::Scaled { factor: 2.0 }).unwrap();
        assert_eq!(scaled.sample(100.5, 0, 0), 201);
        assert_eq!(scaled.reference(100.5), 100);
        let jitter = RandomIndexSpec::new(
            2.0,
            IndexLaw::Jitter {
                exponent: 0.75,
                noise: IndexNoise::Cauchy,
            },
        )
        .unwrap();
        for i in 0..200 {
            let n = jitter.sample(1000.0, 5, i);
            assert!((1..=8000).contains(&n));
        }
        assert!(RandomIndexSpec::new(0.0, IndexLaw::Exact).is_err());
    }

    #[test]
    fn maximal_bound_inputs() {
        let g = SequenceGenerator::Independent { driver: Driver::Rademacher };
        assert!(maximal_bound(&g, 100.0, 0.0).is_err());
        assert!(maximal_bound(&g, 100.0, -1.0).is_err());
        // eps = 1 gives m = 1 and a bound of 8 / eps^2 for unit variance.
        let (m, rhs) = maximal_bound(&g, 100.0, 1.0).unwrap();
        assert_eq!(m, 1);
        assert!((rhs - 8.0).abs() < 1e-12);
        // [1000 * 0.125] + 1 = 126.
        let (m, rhs) = maximal_bound(&g, 1000.0, 0.5).unwrap();
        assert_eq!(m, 126);
        assert!((rhs - 8.0 / 0.25 / 1000.0 * 875.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fixed_index_is_standard_normal() {
        let g = SequenceGenerator::Independent { driver: Driver::Gaussian };
        let idx = RandomIndexSpec::new(1.0, IndexLaw::Exact).unwrap();
        let (a, b) = random_index_clt(&g, &idx, 64.0, 2000, 1, 1).unwrap();
        assert_eq!(a.values, b.values);
        let d = crate::stats::ks_normal(&a.values, 0.0, 1.0).unwrap();
        assert!(d < 0.04, "{d}");
    }

    #[test]
    fn degenerate_limit_rejected() {
        let g = SequenceGenerator::percolation(0.8, 200, 0.9, vec![0.0]).unwrap();
        let idx = RandomIndexSpec::new(1.0, IndexLaw::Exact).unwrap();
        assert!(random_index_clt(&g, &idx, 10.0, 10, 0, 1).is_err());
    }

    #[test]
    fn occupation_law_one_level() {
        let p = 0.6;
        let law = occupation_law(p, 1, &[-1, 1]).unwrap();
        let q = |x: usize| law.probs[x];
        assert!((q(0b11) - p * p).abs() < 1e-15);
        assert!((q(0b01) - p * (1.0 - p)).abs() < 1e-15);
        assert!((q(0b00) - (1.0 - p) * (1.0 - p)).abs() < 1e-15);
        assert!(check_association_exhaustive(&law).min_covariance >= -1e-15);
    }
}
