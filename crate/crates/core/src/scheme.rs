//! Learning-rate and dampening-factor sequences.
//!
//! Steps are indexed `n = 0, 1, 2, ...`. Families written as `1/k` are
//! evaluated at `k = n + 1`, so step 0 corresponds to the conventional
//! first index `k = 1`. Every emitted value lies in `[0, 1)`; values that
//! would reach `1` are represented by [`ALMOST_ONE`].

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// `1 - 2^-52`, the stand-in for a parameter value of one.
pub const ALMOST_ONE: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Error, PartialEq)]
pub enum SchemeError {
    #[error("constant {0} is outside [0, 1)")]
    ConstantOutOfRange(f64),
    #[error("exponent {0} must be positive and finite")]
    BadExponent(f64),
    #[error("error bound {value} at index {index} is negative or NaN")]
    NegativeErrorBound { index: usize, value: f64 },
    #[error("cannot parse scheme `{0}`")]
    Parse(String),
    #[error("vector scheme has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("index set at step {step} names component {component} of a {dim}-dimensional scheme")]
    IndexOutOfRange {
        step: usize,
        component: usize,
        dim: usize,
    },
}

#[inline]
fn cap(v: f64) -> f64 {
    v.clamp(0.0, ALMOST_ONE)
}

/// One-based index `k = n + 1` as a float.
#[inline]
fn k_of(n: usize) -> f64 {
    (n as f64) + 1.0
}

/// Deterministic uniform draw keyed by `(seed, stream)`.
pub(crate) fn keyed_uniform(seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random::<f64>()
}

pub(crate) fn keyed_index(seed: u64, stream: u64, bound: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.random_range(0..bound)
}

/// A single parameter sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `1 - 1/k`
    OneMinusInv,
    /// `1/k`
    Harmonic,
    /// `c` with `c` in `[0, 1)`
    Constant(f64),
    /// `1/k^e`
    InvPow(f64),
    /// Independent `U[0,1)` draws, reproducible from `(seed, n)`.
    Uniform {
        seed: u64,
    },
    Zero,
}

impl Family {
    pub fn constant(c: f64) -> Result<Self, SchemeError> {
        if (0.0..1.0).contains(&c) {
            Ok(Family::Constant(c))
        } else {
            Err(SchemeError::ConstantOutOfRange(c))
        }
    }

    pub fn inv_pow(e: f64) -> Result<Self, SchemeError> {
        if e > 0.0 && e.is_finite() {
            Ok(Family::InvPow(e))
        } else {
            Err(SchemeError::BadExponent(e))
        }
    }

    pub fn eval(&self, n: usize) -> f64 {
        match *self {
            Family::OneMinusInv => cap(1.0 - 1.0 / k_of(n)),
            Family::Harmonic => cap(1.0 / k_of(n)),
            Family::Constant(c) => c,
            Family::InvPow(e) => cap(k_of(n).powf(-e)),
            Family::Uniform { seed } => keyed_uniform(seed, n as u64),
            Family::Zero => 0.0,
        }
    }

    /// Declared polynomial decay order: the value behaves like `k^-order`.
    /// `None` when no such order is declared (random or zero families).
    fn decay_order(&self) -> Option<f64> {
        match *self {
            Family::OneMinusInv => Some(0.0),
            Family::Harmonic => Some(1.0),
            Family::Constant(c) if c > 0.0 => Some(0.0),
            Family::InvPow(e) => Some(e),
            _ => None,
        }
    }

    fn is_identically_zero(&self) -> bool {
        matches!(self, Family::Zero) || matches!(self, Family::Constant(c) if *c == 0.0)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::OneMinusInv => write!(f, "one-minus-inv"),
            Family::Harmonic => write!(f, "harmonic"),
            Family::Constant(c) => write!(f, "const:{c}"),
            Family::InvPow(e) => write!(f, "inv-pow:{e}"),
            Family::Uniform { seed } => write!(f, "uniform:{seed}"),
            Family::Zero => write!(f, "zero"),
        }
    }
}

/// Analytic properties of a scheme, declared from the family definitions
/// and never inferred from a finite prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnalyticFlags {
    pub beta_to_zero: bool,
    pub beta_sum_diverges: bool,
    /// `beta_to_zero && beta_sum_diverges && beta/alpha -> 0`.
    pub progressing: bool,
}

/// Error envelope accessor used by [`Scheme::synthesize`].
pub type ErrorBound = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

/// Scheme built level by level from an error envelope so that
/// `sum alpha = inf`, `sum alpha*eps < inf`, `beta/alpha -> 0` and
/// `sum beta = inf`.
///
/// Level `k` collects the indices whose running envelope lies in
/// `(2^-(k+1), 2^-k]`; the first `ceil(2^(k/2))` indices of a level get
/// `alpha = 1/2`, the rest `0`. A zero envelope is an unbounded level in
/// which every index gets `1/2`. `beta_n = alpha_n / ln(2 + m_n)` where
/// `m_n` counts earlier indices with positive `alpha`.
pub struct Synthesized {
    eps: ErrorBound,
    cache: Mutex<SynthCache>,
}

#[derive(Default)]
struct SynthCache {
    params: Vec<(f64, f64)>,
    levels: Vec<Option<i32>>,
    envelope: f64,
    level: Option<Option<i32>>,
    in_level: u64,
    positive: u64,
}

/// Level of a positive finite envelope value: `v` in `(2^-(k+1), 2^-k]`.
/// Computed from the float's bits so powers of two land exactly.
pub fn envelope_level(v: f64) -> i32 {
    debug_assert!(v > 0.0 && v.is_finite());
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        // subnormal: v = mantissa * 2^-1074
        let top = 63 - mantissa.leading_zeros() as i32; // highest set bit
        let p = top - 1074;
        return if mantissa.is_power_of_two() {
            -p
        } else {
            -p - 1
        };
    }
    let p = exp - 1023;
    if mantissa == 0 {
        -p
    } else {
        -p - 1
    }
}

/// Quota of positive-`alpha` indices granted to level `k`.
pub fn level_quota(level: i32) -> u64 {
    if level <= 0 {
        1
    } else {
        2f64.powf(level as f64 / 2.0).ceil() as u64
    }
}

impl Synthesized {
    fn extend_to(&self, n: usize) -> Result<(f64, f64), SchemeError> {
        let mut c = self.cache.lock().expect("synthesis cache poisoned");
        if c.params.is_empty() && c.level.is_none() {
            c.envelope = f64::INFINITY;
        }
        while c.params.len() <= n {
            let idx = c.params.len();
            let e = (self.eps)(idx);
            if e.is_nan() || e < 0.0 {
                return Err(SchemeError::NegativeErrorBound {
                    index: idx,
                    value: e,
                });
            }
            c.envelope = c.envelope.min(e);
            let level = if c.envelope == 0.0 {
                None
            } else {
                Some(envelope_level(c.envelope))
            };
            if c.level != Some(level) {
                c.level = Some(level);
                c.in_level = 0;
            }
            let alpha = match level {
                None => 0.5,
                Some(k) if c.in_level < level_quota(k) => 0.5,
                Some(_) => 0.0,
            };
            c.in_level += 1;
            let beta = if alpha > 0.0 {
                alpha / (2.0 + c.positive as f64).ln()
            } else {
                0.0
            };
            if alpha > 0.0 {
                c.positive += 1;
            }
            c.params.push((alpha, beta));
            c.levels.push(level);
        }
        Ok(c.params[n])
    }

    /// Level of every index up to `n` (`None` for the zero-envelope level).
    pub fn levels_up_to(&self, n: usize) -> Result<Vec<Option<i32>>, SchemeError> {
        self.extend_to(n)?;
        let c = self.cache.lock().expect("synthesis cache poisoned");
        Ok(c.levels[..=n].to_vec())
    }
}

impl fmt::Debug for Synthesized {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Synthesized").finish_non_exhaustive()
    }
}

/// A Mann scheme: the pair `((alpha_n), (beta_n))`.
#[derive(Clone, Debug)]
pub enum Scheme {
    Paired { alpha: Family, beta: Family },
    Synthesized(Arc<Synthesized>),
}

impl Scheme {
    pub fn new(alpha: Family, beta: Family) -> Self {
        Scheme::Paired { alpha, beta }
    }

    pub fn zero() -> Self {
        Scheme::new(Family::Zero, Family::Zero)
    }

    /// The six standard schemes `S1`..`S6`, `index` in `1..=6`; all use
    /// `beta = 1/k`.
    pub fn standard(index: usize, uniform_seed: u64) -> Option<Self> {
        let alpha = match index {
            1 => Family::OneMinusInv,
            2 => Family::Constant(0.5),
            3 => Family::Constant(0.01),
            4 => Family::InvPow(0.5),
            5 => Family::InvPow(0.01),
            6 => Family::Uniform { seed: uniform_seed },
            _ => return None,
        };
        Some(Scheme::new(alpha, Family::Harmonic))
    }

    /// Builds a scheme adapted to the error envelope `eps`; see
    /// [`Synthesized`]. Negative bounds surface on evaluation, and the
    /// first `probe` indices are checked eagerly.
    pub fn synthesize(eps: ErrorBound, probe: usize) -> Result<Self, SchemeError> {
        for i in 0..probe {
            let e = eps(i);
            if e.is_nan() || e < 0.0 {
                return Err(SchemeError::NegativeErrorBound { index: i, value: e });
            }
        }
        Ok(Scheme::Synthesized(Arc::new(Synthesized {
            eps,
            cache: Mutex::new(SynthCache::default()),
        })))
    }

    /// `(alpha_n, beta_n)`.
    ///
    /// # Panics
    /// For a synthesized scheme whose envelope turns negative at some index
    /// up to `n`; use [`Scheme::try_eval`] to handle that case.
    pub fn eval(&self, n: usize) -> (f64, f64) {
        self.try_eval(n).expect("invalid error envelope")
    }

    pub fn try_eval(&self, n: usize) -> Result<(f64, f64), SchemeError> {
        match self {
            Scheme::Paired { alpha, beta } => Ok((alpha.eval(n), beta.eval(n))),
            Scheme::Synthesized(s) => s.extend_to(n),
        }
    }

    pub fn flags(&self) -> AnalyticFlags {
        match self {
            Scheme::Synthesized(_) => AnalyticFlags {
                beta_to_zero: true,
                beta_sum_diverges: true,
                progressing: true,
            },
            Scheme::Paired { alpha, beta } => {
                let beta_to_zero = match *beta {
                    Family::Harmonic | Family::InvPow(_) | Family::Zero => true,
                    Family::Constant(c) => c == 0.0,
                    Family::OneMinusInv | Family::Uniform { .. } => false,
                };
                let beta_sum_diverges = match *beta {
                    Family::InvPow(e) => e <= 1.0,
                    Family::Constant(c) => c > 0.0,
                    Family::Zero => false,
                    Family::Harmonic | Family::OneMinusInv | Family::Uniform { .. } => true,
                };
                // 0/0 = 0, so an identically zero beta is always ahead of alpha.
                let ratio_to_zero = beta.is_identically_zero()
                    || match (alpha.decay_order(), beta.decay_order()) {
                        (Some(a), Some(b)) => b > a,
                        _ => false,
                    };
                AnalyticFlags {
                    beta_to_zero,
                    beta_sum_diverges,
                    progressing: beta_to_zero && beta_sum_diverges && ratio_to_zero,
                }
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Paired { alpha, beta } => write!(f, "alpha={alpha},beta={beta}"),
            Scheme::Synthesized(_) => write!(f, "alpha=synth,beta=synth"),
        }
    }
}

fn parse_family(s: &str) -> Result<Option<Family>, SchemeError> {
    let err = || SchemeError::Parse(s.to_string());
    let (name, param) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    let num = |p: Option<&str>| -> Result<f64, SchemeError> {
        p.ok_or_else(err)?.parse::<f64>().map_err(|_| err())
    };
    Ok(Some(match name {
        "one-minus-inv" if param.is_none() => Family::OneMinusInv,
        "harmonic" if param.is_none() => Family::Harmonic,
        "zero" if param.is_none() => Family::Zero,
        "const" => Family::constant(num(param)?)?,
        "inv-pow" => Family::inv_pow(num(param)?)?,
        "uniform" => Family::Uniform {
            seed: param.ok_or_else(err)?.parse().map_err(|_| err())?,
        },
        "synth" => return Ok(None),
        _ => return Err(err()),
    }))
}

/// Parses `alpha=<family>[:<param>],beta=<family>[:<param>]`, or the
/// shorthands `S1`..`S6` (uniform seed 0).
///
/// `synth` must appear on both sides. Bare `synth` synthesizes against a
/// zero error envelope; `synth:<p>` against `(n+1)^-p`.
impl FromStr for Scheme {
    type Err = SchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(i) = s.strip_prefix('S').or_else(|| s.strip_prefix('s')) {
            if let Ok(i) = i.parse::<usize>() {
                return Scheme::standard(i, 0).ok_or_else(|| SchemeError::Parse(s.to_string()));
            }
        }
        let err = || SchemeError::Parse(s.to_string());
        let (a, b) = s.split_once(',').ok_or_else(err)?;
        let a = a.trim().strip_prefix("alpha=").ok_or_else(err)?;
        let b = b.trim().strip_prefix("beta=").ok_or_else(err)?;
        match (parse_family(a)?, parse_family(b)?) {
            (Some(alpha), Some(beta)) => Ok(Scheme::new(alpha, beta)),
            (None, None) => {
                if a != b {
                    return Err(err());
                }
                let eps: ErrorBound = match a.split_once(':') {
                    None => Arc::new(|_| 0.0),
                    Some((_, p)) => {
                        let p: f64 = p.parse().map_err(|_| err())?;
                        if !(p > 0.0) {
                            return Err(SchemeError::BadExponent(p));
                        }
                        Arc::new(move |n| k_of(n).powf(-p))
                    }
                };
                Scheme::synthesize(eps, 0)
            }
            _ => Err(err()),
        }
    }
}

/// Finite-horizon view of the progressing condition.
#[derive(Clone, Debug)]
pub struct ProgressReport {
    /// `beta_n / alpha_n` with `0/0 = 0` and `x/0 = inf`.
    pub ratios: Vec<f64>,
    pub last_decile_max_ratio: f64,
    pub beta_sum: f64,
    pub declared: AnalyticFlags,
}

pub fn ratio(beta: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        if beta == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        beta / alpha
    }
}

pub fn progressing_diagnostic(scheme: &Scheme, horizon: usize) -> ProgressReport {
    let horizon = horizon.max(1);
    let mut ratios = Vec::with_capacity(horizon);
    let mut beta_sum = 0.0;
    for n in 0..horizon {
        let (a, b) = scheme.eval(n);
        ratios.push(ratio(b, a));
        beta_sum += b;
    }
    let start = horizon - horizon.div_ceil(10);
    let last_decile_max_ratio = ratios[start..].iter().cloned().fold(0.0, f64::max);
    ProgressReport {
        ratios,
        last_decile_max_ratio,
        beta_sum,
        declared: scheme.flags(),
    }
}

/// Index-set sources for chaotic iteration.
#[derive(Clone, Debug)]
pub enum IndexSets {
    /// Every component at every step.
    Full { dim: usize },
    /// Cycles through the listed sets.
    Cyclic(Vec<Vec<usize>>),
    /// The listed sets, then the empty set forever.
    Explicit(Vec<Vec<usize>>),
    /// One component per step, uniform over `0..dim`, reproducible from
    /// `(seed, n)`.
    RandomSingleton { dim: usize, seed: u64 },
}

impl IndexSets {
    /// Round-robin singleton sweep `{0}, {1}, ..., {dim-1}, {0}, ...`.
    pub fn round_robin(dim: usize) -> Self {
        IndexSets::Cyclic((0..dim).map(|i| vec![i]).collect())
    }

    /// Sorted, deduplicated active set at step `n`.
    pub fn at(&self, n: usize) -> Vec<usize> {
        let mut set = match self {
            IndexSets::Full { dim } => return (0..*dim).collect(),
            IndexSets::Cyclic(sets) if sets.is_empty() => Vec::new(),
            IndexSets::Cyclic(sets) => sets[n % sets.len()].clone(),
            IndexSets::Explicit(sets) => sets.get(n).cloned().unwrap_or_default(),
            IndexSets::RandomSingleton { dim, seed } => {
                return vec![keyed_index(*seed, n as u64, *dim)];
            }
        };
        set.sort_unstable();
        set.dedup();
        set
    }
}

pub type ParamFn = Arc<dyn Fn(usize) -> (Vec<f64>, Vec<f64>) + Send + Sync>;

/// Parameters for one step of a generalized scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct StepParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Components updated this step; `None` means all of them.
    pub active: Option<Vec<usize>>,
}

impl StepParams {
    pub fn alpha_min(&self) -> f64 {
        self.alpha.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    pub fn beta_min(&self) -> f64 {
        self.beta.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// A generalized (per-component) scheme.
#[derive(Clone)]
pub enum VectorScheme {
    /// The same scalar scheme in every component.
    Replicated {
        base: Scheme,
        dim: usize,
    },
    PerComponent(Vec<Scheme>),
    /// Arbitrary per-step vectors; values are clamped into `[0, 1)`.
    Custom {
        dim: usize,
        params: ParamFn,
    },
    Chaotic(ChaoticScheme),
}

impl fmt::Debug for VectorScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorScheme::Replicated { base, dim } => write!(f, "Replicated({base}, {dim})"),
            VectorScheme::PerComponent(s) => write!(f, "PerComponent({} schemes)", s.len()),
            VectorScheme::Custom { dim, .. } => write!(f, "Custom({dim})"),
            VectorScheme::Chaotic(c) => write!(f, "Chaotic({:?})", c.index_sets),
        }
    }
}

impl VectorScheme {
    pub fn replicated(base: Scheme, dim: usize) -> Self {
        VectorScheme::Replicated { base, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            VectorScheme::Replicated { dim, .. } | VectorScheme::Custom { dim, .. } => *dim,
            VectorScheme::PerComponent(s) => s.len(),
            VectorScheme::Chaotic(c) => c.inner.dim(),
        }
    }

    /// Parameters at step `n`.
    ///
    /// Stateless variants are pure in `n`. A chaotic derivation advances
    /// its per-component counters and expects steps in order; asking for an
    /// earlier step replays it from step 0, so results stay a function of
    /// `n` alone.
    pub fn eval(&mut self, n: usize) -> Result<StepParams, SchemeError> {
        match self {
            VectorScheme::Chaotic(c) => c.eval(n),
            other => {
                let (alpha, beta) = other.component_values(n, None);
                Ok(StepParams {
                    alpha,
                    beta,
                    active: None,
                })
            }
        }
    }

    /// Full parameter vectors of a stateless variant at step `n`.
    fn component_values(&self, n: usize, only: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        match self {
            VectorScheme::Replicated { base, dim } => {
                let (a, b) = base.eval(n);
                (vec![a; *dim], vec![b; *dim])
            }
            VectorScheme::PerComponent(schemes) => match only {
                Some(j) => {
                    let mut a = vec![0.0; schemes.len()];
                    let mut b = vec![0.0; schemes.len()];
                    (a[j], b[j]) = schemes[j].eval(n);
                    (a, b)
                }
                None => schemes.iter().map(|s| s.eval(n)).unzip(),
            },
            VectorScheme::Custom { params, .. } => {
                let (a, b) = params(n);
                (
                    a.into_iter().map(cap).collect(),
                    b.into_iter().map(cap).collect(),
                )
            }
            VectorScheme::Chaotic(_) => unreachable!("chaotic schemes do not nest"),
        }
    }

    /// Derives a chaotic scheme: components outside the step's index set get
    /// `alpha = beta = 0`. With `local_counters`, an active component `j`
    /// takes the inner scheme's values at the number of earlier updates of
    /// `j`; otherwise at the global step.
    pub fn chaotic(inner: VectorScheme, index_sets: IndexSets, local_counters: bool) -> Self {
        let dim = inner.dim();
        let inner = match inner {
            VectorScheme::Chaotic(c) => *c.inner,
            other => other,
        };
        VectorScheme::Chaotic(ChaoticScheme {
            inner: Box::new(inner),
            index_sets,
            local_counters,
            counters: vec![0; dim],
            cursor: 0,
        })
    }
}

/// Chaotic derivation of a vector scheme; see [`VectorScheme::chaotic`].
#[derive(Clone, Debug)]
pub struct ChaoticScheme {
    inner: Box<VectorScheme>,
    index_sets: IndexSets,
    local_counters: bool,
    counters: Vec<usize>,
    cursor: usize,
}

impl ChaoticScheme {
    /// Number of updates each component has received so far.
    pub fn counters(&self) -> &[usize] {
        &self.counters
    }

    pub fn index_sets(&self) -> &IndexSets {
        &self.index_sets
    }

    fn eval(&mut self, n: usize) -> Result<StepParams, SchemeError> {
        if n < self.cursor {
            self.counters.iter_mut().for_each(|c| *c = 0);
            self.cursor = 0;
        }
        while self.cursor < n {
            self.advance()?;
        }
        self.advance()
    }

    fn advance(&mut self) -> Result<StepParams, SchemeError> {
        let n = self.cursor;
        let dim = self.counters.len();
        let active = self.index_sets.at(n);
        let mut alpha = vec![0.0; dim];
        let mut beta = vec![0.0; dim];
        if let Some(&bad) = active.iter().find(|&&j| j >= dim) {
            return Err(SchemeError::IndexOutOfRange {
                step: n,
                component: bad,
                dim,
            });
        }
        if !self.local_counters && !active.is_empty() {
            let single = if active.len() == 1 {
                Some(active[0])
            } else {
                None
            };
            let (a, b) = self.inner.component_values(n, single);
            for &j in &active {
                alpha[j] = a[j];
                beta[j] = b[j];
            }
        } else {
            for &j in &active {
                let (a, b) = self.inner.component_values(self.counters[j], Some(j));
                alpha[j] = a[j];
                beta[j] = b[j];
            }
        }
        for &j in &active {
            self.counters[j] += 1;
        }
        self.cursor += 1;
        Ok(StepParams {
            alpha,
            beta,
            active: Some(active),
        })
    }
}

/// Fair-sweep structure of a generalized scheme over a finite horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    /// `m_0 = 0, m_1, ...`: start of each interval, followed by the end of
    /// the last complete one.
    pub boundaries: Vec<usize>,
    /// `l_k(i)`, the last step in interval `k` with `alpha(i) > 0`.
    pub last_update: Vec<Vec<Option<usize>>>,
    /// Partial sums of `min_i beta_{l_k(i)}(i)` over complete intervals.
    pub min_beta_partial_sums: Vec<f64>,
    /// Whether each interval saw every component updated.
    pub complete: Vec<bool>,
}

pub fn sweep_analysis(
    scheme: &mut VectorScheme,
    horizon: usize,
) -> Result<SweepReport, SchemeError> {
    let dim = scheme.dim();
    let mut report = SweepReport {
        boundaries: vec![0],
        last_update: Vec::new(),
        min_beta_partial_sums: Vec::new(),
        complete: Vec::new(),
    };
    let mut last: Vec<Option<(usize, f64)>> = vec![None; dim];
    let mut sum = 0.0;
    let mut open = false;
    for n in 0..horizon {
        let p = scheme.eval(n)?;
        open = true;
        for i in 0..dim {
            if p.alpha[i] > 0.0 {
                last[i] = Some((n, p.beta[i]));
            }
        }
        if last.iter().all(Option::is_some) {
            let min_beta = last
                .iter()
                .map(|l| l.expect("checked").1)
                .fold(f64::INFINITY, f64::min);
            sum += min_beta;
            report.min_beta_partial_sums.push(sum);
            report
                .last_update
                .push(last.iter().map(|l| l.map(|(s, _)| s)).collect());
            report.complete.push(true);
            report.boundaries.push(n + 1);
            last.iter_mut().for_each(|l| *l = None);
            open = false;
        }
    }
    if open {
        report
            .last_update
            .push(last.iter().map(|l| l.map(|(s, _)| s)).collect());
        report.complete.push(false);
    }
    Ok(report)
}
