//! Dampened Mann iteration and its chaotic variants.
//!
//! One step computes, per updated component `i`,
//!
//! ```text
//! x'(i) = (1 - beta(i)) * (x(i) + alpha(i) * (f(x)(i) - x(i)))
//! ```
//!
//! Components outside the active set are copied unchanged.

use thiserror::Error;

use crate::scheme::{keyed_index, IndexSets, Scheme, SchemeError, StepParams, VectorScheme};
use crate::value::{error_against, sup_distance, Operator, ValueVector, ZeroBox};

#[derive(Debug, Error, PartialEq)]
pub enum IterationError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("initial value leaves the domain at component {component}")]
    StartOutsideBox { component: usize },
    #[error(
        "operator at step {step} maps outside its domain (component {component}, value {value})"
    )]
    OutsideBox {
        step: usize,
        component: usize,
        value: f64,
    },
    #[error("stopping rule sets no bound")]
    UnboundedStop,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// A sequence `n -> f_n` of maps on a common 0-box.
pub trait OperatorProvider {
    fn dim(&self) -> usize;
    fn domain(&self) -> &ZeroBox;
    /// Writes `f_n(x)` into `out`. Called once per step, in step order.
    fn apply(&mut self, n: usize, x: &[f64], out: &mut [f64]);
}

/// `f_n = f` for every `n`.
pub struct ConstantProvider<O> {
    op: O,
    domain: ZeroBox,
}

impl<O: Operator> ConstantProvider<O> {
    pub fn new(op: O, domain: ZeroBox) -> Self {
        Self { op, domain }
    }

    /// On the whole non-negative orthant.
    pub fn unbounded(op: O) -> Self {
        let dim = op.dim();
        Self::new(op, ZeroBox::orthant(dim))
    }
}

impl<O: Operator> OperatorProvider for ConstantProvider<O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn domain(&self) -> &ZeroBox {
        &self.domain
    }
    fn apply(&mut self, _n: usize, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out)
    }
}

/// Provider backed by a closure `(n, x, out)`.
pub struct FnProvider<F> {
    domain: ZeroBox,
    f: F,
}

impl<F: FnMut(usize, &[f64], &mut [f64])> FnProvider<F> {
    pub fn new(domain: ZeroBox, f: F) -> Self {
        Self { domain, f }
    }
}

impl<F: FnMut(usize, &[f64], &mut [f64])> OperatorProvider for FnProvider<F> {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn domain(&self) -> &ZeroBox {
        &self.domain
    }
    fn apply(&mut self, n: usize, x: &[f64], out: &mut [f64]) {
        (self.f)(n, x, out)
    }
}

/// Which iterates a [`Trajectory`] keeps: every step up to `dense_until`,
/// then every `every`-th step. The final iterate is always kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stride {
    pub dense_until: usize,
    pub every: usize,
}

impl Default for Stride {
    fn default() -> Self {
        Self {
            dense_until: 1_000,
            every: 10,
        }
    }
}

impl Stride {
    /// Keep no intermediate iterates.
    pub fn final_only() -> Self {
        Self {
            dense_until: 0,
            every: usize::MAX,
        }
    }

    fn keeps(&self, step: usize) -> bool {
        step <= self.dense_until
            || (self.every != usize::MAX && step.is_multiple_of(self.every.max(1)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingRule {
    pub max_steps: Option<usize>,
    /// Stop once `||x_{n+1} - x_n||` drops below this.
    pub change_threshold: Option<f64>,
    /// Stop once the error against the reference drops below this.
    pub error_threshold: Option<f64>,
    pub stride: Stride,
}

impl StoppingRule {
    pub fn steps(max_steps: usize) -> Self {
        Self {
            max_steps: Some(max_steps),
            change_threshold: None,
            error_threshold: None,
            stride: Stride::default(),
        }
    }

    pub fn with_change_threshold(mut self, t: f64) -> Self {
        self.change_threshold = Some(t);
        self
    }

    pub fn with_error_threshold(mut self, t: f64) -> Self {
        self.error_threshold = Some(t);
        self
    }

    pub fn with_stride(mut self, stride: Stride) -> Self {
        self.stride = stride;
        self
    }

    fn validate(&self) -> Result<(), IterationError> {
        if self.max_steps.is_none()
            && self.change_threshold.is_none()
            && self.error_threshold.is_none()
        {
            Err(IterationError::UnboundedStop)
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Termination {
    MaxSteps,
    ChangeBelowThreshold,
    ErrorBelowThreshold,
}

/// Per-step summary. Step `k > 0` describes the update producing `x_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub error: Option<f64>,
    pub max_change: f64,
    /// Minimum over the updated components; `NaN` at step 0 and for steps
    /// that update nothing.
    pub alpha_min: f64,
    pub beta_min: f64,
    /// Component chosen by random-chaotic iteration.
    pub selected: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub iterates: Vec<(usize, ValueVector)>,
    pub final_value: ValueVector,
    pub termination: Termination,
    /// Total number of single-component updates performed.
    pub component_updates: u64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.records.last().map_or(0, |r| r.step)
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.error).collect()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.error)
    }
}

#[inline]
fn update_component(x: f64, fx: f64, alpha: f64, beta: f64) -> f64 {
    let moved = (x + alpha * (fx - x)).clamp(x.min(fx), x.max(fx));
    (1.0 - beta) * moved
}

/// One generalized Mann step applied to every component.
pub fn mann_step(
    x: &[f64],
    fx: &[f64],
    alpha: &[f64],
    beta: &[f64],
) -> Result<ValueVector, IterationError> {
    let d = x.len();
    for len in [fx.len(), alpha.len(), beta.len()] {
        if len != d {
            return Err(IterationError::Dimension {
                expected: d,
                got: len,
            });
        }
    }
    Ok(ValueVector(
        (0..d)
            .map(|i| update_component(x[i], fx[i], alpha[i], beta[i]))
            .collect(),
    ))
}

fn min_over(values: &[f64], active: Option<&[usize]>) -> f64 {
    let m = match active {
        Some(a) => a.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min),
        None => values.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    if m.is_infinite() {
        f64::NAN
    } else {
        m
    }
}

struct Recorder<'a> {
    stop: &'a StoppingRule,
    reference: Option<&'a [f64]>,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn start(stop: &'a StoppingRule, reference: Option<&'a [f64]>, x0: &[f64]) -> Self {
        let error = reference.map(|r| error_against(x0, r));
        Self {
            stop,
            reference,
            traj: Trajectory {
                records: vec![StepRecord {
                    step: 0,
                    error,
                    max_change: 0.0,
                    alpha_min: f64::NAN,
                    beta_min: f64::NAN,
                    selected: None,
                }],
                iterates: vec![(0, ValueVector(x0.to_vec()))],
                final_value: ValueVector(x0.to_vec()),
                termination: Termination::MaxSteps,
                component_updates: 0,
            },
        }
    }

    /// Records `x_step`; returns the termination reason if the run ends.
    fn record(
        &mut self,
        step: usize,
        x: &[f64],
        change: f64,
        alpha_min: f64,
        beta_min: f64,
        selected: Option<usize>,
    ) -> Option<Termination> {
        let error = self.reference.map(|r| error_against(x, r));
        self.traj.records.push(StepRecord {
            step,
            error,
            max_change: change,
            alpha_min,
            beta_min,
            selected,
        });
        if self.stop.stride.keeps(step) {
            self.traj.iterates.push((step, ValueVector(x.to_vec())));
        }
        self.check(step, error, Some(change))
    }

    fn check(&self, step: usize, error: Option<f64>, change: Option<f64>) -> Option<Termination> {
        if let (Some(t), Some(e)) = (self.stop.error_threshold, error) {
            if e < t {
                return Some(Termination::ErrorBelowThreshold);
            }
        }
        if let (Some(t), Some(c)) = (self.stop.change_threshold, change) {
            if c < t {
                return Some(Termination::ChangeBelowThreshold);
            }
        }
        match self.stop.max_steps {
            Some(m) if step >= m => Some(Termination::MaxSteps),
            _ => None,
        }
    }

    fn finish(mut self, x: Vec<f64>, reason: Termination) -> Trajectory {
        let last = self.traj.records.last().map_or(0, |r| r.step);
        if self.traj.iterates.last().map(|(s, _)| *s) != Some(last) {
            self.traj.iterates.push((last, ValueVector(x.clone())));
        }
        self.traj.final_value = ValueVector(x);
        self.traj.termination = reason;
        self.traj
    }
}

fn check_start<P: OperatorProvider + ?Sized>(
    provider: &P,
    x0: &[f64],
    reference: Option<&[f64]>,
) -> Result<(), IterationError> {
    let d = provider.dim();
    if x0.len() != d {
        return Err(IterationError::Dimension {
            expected: d,
            got: x0.len(),
        });
    }
    if let Some(r) = reference {
        if r.len() != d {
            return Err(IterationError::Dimension {
                expected: d,
                got: r.len(),
            });
        }
    }
    if let Some(component) = provider.domain().first_violation(x0) {
        return Err(IterationError::StartOutsideBox { component });
    }
    Ok(())
}

fn eval_provider<P: OperatorProvider + ?Sized>(
    provider: &mut P,
    n: usize,
    x: &[f64],
    fx: &mut [f64],
) -> Result<(), IterationError> {
    provider.apply(n, x, fx);
    match provider.domain().first_violation(fx) {
        Some(component) => Err(IterationError::OutsideBox {
            step: n,
            component,
            value: fx[component],
        }),
        None => Ok(()),
    }
}

/// Shared driver: `params(n, x)` returns the step's parameters, the
/// component selected (if any), and the set of components to update.
fn drive<P, F>(
    provider: &mut P,
    x0: &[f64],
    stop: &StoppingRule,
    reference: Option<&[f64]>,
    mut params: F,
) -> Result<Trajectory, IterationError>
where
    P: OperatorProvider + ?Sized,
    F: FnMut(usize) -> Result<(StepParams, Option<usize>), IterationError>,
{
    stop.validate()?;
    check_start(provider, x0, reference)?;
    let d = x0.len();
    let mut rec = Recorder::start(stop, reference, x0);
    let mut x = x0.to_vec();
    if let Some(reason) = rec.check(0, rec.traj.records[0].error, None) {
        return Ok(rec.finish(x, reason));
    }
    let mut fx = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut n = 0usize;
    loop {
        let (p, selected) = params(n)?;
        if p.alpha.len() != d || p.beta.len() != d {
            return Err(IterationError::Dimension {
                expected: d,
                got: p.alpha.len(),
            });
        }
        eval_provider(provider, n, &x, &mut fx)?;
        let updated = match &p.active {
            None => {
                for i in 0..d {
                    next[i] = update_component(x[i], fx[i], p.alpha[i], p.beta[i]);
                }
                d
            }
            Some(active) => {
                next.copy_from_slice(&x);
                for &i in active {
                    next[i] = update_component(x[i], fx[i], p.alpha[i], p.beta[i]);
                }
                active.len()
            }
        };
        rec.traj.component_updates += updated as u64;
        let change = sup_distance(&next, &x);
        std::mem::swap(&mut x, &mut next);
        n += 1;
        let a = min_over(&p.alpha, p.active.as_deref());
        let b = min_over(&p.beta, p.active.as_deref());
        if let Some(reason) = rec.record(n, &x, change, a, b, selected) {
            return Ok(rec.finish(x, reason));
        }
    }
}

/// Mann iteration with a scalar scheme.
pub fn iterate<P: OperatorProvider + ?Sized>(
    provider: &mut P,
    scheme: &Scheme,
    x0: &[f64],
    stop: &StoppingRule,
    reference: Option<&[f64]>,
) -> Result<Trajectory, IterationError> {
    let d = provider.dim();
    drive(provider, x0, stop, reference, |n| {
        let (a, b) = scheme.try_eval(n)?;
        Ok((
            StepParams {
                alpha: vec![a; d],
                beta: vec![b; d],
                active: None,
            },
            None,
        ))
    })
}

/// Mann iteration with a generalized scheme. Chaotic derivations restrict
/// updates to their active sets.
pub fn iterate_vector<P: OperatorProvider + ?Sized>(
    provider: &mut P,
    scheme: &mut VectorScheme,
    x0: &[f64],
    stop: &StoppingRule,
    reference: Option<&[f64]>,
) -> Result<Trajectory, IterationError> {
    if scheme.dim() != provider.dim() {
        return Err(IterationError::Dimension {
            expected: provider.dim(),
            got: scheme.dim(),
        });
    }
    drive(provider, x0, stop, reference, |n| {
        let p = scheme.eval(n)?;
        let selected = match &p.active {
            Some(a) if a.len() == 1 => Some(a[0]),
            _ => None,
        };
        Ok((p, selected))
    })
}

/// Chaotic iteration: at step `n` only the components in `index_sets.at(n)`
/// are updated with the scheme's step-`n` parameters; the rest are copied.
pub fn chaotic_iterate<P: OperatorProvider + ?Sized>(
    provider: &mut P,
    scheme: &mut VectorScheme,
    index_sets: &IndexSets,
    x0: &[f64],
    stop: &StoppingRule,
    reference: Option<&[f64]>,
) -> Result<Trajectory, IterationError> {
    let d = provider.dim();
    if scheme.dim() != d {
        return Err(IterationError::Dimension {
            expected: d,
            got: scheme.dim(),
        });
    }
    drive(provider, x0, stop, reference, |n| {
        let active = index_sets.at(n);
        if let Some(&bad) = active.iter().find(|&&j| j >= d) {
            return Err(SchemeError::IndexOutOfRange {
                step: n,
                component: bad,
                dim: d,
            }
            .into());
        }
        let mut p = scheme.eval(n)?;
        let selected = if active.len() == 1 {
            Some(active[0])
        } else {
            None
        };
        p.active = Some(match p.active.take() {
            // an already-chaotic scheme further restricts the set
            Some(inner) => active.into_iter().filter(|j| inner.contains(j)).collect(),
            None => active,
        });
        Ok((p, selected))
    })
}

/// Random chaotic iteration: each step updates one uniformly chosen
/// component `i`, using the base scheme at that component's own counter
/// `c(i)` (the number of earlier updates of `i`). The choice at step `n`
/// is a function of `(seed, n)`.
pub fn random_chaotic_iterate<P: OperatorProvider + ?Sized>(
    provider: &mut P,
    base: &Scheme,
    seed: u64,
    x0: &[f64],
    stop: &StoppingRule,
    reference: Option<&[f64]>,
) -> Result<Trajectory, IterationError> {
    let d = provider.dim();
    let mut counters = vec![0usize; d];
    drive(provider, x0, stop, reference, |n| {
        let i = keyed_index(seed, n as u64, d);
        let (a, b) = base.try_eval(counters[i])?;
        counters[i] += 1;
        let mut alpha = vec![0.0; d];
        let mut beta = vec![0.0; d];
        alpha[i] = a;
        beta[i] = b;
        Ok((
            StepParams {
                alpha,
                beta,
                active: Some(vec![i]),
            },
            Some(i),
        ))
    })
}

/// `F(x) = f(min(x, x*))`: extends a monotone non-expansive map on a
/// 0-box to the whole orthant.
pub struct Clamped<O> {
    op: O,
    bound: ValueVector,
}

pub fn clamp_extend<O: Operator>(op: O, x_star: ValueVector) -> Clamped<O> {
    Clamped { op, bound: x_star }
}

impl<O: Operator> Operator for Clamped<O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = x
            .iter()
            .zip(self.bound.iter())
            .map(|(a, b)| a.min(*b))
            .collect();
        self.op.apply_into(&y, out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KleeneResult {
    pub value: ValueVector,
    pub converged: bool,
    pub steps: usize,
}

/// `x_0 = 0, x_{n+1} = f(x_n)`. Converged once a step changes the iterate
/// by less than the change threshold (sup norm).
pub fn kleene_iterate<O: Operator + ?Sized>(
    f: &O,
    stop: &StoppingRule,
) -> Result<KleeneResult, IterationError> {
    stop.validate()?;
    let d = f.dim();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut steps = 0;
    loop {
        if stop.max_steps.is_some_and(|m| steps >= m) {
            return Ok(KleeneResult {
                value: ValueVector(x),
                converged: false,
                steps,
            });
        }
        f.apply_into(&x, &mut y);
        let change = sup_distance(&x, &y);
        std::mem::swap(&mut x, &mut y);
        steps += 1;
        if stop.change_threshold.is_some_and(|t| change < t) {
            return Ok(KleeneResult {
                value: ValueVector(x),
                converged: true,
                steps,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::Family;
    use crate::value::FnOperator;

    fn s(i: usize) -> Scheme {
        Scheme::standard(i, 1).unwrap()
    }

    #[test]
    fn mann_step_examples() {
        let v = mann_step(&[1.0], &[1.0], &[0.5], &[0.0]).unwrap();
        assert_eq!(v.0, vec![1.0]);
        let a = 1.0 - 1e-9;
        let v = mann_step(&[1.0, 1.0], &[0.0, 0.0], &[a, a], &[0.0, 0.0]).unwrap();
        for c in v.iter() {
            assert!((c - 1e-9).abs() < 1e-15);
        }
        let v = mann_step(&[1.0], &[0.0], &[0.5], &[0.5]).unwrap();
        assert_eq!(v.0, vec![0.25]);
        assert!(matches!(
            mann_step(&[1.0], &[0.0, 1.0], &[0.5], &[0.5]),
            Err(IterationError::Dimension { .. })
        ));
    }

    #[test]
    fn halving_map_converges_within_oracle_budget() {
        // first step with error < 1e-3, from running the scalar recurrence
        // directly (beta_0 rounds to 1 - 2^-52, so one step suffices)
        const BUDGET: usize = 1;
        let f = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0] / 2.0);
        let mut p = ConstantProvider::new(f, ZeroBox::unit(1));
        let t = iterate(
            &mut p,
            &s(2),
            &[1.0],
            &StoppingRule::steps(BUDGET),
            Some(&[0.0]),
        )
        .unwrap();
        assert!(t.final_error().unwrap() < 1e-3);
        // and it stays there
        let t = iterate(
            &mut p,
            &s(2),
            &[1.0],
            &StoppingRule::steps(5_000),
            Some(&[0.0]),
        )
        .unwrap();
        assert!(t.errors()[1..].iter().all(|e| *e < 1e-3));
    }

    #[test]
    fn zero_scheme_keeps_start() {
        let f = FnOperator::new(2, |_: &[f64], o: &mut [f64]| o.fill(0.3));
        let mut p = ConstantProvider::unbounded(f);
        let t = iterate(
            &mut p,
            &Scheme::zero(),
            &[0.7, 2.0],
            &StoppingRule::steps(100),
            None,
        )
        .unwrap();
        for (_, x) in &t.iterates {
            assert_eq!(x.0, vec![0.7, 2.0]);
        }
        assert_eq!(t.steps(), 100);
        assert_eq!(t.termination, Termination::MaxSteps);
    }

    #[test]
    fn weighted_example_stays_away_from_zero() {
        let mut p = FnProvider::new(ZeroBox::unit(1), |n, x: &[f64], o: &mut [f64]| {
            let k = n as f64 + 1.0;
            o[0] = (1.0 - 1.0 / k) * x[0] + 1.0 / k;
        });
        let sch = Scheme::new(Family::Constant(0.5), Family::Harmonic);
        let t = iterate(
            &mut p,
            &sch,
            &[1.0],
            &StoppingRule::steps(20_000),
            Some(&[0.0]),
        )
        .unwrap();
        assert!(t.errors()[1_000..].iter().all(|e| *e > 0.3));
    }

    #[test]
    fn provider_leaving_box_is_reported() {
        let mut p = FnProvider::new(ZeroBox::unit(1), |n, _: &[f64], o: &mut [f64]| {
            o[0] = if n == 3 { 2.0 } else { 0.5 };
        });
        let err = iterate(&mut p, &s(2), &[0.0], &StoppingRule::steps(10), None).unwrap_err();
        assert_eq!(
            err,
            IterationError::OutsideBox {
                step: 3,
                component: 0,
                value: 2.0
            }
        );
        let err = iterate(&mut p, &s(2), &[1.5], &StoppingRule::steps(10), None).unwrap_err();
        assert_eq!(err, IterationError::StartOutsideBox { component: 0 });
    }

    #[test]
    fn stopping_rules() {
        let f = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0] / 2.0);
        let mut p = ConstantProvider::unbounded(f);
        let rule = StoppingRule {
            max_steps: None,
            change_threshold: Some(1e-6),
            error_threshold: None,
            stride: Stride::default(),
        };
        let t = iterate(&mut p, &s(2), &[1.0], &rule, None).unwrap();
        assert_eq!(t.termination, Termination::ChangeBelowThreshold);
        let t = iterate(
            &mut p,
            &s(2),
            &[1.0],
            &StoppingRule::steps(1000).with_error_threshold(0.5),
            Some(&[0.0]),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::ErrorBelowThreshold);
        assert_eq!(t.steps(), 1);
        let none = StoppingRule {
            max_steps: None,
            change_threshold: None,
            error_threshold: None,
            stride: Stride::default(),
        };
        assert_eq!(
            iterate(&mut p, &s(2), &[1.0], &none, None).unwrap_err(),
            IterationError::UnboundedStop
        );
    }

    #[test]
    fn stride_thins_stored_iterates() {
        let f = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = x[0]);
        let mut p = ConstantProvider::unbounded(f);
        let stop = StoppingRule::steps(2_005);
        let t = iterate(&mut p, &s(2), &[1.0], &stop, None).unwrap();
        let steps: Vec<usize> = t.iterates.iter().map(|(s, _)| *s).collect();
        assert_eq!(steps.len(), 1001 + 100 + 1);
        assert_eq!(*steps.last().unwrap(), 2_005);
        assert_eq!(t.records.len(), 2_006);
    }

    fn swap_half() -> FnOperator<impl Fn(&[f64], &mut [f64])> {
        FnOperator::new(2, |x: &[f64], o: &mut [f64]| {
            o[0] = x[1] / 2.0;
            o[1] = x[0] / 2.0;
        })
    }

    #[test]
    fn full_index_sets_match_plain_iteration() {
        let stop = StoppingRule::steps(200);
        let mut p = ConstantProvider::unbounded(swap_half());
        let plain = iterate(&mut p, &s(2), &[1.0, 1.0], &stop, None).unwrap();
        let mut vs = VectorScheme::replicated(s(2), 2);
        let chaotic = chaotic_iterate(
            &mut p,
            &mut vs,
            &IndexSets::Full { dim: 2 },
            &[1.0, 1.0],
            &stop,
            None,
        )
        .unwrap();
        assert_eq!(plain.iterates, chaotic.iterates);
    }

    #[test]
    fn empty_index_set_copies() {
        let mut p = ConstantProvider::unbounded(swap_half());
        let mut vs = VectorScheme::replicated(s(2), 2);
        let t = chaotic_iterate(
            &mut p,
            &mut vs,
            &IndexSets::Explicit(vec![]),
            &[0.4, 0.9],
            &StoppingRule::steps(5),
            None,
        )
        .unwrap();
        assert!(t.iterates.iter().all(|(_, x)| x.0 == vec![0.4, 0.9]));
        assert_eq!(t.component_updates, 0);
        assert!(t.records[1].alpha_min.is_nan());
    }

    #[test]
    fn alternating_chaotic_matches_derived_scheme() {
        let stop = StoppingRule::steps(400).with_stride(Stride {
            dense_until: 400,
            every: 1,
        });
        let sets = IndexSets::round_robin(2);
        let mut p = ConstantProvider::unbounded(swap_half());
        let mut vs = VectorScheme::replicated(s(2), 2);
        let a = chaotic_iterate(&mut p, &mut vs, &sets, &[1.0, 1.0], &stop, None).unwrap();
        let mut derived = VectorScheme::chaotic(VectorScheme::replicated(s(2), 2), sets, false);
        let b = iterate_vector(&mut p, &mut derived, &[1.0, 1.0], &stop, None).unwrap();
        for ((sa, xa), (sb, xb)) in a.iterates.iter().zip(&b.iterates) {
            assert_eq!(sa, sb);
            assert!(xa
                .iter()
                .zip(xb.iter())
                .all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        assert!(a.final_value.sup_norm() < 1e-2);
    }

    #[test]
    fn random_chaotic_in_one_dimension_is_plain_iteration() {
        let f = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = 0.5 + x[0] / 2.0);
        let mut p = ConstantProvider::unbounded(f);
        let stop = StoppingRule::steps(300);
        let plain = iterate(&mut p, &s(4), &[0.0], &stop, None).unwrap();
        let rc = random_chaotic_iterate(&mut p, &s(4), 99, &[0.0], &stop, None).unwrap();
        assert_eq!(plain.iterates, rc.iterates);
        assert!(rc.records[1..].iter().all(|r| r.selected == Some(0)));
    }

    #[test]
    fn random_chaotic_is_reproducible() {
        let stop = StoppingRule::steps(500);
        let mut p = ConstantProvider::unbounded(swap_half());
        let a = random_chaotic_iterate(&mut p, &s(2), 5, &[1.0, 1.0], &stop, None).unwrap();
        let b = random_chaotic_iterate(&mut p, &s(2), 5, &[1.0, 1.0], &stop, None).unwrap();
        assert_eq!(a.iterates, b.iterates);
        // step 0 carries NaN parameters
        assert_eq!(format!("{:?}", a.records), format!("{:?}", b.records));
        let c = random_chaotic_iterate(&mut p, &s(2), 6, &[1.0, 1.0], &stop, None).unwrap();
        assert_ne!(format!("{:?}", a.records), format!("{:?}", c.records));
        assert_eq!(a.component_updates, 500);
    }

    #[test]
    fn clamp_extension() {
        let id = FnOperator::new(2, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let f = clamp_extend(&id, ValueVector(vec![1.0, 1.0]));
        assert_eq!(f.apply(&[3.0, 0.5]), vec![1.0, 0.5]);
        assert_eq!(f.apply(&[0.2, 0.5]), vec![0.2, 0.5]);
        let g = clamp_extend(&id, ValueVector::filled(2, f64::INFINITY));
        assert_eq!(g.apply(&[1e9, 3.0]), vec![1e9, 3.0]);
    }

    #[test]
    fn kleene_examples() {
        let stop = StoppingRule::steps(10_000).with_change_threshold(1e-12);
        let f = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = 1.0 + 0.5 * x[0]);
        let r = kleene_iterate(&f, &stop).unwrap();
        assert!(r.converged);
        assert!((r.value[0] - 2.0).abs() < 1e-11);

        let id = FnOperator::new(3, |x: &[f64], o: &mut [f64]| o.copy_from_slice(x));
        let r = kleene_iterate(&id, &StoppingRule::steps(100).with_change_threshold(1e-8)).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 1);
        assert_eq!(r.value.0, vec![0.0; 3]);

        let div = FnOperator::new(1, |x: &[f64], o: &mut [f64]| o[0] = 1.0 + x[0]);
        let r =
            kleene_iterate(&div, &StoppingRule::steps(777).with_change_threshold(1e-8)).unwrap();
        assert!(!r.converged);
        assert_eq!(r.steps, 777);
        assert_eq!(r.value[0], 777.0);
    }
}
