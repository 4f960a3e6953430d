//! Polynomial conserved densities: the σ-recursion, integration-by-parts
//! normal forms, Euler operators and their numeric evaluation on grids.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::{self, Debug, Display};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{derivative_table, integrate_values, FieldError, GridFunction};
use crate::scalar::Real;

/// Exact coefficient ring used for densities.
pub type Rational = Ratio<i128>;

/// Highest energy index with a tabulated density.
pub const MAX_ENERGY_INDEX: usize = 6;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("energy index {0} outside the supported range 1..=6")]
    IndexOutOfRange(usize),
    #[error("integration by parts did not reach a normal form within {0} passes")]
    ReductionStalled(usize),
    #[error("expected {expected} multipliers, got {got}")]
    MultiplierCount { expected: usize, got: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Coefficient ring of a [`DensityPolynomial`].
pub trait Coefficient:
    Clone
    + PartialEq
    + Debug
    + Display
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
{
    fn from_fraction(num: i64, den: i64) -> Self;
    fn approx(&self) -> f64;
}

impl Coefficient for Rational {
    fn from_fraction(num: i64, den: i64) -> Self {
        Ratio::new(num as i128, den as i128)
    }

    fn approx(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
}

impl Coefficient for f64 {
    fn from_fraction(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn approx(&self) -> f64 {
        *self
    }
}

/// Σ coeff · Π_i u^{(α_i)}, keyed by the sorted multiset of derivative orders.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPolynomial<C: Coefficient = Rational> {
    terms: BTreeMap<Vec<u32>, C>,
}

impl<C: Coefficient> Default for DensityPolynomial<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coefficient> DensityPolynomial<C> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn monomial(coeff: C, mut orders: Vec<u32>) -> Self {
        orders.sort_unstable();
        let mut p = Self::zero();
        p.add_term(orders, coeff);
        p
    }

    /// The single factor u^{(order)}.
    pub fn u(order: u32) -> Self {
        Self::monomial(C::one(), vec![order])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (C, Vec<u32>)>) -> Self {
        let mut p = Self::zero();
        for (c, mut orders) in terms {
            orders.sort_unstable();
            p.add_term(orders, c);
        }
        p
    }

    fn add_term(&mut self, orders: Vec<u32>, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(orders) {
            Entry::Occupied(mut e) => {
                let sum = e.get().clone() + coeff;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &C)> {
        self.terms.iter().map(|(k, c)| (k.as_slice(), c))
    }

    pub fn coefficient(&self, orders: &[u32]) -> Option<&C> {
        let mut key = orders.to_vec();
        key.sort_unstable();
        self.terms.get(&key)
    }

    pub fn max_order(&self) -> Option<u32> {
        self.terms.keys().filter_map(|k| k.last().copied()).max()
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut p = Self::zero();
        for (k, c) in &self.terms {
            p.add_term(k.clone(), c.clone() * s.clone());
        }
        p
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (k, c) in &other.terms {
            p.add_term(k.clone(), c.clone());
        }
        p
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(&-C::one()))
    }

    pub fn times(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let mut k = ka.clone();
                k.extend_from_slice(kb);
                k.sort_unstable();
                p.add_term(k, ca.clone() * cb.clone());
            }
        }
        p
    }

    /// Total x-derivative by the Leibniz rule.
    pub fn derivative(&self) -> Self {
        let mut p = Self::zero();
        for (k, c) in &self.terms {
            for i in 0..k.len() {
                let mut d = k.clone();
                d[i] += 1;
                d.sort_unstable();
                p.add_term(d, c.clone());
            }
        }
        p
    }

    pub fn nth_derivative(&self, times: u32) -> Self {
        (0..times).fold(self.clone(), |p, _| p.derivative())
    }

    /// Formal partial derivative with respect to u^{(order)}.
    pub fn partial(&self, order: u32) -> Self {
        let mut p = Self::zero();
        for (k, c) in &self.terms {
            let mult = k.iter().filter(|&&a| a == order).count() as i64;
            if mult == 0 {
                continue;
            }
            let pos = k.iter().position(|&a| a == order).expect("present");
            let mut rest = k.clone();
            rest.remove(pos);
            p.add_term(rest, c.clone() * C::from_fraction(mult, 1));
        }
        p
    }

    /// Euler operator Σ_α (−1)^α D^α ∂/∂u^{(α)}.
    pub fn euler(&self) -> Self {
        let Some(top) = self.max_order() else {
            return Self::zero();
        };
        let mut p = Self::zero();
        for a in 0..=top {
            let term = self.partial(a).nth_derivative(a);
            p = if a % 2 == 0 { p.plus(&term) } else { p.minus(&term) };
        }
        p
    }

    pub fn is_total_derivative(&self) -> bool {
        self.euler().is_zero()
    }

    /// Pointwise values from a table of derivatives of u (index = order).
    pub fn eval_pointwise<T: Real>(&self, derivs: &[Vec<T>]) -> Vec<T> {
        let m = derivs.first().map_or(0, Vec::len);
        let mut out = vec![T::zero(); m];
        for (k, c) in &self.terms {
            let coeff = T::lit(c.approx());
            for (j, slot) in out.iter_mut().enumerate() {
                let mut v = coeff;
                for &a in k {
                    v = v * derivs[a as usize][j];
                }
                *slot = *slot + v;
            }
        }
        out
    }
}

impl DensityPolynomial<Rational> {
    pub fn to_json_terms(&self) -> Vec<TermJson> {
        self.terms.iter().map(|(k, c)| TermJson { coeff_num: *c.numer(), coeff_den: *c.denom(), orders: k.clone() }).collect()
    }

    pub fn from_json_terms(terms: &[TermJson]) -> Self {
        Self::from_terms(terms.iter().map(|t| (Ratio::new(t.coeff_num, t.coeff_den), t.orders.clone())))
    }
}

/// JSON form of one term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff_num: i128,
    pub coeff_den: i128,
    pub orders: Vec<u32>,
}

fn factor_name(order: u32) -> String {
    match order {
        0 => "u".to_string(),
        1..=3 => format!("u{}", "'".repeat(order as usize)),
        _ => format!("u^({order})"),
    }
}

impl<C: Coefficient> Display for DensityPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, c)) in self.terms.iter().enumerate() {
            let text = c.to_string();
            let (neg, mag) = match text.strip_prefix('-') {
                Some(rest) => (true, rest.to_string()),
                None => (false, text),
            };
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mut parts = Vec::new();
            if mag != "1" || k.is_empty() {
                parts.push(mag);
            }
            let mut idx = 0;
            while idx < k.len() {
                let a = k[idx];
                let run = k[idx..].iter().take_while(|&&b| b == a).count();
                let name = factor_name(a);
                parts.push(match (run, a) {
                    (1, _) => name,
                    (_, 0) => format!("{name}^{run}"),
                    _ => format!("({name})^{run}"),
                });
                idx += run;
            }
            write!(f, "{}", parts.join(" "))?;
        }
        Ok(())
    }
}

/// σ_m from σ₁ = u and σ_{m+1} = −σ_m′ − Σ_{j=1}^{m−1} σ_j σ_{m−j}.
pub fn sigma_density<C: Coefficient>(m: usize) -> DensityPolynomial<C> {
    assert!(m >= 1, "sigma index starts at 1");
    let mut sig: Vec<DensityPolynomial<C>> = vec![DensityPolynomial::zero(), DensityPolynomial::u(0)];
    for k in 1..m {
        let mut next = sig[k].derivative().scale(&-C::one());
        for j in 1..k {
            next = next.minus(&sig[j].times(&sig[k - j]));
        }
        sig.push(next);
    }
    sig.swap_remove(m)
}

/// (−1)^n ½ σ_{2n+1}, unreduced.
pub fn energy_density<C: Coefficient>(n: usize) -> Result<DensityPolynomial<C>, EnergyError> {
    if !(1..=MAX_ENERGY_INDEX).contains(&n) {
        return Err(EnergyError::IndexOutOfRange(n));
    }
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    Ok(sigma_density::<C>(2 * n + 1).scale(&C::from_fraction(sign, 2)))
}

fn cached_densities() -> &'static [DensityPolynomial<Rational>] {
    static CACHE: OnceLock<Vec<DensityPolynomial<Rational>>> = OnceLock::new();
    CACHE.get_or_init(|| (1..=MAX_ENERGY_INDEX).map(|n| energy_density(n).expect("in range")).collect())
}

fn cached_gradients() -> &'static [DensityPolynomial<Rational>] {
    static CACHE: OnceLock<Vec<DensityPolynomial<Rational>>> = OnceLock::new();
    CACHE.get_or_init(|| cached_densities().iter().map(DensityPolynomial::euler).collect())
}

fn density_ref(n: usize) -> Result<&'static DensityPolynomial<Rational>, EnergyError> {
    if !(1..=MAX_ENERGY_INDEX).contains(&n) {
        return Err(EnergyError::IndexOutOfRange(n));
    }
    Ok(&cached_densities()[n - 1])
}

fn gradient_ref(n: usize) -> Result<&'static DensityPolynomial<Rational>, EnergyError> {
    if !(1..=MAX_ENERGY_INDEX).contains(&n) {
        return Err(EnergyError::IndexOutOfRange(n));
    }
    Ok(&cached_gradients()[n - 1])
}

/// True when the monomial admits no further integration by parts.
fn is_normal(orders: &[u32]) -> bool {
    match orders.last() {
        None | Some(0) => true,
        Some(&top) => orders.iter().filter(|&&a| a == top).count() >= 2,
    }
}

/// Rewrites a density modulo total derivatives into the normal form in which
/// the highest derivative of every monomial occurs at least squared. `n` is the
/// index of the energy the density integrates to; it bounds the pass count.
pub fn reduce_canonical<C: Coefficient>(p: &DensityPolynomial<C>, n: usize) -> Result<DensityPolynomial<C>, EnergyError> {
    let max_passes = 10 * n.max(1);
    let mut current = p.clone();
    for _ in 0..max_passes {
        if current.terms.keys().all(|k| is_normal(k)) {
            return Ok(current);
        }
        let mut next = DensityPolynomial::zero();
        for (k, c) in &current.terms {
            if is_normal(k) {
                next.add_term(k.clone(), c.clone());
                continue;
            }
            // g · (u^{(a−1)})^j · u^{(a)} ≡ −g′ · (u^{(a−1)})^{j+1} / (j+1)
            let top = *k.last().expect("non-empty");
            let below = top - 1;
            let j = k.iter().filter(|&&a| a == below).count();
            let g: Vec<u32> = k.iter().copied().filter(|&a| a != top && a != below).collect();
            if g.is_empty() {
                continue;
            }
            let dg = DensityPolynomial::monomial(C::one(), g).derivative();
            let mut tail = vec![below; j + 1];
            tail.sort_unstable();
            let factor = DensityPolynomial::monomial(c.clone() * C::from_fraction(-1, (j + 1) as i64), tail);
            next = next.plus(&dg.times(&factor));
        }
        current = next;
    }
    if current.terms.keys().all(|k| is_normal(k)) {
        Ok(current)
    } else {
        Err(EnergyError::ReductionStalled(max_passes))
    }
}

/// Checks the structure of a normal-form density for E_{m+1}: the quadratic part is
/// exactly ½(u^{(m)})² and every other term has d ≥ 3 factors with Σα = 2m+4−2d
/// and all α ≤ m−1.
pub fn has_canonical_structure(p: &DensityPolynomial<Rational>, m: u32) -> bool {
    let mut quadratic_ok = false;
    for (k, c) in p.terms() {
        let d = k.len() as i64;
        if d == 2 {
            if k == [m, m] && *c == Ratio::new(1, 2) {
                quadratic_ok = true;
                continue;
            }
            return false;
        }
        if d < 3 {
            return false;
        }
        let total: i64 = k.iter().map(|&a| a as i64).sum();
        if total != 2 * m as i64 + 4 - 2 * d || k.iter().any(|&a| a as i64 > m as i64 - 1) {
            return false;
        }
    }
    quadratic_ok
}

/// Euler operator of a density; total derivatives map to zero.
pub fn variational_derivative<C: Coefficient>(p: &DensityPolynomial<C>) -> DensityPolynomial<C> {
    p.euler()
}

/// Pointwise values of `p` evaluated on `f` via spectral derivatives.
pub fn density_values<T: Real>(p: &DensityPolynomial<Rational>, f: &GridFunction<T>) -> Result<GridFunction<T>, EnergyError> {
    let table = derivative_table(f, p.max_order().unwrap_or(0) as usize)?;
    let values = p.eval_pointwise(&table);
    Ok(GridFunction::periodic(f.grid().clone(), values)?)
}

/// ∫ p(u, u′, …) dx on the grid.
pub fn integrate_density<T: Real>(p: &DensityPolynomial<Rational>, f: &GridFunction<T>) -> Result<T, EnergyError> {
    if p.is_zero() {
        return Ok(T::zero());
    }
    let table = derivative_table(f, p.max_order().unwrap_or(0) as usize)?;
    Ok(integrate_values(f.grid(), &p.eval_pointwise(&table)))
}

/// E_n(f) from the unreduced density.
pub fn eval_energy<T: Real>(n: usize, f: &GridFunction<T>) -> Result<T, EnergyError> {
    integrate_density(density_ref(n)?, f)
}

/// E_1..E_up_to sharing one derivative table.
pub fn eval_energies<T: Real>(up_to: usize, f: &GridFunction<T>) -> Result<Vec<T>, EnergyError> {
    let densities: Vec<_> = (1..=up_to).map(density_ref).collect::<Result<_, _>>()?;
    let top = densities.iter().filter_map(|p| p.max_order()).max().unwrap_or(0);
    let table = derivative_table(f, top as usize)?;
    Ok(densities.iter().map(|p| integrate_values(f.grid(), &p.eval_pointwise(&table))).collect())
}

/// ∇E_n evaluated on the grid.
pub fn energy_gradient<T: Real>(n: usize, f: &GridFunction<T>) -> Result<GridFunction<T>, EnergyError> {
    density_values(gradient_ref(n)?, f)
}

/// Residual of ∇E_{n+1}(q) = Σ_j λ_j ∇E_j(q).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EulerLagrangeReport<T> {
    pub multipliers: Vec<T>,
    pub residual_norm: T,
    /// L² norm of ∇E_{n+1}(q), the natural scale for `residual_norm`.
    pub reference_norm: T,
}

impl<T: Real> EulerLagrangeReport<T> {
    pub fn relative(&self) -> T {
        if self.reference_norm > T::zero() {
            self.residual_norm / self.reference_norm
        } else {
            self.residual_norm
        }
    }
}

pub fn euler_lagrange_residual<T: Real>(q: &GridFunction<T>, n: usize, lambda: &[T]) -> Result<EulerLagrangeReport<T>, EnergyError> {
    if lambda.len() != n {
        return Err(EnergyError::MultiplierCount { expected: n, got: lambda.len() });
    }
    let top = energy_gradient(n + 1, q)?;
    let mut residual = top.clone();
    for (j, &l) in lambda.iter().enumerate() {
        residual = residual.sub(&energy_gradient(j + 1, q)?.scale(l))?;
    }
    let l2 = |g: &GridFunction<T>| integrate_values(g.grid(), &g.values().iter().map(|&v| v * v).collect::<Vec<_>>()).sqrt();
    Ok(EulerLagrangeReport { multipliers: lambda.to_vec(), residual_norm: l2(&residual), reference_norm: l2(&top) })
}
