//! Laurent polynomials on circular domains.
//!
//! f(ζ) = Σ_k a_k ζ^k + Σ_i Σ_{k<0} b_{i,k} (ζ - c_i)^k, with the pole
//! centers c_i restricted to the declared hole centers of the domain.
//! This class is closed under +, *, d/dζ, and under primitives once all
//! residues vanish, which is exactly why the period machinery works on it.
//! Products of pole terms at distinct centers are re-expanded in closed
//! form through the partial-fraction identity for (ζ-a)^{-j} (ζ-b)^{-k}.

use crate::geometry::{Arc, Cycle};
use crate::quad;
use crate::C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use thiserror::Error;

/// Coefficients smaller than this are dropped by normalization.
const PRUNE_EPS: f64 = 1e-300;
/// Pole centers closer than this are identified when merging.
const CENTER_EPS: f64 = 1e-12;
/// Residues below this count as zero when taking primitives.
const RESIDUE_TOL: f64 = 1e-10;
/// Amplification cap for partial-fraction re-expansion.
const COND_CAP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum LaurentError {
    #[error("partial-fraction re-expansion ill-conditioned (amplification {amplification:.3e})")]
    RationalReexpansionFailure { amplification: f64 },
    #[error("one-form is not exact: nonzero residues {0:?}")]
    NonexactForm(Vec<(usize, C64)>),
    #[error("cycle passes within 1e-9 of pole center {0}")]
    CycleThroughPole(usize),
    #[error("quadrature did not converge: estimate {estimate:.3e} > tol {tol:.3e}")]
    QuadratureNotConverged { estimate: f64, tol: f64 },
    #[error("evaluation at pole center {0}")]
    EvalAtPole(usize),
    #[error("arc passes within 1e-6 of pole center {0}")]
    ArcThroughPole(usize),
}

/// Sparse Laurent polynomial; immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    centers: Vec<C64>,
    poly: BTreeMap<u32, C64>,
    poles: BTreeMap<(usize, i32), C64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly { centers: vec![], poly: BTreeMap::new(), poles: BTreeMap::new() }
    }

    pub fn constant(v: C64) -> Self {
        let mut poly = BTreeMap::new();
        if v.norm() >= PRUNE_EPS {
            poly.insert(0, v);
        }
        LaurentPoly { centers: vec![], poly, poles: BTreeMap::new() }
    }

    /// coeff * ζ^k, k >= 0.
    pub fn monomial(k: u32, coeff: C64) -> Self {
        let mut poly = BTreeMap::new();
        if coeff.norm() >= PRUNE_EPS {
            poly.insert(k, coeff);
        }
        LaurentPoly { centers: vec![], poly, poles: BTreeMap::new() }
    }

    /// Polynomial from dense coefficients, constant term first.
    pub fn from_coeffs(coeffs: &[C64]) -> Self {
        let mut poly = BTreeMap::new();
        for (k, c) in coeffs.iter().enumerate() {
            if c.norm() >= PRUNE_EPS {
                poly.insert(k as u32, *c);
            }
        }
        LaurentPoly { centers: vec![], poly, poles: BTreeMap::new() }
    }

    /// coeff * (ζ - center)^k with k <= -1, declared over `centers`.
    pub fn pole_term(centers: &[C64], center_idx: usize, k: i32, coeff: C64) -> Self {
        assert!(k <= -1, "pole exponent must be negative");
        assert!(center_idx < centers.len());
        let mut poles = BTreeMap::new();
        if coeff.norm() >= PRUNE_EPS {
            poles.insert((center_idx, k), coeff);
        }
        LaurentPoly { centers: centers.to_vec(), poly: BTreeMap::new(), poles }
    }

    /// Declares additional admissible pole centers (idempotent merge).
    pub fn with_centers(&self, centers: &[C64]) -> Self {
        let mut out = self.clone();
        for c in centers {
            if !out.centers.iter().any(|a| (a - c).norm() <= CENTER_EPS) {
                out.centers.push(*c);
            }
        }
        out
    }

    pub fn centers(&self) -> &[C64] {
        &self.centers
    }

    pub fn poly_coeffs(&self) -> &BTreeMap<u32, C64> {
        &self.poly
    }

    pub fn pole_coeffs(&self) -> &BTreeMap<(usize, i32), C64> {
        &self.poles
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_empty() && self.poles.is_empty()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.poly
            .values()
            .chain(self.poles.values())
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Degree of the polynomial part, if any.
    pub fn poly_degree(&self) -> Option<u32> {
        self.poly.keys().next_back().copied()
    }

    /// True when some non-constant coefficient exceeds `tol`.
    pub fn is_nonconstant(&self, tol: f64) -> bool {
        self.poly.iter().any(|(k, c)| *k > 0 && c.norm() > tol)
            || self.poles.values().any(|c| c.norm() > tol)
    }

    fn prune(mut self) -> Self {
        self.poly.retain(|_, c| c.norm() >= PRUNE_EPS);
        self.poles.retain(|_, c| c.norm() >= PRUNE_EPS);
        self
    }

    /// Index of `c` in this poly's center list, if declared.
    pub fn center_index(&self, c: C64) -> Option<usize> {
        self.centers.iter().position(|a| (a - c).norm() <= CENTER_EPS)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in out.poly.values_mut() {
            *v *= s;
        }
        for v in out.poles.values_mut() {
            *v *= s;
        }
        out.prune()
    }

    pub fn neg(&self) -> Self {
        self.scale(C64::new(-1.0, 0.0))
    }

    pub fn evaluate(&self, z: C64) -> Result<C64, LaurentError> {
        for (i, c) in self.centers.iter().enumerate() {
            if self.poles.keys().any(|(ci, _)| *ci == i) && (z - c).norm() < 1e-9 {
                return Err(LaurentError::EvalAtPole(i));
            }
        }
        let mut acc = C64::new(0.0, 0.0);
        // Horner over the dense range of the sparse polynomial part
        if let Some(&deg) = self.poly.keys().next_back() {
            let mut horner = C64::new(0.0, 0.0);
            for k in (0..=deg).rev() {
                horner = horner * z + self.poly.get(&k).copied().unwrap_or_default();
            }
            acc += horner;
        }
        for ((ci, k), coeff) in &self.poles {
            acc += coeff * (z - self.centers[*ci]).powi(*k);
        }
        Ok(acc)
    }

    /// Derivatives [f(p), f'(p), ..., f^(m)(p)].
    pub fn jet_at(&self, p: C64, m: usize) -> Result<Vec<C64>, LaurentError> {
        let mut out = Vec::with_capacity(m + 1);
        let mut cur = self.clone();
        out.push(cur.evaluate(p)?);
        for _ in 0..m {
            cur = cur.differentiate();
            out.push(cur.evaluate(p)?);
        }
        Ok(out)
    }

    pub fn differentiate(&self) -> Self {
        let mut poly = BTreeMap::new();
        for (&k, &c) in &self.poly {
            if k > 0 {
                poly.insert(k - 1, c * k as f64);
            }
        }
        let mut poles = BTreeMap::new();
        for (&(ci, k), &c) in &self.poles {
            poles.insert((ci, k - 1), c * k as f64);
        }
        LaurentPoly { centers: self.centers.clone(), poly, poles }.prune()
    }

    /// Maps this poly's center indices into the merged list, extending it.
    fn center_map(&self, merged: &mut Vec<C64>) -> Vec<usize> {
        self.centers
            .iter()
            .map(|c| {
                if let Some(i) = merged.iter().position(|a| (a - c).norm() <= CENTER_EPS) {
                    i
                } else {
                    merged.push(*c);
                    merged.len() - 1
                }
            })
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut centers = self.centers.clone();
        let map_b = other.center_map(&mut centers);
        let mut poly = self.poly.clone();
        for (&k, &c) in &other.poly {
            *poly.entry(k).or_insert_with(|| C64::new(0.0, 0.0)) += c;
        }
        let mut poles = self.poles.clone();
        for (&(ci, k), &c) in &other.poles {
            *poles.entry((map_b[ci], k)).or_insert_with(|| C64::new(0.0, 0.0)) += c;
        }
        LaurentPoly { centers, poly, poles }.prune()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LaurentError> {
        let mut centers = self.centers.clone();
        let map_b = other.center_map(&mut centers);
        let map_a: Vec<usize> = (0..self.centers.len()).collect();

        let mut acc = LaurentPoly {
            centers: centers.clone(),
            poly: BTreeMap::new(),
            poles: BTreeMap::new(),
        };

        // polynomial x polynomial: plain convolution
        for (&ka, &ca) in &self.poly {
            for (&kb, &cb) in &other.poly {
                *acc.poly.entry(ka + kb).or_insert_with(|| C64::new(0.0, 0.0)) += ca * cb;
            }
        }

        // polynomial x pole and pole x polynomial
        for (poly_side, pole_side, pole_map) in
            [(&self.poly, &other.poles, &map_b), (&other.poly, &self.poles, &map_a)]
        {
            for (&(ci, k), &cp) in pole_side.iter() {
                let c = centers[pole_map[ci]];
                for (&kp, &ca) in poly_side.iter() {
                    mul_poly_pole(&mut acc, kp, ca * cp, c, pole_map[ci], k);
                }
            }
        }

        // pole x pole
        for (&(ia, ka), &ca) in &self.poles {
            for (&(ib, kb), &cb) in &other.poles {
                let ia = map_a[ia];
                let ib = map_b[ib];
                let coeff = ca * cb;
                if ia == ib {
                    *acc.poles.entry((ia, ka + kb)).or_insert_with(|| C64::new(0.0, 0.0)) += coeff;
                } else {
                    cross_pole_product(&mut acc, ia, -ka as u32, ib, -kb as u32, coeff)?;
                }
            }
        }
        Ok(acc.prune())
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, n: u32) -> Result<Self, LaurentError> {
        let mut out = LaurentPoly::constant(C64::new(1.0, 0.0)).with_centers(&self.centers);
        for _ in 0..n {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Coefficient of (ζ - c_i)^{-1}.
    pub fn residue_at(&self, center_idx: usize) -> C64 {
        self.poles.get(&(center_idx, -1)).copied().unwrap_or_default()
    }
}

impl std::ops::Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        LaurentPoly::add(self, rhs)
    }
}

impl std::ops::Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        LaurentPoly::sub(self, rhs)
    }
}

/// Accumulates ca ζ^kp * (ζ-c)^k (k <= -1) into `acc`, splitting into the
/// pole part at c and a polynomial remainder, both exact.
fn mul_poly_pole(acc: &mut LaurentPoly, kp: u32, ca: C64, c: C64, ci: usize, k: i32) {
    // ζ^kp in the (ζ-c) basis: Σ_m C(kp, m) c^{kp-m} (ζ-c)^m
    let kp = kp as i64;
    let mut binom = 1.0f64;
    let mut shifted: Vec<C64> = Vec::with_capacity(kp as usize + 1);
    for m in 0..=kp {
        if m > 0 {
            binom = binom * (kp - m + 1) as f64 / m as f64;
        }
        shifted.push(c.powi((kp - m) as i32) * binom * ca);
    }
    // polynomial remainder in the (ζ-c) basis, shifted back to ζ^j
    let mut rem: Vec<C64> = vec![];
    for (m, &sc) in shifted.iter().enumerate() {
        let e = m as i32 + k;
        if e <= -1 {
            *acc.poles.entry((ci, e)).or_insert_with(|| C64::new(0.0, 0.0)) += sc;
        } else {
            let e = e as usize;
            if rem.len() <= e {
                rem.resize(e + 1, C64::new(0.0, 0.0));
            }
            rem[e] += sc;
        }
    }
    // (ζ-c)^e = Σ_j C(e, j) (-c)^{e-j} ζ^j
    for (e, &rc) in rem.iter().enumerate() {
        if rc.norm() < PRUNE_EPS {
            continue;
        }
        let mut binom = 1.0f64;
        for j in 0..=e {
            if j > 0 {
                binom = binom * (e - j + 1) as f64 / j as f64;
            }
            let term = rc * binom * (-c).powi((e - j) as i32);
            *acc.poly.entry(j as u32).or_insert_with(|| C64::new(0.0, 0.0)) += term;
        }
    }
}

/// (ζ-a)^{-j} (ζ-b)^{-k} with a != b, re-expanded in partial fractions:
///   Σ_m A_m (ζ-a)^{-m} + Σ_m B_m (ζ-b)^{-m},
///   A_m = (-1)^{j-m} C(k+j-m-1, j-m) (a-b)^{-(k+j-m)},
/// and symmetrically for B.
fn cross_pole_product(
    acc: &mut LaurentPoly,
    ia: usize,
    j: u32,
    ib: usize,
    k: u32,
    coeff: C64,
) -> Result<(), LaurentError> {
    let a = acc.centers[ia];
    let b = acc.centers[ib];
    let d = a - b;
    let amp = d.norm().recip().max(1.0).powi((j + k) as i32 - 1);
    if amp > COND_CAP {
        return Err(LaurentError::RationalReexpansionFailure { amplification: amp });
    }
    let side = |acc: &mut LaurentPoly, idx: usize, j: u32, k: u32, d: C64| {
        for m in 1..=j {
            let p = (j - m) as i32;
            let binom = binomial((k + j - m - 1) as u64, (j - m) as u64);
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let val = coeff * sign * binom * d.powi(-((k + j - m) as i32));
            *acc.poles.entry((idx, -(m as i32))).or_insert_with(|| C64::new(0.0, 0.0)) += val;
        }
    };
    side(acc, ia, j, k, d);
    side(acc, ib, k, j, -d);
    Ok(())
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    let mut out = 1.0f64;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Flattened form of a Laurent polynomial for fast repeated evaluation.
/// No pole-proximity checks: callers keep their points away from centers.
#[derive(Debug, Clone)]
pub struct DenseEvaluator {
    coeffs: Vec<C64>,
    poles: Vec<(C64, Vec<C64>)>,
}

impl DenseEvaluator {
    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        for (center, coeffs) in &self.poles {
            let w = (z - center).finv();
            let mut p = C64::new(0.0, 0.0);
            for c in coeffs.iter().rev() {
                p = (p + c) * w;
            }
            acc += p;
        }
        acc
    }
}

impl LaurentPoly {
    /// Builds the dense evaluator; pole coefficient vectors are indexed by
    /// |exponent| - 1.
    pub fn evaluator(&self) -> DenseEvaluator {
        let deg = self.poly.keys().next_back().copied().unwrap_or(0);
        let mut coeffs = vec![C64::new(0.0, 0.0); deg as usize + 1];
        for (&k, &c) in &self.poly {
            coeffs[k as usize] = c;
        }
        let mut poles: Vec<(C64, Vec<C64>)> = vec![];
        for (ci, center) in self.centers.iter().enumerate() {
            let max_ord = self
                .poles
                .keys()
                .filter(|(i, _)| *i == ci)
                .map(|(_, e)| (-e) as usize)
                .max()
                .unwrap_or(0);
            if max_ord == 0 {
                continue;
            }
            let mut pc = vec![C64::new(0.0, 0.0); max_ord];
            for (&(i, e), &c) in &self.poles {
                if i == ci {
                    pc[(-e) as usize - 1] = c;
                }
            }
            poles.push((*center, pc));
        }
        DenseEvaluator { coeffs, poles }
    }
}

/// A holomorphic one-form coeff(ζ) dζ.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub coeff: LaurentPoly,
}

impl OneForm {
    pub fn new(coeff: LaurentPoly) -> Self {
        OneForm { coeff }
    }

    pub fn zero() -> Self {
        OneForm { coeff: LaurentPoly::zero() }
    }

    /// x dy as a one-form.
    pub fn x_dy(x: &LaurentPoly, y: &LaurentPoly) -> Result<Self, LaurentError> {
        Ok(OneForm { coeff: x.mul(&y.differentiate())? })
    }

    /// df.
    pub fn d(f: &LaurentPoly) -> Self {
        OneForm { coeff: f.differentiate() }
    }

    pub fn add(&self, other: &Self) -> Self {
        OneForm { coeff: self.coeff.add(&other.coeff) }
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeff.max_coeff()
    }
}

/// Antiderivative with constant term 0. Fails with the offending residues
/// when some residue modulus exceeds 1e-10.
pub fn primitive(a: &OneForm) -> Result<LaurentPoly, LaurentError> {
    let f = &a.coeff;
    let mut bad = vec![];
    for (i, _) in f.centers.iter().enumerate() {
        let r = f.residue_at(i);
        if r.norm() > RESIDUE_TOL {
            bad.push((i, r));
        }
    }
    if !bad.is_empty() {
        return Err(LaurentError::NonexactForm(bad));
    }
    let mut poly = BTreeMap::new();
    for (&k, &c) in &f.poly {
        poly.insert(k + 1, c / (k + 1) as f64);
    }
    let mut poles = BTreeMap::new();
    for (&(ci, k), &c) in &f.poles {
        if k == -1 {
            continue; // sub-tolerance residue, dropped
        }
        poles.insert((ci, k + 1), c / (k + 1) as f64);
    }
    Ok(LaurentPoly { centers: f.centers.clone(), poly, poles }.prune())
}

pub fn residue_at(a: &OneForm, center_idx: usize) -> C64 {
    a.coeff.residue_at(center_idx)
}

/// Exact contour integral over a circular cycle: 2πi x orientation x the
/// sum of enclosed residues.
pub fn contour_integral(a: &OneForm, cycle: &Cycle) -> Result<C64, LaurentError> {
    let f = &a.coeff;
    let c = cycle.center();
    let mut sum = C64::new(0.0, 0.0);
    for (i, center) in f.centers.iter().enumerate() {
        let d = (center - c).norm();
        if (d - cycle.radius).abs() < 1e-9 && f.poles.keys().any(|(ci, _)| *ci == i) {
            return Err(LaurentError::CycleThroughPole(i));
        }
        if d < cycle.radius {
            sum += f.residue_at(i);
        }
    }
    Ok(sum * C64::new(0.0, 2.0 * std::f64::consts::PI) * cycle.orientation as f64)
}

/// Value and error estimate of an arc integral.
#[derive(Debug, Clone, Copy)]
pub struct ArcIntegral {
    pub value: C64,
    pub error_estimate: f64,
}

/// Adaptive quadrature of a one-form along an arc.
pub fn arc_integral(a: &OneForm, arc: &Arc, tol: f64) -> Result<ArcIntegral, LaurentError> {
    let f = &a.coeff;
    for (i, center) in f.centers.iter().enumerate() {
        if f.poles.keys().any(|(ci, _)| *ci == i) && arc.min_distance_to_point(*center) < 1e-6 {
            return Err(LaurentError::ArcThroughPole(i));
        }
    }
    let pieces = arc.pieces();
    let per_piece_tol = tol / pieces.len() as f64;
    let mut value = C64::new(0.0, 0.0);
    let mut err = 0.0;
    for piece in &pieces {
        let integrand = |t: f64| -> C64 {
            let z = piece.point(t);
            let v = piece.velocity(t);
            // inside the quadrature the integrand must be total; a pole hit
            // is excluded by the margin check above
            f.evaluate(z).unwrap_or(C64::new(f64::MAX, 0.0)) * v
        };
        match quad::adaptive(integrand, per_piece_tol) {
            Ok(r) => {
                value += r.value;
                err += r.error_estimate;
            }
            Err(r) => {
                return Err(LaurentError::QuadratureNotConverged {
                    estimate: r.error_estimate + err,
                    tol,
                })
            }
        }
    }
    Ok(ArcIntegral { value, error_estimate: err })
}

// ---------------------------------------------------------------------------
// JSON encoding: {"centers":[[re,im],..],"poly":[[k,re,im],..],
// "poles":[[centerIdx,k,re,im],..]} with exponents ascending.

#[derive(Serialize, Deserialize)]
struct LaurentRepr {
    centers: Vec<[f64; 2]>,
    poly: Vec<(u32, f64, f64)>,
    poles: Vec<(usize, i32, f64, f64)>,
}

impl Serialize for LaurentPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LaurentRepr {
            centers: self.centers.iter().map(|c| [c.re, c.im]).collect(),
            poly: self.poly.iter().map(|(&k, &c)| (k, c.re, c.im)).collect(),
            poles: self.poles.iter().map(|(&(ci, k), &c)| (ci, k, c.re, c.im)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = LaurentRepr::deserialize(d)?;
        let centers: Vec<C64> = r.centers.iter().map(|c| C64::new(c[0], c[1])).collect();
        let mut poly = BTreeMap::new();
        for (k, re, im) in r.poly {
            poly.insert(k, C64::new(re, im));
        }
        let mut poles = BTreeMap::new();
        for (ci, k, re, im) in r.poles {
            if ci >= centers.len() {
                return Err(D::Error::custom("pole center index out of range"));
            }
            if k > -1 {
                return Err(D::Error::custom("pole exponent must be <= -1"));
            }
            poles.insert((ci, k), C64::new(re, im));
        }
        Ok(LaurentPoly { centers, poly, poles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn zeta() -> LaurentPoly {
        LaurentPoly::monomial(1, c(1.0, 0.0))
    }

    #[test]
    fn add_inverse_and_identity() {
        let z = zeta();
        assert!(z.add(&z.neg()).is_zero());
        assert_eq!(z.add(&LaurentPoly::zero()), z);
    }

    #[test]
    fn add_disjoint_supports() {
        let centers = [c(0.0, 0.0)];
        let inv = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let s = inv.add(&zeta());
        assert_eq!(s.pole_coeffs().get(&(0, -1)), Some(&c(1.0, 0.0)));
        assert_eq!(s.poly_coeffs().get(&1), Some(&c(1.0, 0.0)));
    }

    #[test]
    fn mul_simple_cases() {
        let z = zeta();
        let z2 = z.mul(&z).unwrap();
        assert_eq!(z2.poly_coeffs().get(&2), Some(&c(1.0, 0.0)));

        let centers = [c(0.0, 0.0)];
        let inv = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let one = inv.mul(&z).unwrap();
        assert!((one.evaluate(c(0.7, 0.3)).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(one.poly_coeffs().get(&0), Some(&c(1.0, 0.0)));
        assert!(one.pole_coeffs().is_empty());
    }

    #[test]
    fn mul_cross_poles_partial_fractions() {
        // (1/ζ)(1/(ζ-1)) = 1/(ζ-1) - 1/ζ
        let centers = [c(0.0, 0.0), c(1.0, 0.0)];
        let a = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let b = LaurentPoly::pole_term(&centers, 1, -1, c(1.0, 0.0));
        let p = a.mul(&b).unwrap();
        assert!((p.pole_coeffs()[&(0, -1)] - c(-1.0, 0.0)).norm() < 1e-14);
        assert!((p.pole_coeffs()[&(1, -1)] - c(1.0, 0.0)).norm() < 1e-14);
        // direct-product oracle at 64 points
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..64 {
            let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if z.norm() < 0.1 || (z - c(1.0, 0.0)).norm() < 0.1 {
                continue;
            }
            let lhs = p.evaluate(z).unwrap();
            let rhs = a.evaluate(z).unwrap() * b.evaluate(z).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn mul_rejects_near_coincident_cross_poles() {
        let centers = [c(0.0, 0.0), c(1e-3, 0.0)];
        let a = LaurentPoly::pole_term(&centers, 0, -5, c(1.0, 0.0));
        let b = LaurentPoly::pole_term(&centers, 1, -5, c(1.0, 0.0));
        assert!(matches!(
            a.mul(&b),
            Err(LaurentError::RationalReexpansionFailure { .. })
        ));
    }

    #[test]
    fn differentiate_term_rules() {
        let z2 = zeta().mul(&zeta()).unwrap();
        let d = z2.differentiate();
        assert_eq!(d.poly_coeffs().get(&1), Some(&c(2.0, 0.0)));

        let centers = [c(0.0, 0.0)];
        let inv = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let d = inv.differentiate();
        assert_eq!(d.pole_coeffs().get(&(0, -2)), Some(&c(-1.0, 0.0)));

        assert!(LaurentPoly::constant(c(4.0, 0.0)).differentiate().is_zero());
    }

    #[test]
    fn primitive_examples() {
        // 2ζ dζ -> ζ^2
        let f = OneForm::new(zeta().scale(c(2.0, 0.0)));
        let p = primitive(&f).unwrap();
        assert_eq!(p.poly_coeffs().get(&2), Some(&c(1.0, 0.0)));
        assert!(p.poly_coeffs().get(&0).is_none());

        // (1/ζ^2) dζ -> -1/ζ
        let centers = [c(0.0, 0.0)];
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -2, c(1.0, 0.0)));
        let p = primitive(&f).unwrap();
        assert_eq!(p.pole_coeffs().get(&(0, -1)), Some(&c(-1.0, 0.0)));

        // (1/ζ) dζ has a residue
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        assert!(matches!(primitive(&f), Err(LaurentError::NonexactForm(_))));
    }

    #[test]
    fn residue_examples() {
        let centers = [c(0.0, 0.0), c(0.0, 1.0)];
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        assert_eq!(residue_at(&f, 0), c(1.0, 0.0));
        let g = OneForm::new(LaurentPoly::monomial(3, c(1.0, 0.0)).with_centers(&centers));
        assert_eq!(residue_at(&g, 0), c(0.0, 0.0));
        let h = OneForm::new(LaurentPoly::pole_term(&centers, 1, -1, c(3.0, 0.0)));
        assert_eq!(residue_at(&h, 1), c(3.0, 0.0));
    }

    fn unit_cycle() -> Cycle {
        Cycle {
            center: [0.0, 0.0],
            radius: 1.0,
            orientation: 1,
            enclosed: std::collections::BTreeSet::from([0]),
        }
    }

    #[test]
    fn contour_integral_residue_theorem() {
        let centers = [c(0.0, 0.0)];
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        let v = contour_integral(&f, &unit_cycle()).unwrap();
        assert!((v - c(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-14);

        let g = OneForm::new(zeta().with_centers(&centers));
        assert!(contour_integral(&g, &unit_cycle()).unwrap().norm() < 1e-14);

        let off = Cycle {
            center: [2.0, 0.0],
            radius: 0.5,
            orientation: 1,
            enclosed: Default::default(),
        };
        assert!(contour_integral(&f, &off).unwrap().norm() < 1e-14);
    }

    #[test]
    fn cycle_through_pole_detected() {
        let centers = [c(1.0, 0.0)];
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        let r = contour_integral(&f, &unit_cycle());
        assert!(matches!(r, Err(LaurentError::CycleThroughPole(0))));
    }

    #[test]
    fn arc_integral_examples() {
        let seg = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let f = OneForm::new(LaurentPoly::constant(c(1.0, 0.0)));
        let r = arc_integral(&f, &seg, 1e-10).unwrap();
        assert!((r.value - c(1.0, 0.0)).norm() < 1e-12);

        let f = OneForm::new(zeta().scale(c(2.0, 0.0)));
        let r = arc_integral(&f, &seg, 1e-10).unwrap();
        assert!((r.value - c(1.0, 0.0)).norm() < 1e-12);

        // upper unit semicircle from 1 to -1 of dζ/ζ = iπ
        let semi = Arc::circular(c(0.0, 0.0), 1.0, 0.0, std::f64::consts::PI);
        let centers = [c(0.0, 0.0)];
        let f = OneForm::new(LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        let r = arc_integral(&f, &semi, 1e-10).unwrap();
        assert!((r.value - c(0.0, std::f64::consts::PI)).norm() < 1e-10);
        assert!(r.error_estimate <= 1e-10);
    }

    #[test]
    fn jet_and_eval_examples() {
        let z2 = zeta().mul(&zeta()).unwrap();
        let j = z2.jet_at(c(1.0, 0.0), 1).unwrap();
        assert!((j[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((j[1] - c(2.0, 0.0)).norm() < 1e-15);

        let centers = [c(0.0, 0.0)];
        let inv = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let j = inv.jet_at(c(2.0, 0.0), 0).unwrap();
        assert!((j[0] - c(0.5, 0.0)).norm() < 1e-15);

        let p = z2.add(&LaurentPoly::constant(c(1.0, 0.0)));
        assert!(p.evaluate(c(0.0, 1.0)).unwrap().norm() < 1e-15);

        assert!(matches!(inv.evaluate(c(0.0, 0.0)), Err(LaurentError::EvalAtPole(0))));
    }

    /// Random Laurent poly over the two standard centers.
    fn random_lp(seed: u64) -> LaurentPoly {
        let centers = [c(0.0, 0.0), c(3.0, 0.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = LaurentPoly::zero().with_centers(&centers);
        for k in 0..4u32 {
            out = out.add(&LaurentPoly::monomial(
                k,
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ));
        }
        for ci in 0..2usize {
            for k in 1..=2i32 {
                out = out.add(&LaurentPoly::pole_term(
                    &centers,
                    ci,
                    -k,
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ));
            }
        }
        out
    }

    #[test]
    fn primitive_then_differentiate_is_identity() {
        for seed in 0..20 {
            let f = random_lp(seed);
            // kill residues so the primitive exists
            let mut g = f.clone();
            for ci in 0..2 {
                let r = g.residue_at(ci);
                g = g.sub(&LaurentPoly::pole_term(g.centers(), ci, -1, r));
            }
            let p = primitive(&OneForm::new(g.clone())).unwrap();
            let back = p.differentiate();
            assert!(back.sub(&g).max_coeff() < 1e-12 * g.max_coeff().max(1.0));
        }
    }

    #[test]
    fn derivative_has_no_residues() {
        for seed in 0..20 {
            let f = random_lp(seed);
            let d = f.differentiate();
            for ci in 0..2 {
                assert_eq!(d.residue_at(ci), c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn contour_matches_quadrature_on_random_forms() {
        // cycle around center 0 only; poles both inside and outside
        let cyc = Cycle {
            center: [0.0, 0.0],
            radius: 1.2,
            orientation: 1,
            enclosed: std::collections::BTreeSet::from([0]),
        };
        for seed in 0..50 {
            let f = OneForm::new(random_lp(seed));
            let exact = contour_integral(&f, &cyc).unwrap();
            let arc = cyc.as_arc();
            let q = arc_integral(&f, &arc, 1e-11).unwrap();
            assert!(
                (exact - q.value).norm() < 1e-9,
                "seed {seed}: residue route {exact} vs quadrature {}",
                q.value
            );
        }
    }

    #[test]
    fn json_round_trip_bit_exact() {
        let f = random_lp(7);
        let s = serde_json::to_string(&f).unwrap();
        let g: LaurentPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        // encoded exponents ascending
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        let poly = v["poly"].as_array().unwrap();
        for w in poly.windows(2) {
            assert!(w[0][0].as_i64().unwrap() < w[1][0].as_i64().unwrap());
        }
    }

    proptest! {
        #[test]
        fn mul_commutes_and_distributes(sa in 0u64..40, sb in 0u64..40, sc_ in 0u64..40) {
            let a = random_lp(sa);
            let b = random_lp(sb);
            let d = random_lp(sc_);
            let ab = a.mul(&b).unwrap();
            let ba = b.mul(&a).unwrap();
            let a_bd = a.mul(&b.add(&d)).unwrap();
            let ab_ad = a.mul(&b).unwrap().add(&a.mul(&d).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(sa.wrapping_mul(31).wrapping_add(sb));
            for _ in 0..64 {
                let z = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
                if z.norm() < 0.3 || (z - c(3.0, 0.0)).norm() < 0.3 {
                    continue;
                }
                let scale = ab.evaluate(z).unwrap().norm().max(1.0);
                prop_assert!((ab.evaluate(z).unwrap() - ba.evaluate(z).unwrap()).norm() < 1e-11 * scale);
                let scale2 = a_bd.evaluate(z).unwrap().norm().max(1.0);
                prop_assert!((a_bd.evaluate(z).unwrap() - ab_ad.evaluate(z).unwrap()).norm() < 1e-11 * scale2);
            }
        }
    }
}
