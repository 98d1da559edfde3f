//! Constructive approximation in the Laurent class.
//!
//! The workhorse is `mergelyan_jets`: least squares over samples with the
//! jet rows imposed as exact equality constraints via null-space
//! elimination. On top of that sit the special builders: Hermite
//! interpolants for the immersion correction, derivative-zero location
//! through companion matrices, and the radial bump that pushes boundary
//! norms.

use crate::geometry::{AdmissibleSet, CompactSet};
use crate::laurent::{LaurentError, LaurentPoly};
use crate::linalg::{constrained_lstsq, dmatrix_from_rows, dvector, lstsq_min_norm};
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ApproxError {
    #[error("jet constraints infeasible (residual {residual:.3e})")]
    InfeasibleConstraints { residual: f64 },
    #[error("{rows} constraint rows exceed basis dimension {dim}")]
    BasisTooSmall { rows: usize, dim: usize },
    #[error("derivative is identically zero")]
    ConstantDerivative,
    #[error("no delta in the ladder keeps the map immersive within budget")]
    NoValidDelta,
    #[error("inner and outer radii too close for a norm-separating bump")]
    NoSeparation,
    #[error(transparent)]
    Laurent(#[from] LaurentError),
}

/// A finite Laurent basis: monomials up to `max_poly_deg` plus pole powers
/// up to `max_pole_deg[i]` at each center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentBasis {
    pub centers: Vec<[f64; 2]>,
    pub max_poly_deg: u32,
    pub max_pole_deg: Vec<u32>,
    /// polynomial elements are ((z - origin)/scale)^k
    pub origin: [f64; 2],
    pub scale: f64,
    /// pole elements are (pole_scale_i/(z - c_i))^k
    pub pole_scales: Vec<f64>,
}

impl LaurentBasis {
    pub fn new(centers: &[C64], max_poly_deg: u32, max_pole_deg: Vec<u32>) -> Self {
        assert_eq!(centers.len(), max_pole_deg.len());
        let pole_scales = vec![1.0; centers.len()];
        LaurentBasis {
            centers: centers.iter().map(|c| [c.re, c.im]).collect(),
            max_poly_deg,
            max_pole_deg,
            origin: [0.0, 0.0],
            scale: 1.0,
            pole_scales,
        }
    }

    /// Basis normalized to a working region: monomials in (z - origin)/scale
    /// and pole powers scaled so they are O(1) at distance `pole_scales[i]`
    /// from their center.
    pub fn scaled(
        centers: &[C64],
        max_poly_deg: u32,
        max_pole_deg: Vec<u32>,
        origin: C64,
        scale: f64,
        pole_scales: Vec<f64>,
    ) -> Self {
        assert_eq!(centers.len(), max_pole_deg.len());
        assert_eq!(centers.len(), pole_scales.len());
        assert!(scale > 0.0);
        LaurentBasis {
            centers: centers.iter().map(|c| [c.re, c.im]).collect(),
            max_poly_deg,
            max_pole_deg,
            origin: [origin.re, origin.im],
            scale,
            pole_scales,
        }
    }

    pub fn polynomial(max_poly_deg: u32) -> Self {
        LaurentBasis {
            centers: vec![],
            max_poly_deg,
            max_pole_deg: vec![],
            origin: [0.0, 0.0],
            scale: 1.0,
            pole_scales: vec![],
        }
    }

    pub fn center_points(&self) -> Vec<C64> {
        self.centers.iter().map(|c| C64::new(c[0], c[1])).collect()
    }

    pub fn origin_point(&self) -> C64 {
        C64::new(self.origin[0], self.origin[1])
    }

    pub fn dimension(&self) -> usize {
        self.max_poly_deg as usize + 1 + self.max_pole_deg.iter().map(|&d| d as usize).sum::<usize>()
    }

    /// Doubles the polynomial degree and increments every pole degree.
    pub fn enlarged(&self) -> Self {
        LaurentBasis {
            centers: self.centers.clone(),
            max_poly_deg: (self.max_poly_deg.max(1)) * 2,
            max_pole_deg: self.max_pole_deg.iter().map(|&d| d + 1).collect(),
            origin: self.origin,
            scale: self.scale,
            pole_scales: self.pole_scales.clone(),
        }
    }

    /// Values of the `order`-th derivative of each basis element at `z`.
    pub fn derivative_row(&self, z: C64, order: usize) -> Vec<C64> {
        let mut row = Vec::with_capacity(self.dimension());
        let w = (z - self.origin_point()) / self.scale;
        for k in 0..=self.max_poly_deg as i64 {
            if (order as i64) > k {
                row.push(C64::new(0.0, 0.0));
            } else {
                let mut fac = 1.0;
                for t in 0..order as i64 {
                    fac *= (k - t) as f64 / self.scale;
                }
                row.push(w.powi((k - order as i64) as i32) * fac);
            }
        }
        for (ci, &maxd) in self.max_pole_deg.iter().enumerate() {
            let c = C64::new(self.centers[ci][0], self.centers[ci][1]);
            let r = self.pole_scales[ci];
            for k in 1..=maxd as i64 {
                let mut fac = r.powi(k as i32);
                for t in 0..order as i64 {
                    fac *= (-k - t) as f64;
                }
                row.push((z - c).powi((-k - order as i64) as i32) * fac);
            }
        }
        row
    }

    pub fn eval_row(&self, z: C64) -> Vec<C64> {
        self.derivative_row(z, 0)
    }

    /// Kind of a basis element: a scaled monomial power or a scaled pole
    /// power at one of the centers.
    pub fn element_kind(&self, idx: usize) -> ElementKind {
        let npoly = self.max_poly_deg as usize + 1;
        if idx < npoly {
            return ElementKind::Poly(idx as u32);
        }
        let mut rest = idx - npoly;
        for (ci, &maxd) in self.max_pole_deg.iter().enumerate() {
            if rest < maxd as usize {
                return ElementKind::Pole { center: ci, order: rest as u32 + 1 };
            }
            rest -= maxd as usize;
        }
        unreachable!("element index out of range")
    }

    /// Stable evaluation of one basis element straight from its scaled
    /// form; materializing high-degree elements into global coefficients
    /// loses precision catastrophically, this does not.
    pub fn eval_element(&self, idx: usize, z: C64) -> C64 {
        let npoly = self.max_poly_deg as usize + 1;
        if idx < npoly {
            return ((z - self.origin_point()) / self.scale).powi(idx as i32);
        }
        let mut rest = idx - npoly;
        for (ci, &maxd) in self.max_pole_deg.iter().enumerate() {
            if rest < maxd as usize {
                let k = rest as i32 + 1;
                let c = C64::new(self.centers[ci][0], self.centers[ci][1]);
                return (z - c).powi(-k) * self.pole_scales[ci].powi(k);
            }
            rest -= maxd as usize;
        }
        unreachable!("element index out of range")
    }

    /// Assembles the Laurent polynomial with the given basis coefficients.
    pub fn combine(&self, coeffs: &[C64]) -> LaurentPoly {
        assert_eq!(coeffs.len(), self.dimension());
        let centers = self.center_points();
        let mut out = LaurentPoly::zero().with_centers(&centers);
        let o = self.origin_point();
        let lin = LaurentPoly::from_coeffs(&[
            -o / self.scale,
            C64::new(1.0 / self.scale, 0.0),
        ]);
        let mut power = LaurentPoly::constant(C64::new(1.0, 0.0));
        let mut idx = 0;
        for k in 0..=self.max_poly_deg {
            out = out.add(&power.scale(coeffs[idx]));
            idx += 1;
            if k < self.max_poly_deg {
                power = power.mul(&lin).expect("polynomial product");
            }
        }
        for (ci, &maxd) in self.max_pole_deg.iter().enumerate() {
            let r = self.pole_scales[ci];
            for k in 1..=maxd as i32 {
                out = out.add(&LaurentPoly::pole_term(
                    &centers,
                    ci,
                    -k,
                    coeffs[idx] * r.powi(k),
                ));
                idx += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Poly(u32),
    Pole { center: usize, order: u32 },
}

/// One jet constraint: derivatives 0..=m at a point.
#[derive(Debug, Clone)]
pub struct JetRows {
    pub p: C64,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ApproxReport {
    pub sup_error: f64,
    pub constraint_residual: f64,
    pub condition: f64,
}

/// Least-squares fit over the samples subject to exact jet equality,
/// solved by null-space elimination.
pub fn mergelyan_jets(
    target_samples: &[(C64, C64)],
    jets: &[JetRows],
    basis: &LaurentBasis,
) -> Result<(LaurentPoly, ApproxReport), ApproxError> {
    let rows: usize = jets.iter().map(|j| j.values.len()).sum();
    let dim = basis.dimension();
    if rows > dim {
        return Err(ApproxError::BasisTooSmall { rows, dim });
    }
    let mut c_rows = vec![];
    let mut c_rhs = vec![];
    for jet in jets {
        for (k, v) in jet.values.iter().enumerate() {
            c_rows.push(basis.derivative_row(jet.p, k));
            c_rhs.push(*v);
        }
    }
    let mut o_rows = Vec::with_capacity(target_samples.len());
    let mut o_rhs = Vec::with_capacity(target_samples.len());
    for (p, v) in target_samples {
        o_rows.push(basis.eval_row(*p));
        o_rhs.push(*v);
    }
    let sol = constrained_lstsq(
        &dmatrix_from_rows(&c_rows),
        &dvector(&c_rhs),
        &dmatrix_from_rows(&o_rows),
        &dvector(&o_rhs),
    );
    // the gate separates structural infeasibility from evaluation rounding,
    // which grows with the coefficient norm of the fit
    let scale = c_rhs.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let coeff_scale = sol.x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if sol.constraint_residual > 1e-12 * scale + 5e-15 * coeff_scale {
        return Err(ApproxError::InfeasibleConstraints { residual: sol.constraint_residual });
    }
    let f = basis.combine(sol.x.as_slice());
    Ok((
        f,
        ApproxReport {
            sup_error: sol.objective_sup_error,
            constraint_residual: sol.constraint_residual,
            condition: sol.condition,
        },
    ))
}

/// Returns `f` unchanged when some nonconstant coefficient exceeds 1e-10,
/// otherwise adds a tilt ε ζ with ε chosen so the sup change on `s` stays
/// below 1e-5.
pub fn make_nonconstant(f: &LaurentPoly, s: &AdmissibleSet) -> LaurentPoly {
    if f.is_nonconstant(1e-10) {
        return f.clone();
    }
    let samples = crate::geometry::sample_set(s, 40.0);
    let sup_z = samples.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = 1e-6f64.min(0.99e-5 / sup_z);
    f.add(&LaurentPoly::monomial(1, C64::new(eps, 0.0)))
}

/// All roots of a complex-coefficient polynomial (constant term first),
/// via companion-matrix eigenvalues with Newton polish; Aberth iteration
/// as the fallback when the eigensolver fails to converge.
pub fn polynomial_roots(coeffs: &[C64]) -> Vec<C64> {
    let maxc = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if maxc == 0.0 {
        return vec![];
    }
    let mut cs: Vec<C64> = coeffs.to_vec();
    while cs.len() > 1 && cs.last().unwrap().norm() < 1e-14 * maxc {
        cs.pop();
    }
    let mut roots = vec![];
    while cs.len() > 1 && cs[0].norm() < 1e-250 {
        roots.push(C64::new(0.0, 0.0));
        cs.remove(0);
    }
    let n = cs.len() - 1;
    if n == 0 {
        return roots;
    }
    if n == 1 {
        roots.push(-cs[0] / cs[1]);
        return roots;
    }
    let lead = cs[n];
    let monic: Vec<C64> = cs[..n].iter().map(|c| c / lead).collect();
    let mut companion = nalgebra::DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        companion[(i, n - 1)] = -monic[i];
    }
    let eig = companion.eigenvalues();
    let mut found: Vec<C64> = match eig {
        Some(v) => v.iter().cloned().collect(),
        None => aberth(&cs),
    };
    // Newton polish on the full polynomial
    let eval = |z: C64| -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in cs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    for r in &mut found {
        for _ in 0..8 {
            let (p, dp) = eval(*r);
            if dp.norm() < 1e-300 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() < 1e-12 * (1.0 + r.norm()) {
                break;
            }
        }
    }
    roots.extend(found);
    roots
}

/// Aberth-Ehrlich simultaneous iteration.
fn aberth(cs: &[C64]) -> Vec<C64> {
    let n = cs.len() - 1;
    let lead = cs[n];
    let radius = 1.0
        + cs[..n].iter().map(|c| (c / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            C64::new(0.0, th).exp() * radius
        })
        .collect();
    let eval = |w: C64| -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in cs.iter().rev() {
            dp = dp * w + p;
            p = p * w + c;
        }
        (p, dp)
    };
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if dp.norm() < 1e-300 {
                continue;
            }
            let w = p / dp;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += (z[i] - z[j]).finv();
                }
            }
            let denom = C64::new(1.0, 0.0) - w * s;
            let step = if denom.norm() > 1e-300 { w / denom } else { w };
            z[i] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
        }
        if max_step < 1e-13 {
            break;
        }
    }
    z
}

/// Zeros of f' inside `k`, with multiplicity, by clearing denominators to
/// one polynomial, companion-matrix roots, Newton refinement, and
/// clustering within 1e-8.
pub fn zeros_of_derivative(
    f: &LaurentPoly,
    k: &CompactSet,
) -> Result<Vec<(C64, usize)>, ApproxError> {
    if !f.is_nonconstant(1e-10) {
        return Err(ApproxError::ConstantDerivative);
    }
    let fp = f.differentiate();
    // clear denominators: multiply by (ζ - c_i)^{M_i}
    let mut numer = fp.clone();
    for (ci, c) in fp.centers().iter().enumerate() {
        let max_order = fp
            .pole_coeffs()
            .keys()
            .filter(|(i, _)| *i == ci)
            .map(|(_, e)| -e as u32)
            .max()
            .unwrap_or(0);
        if max_order > 0 {
            let factor =
                LaurentPoly::from_coeffs(&[-c, C64::new(1.0, 0.0)]).pow(max_order)?;
            numer = numer.mul(&factor)?;
        }
    }
    let deg = numer.poly_degree().unwrap_or(0);
    let mut dense = vec![C64::new(0.0, 0.0); deg as usize + 1];
    for (&kk, &c) in numer.poly_coeffs() {
        dense[kk as usize] = c;
    }
    let roots = polynomial_roots(&dense);
    let mut inside: Vec<C64> = roots.into_iter().filter(|r| k.clearance(*r) >= -1e-9).collect();
    inside.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    // cluster within 1e-8
    let mut out: Vec<(C64, usize)> = vec![];
    for r in inside {
        if let Some(last) = out.last_mut() {
            if (last.0 - r).norm() < 1e-8 {
                last.1 += 1;
                continue;
            }
        }
        out.push((r, 1));
    }
    Ok(out)
}

/// Minimal-degree Hermite interpolant with eta vanishing to the given
/// order at each `jet_kill` point and eta'(p) = 1 or 0 at the flagged
/// immersion points. Zero polynomial when there are no conditions.
pub fn build_eta(
    imm_points: &[(C64, bool)],
    jet_kill: &[(C64, usize)],
) -> Result<LaurentPoly, ApproxError> {
    let mut rows: Vec<(C64, usize, C64)> = vec![];
    for (p, ord) in jet_kill {
        for kk in 0..=*ord {
            rows.push((*p, kk, C64::new(0.0, 0.0)));
        }
    }
    for (p, flag) in imm_points {
        rows.push((*p, 1, C64::new(if *flag { 1.0 } else { 0.0 }, 0.0)));
    }
    if rows.is_empty() {
        return Ok(LaurentPoly::zero());
    }
    let nrows = rows.len();
    for extra in 0..=8usize {
        let basis = LaurentBasis::polynomial((nrows + extra - 1) as u32);
        let mat: Vec<Vec<C64>> =
            rows.iter().map(|(p, k, _)| basis.derivative_row(*p, *k)).collect();
        let rhs: Vec<C64> = rows.iter().map(|(_, _, v)| *v).collect();
        let sol = lstsq_min_norm(&dmatrix_from_rows(&mat), &dvector(&rhs), 1e-12);
        if sol.residual <= 1e-11 {
            return Ok(basis.combine(sol.x.as_slice()));
        }
    }
    Err(ApproxError::InfeasibleConstraints { residual: f64::NAN })
}

/// x_1 + δ eta with eta killing the common critical points of (x_1, y_1)
/// on `k`; δ is the largest ladder value that keeps the pair immersive on
/// a 200 x 200 grid while changing x_1 by at most `budget` in sup norm.
pub fn immersion_fix(
    x1: &LaurentPoly,
    y1: &LaurentPoly,
    k: &CompactSet,
    protect: &[(C64, usize)],
    budget: f64,
) -> Result<(LaurentPoly, f64), ApproxError> {
    let x1p = x1.differentiate();
    let y1p = y1.differentiate();
    // protected critical points of both components violate the hypothesis
    for (p, ord) in protect {
        if *ord >= 1 {
            let dx = x1p.evaluate(*p)?.norm();
            let dy = y1p.evaluate(*p)?.norm();
            if dx < 1e-12 && dy < 1e-12 {
                return Err(ApproxError::NoValidDelta);
            }
        }
    }
    let zeros = zeros_of_derivative(y1, k)?;
    let zprime: Vec<(C64, bool)> = zeros
        .iter()
        .filter(|(z, _)| !protect.iter().any(|(p, _)| (p - z).norm() < 1e-8))
        .map(|(z, _)| {
            let need = x1p.evaluate(*z).map(|v| v.norm() < 1e-9).unwrap_or(false);
            (*z, need)
        })
        .collect();

    let grid = k.grid(200);
    let immersed = |cand_p: &LaurentPoly| -> Result<bool, ApproxError> {
        for p in &grid {
            let dx = cand_p.evaluate(*p)?.norm();
            let dy = y1p.evaluate(*p)?.norm();
            if dx.max(dy) <= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    };

    if zprime.iter().all(|(_, need)| !need) {
        // nothing to fix: eta = 0 satisfies every condition
        if immersed(&x1p)? {
            return Ok((x1.clone(), 0.0));
        }
    }
    let eta = build_eta(&zprime, protect)?;
    if eta.is_zero() {
        if immersed(&x1p)? {
            return Ok((x1.clone(), 0.0));
        }
        return Err(ApproxError::NoValidDelta);
    }
    let eta_sup = grid
        .iter()
        .map(|p| eta.evaluate(*p).map(|v| v.norm()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    for e in 2..=8 {
        let delta = 10f64.powi(-e);
        if delta * eta_sup > budget {
            continue;
        }
        let cand = x1.add(&eta.scale(C64::new(delta, 0.0)));
        let cand_p = cand.differentiate();
        if immersed(&cand_p)? {
            return Ok((cand, delta));
        }
    }
    Err(ApproxError::NoValidDelta)
}

/// w(ζ) = A ((ζ-c)/r)^N with sup |w| <= small_tol on the inner compact and
/// min |w| >= large_target on the outer boundary circle.
pub fn boundary_bump(
    k_inner: &CompactSet,
    k_outer: &CompactSet,
    small_tol: f64,
    large_target: f64,
) -> Result<LaurentPoly, ApproxError> {
    if large_target <= 0.0 {
        return Ok(LaurentPoly::zero());
    }
    assert!(small_tol > 0.0);
    let c = k_outer.center();
    let r_out = k_outer.radius;
    let r_in = (k_inner.center() - c).norm() + k_inner.radius;
    if r_out / r_in < 1.01 {
        return Err(ApproxError::NoSeparation);
    }
    let a = large_target;
    let n = ((small_tol / a).ln() / (r_in / r_out).ln()).ceil().max(1.0);
    if n > (1u64 << 20) as f64 {
        return Err(ApproxError::NoSeparation);
    }
    let n = n as u32;
    // coefficient blowup guard for off-center expansions
    if c.norm() > 1e-12 && ((c.norm() + r_out) / r_out).powi(n as i32) > 1e12 {
        return Err(ApproxError::NoSeparation);
    }
    let scaled = LaurentPoly::from_coeffs(&[
        -c / r_out,
        C64::new(1.0 / r_out, 0.0),
    ]);
    let w = scaled.pow(n)?.scale(C64::new(a, 0.0));
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AdmissibleSet;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disk_samples(n: usize) -> Vec<C64> {
        CompactSet::disk(c(0.0, 0.0), 1.0).spiral_samples(n as f64 / std::f64::consts::PI)
    }

    #[test]
    fn fits_exp_with_exact_jet() {
        let samples: Vec<(C64, C64)> =
            disk_samples(200).into_iter().map(|p| (p, p.exp())).collect();
        let jets = [JetRows { p: c(0.0, 0.0), values: vec![c(1.0, 0.0), c(1.0, 0.0)] }];
        let basis = LaurentBasis::polynomial(16);
        let (f, report) = mergelyan_jets(&samples, &jets, &basis).unwrap();
        assert!(report.sup_error <= 1e-6, "sup error {}", report.sup_error);
        let j = f.jet_at(c(0.0, 0.0), 1).unwrap();
        assert!((j[0] - c(1.0, 0.0)).norm() < 1e-11);
        assert!((j[1] - c(1.0, 0.0)).norm() < 1e-11);
    }

    #[test]
    fn recovers_basis_element_exactly() {
        let centers = [c(0.0, 0.0)];
        let target = LaurentPoly::pole_term(&centers, 0, -2, c(1.5, 0.5));
        let pts: Vec<C64> = (0..64)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                C64::new(0.0, th).exp() * 1.5
            })
            .collect();
        let samples: Vec<(C64, C64)> =
            pts.into_iter().map(|p| (p, target.evaluate(p).unwrap())).collect();
        let basis = LaurentBasis::new(&centers, 3, vec![3]);
        let (f, report) = mergelyan_jets(&samples, &[], &basis).unwrap();
        assert!(report.sup_error <= 1e-12);
        assert!(f.sub(&target).max_coeff() < 1e-12);
    }

    #[test]
    fn basis_too_small_detected() {
        // 3 jets of 3 rows each = 9 rows vs dimension 5
        let jets: Vec<JetRows> = [0.0f64, 0.4, 0.8]
            .iter()
            .map(|t| JetRows {
                p: c(*t, 0.0),
                values: vec![c(1.0, 0.0); 3],
            })
            .collect();
        let basis = LaurentBasis::polynomial(4);
        let r = mergelyan_jets(&[], &jets, &basis);
        assert!(matches!(r, Err(ApproxError::BasisTooSmall { rows: 9, dim: 5 })));
    }

    #[test]
    fn escalating_degree_never_hurts() {
        let samples: Vec<(C64, C64)> =
            disk_samples(200).into_iter().map(|p| (p, p.exp())).collect();
        let mut last = f64::INFINITY;
        for deg in [4u32, 8, 16, 32] {
            let basis = LaurentBasis::polynomial(deg);
            let (_, report) = mergelyan_jets(&samples, &[], &basis).unwrap();
            assert!(report.sup_error <= last * (1.0 + 1e-9) + 1e-14);
            last = report.sup_error;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn make_nonconstant_examples() {
        let s = AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 1.0));
        let f = LaurentPoly::monomial(1, c(1.0, 0.0));
        assert_eq!(make_nonconstant(&f, &s), f);

        let g = LaurentPoly::constant(c(5.0, 0.0));
        let fixed = make_nonconstant(&g, &s);
        assert!(fixed.is_nonconstant(1e-10));
        let change = fixed.sub(&g);
        for p in crate::geometry::sample_set(&s, 40.0) {
            assert!(change.evaluate(p).unwrap().norm() <= 1e-5);
        }

        let z = LaurentPoly::zero();
        assert!(make_nonconstant(&z, &s).is_nonconstant(1e-10));
    }

    #[test]
    fn zeros_of_derivative_examples() {
        let k = CompactSet::disk(c(0.0, 0.0), 1.0);
        let z2 = LaurentPoly::monomial(2, c(1.0, 0.0));
        let zeros = zeros_of_derivative(&z2, &k).unwrap();
        assert_eq!(zeros.len(), 1);
        assert!(zeros[0].0.norm() < 1e-10);
        assert_eq!(zeros[0].1, 1);

        let z1 = LaurentPoly::monomial(1, c(1.0, 0.0));
        assert!(zeros_of_derivative(&z1, &k).unwrap().is_empty());

        let z3 = LaurentPoly::monomial(3, c(1.0, 0.0));
        let zeros = zeros_of_derivative(&z3, &k).unwrap();
        assert_eq!(zeros.len(), 1);
        assert_eq!(zeros[0].1, 2);

        assert!(matches!(
            zeros_of_derivative(&LaurentPoly::constant(c(2.0, 0.0)), &k),
            Err(ApproxError::ConstantDerivative)
        ));
    }

    #[test]
    fn zeros_with_poles_cleared() {
        // f = ζ + 1/ζ, f' = 1 - 1/ζ² zeros at ±1
        let centers = [c(0.0, 0.0)];
        let f = LaurentPoly::monomial(1, c(1.0, 0.0))
            .with_centers(&centers)
            .add(&LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0)));
        let k = CompactSet::disk(c(0.0, 0.0), 2.0);
        let zeros = zeros_of_derivative(&f, &k).unwrap();
        assert_eq!(zeros.len(), 2);
        assert!((zeros[0].0 - c(-1.0, 0.0)).norm() < 1e-10);
        assert!((zeros[1].0 - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn build_eta_examples() {
        let eta = build_eta(&[(c(1.0, 0.0), true)], &[(c(0.0, 0.0), 2)]).unwrap();
        let j0 = eta.jet_at(c(0.0, 0.0), 2).unwrap();
        for v in &j0 {
            assert!(v.norm() < 1e-11);
        }
        let j1 = eta.jet_at(c(1.0, 0.0), 1).unwrap();
        assert!((j1[1] - c(1.0, 0.0)).norm() < 1e-11);

        assert!(build_eta(&[], &[]).unwrap().is_zero());

        let r = build_eta(&[(c(0.0, 0.0), true)], &[(c(0.0, 0.0), 1)]);
        assert!(matches!(r, Err(ApproxError::InfeasibleConstraints { .. })));
    }

    #[test]
    fn eta_zero_iff_no_conditions() {
        // all-zero conditions give the zero polynomial through the min-norm solve
        let eta = build_eta(&[(c(0.5, 0.0), false)], &[(c(0.0, 0.0), 1)]).unwrap();
        assert!(eta.max_coeff() < 1e-13);
        assert!(build_eta(&[], &[]).unwrap().is_zero());
    }

    #[test]
    fn immersion_fix_examples() {
        let k = CompactSet::disk(c(0.0, 0.0), 1.0);
        let z2 = LaurentPoly::monomial(2, c(1.0, 0.0));
        let (fixed, delta) = immersion_fix(&z2, &z2, &k, &[], 0.5).unwrap();
        assert!(delta > 0.0);
        let fp = fixed.differentiate();
        let yp = z2.differentiate();
        for p in k.grid(100) {
            let m = fp.evaluate(p).unwrap().norm().max(yp.evaluate(p).unwrap().norm());
            assert!(m > 0.0);
        }

        let z1 = LaurentPoly::monomial(1, c(1.0, 0.0));
        let (same, delta) = immersion_fix(&z1, &z1, &k, &[], 0.5).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(same, z1);

        // protected common critical point: hypothesis violated
        let r = immersion_fix(&z2, &z2, &k, &[(c(0.0, 0.0), 1)], 0.5);
        assert!(matches!(r, Err(ApproxError::NoValidDelta)));
    }

    #[test]
    fn boundary_bump_examples() {
        let inner = CompactSet::disk(c(0.0, 0.0), 0.4);
        let outer = CompactSet::disk(c(0.0, 0.0), 1.0);
        let w = boundary_bump(&inner, &outer, 1e-4, 10.0).unwrap();
        for p in inner.boundary_samples(256) {
            assert!(w.evaluate(p).unwrap().norm() <= 1e-4);
        }
        for p in outer.outer_boundary_samples(256) {
            assert!(w.evaluate(p).unwrap().norm() >= 10.0 * (1.0 - 1e-12));
        }

        let near = CompactSet::disk(c(0.0, 0.0), 0.999);
        assert!(matches!(
            boundary_bump(&near, &outer, 1e-4, 10.0),
            Err(ApproxError::NoSeparation)
        ));

        assert!(boundary_bump(&inner, &outer, 1e-4, 0.0).unwrap().is_zero());
    }

    #[test]
    fn polynomial_roots_basic() {
        // (ζ-1)(ζ-i)(ζ+2) = ζ³ + (1-i)ζ² + (-2-i)... build by multiplication
        let p = LaurentPoly::from_coeffs(&[c(-1.0, 0.0), c(1.0, 0.0)])
            .mul(&LaurentPoly::from_coeffs(&[c(0.0, -1.0), c(1.0, 0.0)]))
            .unwrap()
            .mul(&LaurentPoly::from_coeffs(&[c(2.0, 0.0), c(1.0, 0.0)]))
            .unwrap();
        let deg = p.poly_degree().unwrap();
        let mut dense = vec![c(0.0, 0.0); deg as usize + 1];
        for (&k, &v) in p.poly_coeffs() {
            dense[k as usize] = v;
        }
        let mut roots = polynomial_roots(&dense);
        roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_eq!(roots.len(), 3);
        assert!((roots[0] - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((roots[1] - c(0.0, 1.0)).norm() < 1e-10);
        assert!((roots[2] - c(1.0, 0.0)).norm() < 1e-10);
    }
}
