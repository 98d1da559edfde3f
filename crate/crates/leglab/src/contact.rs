//! The standard contact structure on C^{2n+1} and Legendrian curves.
//!
//! A curve (x_1..x_n, y_1..y_n, z) is Legendrian when the pullback of
//! dz + Σ x_i dy_i vanishes identically; on Laurent components this is a
//! coefficient-level identity and `verify_legendrian` measures it. Jets are
//! stored as derivative values, with z-jets of order >= 1 determined from
//! the x,y jets through the Leibniz rule for z' = -Σ x_i y_i'.

use crate::geometry::CircularDomain;
use crate::laurent::{LaurentError, LaurentPoly, OneForm};
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residual gate for curves accepted as input.
pub const RESIDUAL_ACCEPT: f64 = 1e-9;
/// Residual gate for curves produced by symbolic constructors.
pub const RESIDUAL_EXACT: f64 = 1e-12;
/// Leibniz-compatibility gate for jets.
pub const JET_COMPAT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ContactError {
    #[error("curve is not Legendrian: residual coefficient {residual:.3e}")]
    NotLegendrian { residual: f64 },
    #[error("jets disagree in base point, order, or dimension")]
    MismatchedJets,
    #[error("z-jets violate the Legendrian reconstruction by {defect:.3e}")]
    IncompatibleJets { defect: f64 },
    #[error("c1 index must satisfy 2 <= j <= n")]
    BadIsoIndex,
    #[error(transparent)]
    Laurent(#[from] LaurentError),
}

/// The contact form dz + x_1 dy_1 + ... + x_n dy_n on C^{2n+1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactForm {
    pub n: usize,
}

impl ContactForm {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        ContactForm { n }
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.n + 1
    }
}

/// A holomorphic curve in C^{2n+1} with Laurent components sharing the
/// domain's pole centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendrianCurve {
    pub n: usize,
    pub x: Vec<LaurentPoly>,
    pub y: Vec<LaurentPoly>,
    pub z: LaurentPoly,
    pub domain: CircularDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegendrianReport {
    pub max_residual_coeff: f64,
    pub pass: bool,
}

impl LegendrianCurve {
    /// Accepts the curve when its residual one-form stays within 1e-9.
    pub fn new(
        n: usize,
        x: Vec<LaurentPoly>,
        y: Vec<LaurentPoly>,
        z: LaurentPoly,
        domain: CircularDomain,
    ) -> Result<Self, ContactError> {
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        let c = LegendrianCurve { n, x, y, z, domain };
        let report = verify_legendrian(&c)?;
        if !report.pass {
            return Err(ContactError::NotLegendrian { residual: report.max_residual_coeff });
        }
        Ok(c)
    }

    /// No residual gate; for staging intermediate data.
    pub fn new_unchecked(
        n: usize,
        x: Vec<LaurentPoly>,
        y: Vec<LaurentPoly>,
        z: LaurentPoly,
        domain: CircularDomain,
    ) -> Self {
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        LegendrianCurve { n, x, y, z, domain }
    }

    /// dz + Σ x_i dy_i as a one-form.
    pub fn residual_form(&self) -> Result<OneForm, LaurentError> {
        let mut form = OneForm::d(&self.z);
        for i in 0..self.n {
            form = form.add(&OneForm::x_dy(&self.x[i], &self.y[i])?);
        }
        Ok(form)
    }

    /// All components evaluated at `p`, ordered x_1..x_n, y_1..y_n, z.
    pub fn eval_point(&self, p: C64) -> Result<Vec<C64>, LaurentError> {
        let mut out = Vec::with_capacity(2 * self.n + 1);
        for f in self.x.iter().chain(self.y.iter()) {
            out.push(f.evaluate(p)?);
        }
        out.push(self.z.evaluate(p)?);
        Ok(out)
    }

    /// Component list in the same order as `eval_point`.
    pub fn components(&self) -> Vec<&LaurentPoly> {
        self.x.iter().chain(self.y.iter()).chain(std::iter::once(&self.z)).collect()
    }
}

/// Computes dz + Σ x_i dy_i symbolically; passes iff every coefficient
/// stays within 1e-9.
pub fn verify_legendrian(c: &LegendrianCurve) -> Result<LegendrianReport, LaurentError> {
    let residual = c.residual_form()?.max_coeff();
    Ok(LegendrianReport { max_residual_coeff: residual, pass: residual <= RESIDUAL_ACCEPT })
}

/// Derivative values of all components at a point, orders 0..=m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetSpec {
    pub p: [f64; 2],
    pub m: usize,
    /// x-jets, n rows of m+1 derivative values each, as [re, im]
    pub x: Vec<Vec<[f64; 2]>>,
    pub y: Vec<Vec<[f64; 2]>>,
    pub z: Vec<[f64; 2]>,
}

fn into_pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pair(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

impl JetSpec {
    pub fn new(
        p: C64,
        m: usize,
        x_jets: Vec<Vec<C64>>,
        y_jets: Vec<Vec<C64>>,
        z_jets: Vec<C64>,
    ) -> Result<Self, ContactError> {
        let spec = JetSpec {
            p: [p.re, p.im],
            m,
            x: x_jets.iter().map(|r| into_pairs(r)).collect(),
            y: y_jets.iter().map(|r| into_pairs(r)).collect(),
            z: into_pairs(&z_jets),
        };
        let defect = spec.compatibility_defect();
        if defect > JET_COMPAT_TOL {
            return Err(ContactError::IncompatibleJets { defect });
        }
        Ok(spec)
    }

    pub fn point(&self) -> C64 {
        C64::new(self.p[0], self.p[1])
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x_jet(&self, i: usize, k: usize) -> C64 {
        from_pair(self.x[i][k])
    }

    pub fn y_jet(&self, i: usize, k: usize) -> C64 {
        from_pair(self.y[i][k])
    }

    pub fn z_jet(&self, k: usize) -> C64 {
        from_pair(self.z[k])
    }

    /// z^(k)(p) for k >= 1 reconstructed from the x,y jets:
    /// z^(k) = -Σ_i Σ_{l<=k-1} C(k-1,l) x_i^(l) y_i^(k-l).
    pub fn reconstruct_z_derivative(&self, k: usize) -> C64 {
        assert!(k >= 1 && k <= self.m);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.n() {
            for l in 0..=(k - 1) {
                acc += self.x_jet(i, l) * self.y_jet(i, k - l) * binom(k - 1, l);
            }
        }
        -acc
    }

    /// Largest deviation of the stored z-jets (orders >= 1) from the
    /// Leibniz reconstruction. Order 0 is a free integration constant.
    pub fn compatibility_defect(&self) -> f64 {
        (1..=self.m)
            .map(|k| (self.z_jet(k) - self.reconstruct_z_derivative(k)).norm())
            .fold(0.0, f64::max)
    }

    /// All 2n+1 component values (order 0 entries).
    pub fn value(&self) -> Vec<C64> {
        let mut out: Vec<C64> = (0..self.n()).map(|i| self.x_jet(i, 0)).collect();
        out.extend((0..self.n()).map(|i| self.y_jet(i, 0)));
        out.push(self.z_jet(0));
        out
    }

    /// All 2n+1 first-derivative entries; zero vector when m = 0.
    pub fn derivative(&self) -> Vec<C64> {
        if self.m == 0 {
            return vec![C64::new(0.0, 0.0); 2 * self.n() + 1];
        }
        let mut out: Vec<C64> = (0..self.n()).map(|i| self.x_jet(i, 1)).collect();
        out.extend((0..self.n()).map(|i| self.y_jet(i, 1)));
        out.push(self.z_jet(1));
        out
    }
}

/// Jets of all components of `c` at `p`, orders 0..=m.
pub fn jet_of_curve(c: &LegendrianCurve, p: C64, m: usize) -> Result<JetSpec, ContactError> {
    let x_jets: Result<Vec<_>, _> = c.x.iter().map(|f| f.jet_at(p, m)).collect();
    let y_jets: Result<Vec<_>, _> = c.y.iter().map(|f| f.jet_at(p, m)).collect();
    let z_jets = c.z.jet_at(p, m)?;
    JetSpec::new(p, m, x_jets?, y_jets?, z_jets)
}

/// Max over components and orders of the entry-wise jet difference.
pub fn jet_distance(a: &JetSpec, b: &JetSpec) -> Result<f64, ContactError> {
    if a.m != b.m || a.n() != b.n() || (a.point() - b.point()).norm() > 1e-12 {
        return Err(ContactError::MismatchedJets);
    }
    let mut d: f64 = 0.0;
    for k in 0..=a.m {
        for i in 0..a.n() {
            d = d.max((a.x_jet(i, k) - b.x_jet(i, k)).norm());
            d = d.max((a.y_jet(i, k) - b.y_jet(i, k)).norm());
        }
        d = d.max((a.z_jet(k) - b.z_jet(k)).norm());
    }
    Ok(d)
}

/// Coordinate contactomorphisms preserving the set of Legendrian curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactIso {
    /// Swap of coordinate pairs (x_1, y_1) <-> (x_j, y_j); an involution.
    C1 { j: usize },
    /// (x_1, y_1, z) -> (-y_1, x_1, z + x_1 y_1); order four, exchanges the
    /// roles of x_1 and y_1.
    C2,
}

/// Applies the contactomorphism to a curve. The residual one-form of the
/// image equals the residual of the input coefficient for coefficient, so
/// the Legendrian verdict is preserved.
pub fn apply_iso(iso: ContactIso, c: &LegendrianCurve) -> Result<LegendrianCurve, ContactError> {
    match iso {
        ContactIso::C1 { j } => {
            if j < 2 || j > c.n {
                return Err(ContactError::BadIsoIndex);
            }
            let mut x = c.x.clone();
            let mut y = c.y.clone();
            x.swap(0, j - 1);
            y.swap(0, j - 1);
            Ok(LegendrianCurve::new_unchecked(c.n, x, y, c.z.clone(), c.domain.clone()))
        }
        ContactIso::C2 => {
            let mut x = c.x.clone();
            let mut y = c.y.clone();
            let x1y1 = c.x[0].mul(&c.y[0])?;
            x[0] = c.y[0].neg();
            y[0] = c.x[0].clone();
            let z = c.z.add(&x1y1);
            Ok(LegendrianCurve::new_unchecked(c.n, x, y, z, c.domain.clone()))
        }
    }
}

/// Inverse of `apply_iso`; for C2 this is (X, Y, Z) -> (Y, -X, Z + X Y).
pub fn apply_iso_inverse(
    iso: ContactIso,
    c: &LegendrianCurve,
) -> Result<LegendrianCurve, ContactError> {
    match iso {
        ContactIso::C1 { .. } => apply_iso(iso, c),
        ContactIso::C2 => {
            let mut x = c.x.clone();
            let mut y = c.y.clone();
            let xy = c.x[0].mul(&c.y[0])?;
            x[0] = c.y[0].clone();
            y[0] = c.x[0].neg();
            let z = c.z.add(&xy);
            Ok(LegendrianCurve::new_unchecked(c.n, x, y, z, c.domain.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::primitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn plane() -> CircularDomain {
        CircularDomain::plane(vec![]).unwrap()
    }

    fn zeta() -> LaurentPoly {
        LaurentPoly::monomial(1, c(1.0, 0.0))
    }

    /// (ζ, ζ, -ζ²/2)
    fn parabola() -> LegendrianCurve {
        let z = LaurentPoly::monomial(2, c(-0.5, 0.0));
        LegendrianCurve::new(1, vec![zeta()], vec![zeta()], z, plane()).unwrap()
    }

    #[test]
    fn verify_examples() {
        let r = verify_legendrian(&parabola()).unwrap();
        assert!(r.pass);
        assert!(r.max_residual_coeff < 1e-15);

        let consts = LegendrianCurve::new_unchecked(
            1,
            vec![LaurentPoly::constant(c(1.0, 0.0))],
            vec![LaurentPoly::constant(c(2.0, 0.0))],
            LaurentPoly::constant(c(3.0, 0.0)),
            plane(),
        );
        assert!(verify_legendrian(&consts).unwrap().pass);

        let bad = LegendrianCurve::new_unchecked(
            1,
            vec![zeta()],
            vec![zeta()],
            LaurentPoly::zero(),
            plane(),
        );
        let r = verify_legendrian(&bad).unwrap();
        assert!(!r.pass);
        assert!((r.max_residual_coeff - 1.0).abs() < 1e-15);
    }

    #[test]
    fn c2_preserves_residual_and_matches_algebra() {
        let g = apply_iso(ContactIso::C2, &parabola()).unwrap();
        let r = verify_legendrian(&g).unwrap();
        assert!(r.pass && r.max_residual_coeff < 1e-14);
        // z-component becomes ζ²/2
        assert!((g.z.evaluate(c(2.0, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-13);
        // round trip
        let back = apply_iso_inverse(ContactIso::C2, &g).unwrap();
        assert!(back.z.sub(&parabola().z).max_coeff() < 1e-14);
        assert_eq!(back.x[0], parabola().x[0]);
        assert_eq!(back.y[0], parabola().y[0]);
    }

    #[test]
    fn c1_is_involution_bit_exact() {
        // n = 2 curve: (x1,y1) = (ζ, ζ), (x2,y2) = (2ζ, ζ²); z from integration
        let x = vec![zeta(), zeta().scale(c(2.0, 0.0))];
        let y = vec![zeta(), zeta().mul(&zeta()).unwrap()];
        let mut form = OneForm::x_dy(&x[0], &y[0]).unwrap();
        form = form.add(&OneForm::x_dy(&x[1], &y[1]).unwrap());
        let z = primitive(&form).unwrap().neg();
        let curve = LegendrianCurve::new(2, x, y, z, plane()).unwrap();

        let once = apply_iso(ContactIso::C1 { j: 2 }, &curve).unwrap();
        assert!(verify_legendrian(&once).unwrap().pass);
        let twice = apply_iso(ContactIso::C1 { j: 2 }, &once).unwrap();
        assert_eq!(curve, twice);
    }

    #[test]
    fn c2_on_constants() {
        let consts = LegendrianCurve::new_unchecked(
            1,
            vec![LaurentPoly::constant(c(1.0, 0.0))],
            vec![LaurentPoly::constant(c(2.0, 0.0))],
            LaurentPoly::constant(c(3.0, 0.0)),
            plane(),
        );
        let g = apply_iso(ContactIso::C2, &consts).unwrap();
        assert!((g.x[0].evaluate(c(0.0, 0.0)).unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
        assert!((g.y[0].evaluate(c(0.0, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((g.z.evaluate(c(0.0, 0.0)).unwrap() - c(5.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn jet_of_curve_examples() {
        let j = jet_of_curve(&parabola(), c(0.0, 0.0), 1).unwrap();
        assert!((j.x_jet(0, 0)).norm() < 1e-15);
        assert!((j.x_jet(0, 1) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((j.z_jet(0)).norm() < 1e-15);
        assert!((j.z_jet(1)).norm() < 1e-15);

        let j = jet_of_curve(&parabola(), c(1.0, 0.0), 2).unwrap();
        assert!((j.z_jet(0) - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((j.z_jet(1) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((j.z_jet(2) - c(-1.0, 0.0)).norm() < 1e-15);

        let consts = LegendrianCurve::new_unchecked(
            1,
            vec![LaurentPoly::constant(c(1.0, 0.0))],
            vec![LaurentPoly::constant(c(2.0, 0.0))],
            LaurentPoly::constant(c(3.0, 0.0)),
            plane(),
        );
        let j = jet_of_curve(&consts, c(0.3, 0.1), 2).unwrap();
        for k in 1..=2 {
            assert!(j.x_jet(0, k).norm() < 1e-15);
            assert!(j.y_jet(0, k).norm() < 1e-15);
            assert!(j.z_jet(k).norm() < 1e-15);
        }
    }

    #[test]
    fn jet_distance_examples() {
        let a = jet_of_curve(&parabola(), c(0.0, 0.0), 1).unwrap();
        assert_eq!(jet_distance(&a, &a).unwrap(), 0.0);

        let mut b = a.clone();
        b.z[0] = [1.0, 0.0];
        assert!((jet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);

        let c2 = jet_of_curve(&parabola(), c(0.0, 0.0), 2).unwrap();
        assert!(matches!(jet_distance(&a, &c2), Err(ContactError::MismatchedJets)));
    }

    #[test]
    fn max_norm_examples() {
        assert!((crate::max_norm(&[c(3.0, 4.0), c(0.0, 0.0), c(0.0, 0.0)]) - 5.0).abs() < 1e-15);
        assert_eq!(crate::max_norm(&[c(0.0, 0.0); 3]), 0.0);
        assert!((crate::max_norm(&[c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn jetspec_rejects_incompatible_z() {
        // x = y = ζ at p = 1: z' must be -x y' = -1
        let r = JetSpec::new(
            c(1.0, 0.0),
            1,
            vec![vec![c(1.0, 0.0), c(1.0, 0.0)]],
            vec![vec![c(1.0, 0.0), c(1.0, 0.0)]],
            vec![c(0.0, 0.0), c(5.0, 0.0)],
        );
        assert!(matches!(r, Err(ContactError::IncompatibleJets { .. })));
        let ok = JetSpec::new(
            c(1.0, 0.0),
            1,
            vec![vec![c(1.0, 0.0), c(1.0, 0.0)]],
            vec![vec![c(1.0, 0.0), c(1.0, 0.0)]],
            vec![c(0.0, 0.0), c(-1.0, 0.0)],
        );
        assert!(ok.is_ok());
    }

    /// Random polynomial Legendrian curve on the plane.
    fn random_legendrian(seed: u64, n: usize) -> LegendrianCurve {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rnd_poly = |deg: u32| {
            let mut p = LaurentPoly::zero();
            for k in 0..=deg {
                p = p.add(&LaurentPoly::monomial(
                    k,
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                ));
            }
            p
        };
        let x: Vec<_> = (0..n).map(|_| rnd_poly(3)).collect();
        let y: Vec<_> = (0..n).map(|_| rnd_poly(3)).collect();
        let mut form = OneForm::zero();
        for i in 0..n {
            form = form.add(&OneForm::x_dy(&x[i], &y[i]).unwrap());
        }
        let z = primitive(&form).unwrap().neg();
        LegendrianCurve::new(n, x, y, z, plane()).unwrap()
    }

    #[test]
    fn c2_preserves_verdict_on_random_curves() {
        for seed in 0..20 {
            let good = random_legendrian(seed, 2);
            let img = apply_iso(ContactIso::C2, &good).unwrap();
            assert!(verify_legendrian(&img).unwrap().pass);

            // break it and check the verdict stays broken
            let mut bad = good.clone();
            bad.z = bad.z.add(&LaurentPoly::monomial(1, c(1e-3, 0.0)));
            assert!(!verify_legendrian(&bad).unwrap().pass);
            let img = apply_iso(ContactIso::C2, &bad).unwrap();
            assert!(!verify_legendrian(&img).unwrap().pass);
        }
    }

    #[test]
    fn jets_of_random_curves_are_self_consistent() {
        for seed in 0..10 {
            let curve = random_legendrian(seed, 1);
            let j = jet_of_curve(&curve, c(0.4, -0.2), 3).unwrap();
            assert!(j.compatibility_defect() <= JET_COMPAT_TOL);
        }
    }
}
