//! Self-contained certificate recomputation for serialized curves, plus
//! the CSV sampling format.

use crate::contact::{jet_distance, jet_of_curve, verify_legendrian, JetSpec, LegendrianCurve};
use crate::geometry::Arc;
use crate::laurent::{LaurentError, OneForm};
use crate::C64;
use serde::{Deserialize, Serialize};

/// A curve together with the jets it claims to interpolate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveBundle {
    pub curve: LegendrianCurve,
    #[serde(default)]
    pub jets: Vec<JetSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub legendrian_residual: f64,
    pub residual_pass: bool,
    /// 2 pi |residue| of Σ x_i dy_i at each hole center
    pub period_norms: Vec<f64>,
    pub period_pass: bool,
    pub jet_distances: Vec<f64>,
    pub jet_pass: bool,
    pub max_norm_at_zero: f64,
    pub pass: bool,
}

/// Recomputes every certificate from the curve alone.
pub fn verify_bundle(bundle: &CurveBundle) -> Result<VerifyReport, crate::contact::ContactError> {
    let curve = &bundle.curve;
    let report = verify_legendrian(curve)?;

    let mut form = OneForm::zero();
    for i in 0..curve.n {
        form = form.add(&OneForm::x_dy(&curve.x[i], &curve.y[i])?);
    }
    let mut period_norms = vec![];
    for (i, _) in curve.domain.holes.iter().enumerate() {
        let idx = form.coeff.center_index(curve.domain.holes[i].center());
        let res = idx.map(|k| form.coeff.residue_at(k)).unwrap_or(C64::new(0.0, 0.0));
        period_norms.push(2.0 * std::f64::consts::PI * res.norm());
    }
    let period_pass = period_norms.iter().all(|&p| p <= 1e-9);

    let mut jet_distances = vec![];
    for jet in &bundle.jets {
        // a curve too broken for jet reconstruction fails the certificate
        // rather than erroring out of the report
        let d = jet_of_curve(curve, jet.point(), jet.m)
            .and_then(|got| jet_distance(&got, jet))
            .unwrap_or(f64::INFINITY);
        jet_distances.push(d);
    }
    let jet_pass = jet_distances.iter().all(|&d| d <= 1e-9);

    let max_norm_at_zero = curve
        .eval_point(C64::new(0.0, 0.0))
        .map(|v| crate::max_norm(&v))
        .unwrap_or(f64::NAN);

    Ok(VerifyReport {
        legendrian_residual: report.max_residual_coeff,
        residual_pass: report.pass,
        period_pass,
        period_norms,
        jet_pass,
        jet_distances,
        max_norm_at_zero,
        pass: report.pass && period_pass && jet_pass,
    })
}

/// CSV rows `t_index,component_index,re,im` sampling the curve along an arc.
pub fn curve_csv(
    curve: &LegendrianCurve,
    arc: &Arc,
    points: usize,
) -> Result<String, LaurentError> {
    let mut out = String::from("t_index,component_index,re,im\n");
    for (ti, p) in arc.samples(points).iter().enumerate() {
        let values = curve.eval_point(*p)?;
        for (ci, v) in values.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", ti, ci, v.re, v.im));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CircularDomain;
    use crate::laurent::LaurentPoly;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn parabola() -> LegendrianCurve {
        LegendrianCurve::new(
            1,
            vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
            vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
            LaurentPoly::monomial(2, c(-0.5, 0.0)),
            CircularDomain::plane(vec![]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bundle_verifies_and_round_trips() {
        let jet = jet_of_curve(&parabola(), c(0.3, 0.1), 2).unwrap();
        let bundle = CurveBundle { curve: parabola(), jets: vec![jet] };
        let report = verify_bundle(&bundle).unwrap();
        assert!(report.pass);

        let s = serde_json::to_string(&bundle).unwrap();
        let back: CurveBundle = serde_json::from_str(&s).unwrap();
        assert_eq!(back.curve, bundle.curve);
        let report2 = verify_bundle(&back).unwrap();
        assert_eq!(report.legendrian_residual, report2.legendrian_residual);
    }

    #[test]
    fn broken_curve_fails() {
        let mut curve = parabola();
        curve.z = LaurentPoly::zero();
        let bundle = CurveBundle { curve, jets: vec![] };
        let report = verify_bundle(&bundle).unwrap();
        assert!(!report.pass);
        assert!(report.legendrian_residual > 0.5);
    }

    #[test]
    fn csv_shape() {
        let arc = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let csv = curve_csv(&parabola(), &arc, 8).unwrap();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines.len(), 1 + 8 * 3);
        assert_eq!(lines[0], "t_index,component_index,re,im");
    }
}
