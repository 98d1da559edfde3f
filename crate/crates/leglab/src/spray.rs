//! Correction functions, the extended period map, and the spray solves.
//!
//! The additive spray x̃_1 = x_1 + Σ ζ_j g_j + Σ ξ_p h_p turns period
//! killing and z-value interpolation into one affine solve: the g_j are
//! built so their cycle integrals against dy_1 form the identity block,
//! the h_p do the same on the arcs, and everything is jet-killed at the
//! interpolation points so the spray cannot disturb matched jets. The
//! multiplicative variant x_1 exp(...) keeps the zero set of x_1 fixed and
//! is solved by a damped Newton iteration on quadrature evaluations.

use crate::approx::{ApproxError, LaurentBasis};
use crate::contact::ContactError;
use crate::geometry::{Arc, Cycle, GeometryError};
use crate::laurent::{arc_integral, contour_integral, LaurentError, LaurentPoly, OneForm};
use crate::linalg::{dmatrix_from_rows, dvector, inf_norm, lstsq_min_norm};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quadrature tolerance for arc rows of the period map.
pub const ARC_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SprayError {
    #[error("correction system too ill-conditioned (condition {condition:.3e})")]
    ConditioningFailure { condition: f64 },
    #[error("dy_1 vanishes on an integration path")]
    DegenerateDy1,
    #[error("assembled derivative too far from identity (|DS - I| = {norm:.3e})")]
    DerivativeNotNearIdentity { norm: f64 },
    #[error("affine period system is singular")]
    SingularSystem,
    #[error("post-solve residual too large (P {p_max:.3e}, Z {z_max:.3e})")]
    SolveResidual { p_max: f64, z_max: f64 },
    #[error("Newton iteration diverged at |S| = {snorm:.3e}")]
    NewtonDiverged { snorm: f64 },
    #[error("x_1 develops a near-zero on an integration path")]
    ZeroCrossing,
    #[error("perturbation search exhausted: {0}")]
    SearchExhausted(String),
    #[error("curve is not an immersion on the verification grid")]
    NotImmersed,
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Cycles C_1..C_s, arcs E_p with their z-interpolation offsets, and the
/// base point p_0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendedPeriodMap {
    pub cycles: Vec<Cycle>,
    pub arcs: Vec<Arc>,
    pub base_point: [f64; 2],
    /// per arc: target z'(p) - z'(p_0) (or y_1 offsets in the fixed-z variant)
    pub z_offsets: Vec<(f64, f64)>,
    pub n: usize,
}

impl ExtendedPeriodMap {
    pub fn new(cycles: Vec<Cycle>, arcs: Vec<Arc>, base_point: C64, z_offsets: Vec<C64>, n: usize) -> Self {
        assert_eq!(arcs.len(), z_offsets.len());
        ExtendedPeriodMap {
            cycles,
            arcs,
            base_point: [base_point.re, base_point.im],
            z_offsets: z_offsets.iter().map(|c| (c.re, c.im)).collect(),
            n,
        }
    }

    pub fn base_point(&self) -> C64 {
        C64::new(self.base_point[0], self.base_point[1])
    }

    pub fn offsets(&self) -> Vec<C64> {
        self.z_offsets.iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    pub fn rows(&self) -> usize {
        self.cycles.len() + self.arcs.len()
    }
}

/// Integrals of a one-form over all cycles (residue-exact) and arcs
/// (adaptive quadrature), in row order cycles-then-arcs.
pub fn period_rows(pm: &ExtendedPeriodMap, form: &OneForm) -> Result<Vec<C64>, SprayError> {
    let mut out = Vec::with_capacity(pm.rows());
    for cyc in &pm.cycles {
        out.push(contour_integral(form, cyc)?);
    }
    for arc in &pm.arcs {
        out.push(arc_integral(form, arc, ARC_TOL)?.value);
    }
    Ok(out)
}

/// (P, Z) of the component family: P_i = Σ_j ∮_{C_i} x_j dy_j and
/// Z_p = offset_p + Σ_j ∫_{E_p} x_j dy_j.
pub fn eval_extended_period(
    x: &[LaurentPoly],
    y: &[LaurentPoly],
    pm: &ExtendedPeriodMap,
) -> Result<(Vec<C64>, Vec<C64>), SprayError> {
    assert_eq!(x.len(), y.len());
    let mut form = OneForm::zero();
    for (xi, yi) in x.iter().zip(y) {
        form = form.add(&OneForm::x_dy(xi, yi)?);
    }
    let rows = period_rows(pm, &form)?;
    let s = pm.cycles.len();
    let p = rows[..s].to_vec();
    let z: Vec<C64> =
        rows[s..].iter().zip(pm.offsets()).map(|(v, off)| v + off).collect();
    Ok((p, z))
}

/// Measured residuals of the correction conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub cycle_max: f64,
    pub arc_max: f64,
    pub jet_max: f64,
    pub condition: f64,
    pub basis_dim: usize,
}

/// The functions g_j (cycle corrections) and h_p (arc corrections).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionSet {
    pub g: Vec<LaurentPoly>,
    pub h: Vec<LaurentPoly>,
    pub report: CorrectionReport,
}

/// Solves for g_j and h_p over an escalating Laurent basis:
/// ∮_{C_i} g_j dy_1 = δ_ij, ∫_{E_p} g_j dy_1 = 0 (and the transpose
/// pattern for h_p), with value+derivative kills at `deriv_kill` and jet
/// kills to the stated order at `jet_kill`.
pub fn build_corrections(
    y1: &LaurentPoly,
    pm: &ExtendedPeriodMap,
    jet_kill: &[(C64, usize)],
    deriv_kill: &[C64],
) -> Result<CorrectionSet, SprayError> {
    build_corrections_quiet(y1, pm, jet_kill, deriv_kill, &[], None)
}

/// As `build_corrections`, with an additional least-squares smallness
/// objective on the quiet points: the corrections concentrate away from
/// the data set, realizing the supported-bump construction. `frame` fixes
/// the basis normalization (origin, scale); by default it is derived from
/// the integration paths.
pub fn build_corrections_quiet(
    y1: &LaurentPoly,
    pm: &ExtendedPeriodMap,
    jet_kill: &[(C64, usize)],
    deriv_kill: &[C64],
    quiet: &[C64],
    frame: Option<(C64, f64)>,
) -> Result<CorrectionSet, SprayError> {
    let dy1 = y1.differentiate();
    // dy_1 must stay away from zero on every integration path
    let mut path_points = vec![];
    for cyc in &pm.cycles {
        path_points.extend(cyc.as_arc().samples(256));
    }
    for arc in &pm.arcs {
        path_points.extend(arc.samples(256));
    }
    for p in &path_points {
        if dy1.evaluate(*p)?.norm() <= 1e-8 {
            return Err(SprayError::DegenerateDy1);
        }
    }

    let s = pm.cycles.len();
    let l = pm.arcs.len();
    let n_funcs = s + l;
    if n_funcs == 0 {
        return Ok(CorrectionSet {
            g: vec![],
            h: vec![],
            report: CorrectionReport {
                cycle_max: 0.0,
                arc_max: 0.0,
                jet_max: 0.0,
                condition: 1.0,
                basis_dim: 0,
            },
        });
    }

    // basis normalized to the working region (or the path geometry)
    let (origin, scale) = frame.unwrap_or_else(|| paths_frame(&path_points));
    let pole_scales: Vec<f64> = y1
        .centers()
        .iter()
        .map(|c| {
            pm.cycles
                .iter()
                .find(|cyc| (cyc.center() - c).norm() < 1e-9)
                .map(|cyc| cyc.radius)
                .unwrap_or(1.0)
        })
        .collect();
    let mut basis = LaurentBasis::scaled(
        y1.centers(),
        7,
        vec![4; y1.centers().len()],
        origin,
        scale,
        pole_scales,
    );
    let mut last_cond = 1.0;
    for _round in 0..4 {
        let dim = basis.dimension();
        // cycle rows as residues of element x dy_1, both convolution
        // directions: element-Taylor against dy_1 poles, and element-pole
        // against the regular part of dy_1, all evaluated stably
        let cycle_row = |e: usize, cyc: &Cycle| -> Result<C64, SprayError> {
            let mut sum = C64::new(0.0, 0.0);
            for (ci, center) in dy1.centers().iter().enumerate() {
                if (center - cyc.center()).norm() >= cyc.radius {
                    continue;
                }
                // element^(j)(c)/j! x [dy1]_{c,-j-1}
                for ((pci, pk), coeff) in dy1.pole_coeffs() {
                    if *pci != ci {
                        continue;
                    }
                    let j = (-pk - 1) as usize;
                    let mut fact = 1.0;
                    for t in 1..=j {
                        fact *= t as f64;
                    }
                    sum += basis.derivative_row(*center, j)[e] / fact * coeff;
                }
                // element pole at this center against dy1's regular part
                if let crate::approx::ElementKind::Pole { center: bc, order } =
                    basis.element_kind(e)
                {
                    let basis_center = basis.center_points()[bc];
                    if (basis_center - center).norm() < 1e-9 {
                        let mut reg = dy1.clone();
                        for ((pci, pk), coeff) in dy1.pole_coeffs() {
                            if *pci == ci {
                                reg = reg.sub(&LaurentPoly::pole_term(
                                    dy1.centers(),
                                    *pci,
                                    *pk,
                                    *coeff,
                                ));
                            }
                        }
                        let k = order as usize;
                        let jet = reg.jet_at(*center, k - 1)?;
                        let mut fact = 1.0;
                        for t in 1..k {
                            fact *= t as f64;
                        }
                        sum += jet[k - 1] / fact
                            * basis.pole_scales[bc].powi(order as i32);
                    }
                }
            }
            Ok(sum * C64::new(0.0, 2.0 * std::f64::consts::PI) * cyc.orientation as f64)
        };
        let dy1_eval = dy1.evaluator();
        let arc_row = |e: usize, arc: &Arc| -> Result<C64, SprayError> {
            let mut total = C64::new(0.0, 0.0);
            for piece in arc.pieces() {
                let integrand = |t: f64| -> C64 {
                    let z = piece.point(t);
                    basis.eval_element(e, z) * dy1_eval.eval(z) * piece.velocity(t)
                };
                match crate::quad::adaptive(integrand, ARC_TOL / arc.pieces().len() as f64) {
                    Ok(r) => total += r.value,
                    Err(r) => {
                        return Err(SprayError::Laurent(LaurentError::QuadratureNotConverged {
                            estimate: r.error_estimate,
                            tol: ARC_TOL,
                        }))
                    }
                }
            }
            Ok(total)
        };

        let mut rows: Vec<Vec<C64>> = vec![];
        for cyc in &pm.cycles {
            let row: Result<Vec<C64>, SprayError> =
                (0..dim).map(|e| cycle_row(e, cyc)).collect();
            rows.push(row?);
        }
        for arc in &pm.arcs {
            let mut row = Vec::with_capacity(dim);
            for e in 0..dim {
                row.push(arc_row(e, arc)?);
            }
            rows.push(row);
        }
        let integral_rows = rows.len();
        for (p, ord) in jet_kill {
            for k in 0..=*ord {
                rows.push(basis.derivative_row(*p, k));
            }
        }
        for p in deriv_kill {
            rows.push(basis.derivative_row(*p, 0));
            rows.push(basis.derivative_row(*p, 1));
        }
        let total_rows = rows.len();
        // row equilibration: derivative rows carry 1/scale^order factors
        // that would otherwise dominate the conditioning
        let row_scales: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.norm()).fold(1e-12, f64::max))
            .collect();
        for (r, sc) in rows.iter_mut().zip(&row_scales) {
            for v in r.iter_mut() {
                *v /= *sc;
            }
        }
        let mat = dmatrix_from_rows(&rows);

        // one solve per correction function, identical matrix; with quiet
        // points the null space is spent making the correction small there
        let quiet_rows: Vec<Vec<C64>> = quiet.iter().map(|p| basis.eval_row(*p)).collect();
        let quiet_mat = dmatrix_from_rows(&quiet_rows);
        let quiet_rhs = dvector(&vec![C64::new(0.0, 0.0); quiet.len()]);
        let mut solutions: Vec<Vec<C64>> = Vec::with_capacity(n_funcs);
        let mut worst_cond = 1.0f64;
        for j in 0..n_funcs {
            let mut rhs = vec![C64::new(0.0, 0.0); total_rows];
            rhs[j] = C64::new(1.0 / row_scales[j], 0.0);
            let sol = if quiet.is_empty() {
                let r = lstsq_min_norm(&mat, &dvector(&rhs), 1e-13);
                worst_cond = worst_cond.max(r.condition);
                r.x
            } else {
                let r = crate::linalg::constrained_lstsq(&mat, &dvector(&rhs), &quiet_mat, &quiet_rhs);
                worst_cond = worst_cond.max(r.condition);
                r.x
            };
            solutions.push(sol.as_slice().to_vec());
        }
        last_cond = worst_cond;

        // verify the defining conditions by recomputation against the
        // solved coefficient vectors, all rows in stable scaled form
        let mut cycle_max = 0.0f64;
        let mut arc_max = 0.0f64;
        let mut jet_max = 0.0f64;
        for (j, coeffs) in solutions.iter().enumerate() {
            let dot = |row: &[C64]| -> C64 {
                row.iter().zip(coeffs.iter()).map(|(a, b)| a * b).sum()
            };
            for (i, cyc) in pm.cycles.iter().enumerate() {
                let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                let row: Result<Vec<C64>, SprayError> =
                    (0..dim).map(|e| cycle_row(e, cyc)).collect();
                cycle_max = cycle_max.max((dot(&row?) - want).norm());
            }
            for (p, arc) in pm.arcs.iter().enumerate() {
                let want = if s + p == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                let mut row = Vec::with_capacity(dim);
                for e in 0..dim {
                    row.push(arc_row(e, arc)?);
                }
                arc_max = arc_max.max((dot(&row) - want).norm());
            }
            for (p, ord) in jet_kill {
                for k in 0..=*ord {
                    jet_max = jet_max.max(dot(&basis.derivative_row(*p, k)).norm());
                }
            }
            for p in deriv_kill {
                for k in 0..=1usize {
                    jet_max = jet_max.max(dot(&basis.derivative_row(*p, k)).norm());
                }
            }
        }
        let _ = integral_rows;
        if std::env::var("LEGLAB_CORR_DEBUG").is_ok() {
            eprintln!(
                "corrections round: dim {dim} cycle {cycle_max:.2e} arc {arc_max:.2e} jet {jet_max:.2e} cond {worst_cond:.2e}"
            );
        }
        if cycle_max <= 1e-10 && arc_max <= 1e-8 && jet_max <= 1e-11 {
            let report = CorrectionReport {
                cycle_max,
                arc_max,
                jet_max,
                condition: worst_cond,
                basis_dim: dim,
            };
            let funcs: Vec<LaurentPoly> =
                solutions.iter().map(|sol| basis.combine(sol)).collect();
            let g = funcs[..s].to_vec();
            let h = funcs[s..].to_vec();
            return Ok(CorrectionSet { g, h, report });
        }
        basis = basis.enlarged();
    }
    Err(SprayError::ConditioningFailure { condition: last_cond })
}

/// Centroid and extent of a set of path sample points.
fn paths_frame(points: &[C64]) -> (C64, f64) {
    if points.is_empty() {
        return (C64::new(0.0, 0.0), 1.0);
    }
    let mut origin = C64::new(0.0, 0.0);
    for p in points {
        origin += p;
    }
    origin /= points.len() as f64;
    let scale = points.iter().map(|p| (p - origin).norm()).fold(0.5, f64::max);
    (origin, scale)
}

/// Correction functions against a pointwise reference one-form w(u) du
/// (the fixed-z variant uses w = beta'/x_1). All integral rows go through
/// adaptive quadrature here; the verification gates are 1e-8 on both cycle
/// and arc rows.
pub fn build_corrections_quad(
    weight: &dyn Fn(C64) -> C64,
    pm: &ExtendedPeriodMap,
    jet_kill: &[(C64, usize)],
    deriv_kill: &[C64],
) -> Result<CorrectionSet, SprayError> {
    let s = pm.cycles.len();
    let l = pm.arcs.len();
    let n_funcs = s + l;
    if n_funcs == 0 {
        return Ok(CorrectionSet {
            g: vec![],
            h: vec![],
            report: CorrectionReport {
                cycle_max: 0.0,
                arc_max: 0.0,
                jet_max: 0.0,
                condition: 1.0,
                basis_dim: 0,
            },
        });
    }
    let mut paths: Vec<Arc> = pm.cycles.iter().map(|c| c.as_arc()).collect();
    paths.extend(pm.arcs.iter().cloned());

    // centers available to the basis: union over cycles
    let centers: Vec<C64> = {
        let mut cs: Vec<C64> = vec![];
        for cyc in &pm.cycles {
            cs.push(cyc.center());
        }
        cs
    };
    let quad_row = |b: &crate::laurent::DenseEvaluator, path: &Arc| -> Result<C64, SprayError> {
        let mut total = C64::new(0.0, 0.0);
        for piece in path.pieces() {
            let integrand =
                |t: f64| -> C64 { b.eval(piece.point(t)) * weight(piece.point(t)) * piece.velocity(t) };
            match crate::quad::adaptive(integrand, ARC_TOL / path.pieces().len() as f64) {
                Ok(r) => total += r.value,
                Err(r) => {
                    return Err(SprayError::Laurent(LaurentError::QuadratureNotConverged {
                        estimate: r.error_estimate,
                        tol: ARC_TOL,
                    }))
                }
            }
        }
        Ok(total)
    };

    let mut path_pts: Vec<C64> = vec![];
    for p in &paths {
        path_pts.extend(p.samples(64));
    }
    let (origin, scale) = paths_frame(&path_pts);
    let pole_scales: Vec<f64> = pm.cycles.iter().map(|c| c.radius).collect();
    let mut basis = crate::approx::LaurentBasis::scaled(
        &centers,
        7,
        vec![4; centers.len()],
        origin,
        scale,
        pole_scales,
    );
    let mut last_cond = 1.0;
    for _round in 0..4 {
        let dim = basis.dimension();
        let elements: Vec<LaurentPoly> = (0..dim)
            .map(|i| {
                let mut coeffs = vec![C64::new(0.0, 0.0); dim];
                coeffs[i] = C64::new(1.0, 0.0);
                basis.combine(&coeffs)
            })
            .collect();
        let evals: Vec<_> = elements.iter().map(|e| e.evaluator()).collect();

        let mut rows: Vec<Vec<C64>> = vec![];
        for path in &paths {
            let mut row = Vec::with_capacity(dim);
            for b in &evals {
                row.push(quad_row(b, path)?);
            }
            rows.push(row);
        }
        for (p, ord) in jet_kill {
            for k in 0..=*ord {
                rows.push(basis.derivative_row(*p, k));
            }
        }
        for p in deriv_kill {
            rows.push(basis.derivative_row(*p, 0));
            rows.push(basis.derivative_row(*p, 1));
        }
        let total_rows = rows.len();
        let mat = dmatrix_from_rows(&rows);

        let mut funcs: Vec<LaurentPoly> = Vec::with_capacity(n_funcs);
        let mut worst_cond = 1.0f64;
        for j in 0..n_funcs {
            let mut rhs = vec![C64::new(0.0, 0.0); total_rows];
            rhs[j] = C64::new(1.0, 0.0);
            let sol = lstsq_min_norm(&mat, &dvector(&rhs), 1e-13);
            worst_cond = worst_cond.max(sol.condition);
            funcs.push(basis.combine(sol.x.as_slice()));
        }
        last_cond = worst_cond;

        let mut path_max = 0.0f64;
        let mut jet_max = 0.0f64;
        for (j, f) in funcs.iter().enumerate() {
            let fe = f.evaluator();
            for (i, path) in paths.iter().enumerate() {
                let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                path_max = path_max.max((quad_row(&fe, path)? - want).norm());
            }
            for (p, ord) in jet_kill {
                for v in f.jet_at(*p, *ord)? {
                    jet_max = jet_max.max(v.norm());
                }
            }
            for p in deriv_kill {
                for v in f.jet_at(*p, 1)? {
                    jet_max = jet_max.max(v.norm());
                }
            }
        }
        if path_max <= 1e-8 && jet_max <= 1e-11 {
            let report = CorrectionReport {
                cycle_max: path_max,
                arc_max: path_max,
                jet_max,
                condition: worst_cond,
                basis_dim: dim,
            };
            let g = funcs[..s].to_vec();
            let h = funcs[s..].to_vec();
            return Ok(CorrectionSet { g, h, report });
        }
        basis = basis.enlarged();
    }
    Err(SprayError::ConditioningFailure { condition: last_cond })
}

/// Spray parameters: ζ per cycle, ξ per arc, plus the immersion weight δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SprayParams {
    pub zeta: Vec<(f64, f64)>,
    pub xi: Vec<(f64, f64)>,
    pub delta: (f64, f64),
}

impl SprayParams {
    pub fn zeta_c(&self) -> Vec<C64> {
        self.zeta.iter().map(|&(r, i)| C64::new(r, i)).collect()
    }

    pub fn xi_c(&self) -> Vec<C64> {
        self.xi.iter().map(|&(r, i)| C64::new(r, i)).collect()
    }
}

/// Applies the additive spray to x_1.
pub fn apply_spray(
    x1: &LaurentPoly,
    cs: &CorrectionSet,
    zeta: &[C64],
    xi: &[C64],
) -> LaurentPoly {
    let mut out = x1.clone();
    for (g, z) in cs.g.iter().zip(zeta) {
        out = out.add(&g.scale(*z));
    }
    for (h, s) in cs.h.iter().zip(xi) {
        out = out.add(&h.scale(*s));
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AffineSolveReport {
    pub ds_identity_defect: f64,
    pub post_p_max: f64,
    pub post_z_max: f64,
}

/// Assembles DS from the correction integrals (cycle rows residue-exact).
pub fn assemble_ds(
    cs: &CorrectionSet,
    y1: &LaurentPoly,
    pm: &ExtendedPeriodMap,
) -> Result<DMatrix<C64>, SprayError> {
    let dy1 = y1.differentiate();
    let m = pm.rows();
    let mut ds = DMatrix::<C64>::zeros(m, m);
    for (col, f) in cs.g.iter().chain(cs.h.iter()).enumerate() {
        let rows = period_rows(pm, &OneForm::new(f.mul(&dy1)?))?;
        for (r, v) in rows.iter().enumerate() {
            ds[(r, col)] = *v;
        }
    }
    Ok(ds)
}

/// Solves the affine system S(ζ, ξ) = 0 for the additive spray: asserts
/// |DS - I| <= 0.1, solves exactly, and post-verifies |P| <= 1e-9 and
/// |Z| <= 1e-8 on the sprayed components.
pub fn solve_affine(
    x1: &LaurentPoly,
    other_x: &[LaurentPoly],
    y: &[LaurentPoly],
    cs: &CorrectionSet,
    pm: &ExtendedPeriodMap,
) -> Result<(SprayParams, AffineSolveReport), SprayError> {
    let s = pm.cycles.len();
    let l = pm.arcs.len();
    assert_eq!(cs.g.len(), s);
    assert_eq!(cs.h.len(), l);
    assert_eq!(y.len(), pm.n);
    assert_eq!(other_x.len() + 1, pm.n);

    let ds = assemble_ds(cs, &y[0], pm)?;
    let eye = DMatrix::<C64>::identity(pm.rows(), pm.rows());
    let defect = inf_norm(&(&ds - &eye));
    if defect > 0.1 {
        return Err(SprayError::DerivativeNotNearIdentity { norm: defect });
    }

    let mut xs: Vec<LaurentPoly> = vec![x1.clone()];
    xs.extend(other_x.iter().cloned());
    let (p0, z0) = eval_extended_period(&xs, y, pm)?;
    let mut rhs = DVector::<C64>::zeros(pm.rows());
    for (i, v) in p0.iter().chain(z0.iter()).enumerate() {
        rhs[i] = -v;
    }
    let theta = ds.clone().lu().solve(&rhs).ok_or(SprayError::SingularSystem)?;
    let zeta: Vec<C64> = (0..s).map(|i| theta[i]).collect();
    let xi: Vec<C64> = (0..l).map(|i| theta[s + i]).collect();

    let sprayed = apply_spray(x1, cs, &zeta, &xi);
    xs[0] = sprayed;
    let (p1, z1) = eval_extended_period(&xs, y, pm)?;
    let p_max = p1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let z_max = z1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if p_max > 1e-9 || z_max > 1e-8 {
        return Err(SprayError::SolveResidual { p_max, z_max });
    }
    Ok((
        SprayParams {
            zeta: zeta.iter().map(|c| (c.re, c.im)).collect(),
            xi: xi.iter().map(|c| (c.re, c.im)).collect(),
            delta: (0.0, 0.0),
        },
        AffineSolveReport { ds_identity_defect: defect, post_p_max: p_max, post_z_max: z_max },
    ))
}

/// Pointwise x_1(u) exp(Σ ζ_j g_j + Σ ξ_p h_p + extra) for the fixed-z
/// variant.
fn mult_spray_eval(
    x1: &LaurentPoly,
    cs: &CorrectionSet,
    zeta: &[C64],
    xi: &[C64],
    extra: &LaurentPoly,
    u: C64,
) -> Result<C64, LaurentError> {
    let mut e = extra.evaluate(u)?;
    for (g, z) in cs.g.iter().zip(zeta) {
        e += g.evaluate(u)? * z;
    }
    for (h, s) in cs.h.iter().zip(xi) {
        e += h.evaluate(u)? * s;
    }
    Ok(x1.evaluate(u)? * e.exp())
}

/// S(ζ, ξ) for the multiplicative spray: cycle and arc integrals of
/// β'(u) / x̃_1(u) by adaptive quadrature, with the arc offsets added.
fn mult_spray_map(
    x1: &LaurentPoly,
    beta_prime: &OneForm,
    cs: &CorrectionSet,
    pm: &ExtendedPeriodMap,
    extra: &LaurentPoly,
    zeta: &[C64],
    xi: &[C64],
) -> Result<Vec<C64>, SprayError> {
    // zero-crossing prescan on every path
    let mut paths: Vec<Arc> = pm.cycles.iter().map(|c| c.as_arc()).collect();
    paths.extend(pm.arcs.iter().cloned());
    for path in &paths {
        for u in path.samples(512) {
            if mult_spray_eval(x1, cs, zeta, xi, extra, u)?.norm() < 1e-8 {
                return Err(SprayError::ZeroCrossing);
            }
        }
    }
    let mut out = Vec::with_capacity(pm.rows());
    let offsets = pm.offsets();
    for (idx, path) in paths.iter().enumerate() {
        let mut value = C64::new(0.0, 0.0);
        for piece in path.pieces() {
            let integrand = |t: f64| -> C64 {
                let u = piece.point(t);
                let denom = mult_spray_eval(x1, cs, zeta, xi, extra, u)
                    .unwrap_or(C64::new(f64::MAX, 0.0));
                let num = beta_prime.coeff.evaluate(u).unwrap_or(C64::new(f64::MAX, 0.0));
                num / denom * piece.velocity(t)
            };
            match crate::quad::adaptive(integrand, ARC_TOL / path.pieces().len() as f64) {
                Ok(r) => value += r.value,
                Err(r) => {
                    return Err(SprayError::Laurent(LaurentError::QuadratureNotConverged {
                        estimate: r.error_estimate,
                        tol: ARC_TOL,
                    }))
                }
            }
        }
        if idx >= pm.cycles.len() {
            value += offsets[idx - pm.cycles.len()];
        }
        out.push(value);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_norm: f64,
}

/// Damped Newton iteration from (0, 0) on the multiplicative spray map,
/// Jacobian by central finite differences with step 1e-6; converged when
/// |S|_inf <= 1e-8.
pub fn solve_multiplicative(
    x1: &LaurentPoly,
    beta_prime: &OneForm,
    cs: &CorrectionSet,
    pm: &ExtendedPeriodMap,
    extra: &LaurentPoly,
    max_iter: usize,
) -> Result<(SprayParams, NewtonReport), SprayError> {
    let s = pm.cycles.len();
    let l = pm.arcs.len();
    let m = s + l;
    let split = |theta: &[C64]| -> (Vec<C64>, Vec<C64>) {
        (theta[..s].to_vec(), theta[s..].to_vec())
    };
    let eval_s = |theta: &[C64]| -> Result<Vec<C64>, SprayError> {
        let (zeta, xi) = split(theta);
        mult_spray_map(x1, beta_prime, cs, pm, extra, &zeta, &xi)
    };
    let norm_inf = |v: &[C64]| v.iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut theta = vec![C64::new(0.0, 0.0); m];
    let mut s_val = eval_s(&theta)?;
    let mut history: Vec<f64> = vec![norm_inf(&s_val)];
    let mut iters = 0;
    while norm_inf(&s_val) > 1e-8 {
        if iters >= max_iter {
            return Err(SprayError::NewtonDiverged { snorm: norm_inf(&s_val) });
        }
        if history.len() > 5 {
            let old = history[history.len() - 6];
            if norm_inf(&s_val) > 0.5 * old {
                return Err(SprayError::NewtonDiverged { snorm: norm_inf(&s_val) });
            }
        }
        // central-difference Jacobian
        let h = 1e-6;
        let mut jac = DMatrix::<C64>::zeros(m, m);
        for k in 0..m {
            let mut tp = theta.clone();
            tp[k] += C64::new(h, 0.0);
            let mut tm = theta.clone();
            tm[k] -= C64::new(h, 0.0);
            let sp = eval_s(&tp)?;
            let sm = eval_s(&tm)?;
            for r in 0..m {
                jac[(r, k)] = (sp[r] - sm[r]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(m, s_val.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs).ok_or(SprayError::SingularSystem)?;
        // halving line search
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..8 {
            let cand: Vec<C64> =
                theta.iter().zip(step.iter()).map(|(t, d)| t + d * lambda).collect();
            match eval_s(&cand) {
                Ok(sv) if norm_inf(&sv) < norm_inf(&s_val) => {
                    theta = cand;
                    s_val = sv;
                    accepted = true;
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        if !accepted {
            return Err(SprayError::NewtonDiverged { snorm: norm_inf(&s_val) });
        }
        history.push(norm_inf(&s_val));
        iters += 1;
    }
    let (zeta, xi) = split(&theta);
    Ok((
        SprayParams {
            zeta: zeta.iter().map(|c| (c.re, c.im)).collect(),
            xi: xi.iter().map(|c| (c.re, c.im)).collect(),
            delta: (0.0, 0.0),
        },
        NewtonReport { iterations: iters, final_norm: norm_inf(&s_val) },
    ))
}

/// Evaluates H(v, ξ) - H(u, ξ) for every probe pair under a curve-family
/// builder.
pub fn difference_map<F>(
    builder: F,
    probes: &[(C64, C64)],
    xi: &[C64],
) -> Result<Vec<Vec<C64>>, SprayError>
where
    F: Fn(&[C64]) -> Result<crate::contact::LegendrianCurve, SprayError>,
{
    let curve = builder(xi)?;
    let mut out = Vec::with_capacity(probes.len());
    for (u, v) in probes {
        let fu = curve.eval_point(*u)?;
        let fv = curve.eval_point(*v)?;
        out.push(fu.iter().zip(&fv).map(|(a, b)| b - a).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CircularDomain, Disk};
    use std::collections::BTreeSet;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn annulus_pm() -> (CircularDomain, ExtendedPeriodMap) {
        let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.3)]).unwrap();
        let cyc = Cycle {
            center: [0.0, 0.0],
            radius: 1.0,
            orientation: 1,
            enclosed: BTreeSet::from([0]),
        };
        let pm = ExtendedPeriodMap::new(vec![cyc], vec![], c(1.5, 0.0), vec![], 1);
        (domain, pm)
    }

    #[test]
    fn correction_on_annulus_is_cauchy_kernel() {
        let (domain, pm) = annulus_pm();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&domain.pole_centers());
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        assert_eq!(cs.g.len(), 1);
        // g_1 must integrate to 1 against dζ over the cycle; the min-norm
        // solution is exactly 1/(2πi ζ)
        let g = &cs.g[0];
        let expect = 1.0 / (2.0 * std::f64::consts::PI);
        let got = g.pole_coeffs().get(&(0, -1)).copied().unwrap_or_default();
        assert!((got - c(0.0, -expect)).norm() < 1e-12, "got {got}");
        assert!(cs.report.cycle_max < 1e-12);
    }

    #[test]
    fn correction_arc_only() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let arc = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let pm = ExtendedPeriodMap::new(vec![], vec![arc], c(0.0, 0.0), vec![c(0.0, 0.0)], 1);
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&domain.pole_centers());
        let jet_kill = [(c(1.0, 0.0), 1usize)];
        let cs = build_corrections(&y1, &pm, &jet_kill, &[]).unwrap();
        assert_eq!(cs.h.len(), 1);
        let form = OneForm::new(cs.h[0].mul(&y1.differentiate()).unwrap());
        let arc = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let v = arc_integral(&form, &arc, 1e-10).unwrap().value;
        assert!((v - c(1.0, 0.0)).norm() < 1e-8);
        // jet-killed at the endpoint
        for v in cs.h[0].jet_at(c(1.0, 0.0), 1).unwrap() {
            assert!(v.norm() < 1e-11);
        }
    }

    #[test]
    fn degenerate_dy1_detected() {
        let (_, pm) = annulus_pm();
        let y1 = LaurentPoly::constant(c(5.0, 0.0));
        assert!(matches!(
            build_corrections(&y1, &pm, &[], &[]),
            Err(SprayError::DegenerateDy1)
        ));
    }

    #[test]
    fn affine_solve_kills_period() {
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        // x = 1/ζ has period 2πi against dζ
        let x1 = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let (params, report) = solve_affine(&x1, &[], &[y1.clone()], &cs, &pm).unwrap();
        // closed form: S(ζ) = 2πi + ζ, so ζ = -2πi
        let z0 = C64::new(params.zeta[0].0, params.zeta[0].1);
        assert!((z0 - c(0.0, -2.0 * std::f64::consts::PI)).norm() < 1e-9, "zeta {z0}");
        assert!(report.post_p_max <= 1e-9);

        // zero-period input solves to zero parameters
        let x_ok = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let (params, _) = solve_affine(&x_ok, &[], &[y1], &cs, &pm).unwrap();
        assert!(C64::new(params.zeta[0].0, params.zeta[0].1).norm() < 1e-12);
    }

    #[test]
    fn affine_gate_rejects_loose_corrections() {
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let mut cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        // scale g so the diagonal becomes 1.5
        cs.g[0] = cs.g[0].scale(c(1.5, 0.0));
        let x1 = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        assert!(matches!(
            solve_affine(&x1, &[], &[y1], &cs, &pm),
            Err(SprayError::DerivativeNotNearIdentity { .. })
        ));
    }

    #[test]
    fn ds_matches_finite_difference_jacobian() {
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        let x1 = LaurentPoly::pole_term(&centers, 0, -1, c(1.0, 0.0));
        let ds = assemble_ds(&cs, &y1, &pm).unwrap();
        // finite differences of eval∘spray
        let h = 1e-6;
        let eval = |zeta: C64| -> C64 {
            let sprayed = apply_spray(&x1, &cs, &[zeta], &[]);
            let (p, _) = eval_extended_period(&[sprayed], &[y1.clone()], &pm).unwrap();
            p[0]
        };
        let fd = (eval(c(h, 0.0)) - eval(c(-h, 0.0))) / (2.0 * h);
        assert!((fd - ds[(0, 0)]).norm() < 1e-6, "fd {fd} vs ds {}", ds[(0, 0)]);
    }

    #[test]
    fn multiplicative_converges_at_zero_when_exact() {
        // β' already exact: x1 = ζ on the annulus, β' = dζ * x1 so that
        // β'/x1 = dζ, which has no period over the cycle
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        let x1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let beta = OneForm::new(x1.clone());
        let zero = LaurentPoly::zero();
        let (params, report) =
            solve_multiplicative(&x1, &beta, &cs, &pm, &zero, 50).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(C64::new(params.zeta[0].0, params.zeta[0].1).norm() < 1e-12);
    }

    #[test]
    fn multiplicative_matches_closed_form_shift() {
        // x1 = ζ, β' = (a/ζ) x1 dζ → β'/x̃1 = a/(ζ e^{ζ_1 g}) dζ.
        // With g = 1/(2πi ζ) the period is not constant in ζ_1, and the
        // 1-D solve can be cross-checked by a quadrature scan.
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        let x1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        // β' = (1 + 0.1/ζ) x1 dζ: period of β'/x1 = 2πi * 0.1
        let beta = OneForm::new(
            x1.mul(
                &LaurentPoly::constant(c(1.0, 0.0))
                    .add(&LaurentPoly::pole_term(&centers, 0, -1, c(0.1, 0.0))),
            )
            .unwrap(),
        );
        let zero = LaurentPoly::zero();
        let (params, report) =
            solve_multiplicative(&x1, &beta, &cs, &pm, &zero, 50).unwrap();
        assert!(report.final_norm <= 1e-8);
        // closed-form oracle by scanning the 1-D map with quadrature
        let zeta_solved = C64::new(params.zeta[0].0, params.zeta[0].1);
        let map = |zeta: C64| -> C64 {
            mult_spray_map(&x1, &beta, &cs, &pm, &zero, &[zeta], &[]).unwrap()[0]
        };
        assert!(map(zeta_solved).norm() <= 1e-8);
        // a nearby zeta does not solve it: the zero is locally unique
        assert!(map(zeta_solved + c(0.05, 0.0)).norm() > 1e-4);
    }

    #[test]
    fn multiplicative_zero_crossing_detected() {
        let (domain, pm) = annulus_pm();
        let centers = domain.pole_centers();
        let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
        let cs = build_corrections(&y1, &pm, &[], &[]).unwrap();
        // x1 = ζ - 1 vanishes on the cycle of radius 1
        let x1 = LaurentPoly::from_coeffs(&[c(-1.0, 0.0), c(1.0, 0.0)]).with_centers(&centers);
        let beta = OneForm::new(x1.clone());
        let zero = LaurentPoly::zero();
        assert!(matches!(
            solve_multiplicative(&x1, &beta, &cs, &pm, &zero, 50),
            Err(SprayError::ZeroCrossing)
        ));
    }

    #[test]
    fn difference_map_examples() {
        use crate::contact::LegendrianCurve;
        use crate::laurent::primitive;
        let domain = CircularDomain::plane(vec![]).unwrap();
        let x = LaurentPoly::from_coeffs(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let y = LaurentPoly::from_coeffs(&[c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
        let base = LegendrianCurve::new(1, vec![x], vec![y], z, domain).unwrap();
        let builder = |_xi: &[C64]| -> Result<LegendrianCurve, SprayError> { Ok(base.clone()) };

        // diagonal probe vanishes
        let d = difference_map(&builder, &[(c(0.5, 0.0), c(0.5, 0.0))], &[]).unwrap();
        assert!(d[0].iter().all(|v| v.norm() < 1e-15));

        // (x, y) double point at ±1 shows a zero gap in x and y but not z
        let d = difference_map(&builder, &[(c(-1.0, 0.0), c(1.0, 0.0))], &[]).unwrap();
        assert!(d[0][0].norm() < 1e-14);
        assert!(d[0][1].norm() < 1e-14);
        assert!(d[0][2].norm() > 0.1);

        // generic pair is nonzero everywhere
        let d = difference_map(&builder, &[(c(0.2, 0.0), c(0.7, 0.1))], &[]).unwrap();
        assert!(d[0].iter().any(|v| v.norm() > 1e-3));
    }
}
