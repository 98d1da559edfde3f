//! Double-point removal by randomized spray perturbation.
//!
//! Candidate double points are detected on a parameter grid, one probe
//! pair (u, v) per cluster. For every probe two auxiliary functions are
//! built: w_1 with w_1(u) = 0, w_1(v) = 1 and w_2 with w_2(u) = w_2(v) = 0
//! and ∫_E w_2 dy_1 = -1 along a routed path E from u to v, both small on
//! the correction support and jet-killed at protected points. The curve
//! family x + ξ_1 w_1 + ξ_3 w_2, y + ξ_2 w_1 (periods re-solved, z
//! re-integrated) then moves the two branches independently; random ξ in a
//! shrinking polydisk is accepted once the grid-injectivity certificate,
//! the jet gates, and the sup-change budget all pass.

use crate::approx::LaurentBasis;
use crate::contact::{jet_distance, jet_of_curve, LegendrianCurve, JetSpec};
use crate::geometry::{build_arc, homology_basis, Arc, CompactSet};
use crate::laurent::{arc_integral, primitive, LaurentPoly, OneForm};
use crate::linalg::{constrained_lstsq, dmatrix_from_rows, dvector};
use crate::spray::{
    assemble_ds, build_corrections, period_rows, CorrectionSet,
    ExtendedPeriodMap, SprayError, ARC_TOL,
};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Measured residuals of the probe-function conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WReport {
    /// endpoint conditions w1(u)=0, w1(v)=1, w2(u)=w2(v)=0
    pub w3_max: f64,
    /// sup |w1| along the probe path
    pub w4_sup: f64,
    /// |1 + ∫_E w2 dy1|
    pub w5_defect: f64,
    /// sup of |w_j| and |w_j'| on the correction support
    pub w6_mu: f64,
}

/// One probe pair with its perturbation functions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProbe {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub w1: LaurentPoly,
    pub w2: LaurentPoly,
    pub path: Arc,
    pub mu: f64,
    pub report: WReport,
}

/// Grid-injectivity certificate. Pairs closer than `param_margin` in the
/// parameter are left to the immersion floor; all other pairs carry an
/// image gap of at least `margin` once the Lipschitz deduction for
/// off-grid points is subtracted.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InjectivityCertificate {
    pub grid_n: usize,
    pub grid_step: f64,
    pub lipschitz: f64,
    pub immersion_floor: f64,
    pub param_margin: f64,
    pub min_offmargin_gap: f64,
    pub deduction: f64,
    pub margin: f64,
    pub pass: bool,
}

struct GridData {
    points: Vec<C64>,
    values: Vec<Vec<C64>>,
    lipschitz: f64,
    immersion_floor: f64,
    step: f64,
}

fn grid_data(curve: &LegendrianCurve, k: &CompactSet, n: usize) -> Result<GridData, SprayError> {
    let points = k.grid(n);
    let comps = curve.components();
    let evals: Vec<_> = comps.iter().map(|c| c.evaluator()).collect();
    let devals: Vec<_> = comps.iter().map(|c| c.differentiate().evaluator()).collect();
    let mut values = Vec::with_capacity(points.len());
    let mut lipschitz = 0.0f64;
    let mut immersion_floor = f64::INFINITY;
    for p in &points {
        let row: Vec<C64> = evals.iter().map(|e| e.eval(*p)).collect();
        values.push(row);
        let mut xy_max = 0.0f64;
        for (i, d) in devals.iter().enumerate() {
            let dv = d.eval(*p).norm();
            lipschitz = lipschitz.max(dv);
            if i < 2 * curve.n {
                xy_max = xy_max.max(dv);
            }
        }
        immersion_floor = immersion_floor.min(xy_max);
    }
    Ok(GridData {
        points,
        values,
        lipschitz,
        immersion_floor,
        step: 2.0 * k.radius / n as f64,
    })
}

/// Minimum image gap over grid pairs at parameter distance above
/// `param_margin`, by spatial hashing on the first two components; pairs
/// landing in non-adjacent cells are at least `cell` apart in some
/// coordinate and need no comparison.
fn min_offmargin_gap(data: &GridData, param_margin: f64, cell: f64) -> f64 {
    // image buckets, each subdivided into parameter cells of size
    // param_margin: blocks of parameter-adjacent cells are skipped without
    // touching their pairs
    type PCell = (i64, i64);
    let mut buckets: HashMap<(i64, i64, i64, i64), HashMap<PCell, Vec<usize>>> = HashMap::new();
    let key = |v: &[C64]| -> (i64, i64, i64, i64) {
        (
            (v[0].re / cell).floor() as i64,
            (v[0].im / cell).floor() as i64,
            (v[1].re / cell).floor() as i64,
            (v[1].im / cell).floor() as i64,
        )
    };
    // cell size margin/3: adjacent blocks then only hold pairs within
    // 2*sqrt(2)/3 * margin < margin, so skipping them is sound
    let pm = (param_margin / 3.0).max(1e-12);
    let pkey = |p: C64| -> PCell { ((p.re / pm).floor() as i64, (p.im / pm).floor() as i64) };
    for (i, v) in data.values.iter().enumerate() {
        buckets
            .entry(key(v))
            .or_default()
            .entry(pkey(data.points[i]))
            .or_default()
            .push(i);
    }
    let mut min_gap = cell;
    let mut compare = |i: usize, j: usize| {
        if (data.points[i] - data.points[j]).norm() <= param_margin {
            return;
        }
        let gap = data.values[i]
            .iter()
            .zip(&data.values[j])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        min_gap = min_gap.min(gap);
    };
    for (k0, cells) in &buckets {
        for d0 in -1..=1i64 {
            for d1 in -1..=1i64 {
                for d2 in -1..=1i64 {
                    for d3 in -1..=1i64 {
                        let nb = (k0.0 + d0, k0.1 + d1, k0.2 + d2, k0.3 + d3);
                        if nb < *k0 {
                            continue;
                        }
                        let Some(other_cells) = buckets.get(&nb) else { continue };
                        for (pc_a, list_a) in cells {
                            for (pc_b, list_b) in other_cells {
                                // parameter-adjacent blocks hold only
                                // sub-margin pairs
                                if (pc_a.0 - pc_b.0).abs() <= 1 && (pc_a.1 - pc_b.1).abs() <= 1 {
                                    continue;
                                }
                                for &i in list_a {
                                    for &j in list_b {
                                        if nb == *k0 && pc_a == pc_b && j <= i {
                                            continue;
                                        }
                                        compare(i, j);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    min_gap
}

/// Certifies grid injectivity of the curve on `k` with an n-by-n grid.
pub fn certify_injectivity(
    curve: &LegendrianCurve,
    k: &CompactSet,
    n: usize,
) -> Result<InjectivityCertificate, SprayError> {
    let data = grid_data(curve, k, n)?;
    let h = data.step;
    let l = data.lipschitz;
    let nu = data.immersion_floor;
    let deduction = 2.0 * l * h;
    if nu <= 0.0 {
        return Ok(InjectivityCertificate {
            grid_n: n,
            grid_step: h,
            lipschitz: l,
            immersion_floor: nu,
            param_margin: f64::INFINITY,
            min_offmargin_gap: 0.0,
            deduction,
            margin: 0.0,
            pass: false,
        });
    }
    // pairs beyond this parameter distance have image gap >= nu * margin
    // > deduction by construction; closer pairs rely on the immersion floor
    let param_margin = 3.0 * l * h / nu;
    let gap = min_offmargin_gap(&data, param_margin, 2.0 * deduction.max(1e-12));
    let margin = gap - deduction;
    Ok(InjectivityCertificate {
        grid_n: n,
        grid_step: h,
        lipschitz: l,
        immersion_floor: nu,
        param_margin,
        min_offmargin_gap: gap,
        deduction,
        margin,
        pass: margin > 0.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub probes: Vec<EmbeddingProbe>,
    pub certificate: InjectivityCertificate,
    pub sup_change: f64,
    pub max_jet_distance: f64,
    pub legendrian_residual: f64,
    pub candidates_tried: usize,
    pub xi_radius: f64,
    pub xi: Vec<(f64, f64)>,
}

/// Builds w1 and w2 for a probe pair: exact endpoint/jet/path-integral
/// rows, least-squares smallness on the correction support.
fn build_probe(
    curve: &LegendrianCurve,
    k: &CompactSet,
    pm: &ExtendedPeriodMap,
    protected: &[JetSpec],
    u: C64,
    v: C64,
    seed: u64,
) -> Result<EmbeddingProbe, SprayError> {
    let path = match Arc::segment(u, v) {
        Ok(seg) if seg.samples(64).iter().all(|p| k.clearance(*p) > 0.0) => seg,
        _ => build_arc(&curve.domain, u, v, &[], seed)?,
    };
    let dy1 = curve.y[0].differentiate();
    let centers = curve.domain.pole_centers();
    let enclosed: Vec<C64> = k
        .enclosed_mask()
        .iter()
        .map(|&i| centers[i])
        .collect();
    let pole_scales: Vec<f64> = k.excluded.iter().map(|(_, d)| d.radius).collect();
    let basis = LaurentBasis::scaled(
        &enclosed,
        10,
        vec![3; enclosed.len()],
        k.center(),
        k.radius,
        pole_scales,
    );

    // support samples where the probes must stay small
    let mut support: Vec<C64> = vec![];
    for cyc in &pm.cycles {
        support.extend(cyc.as_arc().samples(48));
    }
    for arc in &pm.arcs {
        support.extend(arc.samples(48));
    }

    let smallness_rows = |basis: &LaurentBasis| -> (Vec<Vec<C64>>, Vec<C64>) {
        let mut rows = vec![];
        let mut rhs = vec![];
        for p in &support {
            rows.push(basis.eval_row(*p));
            rhs.push(C64::new(0.0, 0.0));
            rows.push(basis.derivative_row(*p, 1));
            rhs.push(C64::new(0.0, 0.0));
        }
        (rows, rhs)
    };

    let mut jet_rows = vec![];
    for jet in protected {
        for kk in 0..=jet.m {
            jet_rows.push((jet.point(), kk));
        }
    }

    // w1: 0 at u, 1 at v
    let mut c_rows: Vec<Vec<C64>> = vec![basis.eval_row(u), basis.eval_row(v)];
    let mut c_rhs: Vec<C64> = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    for (p, kk) in &jet_rows {
        c_rows.push(basis.derivative_row(*p, *kk));
        c_rhs.push(C64::new(0.0, 0.0));
    }
    let (o_rows, o_rhs) = smallness_rows(&basis);
    let sol = constrained_lstsq(
        &dmatrix_from_rows(&c_rows),
        &dvector(&c_rhs),
        &dmatrix_from_rows(&o_rows),
        &dvector(&o_rhs),
    );
    let w1 = basis.combine(sol.x.as_slice());

    // w2: 0 at both endpoints, path integral against dy1 equal to -1
    let mut c_rows: Vec<Vec<C64>> = vec![basis.eval_row(u), basis.eval_row(v)];
    let mut c_rhs: Vec<C64> = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    for (p, kk) in &jet_rows {
        c_rows.push(basis.derivative_row(*p, *kk));
        c_rhs.push(C64::new(0.0, 0.0));
    }
    let dim = basis.dimension();
    let mut int_row = vec![C64::new(0.0, 0.0); dim];
    for (i, row_val) in int_row.iter_mut().enumerate() {
        let mut coeffs = vec![C64::new(0.0, 0.0); dim];
        coeffs[i] = C64::new(1.0, 0.0);
        let b = basis.combine(&coeffs);
        *row_val = arc_integral(&OneForm::new(b.mul(&dy1)?), &path, ARC_TOL)?.value;
    }
    c_rows.push(int_row);
    c_rhs.push(C64::new(-1.0, 0.0));
    let sol2 = constrained_lstsq(
        &dmatrix_from_rows(&c_rows),
        &dvector(&c_rhs),
        &dmatrix_from_rows(&o_rows),
        &dvector(&o_rhs),
    );
    let w2 = basis.combine(sol2.x.as_slice());

    // measured W-condition residuals
    let w3_max = [
        w1.evaluate(u)?.norm(),
        (w1.evaluate(v)? - C64::new(1.0, 0.0)).norm(),
        w2.evaluate(u)?.norm(),
        w2.evaluate(v)?.norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let w4_sup = path
        .samples(128)
        .iter()
        .map(|p| w1.evaluate(*p).map(|x| x.norm()).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    let w5_defect = (C64::new(1.0, 0.0)
        + arc_integral(&OneForm::new(w2.mul(&dy1)?), &path, ARC_TOL)?.value)
    .norm();
    let mut w6_mu = 0.0f64;
    for w in [&w1, &w2] {
        let wp = w.differentiate();
        for p in &support {
            w6_mu = w6_mu.max(w.evaluate(*p)?.norm()).max(wp.evaluate(*p)?.norm());
        }
    }
    let mu = w5_defect.max(w6_mu);
    Ok(EmbeddingProbe {
        u: [u.re, u.im],
        v: [v.re, v.im],
        w1,
        w2,
        path,
        mu,
        report: WReport { w3_max, w4_sup, w5_defect, w6_mu },
    })
}

/// Randomized double-point removal with a posteriori certification.
/// Returns the curve unchanged when ξ = 0 already passes every gate.
pub fn embedding_search(
    f: &LegendrianCurve,
    k: &CompactSet,
    protected: &[JetSpec],
    eps: f64,
    seed: u64,
) -> Result<(LegendrianCurve, EmbeddingReport), SprayError> {
    const CAND_GRID: usize = 150;
    const CERT_GRID: usize = 400;
    let data = grid_data(f, k, CAND_GRID)?;
    if data.immersion_floor <= 0.0 {
        return Err(SprayError::NotImmersed);
    }
    for jet in protected {
        if k.clearance(jet.point()) <= 0.0 {
            return Err(SprayError::SearchExhausted(
                "protected jet point outside the compact".into(),
            ));
        }
    }

    // candidate double points: image gap below 10x the local resolution,
    // parameter distance beyond the diagonal margin
    let l = data.lipschitz;
    let h = data.step;
    let nu = data.immersion_floor;
    let param_margin = 8.0 * h;
    let threshold = 10.0 * l * h;
    let mut cands: Vec<(usize, usize, f64)> = vec![];
    {
        let mut buckets: HashMap<(i64, i64, i64, i64), Vec<usize>> = HashMap::new();
        let cell = threshold;
        let key = |v: &[C64]| {
            (
                (v[0].re / cell).floor() as i64,
                (v[0].im / cell).floor() as i64,
                (v[1].re / cell).floor() as i64,
                (v[1].im / cell).floor() as i64,
            )
        };
        for (i, v) in data.values.iter().enumerate() {
            buckets.entry(key(v)).or_default().push(i);
        }
        for (k0, members) in &buckets {
            for d0 in -1..=1i64 {
                for d1 in -1..=1i64 {
                    for d2 in -1..=1i64 {
                        for d3 in -1..=1i64 {
                            let nb = (k0.0 + d0, k0.1 + d1, k0.2 + d2, k0.3 + d3);
                            if nb < *k0 {
                                continue;
                            }
                            if let Some(others) = buckets.get(&nb) {
                                for &i in members {
                                    for &j in others {
                                        if nb == *k0 && j <= i {
                                            continue;
                                        }
                                        if (data.points[i] - data.points[j]).norm() <= param_margin
                                        {
                                            continue;
                                        }
                                        let gap = data.values[i]
                                            .iter()
                                            .zip(&data.values[j])
                                            .map(|(a, b)| (a - b).norm())
                                            .fold(0.0, f64::max);
                                        let dist =
                                            (data.points[i] - data.points[j]).norm();
                                        // secant-slope filter: genuine double
                                        // points have gap far below nu x dist
                                        if gap < threshold && gap < 0.2 * nu * dist {
                                            cands.push((i, j, gap));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cands.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    // an already-clean curve is returned unchanged before any probe work
    if cands.is_empty() {
        let base_cert = certify_injectivity(f, k, CERT_GRID)?;
        if base_cert.pass {
            return Ok((
                f.clone(),
                EmbeddingReport {
                    probes: vec![],
                    certificate: base_cert,
                    sup_change: 0.0,
                    max_jet_distance: 0.0,
                    legendrian_residual: f.residual_form()?.max_coeff(),
                    candidates_tried: 1,
                    xi_radius: 0.0,
                    xi: vec![],
                },
            ));
        }
    }
    let mut probe_pairs: Vec<(C64, C64)> = vec![];
    let cluster_r = 6.0 * h;
    for (i, j, _) in &cands {
        let (u, v) = (data.points[*i], data.points[*j]);
        let dup = probe_pairs.iter().any(|(a, b)| {
            ((u - a).norm() < cluster_r && (v - b).norm() < cluster_r)
                || ((u - b).norm() < cluster_r && (v - a).norm() < cluster_r)
        });
        if !dup {
            probe_pairs.push((u, v));
        }
        if probe_pairs.len() >= 3 {
            break;
        }
    }

    // period map: one cycle per enclosed hole, one arc per protected jet
    let cycles = homology_basis(&f.domain, k);
    let base_point = pick_base_point(f, k, protected)?;
    let mut arcs = vec![];
    let mut offsets = vec![];
    let mut jet_kill = vec![];
    let mut route_seed = seed.wrapping_mul(977);
    for jet in protected {
        let p = jet.point();
        let avoid: Vec<crate::geometry::AvoidItem> =
            arcs.iter().map(crate::geometry::AvoidItem::Arc).collect();
        arcs.push(build_arc(&f.domain, base_point, p, &avoid, route_seed)?);
        route_seed = route_seed.wrapping_add(1);
        offsets.push(jet.z_jet(0) - f.z.evaluate(base_point)?);
        jet_kill.push((p, jet.m + 1));
    }
    let pm = ExtendedPeriodMap::new(cycles, arcs, base_point, offsets, f.n);
    let deriv_kill: Vec<C64> = if pm.rows() > 0 {
        crate::approx::zeros_of_derivative(&f.y[0], k)
            .map(|zs| {
                zs.into_iter()
                    .map(|(z, _)| z)
                    .filter(|z| !protected.iter().any(|j| (j.point() - z).norm() < 1e-8))
                    .collect()
            })
            .unwrap_or_default()
    } else {
        vec![]
    };
    let cs = if pm.rows() > 0 {
        build_corrections(&f.y[0], &pm, &jet_kill, &deriv_kill)?
    } else {
        CorrectionSet {
            g: vec![],
            h: vec![],
            report: crate::spray::CorrectionReport {
                cycle_max: 0.0,
                arc_max: 0.0,
                jet_max: 0.0,
                condition: 1.0,
                basis_dim: 0,
            },
        }
    };

    let probes: Result<Vec<EmbeddingProbe>, SprayError> = probe_pairs
        .iter()
        .map(|(u, v)| build_probe(f, k, &pm, protected, *u, *v, seed.wrapping_mul(31)))
        .collect();
    let probes = probes?;
    let np = probes.len();

    // precomputed period rows for every form the spray composition needs
    let mut xdy = OneForm::x_dy(&f.x[0], &f.y[0])?;
    for i in 1..f.n {
        xdy = xdy.add(&OneForm::x_dy(&f.x[i], &f.y[i])?);
    }
    let mut s_base: Vec<C64> = period_rows(&pm, &xdy)?;
    for (idx, off) in pm.offsets().iter().enumerate() {
        s_base[pm.cycles.len() + idx] += off;
    }
    let rows_of = |g: &LaurentPoly, dh: &LaurentPoly| -> Result<Vec<C64>, SprayError> {
        period_rows(&pm, &OneForm::new(g.mul(dh)?))
    };
    let mut a1 = vec![];
    let mut a3 = vec![];
    let mut b_rows = vec![];
    let mut c1 = vec![vec![]; np];
    let mut c3 = vec![vec![]; np];
    let mut dw: Vec<DMatrix<C64>> = vec![];
    for (bi, pb) in probes.iter().enumerate() {
        a1.push(rows_of(&pb.w1, &f.y[0])?);
        a3.push(rows_of(&pb.w2, &f.y[0])?);
        b_rows.push(rows_of(&f.x[0], &pb.w1)?);
        let mut dmat = DMatrix::<C64>::zeros(pm.rows(), pm.rows());
        for (col, func) in cs.g.iter().chain(cs.h.iter()).enumerate() {
            let r = rows_of(func, &pb.w1)?;
            for (ri, val) in r.iter().enumerate() {
                dmat[(ri, col)] = *val;
            }
        }
        dw.push(dmat);
        for pa in &probes {
            c1[bi].push(rows_of(&pa.w1, &pb.w1)?);
            c3[bi].push(rows_of(&pa.w2, &pb.w1)?);
        }
        let _ = bi;
    }
    let ds_base = if pm.rows() > 0 {
        assemble_ds(&cs, &f.y[0], &pm)?
    } else {
        DMatrix::<C64>::zeros(0, 0)
    };

    // per-coordinate sups of the probe functions, for the ξ budget: each
    // ξ coordinate is drawn with radius inversely proportional to the sup
    // of the function it multiplies
    let mut w1_sup = vec![1.0f64; np];
    let mut w2_sup = vec![1.0f64; np];
    for (a, pb) in probes.iter().enumerate() {
        let e1 = pb.w1.evaluator();
        let e2 = pb.w2.evaluator();
        for p in &data.points {
            w1_sup[a] = w1_sup[a].max(e1.eval(*p).norm());
            w2_sup[a] = w2_sup[a].max(e2.eval(*p).norm());
        }
    }

    let base_z0 = f.z.evaluate(base_point)?;
    let build_candidate = |xi: &[C64]| -> Result<LegendrianCurve, SprayError> {
        // xi layout: per probe (xi1, xi2, xi3)
        let mut x1 = f.x[0].clone();
        let mut y1 = f.y[0].clone();
        for (a, pb) in probes.iter().enumerate() {
            x1 = x1.add(&pb.w1.scale(xi[3 * a])).add(&pb.w2.scale(xi[3 * a + 2]));
            y1 = y1.add(&pb.w1.scale(xi[3 * a + 1]));
        }
        if pm.rows() > 0 {
            let mut s0 = s_base.clone();
            for a in 0..np {
                for (r, v) in a1[a].iter().enumerate() {
                    s0[r] += v * xi[3 * a];
                }
                for (r, v) in a3[a].iter().enumerate() {
                    s0[r] += v * xi[3 * a + 2];
                }
            }
            for b in 0..np {
                for (r, v) in b_rows[b].iter().enumerate() {
                    s0[r] += v * xi[3 * b + 1];
                }
                for a in 0..np {
                    for (r, v) in c1[b][a].iter().enumerate() {
                        s0[r] += v * xi[3 * a] * xi[3 * b + 1];
                    }
                    for (r, v) in c3[b][a].iter().enumerate() {
                        s0[r] += v * xi[3 * a + 2] * xi[3 * b + 1];
                    }
                }
            }
            let mut ds = ds_base.clone();
            for b in 0..np {
                ds += dw[b].clone() * xi[3 * b + 1];
            }
            let rhs = DVector::from_iterator(pm.rows(), s0.iter().map(|v| -v));
            let theta = ds.lu().solve(&rhs).ok_or(SprayError::SingularSystem)?;
            for (j, func) in cs.g.iter().chain(cs.h.iter()).enumerate() {
                x1 = x1.add(&func.scale(theta[j]));
            }
        }
        let mut form = OneForm::x_dy(&x1, &y1)?;
        for i in 1..f.n {
            form = form.add(&OneForm::x_dy(&f.x[i], &f.y[i])?);
        }
        let zraw = primitive(&form.coeff.neg().into())?;
        let shift = base_z0 - zraw.evaluate(base_point)?;
        let z = zraw.add(&LaurentPoly::constant(shift));
        let mut x = f.x.clone();
        let mut y = f.y.clone();
        x[0] = x1;
        y[0] = y1;
        Ok(LegendrianCurve::new_unchecked(f.n, x, y, z, f.domain.clone()))
    };

    let verify = |cand: &LegendrianCurve| -> Result<Option<EmbeddingReport>, SprayError> {
        let residual = cand.residual_form()?.max_coeff();
        if residual > crate::contact::RESIDUAL_EXACT {
            return Ok(None);
        }
        let cand_data = grid_data(cand, k, CAND_GRID)?;
        let mut sup_change = 0.0f64;
        for (vals, base_vals) in cand_data.values.iter().zip(&data.values) {
            for (a, b) in vals.iter().zip(base_vals) {
                sup_change = sup_change.max((a - b).norm());
            }
        }
        if sup_change > eps {
            return Ok(None);
        }
        let mut max_jd = 0.0f64;
        for jet in protected {
            let got = jet_of_curve(cand, jet.point(), jet.m)?;
            let d = jet_distance(&got, jet)?;
            max_jd = max_jd.max(d);
        }
        if max_jd > 1e-10 {
            return Ok(None);
        }
        // cheap screen on the candidate grid against the fine-grid deduction
        if cand_data.immersion_floor <= 0.0 {
            return Ok(None);
        }
        let fine_h = 2.0 * k.radius / CERT_GRID as f64;
        let fine_deduction = 2.0 * cand_data.lipschitz * fine_h;
        let pmarg = 3.0 * cand_data.lipschitz * cand_data.step / cand_data.immersion_floor;
        let screen_gap =
            min_offmargin_gap(&cand_data, pmarg, (2.0 * fine_deduction).max(1e-12));
        if screen_gap <= fine_deduction {
            return Ok(None);
        }
        let cert = certify_injectivity(cand, k, CERT_GRID)?;
        if !cert.pass {
            return Ok(None);
        }
        Ok(Some(EmbeddingReport {
            probes: probes.clone(),
            certificate: cert,
            sup_change,
            max_jet_distance: max_jd,
            legendrian_residual: residual,
            candidates_tried: 0,
            xi_radius: 0.0,
            xi: vec![],
        }))
    };

    // ξ = 0 first: an already-embedded curve comes back unchanged
    let mut tried = 0usize;
    let zero = vec![C64::new(0.0, 0.0); 3 * np];
    let cand0 = build_candidate(&zero)?;
    tried += 1;
    if let Some(mut report) = verify(&cand0)? {
        report.candidates_tried = tried;
        return Ok((cand0, report));
    }
    if np == 0 {
        return Err(SprayError::SearchExhausted(
            "no probe pairs found but the injectivity certificate fails".into(),
        ));
    }

    let r0 = eps / (2.5 * (np as f64).sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_margin = f64::NEG_INFINITY;
    for level in 0..20 {
        let radius = r0 / (1u64 << level) as f64;
        if radius < 1e-14 {
            break;
        }
        for _ in 0..64 {
            let xi: Vec<C64> = (0..3 * np)
                .map(|idx| {
                    let scale = match idx % 3 {
                        0 | 1 => w1_sup[idx / 3],
                        _ => w2_sup[idx / 3],
                    };
                    let r: f64 = rng.gen_range(0.0f64..1.0).sqrt() * radius / scale;
                    let th: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                    C64::new(0.0, th).exp() * r
                })
                .collect();
            tried += 1;
            let cand = match build_candidate(&xi) {
                Ok(c) => c,
                Err(_) => continue,
            };
            match verify(&cand) {
                Ok(Some(mut report)) => {
                    report.candidates_tried = tried;
                    report.xi_radius = radius;
                    report.xi = xi.iter().map(|c| (c.re, c.im)).collect();
                    return Ok((cand, report));
                }
                Ok(None) => {
                    if let Ok(cert) = certify_injectivity(&cand, k, 100) {
                        best_margin = best_margin.max(cert.margin);
                    }
                }
                Err(_) => {}
            }
        }
    }
    Err(SprayError::SearchExhausted(format!(
        "{} candidates over 20 radius levels (r0 = {:.3e}); best grid margin {:.3e}",
        tried, r0, best_margin
    )))
}

/// Probes that the search would construct, exposed for diagnostics.
pub fn debug_probes(
    f: &LegendrianCurve,
    k: &CompactSet,
    protected: &[JetSpec],
    seed: u64,
) -> Result<Vec<EmbeddingProbe>, SprayError> {
    let data = grid_data(f, k, 150)?;
    let l = data.lipschitz;
    let h = data.step;
    let nu = data.immersion_floor;
    let param_margin = 8.0 * h;
    let threshold = 10.0 * l * h;
    let mut cands: Vec<(usize, usize, f64)> = vec![];
    for i in 0..data.points.len() {
        for j in (i + 1)..data.points.len() {
            let dist = (data.points[i] - data.points[j]).norm();
            if dist <= param_margin {
                continue;
            }
            let gap = data.values[i]
                .iter()
                .zip(&data.values[j])
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if gap < threshold && gap < 0.2 * nu * dist {
                cands.push((i, j, gap));
            }
        }
    }
    cands.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let mut probe_pairs: Vec<(C64, C64)> = vec![];
    let cluster_r = 6.0 * h;
    for (i, j, _) in &cands {
        let (u, v) = (data.points[*i], data.points[*j]);
        let dup = probe_pairs.iter().any(|(a, b)| {
            ((u - a).norm() < cluster_r && (v - b).norm() < cluster_r)
                || ((u - b).norm() < cluster_r && (v - a).norm() < cluster_r)
        });
        if !dup {
            probe_pairs.push((u, v));
        }
        if probe_pairs.len() >= 3 {
            break;
        }
    }
    let cycles = homology_basis(&f.domain, k);
    let base_point = pick_base_point(f, k, protected)?;
    let pm = ExtendedPeriodMap::new(cycles, vec![], base_point, vec![], f.n);
    probe_pairs
        .iter()
        .map(|(u, v)| build_probe(f, k, &pm, protected, *u, *v, seed.wrapping_mul(31)))
        .collect()
}

fn pick_base_point(
    f: &LegendrianCurve,
    k: &CompactSet,
    protected: &[JetSpec],
) -> Result<C64, SprayError> {
    let mut best = k.center();
    let mut best_score = f64::NEG_INFINITY;
    for p in k.grid(21) {
        let mut score = k.clearance(p);
        for jet in protected {
            score = score.min((jet.point() - p).norm());
        }
        if score > best_score {
            best_score = score;
            best = p;
        }
    }
    let _ = f;
    Ok(best)
}

impl From<LaurentPoly> for OneForm {
    fn from(coeff: LaurentPoly) -> Self {
        OneForm::new(coeff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CircularDomain;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Nodal Legendrian curve with a genuine double point in C^3:
    /// x = s(ζ² - 7ζ⁴/6), y = s(ζ³ - ζ); then ∫ x dy vanishes over
    /// [-1, 1] so z(1) = z(-1) = 0 and f(1) = f(-1) = (0, 0, 0).
    pub(crate) fn nodal_curve(scale: f64) -> LegendrianCurve {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let s = scale;
        let x = LaurentPoly::from_coeffs(&[
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(s, 0.0),
            c(0.0, 0.0),
            c(-7.0 * s / 6.0, 0.0),
        ]);
        let y = LaurentPoly::from_coeffs(&[c(0.0, 0.0), c(-s, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
        LegendrianCurve::new(1, vec![x], vec![y], z, domain).unwrap()
    }

    #[test]
    fn nodal_curve_has_true_double_point() {
        let f = nodal_curve(0.4);
        let a = f.eval_point(c(1.0, 0.0)).unwrap();
        let b = f.eval_point(c(-1.0, 0.0)).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn injective_curve_certifies() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let x = LaurentPoly::monomial(1, c(1.0, 0.0));
        let y = LaurentPoly::monomial(1, c(1.0, 0.0));
        let z = LaurentPoly::monomial(2, c(-0.5, 0.0));
        let f = LegendrianCurve::new(1, vec![x], vec![y], z, domain).unwrap();
        let k = CompactSet::disk(c(0.0, 0.0), 1.0);
        let cert = certify_injectivity(&f, &k, 200).unwrap();
        assert!(cert.pass, "margin {}", cert.margin);
    }

    #[test]
    fn nodal_curve_fails_certificate() {
        let f = nodal_curve(0.4);
        let k = CompactSet::disk(c(0.0, 0.0), 1.05);
        let cert = certify_injectivity(&f, &k, 200).unwrap();
        assert!(!cert.pass);
    }

    #[test]
    fn embedded_curve_returned_unchanged() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let x = LaurentPoly::monomial(1, c(1.0, 0.0));
        let y = LaurentPoly::monomial(1, c(1.0, 0.0));
        let z = LaurentPoly::monomial(2, c(-0.5, 0.0));
        let f = LegendrianCurve::new(1, vec![x], vec![y], z, domain).unwrap();
        let k = CompactSet::disk(c(0.0, 0.0), 1.0);
        let (out, report) = embedding_search(&f, &k, &[], 0.5, 11).unwrap();
        assert_eq!(out, f);
        assert_eq!(report.candidates_tried, 1);
    }

    #[test]
    fn nodal_double_point_removed() {
        let f = nodal_curve(0.4);
        let k = CompactSet::disk(c(0.0, 0.0), 1.05);
        let (out, report) = embedding_search(&f, &k, &[], 0.5, 7).unwrap();
        assert!(report.certificate.pass);
        assert!(report.sup_change <= 0.5);
        assert!(report.legendrian_residual <= 1e-12);
        // the old double point is now separated
        let a = out.eval_point(c(1.0, 0.0)).unwrap();
        let b = out.eval_point(c(-1.0, 0.0)).unwrap();
        let gap = a.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(gap > 0.0, "gap {gap}");
    }

    #[test]
    fn zero_budget_with_double_point_exhausts() {
        let f = nodal_curve(0.4);
        let k = CompactSet::disk(c(0.0, 0.0), 1.05);
        let r = embedding_search(&f, &k, &[], 0.0, 7);
        assert!(matches!(r, Err(SprayError::SearchExhausted(_))));
    }
}
