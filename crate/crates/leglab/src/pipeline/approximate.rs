//! Jet-interpolating Legendrian approximation on an admissible set.
//!
//! The x and y components are fitted by constrained least squares with the
//! prescribed jets as exact rows, y_1 is nudged nonconstant if needed, the
//! immersion correction is applied on request, and the additive spray
//! kills all periods and hits the z-value targets in one affine solve.
//! z is then a symbolic primitive, so the Legendrian residual stays at
//! rounding level. Keeping a component routes through the coordinate
//! contactomorphisms; keeping z runs the multiplicative variant.

use super::{EpsSpec, Flags, PipelineError, ProblemSpec, StageReport, TargetCurve};
use crate::approx::{
    immersion_fix, make_nonconstant, mergelyan_jets, zeros_of_derivative, JetRows, LaurentBasis,
};
use crate::contact::{
    apply_iso, apply_iso_inverse, jet_distance, jet_of_curve, ContactIso, JetSpec,
    LegendrianCurve,
};
use crate::geometry::{build_arc, homology_basis, AvoidItem, CircularDomain, CompactSet};
use crate::laurent::{primitive, LaurentPoly, OneForm};
use crate::linalg::{constrained_lstsq, dmatrix_from_rows, dvector};
use crate::spray::{
    build_corrections_quad, build_corrections_quiet, eval_extended_period, solve_affine,
    solve_multiplicative, ExtendedPeriodMap, SprayError,
};
use crate::C64;

pub struct ApproximateOutcome {
    pub curve: LegendrianCurve,
    pub stage: StageReport,
}

/// Everything the sample-level driver needs besides the samples.
#[derive(Clone)]
pub(crate) struct ApproxCtx<'a> {
    pub domain: &'a CircularDomain,
    pub n: usize,
    pub jets: &'a [JetSpec],
    pub flags: Flags,
    pub eps: &'a EpsSpec,
    pub seed: u64,
    pub degree_max: u32,
    /// admissible set used only for the nonconstancy nudge
    pub s_set: Option<&'a crate::geometry::AdmissibleSet>,
}

/// S is Runge in the region iff no component of region-minus-S is
/// relatively compact: every free component of a flood fill must reach the
/// region boundary or a hole.
pub fn runge_check(
    s: &crate::geometry::AdmissibleSet,
    region: &CompactSet,
    _domain: &CircularDomain,
) -> bool {
    let n = 96usize;
    let c = region.center();
    let h = 2.0 * region.radius / n as f64;
    let idx = |i: usize, j: usize| i * n + j;
    // 0 = outside region (or hole), 1 = in S, 2 = free
    let mut label = vec![0u8; n * n];
    for i in 0..n {
        for j in 0..n {
            let p = C64::new(
                c.re - region.radius + (i as f64 + 0.5) * h,
                c.im - region.radius + (j as f64 + 0.5) * h,
            );
            if region.clearance(p) <= 0.0 {
                label[idx(i, j)] = 0;
            } else if s.components.iter().any(|k| k.clearance(p) >= 0.0) {
                label[idx(i, j)] = 1;
            } else {
                label[idx(i, j)] = 2;
            }
        }
    }
    let mut seen = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if label[idx(i, j)] != 2 || seen[idx(i, j)] {
                continue;
            }
            let mut queue = vec![(i, j)];
            seen[idx(i, j)] = true;
            let mut escapes = false;
            while let Some((a, b)) = queue.pop() {
                if a == 0 || b == 0 || a == n - 1 || b == n - 1 {
                    escapes = true;
                }
                let neighbors =
                    [(a.wrapping_sub(1), b), (a + 1, b), (a, b.wrapping_sub(1)), (a, b + 1)];
                for (x, y) in neighbors {
                    if x >= n || y >= n {
                        continue;
                    }
                    match label[idx(x, y)] {
                        0 => escapes = true,
                        2 if !seen[idx(x, y)] => {
                            seen[idx(x, y)] = true;
                            queue.push((x, y));
                        }
                        _ => {}
                    }
                }
            }
            if !escapes {
                return false;
            }
        }
    }
    true
}

/// Deterministic base point: the sample farthest from holes and jets,
/// returned with its target values.
fn pick_base_point<'a>(
    samples: &'a [(C64, Vec<C64>)],
    domain: &CircularDomain,
    jets: &[JetSpec],
) -> (C64, &'a [C64]) {
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (p, _)) in samples.iter().enumerate() {
        let mut score = f64::INFINITY;
        for h in &domain.holes {
            score = score.min(h.distance(*p));
        }
        for jet in jets {
            score = score.min((jet.point() - *p).norm());
        }
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    (samples[best].0, &samples[best].1)
}

pub fn approximate_legendrian(
    spec: &ProblemSpec,
    region: &CompactSet,
) -> Result<ApproximateOutcome, PipelineError> {
    spec.validate()?;
    if !runge_check(&spec.s_set, region, &spec.domain) {
        return Err(PipelineError::NotRunge);
    }
    match spec.keep_component {
        None => spec_approximate(spec, region, None),
        Some(idx) if idx == 2 * spec.n => approximate_keep_z(spec, region),
        Some(idx) if idx >= 1 => spec_approximate(spec, region, Some(idx)),
        Some(_) => {
            // keeping x_1: conjugate so the kept slot is never sprayed
            let iso = if spec.n >= 2 { ContactIso::C1 { j: 2 } } else { ContactIso::C2 };
            let kept_after = if spec.n >= 2 { 1 } else { spec.n };
            let conj = conjugate_spec(spec, iso)?;
            let mut out = spec_approximate(&conj, region, Some(kept_after))?;
            out.curve = apply_iso_inverse(iso, &out.curve)?;
            out.stage.notes.push("kept component routed through a contactomorphism".into());
            Ok(out)
        }
    }
}

/// Transforms a spec through a contactomorphism (exact targets only).
fn conjugate_spec(spec: &ProblemSpec, iso: ContactIso) -> Result<ProblemSpec, PipelineError> {
    let exact = match &spec.target {
        TargetCurve::Exact(c) => c.clone(),
        _ => return Err(PipelineError::KeptComponentNotGlobal),
    };
    let target = TargetCurve::Exact(apply_iso(iso, &exact)?);
    let inside: Result<Vec<_>, _> =
        spec.inside_jets.iter().map(|j| jet_apply_iso(iso, j)).collect();
    let outside: Result<Vec<_>, _> =
        spec.outside_jets.iter().map(|j| jet_apply_iso(iso, j)).collect();
    Ok(ProblemSpec { target, inside_jets: inside?, outside_jets: outside?, ..spec.clone() })
}

/// Jets transform alongside the curve under c1 and c2.
pub fn jet_apply_iso(
    iso: ContactIso,
    jet: &JetSpec,
) -> Result<JetSpec, crate::contact::ContactError> {
    let n = jet.n();
    let m = jet.m;
    let xj: Vec<Vec<C64>> = (0..n).map(|i| (0..=m).map(|k| jet.x_jet(i, k)).collect()).collect();
    let yj: Vec<Vec<C64>> = (0..n).map(|i| (0..=m).map(|k| jet.y_jet(i, k)).collect()).collect();
    let zj: Vec<C64> = (0..=m).map(|k| jet.z_jet(k)).collect();
    match iso {
        ContactIso::C1 { j } => {
            let mut xj = xj;
            let mut yj = yj;
            xj.swap(0, j - 1);
            yj.swap(0, j - 1);
            JetSpec::new(jet.point(), m, xj, yj, zj)
        }
        ContactIso::C2 => {
            let mut nxj = xj.clone();
            let mut nyj = yj.clone();
            nxj[0] = yj[0].iter().map(|v| -v).collect();
            nyj[0] = xj[0].clone();
            let binom = |nn: usize, kk: usize| -> f64 {
                let kk = kk.min(nn - kk);
                let mut out = 1.0;
                for i in 0..kk {
                    out = out * (nn - i) as f64 / (i + 1) as f64;
                }
                out
            };
            let nz: Vec<C64> = (0..=m)
                .map(|k| {
                    let mut prod = C64::new(0.0, 0.0);
                    for l in 0..=k {
                        prod += xj[0][l] * yj[0][k - l] * binom(k, l);
                    }
                    zj[k] + prod
                })
                .collect();
            JetSpec::new(jet.point(), m, nxj, nyj, nz)
        }
    }
}

fn spec_approximate(
    spec: &ProblemSpec,
    region: &CompactSet,
    keep: Option<usize>,
) -> Result<ApproximateOutcome, PipelineError> {
    let n = spec.n;
    let measure: f64 = spec.s_set.components.iter().map(|c| c.area()).sum::<f64>()
        + spec.s_set.arcs.iter().map(|a| a.length()).sum::<f64>();
    let density = (260.0 / measure.max(1e-6)).clamp(8.0, 400.0);
    let samples = spec.target.samples_on(&spec.s_set, density)?;

    let kept_exact = if let Some(ki) = keep {
        let exact = spec.target.exact().ok_or(PipelineError::KeptComponentNotGlobal)?;
        let comp = if ki < n { exact.x[ki].clone() } else { exact.y[ki - n].clone() };
        for c in comp.centers() {
            if !spec.domain.pole_centers().iter().any(|d| (d - c).norm() < 1e-9) {
                return Err(PipelineError::KeptComponentNotGlobal);
            }
        }
        Some(comp)
    } else {
        None
    };
    let ctx = ApproxCtx {
        domain: &spec.domain,
        n,
        jets: &spec.inside_jets,
        flags: spec.flags,
        eps: &spec.eps,
        seed: spec.seed,
        degree_max: spec.degree_max,
        s_set: Some(&spec.s_set),
    };
    approximate_core(&ctx, region, keep, &kept_exact, &samples)
}

/// Sample-level entry point used by the induction drivers.
pub(crate) fn approximate_from_samples(
    ctx: &ApproxCtx,
    region: &CompactSet,
    samples: &[(C64, Vec<C64>)],
) -> Result<ApproximateOutcome, PipelineError> {
    approximate_core(ctx, region, None, &None, samples)
}

fn approximate_core(
    ctx: &ApproxCtx,
    region: &CompactSet,
    keep: Option<usize>,
    kept_exact: &Option<LaurentPoly>,
    samples: &[(C64, Vec<C64>)],
) -> Result<ApproximateOutcome, PipelineError> {
    let sample_points: Vec<C64> = samples.iter().map(|(p, _)| *p).collect();
    let eps_min = ctx.eps.min_on(&sample_points);
    let fit_tol = eps_min / (6.0 * (2 * ctx.n + 1) as f64);
    let centers: Vec<C64> = region
        .enclosed_mask()
        .iter()
        .map(|&i| ctx.domain.holes[i].center())
        .collect();
    let pole_scales: Vec<f64> = region.excluded.iter().map(|(_, d)| d.radius).collect();
    let mut basis = LaurentBasis::scaled(
        &centers,
        8,
        vec![4; centers.len()],
        region.center(),
        region.radius,
        pole_scales,
    );
    let mut last_err = f64::INFINITY;
    for _round in 0..6 {
        match attempt(ctx, region, keep, kept_exact, samples, &basis, fit_tol) {
            Ok(outcome) => return Ok(outcome),
            Err(PipelineError::FitBudgetUnreached { sup_error, .. }) => {
                last_err = sup_error;
                if basis.max_poly_deg * 2 > ctx.degree_max {
                    return Err(PipelineError::FitBudgetUnreached {
                        sup_error,
                        budget: eps_min,
                    });
                }
                basis = basis.enlarged();
            }
            Err(e) => return Err(e),
        }
    }
    Err(PipelineError::FitBudgetUnreached { sup_error: last_err, budget: eps_min })
}

fn attempt(
    ctx: &ApproxCtx,
    region: &CompactSet,
    keep: Option<usize>,
    kept_exact: &Option<LaurentPoly>,
    samples: &[(C64, Vec<C64>)],
    basis: &LaurentBasis,
    fit_tol: f64,
) -> Result<ApproximateOutcome, PipelineError> {
    let n = ctx.n;
    let jets = ctx.jets;
    let mut notes = vec![];

    let fit_component = |comp_idx: usize| -> Result<(LaurentPoly, f64), PipelineError> {
        let pts: Vec<(C64, C64)> = samples.iter().map(|(p, v)| (*p, v[comp_idx])).collect();
        let jet_rows: Vec<JetRows> = jets
            .iter()
            .map(|jet| JetRows {
                p: jet.point(),
                values: (0..=jet.m)
                    .map(|k| {
                        if comp_idx < n {
                            jet.x_jet(comp_idx, k)
                        } else {
                            jet.y_jet(comp_idx - n, k)
                        }
                    })
                    .collect(),
            })
            .collect();
        let (f, report) = mergelyan_jets(&pts, &jet_rows, basis)?;
        Ok((f, report.sup_error))
    };

    let mut x: Vec<LaurentPoly> = Vec::with_capacity(n);
    let mut y: Vec<LaurentPoly> = Vec::with_capacity(n);
    let mut worst_fit = 0.0f64;
    for i in 0..n {
        if keep == Some(i) {
            x.push(kept_exact.clone().unwrap());
        } else {
            let (f, e) = fit_component(i)?;
            worst_fit = worst_fit.max(e);
            x.push(f);
        }
    }
    for i in 0..n {
        if keep == Some(n + i) {
            y.push(kept_exact.clone().unwrap());
        } else {
            let (f, e) = fit_component(n + i)?;
            worst_fit = worst_fit.max(e);
            y.push(f);
        }
    }
    // the component-fit tolerance is advisory: the per-sample certificate
    // in finish_stage is the binding gate, and escalation retries from there
    if worst_fit > fit_tol {
        notes.push(format!(
            "component fit reached {worst_fit:.2e} against the advisory {fit_tol:.2e}"
        ));
    }

    // y_1 drives the corrections and must be nonconstant
    if !y[0].is_nonconstant(1e-10) {
        if keep == Some(n) {
            return Err(PipelineError::Spray(SprayError::DegenerateDy1));
        }
        if jets.is_empty() {
            if let Some(s_set) = ctx.s_set {
                y[0] = make_nonconstant(&y[0], s_set);
            } else {
                y[0] = y[0].add(&LaurentPoly::monomial(1, C64::new(1e-6, 0.0)));
            }
            notes.push("y_1 made nonconstant by a linear tilt".into());
        } else {
            // refit with one synthetic sample prescribing a different value
            let far = samples
                .iter()
                .map(|(p, _)| *p)
                .max_by(|a, b| {
                    let da = jets
                        .iter()
                        .map(|j| (j.point() - a).norm())
                        .fold(f64::INFINITY, f64::min);
                    let db = jets
                        .iter()
                        .map(|j| (j.point() - b).norm())
                        .fold(f64::INFINITY, f64::min);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            let mut pts: Vec<(C64, C64)> =
                samples.iter().map(|(p, v)| (*p, v[n])).collect();
            pts.push((far, samples[0].1[n] + C64::new(1e-5, 0.0)));
            let jet_rows: Vec<JetRows> = jets
                .iter()
                .map(|jet| JetRows {
                    p: jet.point(),
                    values: (0..=jet.m).map(|k| jet.y_jet(0, k)).collect(),
                })
                .collect();
            let (f, _) = mergelyan_jets(&pts, &jet_rows, basis)?;
            if !f.is_nonconstant(1e-10) {
                return Err(PipelineError::Spray(SprayError::DegenerateDy1));
            }
            notes.push("y_1 refitted with a synthetic sample to break constancy".into());
            y[0] = f;
        }
    }

    // immersion correction on the (x_1, y_1) pair
    if ctx.flags.immersion && keep != Some(0) {
        let protect: Vec<(C64, usize)> =
            jets.iter().filter(|j| j.m >= 1).map(|j| (j.point(), j.m)).collect();
        let (fixed, delta) = immersion_fix(&x[0], &y[0], region, &protect, fit_tol.max(1e-9))?;
        x[0] = fixed;
        if delta > 0.0 {
            notes.push(format!("immersion correction applied with delta = {delta:.1e}"));
        }
    }

    // period map: cycles around enclosed holes, one arc per jet
    let cycles = homology_basis(ctx.domain, region);
    let (p0, p0_values) = pick_base_point(samples, ctx.domain, jets);
    let z_p0 = p0_values[2 * n];
    let mut arcs = vec![];
    let mut offsets = vec![];
    for (i, jet) in jets.iter().enumerate() {
        let avoid: Vec<AvoidItem> = arcs.iter().map(AvoidItem::Arc).collect();
        arcs.push(build_arc(
            ctx.domain,
            p0,
            jet.point(),
            &avoid,
            ctx.seed.wrapping_add(1613 * i as u64),
        )?);
        offsets.push(jet.z_jet(0) - z_p0);
    }
    let pm = ExtendedPeriodMap::new(cycles, arcs, p0, offsets, n);

    let mut x1 = x[0].clone();
    if pm.rows() > 0 {
        let jet_kill: Vec<(C64, usize)> =
            jets.iter().filter(|j| j.m >= 1).map(|j| (j.point(), j.m + 1)).collect();
        let mut deriv_kill: Vec<C64> =
            jets.iter().filter(|j| j.m == 0).map(|j| j.point()).collect();
        if ctx.flags.immersion {
            if let Ok(zeros) = zeros_of_derivative(&y[0], region) {
                for (z, _) in zeros {
                    if !jets.iter().any(|j| (j.point() - z).norm() < 1e-8) {
                        deriv_kill.push(z);
                    }
                }
            }
        }
        // corrections kept small on the data, away from the cycles
        let quiet: Vec<C64> = samples
            .iter()
            .map(|(p, _)| *p)
            .filter(|p| {
                pm.cycles.iter().all(|cyc| {
                    ((p - cyc.center()).norm() - cyc.radius).abs() > 0.2 * cyc.radius
                })
            })
            .collect();
        let cs = build_corrections_quiet(
            &y[0],
            &pm,
            &jet_kill,
            &deriv_kill,
            &quiet,
            Some((region.center(), region.radius)),
        )?;
        let other_x: Vec<LaurentPoly> = x[1..].to_vec();
        let (params, solve_report) = solve_affine(&x1, &other_x, &y, &cs, &pm)?;
        x1 = crate::spray::apply_spray(&x1, &cs, &params.zeta_c(), &params.xi_c());
        notes.push(format!(
            "spray solved: |DS - I| = {:.2e}, post |P| = {:.2e}, post |Z| = {:.2e}",
            solve_report.ds_identity_defect, solve_report.post_p_max, solve_report.post_z_max
        ));
    }
    x[0] = x1;

    // z by symbolic integration, normalized at the base point
    let mut form = OneForm::zero();
    for i in 0..n {
        form = form.add(&OneForm::x_dy(&x[i], &y[i])?);
    }
    let zraw = primitive(&OneForm::new(form.coeff.neg()))?;
    let shift = z_p0 - zraw.evaluate(p0)?;
    let z = zraw.add(&LaurentPoly::constant(shift));

    let curve = LegendrianCurve::new_unchecked(n, x, y, z, ctx.domain.clone());
    finish_stage(ctx, region, curve, samples, notes)
}

/// Shared verification and stage assembly.
fn finish_stage(
    ctx: &ApproxCtx,
    region: &CompactSet,
    curve: LegendrianCurve,
    samples: &[(C64, Vec<C64>)],
    mut notes: Vec<String>,
) -> Result<ApproximateOutcome, PipelineError> {
    let residual = curve.residual_form()?.max_coeff();

    let mut sup_error = 0.0f64;
    let mut budget_violated = false;
    for (p, want) in samples {
        let got = curve.eval_point(*p)?;
        let err = got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        sup_error = sup_error.max(err);
        if err > ctx.eps.at(*p) {
            budget_violated = true;
        }
    }
    let eps_min =
        ctx.eps.min_on(&samples.iter().map(|(p, _)| *p).collect::<Vec<_>>());
    if budget_violated {
        return Err(PipelineError::FitBudgetUnreached { sup_error, budget: eps_min });
    }

    let mut jet_max = 0.0f64;
    for jet in ctx.jets {
        let got = jet_of_curve(&curve, jet.point(), jet.m)?;
        jet_max = jet_max.max(jet_distance(&got, jet)?);
    }
    if jet_max > 1e-9 {
        notes.push(format!("jet distance {jet_max:.2e} exceeds 1e-9"));
        return Err(PipelineError::FitBudgetUnreached { sup_error: jet_max, budget: 1e-9 });
    }

    let cycles = homology_basis(ctx.domain, region);
    let period_max = if cycles.is_empty() {
        0.0
    } else {
        let pm = ExtendedPeriodMap::new(cycles, vec![], region.center(), vec![], ctx.n);
        let (p, _) = eval_extended_period(&curve.x, &curve.y, &pm)?;
        p.iter().map(|v| v.norm()).fold(0.0, f64::max)
    };

    Ok(ApproximateOutcome {
        curve,
        stage: StageReport {
            name: "approximate".into(),
            budget: eps_min,
            sup_change_prev: sup_error,
            sup_error_on_s: sup_error,
            legendrian_residual: residual,
            period_max,
            jet_max_distance: jet_max,
            notes,
        },
    })
}

/// The fixed-z variant: z is kept bit-identical, x_1 is multiplied by a
/// truncated exponential spray, and y_1 is recovered by a least-squares
/// primitive of beta'/x_1.
fn approximate_keep_z(
    spec: &ProblemSpec,
    region: &CompactSet,
) -> Result<ApproximateOutcome, PipelineError> {
    let n = spec.n;
    let jets = &spec.inside_jets;
    let exact = spec.target.exact().ok_or(PipelineError::KeptComponentNotGlobal)?;
    let z = exact.z.clone();
    for c in z.centers() {
        if !spec.domain.pole_centers().iter().any(|d| (d - c).norm() < 1e-9) {
            return Err(PipelineError::KeptComponentNotGlobal);
        }
    }

    let measure: f64 = spec.s_set.components.iter().map(|c| c.area()).sum::<f64>()
        + spec.s_set.arcs.iter().map(|a| a.length()).sum::<f64>();
    let density = (260.0 / measure.max(1e-6)).clamp(8.0, 400.0);
    let samples = spec.target.samples_on(&spec.s_set, density)?;
    let sample_points: Vec<C64> = samples.iter().map(|(p, _)| *p).collect();
    let eps_min = spec.eps.min_on(&sample_points);
    let fit_tol = eps_min / (6.0 * (2 * n + 1) as f64);

    let centers: Vec<C64> = region
        .enclosed_mask()
        .iter()
        .map(|&i| spec.domain.holes[i].center())
        .collect();
    let pole_scales: Vec<f64> = region.excluded.iter().map(|(_, d)| d.radius).collect();
    let basis = LaurentBasis::scaled(
        &centers,
        8,
        vec![4; centers.len()],
        region.center(),
        region.radius,
        pole_scales.clone(),
    );

    let fit = |comp_idx: usize| -> Result<LaurentPoly, PipelineError> {
        let pts: Vec<(C64, C64)> = samples.iter().map(|(p, v)| (*p, v[comp_idx])).collect();
        let jet_rows: Vec<JetRows> = jets
            .iter()
            .map(|jet| JetRows {
                p: jet.point(),
                values: (0..=jet.m)
                    .map(|k| {
                        if comp_idx < n {
                            jet.x_jet(comp_idx, k)
                        } else {
                            jet.y_jet(comp_idx - n, k)
                        }
                    })
                    .collect(),
            })
            .collect();
        let (f, report) = mergelyan_jets(&pts, &jet_rows, &basis)?;
        if report.sup_error > fit_tol {
            return Err(PipelineError::FitBudgetUnreached {
                sup_error: report.sup_error,
                budget: fit_tol,
            });
        }
        Ok(f)
    };
    let x: Vec<LaurentPoly> = (0..n).map(fit).collect::<Result<_, _>>()?;
    let mut y: Vec<LaurentPoly> = Vec::with_capacity(n);
    y.push(LaurentPoly::zero()); // y_1 recovered below
    for i in 1..n {
        y.push(fit(n + i)?);
    }

    // x_1 must stay away from zero on the region for beta'/x_1 to be tame
    let x1 = x[0].clone();
    let mut min_mod = f64::INFINITY;
    for p in region.grid(80) {
        min_mod = min_mod.min(x1.evaluate(p)?.norm());
    }
    if min_mod < 1e-6 {
        return Err(PipelineError::KeptZVanishingX1 { min_mod });
    }

    // beta' = -dz - Σ_{i>=2} x_i dy_i
    let mut beta = OneForm::d(&z).coeff.neg();
    for i in 1..n {
        beta = beta.sub(&OneForm::x_dy(&x[i], &y[i])?.coeff);
    }
    let beta_prime = OneForm::new(beta);

    // period map with y-value offsets
    let cycles = homology_basis(&spec.domain, region);
    let (p0, p0_values) = pick_base_point(&samples, &spec.domain, jets);
    let y1_p0 = p0_values[n];
    let mut arcs = vec![];
    let mut offsets = vec![];
    for (i, jet) in jets.iter().enumerate() {
        let avoid: Vec<AvoidItem> = arcs.iter().map(AvoidItem::Arc).collect();
        arcs.push(build_arc(
            &spec.domain,
            p0,
            jet.point(),
            &avoid,
            spec.seed.wrapping_add(3001 * i as u64),
        )?);
        offsets.push(y1_p0 - jet.y_jet(0, 0));
    }
    let pm = ExtendedPeriodMap::new(cycles, arcs, p0, offsets, n);

    let mut notes = vec![];
    let mut x1_final = x1.clone();
    if pm.rows() > 0 {
        let jet_kill: Vec<(C64, usize)> =
            jets.iter().filter(|j| j.m >= 1).map(|j| (j.point(), j.m + 1)).collect();
        let deriv_kill: Vec<C64> =
            jets.iter().filter(|j| j.m == 0).map(|j| j.point()).collect();
        let x1_eval = x1.evaluator();
        let beta_eval = beta_prime.coeff.evaluator();
        let weight = move |u: C64| beta_eval.eval(u) / x1_eval.eval(u);
        let cs = build_corrections_quad(&weight, &pm, &jet_kill, &deriv_kill)?;
        let zero_extra = LaurentPoly::zero();
        let (params, newton) =
            solve_multiplicative(&x1, &beta_prime, &cs, &pm, &zero_extra, 50)?;
        notes.push(format!(
            "multiplicative spray converged in {} iterations (|S| = {:.2e})",
            newton.iterations, newton.final_norm
        ));
        // truncated exponential of the spray exponent, exact Laurent
        let mut s_poly = LaurentPoly::zero().with_centers(&centers);
        for (g, zv) in cs.g.iter().zip(params.zeta_c()) {
            s_poly = s_poly.add(&g.scale(zv));
        }
        for (h, xv) in cs.h.iter().zip(params.xi_c()) {
            s_poly = s_poly.add(&h.scale(xv));
        }
        let mut s_sup = 0.0f64;
        for p in region.grid(50) {
            s_sup = s_sup.max(s_poly.evaluate(p)?.norm());
        }
        let mut kfact = 1.0f64;
        let mut trunc_k = 1usize;
        for k in 1..=24usize {
            kfact *= k as f64;
            trunc_k = k;
            if s_sup.powi(k as i32 + 1) / (kfact * (k as f64 + 1.0)) < 1e-14 {
                break;
            }
        }
        let mut texp = LaurentPoly::constant(C64::new(1.0, 0.0)).with_centers(&centers);
        let mut power = LaurentPoly::constant(C64::new(1.0, 0.0)).with_centers(&centers);
        let mut fact = 1.0f64;
        for k in 1..=trunc_k {
            power = power.mul(&s_poly)?;
            fact *= k as f64;
            texp = texp.add(&power.scale(C64::new(1.0 / fact, 0.0)));
        }
        x1_final = x1.mul(&texp)?;
    }

    // recover y_1 from x~_1 dy_1 = beta' by constrained least squares on
    // the derivative, escalating until the symbolic residual passes
    let x1e = x1_final.evaluator();
    let be = beta_prime.coeff.evaluator();
    let mut fit_points: Vec<C64> = region.grid(26);
    fit_points.extend(sample_points.iter().cloned());
    let mut y_basis = LaurentBasis::scaled(
        &centers,
        12,
        vec![6; centers.len()],
        region.center(),
        region.radius,
        pole_scales,
    );
    let mut best_residual = f64::INFINITY;
    for _ in 0..4 {
        let mut o_rows = Vec::with_capacity(fit_points.len());
        let mut o_rhs = Vec::with_capacity(fit_points.len());
        for p in &fit_points {
            let drow = y_basis.derivative_row(*p, 1);
            let xv = x1e.eval(*p);
            o_rows.push(drow.iter().map(|b| b * xv).collect::<Vec<C64>>());
            o_rhs.push(be.eval(*p));
        }
        let mut c_rows = vec![y_basis.eval_row(p0)];
        let mut c_rhs = vec![y1_p0];
        for jet in jets {
            for k in 0..=jet.m {
                c_rows.push(y_basis.derivative_row(jet.point(), k));
                c_rhs.push(jet.y_jet(0, k));
            }
        }
        let sol = constrained_lstsq(
            &dmatrix_from_rows(&c_rows),
            &dvector(&c_rhs),
            &dmatrix_from_rows(&o_rows),
            &dvector(&o_rhs),
        );
        let y1 = y_basis.combine(sol.x.as_slice());
        let residual_form = x1_final.mul(&y1.differentiate())?.sub(&beta_prime.coeff);
        let res = residual_form.max_coeff();
        best_residual = best_residual.min(res);
        if res <= 1e-9 {
            y[0] = y1;
            break;
        }
        y_basis = y_basis.enlarged();
    }
    if y[0].is_zero() && best_residual > 1e-9 {
        return Err(PipelineError::FitBudgetUnreached {
            sup_error: best_residual,
            budget: 1e-9,
        });
    }

    let mut xs = x;
    xs[0] = x1_final;
    let curve = LegendrianCurve::new_unchecked(n, xs, y, z, spec.domain.clone());
    notes.push("z kept bit-identical through the multiplicative variant".into());
    let ctx = ApproxCtx {
        domain: &spec.domain,
        n,
        jets: &spec.inside_jets,
        flags: spec.flags,
        eps: &spec.eps,
        seed: spec.seed,
        degree_max: spec.degree_max,
        s_set: Some(&spec.s_set),
    };
    finish_stage(&ctx, region, curve, &samples, notes)
}
