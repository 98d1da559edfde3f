//! Boundary norm push on concentric annuli.
//!
//! The boundary circle of the inner region is split into at most eight
//! sectors on each of which one component exceeds the floor rho; the
//! partner of that component receives a radial bump that is tiny on the
//! inner region and dominant on the outer boundary, so the large component
//! is never touched and the annulus keeps its floor. Periods are re-solved
//! through the additive spray when the domain has holes, z is
//! re-integrated, and a dense boundary scan is the certificate.

use super::PipelineError;
use crate::approx::boundary_bump;
use crate::contact::{apply_iso, apply_iso_inverse, ContactIso, LegendrianCurve};
use crate::geometry::{homology_basis, CompactSet};
use crate::laurent::{primitive, LaurentPoly, OneForm};
use crate::spray::{apply_spray, build_corrections, solve_affine, ExtendedPeriodMap};
use crate::C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PushReport {
    /// (component index, sample count) per boundary sector
    pub sectors: Vec<(usize, usize)>,
    /// components that received a bump
    pub bumped: Vec<usize>,
    pub min_annulus_norm: f64,
    pub min_outer_norm: f64,
    pub phase_attempts: u32,
    pub legendrian_residual: f64,
}

pub struct PushOutcome {
    pub curve: LegendrianCurve,
    pub report: PushReport,
}

/// Sector decomposition of the inner boundary: maximal runs of a single
/// covering component, greedily merged to at most eight.
fn sectors_on_boundary(
    f: &LegendrianCurve,
    r1: &CompactSet,
    rho: f64,
) -> Result<Vec<(usize, usize)>, PipelineError> {
    let samples = r1.outer_boundary_samples(4096);
    let ncomp = 2 * f.n + 1;
    let evals: Vec<_> = f.components().iter().map(|c| c.evaluator()).collect();
    let mut choice = Vec::with_capacity(samples.len());
    let mut prev: Option<usize> = None;
    for p in &samples {
        let vals: Vec<f64> = evals.iter().map(|e| e.eval(*p).norm()).collect();
        let keep_prev = prev.filter(|&i| vals[i] > rho);
        let pick = keep_prev.or_else(|| {
            (0..ncomp)
                .filter(|&i| vals[i] > rho)
                .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        });
        match pick {
            Some(i) => {
                choice.push(i);
                prev = Some(i);
            }
            None => return Err(PipelineError::SectorCoverFailure),
        }
    }
    // runs
    let mut sectors: Vec<(usize, usize)> = vec![];
    for &c in &choice {
        match sectors.last_mut() {
            Some((comp, count)) if *comp == c => *count += 1,
            _ => sectors.push((c, 1)),
        }
    }
    // circular merge of the wrap-around run
    if sectors.len() > 1 && sectors.first().unwrap().0 == sectors.last().unwrap().0 {
        let (_, last_count) = sectors.pop().unwrap();
        sectors[0].1 += last_count;
    }
    if sectors.len() > 8 {
        return Err(PipelineError::SectorCoverFailure);
    }
    Ok(sectors)
}

fn partner(comp: usize, n: usize) -> usize {
    if comp < n {
        comp + n
    } else if comp < 2 * n {
        comp - n
    } else {
        0
    }
}

/// Re-solves periods after a bump and re-integrates z, normalizing at the
/// inner center. The additive spray lives on x_1; when x_1 itself was
/// bumped the pair is rotated through a contactomorphism first.
fn resolve_and_integrate(
    mut curve: LegendrianCurve,
    region: &CompactSet,
    bumped: &[usize],
    z_anchor: (C64, C64),
) -> Result<LegendrianCurve, PipelineError> {
    let n = curve.n;
    let cycles = homology_basis(&curve.domain, region);
    if !cycles.is_empty() {
        if bumped.contains(&0) {
            // move the bumped pair out of the spray slot
            let iso = if n >= 2 { ContactIso::C1 { j: 2 } } else { ContactIso::C2 };
            let conj = apply_iso(iso, &curve)?;
            let mapped: Vec<usize> = bumped
                .iter()
                .map(|&b| match iso {
                    ContactIso::C1 { j } => {
                        if b == 0 {
                            j - 1
                        } else if b == j - 1 {
                            0
                        } else if b == n {
                            n + j - 1
                        } else if b == n + j - 1 {
                            n
                        } else {
                            b
                        }
                    }
                    ContactIso::C2 => {
                        if b == 0 {
                            n
                        } else if b == n {
                            0
                        } else {
                            b
                        }
                    }
                })
                .collect();
            let solved = resolve_and_integrate(conj, region, &mapped, z_anchor)?;
            return Ok(apply_iso_inverse(iso, &solved)?);
        }
        let pm = ExtendedPeriodMap::new(cycles, vec![], region.center(), vec![], n);
        let cs = build_corrections(&curve.y[0], &pm, &[], &[])?;
        let other_x: Vec<LaurentPoly> = curve.x[1..].to_vec();
        let (params, _) = solve_affine(&curve.x[0], &other_x, &curve.y, &cs, &pm)?;
        curve.x[0] = apply_spray(&curve.x[0], &cs, &params.zeta_c(), &params.xi_c());
    }
    let mut form = OneForm::zero();
    for i in 0..n {
        form = form.add(&OneForm::x_dy(&curve.x[i], &curve.y[i])?);
    }
    let zraw = primitive(&OneForm::new(form.coeff.neg()))?;
    let shift = z_anchor.1 - zraw.evaluate(z_anchor.0)?;
    curve.z = zraw.add(&LaurentPoly::constant(shift));
    Ok(curve)
}

/// Pushes the boundary norm of `f` from the inner compact to the outer
/// one: norm above `rho` on the whole annulus, above `rho + c_gain` on the
/// outer boundary, certified by dense scans.
pub fn push_boundary(
    f: &LegendrianCurve,
    r1: &CompactSet,
    r2: &CompactSet,
    rho: f64,
    c_gain: f64,
    small_tol: f64,
) -> Result<PushOutcome, PipelineError> {
    assert!(
        (r1.center() - r2.center()).norm() < 1e-9,
        "push regions must be concentric"
    );
    assert!(r2.radius / r1.radius >= 1.05, "radius ratio must be at least 1.05");
    let n = f.n;

    let scan_annulus = |curve: &LegendrianCurve| -> Result<f64, PipelineError> {
        let evals: Vec<_> = curve.components().iter().map(|c| c.evaluator()).collect();
        let mut min_norm = f64::INFINITY;
        for ir in 0..=32 {
            let r = r1.radius + (r2.radius - r1.radius) * ir as f64 / 32.0;
            for ia in 0..128 {
                let th = 2.0 * std::f64::consts::PI * ia as f64 / 128.0;
                let p = r1.center() + C64::new(0.0, th).exp() * r;
                if r2.clearance(p) < 0.0 {
                    continue;
                }
                let nm = evals.iter().map(|e| e.eval(p).norm()).fold(0.0, f64::max);
                min_norm = min_norm.min(nm);
            }
        }
        Ok(min_norm)
    };
    let scan_outer = |curve: &LegendrianCurve| -> Result<f64, PipelineError> {
        let evals: Vec<_> = curve.components().iter().map(|c| c.evaluator()).collect();
        let mut min_norm = f64::INFINITY;
        for p in r2.outer_boundary_samples(4096) {
            let nm = evals.iter().map(|e| e.eval(p).norm()).fold(0.0, f64::max);
            min_norm = min_norm.min(nm);
        }
        Ok(min_norm)
    };

    // the inner boundary must clear the floor before anything starts
    let f_min_inner = {
        let evals: Vec<_> = f.components().iter().map(|c| c.evaluator()).collect();
        r1.outer_boundary_samples(4096)
            .iter()
            .map(|p| evals.iter().map(|e| e.eval(*p).norm()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    };
    if f_min_inner <= rho {
        return Err(PipelineError::FloorViolated { floor: rho, reached: f_min_inner });
    }

    if rho <= 0.0 && c_gain <= 0.0 {
        let outer = scan_outer(f)?;
        let annulus = scan_annulus(f)?;
        if outer > 0.0 && annulus > 0.0 {
            return Ok(PushOutcome {
                curve: f.clone(),
                report: PushReport {
                    sectors: vec![],
                    bumped: vec![],
                    min_annulus_norm: annulus,
                    min_outer_norm: outer,
                    phase_attempts: 0,
                    legendrian_residual: f.residual_form()?.max_coeff(),
                },
            });
        }
    }

    let sectors = sectors_on_boundary(f, r1, rho)?;
    let mut bumped: Vec<usize> = sectors.iter().map(|&(c, _)| partner(c, n)).collect();
    bumped.sort_unstable();
    bumped.dedup();

    // per-component outer sup for the bump target
    let outer_samples = r2.outer_boundary_samples(512);
    let comp_sup = |curve: &LegendrianCurve, idx: usize| -> Result<f64, PipelineError> {
        let comp = curve.components()[idx].clone();
        let e = comp.evaluator();
        Ok(outer_samples.iter().map(|p| e.eval(*p).norm()).fold(0.0, f64::max))
    };

    let z_anchor = (r1.center(), f.z.evaluate(r1.center())?);
    for attempt in 0..8u32 {
        let phase = C64::new(0.0, attempt as f64 * 0.785).exp();
        let mut curve = f.clone();
        for &b in &bumped {
            let target = rho + c_gain + comp_sup(f, b)? + 1.0;
            let w = boundary_bump(r1, r2, small_tol, target)?.scale(phase);
            if b < n {
                curve.x[b] = curve.x[b].add(&w);
            } else if b < 2 * n {
                curve.y[b - n] = curve.y[b - n].add(&w);
            } else {
                curve.x[0] = curve.x[0].add(&w);
            }
        }
        let curve = resolve_and_integrate(curve, r2, &bumped, z_anchor)?;
        let annulus = scan_annulus(&curve)?;
        let outer = scan_outer(&curve)?;
        let residual = curve.residual_form()?.max_coeff();
        if annulus > rho && outer > rho + c_gain && residual <= 1e-9 {
            return Ok(PushOutcome {
                curve,
                report: PushReport {
                    sectors,
                    bumped,
                    min_annulus_norm: annulus,
                    min_outer_norm: outer,
                    phase_attempts: attempt + 1,
                    legendrian_residual: residual,
                },
            });
        }
    }
    Err(PipelineError::FloorViolated { floor: rho + c_gain, reached: f64::NAN })
}
