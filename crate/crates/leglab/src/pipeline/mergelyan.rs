//! The exhaustion induction: approximate on each compact of a nested
//! family, halving budgets, extending over a canonical arc whenever a step
//! encloses a new hole, with immersion and injectivity upgrades carried
//! through measured caps.

use super::approximate::approximate_legendrian;
use super::extend::extend_spec;
use super::{
    Certificates, EpsSpec, PipelineError, ProblemSpec, RunReport, StageReport, TargetCurve,
};
use crate::contact::{jet_distance, jet_of_curve, JetSpec, LegendrianCurve};
use crate::embed::{certify_injectivity, embedding_search};
use crate::geometry::{
    build_arc, homology_basis, AdmissibleSet, Arc, AvoidItem, CompactSet, Exhaustion, StepKind,
};
use crate::spray::{eval_extended_period, ExtendedPeriodMap};
use crate::C64;

pub struct MergelyanOutcome {
    pub curve: LegendrianCurve,
    pub report: RunReport,
}

/// Canonical arc for a topology step: both endpoints on the previous
/// boundary, wrapping around the far side of the newly enclosed hole.
fn canonical_arc(
    spec: &ProblemSpec,
    prev: &CompactSet,
    hole_idx: usize,
    seed: u64,
) -> Result<Arc, PipelineError> {
    let hole = &spec.domain.holes[hole_idx];
    let c = prev.center();
    let to_hole = hole.center() - c;
    let dist = to_hole.norm();
    let dir = to_hole / dist;
    // angular half-width of the hole seen from the center, padded
    let half = ((hole.radius + 0.2) / dist).min(0.9).asin() + 0.35;
    let rot = |th: f64| C64::new(0.0, th).exp();
    let b_plus = c + dir * rot(half) * prev.radius;
    let b_minus = c + dir * rot(-half) * prev.radius;
    // waypoint beyond the hole forces the route around its far side
    let w = hole.center() + dir * (hole.radius + 0.35);
    let avoid = [AvoidItem::Compact(prev)];
    let leg1 = build_arc(&spec.domain, b_plus, w, &avoid, seed)?;
    let leg2 = build_arc(&spec.domain, w, b_minus, &avoid, seed.wrapping_add(1))?;
    let mut vertices: Vec<C64> = leg1.samples(24);
    vertices.extend(leg2.samples(24).into_iter().skip(1));
    Ok(Arc::polyline(vertices)?)
}

pub fn run_mergelyan_theorem(
    spec: &ProblemSpec,
    exhaustion: &Exhaustion,
    eps: f64,
) -> Result<MergelyanOutcome, PipelineError> {
    spec.validate()?;
    let n = spec.n;
    let initial_samples = spec.target.samples_on(&spec.s_set, 40.0)?;

    let mut stages: Vec<StageReport> = vec![];
    let mut budgets: Vec<f64> = vec![];
    let mut cur_target = spec.target.clone();
    let mut cur_set = spec.s_set.clone();
    let mut prev_compact: Option<CompactSet> = None;
    let mut pending_outside: Vec<JetSpec> = spec.outside_jets.clone();
    let mut inside_jets: Vec<JetSpec> = spec.inside_jets.clone();
    let mut nu_prev: Option<f64> = None;
    let mut margin_prev: Option<f64> = None;
    let mut final_curve: Option<LegendrianCurve> = None;

    for (idx, step) in exhaustion.steps.iter().enumerate() {
        let j = idx + 1;
        let mut budget = 1.0f64.min(eps) / (1u64 << (j + 1)) as f64;
        if spec.flags.immersion {
            if let Some(nu) = nu_prev {
                budget = budget.min(nu / (1u64 << j) as f64);
            }
        }
        if spec.flags.injective {
            if let Some(m) = margin_prev {
                budget = budget.min(m);
            }
        }
        if budget < 1e-14 {
            return Err(PipelineError::BudgetCollapse { round: j });
        }
        budgets.push(budget);

        // working admissible set for this step
        let mut s_work = match &prev_compact {
            Some(k) => AdmissibleSet::from_compact(k.clone()),
            None => cur_set.clone(),
        };
        let mut notes = vec![format!("step {j}: budget {budget:.3e}")];
        if let StepKind::ArcAttach(hole_idx) = step.kind {
            let host = s_work
                .components
                .iter()
                .max_by(|a, b| a.radius.partial_cmp(&b.radius).unwrap())
                .cloned();
            if let Some(host) = host {
                let lambda = canonical_arc(
                    spec,
                    &host,
                    hole_idx,
                    spec.seed.wrapping_add(31 * j as u64),
                )?;
                s_work.arcs.push(lambda);
                notes.push(format!("canonical arc attached around hole {hole_idx}"));
            }
        }

        // outside jets entering this step move inside through the extension
        let entering: Vec<JetSpec> = pending_outside
            .iter()
            .filter(|jet| step.set.clearance(jet.point()) > 1e-6)
            .cloned()
            .collect();
        pending_outside.retain(|jet| step.set.clearance(jet.point()) <= 1e-6);

        let mut sub = ProblemSpec {
            domain: spec.domain.clone(),
            n,
            s_set: s_work,
            target: cur_target.clone(),
            inside_jets: inside_jets
                .iter()
                .filter(|jet| step.set.clearance(jet.point()) > 1e-6)
                .cloned()
                .collect(),
            outside_jets: entering.clone(),
            flags: spec.flags,
            eps: EpsSpec::constant(budget),
            keep_component: spec.keep_component,
            seed: spec.seed.wrapping_add(j as u64),
            degree_max: spec.degree_max,
        };
        if !sub.outside_jets.is_empty() {
            let (extended, _) = extend_spec(&sub)?;
            sub = extended;
            notes.push(format!("{} outside jets extended into the set", entering.len()));
        }
        let out = approximate_legendrian(&sub, &step.set)?;
        let mut curve = out.curve;
        let mut stage = out.stage;
        stage.name = format!("step {j} ({:?})", step.kind);
        stage.notes.append(&mut notes);

        inside_jets.extend(entering);

        if spec.flags.injective {
            let protected: Vec<JetSpec> = inside_jets
                .iter()
                .filter(|jet| step.set.clearance(jet.point()) > 1e-6)
                .cloned()
                .collect();
            let (embedded, rep) = embedding_search(
                &curve,
                &step.set,
                &protected,
                budget / 2.0,
                spec.seed.wrapping_add(97 * j as u64),
            )?;
            curve = embedded;
            stage
                .notes
                .push(format!("embedding search: margin {:.3e}", rep.certificate.margin));
            margin_prev = Some(rep.certificate.min_offmargin_gap / 3.0);
        }
        if spec.flags.immersion {
            let mut nu = f64::INFINITY;
            let derivs: Vec<_> = curve
                .x
                .iter()
                .chain(curve.y.iter())
                .map(|c| c.differentiate().evaluator())
                .collect();
            for p in step.set.grid(150) {
                let m = derivs.iter().map(|d| d.eval(p).norm()).fold(0.0, f64::max);
                nu = nu.min(m);
            }
            nu_prev = Some(nu);
            stage.notes.push(format!("immersion floor {nu:.3e}"));
        }

        stages.push(stage);
        cur_target = TargetCurve::Exact(curve.clone());
        cur_set = AdmissibleSet::from_compact(step.set.clone());
        prev_compact = Some(step.set.clone());
        final_curve = Some(curve);
    }

    let curve = final_curve.expect("exhaustion has at least one step");
    let last = prev_compact.unwrap();

    // budget telescoping: the tail after round j stays below epsilon_j
    for j in 0..budgets.len() {
        let tail: f64 = budgets[j + 1..].iter().sum();
        if j + 1 < budgets.len() {
            assert!(
                tail < budgets[j] + 1e-15,
                "budget telescoping violated at round {j}"
            );
        }
    }

    // final certificates, recomputed from the curve alone
    let residual = curve.residual_form()?.max_coeff();
    let mut sup_error = 0.0f64;
    for (p, want) in &initial_samples {
        let got = curve.eval_point(*p)?;
        let err = got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        sup_error = sup_error.max(err);
    }
    let mut jet_max = 0.0f64;
    let all_jets: Vec<&JetSpec> =
        spec.inside_jets.iter().chain(spec.outside_jets.iter()).collect();
    for jet in &all_jets {
        let got = jet_of_curve(&curve, jet.point(), jet.m)?;
        jet_max = jet_max.max(jet_distance(&got, jet)?);
    }
    let cycles = homology_basis(&spec.domain, &last);
    let period_max = if cycles.is_empty() {
        0.0
    } else {
        let pm = ExtendedPeriodMap::new(cycles, vec![], last.center(), vec![], n);
        let (p, _) = eval_extended_period(&curve.x, &curve.y, &pm)?;
        p.iter().map(|v| v.norm()).fold(0.0, f64::max)
    };
    let immersion_floor = if spec.flags.immersion {
        let derivs: Vec<_> = curve
            .x
            .iter()
            .chain(curve.y.iter())
            .map(|c| c.differentiate().evaluator())
            .collect();
        let mut nu = f64::INFINITY;
        for p in last.grid(200) {
            nu = nu.min(derivs.iter().map(|d| d.eval(p).norm()).fold(0.0, f64::max));
        }
        Some(nu)
    } else {
        None
    };
    let injectivity_margin = if spec.flags.injective {
        Some(certify_injectivity(&curve, &last, 300)?.margin)
    } else {
        None
    };
    let pass = residual <= 1e-9
        && sup_error <= eps
        && jet_max <= 1e-9
        && period_max <= 1e-9
        && immersion_floor.map_or(true, |v| v > 0.0)
        && injectivity_margin.map_or(true, |v| v > 0.0);

    Ok(MergelyanOutcome {
        curve,
        report: RunReport {
            stages,
            budgets,
            certificates: Certificates {
                legendrian_residual: residual,
                period_max,
                max_jet_distance: jet_max,
                sup_error,
                boundary_norms: vec![],
                immersion_floor,
                injectivity_margin,
                pass,
            },
            seed: spec.seed,
        },
    })
}
