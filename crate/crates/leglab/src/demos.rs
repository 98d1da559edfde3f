//! Bundled demo problems: one per pipeline surface, sized so every run
//! finishes at desk scale. These double as the acceptance fixtures.

use crate::contact::{jet_of_curve, JetSpec, LegendrianCurve};
use crate::geometry::{AdmissibleSet, Arc, CircularDomain, CompactSet, Disk};
use crate::laurent::{primitive, LaurentPoly, OneForm};
use crate::pipeline::{
    approximate_legendrian, extend_spec, push_boundary, run_carleman, run_mergelyan_theorem,
    CarlemanSpec, EpsSpec, Flags, PipelineError, ProblemSpec, Ray, RunReport, TargetCurve,
};
use crate::report::CurveBundle;
use crate::C64;
use serde::{Deserialize, Serialize};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A runnable demo file: the same schema `leglab run` consumes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "lowercase")]
pub enum DemoFile {
    Approximate {
        spec: ProblemSpec,
        region: CompactSet,
    },
    Extend {
        spec: ProblemSpec,
        region: CompactSet,
    },
    Mergelyan {
        spec: ProblemSpec,
        exhaustion_count: usize,
        eps: f64,
    },
    Carleman {
        spec: CarlemanSpec,
    },
    Push {
        curve: LegendrianCurve,
        r1: CompactSet,
        r2: CompactSet,
        rho: f64,
        c_gain: f64,
        small_tol: f64,
    },
    Embed {
        curve: LegendrianCurve,
        k: CompactSet,
        protected: Vec<JetSpec>,
        eps: f64,
        seed: u64,
    },
}

impl DemoFile {
    pub fn set_seed(&mut self, s: u64) {
        match self {
            DemoFile::Approximate { spec, .. } | DemoFile::Extend { spec, .. } => spec.seed = s,
            DemoFile::Mergelyan { spec, .. } => spec.seed = s,
            DemoFile::Carleman { spec } => spec.seed = s,
            DemoFile::Embed { seed, .. } => *seed = s,
            DemoFile::Push { .. } => {}
        }
    }

    pub fn set_degree_max(&mut self, d: u32) {
        match self {
            DemoFile::Approximate { spec, .. } | DemoFile::Extend { spec, .. } => {
                spec.degree_max = d
            }
            DemoFile::Mergelyan { spec, .. } => spec.degree_max = d,
            DemoFile::Carleman { spec } => spec.degree_max = d,
            _ => {}
        }
    }

    pub fn set_tol(&mut self, t: f64) {
        match self {
            DemoFile::Approximate { spec, .. } | DemoFile::Extend { spec, .. } => {
                spec.eps = EpsSpec::constant(t)
            }
            DemoFile::Mergelyan { spec, eps, .. } => {
                spec.eps = EpsSpec::constant(t);
                *eps = t;
            }
            DemoFile::Carleman { spec } => spec.eps = EpsSpec::constant(t),
            DemoFile::Push { small_tol, .. } => *small_tol = t,
            DemoFile::Embed { eps, .. } => *eps = t,
        }
    }
}

/// Artifacts of one run: the curve bundle, the report as JSON, and a
/// default arc for CSV sampling.
pub struct RunArtifacts {
    pub bundle: CurveBundle,
    pub report: serde_json::Value,
    pub csv_arc: Arc,
}

pub fn run_demo_file(file: &DemoFile) -> Result<RunArtifacts, PipelineError> {
    match file {
        DemoFile::Approximate { spec, region } => {
            let out = approximate_legendrian(spec, region)?;
            Ok(RunArtifacts {
                bundle: CurveBundle { curve: out.curve, jets: all_jets(spec) },
                report: serde_json::to_value(&out.stage).unwrap(),
                csv_arc: Arc::closed_circle(region.center(), region.radius * 0.98, 1),
            })
        }
        DemoFile::Extend { spec, region } => {
            let (extended, arcs) = extend_spec(spec)?;
            let out = approximate_legendrian(&extended, region)?;
            let report = serde_json::json!({
                "stage": out.stage,
                "extension_arcs": arcs,
            });
            Ok(RunArtifacts {
                bundle: CurveBundle { curve: out.curve, jets: all_jets(spec) },
                report,
                csv_arc: Arc::closed_circle(region.center(), region.radius * 0.98, 1),
            })
        }
        DemoFile::Mergelyan { spec, exhaustion_count, eps } => {
            let marked: Vec<C64> = spec
                .inside_jets
                .iter()
                .chain(spec.outside_jets.iter())
                .map(|j| j.point())
                .collect();
            let exhaustion =
                crate::geometry::default_exhaustion(&spec.domain, *exhaustion_count, &marked)?;
            let out = run_mergelyan_theorem(spec, &exhaustion, *eps)?;
            let last = exhaustion.steps.last().unwrap().set.clone();
            Ok(RunArtifacts {
                bundle: CurveBundle { curve: out.curve, jets: all_jets(spec) },
                report: serde_json::to_value(&out.report).unwrap(),
                csv_arc: Arc::closed_circle(last.center(), last.radius * 0.98, 1),
            })
        }
        DemoFile::Carleman { spec } => {
            let out = run_carleman(spec)?;
            let report = serde_json::json!({
                "report": out.report,
                "rounds": out.rounds,
            });
            let r = spec.radii.last().copied().unwrap_or(1.0);
            Ok(RunArtifacts {
                bundle: CurveBundle {
                    curve: out.curve,
                    jets: spec
                        .inside_jets
                        .iter()
                        .chain(spec.outside_jets.iter())
                        .cloned()
                        .collect(),
                },
                report,
                csv_arc: Arc::segment(c(-r, 0.0), c(r, 0.0)).unwrap(),
            })
        }
        DemoFile::Push { curve, r1, r2, rho, c_gain, small_tol } => {
            let out = push_boundary(curve, r1, r2, *rho, *c_gain, *small_tol)?;
            Ok(RunArtifacts {
                bundle: CurveBundle { curve: out.curve, jets: vec![] },
                report: serde_json::to_value(&out.report).unwrap(),
                csv_arc: Arc::closed_circle(r2.center(), r2.radius, 1),
            })
        }
        DemoFile::Embed { curve, k, protected, eps, seed } => {
            let (out, report) = crate::embed::embedding_search(curve, k, protected, *eps, *seed)?;
            Ok(RunArtifacts {
                bundle: CurveBundle { curve: out, jets: protected.clone() },
                report: serde_json::to_value(&report).unwrap(),
                csv_arc: Arc::closed_circle(k.center(), k.radius * 0.98, 1),
            })
        }
    }
}

fn all_jets(spec: &ProblemSpec) -> Vec<JetSpec> {
    spec.inside_jets.iter().chain(spec.outside_jets.iter()).cloned().collect()
}

/// The parabolic Legendrian curve (ζ, ζ, -ζ²/2).
pub fn parabola() -> LegendrianCurve {
    LegendrianCurve::new(
        1,
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        LaurentPoly::monomial(2, c(-0.5, 0.0)),
        CircularDomain::plane(vec![]).unwrap(),
    )
    .unwrap()
}

/// Nodal Legendrian curve with a genuine double point f(1) = f(-1) = 0:
/// x = s(ζ² - 7ζ⁴/6), y = s(ζ³ - ζ) makes ∫ x dy vanish over [-1, 1].
pub fn nodal_curve(scale: f64) -> LegendrianCurve {
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
    LegendrianCurve::new(1, vec![x], vec![y], z, CircularDomain::plane(vec![]).unwrap()).unwrap()
}

/// The literal nodal (x, y) pair whose z-lift separates the double point.
pub fn nodal_literal() -> LegendrianCurve {
    let x = LaurentPoly::from_coeffs(&[c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let y = LaurentPoly::from_coeffs(&[c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
    LegendrianCurve::new(1, vec![x], vec![y], z, CircularDomain::plane(vec![]).unwrap()).unwrap()
}

fn base_spec(domain: CircularDomain, n: usize, s_set: AdmissibleSet, target: TargetCurve) -> ProblemSpec {
    ProblemSpec {
        domain,
        n,
        s_set,
        target,
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-6),
        keep_component: None,
        seed: 1,
        degree_max: 64,
    }
}

pub fn demo_names() -> Vec<&'static str> {
    vec![
        "disk-jets",
        "disk-n2",
        "annulus-period",
        "annulus-n2",
        "two-hole-period",
        "two-hole-n2",
        "outside-jets",
        "immersion-mergelyan",
        "nodal-embedding",
        "carleman-axis",
        "carleman-proper",
        "keep-z-annulus",
    ]
}

pub fn build_demo(name: &str) -> Option<DemoFile> {
    match name {
        "disk-jets" => {
            let domain = CircularDomain::plane(vec![]).unwrap();
            let target = parabola();
            let jet = jet_of_curve(&target, c(0.0, 0.0), 2).unwrap();
            let mut spec = base_spec(
                domain,
                1,
                AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.55)),
                TargetCurve::Exact(target),
            );
            spec.inside_jets = vec![jet];
            Some(DemoFile::Approximate { spec, region: CompactSet::disk(c(0.0, 0.0), 1.5) })
        }
        "disk-n2" => {
            let domain = CircularDomain::plane(vec![]).unwrap();
            let x = vec![
                LaurentPoly::monomial(1, c(1.0, 0.0)),
                LaurentPoly::monomial(2, c(1.0, 0.0)),
            ];
            let y = vec![
                LaurentPoly::monomial(1, c(1.0, 0.0)),
                LaurentPoly::monomial(2, c(1.0, 0.0)),
            ];
            let mut form = OneForm::x_dy(&x[0], &y[0]).unwrap();
            form = form.add(&OneForm::x_dy(&x[1], &y[1]).unwrap());
            let z = primitive(&form).unwrap().neg();
            let target = LegendrianCurve::new(2, x, y, z, domain.clone()).unwrap();
            let jets = vec![
                jet_of_curve(&target, c(0.2, 0.0), 2).unwrap(),
                jet_of_curve(&target, c(-0.1, 0.25), 1).unwrap(),
            ];
            let mut spec = base_spec(
                domain,
                2,
                AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.6)),
                TargetCurve::Exact(target),
            );
            spec.inside_jets = jets;
            Some(DemoFile::Approximate { spec, region: CompactSet::disk(c(0.0, 0.0), 1.3) })
        }
        "annulus-period" => {
            // target (1/ζ, ζ, -Log ζ) sampled on a disk right of the hole
            let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.25)]).unwrap();
            let s_disk = CompactSet::disk(c(0.75, 0.0), 0.28);
            let data: Vec<(C64, Vec<C64>)> = s_disk
                .spiral_samples(900.0)
                .into_iter()
                .map(|p| (p, vec![p.finv(), p, -p.ln()]))
                .collect();
            let mut spec = base_spec(
                domain.clone(),
                1,
                AdmissibleSet::from_compact(s_disk),
                TargetCurve::Samples { n: 1, data },
            );
            spec.eps = EpsSpec::constant(2e-5);
            let margins = crate::geometry::hole_margins(&domain);
            let region =
                CompactSet::concentric(&domain, c(0.0, 0.0), 1.4, &|i| margins[i]).unwrap();
            Some(DemoFile::Approximate { spec, region })
        }
        "annulus-n2" => {
            let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.3)]).unwrap();
            let centers = domain.pole_centers();
            let x = vec![
                LaurentPoly::pole_term(&centers, 0, -2, c(1.0, 0.0)),
                LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers),
            ];
            let y = vec![
                LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers),
                LaurentPoly::monomial(2, c(1.0, 0.0)).with_centers(&centers),
            ];
            let mut form = OneForm::x_dy(&x[0], &y[0]).unwrap();
            form = form.add(&OneForm::x_dy(&x[1], &y[1]).unwrap());
            let z = primitive(&form).unwrap().neg();
            let target = LegendrianCurve::new(2, x, y, z, domain.clone()).unwrap();
            let jets = vec![jet_of_curve(&target, c(0.85, 0.0), 1).unwrap()];
            let margins = crate::geometry::hole_margins(&domain);
            let s_set =
                CompactSet::concentric(&domain, c(0.0, 0.0), 1.1, &|i| margins[i]).unwrap();
            let mut spec = base_spec(
                domain.clone(),
                2,
                AdmissibleSet::from_compact(s_set),
                TargetCurve::Exact(target),
            );
            spec.inside_jets = jets;
            let region =
                CompactSet::concentric(&domain, c(0.0, 0.0), 1.5, &|i| margins[i]).unwrap();
            Some(DemoFile::Approximate { spec, region })
        }
        "two-hole-period" => {
            // x = 1/ζ + 1/(ζ-3) with nonzero periods at both holes, sampled
            // on a disk in the upper half plane between the holes
            let domain = CircularDomain::plane(vec![
                Disk::new(c(0.0, 0.0), 0.25),
                Disk::new(c(3.0, 0.0), 0.25),
            ])
            .unwrap();
            let s_disk = CompactSet::disk(c(1.5, 0.6), 0.4);
            let data: Vec<(C64, Vec<C64>)> = s_disk
                .spiral_samples(400.0)
                .into_iter()
                .map(|p| {
                    let x = p.finv() + (p - c(3.0, 0.0)).finv();
                    let z = -p.ln() - (p - c(3.0, 0.0)).ln();
                    (p, vec![x, p, z])
                })
                .collect();
            let mut spec = base_spec(
                domain.clone(),
                1,
                AdmissibleSet::from_compact(s_disk),
                TargetCurve::Samples { n: 1, data },
            );
            spec.eps = EpsSpec::constant(5e-5);
            let margins = crate::geometry::hole_margins(&domain);
            let region =
                CompactSet::concentric(&domain, c(1.5, 0.0), 2.4, &|i| margins[i]).unwrap();
            Some(DemoFile::Approximate { spec, region })
        }
        "two-hole-n2" => {
            let domain = CircularDomain::plane(vec![
                Disk::new(c(0.0, 0.0), 0.25),
                Disk::new(c(3.0, 0.0), 0.25),
            ])
            .unwrap();
            let centers = domain.pole_centers();
            let x1 = LaurentPoly::pole_term(&centers, 0, -2, c(1.0, 0.0))
                .add(&LaurentPoly::pole_term(&centers, 1, -2, c(1.0, 0.0)));
            let y1 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
            let x2 = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
            let y2 = LaurentPoly::constant(c(2.0, 0.0)).with_centers(&centers);
            let mut form = OneForm::x_dy(&x1, &y1).unwrap();
            form = form.add(&OneForm::x_dy(&x2, &y2).unwrap());
            let z = primitive(&form).unwrap().neg();
            let target =
                LegendrianCurve::new(2, vec![x1, x2], vec![y1, y2], z, domain.clone()).unwrap();
            let jets = vec![jet_of_curve(&target, c(1.5, 0.5), 2).unwrap()];
            let margins = crate::geometry::hole_margins(&domain);
            let s_set =
                CompactSet::concentric(&domain, c(1.5, 0.0), 2.0, &|i| margins[i]).unwrap();
            let mut spec = base_spec(
                domain.clone(),
                2,
                AdmissibleSet::from_compact(s_set),
                TargetCurve::Exact(target),
            );
            spec.inside_jets = jets;
            spec.eps = EpsSpec::constant(1e-6);
            let region =
                CompactSet::concentric(&domain, c(1.5, 0.0), 2.4, &|i| margins[i]).unwrap();
            Some(DemoFile::Approximate { spec, region })
        }
        "outside-jets" => {
            let domain = CircularDomain::plane(vec![]).unwrap();
            let target = parabola();
            let inside = vec![
                jet_of_curve(&target, c(0.15, 0.0), 3).unwrap(),
                jet_of_curve(&target, c(-0.2, 0.1), 2).unwrap(),
                jet_of_curve(&target, c(0.0, 0.25), 0).unwrap(),
            ];
            let phi1 = LegendrianCurve::new(
                1,
                vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
                vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
                LaurentPoly::monomial(2, c(-0.5, 0.0)).add(&LaurentPoly::constant(c(0.15, 0.0))),
                domain.clone(),
            )
            .unwrap();
            let phi2 = LegendrianCurve::new(
                1,
                vec![LaurentPoly::monomial(1, c(2.0, 0.0))],
                vec![LaurentPoly::monomial(2, c(1.0, 0.0))],
                primitive(
                    &OneForm::x_dy(
                        &LaurentPoly::monomial(1, c(2.0, 0.0)),
                        &LaurentPoly::monomial(2, c(1.0, 0.0)),
                    )
                    .unwrap(),
                )
                .unwrap()
                .neg(),
                domain.clone(),
            )
            .unwrap();
            let outside = vec![
                jet_of_curve(&phi1, c(1.3, 0.0), 3).unwrap(),
                jet_of_curve(&phi2, c(0.0, 1.1), 2).unwrap(),
            ];
            let mut spec = base_spec(
                domain,
                1,
                AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.5)),
                TargetCurve::Exact(target),
            );
            spec.inside_jets = inside;
            spec.outside_jets = outside;
            spec.eps = EpsSpec::constant(0.6);
            Some(DemoFile::Extend { spec, region: CompactSet::disk(c(0.0, 0.0), 2.0) })
        }
        "immersion-mergelyan" => {
            let domain = CircularDomain::plane(vec![]).unwrap();
            let x = LaurentPoly::monomial(2, c(1.0, 0.0));
            let y = LaurentPoly::monomial(2, c(1.0, 0.0));
            let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
            let target = LegendrianCurve::new(1, vec![x], vec![y], z, domain.clone()).unwrap();
            let mut spec = base_spec(
                domain,
                1,
                AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.8)),
                TargetCurve::Exact(target),
            );
            spec.flags = Flags { immersion: true, ..Default::default() };
            spec.eps = EpsSpec::constant(1e-3);
            Some(DemoFile::Mergelyan { spec, exhaustion_count: 3, eps: 1e-3 })
        }
        "nodal-embedding" => Some(DemoFile::Embed {
            curve: nodal_curve(0.4),
            k: CompactSet::disk(c(0.0, 0.0), 1.05),
            protected: vec![],
            eps: 0.5,
            seed: 7,
        }),
        "carleman-axis" => Some(DemoFile::Carleman { spec: carleman_axis_spec(false) }),
        "carleman-proper" => Some(DemoFile::Carleman { spec: carleman_axis_spec(true) }),
        "keep-z-annulus" => {
            let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.25)]).unwrap();
            let centers = domain.pole_centers();
            let x = LaurentPoly::constant(c(2.0, 0.0))
                .with_centers(&centers)
                .add(&LaurentPoly::pole_term(&centers, 0, -2, c(0.25, 0.0)));
            let y = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
            let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
            let target = LegendrianCurve::new(1, vec![x], vec![y], z, domain.clone()).unwrap();
            let margins = crate::geometry::hole_margins(&domain);
            let s_set =
                CompactSet::concentric(&domain, c(0.0, 0.0), 1.0, &|i| margins[i]).unwrap();
            let mut spec = base_spec(
                domain.clone(),
                1,
                AdmissibleSet::from_compact(s_set),
                TargetCurve::Exact(target),
            );
            spec.keep_component = Some(2);
            spec.eps = EpsSpec::constant(1e-4);
            let region =
                CompactSet::concentric(&domain, c(0.0, 0.0), 1.3, &|i| margins[i]).unwrap();
            Some(DemoFile::Approximate { spec, region })
        }
        _ => None,
    }
}

fn carleman_axis_spec(proper: bool) -> CarlemanSpec {
    let eps_samples: Vec<(f64, f64)> = (0..=80)
        .map(|k| {
            let r = k as f64 * 0.1;
            (r, 1.0 / (1.0 + r * r))
        })
        .collect();
    CarlemanSpec {
        domain: CircularDomain::plane(vec![]).unwrap(),
        n: 1,
        rays: vec![Ray::axis()],
        target: parabola(),
        eps: EpsSpec::Samples { samples: eps_samples },
        radii: vec![1.0, 2.0, 3.0],
        flags: Flags { proper, ..Default::default() },
        inside_jets: vec![],
        outside_jets: vec![],
        seed: 29,
        degree_max: 64,
    }
}

/// Report type re-exported for CLI convenience.
pub type Report = RunReport;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_demo_names_build() {
        for name in demo_names() {
            assert!(build_demo(name).is_some(), "demo {name} missing");
        }
        assert!(build_demo("nonsense").is_none());
        assert!(demo_names().len() >= 6);
    }

    #[test]
    fn demo_files_serialize() {
        for name in demo_names() {
            let file = build_demo(name).unwrap();
            let s = serde_json::to_string(&file).unwrap();
            let _: DemoFile = serde_json::from_str(&s).unwrap();
        }
    }
}
