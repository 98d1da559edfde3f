use leglab::contact::{jet_of_curve, verify_legendrian, JetSpec, LegendrianCurve};
use leglab::geometry::{
    default_exhaustion, homology_basis, AdmissibleSet, Arc, CircularDomain, CompactSet, Disk,
};
use leglab::laurent::{arc_integral, primitive, LaurentPoly, OneForm};
use leglab::pipeline::*;
use leglab::spray::{eval_extended_period, ExtendedPeriodMap};
use leglab::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn parabola() -> LegendrianCurve {
    let domain = CircularDomain::plane(vec![]).unwrap();
    LegendrianCurve::new(
        1,
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        LaurentPoly::monomial(2, c(-0.5, 0.0)),
        domain,
    )
    .unwrap()
}

#[test]
fn approximate_segment_with_jet() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    let jet = jet_of_curve(&target, c(0.0, 0.0), 2).unwrap();
    let seg = Arc::segment(c(-0.5, 0.0), c(0.5, 0.0)).unwrap();
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet { components: vec![], arcs: vec![seg] },
        target: TargetCurve::Exact(target.clone()),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-6),
        keep_component: None,
        seed: 5,
        degree_max: 64,
    };
    // the jet point sits on the segment, which has no interior: pass it as
    // data for the approximation only
    let mut spec = spec;
    spec.s_set = AdmissibleSet {
        components: vec![CompactSet::disk(c(0.0, 0.0), 0.55)],
        arcs: vec![],
    };
    spec.inside_jets = vec![jet.clone()];
    let region = CompactSet::disk(c(0.0, 0.0), 1.5);
    let out = approximate_legendrian(&spec, &region).unwrap();
    assert!(out.stage.sup_error_on_s <= 1e-6);
    assert!(out.stage.legendrian_residual <= 1e-12);
    let got = jet_of_curve(&out.curve, c(0.0, 0.0), 2).unwrap();
    assert!(leglab::contact::jet_distance(&got, &jet).unwrap() <= 1e-9);
}

#[test]
fn annulus_period_sampled_target() {
    // target (1/z, z, -Log z) on a small disk to the right of the hole
    let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.25)]).unwrap();
    let s_disk = CompactSet::disk(c(0.75, 0.0), 0.28);
    let data: Vec<(C64, Vec<C64>)> = s_disk
        .spiral_samples(900.0)
        .into_iter()
        .map(|p| {
            let x = p.finv();
            let y = p;
            let z = -p.ln();
            (p, vec![x, y, z])
        })
        .collect();
    assert!(data.len() > 150);
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet::from_compact(s_disk.clone()),
        target: TargetCurve::Samples { n: 1, data },
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(2e-5),
        keep_component: None,
        seed: 9,
        degree_max: 64,
    };
    let margins = leglab::geometry::hole_margins(&domain);
    let region = CompactSet::concentric(&domain, c(0.0, 0.0), 1.4, &|i| margins[i]).unwrap();
    let out = approximate_legendrian(&spec, &region).unwrap();
    // periods of the result vanish
    let cycles = homology_basis(&domain, &region);
    let pm = ExtendedPeriodMap::new(cycles, vec![], c(0.75, 0.0), vec![], 1);
    let (p, _) = eval_extended_period(&out.curve.x, &out.curve.y, &pm).unwrap();
    assert!(p[0].norm() <= 1e-9, "period {}", p[0].norm());
    assert!(out.stage.legendrian_residual <= 1e-12);
    assert!(out.stage.sup_error_on_s <= 2e-5, "sup {}", out.stage.sup_error_on_s);
}

#[test]
fn extend_outside_constant_jet() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    // constant Legendrian jet (1, 2, 3) at an outside point
    let jet = JetSpec::new(
        c(1.5, 0.0),
        0,
        vec![vec![c(1.0, 0.0)]],
        vec![vec![c(2.0, 0.0)]],
        vec![c(3.0, 0.0)],
    )
    .unwrap();
    let spec = ProblemSpec {
        domain,
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.5)),
        target: TargetCurve::Exact(target),
        inside_jets: vec![],
        outside_jets: vec![jet],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-5),
        keep_component: None,
        seed: 3,
        degree_max: 64,
    };
    let (extended, arcs) = extend_spec(&spec).unwrap();
    assert_eq!(arcs.len(), 1);
    match &extended.target {
        TargetCurve::Generalized(g) => {
            assert_eq!(g.patches.len(), 1);
            let v = g.patches[0].value_at(c(1.5, 0.0)).unwrap();
            assert!((v[0] - c(1.0, 0.0)).norm() < 1e-12);
            assert!((v[1] - c(2.0, 0.0)).norm() < 1e-12);
            assert!((v[2] - c(3.0, 0.0)).norm() < 1e-12);
            // Legendrian along the arc
            // finite-difference check of the z table; the error is the
            // second-order difference stencil, not the construction
            assert!(g.links[0].legendrian_defect() < 1e-5);
        }
        _ => panic!("expected generalized target"),
    }
}

#[test]
fn approximate_through_outside_jet() {
    // a mild outside jet: the shifted parabola (ζ, ζ, -ζ²/2 + 0.2) at 1.5
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    let phi = LegendrianCurve::new(
        1,
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        vec![LaurentPoly::monomial(1, c(1.0, 0.0))],
        LaurentPoly::monomial(2, c(-0.5, 0.0)).add(&LaurentPoly::constant(c(0.2, 0.0))),
        domain.clone(),
    )
    .unwrap();
    let jet = jet_of_curve(&phi, c(1.5, 0.0), 2).unwrap();
    let spec = ProblemSpec {
        domain,
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.5)),
        target: TargetCurve::Exact(target),
        inside_jets: vec![],
        outside_jets: vec![jet.clone()],
        flags: Flags::default(),
        eps: EpsSpec::constant(0.5),
        keep_component: None,
        seed: 3,
        degree_max: 64,
    };
    let (extended, _) = extend_spec(&spec).unwrap();
    let region = CompactSet::disk(c(0.0, 0.0), 2.2);
    let out = approximate_legendrian(&extended, &region).unwrap();
    assert!(out.stage.legendrian_residual <= 1e-12);
    let got = jet_of_curve(&out.curve, c(1.5, 0.0), 2).unwrap();
    assert!(leglab::contact::jet_distance(&got, &jet).unwrap() <= 1e-9);
}

#[test]
fn connect_legendrian_examples() {
    // identical endpoints: degenerate zero-length path
    let j = jet_of_curve(&parabola(), c(0.3, 0.0), 2).unwrap();
    let path = connect_legendrian(&j, &j, 0.0, &[]).unwrap();
    assert_eq!(path.len(), 2);

    // endpoints with |x| 2 and 3, floor 1: path keeps |x| > 1
    let ja = JetSpec::new(
        c(0.0, 0.0),
        1,
        vec![vec![c(2.0, 0.0), c(0.0, 0.0)]],
        vec![vec![c(0.5, 0.0), c(0.0, 0.0)]],
        vec![c(0.0, 0.0), c(0.0, 0.0)],
    )
    .unwrap();
    let jb = JetSpec::new(
        c(1.0, 0.0),
        1,
        vec![vec![c(3.0, 0.0), c(0.0, 0.0)]],
        vec![vec![c(-0.5, 0.0), c(0.0, 0.0)]],
        vec![c(0.7, 0.0), c(0.0, 0.0)],
    )
    .unwrap();
    let path = connect_legendrian(&ja, &jb, 1.0, &[0]).unwrap();
    for k in 0..path.len() {
        assert!(path.sample(k)[0].norm() > 1.0);
    }
    // z endpoint hit exactly
    let last = path.sample(path.len() - 1);
    assert!((last[2] - c(0.7, 0.0)).norm() < 1e-9);

    // infeasible floor
    let r = connect_legendrian(&ja, &jb, 5.0, &[0]);
    assert!(r.is_err());
}

#[test]
fn push_constant_curve() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let f = LegendrianCurve::new(
        1,
        vec![LaurentPoly::constant(c(2.0, 0.0))],
        vec![LaurentPoly::zero()],
        LaurentPoly::zero(),
        domain,
    )
    .unwrap();
    let r1 = CompactSet::disk(c(0.0, 0.0), 1.0);
    let r2 = CompactSet::disk(c(0.0, 0.0), 2.0);
    let out = push_boundary(&f, &r1, &r2, 1.0, 1.0, 1e-3).unwrap();
    assert!(out.report.min_outer_norm > 2.0);
    assert!(out.report.min_annulus_norm > 1.0);
    assert!(verify_legendrian(&out.curve).unwrap().pass);
    // bump landed on the partner component y
    assert_eq!(out.report.bumped, vec![1]);

    // rho = 0, C = 0: nothing to do
    let out = push_boundary(&f, &r1, &r2, 0.0, 0.0, 1e-3).unwrap();
    assert_eq!(out.curve, f);
}

#[test]
fn mergelyan_two_retract_steps() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.6)),
        target: TargetCurve::Exact(target),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-4),
        keep_component: None,
        seed: 17,
        degree_max: 64,
    };
    let exhaustion = default_exhaustion(&domain, 2, &[]).unwrap();
    let out = run_mergelyan_theorem(&spec, &exhaustion, 1e-4).unwrap();
    assert!(out.report.certificates.pass);
    // budget arithmetic: eps_1 + eps_2 <= 3 eps / 8
    let total: f64 = out.report.budgets.iter().sum();
    assert!(total <= 3.0 * 1e-4 / 8.0 + 1e-15);
    assert!(out.report.certificates.sup_error <= 1e-4);
}

#[test]
fn mergelyan_arc_attach_over_hole() {
    let domain = CircularDomain::plane(vec![Disk::new(c(2.0, 0.0), 0.1)]).unwrap();
    let target = parabola();
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.6)),
        target: TargetCurve::Exact(target),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-4),
        keep_component: None,
        seed: 23,
        degree_max: 64,
    };
    let exhaustion = default_exhaustion(&domain, 3, &[]).unwrap();
    assert!(exhaustion
        .steps
        .iter()
        .any(|s| matches!(s.kind, leglab::geometry::StepKind::ArcAttach(_))));
    let out = run_mergelyan_theorem(&spec, &exhaustion, 1e-4).unwrap();
    assert!(out.report.certificates.pass, "certs: {:?}", out.report.certificates);
    // vanishing period around the hole
    assert!(out.report.certificates.period_max <= 1e-9);
}

#[test]
fn carleman_axis_three_rounds() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    let eps_samples: Vec<(f64, f64)> =
        (0..=60).map(|k| { let r = k as f64 * 0.1; (r, 1.0 / (1.0 + r * r)) }).collect();
    let spec = CarlemanSpec {
        domain,
        n: 1,
        rays: vec![Ray::axis()],
        target,
        eps: EpsSpec::Samples { samples: eps_samples },
        radii: vec![1.0, 2.0, 3.0],
        flags: Flags::default(),
        inside_jets: vec![],
        outside_jets: vec![],
        seed: 29,
        degree_max: 64,
    };
    let out = run_carleman(&spec).unwrap();
    assert!(out.report.certificates.pass, "certs {:?}", out.report.certificates);
    assert_eq!(out.rounds.len(), 3);
    for r in &out.rounds {
        assert!(r.tail_identical);
        assert!(r.junction_defect <= 1e-8);
    }
    // 200 samples in [-3, 3] against the true eps
    let f = parabola();
    for k in 0..=200 {
        let t = -3.0 + 6.0 * k as f64 / 200.0;
        let p = c(t, 0.0);
        let got = out.curve.eval_point(p).unwrap();
        let want = f.eval_point(p).unwrap();
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1.0 / (1.0 + t * t), "err {err} at t = {t}");
    }
}

#[test]
fn keep_z_on_annulus() {
    // target with nonvanishing x_1 = z + 2 shifted... use x = 2 + z/4 etc.
    let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.25)]).unwrap();
    let centers = domain.pole_centers();
    // x = 2 + 1/(4ζ), y = ζ, z = -∫ x dζ = -2ζ - Log.. has a residue; pick
    // x with zero residue instead: x = 2 + 1/(4ζ²)
    let x = LaurentPoly::constant(c(2.0, 0.0))
        .with_centers(&centers)
        .add(&LaurentPoly::pole_term(&centers, 0, -2, c(0.25, 0.0)));
    let y = LaurentPoly::monomial(1, c(1.0, 0.0)).with_centers(&centers);
    let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
    let target = LegendrianCurve::new(1, vec![x], vec![y], z, domain.clone()).unwrap();

    let margins = leglab::geometry::hole_margins(&domain);
    let s_set = CompactSet::concentric(&domain, c(0.0, 0.0), 1.0, &|i| margins[i]).unwrap();
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet::from_compact(s_set),
        target: TargetCurve::Exact(target.clone()),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-4),
        keep_component: Some(2), // z
        seed: 41,
        degree_max: 64,
    };
    let region = CompactSet::concentric(&domain, c(0.0, 0.0), 1.3, &|i| margins[i]).unwrap();
    let out = approximate_legendrian(&spec, &region).unwrap();
    // z is bit-identical
    assert_eq!(out.curve.z, target.z);
    assert!(out.stage.legendrian_residual <= 1e-9, "residual {}", out.stage.legendrian_residual);
    assert!(out.stage.sup_error_on_s <= 1e-4);
}

#[test]
fn keep_y1_is_bit_exact() {
    let domain = CircularDomain::plane(vec![]).unwrap();
    let target = parabola();
    let spec = ProblemSpec {
        domain,
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.6)),
        target: TargetCurve::Exact(target.clone()),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags::default(),
        eps: EpsSpec::constant(1e-5),
        keep_component: Some(1), // y_1
        seed: 11,
        degree_max: 64,
    };
    let region = CompactSet::disk(c(0.0, 0.0), 1.2);
    let out = approximate_legendrian(&spec, &region).unwrap();
    assert_eq!(out.curve.y[0], target.y[0]);
}

#[test]
fn immersion_mergelyan_three_rounds() {
    // x = y = ζ² has a common critical point at 0
    let domain = CircularDomain::plane(vec![]).unwrap();
    let x = LaurentPoly::monomial(2, c(1.0, 0.0));
    let y = LaurentPoly::monomial(2, c(1.0, 0.0));
    let z = primitive(&OneForm::x_dy(&x, &y).unwrap()).unwrap().neg();
    let target = LegendrianCurve::new(1, vec![x], vec![y], z, domain.clone()).unwrap();
    let spec = ProblemSpec {
        domain: domain.clone(),
        n: 1,
        s_set: AdmissibleSet::from_compact(CompactSet::disk(c(0.0, 0.0), 0.8)),
        target: TargetCurve::Exact(target),
        inside_jets: vec![],
        outside_jets: vec![],
        flags: Flags { immersion: true, ..Default::default() },
        eps: EpsSpec::constant(1e-3),
        keep_component: None,
        seed: 31,
        degree_max: 64,
    };
    let exhaustion = default_exhaustion(&domain, 3, &[]).unwrap();
    let out = run_mergelyan_theorem(&spec, &exhaustion, 1e-3).unwrap();
    let floor = out.report.certificates.immersion_floor.unwrap();
    assert!(floor > 0.0, "immersion floor {floor}");
    assert!(out.report.certificates.pass);
}

