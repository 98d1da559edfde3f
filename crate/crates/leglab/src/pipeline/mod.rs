//! Pipeline drivers: jet-interpolating approximation on admissible sets,
//! outside-jet extension, boundary pushing, and the two induction loops.

mod approximate;
mod carleman;
mod extend;
mod mergelyan;
mod push;

pub use approximate::{approximate_legendrian, runge_check, ApproximateOutcome};
pub use carleman::{run_carleman, upgrade_proper, CarlemanOutcome, CarlemanSpec, Ray, RoundCert};
pub use extend::{
    connect_legendrian, extend_spec, extend_with_outside_jets, ArcChannel, ArcLink, DiskPatch,
    GeneralizedCurve, LegendrianPath,
};
pub use mergelyan::{run_mergelyan_theorem, MergelyanOutcome};
pub use push::{push_boundary, PushOutcome, PushReport};

use crate::approx::ApproxError;
use crate::contact::{ContactError, JetSpec, LegendrianCurve};
use crate::geometry::{AdmissibleSet, CircularDomain, GeometryError};
use crate::laurent::LaurentError;
use crate::spray::SprayError;
use crate::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("admissible set is not Runge in the target region")]
    NotRunge,
    #[error("interpolation point lies on or outside the working set")]
    JetPointMisplaced,
    #[error("outside jet point must not lie in the admissible set")]
    OutsideJetInside,
    #[error("injective flag set but two jets share the same target value")]
    JetValuesCollide,
    #[error("immersion flag set but a jet of order >= 1 has zero derivative")]
    JetDerivativeZero,
    #[error("fit did not reach the budget {budget:.3e} (sup error {sup_error:.3e}) at the degree cap")]
    FitBudgetUnreached { sup_error: f64, budget: f64 },
    #[error("the arc z-closure slope is degenerate after reroutes")]
    DegenerateArcIntegral,
    #[error("norm floor violated after all reshape attempts (floor {floor:.3e}, reached {reached:.3e})")]
    FloorViolated { floor: f64, reached: f64 },
    #[error("a boundary sample has no component above the norm floor")]
    SectorCoverFailure,
    #[error("budget collapsed below 1e-14 at round {round}")]
    BudgetCollapse { round: usize },
    #[error("junction 1-jet reconstruction off by {defect:.3e}")]
    JunctionMismatch { defect: f64 },
    #[error("target data is not proper on the sampled set")]
    NotProperOnData,
    #[error("kept component must be holomorphic on the target region in the admissible pole class")]
    KeptComponentNotGlobal,
    #[error("kept z requires x_1 to stay away from zero on the region (min modulus {min_mod:.3e})")]
    KeptZVanishingX1 { min_mod: f64 },
    #[error(transparent)]
    Laurent(#[from] LaurentError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Contact(#[from] ContactError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Spray(#[from] SprayError),
}

/// Error budget: a constant or per-|q| samples with linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EpsSpec {
    Const { value: f64 },
    Samples { samples: Vec<(f64, f64)> },
}

impl EpsSpec {
    pub fn constant(v: f64) -> Self {
        EpsSpec::Const { value: v }
    }

    /// Budget at the point, interpolating linearly in |q|.
    pub fn at(&self, q: C64) -> f64 {
        match self {
            EpsSpec::Const { value } => *value,
            EpsSpec::Samples { samples } => {
                let r = q.norm();
                if samples.is_empty() {
                    return f64::INFINITY;
                }
                if r <= samples[0].0 {
                    return samples[0].1;
                }
                for w in samples.windows(2) {
                    if r <= w[1].0 {
                        let t = (r - w[0].0) / (w[1].0 - w[0].0);
                        return w[0].1 + t * (w[1].1 - w[0].1);
                    }
                }
                samples.last().unwrap().1
            }
        }
    }

    pub fn min_on(&self, points: &[C64]) -> f64 {
        points.iter().map(|p| self.at(*p)).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub immersion: bool,
    pub injective: bool,
    pub proper: bool,
}

/// Target data for a run: exact Laurent components or a generalized curve
/// assembled by the extension machinery.
#[derive(Debug, Clone)]
pub enum TargetCurve {
    Exact(LegendrianCurve),
    Generalized(GeneralizedCurve),
    /// raw generalized data: points paired with 2n+1 component values
    Samples { n: usize, data: Vec<(C64, Vec<C64>)> },
}

impl TargetCurve {
    pub fn n(&self) -> usize {
        match self {
            TargetCurve::Exact(c) => c.n,
            TargetCurve::Generalized(g) => g.n,
            TargetCurve::Samples { n, .. } => *n,
        }
    }

    /// Samples (point, all 2n+1 component values) over the admissible set.
    pub fn samples_on(
        &self,
        s: &AdmissibleSet,
        density: f64,
    ) -> Result<Vec<(C64, Vec<C64>)>, PipelineError> {
        match self {
            TargetCurve::Exact(c) => {
                let pts = crate::geometry::sample_set(s, density);
                pts.into_iter()
                    .map(|p| Ok((p, c.eval_point(p)?)))
                    .collect()
            }
            TargetCurve::Generalized(g) => g.samples_on(s, density),
            TargetCurve::Samples { data, .. } => Ok(data.clone()),
        }
    }

    pub fn value_at(&self, p: C64) -> Result<Vec<C64>, PipelineError> {
        match self {
            TargetCurve::Exact(c) => Ok(c.eval_point(p)?),
            TargetCurve::Generalized(g) => g.value_at(p),
            TargetCurve::Samples { data, .. } => {
                let best = data
                    .iter()
                    .min_by(|a, b| {
                        (a.0 - p).norm().partial_cmp(&(b.0 - p).norm()).unwrap()
                    })
                    .ok_or(PipelineError::JetPointMisplaced)?;
                Ok(best.1.clone())
            }
        }
    }

    pub fn exact(&self) -> Option<&LegendrianCurve> {
        match self {
            TargetCurve::Exact(c) => Some(c),
            TargetCurve::Generalized(g) => {
                if g.patches.is_empty() && g.links.is_empty() {
                    Some(&g.base)
                } else {
                    None
                }
            }
            TargetCurve::Samples { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum TargetRepr {
    Exact { curve: LegendrianCurve },
    Samples { n: usize, data: Vec<([f64; 2], Vec<[f64; 2]>)> },
}

impl Serialize for TargetCurve {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::Error;
        match self {
            TargetCurve::Exact(c) => TargetRepr::Exact { curve: c.clone() }.serialize(ser),
            TargetCurve::Samples { n, data } => TargetRepr::Samples {
                n: *n,
                data: data
                    .iter()
                    .map(|(p, v)| ([p.re, p.im], v.iter().map(|c| [c.re, c.im]).collect()))
                    .collect(),
            }
            .serialize(ser),
            TargetCurve::Generalized(_) => {
                Err(S::Error::custom("generalized targets are runtime-only"))
            }
        }
    }
}

impl<'de> Deserialize<'de> for TargetCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match TargetRepr::deserialize(d)? {
            TargetRepr::Exact { curve } => TargetCurve::Exact(curve),
            TargetRepr::Samples { n, data } => TargetCurve::Samples {
                n,
                data: data
                    .into_iter()
                    .map(|(p, v)| {
                        (
                            C64::new(p[0], p[1]),
                            v.into_iter().map(|c| C64::new(c[0], c[1])).collect(),
                        )
                    })
                    .collect(),
            },
        })
    }
}

/// A full problem statement for the drivers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: CircularDomain,
    pub n: usize,
    pub s_set: AdmissibleSet,
    pub target: TargetCurve,
    /// jets at Λ' (inside S)
    pub inside_jets: Vec<JetSpec>,
    /// jets at Λ'' (outside S), the curve φ in jet form
    pub outside_jets: Vec<JetSpec>,
    pub flags: Flags,
    pub eps: EpsSpec,
    /// 0..n-1: x_(i+1); n..2n-1: y_(i-n+1); 2n: z
    pub keep_component: Option<usize>,
    pub seed: u64,
    /// cap for the polynomial-degree escalation
    pub degree_max: u32,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for jet in &self.inside_jets {
            let p = jet.point();
            let inside = self.s_set.components.iter().any(|k| k.clearance(p) > 1e-9);
            if !inside {
                return Err(PipelineError::JetPointMisplaced);
            }
        }
        for jet in &self.outside_jets {
            let p = jet.point();
            let in_s = self.s_set.components.iter().any(|k| k.clearance(p) >= -1e-9)
                || self.s_set.arcs.iter().any(|a| a.min_distance_to_point(p) < 1e-6);
            if in_s {
                return Err(PipelineError::OutsideJetInside);
            }
        }
        let all_jets: Vec<&JetSpec> =
            self.inside_jets.iter().chain(self.outside_jets.iter()).collect();
        if self.flags.injective {
            for (i, a) in all_jets.iter().enumerate() {
                for b in &all_jets[i + 1..] {
                    let da = a.value();
                    let db = b.value();
                    let gap = da
                        .iter()
                        .zip(&db)
                        .map(|(x, y)| (x - y).norm())
                        .fold(0.0, f64::max);
                    if gap < 1e-9 {
                        return Err(PipelineError::JetValuesCollide);
                    }
                }
            }
        }
        if self.flags.immersion {
            for jet in &all_jets {
                if jet.m >= 1 {
                    let d = jet.derivative();
                    if d.iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12 {
                        return Err(PipelineError::JetDerivativeZero);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Certificates recomputed from a final curve, independent of history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificates {
    pub legendrian_residual: f64,
    pub period_max: f64,
    pub max_jet_distance: f64,
    pub sup_error: f64,
    pub boundary_norms: Vec<f64>,
    pub immersion_floor: Option<f64>,
    pub injectivity_margin: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub budget: f64,
    pub sup_change_prev: f64,
    pub sup_error_on_s: f64,
    pub legendrian_residual: f64,
    pub period_max: f64,
    pub jet_max_distance: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub budgets: Vec<f64>,
    pub certificates: Certificates,
    pub seed: u64,
}
