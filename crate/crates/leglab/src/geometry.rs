//! Planar circular domains and their combinatorics.
//!
//! A circular domain is the plane or an open disk minus finitely many
//! disjoint closed disks (the holes). Compact sets are concentric disks
//! minus enlarged holes, homology cycles are circles around single holes,
//! and arcs are polylines routed through a visibility graph. These are the
//! only shapes the rest of the crate ever needs.

use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Golden-angle constant used by the quasi-uniform disk sampler.
const GOLDEN_ANGLE: f64 = 2.399963229728653;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("holes must be pairwise disjoint and strictly inside the outer boundary")]
    InvalidDomain,
    #[error("arc endpoints coincide")]
    DegenerateArc,
    #[error("arc self-intersects (samples {0} and {1})")]
    SelfIntersection(usize, usize),
    #[error("no path found between the endpoints on the routing grid")]
    NoPathFound,
    #[error("compact set leaves the domain")]
    CompactOutsideDomain,
    #[error("arc meets a component boundary at {angle_deg:.2} degrees, below the 5 degree floor")]
    NonTransverse { angle_deg: f64 },
    #[error("admissible set components overlap")]
    OverlappingComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: C64, radius: f64) -> Self {
        Disk { center_re: center.re, center_im: center.im, radius }
    }

    pub fn center(&self) -> C64 {
        C64::new(self.center_re, self.center_im)
    }

    pub fn contains(&self, p: C64) -> bool {
        (p - self.center()).norm() <= self.radius
    }

    /// Signed distance from `p` to the disk: negative inside.
    pub fn distance(&self, p: C64) -> f64 {
        (p - self.center()).norm() - self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Outer {
    Plane,
    Disk { center: [f64; 2], radius: f64 },
}

/// The plane or a disk, minus finitely many disjoint closed disks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularDomain {
    pub outer: Outer,
    pub holes: Vec<Disk>,
}

impl CircularDomain {
    pub fn plane(holes: Vec<Disk>) -> Result<Self, GeometryError> {
        let d = CircularDomain { outer: Outer::Plane, holes };
        d.validate()?;
        Ok(d)
    }

    pub fn disk(center: C64, radius: f64, holes: Vec<Disk>) -> Result<Self, GeometryError> {
        let d = CircularDomain {
            outer: Outer::Disk { center: [center.re, center.im], radius },
            holes,
        };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<(), GeometryError> {
        for (i, a) in self.holes.iter().enumerate() {
            if !(a.radius > 0.0) {
                return Err(GeometryError::InvalidDomain);
            }
            for b in &self.holes[i + 1..] {
                if (a.center() - b.center()).norm() <= a.radius + b.radius {
                    return Err(GeometryError::InvalidDomain);
                }
            }
            if let Outer::Disk { center, radius } = self.outer {
                let c = C64::new(center[0], center[1]);
                if (a.center() - c).norm() + a.radius >= radius {
                    return Err(GeometryError::InvalidDomain);
                }
            }
        }
        Ok(())
    }

    pub fn outer_center(&self) -> C64 {
        match self.outer {
            Outer::Plane => C64::new(0.0, 0.0),
            Outer::Disk { center, .. } => C64::new(center[0], center[1]),
        }
    }

    /// Admissible pole centers, one per hole, in declaration order.
    pub fn pole_centers(&self) -> Vec<C64> {
        self.holes.iter().map(|h| h.center()).collect()
    }

    pub fn contains(&self, p: C64) -> bool {
        self.clearance(p) > 0.0
    }

    /// Distance from `p` to the complement of the domain (negative outside).
    pub fn clearance(&self, p: C64) -> f64 {
        let mut d = match self.outer {
            Outer::Plane => f64::INFINITY,
            Outer::Disk { center, radius } => radius - (p - C64::new(center[0], center[1])).norm(),
        };
        for h in &self.holes {
            d = d.min(h.distance(p));
        }
        d
    }
}

/// A positively or negatively oriented circle in the domain together with
/// the set of holes it encloses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub center: [f64; 2],
    pub radius: f64,
    pub orientation: i8,
    pub enclosed: BTreeSet<usize>,
}

impl Cycle {
    pub fn center(&self) -> C64 {
        C64::new(self.center[0], self.center[1])
    }

    pub fn encloses_point(&self, p: C64) -> bool {
        (p - self.center()).norm() < self.radius
    }

    /// The circle as a closed arc, traversed according to orientation.
    pub fn as_arc(&self) -> Arc {
        Arc::closed_circle(self.center(), self.radius, self.orientation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircSeg {
    pub center: [f64; 2],
    pub radius: f64,
    pub theta0: f64,
    pub theta1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ArcKind {
    Polyline { vertices: Vec<[f64; 2]> },
    Circles { segments: Vec<CircSeg> },
}

/// A simple arc: a polyline or a chain of circular arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub kind: ArcKind,
    pub closed: bool,
}

/// One smooth piece of an arc, exposed for quadrature.
#[derive(Debug, Clone, Copy)]
pub enum ArcPiece {
    /// Line segment from `a` to `b`; gamma(t) = a + t (b - a).
    Segment { a: C64, b: C64 },
    /// Circular piece gamma(t) = c + r e^{i((1-t) th0 + t th1)}.
    CircSeg { c: C64, r: f64, th0: f64, th1: f64 },
}

impl ArcPiece {
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            ArcPiece::Segment { a, b } => a + (b - a) * t,
            ArcPiece::CircSeg { c, r, th0, th1 } => {
                let th = (1.0 - t) * th0 + t * th1;
                c + C64::new(0.0, th).exp() * r
            }
        }
    }

    /// d gamma / dt.
    pub fn velocity(&self, t: f64) -> C64 {
        match *self {
            ArcPiece::Segment { a, b } => b - a,
            ArcPiece::CircSeg { c: _, r, th0, th1 } => {
                let th = (1.0 - t) * th0 + t * th1;
                C64::new(0.0, th).exp() * C64::new(0.0, r * (th1 - th0))
            }
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            ArcPiece::Segment { a, b } => (b - a).norm(),
            ArcPiece::CircSeg { r, th0, th1, .. } => r * (th1 - th0).abs(),
        }
    }
}

impl Arc {
    pub fn polyline(vertices: Vec<C64>) -> Result<Self, GeometryError> {
        if vertices.len() < 2 {
            return Err(GeometryError::DegenerateArc);
        }
        if (vertices[0] - vertices[vertices.len() - 1]).norm() < 1e-12 {
            return Err(GeometryError::DegenerateArc);
        }
        let arc = Arc {
            kind: ArcKind::Polyline { vertices: vertices.iter().map(|v| [v.re, v.im]).collect() },
            closed: false,
        };
        arc.check_simple()?;
        Ok(arc)
    }

    pub fn segment(a: C64, b: C64) -> Result<Self, GeometryError> {
        Arc::polyline(vec![a, b])
    }

    /// A full circle as a closed arc; orientation +1 is counterclockwise.
    pub fn closed_circle(center: C64, radius: f64, orientation: i8) -> Self {
        let (th0, th1) = if orientation >= 0 {
            (0.0, 2.0 * std::f64::consts::PI)
        } else {
            (2.0 * std::f64::consts::PI, 0.0)
        };
        Arc {
            kind: ArcKind::Circles {
                segments: vec![CircSeg {
                    center: [center.re, center.im],
                    radius,
                    theta0: th0,
                    theta1: th1,
                }],
            },
            closed: true,
        }
    }

    /// A circular arc from angle th0 to th1 around `center`.
    pub fn circular(center: C64, radius: f64, th0: f64, th1: f64) -> Self {
        Arc {
            kind: ArcKind::Circles {
                segments: vec![CircSeg { center: [center.re, center.im], radius, theta0: th0, theta1: th1 }],
            },
            closed: false,
        }
    }

    pub fn pieces(&self) -> Vec<ArcPiece> {
        match &self.kind {
            ArcKind::Polyline { vertices } => vertices
                .windows(2)
                .map(|w| ArcPiece::Segment {
                    a: C64::new(w[0][0], w[0][1]),
                    b: C64::new(w[1][0], w[1][1]),
                })
                .collect(),
            ArcKind::Circles { segments } => segments
                .iter()
                .map(|s| ArcPiece::CircSeg {
                    c: C64::new(s.center[0], s.center[1]),
                    r: s.radius,
                    th0: s.theta0,
                    th1: s.theta1,
                })
                .collect(),
        }
    }

    pub fn start(&self) -> C64 {
        self.pieces()[0].point(0.0)
    }

    pub fn end(&self) -> C64 {
        let p = self.pieces();
        p[p.len() - 1].point(1.0)
    }

    pub fn length(&self) -> f64 {
        self.pieces().iter().map(|p| p.length()).sum()
    }

    /// Point at arclength fraction `s` in [0, 1].
    pub fn point_at(&self, s: f64) -> C64 {
        let pieces = self.pieces();
        let total = self.length();
        let mut target = s.clamp(0.0, 1.0) * total;
        let last = pieces.len() - 1;
        for (i, p) in pieces.iter().enumerate() {
            let l = p.length();
            if target <= l || i == last {
                return p.point(if l > 0.0 { (target / l).clamp(0.0, 1.0) } else { 0.0 });
            }
            target -= l;
        }
        self.end()
    }

    /// Unit tangent at arclength fraction `s`.
    pub fn tangent_at(&self, s: f64) -> C64 {
        let pieces = self.pieces();
        let total = self.length();
        let mut target = s.clamp(0.0, 1.0) * total;
        let last = pieces.len() - 1;
        for (i, p) in pieces.iter().enumerate() {
            let l = p.length();
            if target <= l || i == last {
                let t = if l > 0.0 { (target / l).clamp(0.0, 1.0) } else { 0.0 };
                let v = p.velocity(t);
                let n = v.norm();
                return if n > 0.0 { v / n } else { C64::new(1.0, 0.0) };
            }
            target -= l;
        }
        C64::new(1.0, 0.0)
    }

    /// `k` samples equally spaced in arclength, endpoints included.
    pub fn samples(&self, k: usize) -> Vec<C64> {
        if k == 0 {
            return vec![];
        }
        if k == 1 {
            return vec![self.point_at(0.5)];
        }
        (0..k).map(|i| self.point_at(i as f64 / (k - 1) as f64)).collect()
    }

    pub fn min_distance_to_point(&self, p: C64) -> f64 {
        let mut best = f64::INFINITY;
        for piece in self.pieces() {
            match piece {
                ArcPiece::Segment { a, b } => best = best.min(point_segment_distance(p, a, b)),
                _ => {
                    for i in 0..=64 {
                        best = best.min((piece.point(i as f64 / 64.0) - p).norm());
                    }
                }
            }
        }
        best
    }

    /// Pairwise proximity check on 512 samples; threshold 1e-9.
    fn check_simple(&self) -> Result<(), GeometryError> {
        if self.closed {
            return Ok(());
        }
        let pts = self.samples(512);
        for i in 0..pts.len() {
            for j in i + 2..pts.len() {
                if (pts[i] - pts[j]).norm() < 1e-9 {
                    return Err(GeometryError::SelfIntersection(i, j));
                }
            }
        }
        Ok(())
    }
}

pub fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let ab = b - a;
    let den = ab.norm_sqr();
    if den == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / den).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// A concentric compact: a closed disk minus the open enlarged holes it
/// encloses. The enlargement margins keep everything at a safe distance
/// from the pole centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub center: [f64; 2],
    pub radius: f64,
    /// (domain hole index, enlarged exclusion disk)
    pub excluded: Vec<(usize, Disk)>,
}

impl CompactSet {
    pub fn disk(center: C64, radius: f64) -> Self {
        CompactSet { center: [center.re, center.im], radius, excluded: vec![] }
    }

    /// Builds the concentric compact of the given radius inside `domain`,
    /// excluding every hole it encloses with margin `margin(i)`.
    pub fn concentric(
        domain: &CircularDomain,
        center: C64,
        radius: f64,
        margin: &dyn Fn(usize) -> f64,
    ) -> Result<Self, GeometryError> {
        let mut excluded = vec![];
        for (i, h) in domain.holes.iter().enumerate() {
            let d = (h.center() - center).norm();
            let eps = margin(i);
            if d + h.radius + eps < radius {
                excluded.push((i, Disk::new(h.center(), h.radius + eps)));
            } else if d - h.radius - eps < radius {
                // the hole straddles the boundary circle
                return Err(GeometryError::CompactOutsideDomain);
            }
        }
        if let Outer::Disk { center: oc, radius: or } = domain.outer {
            if (center - C64::new(oc[0], oc[1])).norm() + radius >= or {
                return Err(GeometryError::CompactOutsideDomain);
            }
        }
        Ok(CompactSet { center: [center.re, center.im], radius, excluded })
    }

    pub fn center(&self) -> C64 {
        C64::new(self.center[0], self.center[1])
    }

    /// Signed clearance: positive strictly inside the compact.
    pub fn clearance(&self, p: C64) -> f64 {
        let mut d = self.radius - (p - self.center()).norm();
        for (_, disk) in &self.excluded {
            d = d.min(disk.distance(p));
        }
        d
    }

    pub fn contains(&self, p: C64) -> bool {
        self.clearance(p) >= 0.0
    }

    pub fn enclosed_mask(&self) -> BTreeSet<usize> {
        self.excluded.iter().map(|(i, _)| *i).collect()
    }

    pub fn area(&self) -> f64 {
        let mut a = std::f64::consts::PI * self.radius * self.radius;
        for (_, d) in &self.excluded {
            a -= std::f64::consts::PI * d.radius * d.radius;
        }
        a.max(0.0)
    }

    /// Samples of the full boundary: outer circle and each exclusion circle.
    pub fn boundary_samples(&self, per_circle: usize) -> Vec<C64> {
        let mut out = vec![];
        let c = self.center();
        for k in 0..per_circle {
            let th = 2.0 * std::f64::consts::PI * k as f64 / per_circle as f64;
            out.push(c + C64::new(0.0, th).exp() * self.radius);
        }
        for (_, d) in &self.excluded {
            for k in 0..per_circle {
                let th = 2.0 * std::f64::consts::PI * k as f64 / per_circle as f64;
                out.push(d.center() + C64::new(0.0, th).exp() * d.radius);
            }
        }
        out
    }

    /// Samples of the outer boundary circle only.
    pub fn outer_boundary_samples(&self, k: usize) -> Vec<C64> {
        let c = self.center();
        (0..k)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                c + C64::new(0.0, th).exp() * self.radius
            })
            .collect()
    }

    /// Deterministic nx-by-nx grid over the bounding box, filtered to the set.
    pub fn grid(&self, nx: usize) -> Vec<C64> {
        let c = self.center();
        let mut out = vec![];
        for i in 0..nx {
            for j in 0..nx {
                let x = c.re - self.radius + 2.0 * self.radius * (i as f64 + 0.5) / nx as f64;
                let y = c.im - self.radius + 2.0 * self.radius * (j as f64 + 0.5) / nx as f64;
                let p = C64::new(x, y);
                if self.contains(p) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Quasi-uniform interior samples, golden-angle spiral, about
    /// `area * density` of them.
    pub fn spiral_samples(&self, density: f64) -> Vec<C64> {
        let disk_area = std::f64::consts::PI * self.radius * self.radius;
        let m = (disk_area * density).ceil().max(1.0) as usize;
        let target = (self.area() * density).ceil().max(1.0) as usize;
        let c = self.center();
        let mut out = vec![];
        for k in 0..m {
            let r = self.radius * ((k as f64 + 0.5) / m as f64).sqrt();
            let th = GOLDEN_ANGLE * k as f64;
            let p = c + C64::new(0.0, th).exp() * r;
            if self.contains(p) {
                out.push(p);
            }
            if out.len() == target {
                break;
            }
        }
        out
    }
}

/// S = K ∪ Γ: disjoint compact components plus arcs meeting their
/// boundaries only at endpoints, transversely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub components: Vec<CompactSet>,
    pub arcs: Vec<Arc>,
}

impl AdmissibleSet {
    pub fn new(components: Vec<CompactSet>, arcs: Vec<Arc>) -> Result<Self, GeometryError> {
        let s = AdmissibleSet { components, arcs };
        s.validate()?;
        Ok(s)
    }

    pub fn from_compact(k: CompactSet) -> Self {
        AdmissibleSet { components: vec![k], arcs: vec![] }
    }

    fn validate(&self) -> Result<(), GeometryError> {
        for (i, a) in self.components.iter().enumerate() {
            for b in &self.components[i + 1..] {
                if (a.center() - b.center()).norm() <= a.radius + b.radius {
                    return Err(GeometryError::OverlappingComponents);
                }
            }
        }
        for arc in &self.arcs {
            for s_end in [0.0f64, 1.0f64] {
                let p = arc.point_at(s_end);
                if let Some((comp, q)) = self.nearest_component_boundary(p) {
                    if (p - q).norm() < 1e-6 {
                        let radial = p - comp.center();
                        let circle_tangent = C64::new(-radial.im, radial.re);
                        let t = arc.tangent_at(s_end);
                        let ct = circle_tangent / circle_tangent.norm();
                        let cosang = (t * ct.conj()).re.abs().min(1.0);
                        // angle between the arc and the boundary circle tangent
                        let ang = cosang.acos().to_degrees();
                        if ang < 5.0 {
                            return Err(GeometryError::NonTransverse { angle_deg: ang });
                        }
                    }
                }
            }
        }
        for (i, a) in self.arcs.iter().enumerate() {
            for b in &self.arcs[i + 1..] {
                let pa = a.samples(128);
                let pb = b.samples(128);
                for x in &pa {
                    for y in &pb {
                        if (x - y).norm() < 1e-9 {
                            return Err(GeometryError::OverlappingComponents);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn nearest_component_boundary(&self, p: C64) -> Option<(&CompactSet, C64)> {
        let mut best: Option<(&CompactSet, C64, f64)> = None;
        for c in &self.components {
            let v = p - c.center();
            let n = v.norm();
            if n == 0.0 {
                continue;
            }
            let q = c.center() + v / n * c.radius;
            let d = (p - q).norm();
            if best.as_ref().map_or(true, |(_, _, bd)| d < *bd) {
                best = Some((c, q, d));
            }
        }
        best.map(|(c, q, _)| (c, q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Retract,
    /// The step encloses exactly this additional hole.
    ArcAttach(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionStep {
    pub set: CompactSet,
    pub kind: StepKind,
}

/// Nested concentric compacts exhausting the domain, each step either a
/// deformation retract of the next or enclosing one new hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustion {
    pub steps: Vec<ExhaustionStep>,
}

/// One positively oriented circle per hole enclosed by `k`, each enclosing
/// exactly that hole, pairwise disjoint, inside `k`.
pub fn homology_basis(domain: &CircularDomain, k: &CompactSet) -> Vec<Cycle> {
    let mut cycles = vec![];
    for (idx, excl) in &k.excluded {
        let hole = &domain.holes[*idx];
        let c = hole.center();
        // nearest obstacle seen from the hole center
        let mut clear = k.radius - (c - k.center()).norm();
        for (j, other) in domain.holes.iter().enumerate() {
            if j != *idx {
                clear = clear.min(0.5 * ((c - other.center()).norm() - other.radius));
            }
        }
        let r = 0.5 * (excl.radius + clear);
        cycles.push(Cycle {
            center: [c.re, c.im],
            radius: r.max(excl.radius * 1.05),
            orientation: 1,
            enclosed: BTreeSet::from([*idx]),
        });
    }
    cycles
}

/// Obstacles for arc routing.
pub enum AvoidItem<'a> {
    Compact(&'a CompactSet),
    Arc(&'a Arc),
    Disk(Disk),
}

impl AvoidItem<'_> {
    fn distance(&self, p: C64) -> f64 {
        match self {
            // distance to the filled outer disk (conservative)
            AvoidItem::Compact(c) => (p - c.center()).norm() - c.radius,
            AvoidItem::Arc(a) => a.min_distance_to_point(p),
            AvoidItem::Disk(d) => d.distance(p),
        }
    }
}

const ROUTE_MARGIN: f64 = 1e-3;

/// Shortest polyline from `from` to `to` through a seeded visibility grid,
/// keeping margin 1e-3 from every avoid item and the domain holes.
/// Clearance against avoid items is waived within a short ramp of either
/// endpoint so arcs may start and end on obstacle boundaries.
pub fn build_arc(
    domain: &CircularDomain,
    from: C64,
    to: C64,
    avoid: &[AvoidItem<'_>],
    seed: u64,
) -> Result<Arc, GeometryError> {
    if (from - to).norm() < 1e-12 {
        return Err(GeometryError::DegenerateArc);
    }
    let ramp = (0.1 * (from - to).norm()).min(0.25);
    let clear_at = |p: C64| -> f64 {
        let mut d = f64::INFINITY;
        for item in avoid {
            d = d.min(item.distance(p));
        }
        d
    };
    let seg_ok = |a: C64, b: C64| -> bool {
        let n = ((b - a).norm() / 0.01).ceil().max(2.0) as usize;
        for i in 0..=n {
            let p = a + (b - a) * (i as f64 / n as f64);
            if domain.clearance(p) < ROUTE_MARGIN {
                return false;
            }
            let near_end = (p - from).norm() < ramp || (p - to).norm() < ramp;
            if !near_end && clear_at(p) < ROUTE_MARGIN {
                return false;
            }
        }
        true
    };

    if seg_ok(from, to) {
        return Arc::polyline(vec![from, to]);
    }

    // routing grid over the relevant bounding box
    let mut lo = C64::new(from.re.min(to.re), from.im.min(to.im));
    let mut hi = C64::new(from.re.max(to.re), from.im.max(to.im));
    {
        let mut grow = |p: C64, r: f64| {
            lo = C64::new(lo.re.min(p.re - r), lo.im.min(p.im - r));
            hi = C64::new(hi.re.max(p.re + r), hi.im.max(p.im + r));
        };
        for h in &domain.holes {
            grow(h.center(), h.radius + 0.5);
        }
        for item in avoid {
            match item {
                AvoidItem::Compact(c) => grow(c.center(), c.radius + 0.5),
                AvoidItem::Disk(d) => grow(d.center(), d.radius + 0.5),
                AvoidItem::Arc(a) => {
                    for s in a.samples(16) {
                        grow(s, 0.5);
                    }
                }
            }
        }
        grow(from, 0.3);
        grow(to, 0.3);
    }
    if let Outer::Disk { center, radius } = domain.outer {
        let c = C64::new(center[0], center[1]);
        lo = C64::new(lo.re.max(c.re - radius), lo.im.max(c.im - radius));
        hi = C64::new(hi.re.min(c.re + radius), hi.im.min(c.im + radius));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = 23usize;
    let dx = (hi.re - lo.re) / (nx - 1) as f64;
    let dy = (hi.im - lo.im) / (nx - 1) as f64;
    let jitter = 0.02 * dx.min(dy);
    let mut nodes = vec![from, to];
    for i in 0..nx {
        for j in 0..nx {
            let jx: f64 = rng.gen_range(-1.0..1.0) * jitter;
            let jy: f64 = rng.gen_range(-1.0..1.0) * jitter;
            let p = C64::new(lo.re + i as f64 * dx + jx, lo.im + j as f64 * dy + jy);
            if domain.clearance(p) >= ROUTE_MARGIN && clear_at(p) >= ROUTE_MARGIN {
                nodes.push(p);
            }
        }
    }

    // Dijkstra over the visibility graph, edges probed lazily
    let n = nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    loop {
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if !done[i] && dist[i] < best {
                best = dist[i];
                u = i;
            }
        }
        if u == usize::MAX || u == 1 {
            break;
        }
        done[u] = true;
        for v in 0..n {
            if done[v] || v == u {
                continue;
            }
            let w = (nodes[u] - nodes[v]).norm();
            if dist[u] + w < dist[v] - 1e-15 && seg_ok(nodes[u], nodes[v]) {
                dist[v] = dist[u] + w;
                prev[v] = u;
            }
        }
    }
    if dist[1].is_infinite() {
        return Err(GeometryError::NoPathFound);
    }
    let mut path = vec![1usize];
    while *path.last().unwrap() != 0 {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();

    // greedy shortcutting
    let mut simple = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !seg_ok(nodes[path[i]], nodes[path[j]]) {
            j -= 1;
        }
        simple.push(path[j]);
        i = j;
    }
    Arc::polyline(simple.into_iter().map(|i| nodes[i]).collect())
}

/// Concentric-disk exhaustion with `count` steps (a few more if needed so
/// that no step encloses two new holes), marked points kept off all
/// boundary circles.
pub fn default_exhaustion(
    domain: &CircularDomain,
    count: usize,
    marked: &[C64],
) -> Result<Exhaustion, GeometryError> {
    assert!(count >= 1);
    let center = domain.outer_center();
    let margins = hole_margins(domain);
    let margin_fn = |i: usize| margins[i];

    // per hole: radius at which it is strictly enclosed / excluded
    let mut need: Vec<(f64, f64)> = vec![];
    for (i, h) in domain.holes.iter().enumerate() {
        let d = (h.center() - center).norm();
        need.push((d + h.radius + margins[i] * 1.02, d - h.radius - margins[i] * 1.02));
    }
    let r_hi = match domain.outer {
        Outer::Plane => {
            let cover = need.iter().map(|(n, _)| *n).fold(0.0, f64::max);
            let markr = marked.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
            (count as f64).max(cover + 0.5).max(markr + 0.5)
        }
        Outer::Disk { radius, .. } => 0.96 * radius,
    };

    let mut radii: Vec<f64> = (1..=count).map(|j| r_hi * j as f64 / count as f64).collect();

    let mut k = 0;
    let mut enclosed: BTreeSet<usize> = BTreeSet::new();
    let mut kinds = vec![];
    while k < radii.len() {
        let mut r = radii[k];
        let floor = if k == 0 { 0.0 } else { radii[k - 1] };
        // push off straddling holes
        for (i, &(hi_r, lo_r)) in need.iter().enumerate() {
            if enclosed.contains(&i) {
                continue;
            }
            if r > lo_r && r < hi_r {
                r = if lo_r > floor * 1.02 + 1e-9 { lo_r } else { hi_r };
            }
        }
        // at most one new hole per step
        let mut newly: Vec<usize> = (0..need.len())
            .filter(|i| !enclosed.contains(i) && r >= need[*i].0)
            .collect();
        newly.sort_by(|a, b| need[*a].0.partial_cmp(&need[*b].0).unwrap());
        if newly.len() > 1 {
            r = need[newly[1]].1.min(r).max(need[newly[0]].0);
            newly.truncate(1);
        }
        // marked points off the boundary
        let mut attempts = 0;
        loop {
            let bad = marked.iter().any(|p| ((p - center).norm() - r).abs() < 0.004 * r)
                || need
                    .iter()
                    .enumerate()
                    .any(|(i, &(hi_r, lo_r))| !enclosed.contains(&i) && r > lo_r && r < hi_r);
            if !bad || attempts > 16 {
                break;
            }
            r *= 1.005;
            attempts += 1;
        }
        if r <= floor * 1.001 {
            r = floor * 1.02;
        }
        radii[k] = r;
        let kind = match newly.first() {
            Some(&i) if r >= need[i].0 => {
                enclosed.insert(i);
                StepKind::ArcAttach(i)
            }
            _ => StepKind::Retract,
        };
        kinds.push(kind);
        k += 1;
    }

    // append steps for holes the ladder never reached (plane outer only)
    let mut extra_guard = 0;
    while enclosed.len() < domain.holes.len() && extra_guard < domain.holes.len() + 2 {
        if let Outer::Disk { .. } = domain.outer {
            break;
        }
        let mut remaining: Vec<usize> =
            (0..need.len()).filter(|i| !enclosed.contains(i)).collect();
        remaining.sort_by(|a, b| need[*a].0.partial_cmp(&need[*b].0).unwrap());
        let i = remaining[0];
        let r = (need[i].0 * 1.05).max(radii.last().unwrap() * 1.02);
        radii.push(r);
        kinds.push(StepKind::ArcAttach(i));
        enclosed.insert(i);
        extra_guard += 1;
    }

    let mut steps = vec![];
    for (r, kind) in radii.iter().zip(kinds) {
        steps.push(ExhaustionStep {
            set: CompactSet::concentric(domain, center, *r, &margin_fn)?,
            kind,
        });
    }
    Ok(Exhaustion { steps })
}

/// Default enlargement margin per hole: a quarter of the slack to the
/// nearest obstacle, capped.
pub fn hole_margins(domain: &CircularDomain) -> Vec<f64> {
    domain
        .holes
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut slack = match domain.outer {
                Outer::Plane => f64::INFINITY,
                Outer::Disk { center, radius } => {
                    radius - (h.center() - C64::new(center[0], center[1])).norm() - h.radius
                }
            };
            for (j, other) in domain.holes.iter().enumerate() {
                if j != i {
                    slack =
                        slack.min((h.center() - other.center()).norm() - h.radius - other.radius);
                }
            }
            (0.25 * slack).min((0.5 * h.radius).max(0.1))
        })
        .collect()
}

/// Deterministic quasi-uniform samples: spiral points on each compact
/// component (about area x density each) and equally spaced points on
/// each arc (about length x density each).
pub fn sample_set(s: &AdmissibleSet, density: f64) -> Vec<C64> {
    assert!(density > 0.0);
    let mut out = vec![];
    for c in &s.components {
        out.extend(c.spiral_samples(density));
    }
    for a in &s.arcs {
        let n = (a.length() * density).ceil().max(1.0) as usize;
        out.extend(a.samples(n));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn domain_validation_rejects_overlapping_holes() {
        let r = CircularDomain::plane(vec![
            Disk::new(c(0.0, 0.0), 1.0),
            Disk::new(c(1.5, 0.0), 1.0),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn homology_basis_counts_and_masks() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let k = CompactSet::disk(c(0.0, 0.0), 1.0);
        assert!(homology_basis(&domain, &k).is_empty());

        let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 0.3)]).unwrap();
        let k = CompactSet::concentric(&domain, c(0.0, 0.0), 2.0, &|_| 0.1).unwrap();
        let cycles = homology_basis(&domain, &k);
        assert_eq!(cycles.len(), 1);
        assert!(cycles[0].radius > 0.4 && cycles[0].radius < 2.0);
        assert_eq!(cycles[0].enclosed, BTreeSet::from([0]));

        let domain = CircularDomain::plane(vec![
            Disk::new(c(0.0, 0.0), 0.2),
            Disk::new(c(3.0, 0.0), 0.2),
        ])
        .unwrap();
        let k = CompactSet::concentric(&domain, c(1.5, 0.0), 4.0, &|_| 0.1).unwrap();
        let cycles = homology_basis(&domain, &k);
        assert_eq!(cycles.len(), 2);
        assert_eq!(cycles[0].enclosed, BTreeSet::from([0]));
        assert_eq!(cycles[1].enclosed, BTreeSet::from([1]));
        let d = (cycles[0].center() - cycles[1].center()).norm();
        assert!(d > cycles[0].radius + cycles[1].radius);
        assert!(!cycles[0].encloses_point(c(3.0, 0.0)));
        assert!(!cycles[1].encloses_point(c(0.0, 0.0)));
    }

    #[test]
    fn build_arc_direct_when_clear() {
        let domain = CircularDomain::disk(c(0.0, 0.0), 2.0, vec![]).unwrap();
        let arc = build_arc(&domain, c(0.0, 0.0), c(1.0, 0.0), &[], 7).unwrap();
        match &arc.kind {
            ArcKind::Polyline { vertices } => assert_eq!(vertices.len(), 2),
            _ => panic!("expected polyline"),
        }
    }

    #[test]
    fn build_arc_detours_around_hole() {
        let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 1.0)]).unwrap();
        let arc = build_arc(&domain, c(-1.5, 0.0), c(1.5, 0.0), &[], 3).unwrap();
        for s in arc.samples(600) {
            assert!(s.norm() >= 1.0 + 1e-3 - 1e-6, "sample {s} too close to hole");
        }
        assert!((arc.start() - c(-1.5, 0.0)).norm() < 1e-12);
        assert!((arc.end() - c(1.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn build_arc_blocked_reports_no_path() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let ring: Vec<Disk> = (0..16)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
                Disk::new(c(1.2 * th.cos(), 1.2 * th.sin()), 0.45)
            })
            .collect();
        let avoid: Vec<AvoidItem> = ring.iter().map(|d| AvoidItem::Disk(*d)).collect();
        let r = build_arc(&domain, c(0.0, 0.0), c(3.0, 0.0), &avoid, 1);
        assert!(matches!(r, Err(GeometryError::NoPathFound)));
    }

    #[test]
    fn build_arc_is_deterministic() {
        let domain = CircularDomain::plane(vec![Disk::new(c(0.0, 0.0), 1.0)]).unwrap();
        let a = build_arc(&domain, c(-1.5, 0.0), c(1.5, 0.0), &[], 42).unwrap();
        let b = build_arc(&domain, c(-1.5, 0.0), c(1.5, 0.0), &[], 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exhaustion_plane_no_holes() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let e = default_exhaustion(&domain, 3, &[]).unwrap();
        assert_eq!(e.steps.len(), 3);
        let radii: Vec<f64> = e.steps.iter().map(|s| s.set.radius).collect();
        assert!((radii[0] - 1.0).abs() < 1e-9);
        assert!((radii[1] - 2.0).abs() < 1e-9);
        assert!((radii[2] - 3.0).abs() < 1e-9);
        assert!(e.steps.iter().all(|s| s.kind == StepKind::Retract));
    }

    #[test]
    fn exhaustion_tags_arc_attach_once_per_hole() {
        let domain = CircularDomain::plane(vec![Disk::new(c(2.0, 0.0), 0.1)]).unwrap();
        let e = default_exhaustion(&domain, 3, &[]).unwrap();
        let attach: Vec<_> =
            e.steps.iter().filter(|s| matches!(s.kind, StepKind::ArcAttach(_))).collect();
        assert_eq!(attach.len(), 1);
        for w in e.steps.windows(2) {
            assert!(w[0].set.radius < w[1].set.radius);
        }
    }

    #[test]
    fn exhaustion_keeps_marked_points_interior() {
        let domain = CircularDomain::plane(vec![]).unwrap();
        let marked = [c(1.0, 0.0)];
        let e = default_exhaustion(&domain, 3, &marked).unwrap();
        for s in &e.steps {
            assert!(((marked[0] - s.set.center()).norm() - s.set.radius).abs() > 1e-3);
        }
    }

    #[test]
    fn sample_set_counts() {
        let disk = CompactSet::disk(c(0.0, 0.0), 1.0);
        let s = AdmissibleSet::from_compact(disk);
        let density = 100.0 / std::f64::consts::PI;
        let pts = sample_set(&s, density);
        assert_eq!(pts.len(), 100);

        let seg = Arc::segment(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        let s = AdmissibleSet { components: vec![], arcs: vec![seg] };
        let pts = sample_set(&s, 50.0);
        assert_eq!(pts.len(), 50);
        assert!((pts[1] - pts[0] - c(1.0 / 49.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn exhaustion_nesting_invariant_on_samples() {
        let domain = CircularDomain::plane(vec![Disk::new(c(2.0, 0.0), 0.1)]).unwrap();
        let e = default_exhaustion(&domain, 3, &[]).unwrap();
        for w in e.steps.windows(2) {
            for p in w[0].set.grid(20) {
                assert!(w[1].set.clearance(p) > 0.0);
            }
        }
    }
}
