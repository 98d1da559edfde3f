//! Outside-jet extension and Legendrian arc connection.
//!
//! Points of Λ'' get a small disk each carrying the jet polynomial of φ
//! (with z integrated exactly so the patch is Legendrian); disks are wired
//! to the main set through routed arcs. Along an arc the x and y channels
//! are quintic Hermite paths matching order-2 jets at both ends, one free
//! bump amplitude solves the scalar z-closure exactly, and z itself is the
//! cumulative integral of -Σ x_i dy_i, so the generalized curve stays
//! Legendrian along the arc by construction.

use super::{PipelineError, ProblemSpec, TargetCurve};
use crate::contact::{JetSpec, LegendrianCurve};
use crate::geometry::{build_arc, AdmissibleSet, Arc, AvoidItem, CompactSet, Disk};
use crate::laurent::{primitive, LaurentPoly, OneForm};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Number of intervals in the cumulative z table per arc.
const Z_TABLE: usize = 4096;

/// One smooth channel along an arc: a complex polynomial in t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcChannel {
    pub coeffs: Vec<(f64, f64)>,
}

impl ArcChannel {
    pub fn from_coeffs(c: &[C64]) -> Self {
        ArcChannel { coeffs: c.iter().map(|v| (v.re, v.im)).collect() }
    }

    pub fn eval(&self, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &(re, im) in self.coeffs.iter().rev() {
            acc = acc * t + C64::new(re, im);
        }
        acc
    }

    pub fn deriv(&self, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &(re, im)) in self.coeffs.iter().enumerate().rev() {
            if k == 0 {
                break;
            }
            acc = acc * t + C64::new(re, im) * k as f64;
        }
        acc
    }

    fn add_scaled(&self, other: &ArcChannel, a: C64) -> ArcChannel {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (k, &(re, im)) in self.coeffs.iter().enumerate() {
            out[k] += C64::new(re, im);
        }
        for (k, &(re, im)) in other.coeffs.iter().enumerate() {
            out[k] += C64::new(re, im) * a;
        }
        ArcChannel::from_coeffs(&out)
    }
}

/// Quintic Hermite channel matching (value, d/dt, d²/dt²) at t = 0 and 1.
pub fn quintic_channel(a: [C64; 3], b: [C64; 3]) -> ArcChannel {
    let rows = [
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 2.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
        [0.0, 0.0, 2.0, 6.0, 12.0, 20.0],
    ];
    let m = DMatrix::<C64>::from_fn(6, 6, |i, j| C64::new(rows[i][j], 0.0));
    let rhs = DVector::<C64>::from_column_slice(&[a[0], a[1], a[2], b[0], b[1], b[2]]);
    let sol = m.lu().solve(&rhs).expect("quintic Hermite system is invertible");
    ArcChannel::from_coeffs(sol.as_slice())
}

/// The standard bump t^3 (1-t)^3, vanishing to order 2 at both ends.
fn bump_channel(phase: C64, order: usize) -> ArcChannel {
    // (t (1-t))^order expanded, times phase
    let mut poly = vec![C64::new(1.0, 0.0)];
    for _ in 0..order {
        // multiply by t - t^2
        let mut next = vec![C64::new(0.0, 0.0); poly.len() + 2];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] += c;
            next[k + 2] -= c;
        }
        poly = next;
    }
    ArcChannel::from_coeffs(&poly.iter().map(|c| c * phase).collect::<Vec<_>>())
}

/// A jet-polynomial patch around an outside interpolation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskPatch {
    pub center: [f64; 2],
    pub radius: f64,
    pub x: Vec<LaurentPoly>,
    pub y: Vec<LaurentPoly>,
    pub z: LaurentPoly,
}

impl DiskPatch {
    pub fn center(&self) -> C64 {
        C64::new(self.center[0], self.center[1])
    }

    pub fn value_at(&self, p: C64) -> Result<Vec<C64>, PipelineError> {
        let mut out = vec![];
        for f in self.x.iter().chain(self.y.iter()) {
            out.push(f.evaluate(p)?);
        }
        out.push(self.z.evaluate(p)?);
        Ok(out)
    }
}

/// A Legendrian channel bundle along one connecting arc.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcLink {
    pub arc: Arc,
    pub x: Vec<ArcChannel>,
    pub y: Vec<ArcChannel>,
    pub z0: (f64, f64),
    /// cumulative z at t = k / Z_TABLE
    pub z_table: Vec<(f64, f64)>,
}

impl ArcLink {
    /// z at a table node.
    pub fn z_at_node(&self, k: usize) -> C64 {
        C64::new(self.z_table[k].0, self.z_table[k].1)
    }

    pub fn node_t(k: usize) -> f64 {
        k as f64 / Z_TABLE as f64
    }

    /// All component values at a table node.
    pub fn value_at_node(&self, k: usize) -> Vec<C64> {
        let t = Self::node_t(k);
        let mut out: Vec<C64> = self.x.iter().map(|c| c.eval(t)).collect();
        out.extend(self.y.iter().map(|c| c.eval(t)));
        out.push(self.z_at_node(k));
        out
    }

    /// Largest pointwise Legendrian defect |dz/dt + Σ x dy/dt| over nodes.
    pub fn legendrian_defect(&self) -> f64 {
        let n = self.x.len();
        let h = 1.0 / Z_TABLE as f64;
        let mut worst = 0.0f64;
        for k in 1..Z_TABLE {
            let t = Self::node_t(k);
            let dz = (self.z_at_node(k + 1) - self.z_at_node(k - 1)) / (2.0 * h);
            let mut xy = C64::new(0.0, 0.0);
            for i in 0..n {
                xy += self.x[i].eval(t) * self.y[i].deriv(t);
            }
            worst = worst.max((dz + xy).norm());
        }
        worst
    }
}

/// Builds the cumulative z table by composite Simpson on -Σ x y'.
fn integrate_z(x: &[ArcChannel], y: &[ArcChannel], z0: C64) -> Vec<(f64, f64)> {
    let n = x.len();
    let integrand = |t: f64| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            acc += x[i].eval(t) * y[i].deriv(t);
        }
        -acc
    };
    let h = 1.0 / Z_TABLE as f64;
    let mut table = Vec::with_capacity(Z_TABLE + 1);
    let mut acc = z0;
    table.push((acc.re, acc.im));
    for k in 0..Z_TABLE {
        let a = k as f64 * h;
        let fa = integrand(a);
        let fm = integrand(a + 0.5 * h);
        let fb = integrand(a + h);
        acc += (fa + fm * 4.0 + fb) * (h / 6.0);
        table.push((acc.re, acc.im));
    }
    table
}

/// The scalar ∫_0^1 Σ x y' dt by Simpson.
fn channel_integral(x: &[ArcChannel], y: &[ArcChannel]) -> C64 {
    let table = integrate_z(x, y, C64::new(0.0, 0.0));
    -C64::new(table[Z_TABLE].0, table[Z_TABLE].1)
}

/// A generalized Legendrian curve: Laurent data on the main compact, jet
/// patches on outside disks, sampled Legendrian channels along arcs.
#[derive(Debug, Clone)]
pub struct GeneralizedCurve {
    pub n: usize,
    pub base: LegendrianCurve,
    pub patches: Vec<DiskPatch>,
    pub links: Vec<ArcLink>,
}

impl GeneralizedCurve {
    pub fn exact(base: LegendrianCurve) -> Self {
        GeneralizedCurve { n: base.n, base, patches: vec![], links: vec![] }
    }

    fn patch_for(&self, p: C64) -> Option<&DiskPatch> {
        self.patches
            .iter()
            .find(|patch| (p - patch.center()).norm() <= patch.radius + 1e-9)
    }

    pub fn value_at(&self, p: C64) -> Result<Vec<C64>, PipelineError> {
        if let Some(patch) = self.patch_for(p) {
            return patch.value_at(p);
        }
        // nearest arc node within resolution
        for link in &self.links {
            if link.arc.min_distance_to_point(p) < 1e-9 {
                let mut best = (f64::INFINITY, 0usize);
                for k in 0..=Z_TABLE {
                    let d = (link.arc.point_at(ArcLink::node_t(k)) - p).norm();
                    if d < best.0 {
                        best = (d, k);
                    }
                }
                return Ok(link.value_at_node(best.1));
            }
        }
        Ok(self.base.eval_point(p)?)
    }

    /// Deterministic samples over an admissible set: spiral points on the
    /// compacts (base or patch data), arc-table nodes on the arcs.
    pub fn samples_on(
        &self,
        s: &AdmissibleSet,
        density: f64,
    ) -> Result<Vec<(C64, Vec<C64>)>, PipelineError> {
        let mut out = vec![];
        for comp in &s.components {
            for p in comp.spiral_samples(density) {
                if let Some(patch) = self.patch_for(p) {
                    out.push((p, patch.value_at(p)?));
                } else {
                    out.push((p, self.base.eval_point(p)?));
                }
            }
        }
        for arc in &s.arcs {
            let link = self.links.iter().find(|l| {
                (l.arc.start() - arc.start()).norm() < 1e-9
                    && (l.arc.end() - arc.end()).norm() < 1e-9
            });
            let count = ((arc.length() * density).ceil() as usize).clamp(8, 256);
            match link {
                Some(link) => {
                    for j in 0..=count {
                        let k = j * Z_TABLE / count;
                        let p = link.arc.point_at(ArcLink::node_t(k));
                        out.push((p, link.value_at_node(k)));
                    }
                }
                // an arc without a channel bundle carries the restriction
                // of the holomorphic base data
                None => {
                    for p in arc.samples(count + 1) {
                        out.push((p, self.base.eval_point(p)?));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The jet polynomial of φ at p (x and y components), with z integrated
/// exactly so the patch is Legendrian and matches the z-jets through the
/// compatibility identity.
fn patch_from_jet(jet: &JetSpec, radius: f64) -> Result<DiskPatch, PipelineError> {
    let p = jet.point();
    let n = jet.n();
    let taylor = |values: &[C64]| -> LaurentPoly {
        // Σ_k v_k / k! (ζ - p)^k expanded into the global basis
        let mut shifted = vec![C64::new(0.0, 0.0); values.len()];
        let mut fact = 1.0;
        for (k, v) in values.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            shifted[k] = v / fact;
        }
        let mut out = LaurentPoly::zero();
        let mut power = LaurentPoly::constant(C64::new(1.0, 0.0));
        let lin = LaurentPoly::from_coeffs(&[-p, C64::new(1.0, 0.0)]);
        for v in &shifted {
            out = out.add(&power.scale(*v));
            power = power.mul(&lin).expect("polynomial product");
        }
        out
    };
    let x: Vec<LaurentPoly> =
        (0..n).map(|i| taylor(&(0..=jet.m).map(|k| jet.x_jet(i, k)).collect::<Vec<_>>())).collect();
    let y: Vec<LaurentPoly> =
        (0..n).map(|i| taylor(&(0..=jet.m).map(|k| jet.y_jet(i, k)).collect::<Vec<_>>())).collect();
    let mut form = OneForm::zero();
    for i in 0..n {
        form = form.add(&OneForm::x_dy(&x[i], &y[i])?);
    }
    let zraw = primitive(&OneForm::new(form.coeff.neg()))?;
    let z = zraw.add(&LaurentPoly::constant(jet.z_jet(0) - zraw.evaluate(p)?));
    Ok(DiskPatch { center: [p.re, p.im], radius, x, y, z })
}

/// Order-2 t-jets of a holomorphic curve at an arc endpoint, by the chain
/// rule with the arc's endpoint velocity.
fn endpoint_tjets(
    values: &[Vec<C64>],
    gdot: C64,
) -> Vec<[C64; 3]> {
    values
        .iter()
        .map(|jets| [jets[0], jets[1] * gdot, jets[2] * gdot * gdot])
        .collect()
}

pub struct ExtendOutcome {
    pub curve: GeneralizedCurve,
    pub s_prime: AdmissibleSet,
    pub arcs_used: Vec<Arc>,
}

/// Extends `f` over disks around the outside jets and connecting arcs.
pub fn extend_with_outside_jets(
    spec: &ProblemSpec,
    f: &LegendrianCurve,
) -> Result<ExtendOutcome, PipelineError> {
    let n = spec.n;
    if spec.outside_jets.is_empty() {
        return Ok(ExtendOutcome {
            curve: GeneralizedCurve::exact(f.clone()),
            s_prime: spec.s_set.clone(),
            arcs_used: vec![],
        });
    }
    let mut patches = vec![];
    let mut links = vec![];
    let mut components = spec.s_set.components.clone();
    let mut arcs = spec.s_set.arcs.clone();

    for (ji, jet) in spec.outside_jets.iter().enumerate() {
        let p = jet.point();
        // patch radius: a third of the clearance to everything else
        let mut clear = spec.domain.clearance(p);
        for comp in &spec.s_set.components {
            clear = clear.min((p - comp.center()).norm() - comp.radius);
        }
        for other in &spec.outside_jets {
            let d = (other.point() - p).norm();
            if d > 1e-12 {
                clear = clear.min(d / 2.0);
            }
        }
        let radius = (clear / 3.0).min(0.3).max(1e-3);
        let patch = patch_from_jet(jet, radius)?;

        // junction points: on the nearest component boundary toward p, and
        // on the patch boundary toward that component
        let host = spec
            .s_set
            .components
            .iter()
            .min_by(|a, b| {
                let da = (p - a.center()).norm() - a.radius;
                let db = (p - b.center()).norm() - b.radius;
                da.partial_cmp(&db).unwrap()
            })
            .ok_or(PipelineError::JetPointMisplaced)?;
        let dir = (p - host.center()) / (p - host.center()).norm();
        let u_p = host.center() + dir * host.radius;
        let omega_p = p - dir * radius;

        let mut route_attempt = 0u64;
        let link = loop {
            let avoid: Vec<AvoidItem> = components
                .iter()
                .map(AvoidItem::Compact)
                .chain(arcs.iter().map(AvoidItem::Arc))
                .chain(patches.iter().map(|pt: &DiskPatch| {
                    AvoidItem::Disk(Disk::new(pt.center(), pt.radius))
                }))
                .collect();
            let arc = build_arc(
                &spec.domain,
                u_p,
                omega_p,
                &avoid,
                spec.seed.wrapping_add(7919 * ji as u64 + route_attempt),
            )?;
            let length = arc.length();
            let gdot0 = arc.tangent_at(0.0) * length;
            let gdot1 = arc.tangent_at(1.0) * length;

            // order-2 jets of f at u_p and of the patch at omega_p
            let jets_a: Vec<Vec<C64>> = f
                .components()
                .iter()
                .map(|c| c.jet_at(u_p, 2))
                .collect::<Result<_, _>>()?;
            let jets_b: Vec<Vec<C64>> = patch
                .x
                .iter()
                .chain(patch.y.iter())
                .chain(std::iter::once(&patch.z))
                .map(|c| c.jet_at(omega_p, 2))
                .collect::<Result<_, _>>()?;
            let ta = endpoint_tjets(&jets_a, gdot0);
            let tb = endpoint_tjets(&jets_b, gdot1);

            let mut xc: Vec<ArcChannel> =
                (0..n).map(|i| quintic_channel(ta[i], tb[i])).collect();
            let mut yc: Vec<ArcChannel> =
                (0..n).map(|i| quintic_channel(ta[n + i], tb[n + i])).collect();

            // z-closure: ∫_0^1 Σ x y' dt must equal z(u_p) - z_patch(omega_p)
            let z_u = f.z.evaluate(u_p)?;
            let z_omega = patch.z.evaluate(omega_p)?;
            let target = z_u - z_omega;
            let base = channel_integral(&xc, &yc);
            let bump = bump_channel(C64::new(1.0, 0.0), 3);
            // bump on x_1: slope = ∫ b y_1' dt
            let with_bump = {
                let mut xb = xc.clone();
                xb[0] = xb[0].add_scaled(&bump, C64::new(1.0, 0.0));
                channel_integral(&xb, &yc)
            };
            let slope_x = with_bump - base;
            if slope_x.norm() > 1e-10 {
                let a = (target - base) / slope_x;
                xc[0] = xc[0].add_scaled(&bump, a);
            } else {
                // bump on y_1 instead
                let with_bump_y = {
                    let mut yb = yc.clone();
                    yb[0] = yb[0].add_scaled(&bump, C64::new(1.0, 0.0));
                    channel_integral(&xc, &yb)
                };
                let slope_y = with_bump_y - base;
                if slope_y.norm() > 1e-10 {
                    let a = (target - base) / slope_y;
                    yc[0] = yc[0].add_scaled(&bump, a);
                } else if route_attempt < 3 {
                    route_attempt += 1;
                    continue;
                } else {
                    return Err(PipelineError::DegenerateArcIntegral);
                }
            }
            let z_table = integrate_z(&xc, &yc, z_u);
            let z_end = C64::new(z_table[Z_TABLE].0, z_table[Z_TABLE].1);
            if (z_end - z_omega).norm() > 1e-8 {
                return Err(PipelineError::JunctionMismatch {
                    defect: (z_end - z_omega).norm(),
                });
            }
            break ArcLink { arc, x: xc, y: yc, z0: (z_u.re, z_u.im), z_table };
        };
        arcs.push(link.arc.clone());
        components.push(CompactSet::disk(p, radius));
        patches.push(patch);
        links.push(link);
    }

    let arcs_used: Vec<Arc> = links.iter().map(|l| l.arc.clone()).collect();
    let s_prime = AdmissibleSet { components, arcs };
    Ok(ExtendOutcome {
        curve: GeneralizedCurve { n, base: f.clone(), patches, links },
        s_prime,
        arcs_used,
    })
}

/// A discretized Legendrian path between two endpoint jets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LegendrianPath {
    pub t: Vec<f64>,
    /// per sample: 2n+1 component values
    pub samples: Vec<Vec<(f64, f64)>>,
}

impl LegendrianPath {
    pub fn sample(&self, k: usize) -> Vec<C64> {
        self.samples[k].iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Connects two endpoint jets (interpreted as t-parameterized data) by a
/// smooth Legendrian path: quintic Hermite x,y channels, z by cumulative
/// integration, one bump amplitude solving z(1) = z_B exactly. Components
/// listed in `mask` stay above `rho` in modulus at every sample.
pub fn connect_legendrian(
    jet_a: &JetSpec,
    jet_b: &JetSpec,
    rho: f64,
    mask: &[usize],
) -> Result<LegendrianPath, PipelineError> {
    let n = jet_a.n();
    assert_eq!(n, jet_b.n());
    let va = jet_a.value();
    let vb = jet_b.value();
    let same = va
        .iter()
        .zip(&vb)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        < 1e-14
        && crate::contact::jet_distance(jet_a, jet_b).map(|d| d < 1e-14).unwrap_or(false);
    if same {
        let row: Vec<(f64, f64)> = va.iter().map(|c| (c.re, c.im)).collect();
        return Ok(LegendrianPath { t: vec![0.0, 1.0], samples: vec![row.clone(), row] });
    }
    for &mi in mask {
        if va[mi].norm() <= rho || vb[mi].norm() <= rho {
            return Err(PipelineError::FloorViolated {
                floor: rho,
                reached: va[mi].norm().min(vb[mi].norm()),
            });
        }
    }

    let endpoint = |jet: &JetSpec, i: usize| -> [C64; 3] {
        let d1 = if jet.m >= 1 { jet_comp(jet, i, 1) } else { C64::new(0.0, 0.0) };
        let d2 = if jet.m >= 2 { jet_comp(jet, i, 2) } else { C64::new(0.0, 0.0) };
        [jet_comp(jet, i, 0), d1, d2]
    };
    let xc_base: Vec<ArcChannel> =
        (0..n).map(|i| quintic_channel(endpoint(jet_a, i), endpoint(jet_b, i))).collect();
    let yc_base: Vec<ArcChannel> =
        (0..n).map(|i| quintic_channel(endpoint(jet_a, n + i), endpoint(jet_b, n + i))).collect();
    let z_a = jet_a.z_jet(0);
    let z_b = jet_b.z_jet(0);

    // reshape ladder: channel choice x phase x profile order
    for attempt in 0..32u32 {
        let channel = (attempt % 4) as usize;
        let phase = C64::new(0.0, (attempt / 4) as f64 * 0.7).exp();
        let order = 3 + (attempt / 16) as usize;
        let bump = bump_channel(phase, order);
        let mut xc = xc_base.clone();
        let mut yc = yc_base.clone();
        let base = channel_integral(&xc, &yc);
        let target = z_a - z_b;
        let bumped = |xc: &[ArcChannel], yc: &[ArcChannel]| channel_integral(xc, yc);
        let slope = match channel % 2 {
            0 => {
                let mut xb = xc.clone();
                xb[0] = xb[0].add_scaled(&bump, C64::new(1.0, 0.0));
                bumped(&xb, &yc) - base
            }
            _ => {
                let mut yb = yc.clone();
                yb[0] = yb[0].add_scaled(&bump, C64::new(1.0, 0.0));
                bumped(&xc, &yb) - base
            }
        };
        if slope.norm() < 1e-12 {
            continue;
        }
        let a = (target - base) / slope;
        if channel % 2 == 0 {
            xc[0] = xc[0].add_scaled(&bump, a);
        } else {
            yc[0] = yc[0].add_scaled(&bump, a);
        }
        let z_table = integrate_z(&xc, &yc, z_a);

        // sample and check floors
        let count = 1024usize;
        let mut ts = Vec::with_capacity(count);
        let mut rows = Vec::with_capacity(count);
        let mut floor_ok = true;
        let mut reached = f64::INFINITY;
        for k in 0..count {
            let t = k as f64 / (count - 1) as f64;
            let node = ((t * Z_TABLE as f64).round() as usize).min(Z_TABLE);
            let tn = node as f64 / Z_TABLE as f64;
            let mut row: Vec<C64> = (0..n).map(|i| xc[i].eval(tn)).collect();
            row.extend((0..n).map(|i| yc[i].eval(tn)));
            row.push(C64::new(z_table[node].0, z_table[node].1));
            for &mi in mask {
                let m = row[mi].norm();
                reached = reached.min(m);
                if m <= rho {
                    floor_ok = false;
                }
            }
            ts.push(tn);
            rows.push(row.iter().map(|c| (c.re, c.im)).collect());
        }
        if !floor_ok {
            continue;
        }
        let z_end = C64::new(z_table[Z_TABLE].0, z_table[Z_TABLE].1);
        if (z_end - z_b).norm() > 1e-9 {
            continue;
        }
        return Ok(LegendrianPath { t: ts, samples: rows });
    }
    Err(PipelineError::FloorViolated { floor: rho, reached: f64::NAN })
}

fn jet_comp(jet: &JetSpec, comp: usize, k: usize) -> C64 {
    let n = jet.n();
    if comp < n {
        jet.x_jet(comp, k)
    } else if comp < 2 * n {
        jet.y_jet(comp - n, k)
    } else {
        jet.z_jet(k)
    }
}

/// Convenience: extends a ProblemSpec target over its outside jets.
pub fn extend_spec(spec: &ProblemSpec) -> Result<(ProblemSpec, Vec<Arc>), PipelineError> {
    let base = match &spec.target {
        TargetCurve::Exact(c) => c.clone(),
        TargetCurve::Generalized(g) if g.patches.is_empty() && g.links.is_empty() => {
            g.base.clone()
        }
        _ => return Err(PipelineError::KeptComponentNotGlobal),
    };
    let out = extend_with_outside_jets(spec, &base)?;
    let mut inside = spec.inside_jets.clone();
    inside.extend(spec.outside_jets.iter().cloned());
    Ok((
        ProblemSpec {
            s_set: out.s_prime,
            target: TargetCurve::Generalized(out.curve),
            inside_jets: inside,
            outside_jets: vec![],
            ..spec.clone()
        },
        out.arcs_used,
    ))
}
