//! Actions of capped 1-periodic trajectories.
//!
//! A trajectory `γ` in class `W` is capped by the straight-line homotopy
//! `w(s,t) = (1−s)·γ̃(t) + s·(γ̃_ref(t) + v)` to a reference loop of the same
//! class, with `(s,t)` positively oriented. The action is
//! `∫ w*ω + ∫₀¹ K_t(γ(t)) dt`.
//!
//! The wrap of a capping is its degree over `q_0`. Translating the reference
//! lift by `v` changes the degree by `det(v, W)`; in TorusMode every unit of
//! degree adds the total area 2 to the action.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{EggbeaterSystem, Mode};
use crate::orbits::{find_periodic_points, PeriodicOrbit};
use crate::report::fmt_num;
use crate::torus::{winding_vector, IntVec2, LiftPoint, Loop, Path};

/// Samples used for the reference loops.
pub const REFERENCE_SAMPLES: usize = 64;

/// `γ_α(t) = (t, ½)`.
pub fn gamma_alpha() -> Loop {
    Loop::from_fn(REFERENCE_SAMPLES, |t| LiftPoint::new(t, 0.5)).expect("valid reference loop")
}

/// `γ_β(t) = (½, t)`.
pub fn gamma_beta() -> Loop {
    Loop::from_fn(REFERENCE_SAMPLES, |t| LiftPoint::new(0.5, t)).expect("valid reference loop")
}

/// Reference loop for `(1,0)` or `(0,1)`.
pub fn reference_for(class: IntVec2) -> Option<Loop> {
    match (class.m, class.n) {
        (1, 0) => Some(gamma_alpha()),
        (0, 1) => Some(gamma_beta()),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionValue {
    pub value: f64,
    pub orbit: usize,
    pub class: IntVec2,
    pub wrap: i64,
    pub point: LiftPoint,
    pub area_term: f64,
    pub hamiltonian_term: f64,
    pub nondeg_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpectrum {
    pub a: f64,
    pub b: f64,
    pub class: IntVec2,
    pub mode: Mode,
    pub values: Vec<ActionValue>,
    /// `value − nearest of {±A, ±3A}`; only for `(1,0)` and `(0,1)`.
    pub deltas: Option<Vec<f64>>,
}

impl ActionSpectrum {
    pub fn actions(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value).collect()
    }

    /// CSV with columns `class_m,class_n,point_x,point_y,wrap,action,delta,nondeg_det`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "class_m,class_n,point_x,point_y,wrap,action,delta,nondeg_det"
        )?;
        for (i, v) in self.values.iter().enumerate() {
            let delta = self
                .deltas
                .as_ref()
                .map(|d| fmt_num(d[i]))
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                v.class.m,
                v.class.n,
                fmt_num(v.point.x),
                fmt_num(v.point.y),
                v.wrap,
                fmt_num(v.value),
                delta,
                fmt_num(v.nondeg_det)
            )?;
        }
        Ok(())
    }
}

/// Composite Simpson rule for equispaced samples over an interval of
/// length `len`; needs an even number of panels.
pub fn simpson(values: &[f64], len: f64) -> Result<f64> {
    let panels = values.len().saturating_sub(1);
    if panels == 0 || panels % 2 == 1 {
        return Err(Error::InvalidInput(format!(
            "Simpson needs an even number of panels, got {panels}"
        )));
    }
    let h = len / panels as f64;
    let mut s = values[0] + values[panels];
    for (i, v) in values.iter().enumerate().take(panels).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(s * h / 3.0)
}

fn det(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn merged_times(a: &Path, b: &Path) -> Vec<f64> {
    let mut ts: Vec<f64> = a.samples().iter().chain(b.samples()).map(|s| s.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `∫ w*(dx∧dy)` over the straight-line homotopy from `c0` (s = 0) to
/// `c1 + v` (s = 1); exact for piecewise-linear paths.
pub fn homotopy_area(c0: &Path, c1: &Path, v: IntVec2) -> f64 {
    let ts = merged_times(c0, c1);
    let (vx, vy) = (v.m as f64, v.n as f64);
    let gap = |t: f64| {
        let (p, q) = (c0.at(t), c1.at(t));
        (q.x + vx - p.x, q.y + vy - p.y)
    };
    ts.windows(2)
        .map(|w| {
            let (ga, gb) = (gap(w[0]), gap(w[1]));
            let mid = (0.5 * (ga.0 + gb.0), 0.5 * (ga.1 + gb.1));
            let (p0, p1) = (c0.at(w[0]), c0.at(w[1]));
            let (q0, q1) = (c1.at(w[0]), c1.at(w[1]));
            let tangent = (
                0.5 * ((p1.x - p0.x) + (q1.x - q0.x)),
                0.5 * ((p1.y - p0.y) + (q1.y - q0.y)),
            );
            det(mid, tangent)
        })
        .sum()
}

/// Boundary polygon of the homotopy square, counter-clockwise in `(s,t)`.
fn boundary_polygon(c0: &Path, c1: &Path, v: IntVec2) -> Vec<(f64, f64)> {
    let ts = merged_times(c0, c1);
    let (vx, vy) = (v.m as f64, v.n as f64);
    let mut poly = Vec::with_capacity(2 * ts.len());
    for &t in &ts {
        let q = c1.at(t);
        poly.push((q.x + vx, q.y + vy));
    }
    for &t in ts.iter().rev() {
        let p = c0.at(t);
        poly.push((p.x, p.y));
    }
    poly
}

fn winding_number(poly: &[(f64, f64)], z: (f64, f64)) -> i64 {
    let n = poly.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = (poly[i].0 - z.0, poly[i].1 - z.1);
        let b = (poly[(i + 1) % n].0 - z.0, poly[(i + 1) % n].1 - z.1);
        total += det(a, b).atan2(a.0 * b.0 + a.1 * b.1);
    }
    (total / TAU).round() as i64
}

/// Degree of the homotopy over `q_0`, as a map into the torus: the sum of
/// the boundary winding numbers around all lattice translates of a point
/// of `D_A` (`offset` is a small generic vector inside `D_A`).
pub fn capping_degree(c0: &Path, c1: &Path, v: IntVec2, offset: (f64, f64)) -> i64 {
    let poly = boundary_polygon(c0, c1, v);
    let (mut lo, mut hi) = (
        (f64::INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for p in &poly {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    }
    let mut deg = 0;
    for i in (lo.0.floor() as i64 - 1)..=(hi.0.ceil() as i64 + 1) {
        for j in (lo.1.floor() as i64 - 1)..=(hi.1.ceil() as i64 + 1) {
            deg += winding_number(&poly, (i as f64 + offset.0, j as f64 + offset.1));
        }
    }
    deg
}

/// Smallest distance from a path to the integer lattice.
pub fn lattice_clearance(c: &Path, v: IntVec2) -> f64 {
    let (vx, vy) = (v.m as f64, v.n as f64);
    c.samples()
        .windows(2)
        .map(|w| {
            let a = (w[0].lift.x + vx, w[0].lift.y + vy);
            let b = (w[1].lift.x + vx, w[1].lift.y + vy);
            let mut best = f64::INFINITY;
            for i in (a.0.min(b.0).floor() as i64)..=(a.0.max(b.0).ceil() as i64) {
                for j in (a.1.min(b.1).floor() as i64)..=(a.1.max(b.1).ceil() as i64) {
                    best = best.min(segment_point_distance(a, b, (i as f64, j as f64)));
                }
            }
            best
        })
        .fold(f64::INFINITY, f64::min)
}

fn segment_point_distance(a: (f64, f64), b: (f64, f64), z: (f64, f64)) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((z.0 - a.0) * d.0 + (z.1 - a.1) * d.1) / len2).clamp(0.0, 1.0)
    };
    (a.0 + s * d.0 - z.0).hypot(a.1 + s * d.1 - z.1)
}

/// `(g, x, y)` with `a·x + b·y = g = gcd(a, b) ≥ 0`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Lattice translation `v` of the reference lift realising degree `wrap`.
fn translation_for(class: IntVec2, wrap: i64, base_degree: i64) -> Result<IntVec2> {
    // det(v, W) = v.m·W.n − v.n·W.m
    let (g, x, y) = ext_gcd(class.n, -class.m);
    let need = wrap - base_degree;
    if g == 0 || need % g != 0 {
        return Err(Error::InvalidWrap { wrap, class });
    }
    let k = need / g;
    Ok(IntVec2::new(x * k, y * k))
}

/// Action of a sampled loop with stored Hamiltonian values.
pub fn action_of_loop(
    sys: &EggbeaterSystem,
    trajectory: &Loop,
    k_first: &[f64],
    k_second: &[f64],
    reference: &Loop,
    wrap: i64,
) -> Result<(f64, f64, f64, i64)> {
    let class = winding_vector(trajectory)?;
    let ref_class = winding_vector(reference)?;
    if class != ref_class {
        return Err(Error::ClassMismatch {
            trajectory: class,
            reference: ref_class,
        });
    }
    let ra = sys.params().r_a;
    let (c0, c1) = (trajectory.path(), reference.path());
    if lattice_clearance(c0, IntVec2::ZERO) < ra {
        return Err(Error::CappingThroughDisk);
    }
    let offset = (0.3187 * ra, 0.1732 * ra);
    let base = capping_degree(c0, c1, IntVec2::ZERO, offset);
    let target = match sys.model().mode() {
        Mode::UniqueCapping => 0,
        Mode::TorusMode => wrap,
    };
    let v = translation_for(class, target, base)?;
    if lattice_clearance(c1, v) < ra {
        return Err(Error::CappingThroughDisk);
    }
    let degree = capping_degree(c0, c1, v, offset);
    if degree != target {
        return Err(Error::InvalidWrap { wrap, class });
    }
    let area = homotopy_area(c0, c1, v) + sys.model().density_mass() * degree as f64;
    let ham = simpson(k_first, 0.5)? + simpson(k_second, 0.5)?;
    Ok((area + ham, area, ham, target))
}

/// Action of an orbit capped against `reference` with the given wrap
/// (ignored in UniqueCapping mode, where the wrap is always 0).
pub fn action(
    sys: &EggbeaterSystem,
    orbit: &PeriodicOrbit,
    reference: &Loop,
    wrap: i64,
) -> Result<ActionValue> {
    let (value, area_term, hamiltonian_term, wrap) = action_of_loop(
        sys,
        &orbit.trajectory,
        &orbit.k_first,
        &orbit.k_second,
        reference,
        wrap,
    )?;
    Ok(ActionValue {
        value,
        orbit: 0,
        class: orbit.class,
        wrap,
        point: orbit.lift,
        area_term,
        hamiltonian_term,
        nondeg_det: orbit.det_dg_minus_id,
    })
}

/// `value − nearest of {3A, A, −A, −3A}`.
pub fn delta(value: f64, a: f64) -> f64 {
    [3.0 * a, a, -a, -3.0 * a]
        .into_iter()
        .map(|c| value - c)
        .min_by(|x, y| x.abs().total_cmp(&y.abs()))
        .unwrap_or(f64::NAN)
}

/// Wrap-0 actions of every orbit found in `class`. Classes `(1,0)` and
/// `(0,1)` use `γ_α` and `γ_β` and carry Δ diagnostics; other classes are
/// capped against the straight loop `t ↦ (½, ½) + t·(m, n)`.
pub fn action_spectrum(sys: &EggbeaterSystem, class: IntVec2) -> Result<ActionSpectrum> {
    let search = find_periodic_points(sys, class)?;
    let (reference, diagnostic) = match reference_for(class) {
        Some(r) => (r, true),
        None => {
            let n = REFERENCE_SAMPLES
                * (class.m.unsigned_abs().max(class.n.unsigned_abs()) as usize).max(1);
            let r = Loop::from_fn(n, |t| {
                LiftPoint::new(0.5 + t * class.m as f64, 0.5 + t * class.n as f64)
            })?;
            (r, false)
        }
    };
    let values = search
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| {
            action(sys, o, &reference, 0).map(|mut v| {
                v.orbit = i;
                v
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a = sys.params().a;
    let deltas = diagnostic.then(|| values.iter().map(|v| delta(v.value, a)).collect());
    Ok(ActionSpectrum {
        a,
        b: sys.params().b,
        class,
        mode: sys.model().mode(),
        values,
        deltas,
    })
}
