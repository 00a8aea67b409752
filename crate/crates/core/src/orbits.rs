//! 1-periodic points of `g` in a non-contractible free homotopy class.
//!
//! A point `(x, y)` returns in class `(m, n)` exactly when
//! `h'(y) = m/A` and `h'(x) = −n/B`, so seeds come from two 1-D solves on
//! the monotone windows of `h'` and are then polished by Newton's method on
//! the lifted map.

use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::hamiltonian::EggbeaterSystem;
use crate::profile::{ProfileH, DECREASING_WINDOW, INCREASING_WINDOW, MAX_SLOPE};
use crate::report::fmt_num;
use crate::torus::{reduce, IntVec2, LiftPoint, Loop, TorusPoint};

pub const NEWTON_TOLERANCE: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;
pub const DEDUP_RADIUS: f64 = 1e-9;
/// Lower corner of the window holding canonical orbit representatives.
pub const CANONICAL_LO: f64 = -0.25;

#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub point: TorusPoint,
    /// Representative lift with coordinates in `[−¼, ¾)`.
    pub lift: LiftPoint,
    pub class: IntVec2,
    pub trajectory: Loop,
    /// `K_t(γ(t))` on the samples of `[0, ½]` and `[½, 1]`.
    pub k_first: Vec<f64>,
    pub k_second: Vec<f64>,
    pub det_dg_minus_id: f64,
    pub nondegenerate: bool,
    pub entered_dprime: bool,
}

/// Orbits found, plus seeds whose Newton iteration did not converge.
#[derive(Clone, Debug, Default)]
pub struct OrbitSearch {
    pub orbits: Vec<PeriodicOrbit>,
    pub failed_seeds: Vec<(LiftPoint, String)>,
}

/// Solutions of `h'(t) = c` in one period, one per monotone window.
pub fn solve_slope(h: &ProfileH, c: f64) -> Vec<f64> {
    [(DECREASING_WINDOW, true), (INCREASING_WINDOW, false)]
        .into_iter()
        .filter_map(|((lo, hi), decreasing)| bisect(h, c, lo, hi, decreasing))
        .collect()
}

fn bisect(h: &ProfileH, c: f64, mut lo: f64, mut hi: f64, decreasing: bool) -> Option<f64> {
    let above = |t: f64| {
        let v = h.h1(t) - c;
        if decreasing {
            v > 0.0
        } else {
            v < 0.0
        }
    };
    if !above(lo) || above(hi) {
        return None;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Some(if (h.h1(lo) - c).abs() <= (h.h1(hi) - c).abs() {
                lo
            } else {
                hi
            });
        }
        if h.h1(mid) == c {
            return Some(mid);
        }
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `g(l) − l − class`. Off `D'` the shears are evaluated in the shifted form
/// `(A h'(y) − m, −B h'(x + A h'(y) − m) − n)`, which avoids cancelling the
/// lift coordinates against each other.
fn residual(sys: &EggbeaterSystem, l: LiftPoint, class: IntVec2) -> Result<(f64, f64)> {
    let (e, entered) = sys.endpoint_with_flag(l)?;
    if entered {
        return Ok((e.x - l.x - class.m as f64, e.y - l.y - class.n as f64));
    }
    let h = sys.profile();
    let rx = sys.params().a * h.h1(l.y) - class.m as f64;
    let ry = -sys.params().b * h.h1(l.x + rx) - class.n as f64;
    Ok((rx, ry))
}

fn newton(sys: &EggbeaterSystem, seed: LiftPoint, class: IntVec2) -> Result<LiftPoint> {
    let mut l = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let (rx, ry) = residual(sys, l, class)?;
        if rx.abs().max(ry.abs()) < NEWTON_TOLERANCE {
            return Ok(l);
        }
        let d = sys.differential(l)?;
        let (a, b, c, e) = (d[0][0] - 1.0, d[0][1], d[1][0], d[1][1] - 1.0);
        let det = a * e - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::IntegrationFailure("singular Newton step".into()));
        }
        let next = LiftPoint::new(l.x - (e * rx - b * ry) / det, l.y - (a * ry - c * rx) / det);
        l = if next == l {
            // the full step rounds away; correct one coordinate at a time
            let mut p = l;
            if c != 0.0 {
                p.x -= ry / c;
            }
            if p == l && b != 0.0 {
                p.y -= rx / b;
            }
            if p == l {
                return Err(Error::IntegrationFailure(format!(
                    "Newton stagnated at residual {:e}",
                    rx.abs().max(ry.abs())
                )));
            }
            p
        } else {
            next
        };
    }
    Err(Error::IntegrationFailure(format!(
        "Newton did not converge in {NEWTON_MAX_ITER} iterations"
    )))
}

/// `det(Dg − I)` at `l` and the non-degeneracy flag. For the pure shears the
/// closed form `A·B·h''(x')·h''(y)` is checked against the matrix value.
pub fn nondegeneracy_at(sys: &EggbeaterSystem, l: LiftPoint) -> Result<(f64, bool)> {
    let d = sys.differential(l)?;
    let det = (d[0][0] - 1.0) * (d[1][1] - 1.0) - d[0][1] * d[1][0];
    if !sys.params().perturbed {
        let h = sys.profile();
        let (a, b) = (sys.params().a, sys.params().b);
        let closed = a * b * h.h2(l.x + a * h.h1(l.y)) * h.h2(l.y);
        let scale = closed.abs().max(1.0);
        if (closed - det).abs() > 1e-6 * scale {
            return Err(Error::IntegrationFailure(format!(
                "differential disagrees with closed form: {det} vs {closed}"
            )));
        }
        return Ok((closed, closed.abs() > DEGENERACY_THRESHOLD));
    }
    Ok((det, det.abs() > DEGENERACY_THRESHOLD))
}

pub fn nondegeneracy(sys: &EggbeaterSystem, orbit: &PeriodicOrbit) -> Result<(f64, bool)> {
    nondegeneracy_at(sys, orbit.lift)
}

fn analytic_seeds(sys: &EggbeaterSystem, class: IntVec2) -> Result<Vec<LiftPoint>> {
    let (a, b) = (sys.params().a, sys.params().b);
    let cy = class.m as f64 / a;
    let cx = -(class.n as f64) / b;
    if cy.abs() > MAX_SLOPE || cx.abs() > MAX_SLOPE {
        return Ok(Vec::new());
    }
    if cy.abs() == MAX_SLOPE || cx.abs() == MAX_SLOPE {
        return Err(Error::NonIsolated(class));
    }
    let ys = solve_slope(sys.profile(), cy);
    let xs = solve_slope(sys.profile(), cx);
    Ok(xs
        .iter()
        .flat_map(|&x| ys.iter().map(move |&y| LiftPoint::new(x, y)))
        .collect())
}

/// Newton from every node of a `k × k` grid; used for perturbed systems
/// when an analytic seed fails.
fn grid_seeds(sys: &EggbeaterSystem, class: IntVec2, k: usize) -> Vec<LiftPoint> {
    let mut found = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let seed = LiftPoint::new(
                CANONICAL_LO + i as f64 / k as f64,
                CANONICAL_LO + j as f64 / k as f64,
            );
            if let Ok(l) = newton(sys, seed, class) {
                found.push(l);
            }
        }
    }
    found
}

fn canonical_order(class: IntVec2) -> impl Fn(&LiftPoint, &LiftPoint) -> Ordering {
    // coordinates equal to within the dedup radius tie
    let key = |v: f64| (v / DEDUP_RADIUS).round() as i64;
    move |p, q| {
        let (kp, kq) = ((key(p.x), key(p.y)), (key(q.x), key(q.y)));
        if class.n == 0 {
            kp.1.cmp(&kq.1).then(kp.0.cmp(&kq.0))
        } else {
            kp.cmp(&kq)
        }
    }
}

fn build_orbit(sys: &EggbeaterSystem, l: LiftPoint, class: IntVec2) -> Result<PeriodicOrbit> {
    let (_, traj) = sys.apply(l)?;
    let trajectory = traj.to_loop()?;
    let (det, nondegenerate) = nondegeneracy_at(sys, l)?;
    Ok(PeriodicOrbit {
        point: reduce(l)?,
        lift: l,
        class,
        trajectory,
        k_first: traj.k_first,
        k_second: traj.k_second,
        det_dg_minus_id: det,
        nondegenerate,
        entered_dprime: traj.entered_dprime,
    })
}

/// All 1-periodic points of `g` in `class`, refined, deduplicated and
/// ordered: by `(y, x)` for horizontal classes and by `(x, y)` otherwise,
/// on representatives in `[−¼, ¾)²`.
pub fn find_periodic_points(sys: &EggbeaterSystem, class: IntVec2) -> Result<OrbitSearch> {
    if class.is_zero() {
        return Err(Error::InvalidInput("class must be non-contractible".into()));
    }
    let seeds = analytic_seeds(sys, class)?;
    let mut refined = Vec::new();
    let mut failed_seeds = Vec::new();
    for seed in &seeds {
        match newton(sys, *seed, class) {
            Ok(l) => refined.push(l),
            Err(e) => failed_seeds.push((*seed, e.to_string())),
        }
    }
    if sys.params().perturbed && !failed_seeds.is_empty() {
        refined.extend(grid_seeds(sys, class, 32));
    }

    let mut unique: Vec<LiftPoint> = Vec::new();
    for l in refined {
        let l = l.recentered(CANONICAL_LO);
        let p = reduce(l)?;
        let dup = unique.iter().any(|u| {
            reduce(*u)
                .map(|q| q.distance(&p) < DEDUP_RADIUS)
                .unwrap_or(false)
        });
        if !dup {
            unique.push(l);
        }
    }
    unique.sort_by(canonical_order(class));
    let orbits = unique
        .into_iter()
        .map(|l| build_orbit(sys, l, class))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitSearch {
        orbits,
        failed_seeds,
    })
}

/// CSV with header `class_m,class_n,x,y,det,nondegenerate,entered_dprime`.
pub fn write_csv<W: Write>(orbits: &[PeriodicOrbit], mut out: W) -> std::io::Result<()> {
    writeln!(out, "class_m,class_n,x,y,det,nondegenerate,entered_dprime")?;
    for o in orbits {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            o.class.m,
            o.class.n,
            fmt_num(o.lift.x),
            fmt_num(o.lift.y),
            fmt_num(o.det_dg_minus_id),
            o.nondegenerate,
            o.entered_dprime
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_eggbeater, EggbeaterParams, Mode};
    use crate::profile::{build_profile, ProfileConfig};
    use crate::torus::winding_vector;

    fn system(a: f64, perturbed: bool) -> EggbeaterSystem {
        let profile = build_profile(&ProfileConfig::default()).unwrap();
        build_eggbeater(
            EggbeaterParams::new(a).perturbed(perturbed),
            profile,
            Mode::UniqueCapping,
        )
        .unwrap()
    }

    fn points(sys: &EggbeaterSystem, class: IntVec2) -> Vec<(f64, f64)> {
        find_periodic_points(sys, class)
            .unwrap()
            .orbits
            .iter()
            .map(|o| (o.lift.x, o.lift.y))
            .collect()
    }

    fn assert_points(got: &[(f64, f64)], want: &[(f64, f64)]) {
        assert_eq!(got.len(), want.len(), "{got:?}");
        for (g, w) in got.iter().zip(want) {
            assert!(
                (g.0 - w.0).abs() < 1e-12 && (g.1 - w.1).abs() < 1e-12,
                "{g:?} vs {w:?}"
            );
        }
    }

    #[test]
    fn horizontal_class() {
        let got = points(&system(10.0, false), IntVec2::ALPHA);
        assert_points(
            &got,
            &[(0.0, -0.001), (0.5, -0.001), (0.0, 0.501), (0.5, 0.501)],
        );
    }

    #[test]
    fn vertical_class() {
        let got = points(&system(10.0, false), IntVec2::BETA);
        assert_points(
            &got,
            &[(0.0005, 0.0), (0.0005, 0.5), (0.4995, 0.0), (0.4995, 0.5)],
        );
    }

    #[test]
    fn diagonal_class() {
        let got = points(&system(10.0, false), IntVec2::new(1, 1));
        assert_points(
            &got,
            &[
                (0.0005, -0.001),
                (0.0005, 0.501),
                (0.4995, -0.001),
                (0.4995, 0.501),
            ],
        );
    }

    #[test]
    fn orbit_invariants() {
        let sys = system(10.0, false);
        for class in [IntVec2::ALPHA, IntVec2::BETA] {
            for o in find_periodic_points(&sys, class).unwrap().orbits {
                let e = sys.endpoint(o.lift).unwrap();
                assert!((e.x - o.lift.x - class.m as f64).abs() < 1e-9);
                assert!((e.y - o.lift.y - class.n as f64).abs() < 1e-9);
                assert_eq!(winding_vector(&o.trajectory).unwrap(), class);
                assert!(o.nondegenerate);
                assert!(!o.entered_dprime);
                assert!(o.det_dg_minus_id.abs() > 1e6);
            }
        }
    }

    #[test]
    fn first_point_determinant() {
        let sys = system(10.0, false);
        let search = find_periodic_points(&sys, IntVec2::ALPHA).unwrap();
        let (det, flag) = nondegeneracy(&sys, &search.orbits[0]).unwrap();
        assert!((det - 2.0e6).abs() < 1e-6);
        assert!(flag);
        // h'' vanishes at y = 1/4
        let (det, flag) = nondegeneracy_at(&sys, LiftPoint::new(0.0, 0.25)).unwrap();
        assert_eq!(det, 0.0);
        assert!(!flag);
    }

    #[test]
    fn class_bounds() {
        let sys = system(10.0, false);
        assert!(find_periodic_points(&sys, IntVec2::new(51, 0))
            .unwrap()
            .orbits
            .is_empty());
        assert!(matches!(
            find_periodic_points(&sys, IntVec2::new(50, 0)),
            Err(Error::NonIsolated(_))
        ));
        assert!(find_periodic_points(&sys, IntVec2::ZERO).is_err());
    }

    #[test]
    fn newton_matches_bisection() {
        let sys = system(10.0, false);
        let seeds = analytic_seeds(&sys, IntVec2::new(1, 1)).unwrap();
        for s in seeds {
            let l = newton(&sys, s, IntVec2::new(1, 1)).unwrap();
            assert!((l.x - s.x).abs() < 1e-10 && (l.y - s.y).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbation_leaves_orbits_alone() {
        for a in [3.0, 10.0] {
            for class in [IntVec2::ALPHA, IntVec2::BETA] {
                let plain = points(&system(a, false), class);
                let pert = points(&system(a, true), class);
                assert_eq!(plain.len(), pert.len());
                for (p, q) in plain.iter().zip(&pert) {
                    assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
                }
            }
        }
    }

    /// Brute-force scan: every grid cell where both residual components
    /// change sign (mod the lattice) must hold a returned orbit.
    #[test]
    fn no_orbits_missed_by_grid_scan() {
        for a in [3.0, 10.0, 50.0] {
            let sys = system(a, false);
            for class in [IntVec2::ALPHA, IntVec2::BETA] {
                let found = find_periodic_points(&sys, class).unwrap().orbits;
                assert_eq!(found.len(), 4);
                let n = 2048;
                let h = sys.profile();
                // the residual separates: (A h'(y) − m, −B h'(x) − n)
                let ry = |j: usize| a * h.h1(CANONICAL_LO + j as f64 / n as f64) - class.m as f64;
                let rx = |i: usize| {
                    -sys.params().b * h.h1(CANONICAL_LO + i as f64 / n as f64) - class.n as f64
                };
                let change = |f: &dyn Fn(usize) -> f64| {
                    (0..n)
                        .filter(|&k| f(k) * f(k + 1) < 0.0 || f(k) == 0.0)
                        .collect::<Vec<_>>()
                };
                let cols = change(&rx);
                let rows = change(&ry);
                assert_eq!(cols.len() * rows.len(), 4, "A={a} {class}");
                for &i in &cols {
                    for &j in &rows {
                        let lo = (
                            CANONICAL_LO + i as f64 / n as f64,
                            CANONICAL_LO + j as f64 / n as f64,
                        );
                        let cell = 1.0 / n as f64;
                        assert!(found.iter().any(|o| {
                            o.lift.x >= lo.0 - 1e-12
                                && o.lift.x <= lo.0 + cell + 1e-12
                                && o.lift.y >= lo.1 - 1e-12
                                && o.lift.y <= lo.1 + cell + 1e-12
                        }));
                    }
                }
            }
        }
    }
}
