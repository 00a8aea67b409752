//! Hofer-distance bounds from action spectra.
//!
//! Two orbits in the same class whose actions differ by `E` can only be
//! joined by cylinders of energy `E`, so a spectrum whose gaps stay large
//! keeps every fixed point of the class alive under perturbations of Hofer
//! size below the gap. An autonomous map cannot have fixed points in two
//! classes that intersect, which turns the gap into a distance bound.

use serde::{Deserialize, Serialize};

use crate::action::{action_spectrum, ActionSpectrum};
use crate::error::{Error, Result};
use crate::hamiltonian::{EggbeaterSystem, Mode};
use crate::orbits::find_periodic_points;
use crate::torus::{intersection_number, loops_intersect, IntVec2, LiftPoint};

/// Grid resolution for [`hofer_upper_bound`].
pub const UPPER_BOUND_GRID: usize = 2048;

/// Smallest `|a_i − a_j|` over `i ≠ j`.
pub fn min_action_gap(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientSpectrum(values.len()));
    }
    let mut best = f64::INFINITY;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            best = best.min((a - b).abs());
        }
    }
    Ok(best)
}

/// `2A − 2` (UniqueCapping) or `A/2 − 1` (TorusMode).
pub fn paper_lower_bound(a: f64, mode: Mode) -> Result<f64> {
    match mode {
        Mode::UniqueCapping if a > 1.0 => Ok(2.0 * a - 2.0),
        Mode::TorusMode if a > 2.0 => Ok(a / 2.0 - 1.0),
        _ => Err(Error::InvalidParams(format!(
            "A = {a} is out of range for {mode:?}"
        ))),
    }
}

/// `{3A, A, −A, −3A}`.
pub fn base_spectrum(a: f64) -> [f64; 4] {
    [3.0 * a, a, -a, -3.0 * a]
}

/// Default wrap cutoff `⌈6A⌉`.
pub fn default_kmax(a: f64) -> u32 {
    (6.0 * a).ceil() as u32
}

/// Energy lower bound over all admissible cylinders between orbits whose
/// actions lie within `delta_radius` of the base values.
///
/// A cylinder from `i` to `j` (`i ≠ j`) wrapping `k ≥ 0` times over the disk
/// carries energy at least `d_ij + shift·k − 2·delta_radius` and, when
/// `k ≥ 1`, at least `k·area_da`. Configurations that cannot have positive
/// energy (`d_ij + shift·k + 2·delta_radius ≤ 0`) are skipped. `kmax = 0`
/// disallows wrapping; otherwise the result must be reached before
/// `(kmax + 1)·area_da` or the enumeration is reported incomplete.
pub fn enumerated_lower_bound(
    base: &[f64],
    delta_radius: f64,
    shift: f64,
    area_da: f64,
    kmax: u32,
) -> Result<f64> {
    if base.len() < 2 {
        return Err(Error::InsufficientSpectrum(base.len()));
    }
    if !(delta_radius >= 0.0 && shift.is_finite() && area_da > 0.0 && area_da.is_finite()) {
        return Err(Error::InvalidParams(
            "delta_radius ≥ 0, finite shift and positive area required".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for (i, ai) in base.iter().enumerate() {
        for (j, aj) in base.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = ai - aj;
            for k in 0..=kmax {
                let kf = k as f64;
                if d + shift * kf + 2.0 * delta_radius <= 0.0 {
                    continue;
                }
                let wrap_floor = if k >= 1 { kf * area_da } else { 0.0 };
                best = best.min((d + shift * kf - 2.0 * delta_radius).max(wrap_floor));
            }
        }
    }
    if kmax > 0 && ((kmax as f64 + 1.0) * area_da) < best {
        return Err(Error::IncompleteEnumeration { kmax });
    }
    Ok(best)
}

/// `time · (max H − min H)` over an `n × n` grid of the unit square.
pub fn factor_flow_norm(h: impl Fn(LiftPoint) -> f64, time: f64, n: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let v = h(LiftPoint::new(i as f64 / n as f64, j as f64 / n as f64));
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    time * (hi - lo)
}

/// Hofer length of the factor flow `Φ_A`: `A·(max F − min F)`.
pub fn hofer_upper_bound(sys: &EggbeaterSystem) -> f64 {
    factor_flow_norm(|l| sys.f_value(l), sys.params().a, UPPER_BOUND_GRID)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOrbit {
    pub x: f64,
    pub y: f64,
    pub action: f64,
    pub delta: f64,
    pub nondeg_det: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateClass {
    pub class: [i64; 2],
    pub orbits: Vec<CertificateOrbit>,
    pub min_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoferCertificate {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub mode: Mode,
    pub classes: Vec<CertificateClass>,
    pub paper_lower_bound: f64,
    pub enumerated_lower_bound: f64,
    pub upper_bound: f64,
    pub witness: Witness,
    pub assumptions: Vec<String>,
}

impl HoferCertificate {
    /// Hofer radius within which the fixed points of both classes persist:
    /// the smallest computed gap (UniqueCapping) or the enumerated bound
    /// (TorusMode).
    pub fn persistence_radius(&self) -> Result<f64> {
        match self.mode {
            Mode::UniqueCapping => {
                let mut best = f64::INFINITY;
                for c in &self.classes {
                    let actions: Vec<f64> = c.orbits.iter().map(|o| o.action).collect();
                    best = best.min(min_action_gap(&actions)?);
                }
                Ok(best)
            }
            Mode::TorusMode => Ok(self.enumerated_lower_bound),
        }
    }

    /// Bound consistency checks.
    pub fn is_consistent(&self) -> bool {
        self.enumerated_lower_bound >= self.paper_lower_bound - 1e-9
            && self.upper_bound >= self.enumerated_lower_bound
    }
}

/// Enumerated bound for a system in its own mode: no wraps for
/// UniqueCapping, `⌈6A⌉` wraps of area `Area(D_A)` for TorusMode.
pub fn model_enumerated_bound(sys: &EggbeaterSystem) -> Result<f64> {
    let a = sys.params().a;
    let model = sys.model();
    let kmax = match model.mode() {
        Mode::UniqueCapping => 0,
        Mode::TorusMode => default_kmax(a),
    };
    enumerated_lower_bound(
        &base_spectrum(a),
        1.0,
        model.total_area(),
        model.disk_area(),
        kmax,
    )
}

fn class_entry(spectrum: &ActionSpectrum) -> Result<CertificateClass> {
    let deltas = spectrum.deltas.clone().unwrap_or_default();
    let orbits = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| CertificateOrbit {
            x: v.point.x,
            y: v.point.y,
            action: v.value,
            delta: deltas.get(i).copied().unwrap_or(f64::NAN),
            nondeg_det: v.nondeg_det,
        })
        .collect();
    Ok(CertificateClass {
        class: [spectrum.class.m, spectrum.class.n],
        orbits,
        min_gap: min_action_gap(&spectrum.actions())?,
    })
}

/// Runs orbits, spectra, gaps and bounds for `(1,0)` and `(0,1)` and checks
/// the intersection obstruction.
pub fn certify_nonautonomous(sys: &EggbeaterSystem) -> Result<HoferCertificate> {
    let a = sys.params().a;
    let mode = sys.model().mode();
    let paper = paper_lower_bound(a, mode)?;
    if intersection_number(IntVec2::ALPHA, IntVec2::BETA) == 0 {
        return Err(Error::CertificateUnavailable(
            "classes do not intersect".into(),
        ));
    }

    let mut assumptions = vec![
        "Floer cylinders are taken for a generic time-dependent almost complex structure; \
         regularity is assumed, not checked"
            .to_string(),
        "cylinder energy equals the action difference of its capped ends".to_string(),
    ];
    if mode == Mode::TorusMode {
        assumptions.push(
            "wraps with negative local degree over q_0 are excluded by positivity of \
             holomorphic cylinders inside D_A"
                .to_string(),
        );
        assumptions.push(
            "connections between orbits of equal Conley-Zehnder index are excluded by \
             genericity; the enumerated bound does not rely on this"
                .to_string(),
        );
    }

    let mut classes = Vec::new();
    let mut firsts = Vec::new();
    for class in [IntVec2::ALPHA, IntVec2::BETA] {
        let search = find_periodic_points(sys, class)?;
        if search.orbits.is_empty() {
            return Err(Error::CertificateUnavailable(format!(
                "no 1-periodic orbits in class {class}"
            )));
        }
        let Some(first) = search.orbits.iter().find(|o| o.nondegenerate) else {
            return Err(Error::CertificateUnavailable(format!(
                "every orbit in class {class} is degenerate"
            )));
        };
        for o in search.orbits.iter().filter(|o| !o.nondegenerate) {
            assumptions.push(format!(
                "degenerate orbit at ({}, {}) in class {class} is kept in the spectrum",
                o.lift.x, o.lift.y
            ));
        }
        if search.orbits.iter().any(|o| o.entered_dprime) {
            assumptions.push(format!("an orbit in class {class} enters D'"));
        }
        firsts.push(first.trajectory.clone());
        let spectrum = action_spectrum(sys, class)?;
        classes.push(class_entry(&spectrum)?);
    }

    let witness = loops_intersect(&firsts[0], &firsts[1])?.ok_or_else(|| {
        Error::CertificateUnavailable("no geometric intersection between the trajectories".into())
    })?;

    let cert = HoferCertificate {
        a,
        b: sys.params().b,
        mode,
        classes,
        paper_lower_bound: paper,
        enumerated_lower_bound: model_enumerated_bound(sys)?,
        upper_bound: hofer_upper_bound(sys),
        witness: Witness {
            x: witness.x(),
            y: witness.y(),
        },
        assumptions,
    };
    if !cert.is_consistent() {
        return Err(Error::CertificateUnavailable(format!(
            "inconsistent bounds: lower {} / {}, upper {}",
            cert.paper_lower_bound, cert.enumerated_lower_bound, cert.upper_bound
        )));
    }
    Ok(cert)
}
