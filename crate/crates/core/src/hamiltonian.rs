//! The eggbeater system on `T² = R²/Z²` with `ω = dx∧dy`.
//!
//! `F(x,y) = h(y)` generates the horizontal shear `Φ_t(x,y) = (x + t h'(y), y)`
//! and `P(x,y) = h(x)` the vertical shear `Ψ_t(x,y) = (x, y − t h'(x))`.
//! The map is `g = Ψ_B ∘ Φ_A`, realised over unit time by the concatenated
//! Hamiltonian `K_t = 2A·F` on `[0, ½)` and `K_t = 2B·P` on `[½, 1]`.
//!
//! In the perturbed system both fields are cut off radially around the
//! lattice point `q_0 = (0,0)`: they vanish on `D_A = {r < r_A}` and agree
//! with the pure shears outside `D' = {r < 2 r_A}`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::profile::ProfileH;
use crate::torus::{LiftPoint, Loop, Path, Sample};

/// Which of the two autonomous generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    F,
    P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Area form `dx∧dy`, total area 1; cappings are unique up to homotopy.
    #[serde(rename = "surface")]
    UniqueCapping,
    /// Area form `(1+ρ)dx∧dy` with `∫ρ = 1` on `D_A`; total area 2.
    #[serde(rename = "torus")]
    TorusMode,
}

/// Area form on the torus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceModel {
    mode: Mode,
    radius: f64,
}

impl SurfaceModel {
    pub fn new(mode: Mode, r_a: f64) -> Self {
        Self { mode, radius: r_a }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn total_area(&self) -> f64 {
        match self.mode {
            Mode::UniqueCapping => 1.0,
            Mode::TorusMode => 2.0,
        }
    }

    /// `ρ(r) = 4/(π r_A²) · (1 − (r/r_A)²)³` on `D_A` (TorusMode), else 0.
    pub fn density(&self, r: f64) -> f64 {
        match self.mode {
            Mode::UniqueCapping => 0.0,
            Mode::TorusMode => {
                if r >= self.radius {
                    0.0
                } else {
                    let s = 1.0 - (r / self.radius).powi(2);
                    4.0 / (std::f64::consts::PI * self.radius * self.radius) * s * s * s
                }
            }
        }
    }

    /// `∫ρ` over the torus.
    pub fn density_mass(&self) -> f64 {
        match self.mode {
            Mode::UniqueCapping => 0.0,
            Mode::TorusMode => 1.0,
        }
    }

    /// Area of `D_A` in this model.
    pub fn disk_area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius + self.density_mass()
    }

    pub fn density_radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EggbeaterParams {
    pub a: f64,
    pub b: f64,
    pub r_a: f64,
    pub perturbed: bool,
}

impl EggbeaterParams {
    /// `B = 2A`, `r_A = 1/(2000A)`, unperturbed.
    pub fn new(a: f64) -> Self {
        Self {
            a,
            b: 2.0 * a,
            r_a: 1.0 / (2000.0 * a),
            perturbed: false,
        }
    }

    pub fn perturbed(mut self, on: bool) -> Self {
        self.perturbed = on;
        self
    }
}

/// Quintic smoothstep `10u³ − 15u⁴ + 6u⁵` and its derivative, clamped.
fn smoothstep(u: f64) -> (f64, f64) {
    if u <= 0.0 {
        (0.0, 0.0)
    } else if u >= 1.0 {
        (1.0, 0.0)
    } else {
        let v = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
        let d = 30.0 * u * u * (1.0 - u) * (1.0 - u);
        (v, d)
    }
}

/// `(u(1−u))³` on `[0,1]` and its derivative.
fn bump(u: f64) -> (f64, f64) {
    if u <= 0.0 || u >= 1.0 {
        (0.0, 0.0)
    } else {
        let w = u * (1.0 - u);
        (w * w * w, 3.0 * w * w * (1.0 - 2.0 * u))
    }
}

/// Radial cutoff `χ(r)`: 0 on `[0, r_A]`, 1 on `[2r_A, ∞)`, and `dχ/dr`.
pub fn cutoff(r: f64, r_a: f64) -> (f64, f64) {
    let (v, d) = smoothstep((r - r_a) / r_a);
    (v, d / r_a)
}

/// Radial bump `η(r)` supported in `(r_A, 2r_A)`, and `dη/dr`.
pub fn annulus_bump(r: f64, r_a: f64) -> (f64, f64) {
    let (v, d) = bump((r - r_a) / r_a);
    (v, d / r_a)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Correction constant `c` with `c ∫η = ∫_{D'} (1 − χ) h(y)`, so that
/// `χ·h(y) + c·η` has the same integral as `h(y)`. Gauss–Legendre in `r`
/// on `[0, r_A]` and `[r_A, 2r_A]`, trapezoid in the angle.
fn normalization_constant(profile: &ProfileH, r_a: f64) -> f64 {
    let gl = gauss_legendre(12);
    let angles = 64;
    let radial = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        gl.iter()
            .map(|(x, w)| w * half * f(mid + half * x))
            .sum::<f64>()
    };
    let ring = |r: f64| {
        let s: f64 = (0..angles)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / angles as f64;
                profile.h(r * th.sin())
            })
            .sum();
        s * std::f64::consts::TAU / angles as f64 * r
    };
    let deficit =
        radial(0.0, r_a, &ring) + radial(r_a, 2.0 * r_a, &|r| (1.0 - cutoff(r, r_a).0) * ring(r));
    let mass = radial(r_a, 2.0 * r_a, &|r| {
        annulus_bump(r, r_a).0 * std::f64::consts::TAU * r
    });
    deficit / mass
}

#[derive(Clone, Debug)]
pub struct EggbeaterSystem {
    params: EggbeaterParams,
    profile: ProfileH,
    model: SurfaceModel,
    correction: f64,
}

/// Validates parameters and assembles the system.
pub fn build_eggbeater(
    params: EggbeaterParams,
    profile: ProfileH,
    mode: Mode,
) -> Result<EggbeaterSystem> {
    ensure_finite(&[params.a, params.b, params.r_a], "parameters")
        .map_err(|_| Error::InvalidParams("A, B and r_A must be finite".into()))?;
    let min_a = match mode {
        Mode::UniqueCapping => 1.0,
        Mode::TorusMode => 2.0,
    };
    if params.a <= min_a {
        return Err(Error::InvalidParams(format!(
            "A = {} must exceed {min_a} in {mode:?}",
            params.a
        )));
    }
    if params.b <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "B = {} must be positive",
            params.b
        )));
    }
    if !(params.r_a > 0.0 && params.r_a < 1.0 / (1000.0 * params.a)) {
        return Err(Error::InvalidParams(format!(
            "r_A = {} must lie in (0, 1/(1000A))",
            params.r_a
        )));
    }
    let correction = if params.perturbed {
        normalization_constant(&profile, params.r_a)
    } else {
        0.0
    };
    Ok(EggbeaterSystem {
        params,
        model: SurfaceModel::new(mode, params.r_a),
        profile,
        correction,
    })
}

/// Closed-form unit-speed shear: `Φ_t` for `F`, `Ψ_t` for `P`.
pub fn exact_shear_flow(which: Generator, h: &ProfileH, t: f64, l: LiftPoint) -> LiftPoint {
    match which {
        Generator::F => LiftPoint::new(l.x + t * h.h1(l.y), l.y),
        Generator::P => LiftPoint::new(l.x, l.y - t * h.h1(l.x)),
    }
}

/// Unit-time trajectory of the concatenated Hamiltonian.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub path: Path,
    /// `K_t(γ(t))` at the samples of `[0, ½]`.
    pub k_first: Vec<f64>,
    /// `K_t(γ(t))` at the samples of `[½, 1]`.
    pub k_second: Vec<f64>,
    /// Whether any sample or integrator step came within `2r_A` of `q_0`.
    pub entered_dprime: bool,
}

impl Trajectory {
    pub fn samples_per_half(&self) -> usize {
        self.k_first.len() - 1
    }

    pub fn to_loop(&self) -> Result<Loop> {
        Loop::from_path(self.path.clone())
    }
}

/// Result of [`EggbeaterSystem::integrate_perturbed`].
#[derive(Clone, Debug)]
pub struct FlowPath {
    pub times: Vec<f64>,
    pub points: Vec<LiftPoint>,
    pub entered_dprime: bool,
}

const ZONE_FACTOR: f64 = 4.0;
const MAX_ZONE_STEPS: usize = 2_000_000;
const ABS_TOL: f64 = 1e-16;

/// Dormand–Prince 5(4) coefficients.
mod dp {
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

impl EggbeaterSystem {
    pub fn params(&self) -> &EggbeaterParams {
        &self.params
    }

    pub fn profile(&self) -> &ProfileH {
        &self.profile
    }

    pub fn model(&self) -> &SurfaceModel {
        &self.model
    }

    /// Normalization constant `c_F = c_P` (0 when unperturbed).
    pub fn correction(&self) -> f64 {
        self.correction
    }

    fn r_a(&self) -> f64 {
        self.params.r_a
    }

    /// Value of `F` at a lifted point.
    pub fn f_value(&self, l: LiftPoint) -> f64 {
        self.local_value(l - LiftPoint::from(l.nearest_lattice()))
    }

    /// Value of `P` at a lifted point.
    pub fn p_value(&self, l: LiftPoint) -> f64 {
        let (x, y) = l - LiftPoint::from(l.nearest_lattice());
        self.local_value((y, x))
    }

    pub fn value(&self, which: Generator, l: LiftPoint) -> f64 {
        match which {
            Generator::F => self.f_value(l),
            Generator::P => self.p_value(l),
        }
    }

    /// `χ(r)h(y) + c η(r)` in coordinates centred at a lattice point.
    fn local_value(&self, (x, y): (f64, f64)) -> f64 {
        if !self.params.perturbed {
            return self.profile.h(y);
        }
        let r = x.hypot(y);
        if r >= 2.0 * self.r_a() {
            return self.profile.h(y);
        }
        let chi = cutoff(r, self.r_a()).0;
        let eta = annulus_bump(r, self.r_a()).0;
        chi * self.profile.h(y) + self.correction * eta
    }

    /// `(∂_x H, ∂_y H)` for `H = χ(r)h(y) + c η(r)` in local coordinates.
    fn local_gradient(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let r = x.hypot(y);
        if !self.params.perturbed || r >= 2.0 * self.r_a() {
            return (0.0, self.profile.h1(y));
        }
        if r <= self.r_a() {
            return (0.0, 0.0);
        }
        let (chi, dchi) = cutoff(r, self.r_a());
        let deta = annulus_bump(r, self.r_a()).1;
        let radial = dchi * self.profile.h(y) + self.correction * deta;
        (radial * x / r, radial * y / r + chi * self.profile.h1(y))
    }

    /// Gradient of `F` or `P` at a lifted point.
    pub fn gradient(&self, which: Generator, l: LiftPoint) -> (f64, f64) {
        let (x, y) = l - LiftPoint::from(l.nearest_lattice());
        match which {
            Generator::F => self.local_gradient((x, y)),
            Generator::P => {
                let (gy, gx) = self.local_gradient((y, x));
                (gx, gy)
            }
        }
    }

    /// `X_H = (∂_y H, −∂_x H)` for `H = F` or `P`.
    pub fn vector_field(&self, which: Generator, l: LiftPoint) -> (f64, f64) {
        let (hx, hy) = self.gradient(which, l);
        (hy, -hx)
    }

    /// Samples per half interval: the smallest `128·2^k` with every
    /// inter-sample jump of the unperturbed shears below 0.1.
    pub fn samples_per_half(&self) -> usize {
        let reach = 5.0 * self.params.a.max(self.params.b);
        let mut n = 128usize;
        while reach / n as f64 >= 0.1 {
            n *= 2;
        }
        n
    }

    /// `g(l)` without recording the trajectory.
    pub fn endpoint(&self, l: LiftPoint) -> Result<LiftPoint> {
        Ok(self.endpoint_with_flag(l)?.0)
    }

    /// `g(l)` and whether the trajectory came within `2r_A` of `q_0`.
    pub fn endpoint_with_flag(&self, l: LiftPoint) -> Result<(LiftPoint, bool)> {
        ensure_finite(&[l.x, l.y], "point")?;
        if !self.params.perturbed {
            let mid = exact_shear_flow(Generator::F, &self.profile, self.params.a, l);
            let end = exact_shear_flow(Generator::P, &self.profile, self.params.b, mid);
            return Ok((end, false));
        }
        let (mid, e1) = self.flow(Generator::F, self.params.a, l)?;
        let (end, e2) = self.flow(Generator::P, self.params.b, mid)?;
        Ok((end, e1 || e2 || self.in_dprime(l)))
    }

    /// `g(l)` and the full unit-time trajectory.
    pub fn apply(&self, l: LiftPoint) -> Result<(LiftPoint, Trajectory)> {
        self.apply_with_resolution(l, self.samples_per_half())
    }

    /// As [`apply`](Self::apply) with `n` samples per half interval.
    pub fn apply_with_resolution(&self, l: LiftPoint, n: usize) -> Result<(LiftPoint, Trajectory)> {
        ensure_finite(&[l.x, l.y], "point")?;
        if n == 0 {
            return Err(Error::InvalidInput(
                "need at least one sample per half".into(),
            ));
        }
        let (a, b) = (self.params.a, self.params.b);
        let mut samples = Vec::with_capacity(2 * n + 1);
        let mut k_first = Vec::with_capacity(n + 1);
        let mut k_second = Vec::with_capacity(n + 1);
        let mut entered = self.in_dprime(l);
        let time = |i: usize| i as f64 / (2 * n) as f64;

        let mut p = l;
        for i in 0..=n {
            if i > 0 {
                p = if self.params.perturbed {
                    let (q, e) = self.flow(Generator::F, a / n as f64, p)?;
                    entered |= e;
                    q
                } else {
                    exact_shear_flow(Generator::F, &self.profile, a * i as f64 / n as f64, l)
                };
            }
            samples.push(Sample {
                t: time(i),
                lift: p,
            });
            k_first.push(2.0 * a * self.f_value(p));
        }
        let mid = p;
        k_second.push(2.0 * b * self.p_value(mid));
        for i in 1..=n {
            p = if self.params.perturbed {
                let (q, e) = self.flow(Generator::P, b / n as f64, p)?;
                entered |= e;
                q
            } else {
                exact_shear_flow(Generator::P, &self.profile, b * i as f64 / n as f64, mid)
            };
            samples.push(Sample {
                t: time(n + i),
                lift: p,
            });
            k_second.push(2.0 * b * self.p_value(p));
        }
        let path = Path::new(samples)?;
        Ok((
            p,
            Trajectory {
                path,
                k_first,
                k_second,
                entered_dprime: entered,
            },
        ))
    }

    /// `Dg` at `l`: exact for the pure shears, central differences of
    /// [`endpoint`](Self::endpoint) with step `1e-6` otherwise.
    pub fn differential(&self, l: LiftPoint) -> Result<[[f64; 2]; 2]> {
        ensure_finite(&[l.x, l.y], "point")?;
        if !self.params.perturbed {
            let h = &self.profile;
            let (a, b) = (self.params.a, self.params.b);
            let hy = h.h2(l.y);
            let xp = l.x + a * h.h1(l.y);
            let hx = h.h2(xp);
            return Ok([[1.0, a * hy], [-b * hx, 1.0 - a * b * hx * hy]]);
        }
        self.fd_differential(l, 1e-6)
    }

    /// Central finite-difference Jacobian of `g`.
    pub fn fd_differential(&self, l: LiftPoint, step: f64) -> Result<[[f64; 2]; 2]> {
        let px = self.endpoint(LiftPoint::new(l.x + step, l.y))?;
        let mx = self.endpoint(LiftPoint::new(l.x - step, l.y))?;
        let py = self.endpoint(LiftPoint::new(l.x, l.y + step))?;
        let my = self.endpoint(LiftPoint::new(l.x, l.y - step))?;
        let d = 2.0 * step;
        Ok([
            [(px.x - mx.x) / d, (py.x - my.x) / d],
            [(px.y - mx.y) / d, (py.y - my.y) / d],
        ])
    }

    fn in_dprime(&self, l: LiftPoint) -> bool {
        let (x, y) = l - LiftPoint::from(l.nearest_lattice());
        self.params.perturbed && x.hypot(y) < 2.0 * self.r_a()
    }

    /// Flow of `which` (unit speed) over `span`, sampled at `n + 1`
    /// equispaced times. Outside `D'` the closed-form shear is used; inside,
    /// an adaptive Dormand–Prince 5(4) scheme.
    pub fn integrate_perturbed(
        &self,
        which: Generator,
        span: (f64, f64),
        l: LiftPoint,
        n: usize,
    ) -> Result<FlowPath> {
        ensure_finite(&[span.0, span.1, l.x, l.y], "integration input")?;
        if !self.params.perturbed {
            return Err(Error::InvalidParams("system is not perturbed".into()));
        }
        let n = n.max(1);
        let dt = (span.1 - span.0) / n as f64;
        let mut times = vec![span.0];
        let mut points = vec![l];
        let mut entered = self.in_dprime(l);
        let mut p = l;
        for i in 1..=n {
            let (q, e) = self.flow(which, dt, p)?;
            entered |= e;
            p = q;
            times.push(if i == n {
                span.1
            } else {
                span.0 + dt * i as f64
            });
            points.push(p);
        }
        Ok(FlowPath {
            times,
            points,
            entered_dprime: entered,
        })
    }

    /// Unit-speed flow for signed time `tau`. `P` is reduced to `F` by
    /// swapping coordinates and reversing time.
    fn flow(&self, which: Generator, tau: f64, l: LiftPoint) -> Result<(LiftPoint, bool)> {
        match which {
            Generator::F => self.flow_f(tau, l),
            Generator::P => {
                let (q, e) = self.flow_f(-tau, LiftPoint::new(l.y, l.x))?;
                Ok((LiftPoint::new(q.y, q.x), e))
            }
        }
    }

    fn flow_f(&self, tau: f64, l: LiftPoint) -> Result<(LiftPoint, bool)> {
        let sign = tau.signum();
        let mut rem = tau.abs();
        let mut p = l;
        let mut entered = false;
        let zone = ZONE_FACTOR * self.r_a();
        while rem > 0.0 {
            let c = LiftPoint::from(p.nearest_lattice());
            let (dx, dy) = p - c;
            let r = dx.hypot(dy);
            if r <= self.r_a() {
                entered = true;
                break;
            }
            if r < zone {
                let (local, used, e) = self.zone_flow((dx, dy), rem, sign)?;
                entered |= e;
                p = LiftPoint::new(c.x + local.0, c.y + local.1);
                rem -= used;
                continue;
            }
            let v = sign * self.profile.h1(p.y);
            let d = (p.y - p.y.round()).abs();
            if v == 0.0 || d >= zone {
                p.x += v * rem;
                break;
            }
            let w = (zone * zone - d * d).sqrt();
            let hit = if v > 0.0 {
                ((p.x + w).ceil() - w - p.x) / v
            } else {
                (p.x - (p.x - w).floor() - w) / -v
            };
            if hit >= rem {
                p.x += v * rem;
                break;
            }
            let hit = hit.max(0.0);
            p.x += v * hit;
            rem -= hit;
            let c = LiftPoint::from(p.nearest_lattice());
            let (dx, dy) = p - c;
            let (local, used, e) = self.zone_flow((dx, dy), rem, sign)?;
            entered |= e;
            p = LiftPoint::new(c.x + local.0, c.y + local.1);
            rem -= used;
        }
        Ok((p, entered))
    }

    /// Local field of `sign·F`.
    fn local_field(&self, z: (f64, f64), sign: f64) -> (f64, f64) {
        let (hx, hy) = self.local_gradient(z);
        (sign * hy, -sign * hx)
    }

    /// Integrates inside the zone `r < 4 r_A` until the point leaves it
    /// moving outward or the time `rem` is used up. Returns the local
    /// endpoint, the time used and whether `D'` was entered. A closed orbit
    /// inside the zone is detected after one turn and the remaining time is
    /// reduced modulo its period.
    fn zone_flow(&self, z0: (f64, f64), rem: f64, sign: f64) -> Result<((f64, f64), f64, bool)> {
        let zone = ZONE_FACTOR * self.r_a();
        let dprime = 2.0 * self.r_a();
        let mut entered = z0.0.hypot(z0.1) < dprime;
        let mut z = z0;
        let mut t = 0.0;
        let mut k1 = self.local_field(z, sign);
        let speed = |v: (f64, f64)| v.0.hypot(v.1).max(1e-300);
        let mut h = (0.01 * self.r_a() / speed(k1)).min(rem);
        let angle0 = z.1.atan2(z.0);
        let mut turned = 0.0;
        let mut prev_angle = angle0;
        let mut target = rem;
        let mut reduced = false;
        let mut steps = 0usize;

        while t < target {
            steps += 1;
            if steps > MAX_ZONE_STEPS {
                return Err(Error::IntegrationFailure(format!(
                    "step budget of {MAX_ZONE_STEPS} exhausted near the perturbation disk"
                )));
            }
            let cap = self.r_a() / speed(k1);
            h = h.min(cap).min(target - t);
            if h <= f64::EPSILON * t.max(1e-300) || h < 1e-300 {
                return Err(Error::IntegrationFailure("step size underflow".into()));
            }
            let (z_new, k_new, err) = self.dp_step(z, k1, h, sign);
            let scale = ABS_TOL.max(1e-14 * z.0.hypot(z.1));
            let ratio = err / scale;
            if ratio > 1.0 {
                h *= (0.9 * ratio.powf(-0.2)).max(0.2);
                continue;
            }
            let t_new = t + h;
            // angle bookkeeping for closed-orbit detection
            let ang = z_new.1.atan2(z_new.0);
            let mut d = ang - prev_angle;
            if d > std::f64::consts::PI {
                d -= std::f64::consts::TAU;
            } else if d < -std::f64::consts::PI {
                d += std::f64::consts::TAU;
            }
            let before = turned;
            turned += d;
            prev_angle = ang;
            let r_new = z_new.0.hypot(z_new.1);
            entered |= r_new < dprime;

            if !reduced && turned.abs() >= std::f64::consts::TAU {
                let goal = std::f64::consts::TAU * turned.signum();
                let period =
                    self.crossing_time((z, k1, t, before), (z_new, k_new, t_new), goal, angle0);
                let back = {
                    let (zp, _) = self.hermite_point((z, k1, t), (z_new, k_new, t_new), period);
                    (zp.0 - z0.0).hypot(zp.1 - z0.1)
                };
                if back < 1e-6 * self.r_a() {
                    // restart from z0 for the remainder modulo the period
                    target = rem % period;
                    z = z0;
                    t = 0.0;
                    k1 = self.local_field(z, sign);
                    h = (0.01 * self.r_a() / speed(k1)).min(target);
                    reduced = true;
                    prev_angle = angle0;
                    turned = 0.0;
                    continue;
                }
            }

            z = z_new;
            k1 = k_new;
            t = t_new;
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).min(5.0)
            };
            h *= factor;

            let outward = z.0 * k1.0 + z.1 * k1.1 > 0.0;
            if r_new >= zone && outward {
                break;
            }
        }
        let used = if reduced { rem } else { t };
        Ok((z, used, entered))
    }

    /// One Dormand–Prince step; returns the 5th-order point, the field there
    /// and the max-norm error estimate.
    fn dp_step(
        &self,
        z: (f64, f64),
        k1: (f64, f64),
        h: f64,
        sign: f64,
    ) -> ((f64, f64), (f64, f64), f64) {
        let mut k = [(0.0, 0.0); 7];
        k[0] = k1;
        for s in 1..7 {
            let mut dx = 0.0;
            let mut dy = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                dx += dp::A[s][j] * kj.0;
                dy += dp::A[s][j] * kj.1;
            }
            k[s] = self.local_field((z.0 + h * dx, z.1 + h * dy), sign);
        }
        // stage 7 is evaluated at the 5th-order solution (FSAL)
        let mut sx = 0.0;
        let mut sy = 0.0;
        for (j, kj) in k.iter().enumerate().take(6) {
            sx += dp::A[6][j] * kj.0;
            sy += dp::A[6][j] * kj.1;
        }
        let z_new = (z.0 + h * sx, z.1 + h * sy);
        let mut ex = 0.0;
        let mut ey = 0.0;
        for (j, kj) in k.iter().enumerate() {
            ex += dp::E[j] * kj.0;
            ey += dp::E[j] * kj.1;
        }
        (z_new, k[6], (h * ex).abs().max((h * ey).abs()))
    }

    /// Cubic Hermite interpolation inside an accepted step.
    fn hermite_point(
        &self,
        a: ((f64, f64), (f64, f64), f64),
        b: ((f64, f64), (f64, f64), f64),
        t: f64,
    ) -> ((f64, f64), f64) {
        let h = b.2 - a.2;
        let s = ((t - a.2) / h).clamp(0.0, 1.0);
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let x = h00 * a.0 .0 + h10 * h * a.1 .0 + h01 * b.0 .0 + h11 * h * b.1 .0;
        let y = h00 * a.0 .1 + h10 * h * a.1 .1 + h01 * b.0 .1 + h11 * h * b.1 .1;
        ((x, y), s)
    }

    /// Time in `[a.t, b.t]` at which the unwrapped angle reaches `goal`.
    fn crossing_time(
        &self,
        a: ((f64, f64), (f64, f64), f64, f64),
        b: ((f64, f64), (f64, f64), f64),
        goal: f64,
        angle0: f64,
    ) -> f64 {
        let (za, ka, ta, turned_a) = a;
        let unwrapped = |t: f64| {
            let ((x, y), _) = self.hermite_point((za, ka, ta), b, t);
            let mut d = y.atan2(x) - angle0 - turned_a;
            d -= std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
            turned_a + d
        };
        let (mut lo, mut hi) = (ta, b.2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (unwrapped(mid) - goal) * goal.signum() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
