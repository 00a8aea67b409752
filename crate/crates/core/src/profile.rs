//! The 1-periodic shear profile `h : R/Z → [-1, 1]`.
//!
//! `h` is fixed by four explicit pieces,
//!
//! ```text
//!   1 − 50 t²          on [−0.01, 0.01]
//!   1.25 − 5 t         on [1/8, 3/8]
//!  −1 + 50 (t − ½)²    on [0.49, 0.51]
//!  −3.75 + 5 t         on [5/8, 7/8]
//! ```
//!
//! and Hermite blends in the four gaps. Only the blend on `[0.01, 1/8]` is
//! solved for; the others are obtained from `h(−t) = h(t)` and
//! `h(t + ½) = −h(t)`, which makes the mean of `h` vanish identically.
//!
//! With these formulas `h'` runs from `+5` down to `−5` across `[−1/8, 1/8]`
//! and back up across `[3/8, 5/8]`.

use std::io::Write;

use crate::error::{ensure_finite, Error, Result};
use crate::report::fmt_num;

/// Half-width of the quadratic caps around `0` and `½`.
pub const CAP_HALF_WIDTH: f64 = 0.01;
/// Window on which `h'` decreases through zero.
pub const DECREASING_WINDOW: (f64, f64) = (-0.125, 0.125);
/// Window on which `h'` increases through zero.
pub const INCREASING_WINDOW: (f64, f64) = (0.375, 0.625);
/// Bound on `|h'|`.
pub const MAX_SLOPE: f64 = 5.0;

/// Left end of the period on which the pieces are laid out.
const PERIOD_START: f64 = -0.125;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PieceKind {
    QuadraticCap,
    Linear,
    Blend,
}

/// One polynomial piece, evaluated as `sign · P(dir · (t − anchor))` where
/// `P` has power-basis coefficients `poly` (constant term first).
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub kind: PieceKind,
    pub poly: Vec<f64>,
    pub anchor: f64,
    pub dir: f64,
    pub sign: f64,
}

impl Piece {
    fn explicit(start: f64, end: f64, kind: PieceKind, poly: Vec<f64>, anchor: f64) -> Self {
        Self {
            start,
            end,
            kind,
            poly,
            anchor,
            dir: 1.0,
            sign: 1.0,
        }
    }

    fn contains(&self, u: f64) -> bool {
        self.start <= u && u <= self.end
    }

    fn eval(&self, u: f64, order: u8) -> f64 {
        let s = self.dir * (u - self.anchor);
        let chain = match order {
            1 => self.dir,
            _ => 1.0,
        };
        self.sign * chain * poly_derivative_eval(&self.poly, order as usize, s)
    }

    /// Exact integral of the piece over its interval.
    fn integral(&self) -> f64 {
        let anti = |s: f64| {
            self.poly
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, c)| acc * s + c / (j + 1) as f64)
                * s
        };
        let a = anti(self.dir * (self.end - self.anchor));
        let b = anti(self.dir * (self.start - self.anchor));
        self.sign * self.dir * (a - b)
    }
}

/// Horner evaluation of the `order`-th derivative of a power-basis polynomial.
fn poly_derivative_eval(c: &[f64], order: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    for j in (order..c.len()).rev() {
        let falling: f64 = (0..order).map(|i| (j - i) as f64).product();
        acc = acc * s + c[j] * falling;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileConfig {
    /// Degree of the Hermite blend polynomials. Degree `2k+1` (or `2k+2`)
    /// matches derivatives `0..=k` at both ends of each gap.
    pub blend_degree: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { blend_degree: 5 }
    }
}

/// Piecewise-polynomial profile over one period `[−1/8, 7/8)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileH {
    pieces: Vec<Piece>,
}

/// Derivative jet `(h, h', h'', …)` at a point.
type Jet = Vec<f64>;

fn cap_jet(t: f64, len: usize) -> Jet {
    let mut jet = vec![1.0 - 50.0 * t * t, -100.0 * t, -100.0];
    jet.resize(len, 0.0);
    jet
}

fn linear_jet(t: f64, len: usize) -> Jet {
    let mut jet = vec![1.25 - 5.0 * t, -5.0];
    jet.resize(len, 0.0);
    jet
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Hermite interpolant in `s ∈ [0, len]` matching `left` at 0 and `right` at
/// `len` (both jets of length `k+1`); degree `2k+1`.
fn hermite(left: &[f64], right: &[f64], len: f64) -> Vec<f64> {
    let k1 = left.len();
    let n = 2 * k1;
    let mut c = vec![0.0; n];
    for (j, v) in left.iter().enumerate() {
        c[j] = v / factorial(j);
    }
    // Remaining coefficients c[k1..n] from the right-end conditions.
    let mut m = vec![vec![0.0; k1 + 1]; k1];
    for i in 0..k1 {
        let mut rhs = right[i];
        for (j, cj) in c.iter().enumerate().take(k1).skip(i) {
            rhs -= cj * factorial(j) / factorial(j - i) * len.powi((j - i) as i32);
        }
        for j in k1..n {
            m[i][j - k1] = factorial(j) / factorial(j - i) * len.powi((j - i) as i32);
        }
        m[i][k1] = rhs;
    }
    let sol = gauss_solve(m);
    c[k1..].copy_from_slice(&sol);
    c
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot = &top[col];
        for r in rest {
            let f = r[col] / pivot[col];
            for (v, p) in r[col..].iter_mut().zip(&pivot[col..]) {
                *v -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    x
}

/// A blend polynomial anchored at `start`.
#[derive(Clone, Debug)]
struct BlendSegment {
    start: f64,
    end: f64,
    poly: Vec<f64>,
}

/// Checks that a blend on a window where `h'` must decrease from `-1` to
/// `-5` does so and stays inside the value and slope ranges.
fn decreasing_blend_ok(seg: &BlendSegment) -> bool {
    let len = seg.end - seg.start;
    let n = 2000;
    (0..=n).all(|i| {
        let s = len * i as f64 / n as f64;
        let v = poly_derivative_eval(&seg.poly, 0, s);
        let d1 = poly_derivative_eval(&seg.poly, 1, s);
        let d2 = poly_derivative_eval(&seg.poly, 2, s);
        v.abs() <= 1.0 + 1e-12 && (-MAX_SLOPE - 1e-12..=-1.0 + 1e-12).contains(&d1) && d2 <= 1e-9
    })
}

/// Blends the gap `[a, b]` between jets `left` and `right`; if a single
/// polynomial fails the monotonicity check the gap is split once at its
/// midpoint, with the midpoint curvature set to the secant slope of `h'`.
fn blend_gap(a: f64, b: f64, left: &[f64], right: &[f64]) -> Result<Vec<BlendSegment>> {
    let whole = BlendSegment {
        start: a,
        end: b,
        poly: hermite(left, right, b - a),
    };
    if decreasing_blend_ok(&whole) {
        return Ok(vec![whole]);
    }
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let mut mid_jet: Jet = vec![
        poly_derivative_eval(&whole.poly, 0, half),
        poly_derivative_eval(&whole.poly, 1, half),
        (right[1] - left[1]) / (b - a),
    ];
    mid_jet.resize(left.len(), 0.0);
    let first = BlendSegment {
        start: a,
        end: mid,
        poly: hermite(left, &mid_jet, half),
    };
    let second = BlendSegment {
        start: mid,
        end: b,
        poly: hermite(&mid_jet, right, b - mid),
    };
    if decreasing_blend_ok(&first) && decreasing_blend_ok(&second) {
        Ok(vec![first, second])
    } else {
        Err(Error::InvalidProfile {
            constraint: "monotone h' with |h'| in [1, 5] on the blend gap".into(),
        })
    }
}

/// Builds the profile and validates it.
pub fn build_profile(config: &ProfileConfig) -> Result<ProfileH> {
    if config.blend_degree < 5 {
        return Err(Error::InvalidProfile {
            constraint: format!(
                "blend degree {} < 5 cannot match value, slope and curvature at both gap ends",
                config.blend_degree
            ),
        });
    }
    let order = (config.blend_degree - 1) / 2;
    let (a, b) = (CAP_HALF_WIDTH, 0.125);
    let base = blend_gap(a, b, &cap_jet(a, order + 1), &linear_jet(b, order + 1))?;

    let mut pieces = vec![
        Piece::explicit(
            -0.01,
            0.01,
            PieceKind::QuadraticCap,
            vec![1.0, 0.0, -50.0],
            0.0,
        ),
        Piece::explicit(0.125, 0.375, PieceKind::Linear, vec![1.25, -5.0], 0.0),
        Piece::explicit(
            0.49,
            0.51,
            PieceKind::QuadraticCap,
            vec![-1.0, 0.0, 50.0],
            0.5,
        ),
        Piece::explicit(0.625, 0.875, PieceKind::Linear, vec![-3.75, 5.0], 0.0),
    ];
    for seg in &base {
        let (p, q) = (seg.start, seg.end);
        let blend = |start, end, anchor, dir, sign| Piece {
            start,
            end,
            kind: PieceKind::Blend,
            poly: seg.poly.clone(),
            anchor,
            dir,
            sign,
        };
        // h(t) = B(t)
        pieces.push(blend(p, q, p, 1.0, 1.0));
        // h(t) = B(−t)
        pieces.push(blend(-q, -p, -p, -1.0, 1.0));
        // h(t) = −B(½ − t)
        pieces.push(blend(0.5 - q, 0.5 - p, 0.5 - p, -1.0, -1.0));
        // h(t) = −B(t − ½)
        pieces.push(blend(0.5 + p, 0.5 + q, 0.5 + p, 1.0, -1.0));
    }
    pieces.sort_by(|x, y| x.start.total_cmp(&y.start));
    let profile = ProfileH { pieces };

    let report = validate(&profile);
    if let Some(bad) = report.checks.iter().find(|c| !c.passed) {
        return Err(Error::InvalidProfile {
            constraint: bad.name.clone(),
        });
    }
    Ok(profile)
}

impl ProfileH {
    /// Wraps arbitrary pieces without checking them; see [`validate`].
    pub fn from_pieces(mut pieces: Vec<Piece>) -> Self {
        pieces.sort_by(|x, y| x.start.total_cmp(&y.start));
        Self { pieces }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<Piece> {
        self.pieces
    }

    fn piece_at(&self, u: f64) -> &Piece {
        // explicit pieces own their closed intervals
        self.pieces
            .iter()
            .find(|p| p.kind != PieceKind::Blend && p.contains(u))
            .or_else(|| self.pieces.iter().find(|p| p.contains(u)))
            .unwrap_or(&self.pieces[0])
    }

    /// `h`, `h'` or `h''` at `t` (1-periodic). Orders above 2 are rejected.
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        ensure_finite(&[t], "profile argument")?;
        if order > 2 {
            return Err(Error::InvalidInput(format!("derivative order {order} > 2")));
        }
        Ok(self.value(t, order))
    }

    /// Infallible evaluation for finite `t` and `order ≤ 2`.
    pub(crate) fn value(&self, t: f64, order: u8) -> f64 {
        let mut u = t - (t - PERIOD_START).floor();
        if u == PERIOD_START {
            // the linear piece ending at 7/8 owns its closed interval
            u += 1.0;
        }
        self.piece_at(u).eval(u, order)
    }

    pub fn h(&self, t: f64) -> f64 {
        self.value(t, 0)
    }

    pub fn h1(&self, t: f64) -> f64 {
        self.value(t, 1)
    }

    pub fn h2(&self, t: f64) -> f64 {
        self.value(t, 2)
    }

    /// Mean of `h` over one period, by exact integration of the pieces.
    pub fn mean(&self) -> f64 {
        self.pieces.iter().map(Piece::integral).sum()
    }

    /// `max h − min h` over a uniform grid of `n` points.
    pub fn oscillation(&self, n: usize) -> f64 {
        let (lo, hi) = (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let v = self.h(i as f64 / n as f64);
            (lo.min(v), hi.max(v))
        });
        hi - lo
    }

    /// Rows `(t, h, h', h'')` at `t = i / resolution`, `i = 0..=resolution`.
    pub fn table(&self, resolution: usize) -> Vec<[f64; 4]> {
        (0..=resolution)
            .map(|i| {
                let t = i as f64 / resolution as f64;
                [t, self.h(t), self.h1(t), self.h2(t)]
            })
            .collect()
    }

    /// CSV with header `t,h,h1,h2`.
    pub fn write_csv<W: Write>(&self, resolution: usize, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,h,h1,h2")?;
        for row in self.table(resolution) {
            writeln!(
                out,
                "{},{},{},{}",
                fmt_num(row[0]),
                fmt_num(row[1]),
                fmt_num(row[2]),
                fmt_num(row[3])
            )?;
        }
        Ok(())
    }
}

/// Single entry of a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst violation (or the checked quantity, e.g. the mean).
    pub measured: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const GRID: usize = 100_000;
const FORMULA_TOL: f64 = 4.0 * f64::EPSILON;
const SYMMETRY_TOL: f64 = 1e-12;

fn max_over(range: (f64, f64), n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (0..=n)
        .map(|i| f(range.0 + (range.1 - range.0) * i as f64 / n as f64))
        .fold(0.0, f64::max)
}

/// Checks every structural constraint on a `10^5`-point grid, plus exact
/// formula checks on the four explicit intervals.
pub fn validate(h: &ProfileH) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, measured: f64, passed: bool| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            measured,
        })
    };

    type Formula = fn(f64) -> f64;
    let formulas: [(&str, (f64, f64), Formula); 4] = [
        ("formula_cap_0", (-0.01, 0.01), |t| 1.0 - 50.0 * t * t),
        ("formula_linear_1/8_3/8", (0.125, 0.375), |t| 1.25 - 5.0 * t),
        ("formula_cap_1/2", (0.49, 0.51), |t| {
            -1.0 + 50.0 * (t - 0.5) * (t - 0.5)
        }),
        ("formula_linear_5/8_7/8", (0.625, 0.875), |t| {
            -3.75 + 5.0 * t
        }),
    ];
    for (name, range, f) in formulas {
        let worst = max_over(range, 2000, |t| (h.h(t) - f(t)).abs());
        push(name, worst, worst <= FORMULA_TOL);
    }

    let grid = |i: usize| i as f64 / GRID as f64;
    let worst_h = (0..GRID).map(|i| h.h(grid(i)).abs()).fold(0.0, f64::max);
    push("range_h", worst_h, worst_h <= 1.0 + 1e-12);
    let worst_h1 = (0..GRID).map(|i| h.h1(grid(i)).abs()).fold(0.0, f64::max);
    push("range_h1", worst_h1, worst_h1 <= MAX_SLOPE + 1e-12);

    let monotone = |window: (f64, f64), decreasing: bool| {
        let n = GRID / 4;
        let vals: Vec<f64> = (1..n)
            .map(|i| h.h1(window.0 + (window.1 - window.0) * i as f64 / n as f64))
            .collect();
        // count of grid steps going the wrong way
        vals.windows(2)
            .filter(|w| {
                if decreasing {
                    w[1] >= w[0]
                } else {
                    w[1] <= w[0]
                }
            })
            .count() as f64
    };
    let bad = monotone(DECREASING_WINDOW, true);
    push("monotone_h1_decreasing_window", bad, bad == 0.0);
    let bad = monotone(INCREASING_WINDOW, false);
    push("monotone_h1_increasing_window", bad, bad == 0.0);

    let floor_violation = (0..GRID)
        .map(grid)
        .filter(|&t| {
            let c = t - t.round();
            let d = t - 0.5;
            c.abs() >= CAP_HALF_WIDTH && d.abs() >= CAP_HALF_WIDTH
        })
        .map(|t| (1.0 - h.h1(t).abs()).max(0.0))
        .fold(0.0, f64::max);
    push("slope_floor", floor_violation, floor_violation <= 1e-12);

    let anti = (0..GRID)
        .map(|i| (h.h(grid(i) + 0.5) + h.h(grid(i))).abs())
        .fold(0.0, f64::max);
    push("antisymmetry", anti, anti <= SYMMETRY_TOL);
    let even = (0..GRID)
        .map(|i| (h.h(-grid(i)) - h.h(grid(i))).abs())
        .fold(0.0, f64::max);
    push("evenness", even, even <= SYMMETRY_TOL);

    let mean = h.mean();
    push("mean_zero", mean.abs(), mean.abs() <= SYMMETRY_TOL);

    let mut jump: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let pieces = &h.pieces;
    for (i, p) in pieces.iter().enumerate() {
        let next = &pieces[(i + 1) % pieces.len()];
        let next_start = if i + 1 == pieces.len() {
            next.start + 1.0
        } else {
            next.start
        };
        gap = gap.max((p.end - next_start).abs());
        for order in 0..=2u8 {
            let left = p.eval(p.end, order);
            let right = next.eval(next.start, order);
            jump = jump.max((left - right).abs());
        }
    }
    let first = pieces.first().map_or(f64::NAN, |p| p.start);
    let last = pieces.last().map_or(f64::NAN, |p| p.end);
    gap = gap
        .max((first - PERIOD_START).abs())
        .max((last - PERIOD_START - 1.0).abs());
    push("coverage", gap, gap <= 1e-15);
    push("c2_junctions", jump, jump <= 1e-8);

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_profile() -> ProfileH {
        build_profile(&ProfileConfig::default()).unwrap()
    }

    /// Composite Simpson on `[0,1]` with `n` (even) panels.
    fn simpson_mean(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let hstep = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * hstep);
        }
        s * hstep / 3.0
    }

    #[test]
    fn default_profile_values() {
        let h = default_profile();
        assert_eq!(h.eval(0.0, 0).unwrap(), 1.0);
        assert_eq!(h.eval(0.5, 0).unwrap(), -1.0);
        assert_eq!(h.eval(0.25, 0).unwrap(), 0.0);
        assert_eq!(h.eval(0.75, 0).unwrap(), 0.0);
        assert_eq!(h.eval(0.005, 2).unwrap(), -100.0);
    }

    #[test]
    fn formulas_hold_exactly() {
        let h = default_profile();
        for i in 0..=1000 {
            let w = i as f64 / 1000.0;
            let t = -0.01 + 0.02 * w;
            assert_eq!(h.h(t), 1.0 - 50.0 * t * t);
            let t = 0.125 + 0.25 * w;
            assert_eq!(h.h(t), 1.25 - 5.0 * t);
            let t = 0.49 + 0.02 * w;
            assert_eq!(h.h(t), -1.0 + 50.0 * (t - 0.5) * (t - 0.5));
            let t = 0.625 + 0.25 * w;
            assert_eq!(h.h(t), -3.75 + 5.0 * t);
        }
    }

    #[test]
    fn mean_is_zero_by_quadrature() {
        let h = default_profile();
        let mean = simpson_mean(|t| h.h(t), 200_000);
        assert!(mean.abs() < 1e-12, "Simpson mean {mean}");
        assert!(h.mean().abs() < 1e-12);
    }

    #[test]
    fn low_blend_degree_rejected() {
        let err = build_profile(&ProfileConfig { blend_degree: 2 }).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile { .. }));
    }

    #[test]
    fn default_profile_validates() {
        let report = validate(&default_profile());
        for c in &report.checks {
            assert!(c.passed, "{} failed with {}", c.name, c.measured);
        }
    }

    #[test]
    fn steep_linear_piece_flagged() {
        let mut pieces = default_profile().into_pieces();
        let lin = pieces
            .iter_mut()
            .find(|p| p.kind == PieceKind::Linear && p.start == 0.125)
            .unwrap();
        lin.poly = vec![1.375, -6.0];
        let report = validate(&ProfileH::from_pieces(pieces));
        let range = report.get("range_h1").unwrap();
        assert!(!range.passed);
        assert!((range.measured - 6.0).abs() < 1e-12);
        assert!(!report.all_passed());
    }

    #[test]
    fn asymmetric_blend_breaks_mean() {
        let mut pieces = default_profile().into_pieces();
        let blend = pieces
            .iter_mut()
            .find(|p| p.kind == PieceKind::Blend && p.start > 0.5)
            .unwrap();
        let len = blend.end - blend.start;
        // add δ·s³(len − s)³, which keeps the C² junctions
        let delta = 1e-3;
        let bump = [
            0.0,
            0.0,
            0.0,
            len.powi(3),
            -3.0 * len * len,
            3.0 * len,
            -1.0,
        ];
        blend.poly.resize(7, 0.0);
        for (c, b) in blend.poly.iter_mut().zip(bump) {
            *c += blend.sign * delta * b;
        }
        let h = ProfileH::from_pieces(pieces);
        let report = validate(&h);
        let mean = report.get("mean_zero").unwrap();
        assert!(!mean.passed);
        let oracle = simpson_mean(|t| h.h(t), 400_000);
        assert!((mean.measured - oracle.abs()).abs() < 1e-12);
        // the bump integrates to δ·len⁷/140
        assert!((oracle - delta * len.powi(7) / 140.0).abs() < 1e-13);
        assert!(report.get("c2_junctions").unwrap().passed);
    }

    #[test]
    fn subdivision_rescues_overshooting_blend() {
        let left = [0.5, -1.0, -100.0];
        let right = [0.04, -5.0, 0.0];
        let single = BlendSegment {
            start: 0.0,
            end: 0.115,
            poly: hermite(&left, &right, 0.115),
        };
        assert!(!decreasing_blend_ok(&single));
        let segs = blend_gap(0.0, 0.115, &left, &right).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(decreasing_blend_ok));
        assert_eq!(segs[0].end, segs[1].start);

        let hopeless = blend_gap(0.0, 0.115, &left, &[0.4, -5.0, 0.0]);
        assert!(matches!(hopeless, Err(Error::InvalidProfile { .. })));
    }

    #[test]
    fn orders_above_two_rejected() {
        assert!(default_profile().eval(0.1, 3).is_err());
        assert!(default_profile().eval(f64::NAN, 0).is_err());
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let mut buf = Vec::new();
        default_profile().write_csv(8, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,h,h1,h2");
        assert_eq!(lines.len(), 10);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use std::sync::OnceLock;

        fn shared() -> &'static ProfileH {
            static H: OnceLock<ProfileH> = OnceLock::new();
            H.get_or_init(default_profile)
        }

        fn sign_changes(f: impl Fn(f64) -> f64, n: usize) -> usize {
            (0..n)
                .filter(|&i| {
                    let a = f(i as f64 / n as f64);
                    let b = f((i + 1) as f64 / n as f64);
                    (a > 0.0) != (b > 0.0)
                })
                .count()
        }

        proptest! {
            #[test]
            fn antisymmetric_and_even(t in -3.0..3.0f64) {
                let h = shared();
                prop_assert!((h.h(t + 0.5) + h.h(t)).abs() < 1e-12);
                prop_assert!((h.h(-t) - h.h(t)).abs() < 1e-12);
                prop_assert!((h.h(t + 1.0) - h.h(t)).abs() < 1e-12);
            }

            #[test]
            fn derivatives_match_differences(t in 0.0..1.0f64) {
                let h = shared();
                let e = 1e-6;
                let d1 = (h.h(t + e) - h.h(t - e)) / (2.0 * e);
                let d2 = (h.h1(t + e) - h.h1(t - e)) / (2.0 * e);
                prop_assert!((d1 - h.h1(t)).abs() < 1e-6);
                prop_assert!((d2 - h.h2(t)).abs() < 1e-3);
            }

            #[test]
            fn slope_level_sets_have_two_points(c in -4.9..4.9f64) {
                let h = shared();
                prop_assume!(c.abs() > 1e-3);
                let n = 20_000;
                let shifted = |t: f64| h.h1(t - 0.125) - c;
                prop_assert_eq!(sign_changes(shifted, n), 2);
            }
        }

        #[test]
        fn two_zeros_per_period() {
            let h = shared();
            assert_eq!(sign_changes(|t| h.h(t + 0.1), 100_000), 2);
        }
    }
}
