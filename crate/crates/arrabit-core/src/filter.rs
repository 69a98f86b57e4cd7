//! Polynomial accelerators applied to shifted operators.
//!
//! Two families are supported on a reference interval `[-1, 1]` and then
//! mapped affinely onto a working interval `[a, b]`:
//!
//! * an interpolated low-pass filter: the degree-`d` Chebyshev interpolant of
//!   `f_d(t) = max(0, t)^(10 d)`, which stays small over most of `[-1, 1]`
//!   and rises steeply to `f_d(1) = 1`;
//! * the classic Chebyshev polynomial `T_d`, which is bounded by one inside
//!   the interval and grows fastest outside it.
//!
//! Both are stored as monomial coefficients (leading power first), so block
//! application is a Horner recurrence that costs exactly `d` shifted block
//! multiplies and no memory proportional to `d`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::block::DenseBlock;
use crate::scalar;
use crate::sparse::SymOperator;

/// Power of the base ramp `max(0, t)` that one filter degree step represents.
pub const RAMP_EXPONENT: u32 = 10;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 30;

/// Interpolation residual allowed at the construction nodes.
const NODE_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum FilterError {
    DegreeOutOfRange { degree: usize },
    /// `chebyshev_points(0)` has no interior structure to interpolate on.
    EmptyGrid,
    InvalidInterval { a: f64, b: f64 },
    /// The monomial form failed to reproduce the samples at the nodes.
    InterpolationCheckFailed { degree: usize, err: f64 },
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::DegreeOutOfRange { degree } => {
                write!(f, "degree {degree} outside 1..={MAX_DEGREE}")
            }
            FilterError::EmptyGrid => write!(f, "at least two interpolation points are required"),
            FilterError::InvalidInterval { a, b } => {
                write!(f, "invalid filter interval [{a}, {b}]")
            }
            FilterError::InterpolationCheckFailed { degree, err } => {
                write!(f, "degree-{degree} interpolant misses its nodes by {err}")
            }
        }
    }
}

impl core::error::Error for FilterError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FilterKind {
    /// Chebyshev interpolant of the ramp power `f_d`.
    Interpolant,
    /// Classic Chebyshev polynomial `T_d`.
    ClassicChebyshev,
}

/// A polynomial on a working interval `[a, b]`: monomial coefficients of the
/// reference polynomial, leading power first, plus the affine interval map.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFilter {
    kind: FilterKind,
    degree: usize,
    /// `coeffs[0] t^d + ... + coeffs[d]` on the reference interval.
    coeffs: Vec<f64>,
    a: f64,
    b: f64,
}

/// Chebyshev points of the second kind, `t_j = -cos(j pi / n)` for
/// `j = 0..=n`, ascending. Endpoints are exactly `-1` and `1` and the grid is
/// exactly symmetric about zero.
pub fn chebyshev_points(n: usize) -> Result<Vec<f64>, FilterError> {
    if n == 0 {
        return Err(FilterError::EmptyGrid);
    }
    let mut t = vec![0.0f64; n + 1];
    for j in 0..=n / 2 {
        let c = scalar::cos(j as f64 * core::f64::consts::PI / n as f64);
        t[j] = -c;
        t[n - j] = c;
    }
    if n.is_multiple_of(2) {
        t[n / 2] = 0.0;
    }
    Ok(t)
}

/// Monomial coefficients (ascending power) of `T_k` for `k = 0..=d`.
fn chebyshev_monomials(d: usize) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    t.push(vec![1.0]);
    if d >= 1 {
        t.push(vec![0.0, 1.0]);
    }
    for k in 2..=d {
        let mut next = vec![0.0; k + 1];
        for (i, &c) in t[k - 1].iter().enumerate() {
            next[i + 1] += 2.0 * c;
        }
        for (i, &c) in t[k - 2].iter().enumerate() {
            next[i] -= c;
        }
        t.push(next);
    }
    t
}

/// Horner evaluation of the reference polynomial at `s` in `[-1, 1]` terms.
fn eval_reference(coeffs: &[f64], s: f64) -> f64 {
    let mut acc = coeffs[0];
    for &c in &coeffs[1..] {
        acc = acc * s + c;
    }
    acc
}

impl PolyFilter {
    /// Degree-`d` Chebyshev interpolant of `f_d(t) = max(0, t)^(10 d)` on
    /// the reference interval.
    ///
    /// Samples `f_d` at the `d + 1` Chebyshev points, recovers the
    /// Chebyshev-basis coefficients by the discrete cosine orthogonality
    /// relation (an `O(d^2)` double sum), converts them to monomial form and
    /// verifies the interpolant still hits the samples.
    pub fn build_interpolant(d: usize) -> Result<Self, FilterError> {
        if d == 0 || d > MAX_DEGREE {
            return Err(FilterError::DegreeOutOfRange { degree: d });
        }
        let nodes = chebyshev_points(d)?;
        let samples: Vec<f64> = nodes
            .iter()
            .map(|&t| scalar::powi(t.max(0.0), RAMP_EXPONENT * d as u32))
            .collect();

        // a_k = (2 - [k == 0] - [k == d]) / (2 d) * sum''_j f(x_j) T_k(x_j)
        // over the descending grid x_j = cos(j pi / d) = nodes[d - j]; the
        // double prime halves the first and last terms.
        let mut cheb = vec![0.0f64; d + 1];
        for (k, ck) in cheb.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..=d {
                let tkx = scalar::cos((k * j) as f64 * core::f64::consts::PI / d as f64);
                let weight = if j == 0 || j == d { 0.5 } else { 1.0 };
                acc += weight * samples[d - j] * tkx;
            }
            let gamma = if k == 0 || k == d { d as f64 } else { d as f64 / 2.0 };
            *ck = acc / gamma;
        }

        let t_mono = chebyshev_monomials(d);
        let mut ascending = vec![0.0f64; d + 1];
        for (k, a) in cheb.iter().enumerate() {
            for (i, &c) in t_mono[k].iter().enumerate() {
                ascending[i] += a * c;
            }
        }
        ascending.reverse();
        let filter =
            Self { kind: FilterKind::Interpolant, degree: d, coeffs: ascending, a: -1.0, b: 1.0 };

        let mut err = 0.0f64;
        for (t, f) in nodes.iter().zip(samples.iter()) {
            err = err.max(scalar::abs(eval_reference(&filter.coeffs, *t) - f));
        }
        if err > NODE_CHECK_TOL {
            return Err(FilterError::InterpolationCheckFailed { degree: d, err });
        }
        Ok(filter)
    }

    /// The classic Chebyshev polynomial `T_d` in monomial form.
    pub fn build_classic_chebyshev(d: usize) -> Result<Self, FilterError> {
        if d == 0 || d > MAX_DEGREE {
            return Err(FilterError::DegreeOutOfRange { degree: d });
        }
        let mut coeffs = chebyshev_monomials(d).pop().expect("degree requested");
        coeffs.reverse();
        Ok(Self { kind: FilterKind::ClassicChebyshev, degree: d, coeffs, a: -1.0, b: 1.0 })
    }

    /// Same polynomial, re-anchored to the working interval `[a, b]`.
    pub fn with_interval(&self, a: f64, b: f64) -> Result<Self, FilterError> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(FilterError::InvalidInterval { a, b });
        }
        let mut f = self.clone();
        f.a = a;
        f.b = b;
        Ok(f)
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Reference coefficients, leading power first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Constant term of the affine map `s = c1 t + c0` onto `[-1, 1]`.
    pub fn c0(&self) -> f64 {
        (self.a + self.b) / (self.a - self.b)
    }

    /// Slope of the affine map `s = c1 t + c0` onto `[-1, 1]`.
    pub fn c1(&self) -> f64 {
        2.0 / (self.b - self.a)
    }

    /// The filter value at `t` on the working interval.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        eval_reference(&self.coeffs, self.c1() * t + self.c0())
    }
}

/// `rho(M - shift I) X` where `rho` is `filter` on its working interval and
/// `M` is the operator. Runs the Horner recurrence
/// `Y <- c0 Y + c1 (M - shift I) Y + coeff X`, using exactly `degree` shifted
/// block multiplies and one extra block of workspace.
pub fn apply_filter<O: SymOperator>(
    op: &O,
    shift: f64,
    x: &DenseBlock,
    filter: &PolyFilter,
) -> DenseBlock {
    let c0 = filter.c0();
    let c1 = filter.c1();
    let mut y = x.clone();
    y.scale(filter.coeffs[0]);
    for &coeff in &filter.coeffs[1..] {
        let w = op.apply_shifted_block(shift, &y);
        y.scale(c0);
        y.add_scaled(c1, &w);
        y.add_scaled(coeff, x);
    }
    y
}
