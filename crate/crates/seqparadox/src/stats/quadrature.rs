//! Adaptive 1-D quadrature on finite intervals.
//!
//! A Gauss–Kronrod 7/15 rule drives globally adaptive bisection: the segment
//! with the largest local error estimate is split until the summed estimate
//! falls below the requested tolerance. The error estimate per segment is the
//! conservative |K15 − G7| difference. This routine is the crate's oracle for
//! every closed-form integral, so it favors robustness over node economy.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Positive abscissae of the 15-point Kronrod rule on [-1, 1]
/// (the center node 0 is handled separately). Odd indices are the
/// embedded 7-point Gauss nodes.
const XGK: [f64; 7] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 7] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
];

/// Kronrod weight of the center node.
const WGK_CENTER: f64 = 0.209482141084727828012999174891714;

/// Gauss-7 weights for the nodes at XGK indices 1, 3, 5.
const WG: [f64; 3] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
];

/// Gauss-7 weight of the center node.
const WG_CENTER: f64 = 0.417959183673469387755102040816327;

/// Evaluation budget: integrands here are cheap smooth products, so a run
/// that needs more than this many evaluations has effectively stalled.
const MAX_EVALUATIONS: u64 = 1_000_000;

/// Outcome of [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    /// The integral estimate.
    pub value: f64,
    /// Summed per-segment |K15 − G7| estimates; ≤ the requested tolerance
    /// on success.
    pub abs_error_estimate: f64,
    /// Number of integrand evaluations consumed.
    pub evaluations: u64,
}

/// One adaptive segment with its Kronrod value and error estimate.
#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        // Errors are finite non-negative by construction; ties broken by
        // left endpoint for a deterministic heap order.
        self.err
            .partial_cmp(&other.err)
            .unwrap_or(Ordering::Equal)
            .then_with(|| {
                other
                    .lo
                    .partial_cmp(&self.lo)
                    .unwrap_or(Ordering::Equal)
            })
    }
}

/// Applies the GK15 rule to `f` on [lo, hi]; returns the segment record.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let half = 0.5 * (hi - lo);
    let center = 0.5 * (lo + hi);

    let eval = |f: &mut F, x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::domain(
                "integrate",
                format!("integrand returned {y} at x = {x}"),
            ))
        }
    };

    let fc = eval(f, center)?;
    let mut kronrod = WGK_CENTER * fc;
    let mut gauss = WG_CENTER * fc;
    let mut resabs = WGK_CENTER * fc.abs();
    for (i, &xi) in XGK.iter().enumerate() {
        let dx = half * xi;
        let f_lo = eval(f, center - dx)?;
        let f_hi = eval(f, center + dx)?;
        kronrod += WGK[i] * (f_lo + f_hi);
        resabs += WGK[i] * (f_lo.abs() + f_hi.abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * (f_lo + f_hi);
        }
    }
    let value = kronrod * half;
    // |K15 - G7| is a conservative estimate for smooth integrands, but it
    // can round to exactly zero on locally constant data; floor it at the
    // rounding level of ∫|f| so the routine never claims accuracy below
    // what f64 arithmetic can deliver.
    let rounding_floor = 50.0 * f64::EPSILON * resabs * half;
    Ok(Segment {
        lo,
        hi,
        value,
        err: (value - gauss * half).abs().max(rounding_floor),
    })
}

/// Applies a single (non-adaptive) GK15 panel to `f` on [lo, hi] and returns
/// `(value, error_estimate)`. For callers that manage their own panel
/// subdivision, such as the posterior CDF grid.
pub(crate) fn gk15_panel<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let seg = gk15(&mut f, lo, hi)?;
    Ok((seg.value, seg.err))
}

/// Integrates `f` over the finite interval [lo, hi] to absolute tolerance
/// `tol` by adaptive Gauss–Kronrod bisection.
///
/// Returns an accuracy error (carrying the best estimate so far) if the
/// evaluation budget is exhausted or no segment can be split further while
/// the tolerance is still unmet; a domain error if the integrand produces a
/// non-finite value.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<QuadratureResult> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(
            "integrate",
            format!("bounds [{lo}, {hi}] must be finite"),
        ));
    }
    if !(lo < hi) {
        return Err(Error::domain(
            "integrate",
            format!("lower bound {lo} must be below upper bound {hi}"),
        ));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::domain(
            "integrate",
            format!("tolerance {tol} must be positive and finite"),
        ));
    }

    let mut evaluations: u64 = 15;
    let mut heap = BinaryHeap::new();
    heap.push(gk15(&mut f, lo, hi)?);
    let mut total_err: f64 = heap.peek().map(|s| s.err).unwrap_or(0.0);

    while total_err > tol {
        let finish = |heap: &BinaryHeap<Segment>, total_err: f64, evaluations: u64| {
            // Deterministic final summation: segments ordered by position.
            let mut segs: Vec<&Segment> = heap.iter().collect();
            segs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
            let value = segs.iter().fold(0.0, |acc, s| acc + s.value);
            (value, total_err, evaluations)
        };

        if evaluations + 30 > MAX_EVALUATIONS {
            let (best, err, evals) = finish(&heap, total_err, evaluations);
            return Err(Error::Accuracy {
                op: "integrate",
                best,
                error_estimate: err,
                tolerance: tol,
                evaluations: evals,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(worst.lo < mid && mid < worst.hi) {
            // Interval too narrow to bisect in f64; no further progress.
            heap.push(worst);
            let (best, err, evals) = finish(&heap, total_err, evaluations);
            return Err(Error::Accuracy {
                op: "integrate",
                best,
                error_estimate: err,
                tolerance: tol,
                evaluations: evals,
            });
        }
        total_err -= worst.err;
        let left = gk15(&mut f, worst.lo, mid)?;
        let right = gk15(&mut f, mid, worst.hi)?;
        evaluations += 30;
        total_err += left.err + right.err;
        heap.push(left);
        heap.push(right);
    }

    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
    let value = segs.iter().fold(0.0, |acc, s| acc + s.value);
    Ok(QuadratureResult {
        value,
        abs_error_estimate: total_err.max(0.0),
        evaluations,
    })
}
