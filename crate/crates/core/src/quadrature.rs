//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

// QUADPACK qk15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_intervals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    }
}

/// Integrates `f` over `[a, b]`, pre-splitting into `initial_panels` equal
/// pieces (useful for oscillatory integrands) and then bisecting the panel
/// with the largest error estimate until the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    initial_panels: usize,
    opts: &QuadratureOptions,
) -> Result<Integral> {
    let n0 = initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let breaks: Vec<f64> = (0..=n0)
        .map(|i| if i == n0 { b } else { a + width * i as f64 })
        .collect();
    integrate_breakpoints(f, &breaks, opts)
}

/// Like [`integrate`] with explicit, increasing panel boundaries.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> Result<Integral> {
    if breaks.len() < 2 {
        return Err(Error::InvalidInput("quadrature needs at least two breakpoints".into()));
    }
    let mut heap: BinaryHeap<ByError> = breaks.windows(2).map(|w| ByError(gk15(&f, w[0], w[1]))).collect();
    let mut value: f64 = heap.iter().map(|p| p.0.value).sum();
    let mut error: f64 = heap.iter().map(|p| p.0.error).sum();
    loop {
        if !value.is_finite() {
            return Err(Error::InvalidInput("integrand produced a non-finite value".into()));
        }
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            // resum to shed drift from the running totals
            let value = heap.iter().map(|p| p.0.value).sum();
            let error = heap.iter().map(|p| p.0.error).sum();
            return Ok(Integral {
                value,
                error,
                intervals: heap.len(),
            });
        }
        let fail = |n: usize| Error::Integration {
            estimate: value,
            error,
            tolerance: tol,
            intervals: n,
        };
        if heap.len() >= opts.max_intervals {
            return Err(fail(heap.len()));
        }
        let p = heap.pop().expect("non-empty").0;
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval below f64 resolution
            return Err(fail(heap.len() + 1));
        }
        let (l, r) = (gk15(&f, p.a, mid), gk15(&f, mid, p.b));
        value += l.value + r.value - p.value;
        error = (error + l.error + r.error - p.error).max(0.0);
        heap.push(ByError(l));
        heap.push(ByError(r));
    }
}

struct ByError(Panel);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.0.error.total_cmp(&other.0.error).is_eq()
    }
}

impl Eq for ByError {}

impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}
