//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) for closed-form
//! integrands and complete elliptic integrals by the arithmetic–geometric mean.

/// Result of a quadrature together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
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

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Globally adaptive Gauss–Kronrod quadrature on `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the summed
/// error is below `max(abs_tol, rel_tol * |I|)` or `max_intervals` is reached.
/// The subdivision order is fixed, so results are bit-reproducible.
pub fn adaptive_gk<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Estimate {
    let first = gk15(&mut f, a, b);
    let mut parts: Vec<(f64, f64, Estimate)> = vec![(a, b, first)];
    loop {
        let value: f64 = parts.iter().map(|p| p.2.value).sum();
        let error: f64 = parts.iter().map(|p| p.2.error).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || parts.len() >= max_intervals {
            return Estimate { value, error };
        }
        let (worst, _) =
            parts.iter().enumerate().fold(
                (0, -1.0),
                |(bi, be), (i, p)| {
                    if p.2.error > be {
                        (i, p.2.error)
                    } else {
                        (bi, be)
                    }
                },
            );
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval no longer splittable in floating point
            let value: f64 = parts.iter().map(|p| p.2.value).sum::<f64>() + gk15(&mut f, lo, hi).value;
            return Estimate { value, error };
        }
        let left = gk15(&mut f, lo, mid);
        let right = gk15(&mut f, mid, hi);
        parts.push((lo, mid, left));
        parts.push((mid, hi, right));
    }
}

/// Default high-accuracy integration used for analytic profiles.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64) -> Estimate {
    adaptive_gk(f, a, b, 1e-14, 1e-13, 4000)
}

/// Arithmetic–geometric mean.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    a
}

/// Complete elliptic integrals `(K(m), E(m))` in the parameter convention
/// `E(m) = ∫_0^{π/2} sqrt(1 - m sin²θ) dθ`, valid for any `m < 1`.
pub fn complete_elliptic(m: f64) -> (f64, f64) {
    assert!(m < 1.0, "complete elliptic integrals need m < 1");
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    // Σ 2^(j-1) c_j², with c_0² = m and c_{j+1} = c_j² / (4 a_{j+1})
    let mut c2 = m;
    let mut sum = 0.5 * m;
    let mut pow = 1.0;
    for _ in 0..64 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        c2 = c2 * c2 / (16.0 * a * a);
        sum += pow * c2;
        if c2 <= 1e-34 * a * a {
            break;
        }
        pow *= 2.0;
    }
    let k = std::f64::consts::FRAC_PI_2 / a;
    (k, k * (1.0 - sum))
}
