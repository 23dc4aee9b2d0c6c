//! Log-space helpers and adaptive Gauss–Kronrod quadrature.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln ∫_a^b e^{s·u} du` for `a ≤ b`, stable for any sign of `s`.
pub fn ln_integral_exp_linear(s: f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let x = s.abs() * w;
    // ∫ = e^{s·top} · (1 − e^{−|s|w}) / |s|, with top the endpoint maximising s·u
    let top = if s >= 0.0 { b } else { a };
    let ln_scaled_width = if x < 1e-300 {
        w.ln()
    } else {
        (-(-x).exp_m1()).ln() - s.abs().ln()
    };
    s * top + ln_scaled_width
}

/// Deterministic generator for a single path or draw.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under a master seed; results do not depend on
/// the order in which instances are evaluated.
pub fn instance_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Seed of item `index` under `master`, usable on its own with [`seeded_rng`].
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

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

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive G7/K15 quadrature: the interval with the largest error
/// estimate is bisected until the total estimate meets `rel_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> QuadResult {
    const MAX_INTERVALS: usize = 2000;
    if b <= a {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= rel_tol * total.abs() || err <= f64::MIN_POSITIVE {
            return QuadResult {
                value: total,
                error: err,
                converged: true,
            };
        }
        if parts.len() >= MAX_INTERVALS {
            return QuadResult {
                value: total,
                error: err,
                converged: false,
            };
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine resolution
            return QuadResult {
                value: total,
                error: err,
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}
