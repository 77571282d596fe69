//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued
//! integrands. The whole vector shares one subdivision; the error of a
//! panel is the largest Kronrod/Gauss disagreement over its components.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> Panel
where
    F: Fn(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    f(center, scratch);
    for i in 0..dim {
        kron[i] += WGK[7] * scratch[i];
        gauss[i] += WG[3] * scratch[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        for x in [center - dx, center + dx] {
            f(x, scratch);
            for i in 0..dim {
                kron[i] += WGK[j] * scratch[i];
                if j % 2 == 1 {
                    gauss[i] += WG[j / 2] * scratch[i];
                }
            }
        }
    }
    let mut error: f64 = 0.0;
    for i in 0..dim {
        kron[i] *= half;
        gauss[i] *= half;
        error = error.max((kron[i] - gauss[i]).abs());
    }
    Panel {
        a,
        b,
        value: kron,
        error,
    }
}

/// Integrate `f` (which fills a `dim`-vector at `x`) over `[a, b]` to an
/// absolute tolerance `tol` on the worst component.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, dim: usize, initial_panels: usize, tol: f64) -> Vec<f64>
where
    F: Fn(f64, &mut [f64]),
{
    let mut scratch = vec![0.0; dim];
    let n0 = initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut panels: Vec<Panel> = (0..n0)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == n0 { b } else { lo + width };
            gk15(&f, lo, hi, dim, &mut scratch)
        })
        .collect();

    for _ in 0..20_000 {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= tol {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // cannot split further; keep the panel with its error
            panels.push(Panel { error: 0.0, ..p });
            continue;
        }
        panels.push(gk15(&f, p.a, mid, dim, &mut scratch));
        panels.push(gk15(&f, mid, p.b, dim, &mut scratch));
    }

    let mut out = vec![0.0; dim];
    // Sum in position order so the result does not depend on refinement order.
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    for p in &panels {
        for (o, v) in out.iter_mut().zip(&p.value) {
            *o += v;
        }
    }
    out
}

/// Scalar convenience wrapper.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), a, b, 1, 8, tol)[0]
}
