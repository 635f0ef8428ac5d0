//! Textbook double-summation Haralick features, written without shared helpers
//! so it can check the production implementation.

fn xlnx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

pub fn features(g: usize, p: &[f64]) -> [f64; 13] {
    let at = |i: usize, j: usize| p[i * g + j];

    let px: Vec<f64> = (0..g).map(|i| (0..g).map(|j| at(i, j)).sum()).collect();
    let py: Vec<f64> = (0..g).map(|j| (0..g).map(|i| at(i, j)).sum()).collect();
    let mu: f64 = (0..g).map(|i| i as f64 * px[i]).sum();

    let mut f0 = 0.0;
    let mut f3 = 0.0;
    let mut f4 = 0.0;
    let mut f8 = 0.0;
    let mut ij = 0.0;
    for i in 0..g {
        for j in 0..g {
            let v = at(i, j);
            f0 += v * v;
            f3 += (i as f64 - mu) * (i as f64 - mu) * v;
            let d = i as f64 - j as f64;
            f4 += v / (1.0 + d * d);
            f8 -= xlnx(v);
            ij += (i * j) as f64 * v;
        }
    }
    let f2 = if f3 > 0.0 {
        ((ij - mu * mu) / f3).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    // p_{x+y}(k) for k = 0 ..= 2G-2 and p_{x-y}(k) for k = 0 .. G.
    let psum: Vec<f64> = (0..2 * g - 1)
        .map(|k| (0..g).filter(|&i| k >= i && k - i < g).map(|i| at(i, k - i)).sum())
        .collect();
    let pdiff: Vec<f64> = (0..g)
        .map(|k| {
            (0..g)
                .map(|i| {
                    let mut s = 0.0;
                    if i + k < g {
                        s += at(i, i + k);
                    }
                    if k > 0 && i >= k {
                        s += at(i, i - k);
                    }
                    s
                })
                .sum()
        })
        .collect();

    let f1: f64 = (0..g).map(|k| (k * k) as f64 * pdiff[k]).sum();
    let f5: f64 = (0..psum.len()).map(|k| k as f64 * psum[k]).sum();
    let f6: f64 = (0..psum.len()).map(|k| (k as f64 - f5).powi(2) * psum[k]).sum();
    let f7: f64 = -psum.iter().map(|&v| xlnx(v)).sum::<f64>();
    let md: f64 = (0..g).map(|k| k as f64 * pdiff[k]).sum();
    let f9: f64 = (0..g).map(|k| (k as f64 - md).powi(2) * pdiff[k]).sum();
    let f10: f64 = -pdiff.iter().map(|&v| xlnx(v)).sum::<f64>();

    let hx: f64 = -px.iter().map(|&v| xlnx(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| xlnx(v)).sum::<f64>();
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    for i in 0..g {
        for j in 0..g {
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= at(i, j) * q.ln();
                hxy2 -= q * q.ln();
            }
        }
    }
    let hmax = hx.max(hy);
    let f11 = if hmax == 0.0 { 0.0 } else { (f8 - hxy1) / hmax };
    let f12 = (1.0 - (-2.0 * (hxy2 - f8).max(0.0)).exp()).sqrt();

    [f0, f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12]
}
