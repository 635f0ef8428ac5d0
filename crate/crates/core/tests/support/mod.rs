#![allow(dead_code)]

pub mod haralick_oracle;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random symmetric GLCM with roughly `density` of the upper triangle filled.
pub fn random_glcm(rng: &mut ChaCha8Rng, g: usize, density: f64) -> Vec<f64> {
    let mut p = vec![0.0; g * g];
    for i in 0..g {
        for j in i..g {
            if rng.gen::<f64>() < density {
                let v: f64 = rng.gen_range(0.0..1.0);
                p[i * g + j] += v;
                if i != j {
                    p[j * g + i] += v;
                }
            }
        }
    }
    if p.iter().all(|&v| v == 0.0) {
        let i = rng.gen_range(0..g);
        p[i * g + i] = 1.0;
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// `|a - b| <= tol * max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
