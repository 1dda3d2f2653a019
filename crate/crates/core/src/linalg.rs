use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is in the build
use num_traits::Float;

/// Unit eigenvector of the smallest eigenvalue of a symmetric `n × n` matrix
/// (row-major), by cyclic Jacobi rotations.
pub(crate) fn smallest_eigenvector(sym: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(sym.len(), n * n);
    let mut a = sym.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        let scale: f64 = (0..n).map(|i| a[i * n + i].abs()).sum::<f64>().max(1e-300);
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let best = (0..n)
        .min_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap_or(core::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut out: Vec<f64> = (0..n).map(|k| v[k * n + best]).collect();
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|x| *x /= norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_null_vector() {
        // A = B^T B with B rows orthogonal to (1, 2, -1).
        let b = [[1.0, 0.0, 1.0], [0.0, 1.0, 2.0], [2.0, -1.0, 0.0]];
        let mut sym = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                sym[i * 3 + j] = b.iter().map(|r| r[i] * r[j]).sum();
            }
        }
        let v = smallest_eigenvector(&sym, 3);
        let expected = [1.0, 2.0, -1.0].map(|x: f64| x / 6.0f64.sqrt());
        let sign = v[0].signum();
        for k in 0..3 {
            assert!((sign * v[k] - expected[k]).abs() < 1e-12);
        }
    }
}
