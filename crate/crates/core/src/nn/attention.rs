use crate::{Error, Result};

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Attention matrix `a_ij = softmax_j(Q_i·K_j/√d)` and output `Σ_j a_ij V_j`.
pub fn scaled_softmax_attention(
    q: &[Vec<f64>],
    k: &[Vec<f64>],
    v: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = q.len();
    if n == 0 || k.len() != n || v.len() != n {
        return Err(Error::param(format!(
            "attention needs equally many queries, keys and values, got {n}, {}, {}",
            k.len(),
            v.len()
        )));
    }
    let d = q[0].len();
    let vd = v[0].len();
    if d == 0 || q.iter().chain(k).any(|r| r.len() != d) || v.iter().any(|r| r.len() != vd) {
        return Err(Error::param("attention rows have inconsistent widths"));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut weights = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for qi in q {
        let scores: Vec<f64> = k
            .iter()
            .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale)
            .collect();
        let a = softmax(&scores);
        let mut o = vec![0.0; vd];
        for (aj, vj) in a.iter().zip(v) {
            for (ov, vv) in o.iter_mut().zip(vj) {
                *ov += aj * vv;
            }
        }
        weights.push(a);
        out.push(o);
    }
    Ok((weights, out))
}
