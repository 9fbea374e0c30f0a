//! `L^p` norms on finite probability spaces, computed as weighted power sums.

/// `E|x|^p` for `p > 0`.
pub fn moment(values: &[f64], probs: &[f64], p: f64) -> f64 {
    values.iter().zip(probs).map(|(&v, &w)| w * v.abs().powf(p)).sum()
}

/// `‖x‖_p = (E|x|^p)^{1/p}`; `p = ∞` gives the largest `|x|` on an atom of
/// positive mass.
pub fn lp_norm(values: &[f64], probs: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values
            .iter()
            .zip(probs)
            .filter(|(_, &w)| w > 0.0)
            .fold(0.0, |m, (&v, _)| m.max(v.abs()))
    } else {
        moment(values, probs, p).powf(1.0 / p)
    }
}

/// `E x`.
pub fn mean(values: &[f64], probs: &[f64]) -> f64 {
    values.iter().zip(probs).map(|(&v, &w)| w * v).sum()
}

/// `ℓ^r` norm of a finite sequence; `r = ∞` gives the max.
pub fn lr(values: impl IntoIterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        values.into_iter().map(|v| v.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Hölder conjugate `p' = p / (p − 1)`.
pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_two_atoms() {
        let v = [1.0, -3.0];
        let w = [0.5, 0.5];
        assert!((lp_norm(&v, &w, 2.0) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_norm(&v, &w, f64::INFINITY), 3.0);
        assert_eq!(lp_norm(&v, &[1.0, 0.0], f64::INFINITY), 1.0);
        assert_eq!(mean(&v, &w), -1.0);
        assert!((lr([3.0, 4.0], 2.0) - 5.0).abs() < 1e-15);
        assert_eq!(conjugate(2.0), 2.0);
        assert_eq!(conjugate(1.5), 3.0);
        assert_eq!(conjugate(f64::INFINITY), 1.0);
    }
}
