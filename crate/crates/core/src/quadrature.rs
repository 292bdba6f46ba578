//! Tensorized quadrature rules for standard Gaussian noise.

use gauss_quad::GaussHermite;
use statrs::function::erf::erfc_inv;

use crate::entropic::DiscreteLaw;
use crate::error::{Error, Result};

/// Nodes and weights of the `order`-point rule for `N(0, 1)`, sorted by node.
///
/// The physicists' rule (weight `e^{−x²}`) is rescaled by `x ↦ √2·x` and
/// `w ↦ w/√π`; the result is symmetrized so that the rule is exactly even.
pub fn standard_normal_rule(order: usize) -> Result<Vec<(f64, f64)>> {
    if order < 2 {
        return Err(Error::InvalidInput(format!(
            "quadrature order must be ≥ 2, got {order}"
        )));
    }
    let rule = GaussHermite::new(order).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut pairs: Vec<(f64, f64)> = rule
        .iter()
        .map(|(x, w)| {
            (
                x * std::f64::consts::SQRT_2,
                w / std::f64::consts::PI.sqrt(),
            )
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if order % 2 == 1 {
        pairs[order / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    for p in &mut pairs {
        p.1 /= total;
    }
    Ok(pairs)
}

/// Equal-weight rule at the quantile midpoints `Φ⁻¹((i + ½)/order)`,
/// rescaled to unit variance. Atoms are densest where the density is
/// largest, which keeps successor laws overlapping on fine grids.
pub fn quantile_rule(order: usize) -> Result<Vec<(f64, f64)>> {
    if order == 0 {
        return Err(Error::InvalidInput(
            "quantile order must be positive".into(),
        ));
    }
    if order == 1 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let n = order as f64;
    let mut nodes: Vec<f64> = (0..order)
        .map(|i| -std::f64::consts::SQRT_2 * erfc_inv(2.0 * (i as f64 + 0.5) / n))
        .collect();
    for i in 0..order / 2 {
        let x = 0.5 * (nodes[order - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    let sd = (nodes.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    Ok(nodes.into_iter().map(|x| (x / sd, 1.0 / n)).collect())
}

/// Product law of one-dimensional rules, one per noise coordinate.
pub fn product_law(rules: &[Vec<(f64, f64)>]) -> Result<DiscreteLaw> {
    let dim = rules.len();
    if dim == 0 {
        return Err(Error::InvalidInput(
            "noise dimension must be positive".into(),
        ));
    }
    let count = rules
        .iter()
        .try_fold(1usize, |acc, r| acc.checked_mul(r.len()))
        .filter(|&c| c <= 1 << 22)
        .ok_or_else(|| Error::InvalidInput("too many quadrature atoms".into()))?;
    let mut points = Vec::with_capacity(count * dim);
    let mut weights = Vec::with_capacity(count);
    let mut digits = vec![0usize; dim];
    for _ in 0..count {
        let mut w = 1.0;
        for (d, &i) in digits.iter().enumerate() {
            points.push(rules[d][i].0);
            w *= rules[d][i].1;
        }
        weights.push(w);
        for (d, slot) in digits.iter_mut().enumerate().rev() {
            *slot += 1;
            if *slot < rules[d].len() {
                break;
            }
            *slot = 0;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    DiscreteLaw::new(dim, points, weights)
}

/// Product rule for `N(0, I_dim)` with `order` Gauss–Hermite points per axis.
pub fn gauss_hermite_law(dim: usize, order: usize) -> Result<DiscreteLaw> {
    let rule = standard_normal_rule(order)?;
    product_law(&vec![rule; dim])
}
