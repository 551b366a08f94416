use super::chain::HADAMARD_TOLERANCE;
use crate::error::{Error, Result};
use crate::jet::{Real, J1};
use crate::quadrature::GaussLegendre;

/// `W` with `f(zbar) = W^T zbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct HadamardFactor {
    /// Rows indexed by the coordinates, columns by the components of `f`.
    pub w: Vec<Vec<f64>>,
    /// `|W^T zbar - f(zbar)| / (1 + |f(zbar)|)`.
    pub residual: f64,
}

/// Factors a map with `f(0) = 0` as `f(zbar) = W^T zbar`, where
/// `W^T = int_0^1 J_f(s zbar) ds` by `nodes`-point Gauss-Legendre.
pub fn hadamard_factor<F>(f: F, zbar: &[f64], nodes: usize) -> Result<HadamardFactor>
where
    F: Fn(&[J1]) -> Result<Vec<J1>>,
{
    let dim = zbar.len();
    let rule = match nodes {
        16 => GaussLegendre::sixteen().clone(),
        32 => GaussLegendre::thirty_two().clone(),
        _ => GaussLegendre::new(nodes),
    };
    let value: Vec<f64> = f(&zbar.iter().map(|&z| J1::constant(z)).collect::<Vec<_>>())?
        .iter()
        .map(Real::primal)
        .collect();
    let mut w = vec![vec![0.0; value.len()]; dim];
    for (&s, &weight) in rule.nodes.iter().zip(&rule.weights) {
        let point: Vec<J1> = zbar
            .iter()
            .enumerate()
            .map(|(i, &z)| J1::variable(s * z, i, dim))
            .collect();
        let out = f(&point)?;
        if out.len() != value.len() {
            return Err(Error::dim("map changed output dimension between evaluations"));
        }
        for (col, v) in out.into_iter().enumerate() {
            let (_, partials) = v.into_parts(dim);
            for (row, dv) in partials.into_iter().enumerate() {
                w[row][col] += weight * dv;
            }
        }
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (col, &fv) in value.iter().enumerate() {
        let pred: f64 = w.iter().zip(zbar).map(|(row, z)| row[col] * z).sum();
        diff += (pred - fv).powi(2);
        norm += fv * fv;
    }
    let residual = diff.sqrt() / (1.0 + norm.sqrt());
    if !(residual < HADAMARD_TOLERANCE) {
        return Err(Error::Factorization {
            residual,
            tolerance: HADAMARD_TOLERANCE,
            nodes: rule.len(),
        });
    }
    Ok(HadamardFactor { w, residual })
}
