//! Element-level integrals for the frozen-coefficient bilinear form.

use crate::fem::reference::{physical_gradients, ReferenceHex};
use crate::fem::FemError;
use crate::material::MaterialParams;
use crate::tensor::Mat3;

pub type ElementMatrix = [[f64; 24]; 24];

/// Stiffness of one hexahedron for the integrand
///
/// ```text
/// s(x) [c̄₁ ε(u) + ν c̄₂ (∇·u) I] : ε(v)
/// ```
///
/// where `s = 1/(1 + β ∇·uⁿ)` is given per Gauss point in `coeff`.
/// DOF ordering is `3·a + i` for local node `a` and component `i`.
pub fn element_stiffness(
    reference: &ReferenceHex,
    nodes: &[[f64; 3]; 8],
    params: &MaterialParams,
    coeff: &[f64; 8],
) -> Result<ElementMatrix, FemError> {
    let (lambda, mu) = params.lame_classical();
    let mut k = [[0.0; 24]; 24];
    for q in 0..8 {
        let s = coeff[q];
        if !(s > 0.0 && s.is_finite()) {
            return Err(FemError::NonPositiveCoefficient { element: None, point: q, value: s });
        }
        let (g, det) =
            physical_gradients(nodes, &reference.grad[q]).ok_or(FemError::InvertedElement { element: None, point: q })?;
        let w = reference.weights[q] * det * s;
        for a in 0..8 {
            let ga = &g[a];
            for b in 0..8 {
                let gb = &g[b];
                let dot = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
                for i in 0..3 {
                    let row = &mut k[3 * a + i];
                    for j in 0..3 {
                        // ε(N_b e_j) : ε(N_a e_i) = ½(δ_ij ∇N_a·∇N_b + ∂_j N_a ∂_i N_b)
                        let mut v = mu * ga[j] * gb[i] + lambda * ga[i] * gb[j];
                        if i == j {
                            v += mu * dot;
                        }
                        row[3 * b + j] += w * v;
                    }
                }
            }
        }
    }
    // mirror the upper triangle so the matrix is bitwise symmetric
    for m in 0..24 {
        for n in 0..m {
            k[m][n] = k[n][m];
        }
    }
    Ok(k)
}

/// Divergence of the interpolated displacement at each Gauss point.
pub fn divergence_at_points(
    reference: &ReferenceHex,
    nodes: &[[f64; 3]; 8],
    u: &[[f64; 3]; 8],
) -> Result<[f64; 8], FemError> {
    let mut div = [0.0; 8];
    for q in 0..8 {
        let (g, _) =
            physical_gradients(nodes, &reference.grad[q]).ok_or(FemError::InvertedElement { element: None, point: q })?;
        div[q] = (0..8).map(|a| g[a][0] * u[a][0] + g[a][1] * u[a][1] + g[a][2] * u[a][2]).sum();
    }
    Ok(div)
}

/// Displacement gradient `G[i][j] = ∂u_i/∂x_j` at each Gauss point.
pub fn gradients_at_points(
    reference: &ReferenceHex,
    nodes: &[[f64; 3]; 8],
    u: &[[f64; 3]; 8],
) -> Result<[Mat3; 8], FemError> {
    let mut out = [[[0.0; 3]; 3]; 8];
    for q in 0..8 {
        let (g, _) =
            physical_gradients(nodes, &reference.grad[q]).ok_or(FemError::InvertedElement { element: None, point: q })?;
        for a in 0..8 {
            for i in 0..3 {
                for j in 0..3 {
                    out[q][i][j] += u[a][i] * g[a][j];
                }
            }
        }
    }
    Ok(out)
}

/// `∫ f·N_a dV` for a constant body force.
pub fn element_body_force(reference: &ReferenceHex, nodes: &[[f64; 3]; 8], f: &[f64; 3]) -> Result<[f64; 24], FemError> {
    let mut out = [0.0; 24];
    for q in 0..8 {
        let (_, det) =
            physical_gradients(nodes, &reference.grad[q]).ok_or(FemError::InvertedElement { element: None, point: q })?;
        let w = reference.weights[q] * det;
        for a in 0..8 {
            for i in 0..3 {
                out[3 * a + i] += w * reference.shape[q][a] * f[i];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::reference::NODE_COORDS;

    fn unit_cube() -> [[f64; 3]; 8] {
        NODE_COORDS.map(|c| c.map(|v| 0.5 * (v + 1.0)))
    }

    fn skewed() -> [[f64; 3]; 8] {
        let mut x = unit_cube();
        x[6] = [1.3, 1.2, 1.1];
        x[1] = [1.1, -0.1, 0.05];
        x
    }

    /// Independent route: Voigt B-matrix with engineering shears and the
    /// isotropic D matrix, integrated at the same Gauss points.
    fn voigt_stiffness(nodes: &[[f64; 3]; 8], e: f64, nu: f64) -> Vec<Vec<f64>> {
        let r = ReferenceHex::new();
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut d = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] = lam;
            }
            d[i][i] += 2.0 * mu;
            d[i + 3][i + 3] = mu;
        }
        let mut k = vec![vec![0.0; 24]; 24];
        for q in 0..8 {
            let (g, det) = physical_gradients(nodes, &r.grad[q]).unwrap();
            let mut b = [[0.0; 24]; 6];
            for a in 0..8 {
                let (x, y, z) = (g[a][0], g[a][1], g[a][2]);
                b[0][3 * a] = x;
                b[1][3 * a + 1] = y;
                b[2][3 * a + 2] = z;
                b[3][3 * a] = y;
                b[3][3 * a + 1] = x;
                b[4][3 * a] = z;
                b[4][3 * a + 2] = x;
                b[5][3 * a + 1] = z;
                b[5][3 * a + 2] = y;
            }
            for m in 0..24 {
                for n in 0..24 {
                    let mut s = 0.0;
                    for p in 0..6 {
                        for t in 0..6 {
                            s += b[p][m] * d[p][t] * b[t][n];
                        }
                    }
                    k[m][n] += det * s;
                }
            }
        }
        k
    }

    #[test]
    fn matches_voigt_oracle() {
        let p = MaterialParams::new(1.0e4, 0.3, 0.0).unwrap();
        let r = ReferenceHex::new();
        for nodes in [unit_cube(), skewed()] {
            let k = element_stiffness(&r, &nodes, &p, &[1.0; 8]).unwrap();
            let oracle = voigt_stiffness(&nodes, 1.0e4, 0.3);
            let scale = oracle.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for m in 0..24 {
                for n in 0..24 {
                    assert!((k[m][n] - oracle[m][n]).abs() <= 1e-12 * scale, "({m},{n})");
                }
            }
        }
    }

    #[test]
    fn symmetric_and_rigid_modes_in_nullspace() {
        let p = MaterialParams::new(1.0e4, 0.3, 0.0).unwrap();
        let r = ReferenceHex::new();
        let nodes = skewed();
        let k = element_stiffness(&r, &nodes, &p, &[0.7, 1.0, 1.2, 0.9, 1.1, 1.0, 0.8, 1.3]).unwrap();
        let scale = k.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for m in 0..24 {
            for n in 0..24 {
                assert!((k[m][n] - k[n][m]).abs() <= 1e-13 * scale);
            }
        }
        let mut modes: Vec<[f64; 24]> = Vec::new();
        for d in 0..3 {
            let mut v = [0.0; 24];
            for a in 0..8 {
                v[3 * a + d] = 1.0;
            }
            modes.push(v);
        }
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let mut v = [0.0; 24];
            for a in 0..8 {
                v[3 * a + i] = -nodes[a][j];
                v[3 * a + j] = nodes[a][i];
            }
            modes.push(v);
        }
        for v in modes {
            for row in &k {
                let s: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(s.abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn scales_linearly_with_coefficient() {
        let p = MaterialParams::new(1.0e4, 0.3, 5.0).unwrap();
        let r = ReferenceHex::new();
        let nodes = skewed();
        let k1 = element_stiffness(&r, &nodes, &p, &[1.0; 8]).unwrap();
        let k3 = element_stiffness(&r, &nodes, &p, &[3.0; 8]).unwrap();
        for m in 0..24 {
            for n in 0..24 {
                assert!((k3[m][n] - 3.0 * k1[m][n]).abs() <= 1e-12 * k1[m][m].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        let p = MaterialParams::default();
        let r = ReferenceHex::new();
        let mut c = [1.0; 8];
        c[5] = -0.1;
        let err = element_stiffness(&r, &unit_cube(), &p, &c).unwrap_err();
        assert!(matches!(err, FemError::NonPositiveCoefficient { point: 5, .. }));
    }

    #[test]
    fn body_force_totals_volume() {
        let r = ReferenceHex::new();
        let f = element_body_force(&r, &unit_cube(), &[0.0, 2.0, 0.0]).unwrap();
        let total: f64 = (0..8).map(|a| f[3 * a + 1]).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
