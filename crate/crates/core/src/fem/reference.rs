//! Trilinear reference hexahedron on `[-1, 1]³`.
//!
//! Local node numbering:
//!
//! ```text
//!        7-------6
//!       /|      /|
//!      4-------5 |
//!      | 3-----|-2
//!      |/      |/
//!      0-------1
//! ```
//!
//! ξ runs 0→1, η runs 0→3 and ζ runs 0→4.

use crate::tensor::Mat3;

pub const NODE_COORDS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Local nodes of each face, ordered counter-clockwise seen from outside.
///
/// Faces: 0 ξ=−1, 1 ξ=+1, 2 η=−1, 3 η=+1, 4 ζ=−1, 5 ζ=+1.
pub const FACE_NODES: [[usize; 4]; 6] = [
    [0, 4, 7, 3],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 3, 2, 1],
    [4, 5, 6, 7],
];

pub const GAUSS_1D: f64 = 0.577_350_269_189_625_8;

/// Shape functions and reference gradients tabulated at the 2×2×2 Gauss points.
#[derive(Debug, Clone)]
pub struct ReferenceHex {
    pub points: [[f64; 3]; 8],
    pub weights: [f64; 8],
    pub shape: [[f64; 8]; 8],
    pub grad: [[[f64; 3]; 8]; 8],
}

impl ReferenceHex {
    pub fn new() -> Self {
        let mut points = [[0.0; 3]; 8];
        for (q, p) in points.iter_mut().enumerate() {
            // same sign pattern as the nodes, so point q sits nearest node q
            for d in 0..3 {
                p[d] = NODE_COORDS[q][d] * GAUSS_1D;
            }
        }
        let mut shape = [[0.0; 8]; 8];
        let mut grad = [[[0.0; 3]; 8]; 8];
        for q in 0..8 {
            shape[q] = shape_functions(&points[q]);
            grad[q] = shape_gradients(&points[q]);
        }
        ReferenceHex { points, weights: [1.0; 8], shape, grad }
    }
}

impl Default for ReferenceHex {
    fn default() -> Self {
        Self::new()
    }
}

pub fn shape_functions(xi: &[f64; 3]) -> [f64; 8] {
    let mut n = [0.0; 8];
    for (a, na) in n.iter_mut().enumerate() {
        let c = &NODE_COORDS[a];
        *na = 0.125 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]) * (1.0 + c[2] * xi[2]);
    }
    n
}

/// Gradients of the shape functions with respect to (ξ, η, ζ).
pub fn shape_gradients(xi: &[f64; 3]) -> [[f64; 3]; 8] {
    let mut g = [[0.0; 3]; 8];
    for (a, ga) in g.iter_mut().enumerate() {
        let c = &NODE_COORDS[a];
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        ga[0] = 0.125 * c[0] * f[1] * f[2];
        ga[1] = 0.125 * f[0] * c[1] * f[2];
        ga[2] = 0.125 * f[0] * f[1] * c[2];
    }
    g
}

/// Jacobian `J[i][j] = ∂x_j/∂ξ_i` for the given reference gradients.
pub fn jacobian(nodes: &[[f64; 3]; 8], ref_grad: &[[f64; 3]; 8]) -> Mat3 {
    let mut j = [[0.0; 3]; 3];
    for (x, g) in nodes.iter().zip(ref_grad) {
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += g[r] * x[c];
            }
        }
    }
    j
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse and determinant; `None` when the determinant is not positive.
pub fn inverse_positive(m: &Mat3) -> Option<(Mat3, f64)> {
    let det = det3(m);
    if !(det > 0.0) {
        return None;
    }
    let inv_det = 1.0 / det;
    let inv = [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ];
    Some((inv, det))
}

/// Physical shape gradients `∂N_a/∂x` and `det J` at one reference point.
pub fn physical_gradients(nodes: &[[f64; 3]; 8], ref_grad: &[[f64; 3]; 8]) -> Option<([[f64; 3]; 8], f64)> {
    let j = jacobian(nodes, ref_grad);
    let (inv, det) = inverse_positive(&j)?;
    let mut g = [[0.0; 3]; 8];
    for (ga, ra) in g.iter_mut().zip(ref_grad) {
        // ∇_x N = J⁻¹ ∇_ξ N
        for r in 0..3 {
            ga[r] = inv[r][0] * ra[0] + inv[r][1] * ra[1] + inv[r][2] * ra[2];
        }
    }
    Some((g, det))
}

/// Maps a reference point to physical coordinates.
pub fn map_point(nodes: &[[f64; 3]; 8], xi: &[f64; 3]) -> [f64; 3] {
    let n = shape_functions(xi);
    let mut x = [0.0; 3];
    for (na, xa) in n.iter().zip(nodes) {
        for d in 0..3 {
            x[d] += na * xa[d];
        }
    }
    x
}

/// Newton inversion of the trilinear map. Returns the reference coordinates
/// when the iteration converges, regardless of whether the point is inside.
pub fn inverse_map(nodes: &[[f64; 3]; 8], x: &[f64; 3]) -> Option<[f64; 3]> {
    let mut xi = [0.0; 3];
    let scale = nodes.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for _ in 0..50 {
        let cur = map_point(nodes, &xi);
        let r = [x[0] - cur[0], x[1] - cur[1], x[2] - cur[2]];
        if r.iter().map(|v| v.abs()).fold(0.0, f64::max) <= 1e-13 * scale {
            return Some(xi);
        }
        let j = jacobian(nodes, &shape_gradients(&xi));
        let (inv, _) = inverse_positive(&j)?;
        // x = Σ N_a x_a  ⇒  dx = Jᵀ dξ  ⇒  dξ = J⁻ᵀ dx
        let step = inv_t_apply(&inv, &r);
        for d in 0..3 {
            xi[d] += step[d];
        }
    }
    None
}

fn inv_t_apply(inv: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    // (J⁻¹)ᵀ v
    let mut out = [0.0; 3];
    for r in 0..3 {
        out[r] = inv[0][r] * v[0] + inv[1][r] * v[1] + inv[2][r] * v[2];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cube() -> [[f64; 3]; 8] {
        let mut n = [[0.0; 3]; 8];
        for (a, p) in n.iter_mut().enumerate() {
            for d in 0..3 {
                p[d] = 0.5 * (NODE_COORDS[a][d] + 1.0);
            }
        }
        n
    }

    #[test]
    fn partition_of_unity_at_gauss_points() {
        let r = ReferenceHex::new();
        for q in 0..8 {
            let s: f64 = r.shape[q].iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            for d in 0..3 {
                let g: f64 = r.grad[q].iter().map(|g| g[d]).sum();
                assert!(g.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_functions_are_nodal() {
        for a in 0..8 {
            let n = shape_functions(&NODE_COORDS[a]);
            for b in 0..8 {
                assert_eq!(n[b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn unit_cube_jacobian() {
        let r = ReferenceHex::new();
        let nodes = unit_cube();
        for q in 0..8 {
            let (_, det) = physical_gradients(&nodes, &r.grad[q]).unwrap();
            assert!((det - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_map_round_trip() {
        let mut nodes = unit_cube();
        nodes[6] = [1.2, 1.1, 1.3];
        let xi = [0.3, -0.7, 0.1];
        let x = map_point(&nodes, &xi);
        let back = inverse_map(&nodes, &x).unwrap();
        for d in 0..3 {
            assert!((back[d] - xi[d]).abs() < 1e-10);
        }
    }

    #[test]
    fn face_normals_point_outward() {
        let nodes = unit_cube();
        let expected = [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]];
        for (f, face) in FACE_NODES.iter().enumerate() {
            let p: Vec<[f64; 3]> = face.iter().map(|&a| nodes[a]).collect();
            let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
            let e2 = [p[3][0] - p[0][0], p[3][1] - p[0][1], p[3][2] - p[0][2]];
            let n = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
            assert_eq!(n, expected[f], "face {f}");
        }
    }
}
