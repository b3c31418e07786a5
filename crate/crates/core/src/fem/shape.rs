//! Tensor-product Lagrange hexahedra.
//!
//! Local nodes are numbered lexicographically, `i + n*(j + n*k)` with
//! `n = order + 1` and `i` running fastest along xi. The 8-node brick uses the
//! corner nodes {-1, 1}, the 27-node brick adds edge, face and body nodes at 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ElementOrder {
    /// 8-node trilinear
    Linear,
    /// 27-node triquadratic
    Quadratic,
}

impl ElementOrder {
    pub fn degree(self) -> usize {
        match self {
            ElementOrder::Linear => 1,
            ElementOrder::Quadratic => 2,
        }
    }

    /// Nodes along one edge.
    pub fn nodes_1d(self) -> usize {
        self.degree() + 1
    }

    pub fn nodes_per_element(self) -> usize {
        self.nodes_1d().pow(3)
    }

    pub fn nodes_per_face(self) -> usize {
        self.nodes_1d().pow(2)
    }

    /// Gauss points per direction that integrate the stiffness exactly on
    /// affine bricks.
    pub fn gauss_points(self) -> usize {
        self.degree() + 1
    }
}

impl TryFrom<u8> for ElementOrder {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(ElementOrder::Linear),
            2 => Ok(ElementOrder::Quadratic),
            other => Err(format!("element order must be 1 or 2 (got {other})")),
        }
    }
}

impl From<ElementOrder> for u8 {
    fn from(o: ElementOrder) -> u8 {
        o.degree() as u8
    }
}

/// Reference coordinate of 1D node `i`.
pub fn node_coord_1d(order: ElementOrder, i: usize) -> f64 {
    match order {
        ElementOrder::Linear => [-1.0, 1.0][i],
        ElementOrder::Quadratic => [-1.0, 0.0, 1.0][i],
    }
}

/// Values and first derivatives of the 1D Lagrange basis at `t`.
pub fn lagrange_1d(order: ElementOrder, t: f64) -> ([f64; 3], [f64; 3]) {
    match order {
        ElementOrder::Linear => (
            [0.5 * (1.0 - t), 0.5 * (1.0 + t), 0.0],
            [-0.5, 0.5, 0.0],
        ),
        ElementOrder::Quadratic => (
            [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)],
            [t - 0.5, -2.0 * t, t + 0.5],
        ),
    }
}

/// Shape function values and reference gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeValues {
    pub values: Vec<f64>,
    pub gradients: Vec<[f64; 3]>,
}

/// Evaluates the hexahedral basis at `xi` in [-1, 1]^3.
pub fn shape_eval(order: ElementOrder, xi: [f64; 3]) -> Result<ShapeValues> {
    if xi.iter().any(|c| !(c.abs() <= 1.0 + 1e-12)) {
        return Err(Error::Domain(format!(
            "local coordinates {xi:?} outside the reference cube [-1, 1]^3"
        )));
    }
    Ok(shape_eval_unchecked(order, xi))
}

pub(crate) fn shape_eval_unchecked(order: ElementOrder, xi: [f64; 3]) -> ShapeValues {
    let n = order.nodes_1d();
    let (vx, dx) = lagrange_1d(order, xi[0]);
    let (vy, dy) = lagrange_1d(order, xi[1]);
    let (vz, dz) = lagrange_1d(order, xi[2]);
    let npe = order.nodes_per_element();
    let mut values = Vec::with_capacity(npe);
    let mut gradients = Vec::with_capacity(npe);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                values.push(vx[i] * vy[j] * vz[k]);
                gradients.push([dx[i] * vy[j] * vz[k], vx[i] * dy[j] * vz[k], vx[i] * vy[j] * dz[k]]);
            }
        }
    }
    ShapeValues { values, gradients }
}

/// Reference coordinates of local node `a`.
pub fn local_node_coords(order: ElementOrder, a: usize) -> [f64; 3] {
    let n = order.nodes_1d();
    let (i, j, k) = (a % n, (a / n) % n, a / (n * n));
    [
        node_coord_1d(order, i),
        node_coord_1d(order, j),
        node_coord_1d(order, k),
    ]
}

/// A face of the reference cube: normal along `axis`, on the +1 side when
/// `positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub axis: usize,
    pub positive: bool,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face { axis: 0, positive: false },
        Face { axis: 0, positive: true },
        Face { axis: 1, positive: false },
        Face { axis: 1, positive: true },
        Face { axis: 2, positive: false },
        Face { axis: 2, positive: true },
    ];

    /// The two in-face axes, ascending.
    pub fn tangent_axes(self) -> (usize, usize) {
        match self.axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    pub fn outward_normal(self) -> [f64; 3] {
        let mut n = [0.0; 3];
        n[self.axis] = if self.positive { 1.0 } else { -1.0 };
        n
    }
}

/// Local node indices on `face`, ordered lexicographically over the tangent
/// axes (first tangent axis fastest).
pub fn face_local_nodes(order: ElementOrder, face: Face) -> Vec<usize> {
    let n = order.nodes_1d();
    let fixed = if face.positive { n - 1 } else { 0 };
    let (u, v) = face.tangent_axes();
    let mut out = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            let mut idx = [0usize; 3];
            idx[face.axis] = fixed;
            idx[u] = a;
            idx[v] = b;
            out.push(idx[0] + n * (idx[1] + n * idx[2]));
        }
    }
    out
}

/// 2D tensor basis on a face with the same node ordering as
/// [`face_local_nodes`]: values and derivatives along the two tangents.
pub fn face_shape_eval(order: ElementOrder, s: f64, t: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = order.nodes_1d();
    let (vs, ds) = lagrange_1d(order, s);
    let (vt, dt) = lagrange_1d(order, t);
    let mut values = Vec::with_capacity(n * n);
    let mut grads = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            values.push(vs[a] * vt[b]);
            grads.push([ds[a] * vt[b], vs[a] * dt[b]]);
        }
    }
    (values, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kronecker_delta_at_nodes() {
        for order in [ElementOrder::Linear, ElementOrder::Quadratic] {
            let npe = order.nodes_per_element();
            for k in 0..npe {
                let sv = shape_eval(order, local_node_coords(order, k)).unwrap();
                for (a, v) in sv.values.iter().enumerate() {
                    let expected = if a == k { 1.0 } else { 0.0 };
                    assert!((v - expected).abs() < 1e-14, "order {order:?} node {k} fn {a}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_is_a_domain_error() {
        assert!(matches!(
            shape_eval(ElementOrder::Quadratic, [1.5, 0.0, 0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn face_nodes_lie_on_face() {
        for order in [ElementOrder::Linear, ElementOrder::Quadratic] {
            for face in Face::ALL {
                let nodes = face_local_nodes(order, face);
                assert_eq!(nodes.len(), order.nodes_per_face());
                for a in nodes {
                    let c = local_node_coords(order, a);
                    assert_eq!(c[face.axis], if face.positive { 1.0 } else { -1.0 });
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_dense_sampling() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for order in [ElementOrder::Linear, ElementOrder::Quadratic] {
            for _ in 0..500_000 {
                let xi = [
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                ];
                let sv = shape_eval_unchecked(order, xi);
                let sum: f64 = sv.values.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                for d in 0..3 {
                    let g: f64 = sv.gradients.iter().map(|g| g[d]).sum();
                    assert!(g.abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn gradients_match_finite_differences(
            x in -0.99f64..0.99, y in -0.99f64..0.99, z in -0.99f64..0.99, quad in any::<bool>()
        ) {
            let order = if quad { ElementOrder::Quadratic } else { ElementOrder::Linear };
            let h = 1e-6;
            let base = shape_eval_unchecked(order, [x, y, z]);
            for d in 0..3 {
                let mut p = [x, y, z];
                let mut m = [x, y, z];
                p[d] += h;
                m[d] -= h;
                let vp = shape_eval_unchecked(order, p);
                let vm = shape_eval_unchecked(order, m);
                for a in 0..order.nodes_per_element() {
                    let fd = (vp.values[a] - vm.values[a]) / (2.0 * h);
                    prop_assert!((fd - base.gradients[a][d]).abs() < 1e-8);
                }
            }
        }
    }
}
