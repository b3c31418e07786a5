//! Isoparametric geometry of hexahedra and their faces at quadrature points.

use super::quadrature::{gauss_hex, gauss_quad};
use super::shape::{face_local_nodes, face_shape_eval, shape_eval_unchecked, ElementOrder, Face};
use crate::error::{Error, Result};

/// Basis tabulated at the points of a volume rule.
#[derive(Debug, Clone)]
pub struct ReferenceHex {
    pub order: ElementOrder,
    pub weights: Vec<f64>,
    pub points: Vec<[f64; 3]>,
    pub values: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<[f64; 3]>>,
}

impl ReferenceHex {
    /// Standard rule for the order: 2^3 points for 8-node, 3^3 for 27-node.
    pub fn new(order: ElementOrder) -> Self {
        Self::with_points(order, order.gauss_points())
    }

    pub fn with_points(order: ElementOrder, n: usize) -> Self {
        let rule = gauss_hex(n);
        let mut r = ReferenceHex {
            order,
            weights: Vec::with_capacity(rule.len()),
            points: Vec::with_capacity(rule.len()),
            values: Vec::with_capacity(rule.len()),
            gradients: Vec::with_capacity(rule.len()),
        };
        for (p, w) in rule {
            let sv = shape_eval_unchecked(order, p);
            r.weights.push(w);
            r.points.push(p);
            r.values.push(sv.values);
            r.gradients.push(sv.gradients);
        }
        r
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }
}

/// Physical gradients and integration weight at one quadrature point.
#[derive(Debug, Clone)]
pub struct QpGeometry {
    /// weight * det(J)
    pub dv: f64,
    pub det_j: f64,
    pub gradients: Vec<[f64; 3]>,
}

fn jacobian(coords: &[[f64; 3]], dn: &[[f64; 3]]) -> [[f64; 3]; 3] {
    // j[r][c] = d x_r / d xi_c
    let mut j = [[0.0; 3]; 3];
    for (x, g) in coords.iter().zip(dn) {
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += x[r] * g[c];
            }
        }
    }
    j
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let inv_det = 1.0 / det;
    [
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
    ]
}

/// Jacobian determinant at each point of `reference`.
pub fn jacobian_determinants(reference: &ReferenceHex, coords: &[[f64; 3]]) -> Vec<f64> {
    reference
        .gradients
        .iter()
        .map(|dn| det3(&jacobian(coords, dn)))
        .collect()
}

/// Geometry at every quadrature point; fails on a non-positive Jacobian.
pub fn element_geometry(reference: &ReferenceHex, coords: &[[f64; 3]]) -> Result<Vec<QpGeometry>> {
    let mut out = Vec::with_capacity(reference.n_points());
    for (q, dn) in reference.gradients.iter().enumerate() {
        let j = jacobian(coords, dn);
        let det = det3(&j);
        if !(det > 0.0) {
            return Err(Error::Geometry(format!("non-positive Jacobian determinant {det:e}")));
        }
        let inv = inverse3(&j, det);
        // grad N = J^-T grad_xi N
        let gradients = dn
            .iter()
            .map(|g| {
                [
                    inv[0][0] * g[0] + inv[1][0] * g[1] + inv[2][0] * g[2],
                    inv[0][1] * g[0] + inv[1][1] * g[1] + inv[2][1] * g[2],
                    inv[0][2] * g[0] + inv[1][2] * g[1] + inv[2][2] * g[2],
                ]
            })
            .collect();
        out.push(QpGeometry {
            dv: reference.weights[q] * det,
            det_j: det,
            gradients,
        });
    }
    Ok(out)
}

/// Face basis tabulated at a surface rule.
#[derive(Debug, Clone)]
pub struct ReferenceFace {
    pub order: ElementOrder,
    pub local_nodes: Vec<usize>,
    pub weights: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub gradients: Vec<Vec<[f64; 2]>>,
}

impl ReferenceFace {
    pub fn new(order: ElementOrder, face: Face) -> Self {
        let rule = gauss_quad(order.gauss_points());
        let mut r = ReferenceFace {
            order,
            local_nodes: face_local_nodes(order, face),
            weights: Vec::new(),
            values: Vec::new(),
            gradients: Vec::new(),
        };
        for (p, w) in rule {
            let (v, g) = face_shape_eval(order, p[0], p[1]);
            r.weights.push(w);
            r.values.push(v);
            r.gradients.push(g);
        }
        r
    }

    /// Surface measure (weight * |dx/ds x dx/dt|) at each point, given the
    /// facet node coordinates in face order.
    pub fn area_elements(&self, coords: &[[f64; 3]]) -> Vec<f64> {
        self.gradients
            .iter()
            .zip(&self.weights)
            .map(|(dn, w)| {
                let mut ts = [0.0; 3];
                let mut tt = [0.0; 3];
                for (x, g) in coords.iter().zip(dn) {
                    for r in 0..3 {
                        ts[r] += x[r] * g[0];
                        tt[r] += x[r] * g[1];
                    }
                }
                let c = [
                    ts[1] * tt[2] - ts[2] * tt[1],
                    ts[2] * tt[0] - ts[0] * tt[2],
                    ts[0] * tt[1] - ts[1] * tt[0],
                ];
                w * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
            })
            .collect()
    }
}

/// Face tables for all six faces of an order.
#[derive(Debug, Clone)]
pub struct FaceTables {
    tables: Vec<ReferenceFace>,
}

impl FaceTables {
    pub fn new(order: ElementOrder) -> Self {
        FaceTables {
            tables: Face::ALL.iter().map(|&f| ReferenceFace::new(order, f)).collect(),
        }
    }

    pub fn get(&self, face: Face) -> &ReferenceFace {
        &self.tables[face.axis * 2 + face.positive as usize]
    }
}
