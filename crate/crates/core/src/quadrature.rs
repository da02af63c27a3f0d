//! Gauss–Legendre rules and bilinear (Q1) shape functions on the reference
//! square `[-1, 1]²`. Local node order is counter-clockwise starting at
//! `(-1, -1)`.

/// Points and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// `n` in `1..=4`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0 / 5.0f64).sqrt();
            let a = ((3.0 - 2.0 * s) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        _ => panic!("gauss rule with {n} points not tabulated"),
    }
}

pub(crate) const REF_NODES: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

pub fn q1_shape(xi: f64, eta: f64) -> [f64; 4] {
    let mut n = [0.0; 4];
    for (a, r) in REF_NODES.iter().enumerate() {
        n[a] = 0.25 * (1.0 + r[0] * xi) * (1.0 + r[1] * eta);
    }
    n
}

/// Reference derivatives `[dN/dxi, dN/deta]` per local node.
pub fn q1_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    let mut d = [[0.0; 2]; 4];
    for (a, r) in REF_NODES.iter().enumerate() {
        d[a][0] = 0.25 * r[0] * (1.0 + r[1] * eta);
        d[a][1] = 0.25 * r[1] * (1.0 + r[0] * xi);
    }
    d
}
