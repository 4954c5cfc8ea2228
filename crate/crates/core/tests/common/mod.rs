//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use grasscode::blichfeldt::{tau, DensityParams};
use grasscode::geometry::embedding_radius;
use grasscode::Subspace;
use nalgebra::{DMatrix, DVector};

/// Principal angles by the greedy recursion: the i-th pair `(u_i, v_i)`
/// maximizes `u . v` over unit vectors of `p` and `q` orthogonal to the
/// earlier pairs. Each step is solved by alternating maximization on the
/// two unit spheres. Returned in descending order.
pub fn greedy_principal_angles(p: &Subspace, q: &Subspace) -> Vec<f64> {
    let k = p.k();
    // cos(u, v) = x^T C y for u = x^T A_p, v = y^T A_q
    let c: DMatrix<f64> = p.basis() * q.basis().transpose();
    let mut xs: Vec<DVector<f64>> = Vec::new();
    let mut ys: Vec<DVector<f64>> = Vec::new();
    let mut angles = Vec::with_capacity(k);

    let deflate = |v: DVector<f64>, prev: &[DVector<f64>]| {
        let mut v = v;
        for _ in 0..2 {
            for w in prev {
                let d = w.dot(&v);
                v -= w * d;
            }
        }
        v
    };

    for i in 0..k {
        // deterministic start with a component along every free direction
        let mut x = deflate(DVector::from_fn(k, |j, _| 1.0 + 0.37 * j as f64 + 0.11 * i as f64), &xs);
        x /= x.norm();
        let mut y = DVector::zeros(k);
        let mut value = 0.0;
        for _ in 0..20_000 {
            let ny = deflate(c.transpose() * &x, &ys);
            let norm = ny.norm();
            if norm == 0.0 {
                // C vanishes on the remaining directions: any orthogonal pair works
                y = deflate(DVector::from_fn(k, |j, _| 1.0 + 0.5 * j as f64), &ys);
                y /= y.norm();
                value = 0.0;
                break;
            }
            y = ny / norm;
            let nx = deflate(&c * &y, &xs);
            let next = nx.norm();
            x = nx / next;
            if (next - value).abs() <= 1e-16 {
                value = next;
                break;
            }
            value = next;
        }
        angles.push(value.clamp(0.0, 1.0).acos());
        xs.push(x.clone());
        ys.push(y.clone());
    }
    angles.sort_by(|a, b| b.total_cmp(a));
    angles
}

/// Composite Simpson rule with `intervals` (even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// `mu(B_rho)` for lines in the plane (`k = 1, n = 2`), where the angle to a
/// fixed line is uniform on `[0, pi/2]` and `d = sin theta`.
pub fn mu_ball_lines_in_plane(rho: f64) -> f64 {
    let params = DensityParams::from_rho(rho, embedding_radius(1, 2)).unwrap();
    let top = rho.min(1.0).asin();
    let integral = simpson(|t| tau(t.sin().min(rho), &params).unwrap(), 0.0, top, 4000);
    integral / std::f64::consts::FRAC_PI_2
}
