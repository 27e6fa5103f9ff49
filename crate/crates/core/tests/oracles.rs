//! Checks against independently computed reference values: characteristic
//! polynomials, closed-form roots and naive dense evaluation.

use xpoint_core::experiments::{gen_random_matrix, ConductanceLevels};
use xpoint_core::linalg::{self, LinearMap, SquareCoefficients};
use xpoint_core::pagerank::{transition_matrix, CitationMatrix};
use xpoint_core::{fdsim, EigenSystem, Matrix, OpAmpParams, SimConfig};

fn random3(seed: u64) -> Matrix {
    gen_random_matrix(3, &ConductanceLevels::RRAM, seed).unwrap()
}

/// Largest real root of `det(t I - A)` for a 3x3 matrix, by bisection.
fn cubic_dominant_root(a: &Matrix) -> f64 {
    let g = |i: usize, j: usize| a[(i, j)];
    let trace = g(0, 0) + g(1, 1) + g(2, 2);
    let minors = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0) + g(0, 0) * g(2, 2) - g(0, 2) * g(2, 0)
        + g(1, 1) * g(2, 2)
        - g(1, 2) * g(2, 1);
    let det = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
        - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
        + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    let p = |t: f64| t * t * t - trace * t * t + minors * t - det;
    // Perron root lies between the smallest and largest row sum.
    let sums: Vec<f64> = (0..3).map(|i| g(i, 0) + g(i, 1) + g(i, 2)).collect();
    let (mut lo, mut hi) = (
        sums.iter().copied().fold(f64::INFINITY, f64::min) - 1e-9,
        sums.iter().copied().fold(0.0, f64::max) + 1e-9,
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn power_iteration_matches_characteristic_root() {
    for seed in 0..20 {
        let a = random3(seed);
        let pair = linalg::power_iteration(&a, 1e-13, 1_000_000).unwrap();
        let root = cubic_dominant_root(&a);
        assert!((pair.value - root).abs() < 1e-10 * root, "seed {seed}: {} vs {root}", pair.value);
        assert!(pair.vector.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn scalar_system_abscissa_matches_quadratic() {
    // A = [2], delta = 0.01: M = [[0, 1/2], [u (a - g), -(g u + 1/2)]]
    let (a, delta) = (2.0f64, 0.01f64);
    let g = (1.0 - delta) * a;
    let u = 1.0 / (g + a);
    let (m21, m22) = (u * (a - g), -(g * u + 0.5));
    let tr = m22;
    let det = -0.5 * m21;
    let expected = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    assert!((expected - 0.0025126).abs() < 1e-6);

    let sys = EigenSystem::uniform(Matrix::from_rows(&[[a]]).unwrap(), a, delta, OpAmpParams::default())
        .unwrap();
    let got = sys.spectral_abscissa().unwrap();
    assert!((got - expected).abs() < 1e-7 * expected.abs() + 1e-12, "{got} vs {expected}");
}

#[derive(Clone, Copy, Debug)]
struct C(f64, f64);

impl C {
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn sub(self, o: C) -> C {
        C(self.0 - o.0, self.1 - o.1)
    }
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn div(self, o: C) -> C {
        let d = o.0 * o.0 + o.1 * o.1;
        C((self.0 * o.0 + self.1 * o.1) / d, (self.1 * o.0 - self.0 * o.1) / d)
    }
    fn abs(self) -> f64 {
        self.0.hypot(self.1)
    }
}

/// Monic characteristic polynomial coefficients `[1, c1, ..., cn]` (Faddeev-LeVerrier).
fn char_poly(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mul = |x: &Vec<f64>, y: &Matrix| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    out[i * n + j] += y[(i, k)] * x[k * n + j];
                }
            }
        }
        out
    };
    let mut coeffs = vec![1.0];
    let mut mk = vec![0.0; n * n]; // M_0 = 0
    let mut c_prev = 1.0;
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = mul(&mk, m);
        for i in 0..n {
            next[i * n + i] += c_prev;
        }
        mk = next;
        let am = mul(&mk, m);
        let tr: f64 = (0..n).map(|i| am[i * n + i]).sum();
        c_prev = -tr / k as f64;
        coeffs.push(c_prev);
    }
    coeffs
}

/// All roots of a monic polynomial by Durand-Kerner iteration.
fn roots(coeffs: &[f64]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().fold(C(0.0, 0.0), |acc, &c| acc.mul(z).add(C(c, 0.0)));
    let radius = 1.0 + coeffs[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut z: Vec<C> = (0..n)
        .map(|k| {
            let th = 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            C(radius * 0.5 * th.cos(), radius * 0.5 * th.sin())
        })
        .collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = C(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den = den.mul(z[i].sub(z[j]));
                }
            }
            let step = eval(z[i]).div(den);
            z[i] = z[i].sub(step);
            delta = delta.max(step.abs());
        }
        if delta < 1e-15 {
            break;
        }
    }
    z
}

#[test]
fn abscissa_matches_polynomial_roots() {
    let params = OpAmpParams::default();
    for (seed, delta) in [(0, 0.003), (1, 0.01), (2, 0.06), (3, 0.2)] {
        let a = random3(seed);
        let lambda = linalg::power_iteration(&a, 1e-13, 1_000_000).unwrap().value;
        let sys = EigenSystem::uniform(a, lambda, delta, params).unwrap();
        let m = sys.associated_matrix();
        let r = roots(&char_poly(&m));
        let expected = r.iter().map(|z| z.0).fold(f64::NEG_INFINITY, f64::max);
        let got = sys.spectral_abscissa().unwrap();
        assert!(
            (got - expected).abs() < 1e-6 * expected.abs(),
            "seed {seed} delta {delta}: {got} vs {expected}"
        );
        // independent check of the dense estimator too
        let dense = linalg::spectral_abscissa(&m, 0.01, 1e-10, 10_000_000).unwrap();
        assert!((dense - got).abs() < 1e-9 * got.abs());
    }
}

#[test]
fn negative_mismatch_gives_negative_abscissa() {
    let a = random3(4);
    let lambda = linalg::power_iteration(&a, 1e-13, 1_000_000).unwrap().value;
    let sys = EigenSystem::uniform(a, lambda, -0.01, OpAmpParams::default()).unwrap();
    let expected = roots(&char_poly(&sys.associated_matrix()))
        .iter()
        .map(|z| z.0)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(expected < 0.0);
    assert!(sys.spectral_abscissa().unwrap() < 0.0);
}

#[test]
fn structured_trajectory_matches_dense_steps() {
    let a = random3(9);
    let lambda = linalg::power_iteration(&a, 1e-13, 1_000_000).unwrap().value;
    let sys = EigenSystem::uniform(a, lambda, 0.06, OpAmpParams::default()).unwrap();
    let cfg = SimConfig {
        record_stride: Some(1),
        ..SimConfig::default()
    };
    let trace = fdsim::simulate(&sys, &cfg).unwrap();
    let m = sys.associated_matrix();
    let mut w = vec![cfg.x0, cfg.x0, cfg.x0, 0.0, 0.0, 0.0];
    for k in 1..trace.states.len() {
        w = fdsim::step(&w, &m, cfg.alpha, 1.0).unwrap().into_inner();
        let err = w
            .iter()
            .zip(trace.states[k].iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "step {k}: {err}");
    }
}

#[test]
fn transition_operator_matches_dense() {
    // 100 pages, each linking forward to the next three plus a few dangling pages
    let n = 100;
    let links = (0..n - 5).flat_map(|j| (1..=3).map(move |d| ((j + d * 7) % n, j)));
    let c = CitationMatrix::new(n, links).unwrap();
    let t = transition_matrix(&c, 0.85).unwrap();
    let dense = t.to_dense();
    for (i, j) in [(0, 0), (7, 0), (3, 97), (50, 43)] {
        assert_eq!(dense[(i, j)], t.entry(i, j));
    }
    let x: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
    let mut y = vec![0.0; n];
    t.apply(&x, &mut y);
    let naive = linalg::matvec(&dense, &x).unwrap();
    for (a, b) in y.iter().zip(naive.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    for s in t.column_sums() {
        assert!((s - 1.0).abs() < 1e-12);
    }
    assert!((t.norm_inf() - dense.norm_inf()).abs() < 1e-12);
    assert_eq!(t.min_entry(), dense.min_entry());
    let rs = t.row_sums();
    for (a, b) in rs.iter().zip(dense.row_sums().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn structured_pagerank_trajectory_matches_dense() {
    let n = 80;
    let links = (0..n - 4).flat_map(|j| (1..=2 + j % 3).map(move |d| ((j + d * 11) % n, j)));
    let t = transition_matrix(&CitationMatrix::new(n, links).unwrap(), 0.85).unwrap();
    let params = OpAmpParams::default();
    let structured = EigenSystem::uniform(&t, 1.0, 0.02, params).unwrap();
    let dense = EigenSystem::uniform(t.to_dense(), 1.0, 0.02, params).unwrap();
    let cfg = SimConfig::default();
    let a = fdsim::simulate(&structured, &cfg).unwrap();
    let b = fdsim::simulate(&dense, &cfg).unwrap();
    assert_eq!(a.states.len(), b.states.len());
    for (sa, sb) in a.states.iter().zip(&b.states) {
        let err = sa.iter().zip(sb.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
    assert_eq!(a.computing_time, b.computing_time);
}
