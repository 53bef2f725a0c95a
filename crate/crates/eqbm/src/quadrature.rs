//! Quadrature rules used by the reference computations: Gauss–Legendre on
//! intervals, the trapezoid rule, and a graded rule for the tent density.

use std::f64::consts::PI;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone, Default)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    fn extend(&mut self, other: Rule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

/// n-point Gauss–Legendre rule on [−1, 1] (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Rule {
    let base = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Rule {
        nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
        weights: base.weights.iter().map(|w| half * w).collect(),
    }
}

/// Composite Gauss–Legendre with equal panels on [a, b].
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, n: usize) -> Rule {
    let mut r = Rule::default();
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        r.extend(gauss_legendre_on(a + p as f64 * h, a + (p + 1) as f64 * h, n));
    }
    r
}

/// Rule for the uniform law on [0, 1]; weights sum to one.
pub fn unit_interval_rule(n: usize) -> Rule {
    gauss_legendre_on(0.0, 1.0, n)
}

/// Trapezoid rule with `n` subintervals.
pub fn trapezoid(a: f64, b: f64, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for k in 1..n {
        s += f(a + k as f64 * h);
    }
    s * h
}

/// p(t) = (2/π) ln|coth(πt/2)|, written to stay accurate for large |t|.
pub fn tent_density(t: f64) -> f64 {
    let x = PI * t.abs();
    if x == 0.0 {
        return f64::INFINITY;
    }
    (2.0 / PI) * (2.0 / x.exp_m1()).ln_1p()
}

/// Rule for expectations under the tent density on the real line.
///
/// The half line is split into dyadic panels shrinking toward the logarithmic
/// singularity at 0 and half-unit panels out to t = 8.25, where the remaining
/// mass is about 2e−12. Nodes come in ± pairs; weights include p(t).
pub fn tent_rule() -> Rule {
    let mut half = Rule::default();
    let inner = 0.25;
    let levels = 32;
    let a0 = inner * 0.5f64.powi(levels);
    half.extend(gauss_legendre_on(0.0, a0, 6));
    let mut a = a0;
    for _ in 0..levels {
        half.extend(gauss_legendre_on(a, 2.0 * a, 8));
        a *= 2.0;
    }
    half.extend(composite_gauss_legendre(inner, 8.25, 16, 12));
    let mut r = Rule::default();
    for (&t, &w) in half.nodes.iter().zip(&half.weights) {
        let pw = w * tent_density(t);
        r.nodes.push(t);
        r.weights.push(pw);
        r.nodes.push(-t);
        r.weights.push(pw);
    }
    r
}

/// m-point Gauss rule for the discrete measure given by `fine`.
///
/// The Jacobi matrix comes from Lanczos iteration on diag(nodes) with full
/// reorthogonalization, which stays stable where moment-based methods do not.
pub fn gauss_from_discrete(fine: &Rule, m: usize) -> Rule {
    let n = fine.len();
    assert!(m >= 1 && m <= n, "need 1 <= m <= {n}");
    let mass: f64 = fine.weights.iter().sum();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut alpha = vec![0.0; m];
    let mut beta = vec![0.0; m];
    basis.push(fine.weights.iter().map(|w| (w / mass).sqrt()).collect());
    for k in 0..m {
        let q = &basis[k];
        let mut v: Vec<f64> = q.iter().zip(&fine.nodes).map(|(a, x)| a * x).collect();
        alpha[k] = dot(&v, q);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
            }
        }
        if k + 1 < m {
            let nv = dot(&v, &v).sqrt();
            beta[k + 1] = nv;
            basis.push(v.iter().map(|a| a / nv).collect());
        }
    }
    let jacobi = nalgebra::DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[i]
        } else if j == i + 1 {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compact Gauss rule for the tent density, derived from [`tent_rule`].
pub fn tent_gauss_rule(m: usize) -> Rule {
    gauss_from_discrete(&tent_rule(), m)
}
