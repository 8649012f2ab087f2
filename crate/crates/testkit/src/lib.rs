//! Brute-force reference implementations used as oracles by the test suites.
//!
//! Everything in this crate is deliberately independent of the production
//! code paths: linear systems are solved by plain normal equations with
//! Gaussian elimination, distribution functions by adaptive numerical
//! integration, and clustering by exhaustive recomputation at every step.
//! Slow and simple on purpose.

/// Solves an ordinary least-squares problem through the normal equations
/// `X'X b = X'y` with Gaussian elimination. Returns `None` when the system
/// is singular to working precision.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    assert_eq!(n, y.len());
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            xty[j] += x[i][j] * y[i];
            for k in 0..p {
                xtx[j][k] += x[i][j] * x[i][k];
            }
        }
    }
    solve_linear(&mut xtx, &mut xty)
}

/// Gaussian elimination with partial pivoting on an augmented system.
/// Consumes `a` and `b`; returns the solution vector.
pub fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let p = b.len();
    for col in 0..p {
        let mut pivot = col;
        for row in col + 1..p {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..p {
            let factor = a[row][col] / a[col][col];
            for k in col..p {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut out = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for k in col + 1..p {
            acc -= a[col][k] * out[k];
        }
        out[col] = acc / a[col][col];
    }
    Some(out)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
}

/// Regularized incomplete beta `I_x(a, b)` by direct quadrature.
///
/// Uses the substitution `t = sin^2(theta)` so the integrand stays bounded
/// for `a, b >= 1/2`, and takes the ratio of the partial to the complete
/// integral so no gamma function is needed.
pub fn inc_beta_quadrature(a: f64, b: f64, x: f64) -> f64 {
    assert!(a >= 0.5 && b >= 0.5, "oracle valid for a,b >= 1/2");
    assert!((0.0..=1.0).contains(&x));
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let g = |theta: f64| {
        let s = theta.sin();
        let c = theta.cos();
        s.powf(2.0 * a - 1.0) * c.powf(2.0 * b - 1.0)
    };
    let cut = x.sqrt().asin();
    let half_pi = std::f64::consts::FRAC_PI_2;
    // normalize so the complete integral is O(1); the absolute Simpson
    // tolerance then acts as a relative tolerance on the ratio
    let rough = simpson_adaptive(&g, 0.0, half_pi, 1e-8).max(1e-300);
    let gn = |theta: f64| g(theta) / rough;
    let partial = simpson_adaptive(&gn, 0.0, cut, 5e-14);
    let total = partial + simpson_adaptive(&gn, cut, half_pi, 5e-14);
    (partial / total).clamp(0.0, 1.0)
}

/// Two-tailed Student-t p-value through the quadrature beta oracle.
pub fn t_two_tailed_quadrature(t: f64, df: f64) -> f64 {
    inc_beta_quadrature(df / 2.0, 0.5, df / (df + t * t))
}

/// Upper-tail F probability through the quadrature beta oracle.
pub fn f_sf_quadrature(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    inc_beta_quadrature(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))
}

/// Textbook descriptive statistics: mean, sample sd, adjusted
/// Fisher-Pearson skewness and sample excess kurtosis, each computed
/// directly from its definition.
pub fn descriptives_naive(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m = |k: i32| xs.iter().map(|x| (x - mean).powi(k)).sum::<f64>() / n;
    let m2 = m(2);
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let g1 = m(3) / m2.powf(1.5);
    let skew = g1 * (n * (n - 1.0)).sqrt() / (n - 2.0);
    let g2 = m(4) / (m2 * m2) - 3.0;
    let kurt = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * g2 + 6.0);
    (mean, sd, skew, kurt)
}

/// Pearson r straight from the product-moment definition.
pub fn pearson_r_naive(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// Cronbach's alpha evaluated directly from its formula with sample
/// variances. Rows are respondents, columns are items.
pub fn cronbach_naive(matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len() as f64;
    let k = matrix[0].len();
    let var = |vals: &[f64]| {
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0)
    };
    let mut item_var_sum = 0.0;
    for j in 0..k {
        let col: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
        item_var_sum += var(&col);
    }
    let totals: Vec<f64> = matrix.iter().map(|row| row.iter().sum()).collect();
    let kf = k as f64;
    let _ = n;
    kf / (kf - 1.0) * (1.0 - item_var_sum / var(&totals))
}

/// One step of exhaustive Ward agglomeration: the merge cost of two point
/// sets is the increase in total within-cluster sum of squares.
fn ward_cost(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dim = a[0].len();
    let centroid = |pts: &[Vec<f64>]| -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for p in pts {
            for d in 0..dim {
                c[d] += p[d];
            }
        }
        for v in c.iter_mut() {
            *v /= pts.len() as f64;
        }
        c
    };
    let ca = centroid(a);
    let cb = centroid(b);
    let dist2: f64 = ca.iter().zip(&cb).map(|(u, v)| (u - v) * (u - v)).sum();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    na * nb / (na + nb) * dist2
}

/// Exhaustive Ward agglomeration: recomputes every pairwise merge cost from
/// the raw points at each step. Leaves are numbered `0..n-1`; the cluster
/// created by merge `t` gets id `n + t`. Ties broken by the lowest
/// `(min_id, max_id)` pair. Returns `(left, right, cost)` per merge.
pub fn ward_merges_bruteforce(points: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<Vec<f64>>)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, vec![p.clone()]))
        .collect();
    let mut merges = Vec::new();
    let mut next_id = n;
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let cost = ward_cost(&clusters[i].1, &clusters[j].1);
                let ida = clusters[i].0.min(clusters[j].0);
                let idb = clusters[i].0.max(clusters[j].0);
                let better = match best {
                    None => true,
                    Some((c, a, b)) => {
                        cost < c || (cost == c && (ida, idb) < (a, b))
                    }
                };
                if better {
                    best = Some((cost, ida, idb));
                }
            }
        }
        let (cost, ida, idb) = best.unwrap();
        let pos_a = clusters.iter().position(|(id, _)| *id == ida).unwrap();
        let pos_b = clusters.iter().position(|(id, _)| *id == idb).unwrap();
        let (keep, remove) = (pos_a.min(pos_b), pos_a.max(pos_b));
        let removed = clusters.remove(remove);
        let mut merged_points = clusters[keep].1.clone();
        merged_points.extend(removed.1);
        clusters[keep] = (next_id, merged_points);
        merges.push((ida, idb, cost));
        next_id += 1;
    }
    merges
}

/// Deterministic 64-bit mixer for seeding test RNG streams.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Small deterministic uniform generator on [0,1) for oracle-side inputs.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493))
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.0)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
