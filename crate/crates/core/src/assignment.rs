//! Dense linear assignment by the Hungarian algorithm with potentials.
//!
//! O(n^3) over an n x n cost matrix stored row-major. Costs must be finite;
//! ties may resolve to any optimal assignment.

/// Minimum-cost perfect matching: returns `perm` with row i matched to
/// column `perm[i]`.
pub fn solve_dense(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed arrays; p[j] is the row matched to column j, column 0 is
    // the virtual start of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(n: usize, cost: &[f64], perm: &[usize]) -> f64 {
        (0..n).map(|i| cost[i * n + perm[i]]).sum()
    }

    #[test]
    fn identity_on_diagonal_minimum() {
        let cost = vec![
            0.0, 5.0, 5.0, //
            5.0, 0.0, 5.0, //
            5.0, 5.0, 0.0,
        ];
        let perm = solve_dense(3, &cost);
        assert_eq!(perm, vec![0, 1, 2]);
    }

    #[test]
    fn picks_the_cheap_off_diagonal() {
        let cost = vec![
            4.0, 1.0, //
            1.0, 4.0,
        ];
        let perm = solve_dense(2, &cost);
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(total(2, &cost, &perm), 2.0);
    }

    #[test]
    fn matches_exhaustive_minimum_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for n in 2..=6usize {
            for _ in 0..40 {
                let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
                let perm = solve_dense(n, &cost);
                let got = total(n, &cost, &perm);

                let mut indices: Vec<usize> = (0..n).collect();
                let mut best = f64::INFINITY;
                permute(&mut indices, 0, &mut |p| {
                    best = best.min(total(n, &cost, p));
                });
                assert!((got - best).abs() < 1e-10, "n={n}: {got} vs {best}");
            }
        }
    }

    fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            visit(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute(items, k + 1, visit);
            items.swap(k, i);
        }
    }
}
