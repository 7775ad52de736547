/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(m³)). Returns `sigma` with row `i` matched to column
/// `sigma[i]`.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let m = cost.len();
    if m == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == m), "cost matrix must be square");
    // 1-based arrays; index 0 is the virtual column
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; m];
    for j in 1..=m {
        sigma[col_owner[j] - 1] = j - 1;
    }
    sigma
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + rec(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn swaps_when_cheaper() {
        let cost = vec![vec![5.0, 1.0], vec![1.0, 5.0]];
        assert_eq!(min_cost_assignment(&cost), vec![1, 0]);
    }

    #[test]
    fn matches_brute_force_on_pseudorandom_matrices() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..m).map(|_| (0..m).map(|_| next()).collect()).collect();
                let sigma = min_cost_assignment(&cost);
                let total: f64 = sigma.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                let mut seen = sigma.clone();
                seen.sort();
                assert_eq!(seen, (0..m).collect::<Vec<_>>());
                assert!((total - brute_force(&cost)).abs() < 1e-12);
            }
        }
    }
}
