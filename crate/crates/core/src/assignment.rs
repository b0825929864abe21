//! Square assignment problems used for column and component matching.

/// Minimum-cost perfect assignment (Hungarian method, O(n³)).
/// Returns `assign[row] = column`.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-indexed potentials, column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
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
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Row-by-row greedy assignment on the globally cheapest remaining pair.
pub fn greedy(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (cost[i][j], i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut assign = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, i, j) in pairs {
        if assign[i] == usize::MAX && !taken[j] {
            assign[i] = j;
            taken[j] = true;
        }
    }
    assign
}

/// Assignment minimizing the largest cost used. Ties are broken by total cost.
pub fn bottleneck(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(cost, levels[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let cap = levels[lo];
    let masked: Vec<Vec<f64>> = cost
        .iter()
        .map(|r| {
            r.iter()
                .map(|&c| if c <= cap { c } else { 1e300 })
                .collect()
        })
        .collect();
    hungarian(&masked)
}

fn perfect_matching(cost: &[Vec<f64>], cap: f64) -> Option<Vec<usize>> {
    let n = cost.len();
    let mut match_col = vec![usize::MAX; n];
    fn augment(
        i: usize,
        cost: &[Vec<f64>],
        cap: f64,
        seen: &mut [bool],
        match_col: &mut [usize],
    ) -> bool {
        for j in 0..cost.len() {
            if cost[i][j] <= cap && !seen[j] {
                seen[j] = true;
                if match_col[j] == usize::MAX || augment(match_col[j], cost, cap, seen, match_col) {
                    match_col[j] = i;
                    return true;
                }
            }
        }
        false
    }
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, cost, cap, &mut seen, &mut match_col) {
            return None;
        }
    }
    let mut assign = vec![0; n];
    for (j, &i) in match_col.iter().enumerate() {
        assign[i] = j;
    }
    Some(assign)
}

pub fn assignment_cost(cost: &[Vec<f64>], assign: &[usize]) -> f64 {
    assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}
