//! Exact balanced transportation problem solver.
//!
//! Successive shortest augmenting paths with Dijkstra on reduced costs over
//! the dense bipartite residual graph. Supplies and demands are integers, so
//! every augmentation moves at least one unit and the method terminates with
//! an optimal plan. Costs must be non-negative.

#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// `flow[i * m + j]` units shipped from supply `i` to demand `j`.
    pub flow: Vec<u64>,
    pub cost: f64,
    pub total: u64,
}

/// Minimum-cost plan shipping `supply` to `demand` under `cost` (row-major,
/// `supply.len() x demand.len()`).
///
/// Panics when the totals differ or the shapes disagree.
pub fn solve(supply: &[u64], demand: &[u64], cost: &[f64]) -> TransportPlan {
    let n = supply.len();
    let m = demand.len();
    assert_eq!(cost.len(), n * m, "cost matrix shape");
    let total: u64 = supply.iter().sum();
    assert_eq!(total, demand.iter().sum::<u64>(), "unbalanced transport problem");

    let mut flow = vec![0u64; n * m];
    let mut sup = supply.to_vec();
    let mut dem = demand.to_vec();
    // potentials: rows 0..n, columns n..n+m
    let mut pot = vec![0f64; n + m];
    let mut dist = vec![0f64; n + m];
    let mut done = vec![false; n + m];
    // predecessor of a column is a row, of a row is a column
    let mut pred = vec![usize::MAX; n + m];
    let mut remaining = total;

    while remaining > 0 {
        dist.fill(f64::INFINITY);
        done.fill(false);
        pred.fill(usize::MAX);
        for i in 0..n {
            if sup[i] > 0 {
                dist[i] = 0.0;
            }
        }
        // dense Dijkstra over n + m nodes
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..n + m {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                let i = u;
                for j in 0..m {
                    let v = n + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (cost[i * m + j] + pot[i] - pot[v]).max(0.0);
                    let d = dist[u] + rc;
                    if d < dist[v] {
                        dist[v] = d;
                        pred[v] = i;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if done[i] || flow[i * m + j] == 0 {
                        continue;
                    }
                    let rc = (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                    let d = dist[u] + rc;
                    if d < dist[i] {
                        dist[i] = d;
                        pred[i] = u;
                    }
                }
            }
        }

        let target = (0..m)
            .filter(|&j| dem[j] > 0 && dist[n + j].is_finite())
            .min_by(|&a, &b| dist[n + a].total_cmp(&dist[n + b]))
            .expect("balanced problem always has an augmenting path");

        // bottleneck along the path
        let mut amount = dem[target];
        let mut v = n + target;
        loop {
            let i = pred[v];
            if pred[i] == usize::MAX {
                amount = amount.min(sup[i]);
                break;
            }
            let j = pred[i] - n;
            amount = amount.min(flow[i * m + j]);
            v = pred[i];
        }

        let mut v = n + target;
        loop {
            let i = pred[v];
            flow[i * m + (v - n)] += amount;
            if pred[i] == usize::MAX {
                sup[i] -= amount;
                break;
            }
            let j = pred[i] - n;
            flow[i * m + j] -= amount;
            v = pred[i];
        }
        dem[target] -= amount;
        remaining -= amount;

        let cap = dist[n + target];
        for v in 0..n + m {
            pot[v] += dist[v].min(cap);
        }
    }

    let cost = flow
        .iter()
        .zip(cost)
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    TransportPlan { flow, cost, total }
}
