//! Transportation simplex (the network simplex specialised to a complete
//! bipartite graph) for balanced problems with floating-point masses.

/// Optimal plan for moving `supply` onto `demand` at unit costs `cost(i, j)`.
///
/// Both mass vectors must be strictly positive and have (numerically) equal
/// totals. Returns the total cost and the dense plan.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> (f64, Vec<Vec<f64>>) {
    let m = supply.len();
    let n = demand.len();
    let c: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| cost(i, j)).collect()).collect();
    let mut flow = vec![vec![0.0; n]; m];
    if m == 1 || n == 1 {
        for i in 0..m {
            for j in 0..n {
                flow[i][j] = if m == 1 { demand[j] } else { supply[i] };
            }
        }
        return (total(&flow, &c), flow);
    }

    let mut basic = vec![vec![false; n]; m];
    north_west_corner(supply, demand, &mut flow, &mut basic);

    let max_cost = c.iter().flatten().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let tol = 1e-12 * (1.0 + max_cost);
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let max_iter = 20 * (m * n).pow(2) + 100;
    for _ in 0..max_iter {
        potentials(&c, &basic, &mut u, &mut v);
        // Bland's rule: first improving cell in row-major order.
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| !basic[i][j] && c[i][j] - u[i] - v[j] < -tol);
        let Some((ei, ej)) = entering else {
            return (total(&flow, &c), flow);
        };
        let path = tree_path(&basic, ei, ej);
        // path alternates: cells at even positions lose mass, odd positions gain.
        let mut theta = f64::INFINITY;
        for (k, &(i, j)) in path.iter().enumerate() {
            if k % 2 == 0 {
                theta = theta.min(flow[i][j]);
            }
        }
        let leaving = path
            .iter()
            .enumerate()
            .filter(|(k, &(i, j))| k % 2 == 0 && flow[i][j] <= theta)
            .map(|(_, &cell)| cell)
            .min()
            .expect("cycle has a decreasing cell");
        for (k, &(i, j)) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[i][j] = (flow[i][j] - theta).max(0.0);
            } else {
                flow[i][j] += theta;
            }
        }
        flow[ei][ej] += theta;
        flow[leaving.0][leaving.1] = 0.0;
        basic[leaving.0][leaving.1] = false;
        basic[ei][ej] = true;
    }
    // Bland's rule rules out cycling; reaching here means numerical trouble,
    // and the current plan is still feasible.
    log::warn!("transportation simplex hit its iteration limit");
    (total(&flow, &c), flow)
}

fn total(flow: &[Vec<f64>], c: &[Vec<f64>]) -> f64 {
    flow.iter().zip(c).map(|(fr, cr)| fr.iter().zip(cr).map(|(f, c)| f * c).sum::<f64>()).sum()
}

fn north_west_corner(supply: &[f64], demand: &[f64], flow: &mut [Vec<f64>], basic: &mut [Vec<bool>]) {
    let (m, n) = (supply.len(), demand.len());
    let mut rs = supply.to_vec();
    let mut rd = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        if i == m - 1 && j == n - 1 {
            // absorb rounding in the last cell
            flow[i][j] = rs[i].max(rd[j]).max(0.0);
            basic[i][j] = true;
            break;
        }
        let x = rs[i].min(rd[j]).max(0.0);
        flow[i][j] = x;
        basic[i][j] = true;
        rs[i] -= x;
        rd[j] -= x;
        if j == n - 1 {
            i += 1;
        } else if i == m - 1 {
            j += 1;
        } else if rs[i] <= rd[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
}

fn potentials(c: &[Vec<f64>], basic: &[Vec<bool>], u: &mut [f64], v: &mut [f64]) {
    let (m, n) = (u.len(), v.len());
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; n];
    u[0] = 0.0;
    row_done[0] = true;
    let mut stack = vec![(true, 0usize)];
    while let Some((is_row, k)) = stack.pop() {
        if is_row {
            for j in 0..n {
                if basic[k][j] && !col_done[j] {
                    v[j] = c[k][j] - u[k];
                    col_done[j] = true;
                    stack.push((false, j));
                }
            }
        } else {
            for i in 0..m {
                if basic[i][k] && !row_done[i] {
                    u[i] = c[i][k] - v[k];
                    row_done[i] = true;
                    stack.push((true, i));
                }
            }
        }
    }
}

/// Basic cells on the tree path from row `ri` to column `cj`, in order.
fn tree_path(basic: &[Vec<bool>], ri: usize, cj: usize) -> Vec<(usize, usize)> {
    let (m, n) = (basic.len(), basic[0].len());
    // node ids: rows 0..m, columns m..m+n
    let mut parent = vec![usize::MAX; m + n];
    let mut seen = vec![false; m + n];
    let mut queue = std::collections::VecDeque::new();
    seen[ri] = true;
    queue.push_back(ri);
    while let Some(node) = queue.pop_front() {
        if node == m + cj {
            break;
        }
        if node < m {
            for j in 0..n {
                if basic[node][j] && !seen[m + j] {
                    seen[m + j] = true;
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && !seen[i] {
                    seen[i] = true;
                    parent[i] = node;
                    queue.push_back(i);
                }
            }
        }
    }
    let mut nodes = vec![m + cj];
    while *nodes.last().unwrap() != ri {
        let p = parent[*nodes.last().unwrap()];
        assert!(p != usize::MAX, "basis is not a spanning tree");
        nodes.push(p);
    }
    nodes.reverse();
    nodes
        .windows(2)
        .map(|w| if w[0] < m { (w[0], w[1] - m) } else { (w[1], w[0] - m) })
        .collect()
}
