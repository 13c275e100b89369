//! Enumeration of integer compositions, used for simplex grids and for
//! count-vector (multiset) classes.

/// `C(n, k)` as `u128`, saturating.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// Number of vectors of `parts` nonnegative integers summing to `total`.
pub fn composition_count(total: usize, parts: usize) -> u128 {
    if parts == 0 {
        return if total == 0 { 1 } else { 0 };
    }
    binomial((total + parts - 1) as u64, (parts - 1) as u64)
}

/// All vectors of `parts` nonnegative integers summing to `total`, in
/// reverse-lexicographic order: `(total, 0, ..)` first, `(.., 0, total)` last.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; parts];
    fill(total, 0, &mut cur, &mut out);
    out
}

fn fill(remaining: usize, pos: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    if cur.is_empty() {
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k;
        fill(remaining - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}
