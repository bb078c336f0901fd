//! Iterative enumeration of multi-indices `k ∈ Z_+^d`.

/// Calls `f` on every composition of `m` into `d` non-negative parts, in
/// lexicographic order of the first `d - 1` parts.
pub fn for_each_composition<F: FnMut(&[usize])>(m: usize, d: usize, mut f: F) {
    if d == 0 {
        if m == 0 {
            f(&[]);
        }
        return;
    }
    let mut k = vec![0usize; d];
    let mut head_sum = 0usize;
    loop {
        k[d - 1] = m - head_sum;
        f(&k);
        // odometer over the first d - 1 entries, constrained to head_sum ≤ m
        let mut i = d - 1;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if head_sum < m {
                k[i] += 1;
                head_sum += 1;
                break;
            }
            head_sum -= k[i];
            k[i] = 0;
        }
    }
}

/// All compositions of `m` into `d` parts.
pub fn compositions(m: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_composition(m, d, |k| out.push(k.to_vec()));
    out
}
