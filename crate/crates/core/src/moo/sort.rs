use super::dominates;

/// Deb's fast non-dominated sort over minimize-oriented objective vectors.
/// Returns fronts of indices; front 0 is the non-dominated set.
pub fn fast_non_dominated_sort<R: AsRef<[f64]>>(objectives: &[R]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            let (a, b) = (objectives[p].as_ref(), objectives[q].as_ref());
            if dominates(a, b) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(b, a) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (indices into `objectives`).
/// Boundary members per objective get `+inf`; zero-range objectives add 0.
pub fn crowding_distance<R: AsRef<[f64]>>(objectives: &[R], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0; n];
    if n == 0 {
        return distance;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = objectives[front[0]].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let value = |i: usize| objectives[front[i]].as_ref()[k];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let i = order[w];
            if distance[i].is_finite() {
                distance[i] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    distance
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    /// Peels non-dominated layers by brute force.
    fn brute_force_ranks(points: &[Vec<f64>]) -> Vec<usize> {
        let n = points.len();
        let mut rank = vec![usize::MAX; n];
        let mut level = 0;
        while rank.contains(&usize::MAX) {
            let remaining: Vec<usize> = (0..n).filter(|&i| rank[i] == usize::MAX).collect();
            let layer: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
                .collect();
            for i in layer {
                rank[i] = level;
            }
            level += 1;
        }
        rank
    }

    fn ranks_from_fronts(fronts: &[Vec<usize>], n: usize) -> Vec<usize> {
        let mut rank = vec![usize::MAX; n];
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                rank[i] = r;
            }
        }
        rank
    }

    #[test]
    fn chain_and_antichain() {
        let chain = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert_eq!(ranks_from_fronts(&fast_non_dominated_sort(&chain), 3), vec![0, 1, 2]);
        let anti = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert_eq!(fast_non_dominated_sort(&anti), vec![vec![0, 1]]);
    }

    #[test]
    fn random_cloud_matches_brute_force() {
        let mut r = rng::rng_from(12);
        let pts: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| r.gen::<f64>()).collect()).collect();
        assert_eq!(ranks_from_fronts(&fast_non_dominated_sort(&pts), 200), brute_force_ranks(&pts));
    }

    #[test]
    fn crowding_examples() {
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(crowding_distance(&two, &[0, 1]).iter().all(|d| d.is_infinite()));
        let three = vec![vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]];
        let d = crowding_distance(&three, &[0, 1, 2]);
        assert_eq!(d[1], 2.0);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        let same = vec![vec![1.0, 1.0]; 4];
        let d = crowding_distance(&same, &[0, 1, 2, 3]);
        assert_eq!(d.iter().filter(|v| v.is_infinite()).count(), 2);
        assert_eq!(d.iter().filter(|&&v| v == 0.0).count(), 2);
    }

    proptest! {
        #[test]
        fn sort_equals_brute_force(
            pts in prop::collection::vec(prop::collection::vec(0u8..6, 2), 1..60),
        ) {
            // coarse integer grid produces plenty of ties and duplicates
            let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p.into_iter().map(f64::from).collect()).collect();
            let n = pts.len();
            prop_assert_eq!(ranks_from_fronts(&fast_non_dominated_sort(&pts), n), brute_force_ranks(&pts));
        }
    }
}
