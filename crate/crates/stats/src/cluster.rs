//! Z-normalization and agglomerative hierarchical clustering with Ward's
//! criterion.
//!
//! The agglomeration keeps a full pairwise distance table and applies the
//! Lance-Williams update for Ward linkage, starting from squared Euclidean
//! distances; the tracked quantity is twice the within-cluster variance
//! increase of a merge, so recorded heights are `d/2`. O(n^3) over the
//! whole run, which is plenty for cohort-sized inputs. Equal merge costs
//! break toward the lowest `(id, id)` pair, so the tree is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::StatError;

/// Rows of observations with named feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Column-standardizes to mean 0, sd 1 (n-1 denominator). A constant
/// column is an error naming the feature.
pub fn znorm(matrix: &FeatureMatrix) -> Result<FeatureMatrix, StatError> {
    let n = matrix.n();
    if n < 2 {
        return Err(StatError::TooFewObservations { needed: 2, got: n });
    }
    let mut rows = matrix.rows.clone();
    for j in 0..matrix.feature_names.len() {
        let col = matrix.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        if var == 0.0 {
            return Err(StatError::ConstantInput(matrix.feature_names[j].clone()));
        }
        let sd = var.sqrt();
        for row in rows.iter_mut() {
            row[j] = (row[j] - mean) / sd;
        }
    }
    Ok(FeatureMatrix { feature_names: matrix.feature_names.clone(), rows })
}

/// One merge of the dendrogram. Leaves are `0..n-1`; the cluster created
/// by merge `t` has id `n + t`. Height is the increase in total
/// within-cluster sum of squares caused by the merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Flat clustering cut from the dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub k: usize,
    /// Cluster id per input row; ids `0..k` ordered by descending cluster
    /// size (ties toward the cluster containing the lowest row index).
    pub labels: Vec<usize>,
    /// Mean of the input rows per cluster, indexed by cluster id.
    pub centroids: Vec<Vec<f64>>,
    pub dendrogram: Vec<Merge>,
}

pub fn ward_cluster(matrix: &FeatureMatrix, k: usize) -> Result<Clustering, StatError> {
    let n = matrix.n();
    if k < 1 || k > n {
        return Err(StatError::Domain(format!("k must be in 1..={n}, got {k}")));
    }
    if n == 0 {
        return Err(StatError::TooFewObservations { needed: 1, got: 0 });
    }

    // active clusters: (id, size); dist[i][j] tracks the Lance-Williams
    // quantity (2x merge cost) between active entries i and j
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<f64> = vec![1.0; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = matrix.rows[i]
                .iter()
                .zip(&matrix.rows[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dist[i][j] = d2;
            dist[j][i] = d2;
        }
    }

    let mut dendrogram = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        // find the cheapest merge among active entries
        let mut best: Option<(f64, usize, usize)> = None; // (cost, slot_a, slot_b)
        for (ai, &a) in active.iter().enumerate() {
            for &b in active.iter().skip(ai + 1) {
                let cost = dist[a][b];
                let pair = (ids[a].min(ids[b]), ids[a].max(ids[b]));
                let better = match best {
                    None => true,
                    Some((c, sa, sb)) => {
                        let best_pair = (ids[sa].min(ids[sb]), ids[sa].max(ids[sb]));
                        cost < c || (cost == c && pair < best_pair)
                    }
                };
                if better {
                    best = Some((cost, a, b));
                }
            }
        }
        let (cost, a, b) = best.expect("at least two active clusters");
        let (id_a, id_b) = (ids[a].min(ids[b]), ids[a].max(ids[b]));
        let merged_size = sizes[a] + sizes[b];
        dendrogram.push(Merge {
            left: id_a,
            right: id_b,
            height: cost / 2.0,
            size: merged_size as usize,
        });

        // Lance-Williams update for Ward linkage into slot a
        for &other in &active {
            if other == a || other == b {
                continue;
            }
            let sk = sizes[other];
            let updated = ((sizes[a] + sk) * dist[a][other] + (sizes[b] + sk) * dist[b][other]
                - sk * cost)
                / (merged_size + sk);
            dist[a][other] = updated;
            dist[other][a] = updated;
        }
        ids[a] = n + step;
        sizes[a] = merged_size;
        active.retain(|&slot| slot != b);
    }

    // cut: apply the first n-k merges through union-find over leaf rows
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (step, merge) in dendrogram.iter().take(n - k).enumerate() {
        let new_id = n + step;
        let ra = find(&mut parent, merge.left);
        let rb = find(&mut parent, merge.right);
        parent[ra] = new_id;
        parent[rb] = new_id;
    }
    let mut root_of_row: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();

    // order clusters by descending size, ties toward lowest member row
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (row, root) in root_of_row.iter().enumerate() {
        groups.entry(*root).or_default().push(row);
    }
    let mut ordered: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.1[0].cmp(&b.1[0])));

    let dim = matrix.feature_names.len();
    let mut labels = vec![0usize; n];
    let mut centroids = Vec::with_capacity(k);
    for (cluster_id, (_, members)) in ordered.into_iter().enumerate() {
        let mut centroid = vec![0.0; dim];
        for &row in &members {
            labels[row] = cluster_id;
            for d in 0..dim {
                centroid[d] += matrix.rows[row][d];
            }
        }
        for v in centroid.iter_mut() {
            *v /= members.len() as f64;
        }
        centroids.push(centroid);
    }
    root_of_row.clear();

    Ok(Clustering { k, labels, centroids, dendrogram })
}

/// Total within-cluster sum of squares of a flat clustering.
pub fn within_cluster_ss(matrix: &FeatureMatrix, labels: &[usize], k: usize) -> f64 {
    let dim = matrix.feature_names.len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (row, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for d in 0..dim {
            sums[c][d] += matrix.rows[row][d];
        }
    }
    let mut total = 0.0;
    for (row, &c) in labels.iter().enumerate() {
        for d in 0..dim {
            let mean = sums[c][d] / counts[c] as f64;
            total += (matrix.rows[row][d] - mean).powi(2);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        FeatureMatrix {
            feature_names: (0..dim).map(|j| format!("f{j}")).collect(),
            rows,
        }
    }

    #[test]
    fn znorm_basic_column() {
        let z = znorm(&matrix(vec![vec![1.0], vec![2.0], vec![3.0]])).unwrap();
        assert_eq!(z.rows, vec![vec![-1.0], vec![0.0], vec![1.0]]);
    }

    #[test]
    fn znorm_is_idempotent_and_standardizes() {
        let mut rng = readtrace_testkit::TestRng::new(3);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|_| vec![rng.normal() * 4.0 + 2.0, rng.uniform() * 100.0]).collect();
        let m = matrix(rows);
        let z = znorm(&m).unwrap();
        for j in 0..2 {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (col.len() as f64 - 1.0))
                .sqrt();
            assert!(mean.abs() < 1e-12);
            assert!((sd - 1.0).abs() < 1e-12);
        }
        let zz = znorm(&z).unwrap();
        for (a, b) in z.rows.iter().flatten().zip(zz.rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn znorm_rejects_constant_feature() {
        let err = znorm(&matrix(vec![vec![1.0, 5.0], vec![2.0, 5.0]])).unwrap_err();
        assert_eq!(err, StatError::ConstantInput("f1".to_string()));
    }

    #[test]
    fn coincident_points_merge_first() {
        let m = matrix(vec![
            vec![0.0, 0.0],
            vec![5.0, 5.0],
            vec![0.0, 0.0],
            vec![9.0, 1.0],
        ]);
        let clustering = ward_cluster(&m, 1).unwrap();
        let first = clustering.dendrogram[0];
        assert_eq!((first.left, first.right), (0, 2));
        assert_eq!(first.height, 0.0);
    }

    #[test]
    fn two_distant_pairs_split_at_k2() {
        let m = matrix(vec![
            vec![0.0, 0.0],
            vec![0.3, 0.0],
            vec![10.0, 10.0],
            vec![10.3, 10.0],
        ]);
        let clustering = ward_cluster(&m, 2).unwrap();
        assert_eq!(clustering.labels[0], clustering.labels[1]);
        assert_eq!(clustering.labels[2], clustering.labels[3]);
        assert_ne!(clustering.labels[0], clustering.labels[2]);
    }

    #[test]
    fn matches_bruteforce_oracle_on_small_instances() {
        let mut rng = readtrace_testkit::TestRng::new(77);
        for _ in 0..60 {
            let n = 3 + rng.below(6);
            let dim = 1 + rng.below(3);
            let rows: Vec<Vec<f64>> =
                (0..n).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
            let m = matrix(rows.clone());
            let clustering = ward_cluster(&m, 1).unwrap();
            let oracle = readtrace_testkit::ward_merges_bruteforce(&rows);
            for (got, want) in clustering.dendrogram.iter().zip(&oracle) {
                assert_eq!((got.left, got.right), (want.0, want.1));
                assert!(
                    (got.height - want.2).abs() < 1e-8 * (1.0 + want.2),
                    "height {} vs {}",
                    got.height,
                    want.2
                );
            }
        }
    }

    #[test]
    fn heights_are_non_decreasing() {
        let mut rng = readtrace_testkit::TestRng::new(123);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let clustering = ward_cluster(&matrix(rows), 1).unwrap();
        for pair in clustering.dendrogram.windows(2) {
            assert!(pair[1].height >= pair[0].height - 1e-12);
        }
    }

    #[test]
    fn wss_never_increases_with_k() {
        let mut rng = readtrace_testkit::TestRng::new(321);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let m = matrix(rows);
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let clustering = ward_cluster(&m, k).unwrap();
            let wss = within_cluster_ss(&m, &clustering.labels, k);
            assert!(wss <= prev + 1e-9, "wss rose from {prev} to {wss} at k={k}");
            prev = wss;
        }
    }

    #[test]
    fn labels_ordered_by_cluster_size() {
        let m = matrix(vec![
            vec![0.0],
            vec![0.1],
            vec![0.2],
            vec![10.0],
            vec![10.1],
            vec![50.0],
        ]);
        let clustering = ward_cluster(&m, 3).unwrap();
        // biggest cluster (3 members) must be id 0, singleton id 2
        assert_eq!(clustering.labels[0], 0);
        assert_eq!(clustering.labels[1], 0);
        assert_eq!(clustering.labels[2], 0);
        assert_eq!(clustering.labels[3], 1);
        assert_eq!(clustering.labels[4], 1);
        assert_eq!(clustering.labels[5], 2);
        assert_eq!(clustering.centroids[2], vec![50.0]);
    }

    #[test]
    fn permuting_rows_permutes_labels() {
        let rows = vec![
            vec![0.0, 1.0],
            vec![0.2, 0.9],
            vec![8.0, 8.0],
            vec![8.1, 8.2],
            vec![4.0, 4.0],
        ];
        let m = matrix(rows.clone());
        let c1 = ward_cluster(&m, 2).unwrap();
        let perm = [4usize, 2, 0, 3, 1];
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let c2 = ward_cluster(&matrix(permuted), 2).unwrap();
        // same partition, modulo cluster relabeling
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                let together_1 = c1.labels[perm[i]] == c1.labels[perm[j]];
                let together_2 = c2.labels[i] == c2.labels[j];
                assert_eq!(together_1, together_2);
            }
        }
    }

    #[test]
    fn k_bounds_are_enforced() {
        let m = matrix(vec![vec![0.0], vec![1.0]]);
        assert!(ward_cluster(&m, 3).is_err());
        assert!(ward_cluster(&m, 0).is_err());
        let both = ward_cluster(&m, 2).unwrap();
        assert_eq!(both.labels.len(), 2);
        assert_ne!(both.labels[0], both.labels[1]);
    }
}
