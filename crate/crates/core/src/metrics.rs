//! Small evaluation helpers: linear classification, k-NN regression,
//! `r^2`, train/test splits and circular rank correlation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random `(train, test)` index split with `test_fraction` of the rows held out.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n - n_test);
    (idx, test)
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |r, c| x[(idx[r], c)])
}

fn with_bias(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(x.ncols(), 1.0)
}

/// One-vs-rest least-squares classifier with a bias column and a small
/// ridge penalty.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    coef: DMatrix<f64>,
    classes: Vec<usize>,
}

impl LinearClassifier {
    pub fn fit(x: &DMatrix<f64>, labels: &[usize]) -> Self {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        let xb = with_bias(x);
        let y = DMatrix::from_fn(labels.len(), classes.len(), |r, c| {
            if labels[r] == classes[c] {
                1.0
            } else {
                -1.0
            }
        });
        let mut gram = xb.transpose() * &xb;
        for i in 0..gram.nrows() {
            gram[(i, i)] += 1e-8;
        }
        let coef = gram
            .cholesky()
            .expect("ridge-regularized Gram matrix is positive definite")
            .solve(&(xb.transpose() * y));
        LinearClassifier { coef, classes }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        let scores = with_bias(x) * &self.coef;
        (0..scores.nrows())
            .map(|r| {
                let best = (0..scores.ncols())
                    .max_by(|&a, &b| scores[(r, a)].total_cmp(&scores[(r, b)]))
                    .unwrap_or(0);
                self.classes[best]
            })
            .collect()
    }
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Fits on `train` rows and reports accuracy on `test` rows.
pub fn holdout_accuracy(x: &DMatrix<f64>, labels: &[usize], train: &[usize], test: &[usize]) -> f64 {
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let yte: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let model = LinearClassifier::fit(&rows(x, train), &ytr);
    accuracy(&model.predict(&rows(x, test)), &yte)
}

/// Mean of the `k` nearest training targets (Euclidean distance).
pub fn knn_regress(train_x: &DMatrix<f64>, train_y: &DMatrix<f64>, query: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let k = k.clamp(1, train_x.nrows());
    let mut out = DMatrix::zeros(query.nrows(), train_y.ncols());
    for q in 0..query.nrows() {
        let mut d: Vec<(f64, usize)> = (0..train_x.nrows())
            .map(|i| ((train_x.row(i) - query.row(q)).norm_squared(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in &d[..k] {
            for c in 0..train_y.ncols() {
                out[(q, c)] += train_y[(i, c)] / k as f64;
            }
        }
    }
    out
}

/// Coefficient of determination averaged uniformly over output columns.
pub fn r2_score(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> f64 {
    let cols = truth.ncols();
    (0..cols)
        .map(|c| {
            let t = truth.column(c);
            let mean = t.mean();
            let ss_tot: f64 = t.iter().map(|v| (v - mean).powi(2)).sum();
            let ss_res: f64 = t.iter().zip(pred.column(c).iter()).map(|(a, b)| (a - b).powi(2)).sum();
            if ss_tot == 0.0 {
                if ss_res == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                1.0 - ss_res / ss_tot
            }
        })
        .sum::<f64>()
        / cols.max(1) as f64
}

/// Held-out `r^2` of a k-NN regressor.
pub fn holdout_r2(x: &DMatrix<f64>, y: &DMatrix<f64>, train: &[usize], test: &[usize], k: usize) -> f64 {
    let pred = knn_regress(&rows(x, train), &rows(y, train), &rows(x, test), k);
    r2_score(&rows(y, test), &pred)
}

fn uniform_scores(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut scores = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        scores[i] = std::f64::consts::TAU * (rank + 1) as f64 / n as f64;
    }
    scores
}

/// Circular rank correlation of two angle samples, in `[0, 1]`.
///
/// Angles are replaced by uniform rank scores; the result is the larger of
/// the squared mean resultant lengths of their difference and their sum,
/// so it ignores rotation and reflection.
pub fn circular_rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "samples must have equal length");
    let n = a.len() as f64;
    let (sa, sb) = (uniform_scores(a), uniform_scores(b));
    let resultant = |sign: f64| {
        let (mut c, mut s) = (0.0, 0.0);
        for (x, y) in sa.iter().zip(&sb) {
            c += (x + sign * y).cos();
            s += (x + sign * y).sin();
        }
        (c * c + s * s) / (n * n)
    };
    resultant(-1.0).max(resultant(1.0))
}
