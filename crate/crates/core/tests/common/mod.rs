#![allow(dead_code)]

use nalgebra::DMatrix;

/// Small fixed logistic datasets: covariate rows (no intercept) and 0/1 outcome.
pub struct LogisticSet {
    pub rows: &'static [&'static [f64]],
    pub y: &'static [u8],
}

pub const LOGISTIC_SETS: [LogisticSet; 3] = [
    LogisticSet {
        rows: &[
            &[1.719], &[0.194], &[2.493], &[0.576], &[-0.223], &[0.565], &[-0.098], &[0.046], &[-1.479], &[1.354],
            &[-1.136], &[-0.721], &[1.892], &[-0.758], &[0.639], &[-0.079], &[1.043], &[-0.581], &[1.207], &[-0.18],
            &[1.14], &[-1.521], &[-0.259], &[0.402], &[0.964], &[1.921], &[1.307], &[-1.437], &[-0.038], &[-0.723],
        ],
        y: &[
            1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1, 1, 1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0,
        ],
    },
    LogisticSet {
        rows: &[
            &[0.0, 43.953], &[0.0, 50.976], &[1.0, 71.259], &[0.0, 45.295], &[0.0, 42.332],
            &[0.0, 51.254], &[0.0, 55.79], &[1.0, 50.674], &[1.0, 59.912], &[0.0, 41.42],
            &[1.0, 59.366], &[1.0, 57.229], &[1.0, 52.098], &[0.0, 64.919], &[0.0, 61.512],
            &[0.0, 34.84], &[0.0, 35.891], &[1.0, 51.334], &[0.0, 43.57], &[0.0, 60.945],
            &[0.0, 49.461], &[1.0, 52.77], &[0.0, 60.207], &[0.0, 52.277], &[0.0, 53.377],
            &[0.0, 63.073], &[0.0, 43.674], &[1.0, 21.765], &[0.0, 59.831], &[0.0, 54.337],
            &[0.0, 53.062], &[0.0, 61.071], &[0.0, 53.229], &[0.0, 56.228], &[1.0, 54.667],
            &[0.0, 46.138], &[1.0, 32.785], &[0.0, 66.965], &[1.0, 35.776], &[0.0, 50.992],
        ],
        y: &[
            0, 0, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 1,
            1, 0, 0, 1, 1, 0,
        ],
    },
    LogisticSet {
        rows: &[
            &[-0.69, 0.352, 0.525], &[-0.206, -0.241, 0.936], &[-0.634, -0.205, 0.337], &[-1.53, 0.115, 0.836],
            &[1.269, 0.144, -0.047], &[-0.728, 0.38, 1.339], &[0.664, 0.768, 0.044], &[-0.88, 0.424, -0.799],
            &[0.28, 1.304, 1.436], &[-1.746, -0.979, 1.582], &[0.368, 1.204, 0.506], &[-1.669, -2.077, 2.096],
            &[-0.306, -0.077, 0.466], &[0.035, 1.041, -0.929], &[0.589, -0.403, 0.162], &[-0.798, -0.563, -0.644],
            &[-1.253, 0.293, 0.007], &[1.478, 0.772, -0.107], &[-0.754, 0.49, -0.038], &[1.118, -1.273, -0.133],
            &[-0.411, -0.894, 0.258], &[-1.074, 0.75, -1.254], &[0.191, 1.361, 0.771], &[0.681, -0.01, -0.4],
            &[0.33, -1.501, 0.663],
        ],
        y: &[0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0, 1, 0],
    },
];

/// Design matrix with a leading intercept column, and the outcome as f64.
pub fn design(set: &LogisticSet) -> (DMatrix<f64>, Vec<f64>) {
    let p = set.rows[0].len() + 1;
    let x = DMatrix::from_fn(set.rows.len(), p, |i, j| if j == 0 { 1.0 } else { set.rows[i][j - 1] });
    (x, set.y.iter().map(|&v| f64::from(v)).collect())
}

/// Brute-force AUROC: share of (positive, negative) pairs ranked correctly, ties count half.
pub fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// Fairness gaps from explicit contingency counts: (dp, tpr, fpr), rates as pos / n.
pub fn counted_gaps(group: &[u8], label: &[u8], pred: &[u8]) -> (Option<f64>, Option<f64>, Option<f64>) {
    // cell[g][y][p]
    let mut cell = [[[0usize; 2]; 2]; 2];
    for i in 0..group.len() {
        cell[group[i] as usize][label[i] as usize][pred[i] as usize] += 1;
    }
    let rate = |pos: usize, n: usize| (n > 0).then(|| pos as f64 / n as f64);
    let gap = |a: Option<f64>, b: Option<f64>| Some((a? - b?).abs());
    let dp_rate = |g: usize| rate(cell[g][0][1] + cell[g][1][1], cell[g][0][0] + cell[g][0][1] + cell[g][1][0] + cell[g][1][1]);
    let y_rate = |g: usize, y: usize| rate(cell[g][y][1], cell[g][y][0] + cell[g][y][1]);
    (
        gap(dp_rate(1), dp_rate(0)),
        gap(y_rate(1, 1), y_rate(0, 1)),
        gap(y_rate(1, 0), y_rate(0, 0)),
    )
}

/// Plain gradient ascent on the mean log-likelihood with a 1/L step, run until
/// the gradient vanishes to machine precision.
pub fn gradient_descent_logistic(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let xtx = x.transpose() * x;
    let lipschitz = 0.25 * xtx.symmetric_eigenvalues().max() / n as f64;
    let step = 1.0 / lipschitz;
    let mut beta = vec![0.0; p];
    for _ in 0..5_000_000 {
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
            let r = y[i] - 1.0 / (1.0 + (-eta).exp());
            for (j, g) in grad.iter_mut().enumerate() {
                *g += x[(i, j)] * r / n as f64;
            }
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        for j in 0..p {
            beta[j] += step * grad[j];
        }
        if norm < 1e-13 {
            break;
        }
    }
    beta
}
