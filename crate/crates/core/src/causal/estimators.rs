use super::CausalDataset;
use crate::error::Result;
use crate::learners::{fit_logistic_classifier, BaseLearner, FeatureMatrix};

/// Propensity scores are clipped into this interval.
pub const PROPENSITY_CLIP: (f64, f64) = (0.01, 0.99);

/// Logistic regression of treatment on the confounders, clipped. Separable
/// data keep the last iterate, so scores saturate and land on the clip bounds.
pub fn fit_propensity(x: &FeatureMatrix, t: &[u8]) -> Result<Vec<f64>> {
    let model = fit_logistic_classifier(x, t)?;
    Ok(model
        .predict_proba(x)?
        .into_iter()
        .map(|e| e.clamp(PROPENSITY_CLIP.0, PROPENSITY_CLIP.1))
        .collect())
}

/// Self-normalized inverse probability weighting with the given propensities.
pub fn ipw_ate_with(ds: &CausalDataset, e: &[f64]) -> Result<f64> {
    if e.len() != ds.len() {
        return Err(crate::error::Error::LengthMismatch {
            left: e.len(),
            right: ds.len(),
        });
    }
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for ((&ti, &yi), &ei) in ds.t.iter().zip(&ds.y).zip(e) {
        if ti == 1 {
            let w = 1.0 / ei;
            num1 += w * yi;
            den1 += w;
        } else {
            let w = 1.0 / (1.0 - ei);
            num0 += w * yi;
            den0 += w;
        }
    }
    Ok(num1 / den1 - num0 / den0)
}

/// Hajek IPW with a fitted logistic propensity model.
pub fn ipw_ate(ds: &CausalDataset) -> Result<f64> {
    let e = fit_propensity(&ds.x, &ds.t)?;
    ipw_ate_with(ds, &e)
}

/// Difference of arm means, ignoring confounding.
pub fn naive_difference(ds: &CausalDataset) -> f64 {
    let mean = |arm: u8| {
        let v: Vec<f64> = (0..ds.len()).filter(|&i| ds.t[i] == arm).map(|i| ds.y[i]).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    mean(1) - mean(0)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn select(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// Distinct model seeds derived from one estimator seed.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// One model of y on (x, t); ATE = mean of mu(x, 1) - mu(x, 0).
pub fn s_learner(ds: &CausalDataset, base: &BaseLearner, seed: u64) -> Result<f64> {
    let t: Vec<f64> = ds.t.iter().map(|&v| f64::from(v)).collect();
    let xt = ds.x.with_column("treatment", &t)?;
    let model = base.fit(&xt, &ds.y, sub_seed(seed, 1))?;
    let on = ds.x.with_column("treatment", &vec![1.0; ds.len()])?;
    let off = ds.x.with_column("treatment", &vec![0.0; ds.len()])?;
    let (m1, m0) = (model.predict(&on)?, model.predict(&off)?);
    Ok(mean(&m1) - mean(&m0))
}

struct ArmModels {
    treated: Vec<usize>,
    control: Vec<usize>,
    mu1: Vec<f64>,
    mu0: Vec<f64>,
}

fn arm_models(ds: &CausalDataset, base: &BaseLearner, seed: u64) -> Result<ArmModels> {
    let treated = ds.arm(1);
    let control = ds.arm(0);
    let m1 = base.fit(&ds.x.select_rows(&treated), &select(&ds.y, &treated), sub_seed(seed, 2))?;
    let m0 = base.fit(&ds.x.select_rows(&control), &select(&ds.y, &control), sub_seed(seed, 3))?;
    Ok(ArmModels {
        mu1: m1.predict(&ds.x)?,
        mu0: m0.predict(&ds.x)?,
        treated,
        control,
    })
}

/// Separate outcome models per arm; ATE = mean of mu1(x) - mu0(x) over all rows.
pub fn t_learner(ds: &CausalDataset, base: &BaseLearner, seed: u64) -> Result<f64> {
    let m = arm_models(ds, base, seed)?;
    Ok(mean(&m.mu1) - mean(&m.mu0))
}

/// T-learner first stage, then imputed effects regressed on x within each
/// arm and blended by the propensity: tau(x) = e(x) tau0(x) + (1 - e(x)) tau1(x).
pub fn x_learner(ds: &CausalDataset, base: &BaseLearner, seed: u64) -> Result<f64> {
    let m = arm_models(ds, base, seed)?;
    let d1: Vec<f64> = m.treated.iter().map(|&i| ds.y[i] - m.mu0[i]).collect();
    let d0: Vec<f64> = m.control.iter().map(|&i| m.mu1[i] - ds.y[i]).collect();
    let tau1 = base
        .fit(&ds.x.select_rows(&m.treated), &d1, sub_seed(seed, 4))?
        .predict(&ds.x)?;
    let tau0 = base
        .fit(&ds.x.select_rows(&m.control), &d0, sub_seed(seed, 5))?
        .predict(&ds.x)?;
    let e = fit_propensity(&ds.x, &ds.t)?;
    let tau: Vec<f64> = (0..ds.len())
        .map(|i| e[i] * tau0[i] + (1.0 - e[i]) * tau1[i])
        .collect();
    Ok(mean(&tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn deterministic(c: f64, n: usize) -> CausalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rows = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(-1.0..1.0);
            let ti = u8::from(rng.random::<f64>() < 0.3 + 0.4 * f64::from(u8::from(a > 0.0)) || i == 0);
            rows.push(vec![a, b]);
            y.push(c * f64::from(ti) + 2.0 * a - 3.0 * b + 1.0);
            t.push(ti);
        }
        CausalDataset::new(FeatureMatrix::unnamed(&rows).unwrap(), t, y).unwrap()
    }

    #[test]
    fn known_propensity_gives_difference_of_means() {
        let ds = CausalDataset::new(
            FeatureMatrix::unnamed(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
            vec![1, 0, 1, 0],
            vec![3.0, 0.0, 3.0, 0.0],
        )
        .unwrap();
        assert_eq!(ipw_ate_with(&ds, &[0.5; 4]).unwrap(), 3.0);
        assert_eq!(naive_difference(&ds), 3.0);
    }

    #[test]
    fn meta_learners_return_constant_effect_exactly() {
        let ds = deterministic(5.0, 400);
        for f in [s_learner, t_learner, x_learner] {
            let ate = f(&ds, &BaseLearner::Linear, 0).unwrap();
            assert!((ate - 5.0).abs() < 1e-6, "{ate}");
        }
    }

    #[test]
    fn separated_treatment_clips_to_bounds() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(u8::from(i % 2 == 0))]).collect();
        let t: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let e = fit_propensity(&FeatureMatrix::unnamed(&rows).unwrap(), &t).unwrap();
        for (ei, ti) in e.iter().zip(&t) {
            assert_eq!(*ei, if *ti == 1 { 0.99 } else { 0.01 });
        }
    }

    #[test]
    fn null_propensity_is_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..4000).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let t: Vec<u8> = (0..4000).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
        let e = fit_propensity(&FeatureMatrix::unnamed(&rows).unwrap(), &t).unwrap();
        assert!(e.iter().all(|v| (v - 0.5).abs() < 0.05));
    }

    #[test]
    fn single_arm_is_rejected() {
        let x = FeatureMatrix::unnamed(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(CausalDataset::new(x, vec![1, 1], vec![0.0, 1.0]).is_err());
    }
}
