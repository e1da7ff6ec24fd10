//! Seeded synthetic instances: Gaussian and Student-t inliers,
//! corruption adversaries, and planted instances carrying a verified
//! promise witness.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::dense_spectral_norm;
use crate::points::{norm, Direction, PointSet};

/// A weighting certifying the promise level of an instance.
#[derive(Debug, Clone)]
pub struct Witness {
    pub center: Vec<f64>,
    /// Weights over all n points (zero on the adversarial ones).
    pub weights: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub points: PointSet,
    pub true_mean: Vec<f64>,
    /// true = inlier (G), false = adversarial (B).
    pub inlier_labels: Vec<bool>,
    pub witness: Option<Witness>,
    pub generator: String,
    pub seed: u64,
}

impl Instance {
    pub fn inlier_count(&self) -> usize {
        self.inlier_labels.iter().filter(|&&b| b).count()
    }
}

/// i.i.d. standard normal shifted by `mean`; all points labeled inlier.
pub fn gen_gaussian(n: usize, d: usize, mean: &[f64], seed: u64) -> Result<Instance> {
    if mean.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mean.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        for mj in mean {
            let z: f64 = rng.sample(StandardNormal);
            data.push(mj + z);
        }
    }
    Ok(Instance {
        points: PointSet::new(n, d, data)?,
        true_mean: mean.to_vec(),
        inlier_labels: vec![true; n],
        witness: None,
        generator: format!("gaussian(n={n},d={d})"),
        seed,
    })
}

/// Multivariate Student-t with dof > 2, scaled by sqrt((dof-2)/dof) so
/// the covariance is exactly the identity. Mean zero.
pub fn gen_student_t(n: usize, d: usize, dof: f64, seed: u64) -> Result<Instance> {
    if dof <= 2.0 {
        return Err(Error::InvalidParam(format!(
            "dof={dof} must exceed 2 for the covariance to exist"
        )));
    }
    let chi = ChiSquared::new(dof)
        .map_err(|e| Error::Generation(format!("chi-squared setup: {e}")))?;
    let scale_to_identity = ((dof - 2.0) / dof).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let u: f64 = chi.sample(&mut rng);
        let mult = (dof / u).sqrt() * scale_to_identity;
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data.push(mult * z);
        }
    }
    Ok(Instance {
        points: PointSet::new(n, d, data)?,
        true_mean: vec![0.0; d],
        inlier_labels: vec![true; n],
        witness: None,
        generator: format!("student_t(n={n},d={d},dof={dof})"),
        seed,
    })
}

/// How replaced points are positioned, all relative to
/// true_mean + shift * direction (direction defaults to e1).
#[derive(Debug, Clone, Copy)]
pub enum Adversary {
    /// All replaced points exactly at the shifted location.
    Cluster { shift: f64 },
    /// Uniform in a ball of `radius` around the shifted location.
    Scatter { shift: f64, radius: f64 },
    /// Reflect the selected inliers through the hyperplane passing
    /// through the shifted location, orthogonal to the direction.
    Mirror { shift: f64 },
}

impl Adversary {
    fn name(&self) -> &'static str {
        match self {
            Adversary::Cluster { .. } => "cluster",
            Adversary::Scatter { .. } => "scatter",
            Adversary::Mirror { .. } => "mirror",
        }
    }
}

/// Replace exactly floor(eps * n) seeded-random points according to the
/// adversary; labels are updated, inlier coordinates are untouched.
pub fn corrupt(
    instance: &Instance,
    eps: f64,
    adversary: Adversary,
    direction: Option<&Direction>,
    seed: u64,
) -> Result<Instance> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::InvalidParam(format!("eps={eps} not in [0, 1/2)")));
    }
    let n = instance.points.len();
    let d = instance.points.dim();
    let m = (eps * n as f64).floor() as usize;
    let mut out = instance.clone();
    out.generator = format!("{}+{}(eps={eps})", instance.generator, adversary.name());
    out.seed = seed;
    out.witness = None;
    if m == 0 {
        return Ok(out);
    }

    let e1: Vec<f64> = {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        v
    };
    let dir = direction.map(|v| v.as_slice().to_vec()).unwrap_or(e1);
    if dir.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: dir.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let chosen = &idx[..m];

    let mut data: Vec<f64> = instance.points.data().to_vec();
    for &i in chosen {
        let row = &mut data[i * d..(i + 1) * d];
        match adversary {
            Adversary::Cluster { shift } => {
                for ((rj, mj), vj) in row.iter_mut().zip(&instance.true_mean).zip(&dir) {
                    *rj = mj + shift * vj;
                }
            }
            Adversary::Scatter { shift, radius } => {
                // Rejection-sample a uniform point in the unit ball.
                let ball = loop {
                    let cand: Vec<f64> =
                        (0..d).map(|_| rng.gen_range(-1.0..1.0_f64)).collect();
                    if norm(&cand) <= 1.0 {
                        break cand;
                    }
                };
                for (((rj, mj), vj), bj) in
                    row.iter_mut().zip(&instance.true_mean).zip(&dir).zip(&ball)
                {
                    *rj = mj + shift * vj + radius * bj;
                }
            }
            Adversary::Mirror { shift } => {
                // Reflect across the hyperplane <x - (mean + shift*dir), dir> = 0.
                let offset: f64 = row
                    .iter()
                    .zip(&instance.true_mean)
                    .zip(&dir)
                    .map(|((xj, mj), vj)| (xj - mj - shift * vj) * vj)
                    .sum();
                for (rj, vj) in row.iter_mut().zip(&dir) {
                    *rj -= 2.0 * offset * vj;
                }
            }
        }
        out.inlier_labels[i] = false;
    }
    out.points = PointSet::new(n, d, data)?;
    Ok(out)
}

/// Planted promise instance: inliers rescaled until the uniform
/// weighting on them certifies level <= lambda (dense-oracle verified),
/// plus floor(eps * n) adversarial points at distance 0.5r..1.5r from
/// the center with r = sqrt(d * lambda / eps).
pub fn gen_planted_promise(
    n: usize,
    d: usize,
    lambda: f64,
    eps: f64,
    seed: u64,
) -> Result<Instance> {
    if lambda <= 0.0 {
        return Err(Error::InvalidParam(format!("lambda={lambda} must be positive")));
    }
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::InvalidParam(format!("eps={eps} not in (0, 1/2)")));
    }
    let n_bad = (eps * n as f64).floor() as usize;
    let n_good = n - n_bad;
    if n_good == 0 {
        return Err(Error::Generation("no inliers left".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu = vec![0.0; d];

    // Raw inlier cloud; target spectral norm 0.9*lambda for headroom.
    let mut good: Vec<f64> = (0..n_good * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let w_good = vec![1.0 / n_good as f64; n_good];
    let mut scale = (0.9 * lambda).sqrt();
    let mut verified = false;
    for _ in 0..10 {
        let scaled: Vec<f64> = good.iter().map(|&x| scale * x).collect();
        let cloud = PointSet::new(n_good, d, scaled)?;
        let m_norm = dense_spectral_norm(&cloud, &w_good, &nu)?;
        if m_norm <= lambda + 1e-6 {
            good = cloud.data().to_vec();
            verified = true;
            break;
        }
        scale *= ((lambda * 0.9) / m_norm).sqrt();
    }
    if !verified {
        return Err(Error::Generation(
            "planted promise verification failed after 10 rescales".into(),
        ));
    }

    let r = (d as f64 * lambda / eps).sqrt();
    let mut data = good;
    for _ in 0..n_bad {
        let raw: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nr = norm(&raw).max(1e-12);
        let dist = rng.gen_range(0.5 * r..1.5 * r);
        data.extend(raw.iter().map(|&x| dist * x / nr));
    }
    let points = PointSet::new(n, d, data)?;

    let mut labels = vec![true; n];
    for l in labels.iter_mut().skip(n_good) {
        *l = false;
    }
    let mut w = vec![0.0; n];
    for wi in w.iter_mut().take(n_good) {
        *wi = 1.0 / n_good as f64;
    }
    // Final witness re-verification on the assembled instance.
    let certified = dense_spectral_norm(&points, &w, &nu)?;
    if certified > lambda + 1e-6 {
        return Err(Error::Generation(format!(
            "witness norm {certified} exceeds lambda={lambda}"
        )));
    }
    Ok(Instance {
        points,
        true_mean: nu.clone(),
        inlier_labels: labels,
        witness: Some(Witness { center: nu, weights: w, lambda }),
        generator: format!("planted(n={n},d={d},lambda={lambda},eps={eps})"),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::weighted_mean;

    fn mean_of(points: &PointSet) -> Vec<f64> {
        let w = vec![1.0 / points.len() as f64; points.len()];
        weighted_mean(points, &w).unwrap()
    }

    #[test]
    fn gaussian_is_deterministic_and_clt_close() {
        let a = gen_gaussian(4000, 3, &[1.0, -2.0, 0.5], 9).unwrap();
        let b = gen_gaussian(4000, 3, &[1.0, -2.0, 0.5], 9).unwrap();
        assert_eq!(a.points.data(), b.points.data());
        let m = mean_of(&a.points);
        for (mj, tj) in m.iter().zip(&a.true_mean) {
            // sigma/sqrt(n) ~ 0.016; allow 5 sigma.
            assert!((mj - tj).abs() < 0.08, "{mj} vs {tj}");
        }
        let w = vec![1.0 / 4000.0; 4000];
        let cov_norm = dense_spectral_norm(&a.points, &w, &a.true_mean).unwrap();
        assert!((cov_norm - 1.0).abs() < 0.15, "cov norm {cov_norm}");
    }

    #[test]
    fn student_t_rejects_small_dof_and_has_unit_scale() {
        assert!(gen_student_t(10, 2, 2.0, 0).is_err());
        assert!(gen_student_t(10, 2, 1.5, 0).is_err());
        let inst = gen_student_t(30000, 2, 5.0, 11).unwrap();
        let m = mean_of(&inst.points);
        assert!(m.iter().all(|x| x.abs() < 0.05));
        // Per-coordinate variance should be 1 after the (dof-2)/dof rescale.
        let var: f64 = inst.points.rows().map(|x| x[0] * x[0]).sum::<f64>()
            / inst.points.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn student_t_has_heavier_tails_than_gaussian() {
        let t = gen_student_t(20000, 1, 3.0, 4).unwrap();
        let g = gen_gaussian(20000, 1, &[0.0], 4).unwrap();
        let count = |p: &PointSet| p.rows().filter(|x| x[0].abs() > 4.0).count();
        assert!(count(&t.points) > 4 * count(&g.points).max(1));
    }

    #[test]
    fn corrupt_counts_and_labels() {
        let base = gen_gaussian(500, 4, &vec![0.0; 4], 2).unwrap();
        let c = corrupt(&base, 0.12, Adversary::Cluster { shift: 20.0 }, None, 7).unwrap();
        assert_eq!(c.inlier_labels.iter().filter(|&&b| !b).count(), 60);
        assert_eq!(c.points.len(), 500);
        // Inlier rows untouched, corrupted rows at mean + 20*e1.
        for (i, keep) in c.inlier_labels.iter().enumerate() {
            if *keep {
                assert_eq!(c.points.row(i), base.points.row(i));
            } else {
                assert!((c.points.row(i)[0] - 20.0).abs() < 1e-12);
                assert!(c.points.row(i)[1..].iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn corrupt_zero_eps_is_identity() {
        let base = gen_gaussian(100, 3, &[1.0, 1.0, 1.0], 3).unwrap();
        let c = corrupt(&base, 0.0, Adversary::Mirror { shift: 5.0 }, None, 8).unwrap();
        assert_eq!(c.points.data(), base.points.data());
        assert_eq!(c.inlier_count(), 100);
    }

    #[test]
    fn corrupt_shifts_empirical_mean_predictably() {
        // Cluster at mean + s*e1 moves the empirical mean by about eps*s
        // along e1 (the replaced inliers averaged ~0).
        let base = gen_gaussian(10000, 2, &[0.0, 0.0], 6).unwrap();
        let c = corrupt(&base, 0.2, Adversary::Cluster { shift: 50.0 }, None, 1).unwrap();
        let m = mean_of(&c.points);
        assert!((m[0] - 10.0).abs() < 0.5, "shifted mean {}", m[0]);
        assert!(m[1].abs() < 0.1);
    }

    #[test]
    fn corrupt_scatter_stays_in_ball_and_mirror_is_isometry() {
        let base = gen_gaussian(400, 3, &vec![0.0; 3], 12).unwrap();
        let s =
            corrupt(&base, 0.25, Adversary::Scatter { shift: 9.0, radius: 2.0 }, None, 5).unwrap();
        for (i, keep) in s.inlier_labels.iter().enumerate() {
            if !keep {
                let row = s.points.row(i);
                let mut diff = row.to_vec();
                diff[0] -= 9.0;
                assert!(norm(&diff) <= 2.0 + 1e-12);
            }
        }
        // Mirror preserves distance to the hyperplane point.
        let m = corrupt(&base, 0.25, Adversary::Mirror { shift: 9.0 }, None, 5).unwrap();
        for (i, keep) in m.inlier_labels.iter().enumerate() {
            if !keep {
                let orig = base.points.row(i);
                let refl = m.points.row(i);
                assert!((orig[0] - 9.0 + refl[0] - 9.0).abs() < 1e-9, "reflection about 9");
                assert_eq!(orig[1], refl[1]);
                assert_eq!(orig[2], refl[2]);
            }
        }
    }

    #[test]
    fn corrupt_respects_custom_direction() {
        let base = gen_gaussian(200, 2, &[0.0, 0.0], 14).unwrap();
        let dir = Direction::normalized(vec![0.0, 1.0]).unwrap();
        let c =
            corrupt(&base, 0.1, Adversary::Cluster { shift: 30.0 }, Some(&dir), 3).unwrap();
        for (i, keep) in c.inlier_labels.iter().enumerate() {
            if !keep {
                assert!((c.points.row(i)[1] - 30.0).abs() < 1e-12);
                assert!(c.points.row(i)[0].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_witness_verifies() {
        for seed in [0u64, 1, 2] {
            let inst = gen_planted_promise(300, 8, 2.0, 0.1, seed).unwrap();
            let w = inst.witness.as_ref().unwrap();
            assert_eq!(inst.inlier_count(), 270);
            assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            // Witness mass lives only on inliers.
            for (wi, keep) in w.weights.iter().zip(&inst.inlier_labels) {
                assert!(*keep || *wi == 0.0);
            }
            let norm_val =
                dense_spectral_norm(&inst.points, &w.weights, &w.center).unwrap();
            assert!(norm_val <= 2.0 + 1e-6, "witness norm {norm_val}");
        }
    }

    #[test]
    fn planted_adversaries_sit_in_the_annulus() {
        let (d, lambda, eps) = (6, 1.5, 0.2);
        let inst = gen_planted_promise(200, d, lambda, eps, 5).unwrap();
        let r = (d as f64 * lambda / eps).sqrt();
        for (i, keep) in inst.inlier_labels.iter().enumerate() {
            if !keep {
                let dist = norm(inst.points.row(i));
                assert!(dist >= 0.5 * r - 1e-9 && dist <= 1.5 * r + 1e-9, "dist {dist}");
            }
        }
    }
}
