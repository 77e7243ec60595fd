//! Descriptive statistics and the two hypothesis tests used on run samples.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::special::{normal_quantile, normal_sf, student_t_two_sided};

/// Arithmetic mean with one correction pass, so constant inputs give their
/// value back exactly (and a variance of exactly zero).
pub fn mean(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    m + xs.iter().map(|x| x - m).sum::<f64>() / n
}

/// Population variance (divides by `n`).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    libm::sqrt(variance(xs))
}

/// Average ranks (1-based); ties share the mean of their positions.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 points".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "constant input, correlation undefined".into(),
        ));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Spearman's rank correlation with the t-approximation p-value (two-sided).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InvalidArgument(
            "spearman needs at least 3 points".into(),
        ));
    }
    let rho = pearson(&ranks(xs), &ranks(ys))?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(rho * libm::sqrt(df / (1.0 - rho * rho)), df)
    };
    Ok(TestResult {
        statistic: rho,
        p_value: p,
    })
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Shapiro–Wilk normality test, Royston's AS R94 approximation (3 ≤ n ≤ 5000).
pub fn shapiro_wilk(xs: &[f64]) -> Result<TestResult> {
    let n = xs.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::InvalidArgument(alloc::format!(
            "shapiro-wilk needs 3..=5000 values, got {n}"
        )));
    }
    let mut x = xs.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(Error::Degenerate("constant sample".into()));
    }
    let nn2 = n / 2;
    // Coefficients a[1..=nn2], 1-based as in the reference algorithm.
    let mut a = vec![0.0; nn2 + 1];
    let an = n as f64;
    if n == 3 {
        a[1] = FRAC_1_SQRT_2;
    } else {
        let an25 = an + 0.25;
        let mut summ2 = 0.0;
        for (i, ai) in a.iter_mut().enumerate().skip(1) {
            *ai = normal_quantile((i as f64 - 0.375) / an25);
            summ2 += *ai * *ai;
        }
        summ2 *= 2.0;
        let ssumm2 = libm::sqrt(summ2);
        let rsn = 1.0 / libm::sqrt(an);
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a1 = poly(&C1, rsn) - a[1] / ssumm2;
        let (i1, fac) = if n > 5 {
            let a2 = -a[2] / ssumm2 + poly(&C2, rsn);
            let fac = libm::sqrt(
                (summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2])
                    / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2),
            );
            a[2] = a2;
            (3, fac)
        } else {
            (
                2,
                libm::sqrt((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1)),
            )
        };
        a[1] = a1;
        for ai in a.iter_mut().skip(i1) {
            *ai /= -fac;
        }
    }

    // W as the squared correlation between ordered data and coefficients.
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        match i.cmp(&j) {
            Ordering::Less => -a[i + 1],
            Ordering::Greater => a[j + 1],
            Ordering::Equal => 0.0,
        }
    };
    let sa = (0..n).map(coef).sum::<f64>() / an;
    let sx = x.iter().map(|v| v / range).sum::<f64>() / an;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, xi) in x.iter().enumerate() {
        let asa = coef(i) - sa;
        let xsx = xi / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }
    let ssassx = libm::sqrt(ssa * ssx);
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = (1.0 - w1).clamp(0.0, 1.0);
    Ok(TestResult {
        statistic: w,
        p_value: shapiro_p_value(w, n),
    })
}

fn shapiro_p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if n == 3 {
        const PI6: f64 = 6.0 / core::f64::consts::PI;
        const STQR: f64 = core::f64::consts::FRAC_PI_3;
        return (PI6 * (libm::asin(libm::sqrt(w)) - STQR)).clamp(0.0, 1.0);
    }
    let an = n as f64;
    let y = libm::log(1.0 - w);
    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -0.0006714];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    let (y, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        (
            -libm::log(gamma - y),
            poly(&C3, an),
            libm::exp(poly(&C4, an)),
        )
    } else {
        let xx = libm::log(an);
        (y, poly(&C5, xx), libm::exp(poly(&C6, xx)))
    };
    normal_sf((y - m) / s)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `ps` and U(0, 1).
pub fn ks_uniform_distance(ps: &[f64]) -> f64 {
    let mut v = ps.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &p)| {
            let p = p.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - p).max(p - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), [2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn spearman_extremes() {
        let xs = [1.0, 2.5, 3.0, 7.0, 9.0];
        assert_eq!(spearman(&xs, &xs).unwrap().statistic, 1.0);
        let rev: Vec<f64> = xs.iter().rev().copied().collect();
        assert_eq!(spearman(&xs, &rev).unwrap().statistic, -1.0);
        assert!(matches!(
            spearman(&xs, &[1.0; 5]),
            Err(Error::Degenerate(_))
        ));
        assert!(spearman(&xs, &xs[..4]).is_err());
    }

    #[test]
    fn spearman_reference() {
        // scipy.stats.spearmanr
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0, 9.0, 10.0, 8.0];
        let r = spearman(&xs, &ys).unwrap();
        assert!((r.statistic - 0.903_030_303_030_303).abs() < 1e-12);
        assert!((r.p_value - 3.436_121_977_632_822e-4).abs() < 1e-10);
    }

    #[test]
    fn shapiro_reference_values() {
        // scipy.stats.shapiro on 1..=n and other fixed samples
        let seq = |n: usize| (1..=n).map(|i| i as f64).collect::<Vec<_>>();
        let cases: [(Vec<f64>, f64, f64); 5] = [
            (seq(5), 0.986_762_155_211_559, 0.967_173_934_972_858_2),
            (seq(10), 0.970_164_611_085_605_6, 0.892_367_306_190_297_8),
            (seq(20), 0.960_375_183_242_988_4, 0.551_371_745_791_677_1),
            (
                vec![1.0, 2.0, 4.0],
                0.964_285_714_285_714_2,
                0.636_886_845_028_968_9,
            ),
            (
                vec![
                    2.1, 3.7, 1.2, 9.5, 4.4, 4.8, 5.0, 0.3, 7.7, 6.1, 2.2, 8.8, 3.3,
                ],
                0.961_279_842_022_998_5,
                0.773_300_787_884_797_1,
            ),
        ];
        for (xs, w, p) in cases {
            let r = shapiro_wilk(&xs).unwrap();
            assert!((r.statistic - w).abs() < 1e-6, "W {} vs {w}", r.statistic);
            assert!((r.p_value - p).abs() < 1e-5, "p {} vs {p}", r.p_value);
        }
    }

    #[test]
    fn shapiro_bimodal_rejects() {
        let mut xs = vec![0.0; 64];
        xs.extend([1.0; 64]);
        let r = shapiro_wilk(&xs).unwrap();
        assert!((r.statistic - 0.636_394_327_658_003_1).abs() < 1e-6);
        assert!(r.p_value < 1e-3);
    }

    #[test]
    fn shapiro_errors() {
        assert!(shapiro_wilk(&[1.0, 2.0]).is_err());
        assert!(matches!(
            shapiro_wilk(&[3.0; 10]),
            Err(Error::Degenerate(_))
        ));
        assert!(shapiro_wilk(&vec![0.0; 5001]).is_err());
    }

    #[test]
    fn ks_distance_of_grid_is_small() {
        let ps: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform_distance(&ps) <= 0.0005 + 1e-12);
        assert!((ks_uniform_distance(&[0.0; 10]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_and_moments() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert!((variance(&[0.4, 0.6]) - 0.01).abs() < 1e-15);
        let mut r = rng::seeded(1);
        let xs: Vec<f64> = (0..10_000).map(|_| rng::normal(&mut r)).collect();
        assert!(mean(&xs).abs() < 0.04 && (std_dev(&xs) - 1.0).abs() < 0.03);
    }

    proptest::proptest! {
        #[test]
        fn prop_rank_statistics_bounded(seed in 0u64..10_000, n in 3usize..60) {
            let mut r = rng::seeded(seed);
            let xs: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng::normal(&mut r)).collect();
            let s = spearman(&xs, &ys).unwrap();
            proptest::prop_assert!((-1.0..=1.0).contains(&s.statistic) && (0.0..=1.0).contains(&s.p_value));
            // invariant under monotone transforms of either margin
            let cubed: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
            proptest::prop_assert!((spearman(&cubed, &ys).unwrap().statistic - s.statistic).abs() < 1e-12);
            let w = shapiro_wilk(&xs).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&w.statistic) && (0.0..=1.0).contains(&w.p_value));
        }
    }
}
