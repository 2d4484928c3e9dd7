use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::beta::beta_reg;

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    #[serde(rename = "F")]
    pub f: f64,
    pub df: (u32, u32),
    pub p: f64,
    pub eta_p2: f64,
    /// 95% interval on partial eta squared.
    pub ci: (f64, f64),
    pub ss_effect: f64,
    pub ss_error: f64,
}

/// One subject's cell means, indexed `[condition][task]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectCells {
    pub subject: String,
    pub cells: [[Option<f64>; 2]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub condition: AnovaResult,
    pub task: AnovaResult,
    pub interaction: AnovaResult,
    pub n_subjects: usize,
    /// Subjects dropped for a missing cell.
    pub excluded: Vec<String>,
    pub ss_subjects: f64,
    pub ss_total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZCompareResult {
    pub z: f64,
    pub p: f64,
}

/// Probability that a noncentral F(df1, df2, λ) variable is at most `f`.
pub fn noncentral_f_cdf(f: f64, df1: f64, df2: f64, lambda: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    let x = df1 * f / (df1 * f + df2);
    let half = 0.5 * lambda;
    if half == 0.0 {
        return beta_reg(0.5 * df1, 0.5 * df2, x);
    }
    // Poisson mixture of central beta tails, summed outward from the mode.
    let mode = half.floor();
    let log_pmf = |j: f64| -half + j * half.ln() - statrs::function::gamma::ln_gamma(j + 1.0);
    let term = |j: f64| log_pmf(j).exp() * beta_reg(0.5 * df1 + j, 0.5 * df2, x);
    let mut sum = term(mode);
    let mut j = mode + 1.0;
    loop {
        let t = term(j);
        sum += t;
        if log_pmf(j).exp() < 1e-16 || j > mode + 10_000.0 {
            break;
        }
        j += 1.0;
    }
    let mut j = mode - 1.0;
    while j >= 0.0 {
        let w = log_pmf(j).exp();
        sum += w * beta_reg(0.5 * df1 + j, 0.5 * df2, x);
        if w < 1e-16 {
            break;
        }
        j -= 1.0;
    }
    sum.clamp(0.0, 1.0)
}

/// Noncentrality with `P(F ≤ f_obs | λ) = target`, or 0 when even λ = 0
/// leaves the probability below the target.
fn solve_lambda(f_obs: f64, df1: f64, df2: f64, target: f64) -> f64 {
    if noncentral_f_cdf(f_obs, df1, df2, 0.0) <= target {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = (f_obs * df1).max(1.0);
    while noncentral_f_cdf(f_obs, df1, df2, hi) > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e7 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if noncentral_f_cdf(f_obs, df1, df2, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// 95% confidence interval for partial eta squared by inverting the
/// noncentral F distribution.
pub fn eta_p2_ci(f: f64, df1: u32, df2: u32) -> (f64, f64) {
    if !f.is_finite() {
        return (1.0, 1.0);
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    // Each bound on λ maps to the partial eta of the F value λ / df1.
    let to_eta = |l: f64| l / (l + d2);
    let lo = solve_lambda(f, d1, d2, 0.975);
    let hi = solve_lambda(f, d1, d2, 0.025);
    (to_eta(lo), to_eta(hi))
}

fn effect(ss_effect: f64, ss_error: f64, n: usize) -> AnovaResult {
    let df = (1u32, (n - 1) as u32);
    let scale = ss_effect.abs() + ss_error.abs();
    let tiny = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let (f, p, eta) = if ss_effect <= tiny {
        (0.0, 1.0, 0.0)
    } else if ss_error <= tiny {
        (f64::INFINITY, 0.0, 1.0)
    } else {
        let f = ss_effect / (ss_error / df.1 as f64);
        let dist = FisherSnedecor::new(1.0, df.1 as f64).expect("valid df");
        (f, dist.sf(f), ss_effect / (ss_effect + ss_error))
    };
    let ci = if f == 0.0 { (0.0, eta_p2_ci(0.0, df.0, df.1).1) } else { eta_p2_ci(f, df.0, df.1) };
    AnovaResult { f, df, p, eta_p2: eta, ci, ss_effect, ss_error }
}

/// Two-way within-subjects ANOVA on a Condition × Task design.
pub fn rm_anova_2x2(data: &[SubjectCells]) -> Result<AnovaTable, AnalysisError> {
    let mut excluded = Vec::new();
    let mut y: Vec<[[f64; 2]; 2]> = Vec::new();
    for s in data {
        match s.cells {
            [[Some(a), Some(b)], [Some(c), Some(d)]] if [a, b, c, d].iter().all(|v| v.is_finite()) => {
                y.push([[a, b], [c, d]])
            }
            _ => excluded.push(s.subject.clone()),
        }
    }
    let n = y.len();
    if n < 3 {
        return Err(AnalysisError::Validation(format!("{n} complete subjects, need at least 3")));
    }
    let nf = n as f64;
    let grand = y.iter().flatten().flatten().sum::<f64>() / (4.0 * nf);
    let subj: Vec<f64> = y.iter().map(|c| c.iter().flatten().sum::<f64>() / 4.0).collect();
    let a_mean = [0, 1].map(|a| y.iter().map(|c| c[a][0] + c[a][1]).sum::<f64>() / (2.0 * nf));
    let b_mean = [0, 1].map(|b| y.iter().map(|c| c[0][b] + c[1][b]).sum::<f64>() / (2.0 * nf));
    let cell = [0, 1].map(|a| [0, 1].map(|b| y.iter().map(|c| c[a][b]).sum::<f64>() / nf));

    let mut ss_a = 0.0;
    let mut ss_b = 0.0;
    let mut ss_ab = 0.0;
    for a in 0..2 {
        ss_a += 2.0 * nf * (a_mean[a] - grand).powi(2);
        ss_b += 2.0 * nf * (b_mean[a] - grand).powi(2);
        for b in 0..2 {
            ss_ab += nf * (cell[a][b] - a_mean[a] - b_mean[b] + grand).powi(2);
        }
    }
    let mut ss_s = 0.0;
    let mut ss_as = 0.0;
    let mut ss_bs = 0.0;
    let mut ss_abs = 0.0;
    let mut ss_total = 0.0;
    for (c, &s) in y.iter().zip(&subj) {
        ss_s += 4.0 * (s - grand).powi(2);
        let as_mean = [0, 1].map(|a| 0.5 * (c[a][0] + c[a][1]));
        let bs_mean = [0, 1].map(|b| 0.5 * (c[0][b] + c[1][b]));
        for a in 0..2 {
            ss_as += 2.0 * (as_mean[a] - a_mean[a] - s + grand).powi(2);
            ss_bs += 2.0 * (bs_mean[a] - b_mean[a] - s + grand).powi(2);
            for b in 0..2 {
                ss_total += (c[a][b] - grand).powi(2);
                ss_abs += (c[a][b] - as_mean[a] - bs_mean[b] - cell[a][b] + a_mean[a] + b_mean[b] + s - grand)
                    .powi(2);
            }
        }
    }
    Ok(AnovaTable {
        condition: effect(ss_a, ss_as, n),
        task: effect(ss_b, ss_bs, n),
        interaction: effect(ss_ab, ss_abs, n),
        n_subjects: n,
        excluded,
        ss_subjects: ss_s,
        ss_total,
    })
}

/// Average ranks, 1-based; ties share their mean rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Rank correlation with a two-sided p from the t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult, AnalysisError> {
    let n = x.len();
    if n != y.len() {
        return Err(AnalysisError::Validation(format!("lengths {} and {}", n, y.len())));
    }
    if n < 4 {
        return Err(AnalysisError::Validation(format!("{n} observations, need at least 4")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalysisError::Validation("non-finite observation".into()));
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))
        .ok_or_else(|| AnalysisError::Undefined("a variable has no rank variance".into()))?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid df");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(CorrelationResult { rho, p, n })
}

fn normal_two_sided(z: f64) -> f64 {
    let nd = Normal::standard();
    (2.0 * nd.sf(z.abs())).min(1.0)
}

/// Difference between two independent correlations on the Fisher z scale.
pub fn fisher_z_compare(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<ZCompareResult, AnalysisError> {
    for (r, n) in [(r1, n1), (r2, n2)] {
        if !(r.abs() < 1.0) {
            return Err(AnalysisError::Undefined(format!("|r| = {} has no finite z transform", r.abs())));
        }
        if n < 4 {
            return Err(AnalysisError::Validation(format!("n = {n}, need at least 4")));
        }
    }
    let se = (1.0 / (n1 as f64 - 3.0) + 1.0 / (n2 as f64 - 3.0)).sqrt();
    let z = (r1.atanh() - r2.atanh()) / se;
    Ok(ZCompareResult { z, p: normal_two_sided(z) })
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn fdr_adjust(pvals: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(AnalysisError::Validation(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvals[a].total_cmp(&pvals[b]));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(pvals[i] * (m as f64 / (rank + 1) as f64));
        out[i] = running.min(1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subject(name: &str, c: [[f64; 2]; 2]) -> SubjectCells {
        SubjectCells { subject: name.into(), cells: c.map(|r| r.map(Some)) }
    }

    fn example() -> Vec<SubjectCells> {
        vec![
            subject("a", [[3.0, 5.0], [4.0, 9.0]]),
            subject("b", [[2.0, 6.5], [5.5, 7.0]]),
            subject("c", [[4.0, 4.0], [6.0, 10.0]]),
            subject("d", [[1.0, 3.0], [2.5, 8.0]]),
        ]
    }

    /// Sums of squares from a long-format residual decomposition.
    fn oracle(data: &[SubjectCells]) -> [(f64, f64); 3] {
        let rows: Vec<(usize, usize, usize, f64)> = data
            .iter()
            .enumerate()
            .flat_map(|(s, d)| {
                (0..4).map(move |k| (s, k / 2, k % 2, d.cells[k / 2][k % 2].unwrap()))
            })
            .collect();
        let mean_where = |f: &dyn Fn(&(usize, usize, usize, f64)) -> bool| {
            let v: Vec<f64> = rows.iter().filter(|r| f(r)).map(|r| r.3).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let g = mean_where(&|_| true);
        let mut ss = [0.0f64; 6];
        for r in &rows {
            let &(s, a, b, v) = r;
            let ma = mean_where(&|q| q.1 == a);
            let mb = mean_where(&|q| q.2 == b);
            let ms = mean_where(&|q| q.0 == s);
            let mab = mean_where(&|q| q.1 == a && q.2 == b);
            let mas = mean_where(&|q| q.1 == a && q.0 == s);
            let mbs = mean_where(&|q| q.2 == b && q.0 == s);
            ss[0] += (ma - g).powi(2);
            ss[1] += (mas - ma - ms + g).powi(2);
            ss[2] += (mb - g).powi(2);
            ss[3] += (mbs - mb - ms + g).powi(2);
            ss[4] += (mab - ma - mb + g).powi(2);
            ss[5] += (v - mas - mbs - mab + ma + mb + ms - g).powi(2);
        }
        [(ss[0], ss[1]), (ss[2], ss[3]), (ss[4], ss[5])]
    }

    #[test]
    fn anova_matches_long_format_oracle() {
        let data = example();
        let t = rm_anova_2x2(&data).unwrap();
        let n = data.len() as f64;
        for (res, (sse, ssr)) in [t.condition, t.task, t.interaction].iter().zip(oracle(&data)) {
            let f = sse / (ssr / (n - 1.0));
            assert!((res.f - f).abs() <= 1e-9 * f);
            assert!((res.eta_p2 - sse / (sse + ssr)).abs() <= 1e-9);
            let p = 1.0 - FisherSnedecor::new(1.0, n - 1.0).unwrap().cdf(f);
            assert!((res.p - p).abs() <= 1e-9 * p.max(1e-12));
            assert_eq!(res.df, (1, 3));
        }
        let parts = t.condition.ss_effect
            + t.condition.ss_error
            + t.task.ss_effect
            + t.task.ss_error
            + t.interaction.ss_effect
            + t.interaction.ss_error
            + t.ss_subjects;
        assert!((parts - t.ss_total).abs() <= 1e-9 * t.ss_total);
    }

    #[test]
    fn identical_cells_give_zero_f() {
        let data: Vec<_> = (0..5).map(|i| subject(&i.to_string(), [[i as f64; 2]; 2])).collect();
        let t = rm_anova_2x2(&data).unwrap();
        for r in [t.condition, t.task, t.interaction] {
            assert_eq!(r.f, 0.0);
            assert_eq!(r.eta_p2, 0.0);
            assert_eq!(r.ci.0, 0.0);
        }
    }

    #[test]
    fn single_factor_f_is_paired_t_squared() {
        // Task has no effect and no interaction; condition effect varies.
        let diffs = [1.5, 0.2, 2.7, -0.4, 1.1, 0.9];
        let data: Vec<_> = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| subject(&i.to_string(), [[i as f64; 2], [i as f64 + d; 2]]))
            .collect();
        let t = rm_anova_2x2(&data).unwrap();
        let n = diffs.len() as f64;
        let m = diffs.iter().sum::<f64>() / n;
        let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let tstat = m / (sd / n.sqrt());
        assert!((t.condition.f - tstat * tstat).abs() <= 1e-9 * tstat * tstat);
    }

    #[test]
    fn missing_cells_are_excluded() {
        let mut data = example();
        data.push(SubjectCells { subject: "e".into(), cells: [[Some(1.0), None], [Some(2.0), Some(3.0)]] });
        let t = rm_anova_2x2(&data).unwrap();
        assert_eq!(t.excluded, vec!["e".to_string()]);
        assert_eq!(t.n_subjects, 4);
        assert!(rm_anova_2x2(&data[..2]).is_err());
    }

    #[test]
    fn noncentral_cdf_reduces_to_central() {
        let d = FisherSnedecor::new(1.0, 13.0).unwrap();
        for f in [0.3, 1.82, 5.0] {
            assert!((noncentral_f_cdf(f, 1.0, 13.0, 0.0) - d.cdf(f)).abs() < 1e-12);
        }
        // Decreasing in the noncentrality.
        let a = noncentral_f_cdf(2.0, 1.0, 13.0, 1.0);
        let b = noncentral_f_cdf(2.0, 1.0, 13.0, 4.0);
        assert!(a > b);
    }

    #[test]
    fn eta_interval_for_a_small_effect() {
        let (lo, hi) = eta_p2_ci(1.82, 1, 13);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.46).abs() < 0.01, "upper bound {hi}");
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap().rho, 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[40.0, 30.0, 20.0, 10.0]).unwrap().rho, -1.0);
        assert!(matches!(spearman(&[1.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(AnalysisError::Undefined(_))));
    }

    /// Brute-force mid-ranks by counting, then textbook Pearson.
    #[test]
    fn spearman_with_ties_matches_counting_oracle() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let y = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0];
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let less = v.iter().filter(|b| *b < a).count() as f64;
                    let eq = v.iter().filter(|b| *b == a).count() as f64;
                    less + (eq + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(&x), rank(&y));
        let n = 8.0;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
        let want = cov / (vx * vy).sqrt();
        assert!((spearman(&x, &y).unwrap().rho - want).abs() < 1e-12);
    }

    /// Exact permutation p for small n as a sanity bound on the t approximation.
    #[test]
    fn spearman_p_close_to_permutation_p() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0, 6.0];
        let res = spearman(&x, &y).unwrap();
        let rank_y = mid_ranks(&y);
        let mut perm: Vec<usize> = (0..7).collect();
        let (mut hits, mut total) = (0u32, 0u32);
        loop {
            let py: Vec<f64> = perm.iter().map(|&i| rank_y[i]).collect();
            let r = pearson(&x, &py).unwrap();
            if r.abs() >= res.rho.abs() - 1e-12 {
                hits += 1;
            }
            total += 1;
            // next lexicographic permutation
            let Some(i) = (0..6).rev().find(|&i| perm[i] < perm[i + 1]) else { break };
            let j = (i + 1..7).rev().find(|&j| perm[j] > perm[i]).unwrap();
            perm.swap(i, j);
            perm[i + 1..].reverse();
        }
        let exact = hits as f64 / total as f64;
        assert!((res.p - exact).abs() < 0.03, "t {} vs exact {exact}", res.p);
    }

    #[test]
    fn fisher_z_examples() {
        let a = fisher_z_compare(0.56, 75, 0.30, 75).unwrap();
        assert!((a.z - 1.94).abs() < 0.02, "{}", a.z);
        let b = fisher_z_compare(0.08, 75, 0.09, 75).unwrap();
        assert!((b.z + 0.06).abs() < 0.02, "{}", b.z);
        assert_eq!(fisher_z_compare(0.4, 30, 0.4, 30).unwrap().z, 0.0);
        assert!(fisher_z_compare(1.0, 30, 0.4, 30).is_err());
    }

    #[test]
    fn fdr_examples() {
        assert_eq!(fdr_adjust(&[0.04]).unwrap(), vec![0.04]);
        assert_eq!(fdr_adjust(&[0.2, 0.2, 0.2]).unwrap(), vec![0.2, 0.2, 0.2]);
        let q = fdr_adjust(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        for v in q {
            assert!((v - 0.04).abs() < 1e-15);
        }
        assert!(fdr_adjust(&[1.2]).is_err());
    }

    proptest! {
        #[test]
        fn fdr_is_monotone_and_conservative(p in prop::collection::vec(0.0f64..=1.0, 1..30)) {
            let q = fdr_adjust(&p).unwrap();
            for i in 0..p.len() {
                prop_assert!(q[i] >= p[i] - 1e-15);
                prop_assert!(q[i] <= 1.0);
                for j in 0..p.len() {
                    if p[i] < p[j] {
                        prop_assert!(q[i] <= q[j] + 1e-15);
                    }
                }
            }
        }

        #[test]
        fn spearman_invariant_under_monotone_maps(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 4..25),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Ok(base) = spearman(&x, &y) {
                let tx: Vec<f64> = x.iter().map(|v| (v / 40.0).exp()).collect();
                let ty: Vec<f64> = y.iter().map(|v| v.powi(3) - 7.0).collect();
                let moved = spearman(&tx, &ty).unwrap();
                prop_assert!((base.rho - moved.rho).abs() < 1e-12);
            }
        }

        #[test]
        fn fisher_z_is_antisymmetric(r1 in -0.99f64..0.99, r2 in -0.99f64..0.99, n1 in 4usize..200, n2 in 4usize..200) {
            let a = fisher_z_compare(r1, n1, r2, n2).unwrap();
            let b = fisher_z_compare(r2, n2, r1, n1).unwrap();
            prop_assert_eq!(a.z, -b.z);
        }

        #[test]
        fn eta_in_unit_interval(cells in prop::collection::vec(prop::array::uniform4(-10.0f64..10.0), 3..10)) {
            let data: Vec<_> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| subject(&i.to_string(), [[c[0], c[1]], [c[2], c[3]]]))
                .collect();
            let t = rm_anova_2x2(&data).unwrap();
            for r in [t.condition, t.task, t.interaction] {
                prop_assert!((0.0..=1.0).contains(&r.eta_p2));
                prop_assert_eq!(r.eta_p2 == 0.0, r.f == 0.0);
                prop_assert!(r.ci.0 <= r.ci.1);
            }
        }
    }
}
