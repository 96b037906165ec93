//! Stratification checks on datasets. Rows are grouped into strata, each stratum is cut
//! into k contiguous index blocks, adjacent blocks are compared with a chi-square
//! homogeneity test, and the resulting p-values are checked for uniformity with a
//! Kolmogorov-Smirnov test.

use crate::error::{invalid, Result};
use crate::scm::Dataset;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;

/// Minimum expected count before a category is pooled.
pub const MIN_EXPECTED: f64 = 5.0;
/// Alarm threshold for the uniformity p-value and the family-wise level for single tests.
pub const ALARM_LEVEL: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stratum {
    /// `col=label` pairs joined by ",".
    pub key: String,
    /// Row indices, ordered by the split order.
    pub rows: Vec<usize>,
    /// k contiguous blocks of `rows` (sizes differ by at most one).
    pub blocks: Vec<Vec<usize>>,
    /// Some block is empty.
    pub too_small: bool,
}

/// Groups rows by the `strata` columns and splits each group into `k` index blocks. With
/// `order` the rows in a group are ordered by that column (stable) instead of by row index.
pub fn stratify_split(data: &Dataset, strata: &[&str], k: usize, order: Option<&str>) -> Result<Vec<Stratum>> {
    if k < 2 {
        return invalid("k must be at least 2");
    }
    let cols: Vec<usize> = strata.iter().map(|c| data.col(c)).collect::<Result<_>>()?;
    let ord = order.map(|c| data.col(c)).transpose()?;
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.rows.iter().enumerate() {
        groups.entry(cols.iter().map(|&c| r[c]).collect()).or_default().push(i);
    }
    let mut out = vec![];
    for (cfg, mut rows) in groups {
        if let Some(o) = ord {
            rows.sort_by_key(|&i| data.rows[i][o]);
        }
        let n = rows.len();
        let mut blocks = Vec::with_capacity(k);
        let mut start = 0;
        for b in 0..k {
            let len = n / k + usize::from(b < n % k);
            blocks.push(rows[start..start + len].to_vec());
            start += len;
        }
        let key = cols
            .iter()
            .zip(&cfg)
            .map(|(&c, &s)| format!("{}={}", data.names[c], data.domains[c][s]))
            .collect::<Vec<_>>()
            .join(",");
        let too_small = blocks.iter().any(|b| b.is_empty());
        out.push(Stratum { key, rows, blocks, too_small });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    /// Degrees of freedom after pooling; 0 means nothing left to compare.
    pub df: usize,
    pub p_value: f64,
}

/// Chi-square homogeneity test of two count vectors over a shared domain.
///
/// Categories empty in both samples are dropped. Categories with an expected count below
/// five in either sample are merged into one pooled category; if the pool itself stays
/// below five it is merged with the smallest remaining category. With fewer than two
/// categories left the test is degenerate: statistic 0, df 0, p = 1.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return invalid("count vectors must share a domain");
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return invalid("both samples must be non-empty");
    }
    let n = na + nb;
    let low = |ca: f64, cb: f64| (ca + cb) * na.min(nb) / n < MIN_EXPECTED;
    let mut cats: Vec<(f64, f64)> = vec![];
    let mut pool = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        if x + y == 0.0 {
            continue;
        }
        if low(x, y) {
            pool.0 += x;
            pool.1 += y;
        } else {
            cats.push((x, y));
        }
    }
    if pool.0 + pool.1 > 0.0 {
        if low(pool.0, pool.1) && !cats.is_empty() {
            let (i, _) = cats.iter().enumerate().min_by(|p, q| (p.1 .0 + p.1 .1).total_cmp(&(q.1 .0 + q.1 .1))).unwrap();
            cats[i].0 += pool.0;
            cats[i].1 += pool.1;
        } else {
            cats.push(pool);
        }
    }
    if cats.len() < 2 {
        return Ok(ChiSquareTest { statistic: 0.0, df: 0, p_value: 1.0 });
    }
    let mut stat = 0.0;
    for &(x, y) in &cats {
        let col = x + y;
        let (ea, eb) = (col * na / n, col * nb / n);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let df = cats.len() - 1;
    let p = ChiSquared::new(df as f64).expect("df >= 1").sf(stat);
    Ok(ChiSquareTest { statistic: stat, df, p_value: p.clamp(0.0, 1.0) })
}

/// p-value of the chi-square homogeneity test.
pub fn two_sample_pvalue(a: &[u64], b: &[u64]) -> Result<f64> {
    Ok(chi_square_homogeneity(a, b)?.p_value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Uniformity {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov distribution tail, Q(λ) = 2 Σ (−1)^{j−1} exp(−2j²λ²).
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test against Uniform(0,1), p-value from the asymptotic law at
/// λ = (√n + 0.12 + 0.11/√n)·D.
pub fn uniformity_check(pvals: &[f64]) -> Result<Uniformity> {
    if pvals.len() < 5 {
        return invalid(format!("uniformity check needs at least 5 p-values, got {}", pvals.len()));
    }
    if pvals.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("p-values must lie in [0, 1]");
    }
    let mut v = pvals.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &p) in v.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - p).max(p - i as f64 / n);
    }
    let sn = n.sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok(Uniformity { n: v.len(), statistic: d, p_value: p })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockTest {
    /// Index of the first of the two adjacent blocks.
    pub block: usize,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratumReport {
    /// "response" (response given x and t) or "treatment" (treatment given x).
    pub pass: String,
    pub key: String,
    pub scheme: String,
    /// Per-block value counts over the compared column's domain.
    pub counts: Vec<Vec<u64>>,
    pub too_small: bool,
    pub tests: Vec<BlockTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub strata: Vec<StratumReport>,
    /// Non-degenerate p-values in stratum order.
    pub pvalues: Vec<f64>,
    pub min_pvalue: Option<f64>,
    pub uniformity: Option<Uniformity>,
    pub uniformity_rejected: bool,
    /// Smallest p-value below ALARM_LEVEL / #tests.
    pub single_test_alarm: bool,
    pub alarm: bool,
    pub warnings: Vec<String>,
}

fn pass_reports(
    data: &Dataset,
    strata: &[&str],
    target: &str,
    k: usize,
    order: Option<&str>,
    label: &str,
) -> Result<Vec<StratumReport>> {
    let tc = data.col(target)?;
    let dom = data.domains[tc].len();
    let scheme = match order {
        Some(o) => format!("{k} contiguous blocks ordered by {o}"),
        None => format!("{k} contiguous index blocks"),
    };
    let mut out = vec![];
    for s in stratify_split(data, strata, k, order)? {
        let counts: Vec<Vec<u64>> = s
            .blocks
            .iter()
            .map(|b| {
                let mut c = vec![0u64; dom];
                for &i in b {
                    c[data.rows[i][tc]] += 1;
                }
                c
            })
            .collect();
        let mut tests = vec![];
        if !s.too_small {
            for j in 0..k - 1 {
                let t = chi_square_homogeneity(&counts[j], &counts[j + 1])?;
                tests.push(BlockTest { block: j, statistic: t.statistic, df: t.df, p_value: t.p_value });
            }
        }
        out.push(StratumReport { pass: label.into(), key: s.key, scheme: scheme.clone(), counts, too_small: s.too_small, tests });
    }
    Ok(out)
}

/// Runs the response pass (r given x and t) and the treatment pass (t given x), then the
/// uniformity check on all non-degenerate p-values. Raw p-values are reported uncorrected.
pub fn homogeneity_report(
    data: &Dataset,
    x: &[&str],
    t: &str,
    r: &str,
    k: usize,
    order: Option<&str>,
) -> Result<HomogeneityReport> {
    let mut xt: Vec<&str> = x.to_vec();
    xt.push(t);
    let mut strata = pass_reports(data, &xt, r, k, order, "response")?;
    strata.extend(pass_reports(data, x, t, k, order, "treatment")?);
    let mut warnings = vec![];
    for s in &strata {
        if s.too_small {
            warnings.push(format!("{} stratum {} too small for {} blocks", s.pass, s.key, k));
        }
    }
    let pvalues: Vec<f64> = strata.iter().flat_map(|s| s.tests.iter()).filter(|t| t.df > 0).map(|t| t.p_value).collect();
    if pvalues.is_empty() {
        warnings.push("empty report: no usable strata".into());
    }
    let min_pvalue = pvalues.iter().copied().min_by(f64::total_cmp);
    let uniformity = if pvalues.len() >= 5 {
        Some(uniformity_check(&pvalues)?)
    } else {
        if !pvalues.is_empty() {
            warnings.push(format!("only {} p-values; uniformity check skipped", pvalues.len()));
        }
        None
    };
    let uniformity_rejected = uniformity.as_ref().is_some_and(|u| u.p_value < ALARM_LEVEL);
    let single_test_alarm = min_pvalue.is_some_and(|p| p < ALARM_LEVEL / pvalues.len() as f64);
    Ok(HomogeneityReport {
        strata,
        pvalues,
        min_pvalue,
        uniformity,
        uniformity_rejected,
        single_test_alarm,
        alarm: uniformity_rejected || single_test_alarm,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogenous::DigitStream;
    use crate::scm::{sample, tests::simpson};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_col(vals: &[usize]) -> Dataset {
        Dataset { names: vec!["A".into()], domains: vec![vec!["0".into(), "1".into()]], rows: vals.iter().map(|&v| vec![v]).collect() }
    }

    #[test]
    fn blocks_are_contiguous_and_balanced() {
        let s = stratify_split(&one_col(&[0; 10]), &[], 2, None).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].blocks, vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]]);
        let s = stratify_split(&one_col(&[0; 7]), &["A"], 3, None).unwrap();
        let lens: Vec<usize> = s[0].blocks.iter().map(|b| b.len()).collect();
        assert_eq!(lens, vec![3, 2, 2]);
        let s = stratify_split(&one_col(&[1]), &["A"], 2, None).unwrap();
        assert!(s[0].too_small && s[0].blocks[1].is_empty());
        assert!(stratify_split(&one_col(&[1]), &["Q"], 2, None).is_err());
        assert!(stratify_split(&one_col(&[1]), &["A"], 1, None).is_err());
    }

    #[test]
    fn secondary_order_column() {
        let d = Dataset {
            names: vec!["A".into(), "O".into()],
            domains: vec![vec!["0".into()], vec!["0".into(), "1".into()]],
            rows: vec![vec![0, 1], vec![0, 0], vec![0, 1], vec![0, 0]],
        };
        let s = stratify_split(&d, &["A"], 2, Some("O")).unwrap();
        assert_eq!(s[0].blocks, vec![vec![1, 3], vec![0, 2]]);
    }

    #[test]
    fn chi_square_extremes() {
        let t = chi_square_homogeneity(&[30, 70], &[30, 70]).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
        assert!(two_sample_pvalue(&[1000, 0], &[0, 1000]).unwrap() < 1e-10);
        assert!(two_sample_pvalue(&[0, 0], &[1, 2]).is_err());
        // one category only after pooling
        let t = chi_square_homogeneity(&[10, 1], &[10, 0]).unwrap();
        assert_eq!(t.df, 0);
    }

    #[test]
    fn chi_square_matches_two_by_two_formula() {
        let (a, b, c, d) = (40.0f64, 60.0, 55.0, 45.0);
        let n = a + b + c + d;
        let direct = n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d));
        let t = chi_square_homogeneity(&[40, 60], &[55, 45]).unwrap();
        assert!((t.statistic - direct).abs() < 1e-10);
    }

    #[test]
    fn ks_statistics() {
        let u = uniformity_check(&[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        assert!((u.statistic - 0.1).abs() < 1e-12);
        let u = uniformity_check(&[0.5; 100]).unwrap();
        assert!((u.statistic - 0.5).abs() < 1e-12 && u.p_value < 1e-10);
        assert!(uniformity_check(&[0.5; 4]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        assert!(uniformity_check(&v).unwrap().p_value > 0.01);
    }

    #[test]
    fn iid_data_passes_and_tiny_data_warns() {
        let mut alarms = 0;
        for seed in 0..40 {
            let data = sample(&simpson(), &DigitStream::seeded(seed), 4000).unwrap();
            let rep = homogeneity_report(&data, &["X"], "T", "R", 4, None).unwrap();
            assert!(rep.pvalues.len() <= 4 * 3 + 2 * 3 && rep.pvalues.len() >= 12);
            alarms += usize::from(rep.alarm);
        }
        assert!(alarms <= 2, "{alarms} false alarms in 40 iid datasets");
        let tiny = sample(&simpson(), &DigitStream::seeded(2), 3).unwrap();
        let rep = homogeneity_report(&tiny, &["X"], "T", "R", 2, None).unwrap();
        assert!(rep.warnings.iter().any(|w| w.contains("empty report")));
        assert!(!rep.alarm);
    }
}
