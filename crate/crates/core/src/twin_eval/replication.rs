use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{Answer, ResponseDataset};
use crate::stats::{chi_square_2x2, mean, paired_t, pearson, proportion_test, welch_t, wilcoxon_signed_rank, TestMethod, TestResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Between,
    Within,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationTest {
    WelchT,
    /// Paired t, falling back to Wilcoxon when the differences are constant.
    PairedT,
    Wilcoxon,
    ChiSquare2x2,
    Pearson,
    Proportion,
}

/// Direction of the human reference effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Arm2Greater,
    Arm1Greater,
    Positive,
    Negative,
}

impl Direction {
    fn matches(self, effect: f64) -> bool {
        match self {
            Direction::Arm2Greater | Direction::Positive => effect > 0.0,
            Direction::Arm1Greater | Direction::Negative => effect < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub name: String,
    pub design: Design,
    pub test: ReplicationTest,
    /// Item ids; one for a proportion test, two otherwise.
    pub arms: Vec<String>,
    pub expected: Direction,
    /// 1-based option counted as a success for chi-square and proportion tests.
    #[serde(default)]
    pub success_option: Option<usize>,
    #[serde(default = "half")]
    pub null_proportion: f64,
}

fn half() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

impl ExperimentSpec {
    /// TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
        }
    }

    /// Check arms and test/design combinations against the dataset.
    pub fn validate(&self, ds: &ResponseDataset) -> Result<()> {
        let mut problems = Vec::new();
        for ex in &self.experiments {
            let want = if ex.test == ReplicationTest::Proportion { 1 } else { 2 };
            if ex.arms.len() != want {
                problems.push(format!("{}: {:?} needs {want} arm(s), got {}", ex.name, ex.test, ex.arms.len()));
            }
            let ok_design = match ex.test {
                ReplicationTest::WelchT | ReplicationTest::ChiSquare2x2 => ex.design == Design::Between,
                ReplicationTest::PairedT | ReplicationTest::Wilcoxon | ReplicationTest::Pearson => ex.design == Design::Within,
                ReplicationTest::Proportion => true,
            };
            if !ok_design {
                problems.push(format!("{}: {:?} is not a {:?} test", ex.name, ex.test, ex.design));
            }
            for arm in &ex.arms {
                match ds.item_index(arm) {
                    None => problems.push(format!("{}: unknown item `{arm}`", ex.name)),
                    Some(i) => {
                        let meta = &ds.items[i];
                        let counting = matches!(ex.test, ReplicationTest::ChiSquare2x2 | ReplicationTest::Proportion);
                        if counting {
                            match ex.success_option {
                                Some(k) if k >= 1 && k <= meta.options.len() => {}
                                _ => problems.push(format!("{}: item `{arm}` needs a valid success_option", ex.name)),
                            }
                        } else if !meta.kind.is_scalar() && !meta.kind.is_discrete() {
                            problems.push(format!("{}: item `{arm}` is not numeric", ex.name));
                        }
                    }
                }
            }
            if !(0.0..=1.0).contains(&ex.null_proportion) {
                problems.push(format!("{}: null_proportion outside [0, 1]", ex.name));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Spec(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub item: String,
    pub n: usize,
    /// Mean answer, or success proportion for counting tests.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub experiment: String,
    pub channel: String,
    pub arms: Vec<ArmSummary>,
    /// Signed effect: arm2 - arm1, r, or proportion - null.
    pub effect: f64,
    pub test: TestResult,
    pub replicated: bool,
}

fn arm_values(ds: &ResponseDataset, channel: &str, item: usize) -> Result<Vec<Option<f64>>> {
    Ok(ds.channel(channel)?.iter().map(|row| row[item].as_ref().and_then(Answer::as_f64)).collect())
}

fn run_one(ds: &ResponseDataset, channel: &str, ex: &Experiment, alpha: f64) -> Result<ReplicationOutcome> {
    let idx: Vec<usize> = ex.arms.iter().map(|a| ds.item_index(a).expect("validated")).collect();
    let cols: Vec<Vec<Option<f64>>> = idx.iter().map(|&i| arm_values(ds, channel, i)).collect::<Result<_>>()?;
    let present = |c: &Vec<Option<f64>>| c.iter().flatten().copied().collect::<Vec<f64>>();
    let summary = |k: usize, vals: &[f64]| ArmSummary {
        item: ex.arms[k].clone(),
        n: vals.len(),
        mean: if vals.is_empty() { f64::NAN } else { mean(vals) },
    };

    let (test, effect, arms) = match ex.test {
        ReplicationTest::WelchT => {
            let (a, b) = (present(&cols[0]), present(&cols[1]));
            let res = welch_t(&a, &b)?;
            (res, mean(&b) - mean(&a), vec![summary(0, &a), summary(1, &b)])
        }
        ReplicationTest::PairedT | ReplicationTest::Wilcoxon | ReplicationTest::Pearson => {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for (a, b) in cols[0].iter().zip(&cols[1]) {
                if let (Some(a), Some(b)) = (a, b) {
                    x.push(*a);
                    y.push(*b);
                }
            }
            let diff = if x.is_empty() { 0.0 } else { mean(&y) - mean(&x) };
            let arms = vec![summary(0, &x), summary(1, &y)];
            match ex.test {
                ReplicationTest::Pearson => {
                    let r = pearson(&x, &y)?;
                    let n = x.len() as f64;
                    let p = if n > 2.0 && r.abs() < 1.0 {
                        let t = r * ((n - 2.0) / (1.0 - r * r)).sqrt();
                        use statrs::distribution::{ContinuousCDF, StudentsT};
                        2.0 * (1.0 - StudentsT::new(0.0, 1.0, n - 2.0).expect("df").cdf(t.abs()))
                    } else {
                        0.0
                    };
                    let mut res = TestResult::new(TestMethod::Pearson, r, p, x.len());
                    res.df = Some(n - 2.0);
                    res.effect_size = Some(r);
                    (res, r, arms)
                }
                ReplicationTest::PairedT => match paired_t(&x, &y) {
                    Ok(res) => (res, diff, arms),
                    Err(Error::Argument(_)) => (wilcoxon_signed_rank(&y, &x)?, diff, arms),
                    Err(e) => return Err(e),
                },
                _ => (wilcoxon_signed_rank(&y, &x)?, diff, arms),
            }
        }
        ReplicationTest::ChiSquare2x2 | ReplicationTest::Proportion => {
            let success = ex.success_option.expect("validated") - 1;
            let counts: Vec<(usize, usize)> = idx
                .iter()
                .map(|&i| {
                    let mut hit = 0;
                    let mut n = 0;
                    for row in ds.channel(channel).expect("checked") {
                        if let Some(Answer::Choice(c)) = &row[i] {
                            n += 1;
                            hit += usize::from(*c == success);
                        }
                    }
                    (hit, n)
                })
                .collect();
            let arms: Vec<ArmSummary> = counts
                .iter()
                .enumerate()
                .map(|(k, &(h, n))| ArmSummary {
                    item: ex.arms[k].clone(),
                    n,
                    mean: if n == 0 { f64::NAN } else { h as f64 / n as f64 },
                })
                .collect();
            if ex.test == ReplicationTest::Proportion {
                let (h, n) = counts[0];
                let res = proportion_test(h, n, ex.null_proportion)?;
                (res, h as f64 / n as f64 - ex.null_proportion, arms)
            } else {
                let table = counts.iter().map(|&(h, n)| [h as f64, (n - h) as f64]).collect::<Vec<_>>();
                let res = chi_square_2x2([table[0], table[1]])?;
                (res, arms[1].mean - arms[0].mean, arms)
            }
        }
    };
    let replicated = ex.expected.matches(effect) && test.p_value < alpha;
    Ok(ReplicationOutcome {
        experiment: ex.name.clone(),
        channel: channel.to_string(),
        arms,
        effect,
        test,
        replicated,
    })
}

/// Run every experiment on one channel. An experiment whose test cannot be
/// computed is reported with its error message instead of aborting the run.
pub fn replication_report(ds: &ResponseDataset, channel: &str, spec: &ExperimentSpec) -> Result<Vec<std::result::Result<ReplicationOutcome, String>>> {
    spec.validate(ds)?;
    ds.channel(channel)?;
    Ok(spec
        .experiments
        .iter()
        .map(|ex| run_one(ds, channel, ex, spec.alpha).map_err(|e| format!("{}: {e}", ex.name)))
        .collect())
}
