//! Confusion counts and the four performance measures.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, pred: Label, truth: Label) {
        match (pred, truth) {
            (Label::Pos, Label::Pos) => self.tp += 1,
            (Label::Neg, Label::Neg) => self.tn += 1,
            (Label::Pos, Label::Neg) => self.fp += 1,
            (Label::Neg, Label::Pos) => self.fn_ += 1,
        }
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<Confusion> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        c.add(p, t);
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: f64,
    pub am: f64,
    pub f: f64,
    pub wc: f64,
    /// F had a zero denominator and was set to 1.
    pub f_defaulted: bool,
    /// A class was absent, so AM averages only the defined rate.
    pub am_partial: bool,
}

/// Acc, AM, F = 2TP/(2TP+FP+FN), and the unnormalized WC = (1-alpha)FN + (alpha/gamma)FP.
pub fn scores(c: &Confusion, alpha: f64, gamma: f64) -> Scores {
    let total = c.total();
    let acc = if total == 0 {
        0.0
    } else {
        (c.tp + c.tn) as f64 / total as f64
    };
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    let tpr = (pos > 0).then(|| c.tp as f64 / pos as f64);
    let tnr = (neg > 0).then(|| c.tn as f64 / neg as f64);
    let (am, am_partial) = match (tpr, tnr) {
        (Some(a), Some(b)) => ((a + b) / 2.0, false),
        (Some(a), None) | (None, Some(a)) => (a, true),
        (None, None) => (0.0, true),
    };
    let f_den = 2 * c.tp + c.fp + c.fn_;
    let (f, f_defaulted) = if f_den == 0 {
        (1.0, true)
    } else {
        (2.0 * c.tp as f64 / f_den as f64, false)
    };
    let wc = (1.0 - alpha) * c.fn_ as f64 + (alpha / gamma) * c.fp as f64;
    Scores {
        acc,
        am,
        f,
        wc,
        f_defaulted,
        am_partial,
    }
}

/// Model-selection target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfMeasure {
    Acc,
    Am,
    F,
    Wc,
}

impl PerfMeasure {
    pub fn value(&self, s: &Scores) -> f64 {
        match self {
            PerfMeasure::Acc => s.acc,
            PerfMeasure::Am => s.am,
            PerfMeasure::F => s.f,
            PerfMeasure::Wc => s.wc,
        }
    }

    pub fn maximize(&self) -> bool {
        !matches!(self, PerfMeasure::Wc)
    }

    /// Score assigned to a failed candidate.
    pub fn worst(&self) -> f64 {
        if self.maximize() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    }

    /// Strictly better; ties keep the incumbent.
    pub fn better(&self, candidate: f64, incumbent: f64) -> bool {
        if self.maximize() {
            candidate > incumbent
        } else {
            candidate < incumbent
        }
    }
}

impl fmt::Display for PerfMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PerfMeasure::Acc => "acc",
            PerfMeasure::Am => "am",
            PerfMeasure::F => "f",
            PerfMeasure::Wc => "wc",
        };
        f.write_str(s)
    }
}

impl FromStr for PerfMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "acc" | "accuracy" => Ok(PerfMeasure::Acc),
            "am" => Ok(PerfMeasure::Am),
            "f" => Ok(PerfMeasure::F),
            "wc" => Ok(PerfMeasure::Wc),
            other => Err(invalid(format!("unknown performance measure '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[i64]) -> Vec<Label> {
        v.iter().map(|&x| Label::from_int(x).unwrap()).collect()
    }

    #[test]
    fn all_correct_and_all_wrong() {
        let t = labels(&[1, -1, 1, 1, -1]);
        let c = confusion(&t, &t).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let flipped: Vec<Label> = t.iter().map(|l| l.flip()).collect();
        let c = confusion(&flipped, &t).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn six_point_enumeration() {
        let pred = labels(&[1, 1, -1, -1, 1, -1]);
        let truth = labels(&[1, -1, -1, 1, 1, -1]);
        let c = confusion(&pred, &truth).unwrap();
        assert_eq!(c, Confusion { tp: 2, tn: 2, fp: 1, fn_: 1 });
    }

    #[test]
    fn length_mismatch() {
        assert!(confusion(&labels(&[1]), &labels(&[1, -1])).is_err());
    }

    #[test]
    fn formula_examples() {
        let s = scores(&Confusion { tp: 2, tn: 0, fp: 1, fn_: 1 }, 0.5, 1.0);
        assert!((s.f - 4.0 / 6.0).abs() < 1e-15);
        let s = scores(&Confusion { tp: 5, tn: 5, fp: 10, fn_: 10 }, 0.3, 1.0);
        assert!((s.wc - 10.0).abs() < 1e-12);
        let s = scores(&Confusion { tp: 4, tn: 0, fp: 3, fn_: 0 }, 0.5, 1.0);
        assert!((s.am - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_denominators_flagged() {
        let s = scores(&Confusion { tp: 0, tn: 7, fp: 0, fn_: 0 }, 0.5, 1.0);
        assert!(s.f_defaulted);
        assert_eq!(s.f, 1.0);
        assert!(s.am_partial);
        assert_eq!(s.am, 1.0);
        assert_eq!(s.wc, 0.0);
    }

    #[test]
    fn measure_parsing_and_direction() {
        assert_eq!("WC".parse::<PerfMeasure>().unwrap(), PerfMeasure::Wc);
        assert!(!PerfMeasure::Wc.maximize());
        assert!(PerfMeasure::Wc.better(1.0, 2.0));
        assert!(PerfMeasure::Acc.better(0.9, 0.8));
        assert!(!PerfMeasure::Acc.better(0.8, 0.8));
        assert!("auc".parse::<PerfMeasure>().is_err());
    }
}
