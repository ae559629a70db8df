use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::metrics::Counts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_star: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n5: Option<u64>,
    pub counts: Counts,
}

impl SweepRow {
    pub fn new(p_star: f64, counts: Counts) -> Self {
        let m = counts.metrics();
        SweepRow {
            p_star,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            n5: None,
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<SweepRow>,
    pub sentences: usize,
    pub links: usize,
}

impl EvalReport {
    pub fn best_f1(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .max_by(|a, b| a.f1.total_cmp(&b.f1).then(b.p_star.total_cmp(&a.p_star)))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} sentences, {} gold links",
            self.sentences, self.links
        );
        let _ = writeln!(
            out,
            "{:>5}  {:>9}  {:>9}  {:>9}  {:>10}",
            "p*", "precision", "recall", "f1", "n5"
        );
        for r in &self.rows {
            let n5 = r.n5.map_or_else(|| "-".to_string(), |n| n.to_string());
            let _ = writeln!(
                out,
                "{:>5.2}  {:>9.4}  {:>9.4}  {:>9.4}  {:>10}",
                r.p_star, r.precision, r.recall, r.f1, n5
            );
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.rows {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_and_records() {
        let report = EvalReport {
            rows: vec![
                SweepRow::new(
                    0.0,
                    Counts {
                        predicted: 4,
                        gold: 4,
                        true_positives: 2,
                    },
                ),
                SweepRow::new(
                    0.5,
                    Counts {
                        predicted: 1,
                        gold: 4,
                        true_positives: 1,
                    },
                ),
            ],
            sentences: 3,
            links: 4,
        };
        let table = report.to_table();
        assert_eq!(table.lines().count(), 4);
        assert!(table.contains(" 0.50     1.0000     0.2500     0.4000           -"));
        let mut buf = Vec::new();
        report.write_jsonl(&mut buf).unwrap();
        let first: SweepRow =
            serde_json::from_str(std::str::from_utf8(&buf).unwrap().lines().next().unwrap())
                .unwrap();
        assert_eq!(first, report.rows[0]);
        assert_eq!(report.best_f1().unwrap().p_star, 0.0);
    }
}
