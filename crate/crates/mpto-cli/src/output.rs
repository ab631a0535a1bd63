//! Text artifacts: iteration log, density images, summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mpto::frontend::Pipeline;
use mpto::optimizer::IterationRecord;

use crate::config::ProblemChoice;
use crate::error::CliError;

pub const LOG_FILE: &str = "log.tsv";
pub const TIMINGS_FILE: &str = "timings.tsv";
pub const PGM_FILE: &str = "density.pgm";
pub const CSV_FILE: &str = "density.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_FILE: &str = "config.ini";
pub const GAIN_FILE: &str = "gain.csv";

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn log_header(names: &[String]) -> String {
    let mut s = String::from("iteration\tpipeline");
    for n in names {
        s.push('\t');
        s.push_str(n);
    }
    s.push_str("\tchange\tlarge_factorizations\tlarge_solves\tdense_factorizations\tdense_solves\n");
    s
}

/// One log record; contains no timings so logs are reproducible.
pub fn log_line(pipeline: Pipeline, rec: &IterationRecord) -> String {
    let mut s = format!("{}\t{}", rec.iteration, pipeline);
    for v in &rec.values {
        let _ = write!(s, "\t{v:e}");
    }
    let l = &rec.ledger;
    let _ = writeln!(
        s,
        "\t{:e}\t{}\t{}\t{}\t{}",
        rec.change, l.large_factorizations, l.large_solves, l.dense_factorizations, l.dense_solves
    );
    s
}

pub const TIMINGS_HEADER: &str = "iteration\tpipeline\twall_seconds\tsolver_seconds\n";

pub fn timing_line(pipeline: Pipeline, rec: &IterationRecord) -> String {
    format!("{}\t{}\t{:.6}\t{:.6}\n", rec.iteration, pipeline, rec.wall_seconds, rec.ledger.seconds)
}

/// Parsed log record.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iteration: usize,
    pub pipeline: String,
    pub values: Vec<f64>,
    pub change: f64,
    pub counts: [u64; 4],
}

/// Reads a log written by [`log_header`] and [`log_line`].
pub fn parse_log(text: &str) -> Result<(Vec<String>, Vec<LogRecord>), String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty log")?.split('\t').collect();
    if header.len() < 8 || header[0] != "iteration" {
        return Err("malformed log header".into());
    }
    let nv = header.len() - 7;
    let names = header[2..2 + nv].iter().map(|s| s.to_string()).collect();
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != header.len() {
            return Err(format!("log line {}: expected {} fields", k + 2, header.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("log line {}: {e}", k + 2));
        let cnt = |s: &str| s.parse::<u64>().map_err(|e| format!("log line {}: {e}", k + 2));
        out.push(LogRecord {
            iteration: f[0].parse().map_err(|e| format!("log line {}: {e}", k + 2))?,
            pipeline: f[1].to_string(),
            values: f[2..2 + nv].iter().map(|s| num(s)).collect::<Result<_, _>>()?,
            change: num(f[2 + nv])?,
            counts: [cnt(f[3 + nv])?, cnt(f[4 + nv])?, cnt(f[5 + nv])?, cnt(f[6 + nv])?],
        });
    }
    Ok((names, out))
}

/// Gray value of one element, 255 where `x̃ = 1` renders white.
///
/// Conductive material is shown white for the heat problem, solid black for the mechanism.
fn gray(problem: ProblemChoice, xt: f64) -> u8 {
    let v = xt.clamp(0.0, 1.0);
    let v = match problem {
        ProblemChoice::Problem1 => v,
        ProblemChoice::Problem2 => 1.0 - v,
    };
    (255.0 * v).round() as u8
}

/// ASCII PGM with `nely` rows and `nelx` columns; element `(col, row)` is `row + col·nely`.
pub fn pgm(problem: ProblemChoice, nelx: usize, nely: usize, xt: &[f64]) -> String {
    let mut s = format!("P2\n{nelx} {nely}\n255\n");
    for r in 0..nely {
        let row: Vec<String> = (0..nelx).map(|c| gray(problem, xt[r + c * nely]).to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Filtered densities in the same layout as [`pgm`].
pub fn density_csv(nelx: usize, nely: usize, xt: &[f64]) -> String {
    let mut s = String::new();
    for r in 0..nely {
        let row: Vec<String> = (0..nelx).map(|c| format!("{:e}", xt[r + c * nely])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Ordered `key=value` lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        Summary(
            text.lines()
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpto::sparse::CostLedger;

    #[test]
    fn pgm_layout_and_shading() {
        // 2 columns × 3 rows, element (col, row) = row + 3 col
        let xt = [0.0, 0.5, 1.0, 1.0, 1.0, 0.0];
        let p1 = pgm(ProblemChoice::Problem1, 2, 3, &xt);
        assert_eq!(p1, "P2\n2 3\n255\n0 255\n128 255\n255 0\n");
        let p2 = pgm(ProblemChoice::Problem2, 2, 3, &xt);
        assert_eq!(p2.lines().nth(3), Some("255 0"));
        assert_eq!(density_csv(2, 3, &xt).lines().count(), 3);
    }

    #[test]
    fn log_round_trip() {
        let names = vec!["g0".to_string(), "g1".to_string()];
        let rec = IterationRecord {
            iteration: 3,
            values: vec![1.25, -3e-7],
            change: 0.125,
            ledger: CostLedger { large_factorizations: 1, large_solves: 7, dense_factorizations: 2, dense_solves: 9, flops: 5, seconds: 0.5 },
            wall_seconds: 1.0,
        };
        let text = log_header(&names) + &log_line(Pipeline::Condensed, &rec);
        let (n, rows) = parse_log(&text).unwrap();
        assert_eq!(n, names);
        assert_eq!(rows[0].values, rec.values);
        assert_eq!(rows[0].counts, [1, 7, 2, 9]);
        assert_eq!(rows[0].pipeline, "condensed");
        assert!(!text.contains("0.5"));
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::default();
        s.push("a", 1);
        s.push("b.c", "x=y");
        assert_eq!(Summary::parse(&s.to_text()), s);
        assert_eq!(s.get("b.c"), Some("x=y"));
    }
}
