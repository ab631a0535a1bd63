//! Sectioned `key = value` configuration files.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use mpto::frontend::Pipeline;
use mpto::sparse::Backend;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemChoice {
    /// Multi-port heat conduction.
    Problem1,
    /// Multi-input multi-output compliant mechanism.
    Problem2,
}

impl fmt::Display for ProblemChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemChoice::Problem1 => "problem1",
            ProblemChoice::Problem2 => "problem2",
        })
    }
}

impl FromStr for ProblemChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "problem1" => Ok(ProblemChoice::Problem1),
            "problem2" => Ok(ProblemChoice::Problem2),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineChoice {
    Elementary,
    Condensed,
    /// Both pipelines in sequence, compared in the summary.
    Both,
}

impl PipelineChoice {
    pub fn pipelines(self) -> Vec<Pipeline> {
        match self {
            PipelineChoice::Elementary => vec![Pipeline::Elementary],
            PipelineChoice::Condensed => vec![Pipeline::Condensed],
            PipelineChoice::Both => vec![Pipeline::Elementary, Pipeline::Condensed],
        }
    }
}

impl fmt::Display for PipelineChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PipelineChoice::Elementary => "elementary",
            PipelineChoice::Condensed => "condensed",
            PipelineChoice::Both => "both",
        })
    }
}

impl FromStr for PipelineChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "elementary" => Ok(PipelineChoice::Elementary),
            "condensed" => Ok(PipelineChoice::Condensed),
            "both" => Ok(PipelineChoice::Both),
            other => Err(format!("unknown pipeline '{other}'")),
        }
    }
}

/// Parameters of the `gain` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct GainConfig {
    /// System sizes of the predicted curves.
    pub n: Vec<f64>,
    pub m_min: f64,
    pub m_max: f64,
    /// Number of log-spaced points between `m_min` and `m_max`.
    pub m_points: usize,
    pub models: Vec<Backend>,
    /// Primary-DOF counts timed on real problems; empty disables measuring.
    pub measure_m: Vec<usize>,
    /// Largest `n` that is timed.
    pub measure_max_n: f64,
    pub repeats: usize,
}

impl Default for GainConfig {
    fn default() -> Self {
        Self {
            n: vec![1e3, 1e4, 1e6, 1e9],
            m_min: 1.0,
            m_max: 1000.0,
            m_points: 50,
            models: vec![Backend::Direct, Backend::Iterative],
            measure_m: Vec::new(),
            measure_max_n: 1e4,
            repeats: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemChoice,
    pub nelx: usize,
    pub nely: usize,
    /// Number of ports, problem 1.
    pub ports: usize,
    /// Volume fraction, problem 1.
    pub vbar: f64,
    /// Port placement and load magnitudes, problem 1; random designs in `verify`.
    pub seed: u64,
    /// Target Jacobian rows, problem 2.
    pub jbar: Vec<Vec<f64>>,
    pub pipeline: PipelineChoice,
    pub backend: Backend,
    pub threads: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Overrides the problem's default move limit.
    pub move_limit: Option<f64>,
    pub output_dir: PathBuf,
    pub gain: Option<GainConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemChoice::Problem1,
            nelx: 40,
            nely: 40,
            ports: 8,
            vbar: 0.3,
            seed: 1,
            jbar: vec![vec![0.5, 2.0], vec![1.0, -1.0]],
            pipeline: PipelineChoice::Condensed,
            backend: Backend::Direct,
            threads: 1,
            max_iters: 50,
            tol: 0.01,
            move_limit: None,
            output_dir: PathBuf::from("out"),
            gain: None,
        }
    }
}

fn list<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Matrix literal, rows separated by `;`, entries by `,`.
pub fn format_matrix(rows: &[Vec<f64>]) -> String {
    rows.iter().map(|r| list(r)).collect::<Vec<_>>().join("; ")
}

pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|r| r.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{}': {e}", v.trim()))).collect())
        .collect::<Result<_, _>>()?;
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err("matrix rows differ in length".into());
    }
    Ok(rows)
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|v| v.trim().parse::<T>().map_err(|e| format!("'{}': {e}", v.trim()))).collect()
}

fn parse_value<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("'{s}': {e}"))
}

impl RunConfig {
    /// Canonical text form; `parse(&c.to_text())` returns `c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let move_limit = self.move_limit.map_or("auto".to_string(), |v| v.to_string());
        let _ = write!(
            s,
            "[problem]\nkind = {}\nnelx = {}\nnely = {}\nports = {}\nvbar = {}\nseed = {}\njbar = {}\n\n\
             [solver]\npipeline = {}\nbackend = {}\nthreads = {}\n\n\
             [optimizer]\nmax_iters = {}\ntol = {}\nmove = {}\n\n\
             [output]\ndir = {}\n",
            self.problem,
            self.nelx,
            self.nely,
            self.ports,
            self.vbar,
            self.seed,
            format_matrix(&self.jbar),
            self.pipeline,
            self.backend,
            self.threads,
            self.max_iters,
            self.tol,
            move_limit,
            self.output_dir.display(),
        );
        if let Some(g) = &self.gain {
            let _ = write!(
                s,
                "\n[gain]\nn = {}\nm_min = {}\nm_max = {}\nm_points = {}\nmodels = {}\nmeasure_m = {}\nmeasure_max_n = {}\nrepeats = {}\n",
                list(&g.n),
                g.m_min,
                g.m_max,
                g.m_points,
                list(&g.models),
                list(&g.measure_m),
                g.measure_max_n,
                g.repeats,
            );
        }
        s
    }

    /// Parses a configuration; unspecified keys keep their defaults except
    /// `problem.kind`, which is required.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let err = |line: usize, message: String| CliError::Config { line, message };
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen: Vec<String> = Vec::new();
        let mut kind_seen = false;
        let mut content = false;
        let mut last = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last = line;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            content = true;
            if let Some(name) = t.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err(line, "unterminated section header".into()))?;
                let name = name.trim();
                if !["problem", "solver", "optimizer", "output", "gain"].contains(&name) {
                    return Err(err(line, format!("unknown section [{name}]")));
                }
                if name == "gain" && cfg.gain.is_none() {
                    cfg.gain = Some(GainConfig::default());
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = t.split_once('=').ok_or_else(|| err(line, format!("expected key = value, got '{t}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| err(line, format!("key '{key}' outside of a section")))?;
            let full = format!("{sec}.{key}");
            if seen.contains(&full) {
                return Err(err(line, format!("duplicate key {full}")));
            }
            seen.push(full.clone());
            let res: Result<(), String> = (|| {
                match (sec, key) {
                    ("problem", "kind") => {
                        cfg.problem = value.parse()?;
                        kind_seen = true;
                    }
                    ("problem", "nelx") => cfg.nelx = parse_value(value)?,
                    ("problem", "nely") => cfg.nely = parse_value(value)?,
                    ("problem", "ports") => cfg.ports = parse_value(value)?,
                    ("problem", "vbar") => cfg.vbar = parse_value(value)?,
                    ("problem", "seed") => cfg.seed = parse_value(value)?,
                    ("problem", "jbar") => cfg.jbar = parse_matrix(value)?,
                    ("solver", "pipeline") => cfg.pipeline = value.parse()?,
                    ("solver", "backend") => cfg.backend = value.parse().map_err(|e: mpto::Error| e.to_string())?,
                    ("solver", "threads") => cfg.threads = parse_value(value)?,
                    ("optimizer", "max_iters") => cfg.max_iters = parse_value(value)?,
                    ("optimizer", "tol") => cfg.tol = parse_value(value)?,
                    ("optimizer", "move") => {
                        cfg.move_limit = if value == "auto" { None } else { Some(parse_value(value)?) }
                    }
                    ("output", "dir") => cfg.output_dir = PathBuf::from(value),
                    ("gain", _) => {
                        let g = cfg.gain.as_mut().expect("gain section opened");
                        match key {
                            "n" => g.n = parse_list(value)?,
                            "m_min" => g.m_min = parse_value(value)?,
                            "m_max" => g.m_max = parse_value(value)?,
                            "m_points" => g.m_points = parse_value(value)?,
                            "models" => {
                                g.models = parse_list::<String>(value)?
                                    .iter()
                                    .map(|v| v.parse::<Backend>().map_err(|e| e.to_string()))
                                    .collect::<Result<_, _>>()?
                            }
                            "measure_m" => g.measure_m = parse_list(value)?,
                            "measure_max_n" => g.measure_max_n = parse_value(value)?,
                            "repeats" => g.repeats = parse_value(value)?,
                            _ => return Err(format!("unknown key {full}")),
                        }
                    }
                    _ => return Err(format!("unknown key {full}")),
                }
                Ok(())
            })();
            res.map_err(|m| err(line, m))?;
        }
        if !content {
            return Err(err(1, "empty configuration".into()));
        }
        if !kind_seen {
            return Err(err(last, "missing required key problem.kind".into()));
        }
        Ok(cfg)
    }

    /// Range checks that do not need a built problem.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if self.nelx == 0 || self.nely == 0 {
            return bad("grid needs at least one element in each direction".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be nonnegative, got {}", self.tol));
        }
        if let Some(m) = self.move_limit {
            if !(m > 0.0 && m <= 1.0) {
                return bad(format!("move limit must lie in (0, 1], got {m}"));
            }
        }
        if self.problem == ProblemChoice::Problem2 {
            let x = self.jbar.len();
            if x == 0 || self.jbar.iter().any(|r| r.len() != x) {
                return bad("jbar must be a nonempty square matrix".into());
            }
        }
        if let Some(g) = &self.gain {
            if g.n.iter().any(|&n| !(n >= 2.0)) || !(g.m_min >= 1.0 && g.m_max >= g.m_min) || g.m_points == 0 {
                return bad("gain sweep needs n >= 2, 1 <= m_min <= m_max and m_points >= 1".into());
            }
            if g.models.is_empty() || g.repeats == 0 {
                return bad("gain sweep needs at least one model and one repeat".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_defaults() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        let g = RunConfig { gain: Some(GainConfig { measure_m: vec![2, 8], ..Default::default() }), ..c };
        assert_eq!(RunConfig::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::parse("# mechanism\n[problem]\nkind = problem2\njbar = 1, -2 ; 3,4\n").unwrap();
        assert_eq!(c.problem, ProblemChoice::Problem2);
        assert_eq!(c.jbar, vec![vec![1.0, -2.0], vec![3.0, 4.0]]);
        assert_eq!(c.max_iters, 50);
    }

    fn line_of(text: &str) -> usize {
        match RunConfig::parse(text) {
            Err(CliError::Config { line, .. }) => line,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(""), 1);
        assert_eq!(line_of("  \n# only comments\n"), 1);
        assert_eq!(line_of("[problem]\nkind = problem1\nnelx = ten\n"), 3);
        assert_eq!(line_of("[problem]\nkind = problem3\n"), 2);
        assert_eq!(line_of("[problem]\nkind = problem1\n[mystery]\n"), 3);
        assert_eq!(line_of("nelx = 3\n"), 1);
        assert_eq!(line_of("[problem]\nkind = problem1\nkind = problem1\n"), 3);
        assert_eq!(line_of("[problem]\nkind = problem1\njunk\n"), 3);
        assert_eq!(line_of("[problem]\nnelx = 4\n"), 2);
        assert_eq!(line_of("[problem]\nkind = problem1\n[solver]\nbackend = lu\n"), 4);
        assert_eq!(line_of("[problem]\nkind = problem2\njbar = 1, 2; 3\n"), 3);
    }

    #[test]
    fn validation() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        assert!(RunConfig { threads: 0, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { nelx: 0, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { move_limit: Some(0.0), ..ok.clone() }.validate().is_err());
        let p2 = RunConfig { problem: ProblemChoice::Problem2, jbar: vec![vec![1.0, 2.0]], ..ok };
        assert!(p2.validate().is_err());
    }
}
